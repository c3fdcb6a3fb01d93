#include "bindoa/doa.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bindoa {

namespace {

constexpr double kGridEpsilon = 1e-6;
constexpr const char* kFormatTag = "bindoa-protodb";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, "malformed number in database: '" + text + "'");
  }
}

std::size_t parse_size(const std::string& text) {
  const double v = parse_double(text);
  if (v < 0.0 || v != std::floor(v)) {
    throw Error(ErrorCode::kIo, "expected a non-negative integer: " + text);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

double far_field_delay(const Position& mic, double azimuth_deg,
                       double speed_of_sound) {
  const double theta = azimuth_deg * kPi / 180.0;
  const double projection = mic[0] * std::cos(theta) + mic[1] * std::sin(theta);
  return -projection / speed_of_sound;
}

PrototypeDatabase::PrototypeDatabase(std::vector<Position> geometry,
                                     double resolution_deg, StftConfig config,
                                     double speed_of_sound)
    : geometry_(std::move(geometry)),
      resolution_deg_(resolution_deg),
      config_(config),
      speed_of_sound_(speed_of_sound),
      num_bins_(config.num_bins()) {
  config_.validate();
  if (geometry_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "prototype database needs at least two head microphones");
  }
  for (std::size_t a = 0; a < geometry_.size(); ++a) {
    for (std::size_t b = a + 1; b < geometry_.size(); ++b) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = geometry_[a][c] - geometry_[b][c];
        d2 += diff * diff;
      }
      if (d2 < 1e-12) {
        throw Error(ErrorCode::kInvalidArgument,
                    "coincident microphones " + std::to_string(a + 1) +
                        " and " + std::to_string(b + 1));
      }
    }
  }
  if (!(speed_of_sound > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "speed of sound must be positive");
  }
  const double count = 360.0 / resolution_deg;
  if (!(resolution_deg > 0.0) || std::abs(count - std::round(count)) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid resolution must divide 360 degrees");
  }
  const auto num_directions = static_cast<std::size_t>(std::round(count));
  directions_.resize(num_directions);
  for (std::size_t i = 0; i < num_directions; ++i) {
    directions_[i] = -180.0 + resolution_deg * static_cast<double>(i);
  }

  const std::size_t mics = geometry_.size();
  vectors_.resize(num_directions * num_bins_ * mics);
  std::vector<double> relative(mics);
  for (std::size_t i = 0; i < num_directions; ++i) {
    const double ref = far_field_delay(geometry_[0], directions_[i],
                                       speed_of_sound_);
    for (std::size_t m = 0; m < mics; ++m) {
      relative[m] =
          far_field_delay(geometry_[m], directions_[i], speed_of_sound_) - ref;
    }
    for (std::size_t k = 0; k < num_bins_; ++k) {
      const double omega = 2.0 * kPi * config_.bin_frequency(k);
      Complex* out = vectors_.data() + (i * num_bins_ + k) * mics;
      out[0] = Complex(1.0, 0.0);
      for (std::size_t m = 1; m < mics; ++m) {
        out[m] = std::polar(1.0, -omega * relative[m]);
      }
    }
  }
}

std::size_t PrototypeDatabase::index_of(double azimuth_deg) const {
  double wrapped = std::fmod(azimuth_deg + 180.0, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  const double pos = wrapped / resolution_deg_;
  const double rounded = std::round(pos);
  if (std::abs(pos - rounded) * resolution_deg_ > kGridEpsilon) {
    throw Error(ErrorCode::kInvalidArgument,
                "azimuth " + std::to_string(azimuth_deg) + " is off the grid");
  }
  return static_cast<std::size_t>(rounded) % directions_.size();
}

void PrototypeDatabase::save(std::ostream& out) const {
  out << "# anechoic head-mounted RTF prototypes; azimuth 0 deg = +x, "
         "90 deg = +y\n";
  out << std::setprecision(17);
  out << "format," << kFormatTag << ",1\n";
  out << "num_directions," << num_directions() << "\n";
  out << "num_bins," << num_bins_ << "\n";
  out << "num_mics," << num_mics() << "\n";
  out << "sample_rate," << config_.sample_rate << "\n";
  out << "window_len," << config_.window_len << "\n";
  out << "resolution_deg," << resolution_deg_ << "\n";
  out << "speed_of_sound," << speed_of_sound_ << "\n";
  for (std::size_t m = 0; m < num_mics(); ++m) {
    out << "mic," << (m + 1) << "," << geometry_[m][0] << ","
        << geometry_[m][1] << "," << geometry_[m][2] << "\n";
  }
  out << "direction_deg,bin";
  for (std::size_t m = 0; m < num_mics(); ++m) {
    out << ",re_" << (m + 1) << ",im_" << (m + 1);
  }
  out << "\n";
  for (std::size_t i = 0; i < num_directions(); ++i) {
    for (std::size_t k = 0; k < num_bins_; ++k) {
      out << directions_[i] << "," << k;
      for (const Complex& v : vector(i, k)) {
        out << "," << v.real() << "," << v.imag();
      }
      out << "\n";
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing prototype database");
}

PrototypeDatabase PrototypeDatabase::load(std::istream& in) {
  PrototypeDatabase db;
  std::size_t num_directions = 0;
  std::size_t num_mics = 0;
  bool have_format = false;
  bool in_rows = false;
  std::size_t rows = 0;
  std::string line;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv(line);
    if (!in_rows) {
      const std::string& key = f[0];
      if (key == "direction_deg") {
        if (!have_format || num_mics == 0 || num_directions == 0 ||
            db.num_bins_ == 0 || db.geometry_.size() != num_mics) {
          throw Error(ErrorCode::kIo, "incomplete prototype database header");
        }
        db.config_.hop = db.config_.window_len / 2;
        db.config_.validate();
        if (db.config_.num_bins() != db.num_bins_) {
          throw Error(ErrorCode::kIo, "bin count does not match window length");
        }
        db.directions_.assign(num_directions, 0.0);
        db.vectors_.assign(num_directions * db.num_bins_ * num_mics, {});
        in_rows = true;
        continue;
      }
      if (f.size() < 2) throw Error(ErrorCode::kIo, "malformed line: " + line);
      if (key == "format") {
        if (f[1] != kFormatTag) {
          throw Error(ErrorCode::kIo, "not a prototype database file");
        }
        have_format = true;
      } else if (key == "num_directions") {
        num_directions = parse_size(f[1]);
      } else if (key == "num_bins") {
        db.num_bins_ = parse_size(f[1]);
      } else if (key == "num_mics") {
        num_mics = parse_size(f[1]);
      } else if (key == "sample_rate") {
        db.config_.sample_rate = parse_double(f[1]);
      } else if (key == "window_len") {
        db.config_.window_len = parse_size(f[1]);
      } else if (key == "resolution_deg") {
        db.resolution_deg_ = parse_double(f[1]);
      } else if (key == "speed_of_sound") {
        db.speed_of_sound_ = parse_double(f[1]);
      } else if (key == "mic") {
        if (f.size() != 5) throw Error(ErrorCode::kIo, "malformed mic row");
        db.geometry_.push_back(
            {parse_double(f[2]), parse_double(f[3]), parse_double(f[4])});
      } else {
        throw Error(ErrorCode::kIo, "unknown header key '" + key + "'");
      }
      continue;
    }
    if (f.size() != 2 + 2 * num_mics) {
      throw Error(ErrorCode::kIo, "wrong field count in vector row");
    }
    const std::size_t direction = rows / db.num_bins_;
    const std::size_t bin = parse_size(f[1]);
    if (direction >= num_directions || bin != rows % db.num_bins_) {
      throw Error(ErrorCode::kIo, "vector rows out of order");
    }
    db.directions_[direction] = parse_double(f[0]);
    Complex* out = db.vectors_.data() + rows * num_mics;
    for (std::size_t m = 0; m < num_mics; ++m) {
      out[m] = Complex(parse_double(f[2 + 2 * m]), parse_double(f[3 + 2 * m]));
    }
    ++rows;
  }
  if (!in_rows || rows != num_directions * db.num_bins_) {
    throw Error(ErrorCode::kIo, "prototype database is truncated");
  }
  if (std::abs(db.resolution_deg_ * static_cast<double>(num_directions) -
               360.0) > 1e-6) {
    throw Error(ErrorCode::kIo, "directions do not cover 360 degrees");
  }
  return db;
}

PrototypeDatabase build_prototype_db(const std::vector<Position>& geometry,
                                     double resolution_deg,
                                     const StftConfig& config,
                                     double speed_of_sound) {
  return PrototypeDatabase(geometry, resolution_deg, config, speed_of_sound);
}

double hermitian_angle(std::span<const Complex> estimate,
                       std::span<const Complex> prototype) {
  if (estimate.size() != prototype.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "RTF vector sizes differ");
  }
  Complex inner{0.0, 0.0};
  double ne = 0.0;
  double np = 0.0;
  for (std::size_t m = 0; m < estimate.size(); ++m) {
    inner += std::conj(prototype[m]) * estimate[m];
    ne += std::norm(estimate[m]);
    np += std::norm(prototype[m]);
  }
  if (!(ne > 0.0) || !(np > 0.0)) {
    throw Error(ErrorCode::kNumerical, "Hermitian angle of a zero vector");
  }
  const double c = std::clamp(std::abs(inner) / std::sqrt(ne * np), 0.0, 1.0);
  return std::acos(c);
}

SpatialSpectrum spectrum(std::span<const RtfEstimate> rtf_per_bin,
                         const PrototypeDatabase& db,
                         std::span<const std::size_t> subset) {
  if (rtf_per_bin.size() != db.num_bins()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "need one RTF estimate per database bin");
  }
  SpatialSpectrum out;
  out.scores.assign(db.num_directions(), 0.0);
  out.subset.assign(subset.begin(), subset.end());
  for (const std::size_t k : subset) {
    if (k >= db.num_bins()) {
      throw Error(ErrorCode::kInvalidArgument, "subset bin out of range");
    }
    const RtfEstimate& est = rtf_per_bin[k];
    if (!est.valid) {
      ++out.skipped_invalid;
      continue;
    }
    const std::span<const Complex> g(est.g_h.data(),
                                     static_cast<std::size_t>(est.g_h.size()));
    for (std::size_t i = 0; i < db.num_directions(); ++i) {
      out.scores[i] -= hermitian_angle(g, db.vector(i, k));
    }
    ++out.contributing_bins;
  }
  return out;
}

DoaEstimate pick_peaks(std::span<const double> scores,
                       std::size_t num_sources) {
  const std::size_t n = scores.size();
  if (num_sources == 0 || num_sources > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "number of sources must be between 1 and the grid size");
  }
  DoaEstimate est;
  const auto first_change = [&]() -> std::size_t {
    for (std::size_t i = 0; i < n; ++i) {
      if (scores[i] != scores[(i + n - 1) % n]) return i;
    }
    return n;
  }();
  if (first_change == n) {
    est.degenerate = true;
    for (std::size_t i = 0; i < num_sources; ++i) est.indices.push_back(i);
    return est;
  }

  // Walk the circle run by run, starting at a run boundary so no plateau
  // is split.
  std::vector<std::size_t> peaks;
  std::vector<bool> is_peak(n, false);
  std::size_t start = first_change;
  std::size_t visited = 0;
  while (visited < n) {
    std::size_t len = 1;
    while (len < n && scores[(start + len) % n] == scores[start]) ++len;
    const double left = scores[(start + n - 1) % n];
    const double right = scores[(start + len) % n];
    if (scores[start] > left && scores[start] > right) {
      peaks.push_back(start);
      is_peak[start] = true;
    }
    visited += len;
    start = (start + len) % n;
  }

  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::sort(peaks.begin(), peaks.end(), better);
  for (std::size_t i = 0; i < peaks.size() && est.indices.size() < num_sources;
       ++i) {
    est.indices.push_back(peaks[i]);
  }
  if (est.indices.size() < num_sources) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_peak[i]) rest.push_back(i);
    }
    std::sort(rest.begin(), rest.end(), better);
    for (std::size_t i = 0; est.indices.size() < num_sources; ++i) {
      est.indices.push_back(rest[i]);
    }
  }
  return est;
}

DoaEstimate pick_doas(const SpatialSpectrum& spectrum,
                      const PrototypeDatabase& db, std::size_t num_sources) {
  if (spectrum.scores.size() != db.num_directions()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "spectrum size does not match the database grid");
  }
  DoaEstimate est = pick_peaks(spectrum.scores, num_sources);
  for (const std::size_t i : est.indices) {
    est.azimuths.push_back(db.direction(i));
  }
  return est;
}

double circular_distance_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

double accuracy(std::span<const double> estimates,
                std::span<const double> truth, double tolerance_deg) {
  if (truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no ground-truth directions");
  }
  // Maximum one-to-one matching within the tolerance. Unlike a greedy pass
  // over sorted distances it cannot depend on list order or ties.
  std::vector<std::vector<std::size_t>> reachable(estimates.size());
  for (std::size_t e = 0; e < estimates.size(); ++e) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (circular_distance_deg(estimates[e], truth[t]) <= tolerance_deg + 1e-9) {
        reachable[e].push_back(t);
      }
    }
  }
  constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> owner(truth.size(), kFree);
  std::vector<bool> visited;
  const auto augment = [&](auto&& self, std::size_t e) -> bool {
    for (const std::size_t t : reachable[e]) {
      if (visited[t]) continue;
      visited[t] = true;
      if (owner[t] == kFree || self(self, owner[t])) {
        owner[t] = e;
        return true;
      }
    }
    return false;
  };
  std::size_t correct = 0;
  for (std::size_t e = 0; e < estimates.size(); ++e) {
    visited.assign(truth.size(), false);
    if (augment(augment, e)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace bindoa
