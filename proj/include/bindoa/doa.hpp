#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bindoa/common.hpp"
#include "bindoa/rtf.hpp"
#include "bindoa/stft.hpp"

namespace bindoa {

using Position = std::array<double, 3>;

/// Far-field propagation delay for a microphone at `mic` and a plane wave
/// arriving from azimuth `azimuth_deg` (0 deg = +x, 90 deg = +y).
double far_field_delay(const Position& mic, double azimuth_deg,
                       double speed_of_sound);

/// Anechoic head-mounted RTF prototypes on a uniform azimuth grid starting
/// at -180 deg. Vectors are stored per direction, then bin.
class PrototypeDatabase {
 public:
  PrototypeDatabase() = default;
  PrototypeDatabase(std::vector<Position> geometry, double resolution_deg,
                    StftConfig config, double speed_of_sound);

  std::size_t num_directions() const { return directions_.size(); }
  std::size_t num_bins() const { return num_bins_; }
  std::size_t num_mics() const { return geometry_.size(); }
  double resolution_deg() const { return resolution_deg_; }
  double speed_of_sound() const { return speed_of_sound_; }
  const StftConfig& config() const { return config_; }
  const std::vector<Position>& geometry() const { return geometry_; }
  const std::vector<double>& directions() const { return directions_; }
  double direction(std::size_t i) const { return directions_[i]; }

  std::span<const Complex> vector(std::size_t direction,
                                  std::size_t bin) const {
    return {vectors_.data() + (direction * num_bins_ + bin) * num_mics(),
            num_mics()};
  }

  /// Grid index of an azimuth that lies on the grid (within 1e-6 deg).
  /// Throws kInvalidArgument otherwise.
  std::size_t index_of(double azimuth_deg) const;

  /// Text format: '#'-prefixed comment lines, key,value header rows, `mic`
  /// rows, then one row per (direction, bin) with M (re, im) pairs.
  void save(std::ostream& out) const;
  static PrototypeDatabase load(std::istream& in);

 private:
  std::vector<Position> geometry_;
  double resolution_deg_ = 5.0;
  StftConfig config_;
  double speed_of_sound_ = 343.0;
  std::size_t num_bins_ = 0;
  std::vector<double> directions_;
  std::vector<Complex> vectors_;
};

/// Builds the free-field database. Throws on fewer than two microphones,
/// coincident microphones, or a resolution that does not divide 360.
PrototypeDatabase build_prototype_db(const std::vector<Position>& geometry,
                                     double resolution_deg,
                                     const StftConfig& config,
                                     double speed_of_sound);

/// arccos(|p^H g| / (|p| |g|)) in [0, pi/2]. Throws kNumerical on a zero
/// vector.
double hermitian_angle(std::span<const Complex> estimate,
                       std::span<const Complex> prototype);

struct SpatialSpectrum {
  std::vector<double> scores;
  std::vector<std::size_t> subset;
  std::size_t contributing_bins = 0;
  std::size_t skipped_invalid = 0;
  bool empty() const { return contributing_bins == 0; }
};

/// Negated sum of Hermitian angles over the subset. Estimates are looked up
/// by bin; bins without a valid estimate are skipped and counted.
SpatialSpectrum spectrum(std::span<const RtfEstimate> rtf_per_bin,
                         const PrototypeDatabase& db,
                         std::span<const std::size_t> subset);

struct DoaEstimate {
  std::vector<double> azimuths;
  std::vector<std::size_t> indices;
  std::size_t frame = 0;
  bool degenerate = false;
};

/// J largest circular local maxima; fills with the best remaining
/// directions when fewer peaks exist.
DoaEstimate pick_doas(const SpatialSpectrum& spectrum,
                      const PrototypeDatabase& db, std::size_t num_sources);

/// Index-level peak picking used by pick_doas.
DoaEstimate pick_peaks(std::span<const double> scores,
                       std::size_t num_sources);

/// Smallest absolute angular difference in degrees, in [0, 180].
double circular_distance_deg(double a, double b);

inline constexpr double kAccuracyToleranceDeg = 5.0;

/// Fraction of true azimuths matched one-to-one (maximum matching)
/// by an estimate within the tolerance.
double accuracy(std::span<const double> estimates,
                std::span<const double> truth,
                double tolerance_deg = kAccuracyToleranceDeg);

}  // namespace bindoa
