#include "property_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "bindoa/doa.hpp"
#include "bindoa/pipeline.hpp"
#include "bindoa/rtf.hpp"
#include "bindoa/scene.hpp"
#include "bindoa/spatial_stats.hpp"
#include "bindoa/stft.hpp"
#include "test_support.hpp"

namespace bindoa::testing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A check returns the number of cases it covered and reports failures
// through the context.
struct Context {
  PropertyResult result;

  void fail(const std::string& what) {
    ++result.failures;
    if (result.first_failure.empty()) result.first_failure = what;
  }
};

using Check = std::function<void(Context&, Rng&, std::size_t cases)>;

std::string describe(const char* what, double value, double limit) {
  std::ostringstream out;
  out << what << ": " << value << " (limit " << limit << ")";
  return out.str();
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

MultichannelSignal random_signal(Rng& rng, std::size_t channels,
                                 std::size_t samples) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MultichannelSignal out(channels, std::vector<double>(samples));
  for (auto& c : out) {
    for (double& v : c) v = normal(rng);
  }
  return out;
}

std::vector<Position> head_of(const std::vector<Position>& geometry) {
  return {geometry.begin(), geometry.end() - 1};
}

// ---- stft -------------------------------------------------------------

void stft_parseval(Context& ctx, Rng& rng, std::size_t cases) {
  const std::size_t lens[] = {16, 64, 256, 512};
  std::size_t done = 0;
  while (done < cases) {
    StftConfig config;
    config.window_len = lens[pick(rng, 4)];
    config.hop = config.window_len / 2;
    const std::size_t samples = config.window_len * (2 + pick(rng, 6)) + pick(rng, 7);
    const auto x = random_signal(rng, 1, samples);
    const Spectrogram s = analyze(x, config);
    const auto w = analysis_window(config);
    const double n = static_cast<double>(config.window_len);
    for (std::size_t l = 0; l < s.num_frames() && done < cases; ++l, ++done) {
      double time_energy = 0.0;
      for (std::size_t i = 0; i < config.window_len; ++i) {
        const double v = x[0][l * config.hop + i] * w[i];
        time_energy += v * v;
      }
      double freq_energy = 0.0;
      const auto frame = s.frame(0, l);
      for (std::size_t k = 0; k < frame.size(); ++k) {
        const bool edge = k == 0 || k + 1 == frame.size();
        freq_energy += (edge ? 1.0 : 2.0) * std::norm(frame[k]);
      }
      freq_energy /= n;
      const double rel = std::abs(freq_energy - time_energy) / time_energy;
      if (rel > 1e-9) ctx.fail(describe("Parseval relative error", rel, 1e-9));
    }
  }
  ctx.result.cases = done;
}

void stft_linearity(Context& ctx, Rng& rng, std::size_t cases) {
  StftConfig config;
  config.window_len = 64;
  config.hop = 32;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t samples = 64 + 32 * (1 + pick(rng, 8));
    const auto x = random_signal(rng, 2, samples);
    const auto y = random_signal(rng, 2, samples);
    const double a = uniform(rng, -3.0, 3.0);
    const double b = uniform(rng, -3.0, 3.0);
    MultichannelSignal z = x;
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t i = 0; i < samples; ++i) z[m][i] = a * x[m][i] + b * y[m][i];
    }
    const Spectrogram sx = analyze(x, config);
    const Spectrogram sy = analyze(y, config);
    const Spectrogram sz = analyze(z, config);
    double worst = 0.0;
    double scale = 1.0;
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t l = 0; l < sz.num_frames(); ++l) {
        for (std::size_t k = 0; k < sz.num_bins(); ++k) {
          const Complex expect = a * sx.at(m, k, l) + b * sy.at(m, k, l);
          worst = std::max(worst, std::abs(sz.at(m, k, l) - expect));
          scale = std::max(scale, std::abs(expect));
        }
      }
    }
    if (worst > 1e-12 * scale) {
      ctx.fail(describe("linearity deviation", worst, 1e-12 * scale));
    }
  }
  ctx.result.cases = cases;
}

// ---- spatial-stats ----------------------------------------------------

void covariance_hermitian(Context& ctx, Rng& rng, std::size_t cases) {
  std::size_t done = 0;
  while (done < cases) {
    const std::size_t channels = 2 + pick(rng, 5);
    const std::size_t bins = 8;
    CovarianceState state(bins, channels, uniform(rng, 0.0, 0.999),
                          uniform(rng, 0.0, 0.999), 1e-6);
    std::vector<std::vector<Complex>> data(channels, std::vector<Complex>(bins));
    std::vector<BinLabel> labels(bins);
    for (int step = 0; step < 25 && done < cases; ++step, ++done) {
      for (auto& c : data) {
        for (auto& v : c) v = random_complex(rng) * uniform(rng, 0.0, 100.0);
      }
      for (auto& l : labels) {
        l = pick(rng, 2) == 0 ? BinLabel::kNoiseOnly : BinLabel::kSpeechAndNoise;
      }
      std::vector<std::span<const Complex>> frame(data.begin(), data.end());
      update_covariance(state, frame, labels);
      for (std::size_t k = 0; k < bins; ++k) {
        for (const CMatrix* phi : {&state.phi_y(k), &state.phi_u(k)}) {
          const double asym = (*phi - phi->adjoint()).cwiseAbs().maxCoeff();
          if (asym >= 1e-12) ctx.fail(describe("Hermitian defect", asym, 1e-12));
          for (Eigen::Index i = 0; i < phi->rows(); ++i) {
            if ((*phi)(i, i).imag() != 0.0 || (*phi)(i, i).real() < 0.0) {
              ctx.fail("diagonal not real non-negative");
            }
          }
        }
      }
    }
  }
  ctx.result.cases = done;
}

void cdr_monotone(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const double phi = uniform(rng, 0.0, kPi);
    const double gu = uniform(rng, -0.9, 0.9);
    double previous = -1.0;
    for (int g = 0; g <= 60; ++g) {
      const double weight = std::pow(10.0, -3.0 + 0.1 * g);  // 1e-3 .. 1e3
      const Complex gy =
          (weight * std::polar(1.0, phi) + Complex(gu, 0.0)) / (weight + 1.0);
      const double value = cdr(gy, gu);
      if (value < previous * (1.0 - 1e-9)) {
        ctx.fail(describe("CDR decreased along mixture weight", value, previous));
        break;
      }
      previous = value;
    }
  }
  ctx.result.cases = cases;
}

void select_bins_nested(Context& ctx, Rng& rng, std::size_t cases) {
  StftConfig config;
  config.window_len = 64;
  config.hop = 32;
  const std::size_t bins = config.num_bins();
  const CoherenceModel model;
  const auto pairs = SubsetCriterion::interaural_pairs(4);
  std::size_t done = 0;
  while (done < cases) {
    CovarianceState state(bins, 5, 0.5, 0.5, 1e-6);
    for (std::size_t k = 0; k < bins; ++k) {
      // Mix a directional rank-one part with a diffuse-like part so CDRs
      // spread over a wide range.
      const CVector d = random_vector(rng, 5);
      state.phi_y(k) = uniform(rng, 0.0, 10.0) * d * d.adjoint() +
                       random_psd(rng, 5, 0.01);
    }
    const std::size_t pairs_of_thresholds = 50;
    for (std::size_t t = 0; t < pairs_of_thresholds && done < cases; ++t, ++done) {
      double a = pick(rng, 10) == 0 ? -kInf : uniform(rng, -20.0, 20.0);
      double b = uniform(rng, -20.0, 20.0);
      if (b < a) std::swap(a, b);
      const auto low = select_bins(state, {a, pairs}, model, config).bins;
      const auto high = select_bins(state, {b, pairs}, model, config).bins;
      if (!std::includes(low.begin(), low.end(), high.begin(), high.end())) {
        ctx.fail("higher threshold selected a bin the lower one rejected");
      }
    }
  }
  ctx.result.cases = done;
}

void effective_coherence_converges(Context& ctx, Rng& rng, std::size_t cases) {
  const StftConfig config;
  const CoherenceModel model;
  const auto head = head_of(default_geometry());
  const auto pairs = SubsetCriterion::interaural_pairs(head.size());
  std::size_t done = 0;
  while (done < cases) {
    // The invariant asks for at least 10 s; 60 s keeps the per-bin
    // estimation noise well below the 0.05 tolerance.
    const auto noise =
        render_diffuse_noise(head, model, 60.0, config.sample_rate, rng(),
                             NoiseSpectrum::kWhite);
    const Spectrogram s = analyze(noise, config);
    for (std::size_t k = 1; k < s.num_bins() && done < cases; ++k, ++done) {
      CMatrix phi = CMatrix::Zero(4, 4);
      for (std::size_t l = 0; l < s.num_frames(); ++l) {
        const CVector y = s.snapshot(k, l);
        phi += y * y.adjoint();
      }
      const Complex gamma = effective_coherence(phi, pairs);
      const double err = std::abs(gamma - diffuse_coherence(model, k, config));
      if (err > 0.05) ctx.fail(describe("effective coherence error", err, 0.05));
    }
  }
  ctx.result.cases = done;
}

// ---- rtf --------------------------------------------------------------

void rtf_scaling(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = 3 + pick(rng, 4);
    const CMatrix phi_u = random_psd(rng, n, 0.5);
    const CVector g = random_vector(rng, n);
    const CMatrix phi_y = phi_u + uniform(rng, 1.0, 10.0) * g * g.adjoint();
    const auto sc = estimate_rtf_sc(phi_y);
    const auto cw = estimate_rtf_cw(phi_y, phi_u);

    // Power-of-two scaling keeps every product exact.
    const double exact_scale = std::ldexp(1.0, static_cast<int>(pick(rng, 41)) - 20);
    if (estimate_rtf_sc(exact_scale * phi_y).g_h != sc.g_h) {
      ctx.fail("SC changed under power-of-two scaling");
    }
    const double scale = std::pow(10.0, uniform(rng, -6.0, 6.0));
    const auto sc2 = estimate_rtf_sc(scale * phi_y);
    const auto cw2 = estimate_rtf_cw(scale * phi_y, scale * phi_u);
    const double sc_err = max_abs_diff(sc.g_h, sc2.g_h);
    const double cw_err = max_abs_diff(cw.g_h, cw2.g_h);
    if (sc_err > 1e-13 * sc.g_h.cwiseAbs().maxCoeff()) {
      ctx.fail(describe("SC scaling deviation", sc_err, 1e-13));
    }
    if (cw_err > 1e-10) ctx.fail(describe("CW scaling deviation", cw_err, 1e-10));
  }
  ctx.result.cases = cases;
}

void rtf_sc_cw_agree(Context& ctx, Rng& rng, std::size_t cases) {
  const StftConfig config;
  const CoherenceModel model;
  const auto head = head_of(default_geometry());
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t k = 1 + pick(rng, config.num_bins() - 1);
    const double omega = 2.0 * kPi * config.bin_frequency(k);
    const CMatrix phi_u =
        uniform(rng, 0.1, 10.0) *
        block_undesired(head, model, omega, 0.05, uniform(rng, 0.5, 2.0));
    CVector g = random_vector(rng, head.size() + 1);
    g(0) = std::polar(uniform(rng, 0.5, 2.0), uniform(rng, -kPi, kPi));
    const CMatrix phi_y = phi_u + uniform(rng, 0.1, 10.0) * g * g.adjoint();
    const auto sc = estimate_rtf_sc(phi_y);
    const auto cw = estimate_rtf_cw(phi_y, phi_u);
    const double err = max_abs_diff(sc.g_h, cw.g_h);
    if (!sc.valid || !cw.valid || err >= 1e-6) {
      ctx.fail(describe("SC/CW disagreement", err, 1e-6));
    }
  }
  ctx.result.cases = cases;
}

void rtf_factor_invariance(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 2 + pick(rng, 5);
    const CMatrix phi_u = random_psd(rng, m, 0.5);
    const CVector g = random_vector(rng, m);
    const CMatrix phi_y = phi_u + uniform(rng, 1.0, 10.0) * g * g.adjoint();
    const CMatrix lower = Eigen::LLT<CMatrix>(phi_u).matrixL();
    const CMatrix q = random_unitary(rng, m);
    const auto a = estimate_rtf_cw_with_factor(phi_y, lower);
    const auto b = estimate_rtf_cw_with_factor(phi_y, lower * q);
    const double err = max_abs_diff(a.g_h, b.g_h) / a.g_h.cwiseAbs().maxCoeff();
    if (!a.valid || !b.valid || err > 1e-10) {
      ctx.fail(describe("square-root factor dependence (relative)", err, 1e-10));
    }
  }
  ctx.result.cases = cases;
}

void rtf_cost(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 4;
    const CMatrix phi_u = random_psd(rng, m + 1, 0.5);
    const CVector g = random_vector(rng, m + 1);
    const CMatrix phi_y = phi_u + uniform(rng, 0.1, 10.0) * g * g.adjoint();
    FlopCounter sc_flops;
    FlopCounter cw_flops;
    estimate_rtf_sc(phi_y, &sc_flops);
    estimate_rtf_cw(phi_y, phi_u, &cw_flops);
    // SC only normalizes M-1 entries: linear in M.
    if (sc_flops.flops != 11 * (m - 1)) ctx.fail("SC cost is not 11 (M-1)");
    if (10 * sc_flops.flops > cw_flops.flops) {
      ctx.fail(describe("CW/SC cost ratio", static_cast<double>(cw_flops.flops) /
                                                 static_cast<double>(sc_flops.flops),
                        10.0));
    }
  }
  ctx.result.cases = cases;
}

// ---- doa --------------------------------------------------------------

void angle_scaling(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = 2 + pick(rng, 6);
    const CVector g = random_vector(rng, n);
    const CVector p = random_vector(rng, n);
    const Complex a = random_complex(rng) * std::pow(10.0, uniform(rng, -3.0, 3.0));
    const Complex b = random_complex(rng) * std::pow(10.0, uniform(rng, -3.0, 3.0));
    const CVector ga = a * g;
    const CVector pb = b * p;
    const auto span_of = [](const CVector& v) {
      return std::span<const Complex>(v.data(), static_cast<std::size_t>(v.size()));
    };
    const double base = hermitian_angle(span_of(g), span_of(p));
    const double scaled = hermitian_angle(span_of(ga), span_of(pb));
    if (std::abs(base - scaled) > 1e-12) {
      ctx.fail(describe("angle changed under scaling", std::abs(base - scaled), 1e-12));
    }
  }
  ctx.result.cases = cases;
}

void spectrum_order_and_monotone(Context& ctx, Rng& rng, std::size_t cases) {
  StftConfig config;
  config.window_len = 64;
  config.hop = 32;
  const auto db = build_prototype_db(head_of(default_geometry()), 30.0, config, 343.0);
  const std::size_t bins = db.num_bins();
  std::size_t done = 0;
  while (done < cases) {
    std::vector<RtfEstimate> rtf(bins);
    for (auto& e : rtf) {
      e.g_h = random_vector(rng, db.num_mics());
      e.g_h(0) = 1.0;
      e.valid = pick(rng, 8) != 0;
    }
    for (int t = 0; t < 20 && done < cases; ++t, ++done) {
      std::vector<std::size_t> subset;
      for (std::size_t k = 0; k < bins; ++k) {
        if (pick(rng, 2) == 0) subset.push_back(k);
      }
      std::vector<std::size_t> shuffled = subset;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const auto s1 = spectrum(rtf, db, subset);
      const auto s2 = spectrum(rtf, db, shuffled);
      for (std::size_t i = 0; i < s1.scores.size(); ++i) {
        const double tol = 1e-12 * std::max(1.0, std::abs(s1.scores[i]));
        if (std::abs(s1.scores[i] - s2.scores[i]) > tol) {
          ctx.fail("spectrum depends on subset order");
          break;
        }
      }
      std::vector<std::size_t> bigger = subset;
      bigger.push_back(pick(rng, bins));
      const auto s3 = spectrum(rtf, db, bigger);
      for (std::size_t i = 0; i < s1.scores.size(); ++i) {
        if (s3.scores[i] > s1.scores[i]) {
          ctx.fail("adding a bin increased a score");
          break;
        }
      }
    }
  }
  ctx.result.cases = done;
}

void pick_invariance(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = 8 + pick(rng, 72);
    std::vector<double> scores(n);
    // Dyadic values so shifts by integers are exact.
    for (double& s : scores) s = -static_cast<double>(pick(rng, 4096)) / 64.0;
    const std::size_t j = 1 + pick(rng, std::min<std::size_t>(n, 4));
    const auto base = pick_peaks(scores, j);
    std::vector<double> shifted = scores;
    const double shift = static_cast<double>(pick(rng, 2001)) - 1000.0;
    for (double& s : shifted) s += shift;
    std::vector<double> scaled = scores;
    const double factor = std::pow(10.0, uniform(rng, -3.0, 3.0));
    for (double& s : scaled) s *= factor;
    if (pick_peaks(shifted, j).indices != base.indices) {
      ctx.fail("picks changed under a constant shift");
    }
    if (pick_peaks(scaled, j).indices != base.indices) {
      ctx.fail("picks changed under positive scaling");
    }
  }
  ctx.result.cases = cases;
}

void accuracy_symmetry(Context& ctx, Rng& rng, std::size_t cases) {
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t j = 1 + pick(rng, 4);
    std::vector<double> truth(j);
    std::vector<double> est(j);
    for (std::size_t i = 0; i < j; ++i) {
      truth[i] = -180.0 + 5.0 * static_cast<double>(pick(rng, 72));
      est[i] = truth[pick(rng, j)] + 5.0 * (static_cast<double>(pick(rng, 5)) - 2.0);
    }
    const double base = accuracy(est, truth);
    std::shuffle(truth.begin(), truth.end(), rng);
    std::shuffle(est.begin(), est.end(), rng);
    if (accuracy(est, truth) != base) ctx.fail("accuracy depends on list order");
  }
  ctx.result.cases = cases;
}

// ---- scene-sim --------------------------------------------------------

bool same_signal(const MultichannelSignal& a, const MultichannelSignal& b) {
  return a == b;
}

void scene_determinism_and_closure(Context& det, Context& closure, Rng& rng,
                                   std::size_t cases) {
  const StftConfig config;
  for (std::size_t c = 0; c < cases; ++c) {
    SceneSpec spec;
    spec.geometry = {{0.0, 0.09, 0.0}, {0.0, -0.09, 0.0},
                     {uniform(rng, 0.5, 2.0), 0.0, 0.0}};
    spec.azimuths = {-180.0 + 5.0 * static_cast<double>(pick(rng, 72))};
    if (pick(rng, 2) == 0) {
      double other = spec.azimuths[0];
      while (other == spec.azimuths[0]) {
        other = -180.0 + 5.0 * static_cast<double>(pick(rng, 72));
      }
      spec.azimuths.push_back(other);
    }
    spec.duration = 1.0;
    spec.snr_db = uniform(rng, -10.0, 10.0);
    spec.seed = rng();
    const SceneRender a = render_scene(spec, config);
    const SceneRender b = render_scene(spec, config);
    if (!same_signal(a.mixture, b.mixture) || !same_signal(a.noise, b.noise) ||
        a.speech != b.speech || a.oracle_labels.labels != b.oracle_labels.labels) {
      det.fail("two renders of one spec differ");
    }
    double worst = 0.0;
    for (std::size_t m = 0; m < a.mixture.size(); ++m) {
      for (std::size_t t = 0; t < a.mixture[m].size(); ++t) {
        double sum = a.noise[m][t];
        for (const auto& s : a.speech) sum += s[m][t];
        worst = std::max(worst, std::abs(a.mixture[m][t] - sum));
      }
    }
    if (worst > 1e-9) closure.fail(describe("mixture closure error", worst, 1e-9));
  }
  det.result.cases = cases;
  closure.result.cases = cases;
}

void label_power_share(Context& ctx, Rng& rng, std::size_t cases) {
  const StftConfig config;
  std::size_t done = 0;
  while (done < cases) {
    SceneSpec spec;
    const std::size_t a = pick(rng, 72);
    std::size_t b = pick(rng, 71);
    if (b >= a) ++b;
    spec.azimuths = {-180.0 + 5.0 * static_cast<double>(a),
                     -180.0 + 5.0 * static_cast<double>(b)};
    spec.noise = NoiseKind::kNone;
    spec.duration = 2.0;
    spec.seed = rng();
    const SceneRender r = render_scene(spec, config);
    const std::size_t head = spec.num_head_channels();
    for (std::size_t j = 0; j < r.speech.size(); ++j, ++done) {
      const MultichannelSignal image(r.speech[j].begin(), r.speech[j].begin() + static_cast<std::ptrdiff_t>(head));
      const Spectrogram s = analyze(image, config);
      double total = 0.0;
      double labeled = 0.0;
      for (std::size_t m = 0; m < head; ++m) {
        for (std::size_t l = 0; l < s.num_frames(); ++l) {
          for (std::size_t k = 0; k < s.num_bins(); ++k) {
            const double p = std::norm(s.at(m, k, l));
            total += p;
            if (r.oracle_labels.at(k, l) == static_cast<int>(j)) labeled += p;
          }
        }
      }
      const double share = labeled / total;
      if (share < 0.7) ctx.fail(describe("labeled power share", share, 0.7));
    }
  }
  ctx.result.cases = done;
}

// ---- pipeline ---------------------------------------------------------

PipelineConfig pipeline_config(SppMode mode) {
  PipelineConfig config;
  config.mic_pairs = SubsetCriterion::interaural_pairs(4);
  config.thresholds_db = {-kInf, 0.0};
  config.estimators = {RtfMethod::kCw, RtfMethod::kSc};
  config.spp_mode = mode;
  config.num_sources = 1;
  return config;
}

std::vector<std::vector<BinLabel>> presence_of(const SceneRender& r) {
  std::vector<std::vector<BinLabel>> out;
  for (std::size_t l = 0; l < r.oracle_labels.frames; ++l) {
    out.push_back(r.oracle_labels.presence(l));
  }
  return out;
}

bool same_result(const FrameResult& a, const FrameResult& b) {
  if (a.contributing_bins != b.contributing_bins || a.doas.size() != b.doas.size()) {
    return false;
  }
  for (std::size_t v = 0; v < a.doas.size(); ++v) {
    if (a.doas[v].indices != b.doas[v].indices ||
        a.doas[v].degenerate != b.doas[v].degenerate) {
      return false;
    }
  }
  return true;
}

void pipeline_determinism(Context& ctx, Rng& rng, std::size_t cases,
                          const PrototypeDatabase& db) {
  const StftConfig stft;
  std::size_t done = 0;
  while (done < cases) {
    SceneSpec spec;
    spec.azimuths = {-180.0 + 5.0 * static_cast<double>(pick(rng, 72)),
                     -180.0 + 5.0 * static_cast<double>(pick(rng, 72))};
    if (spec.azimuths[0] == spec.azimuths[1]) spec.azimuths.pop_back();
    spec.duration = 2.0;
    spec.seed = rng();
    const SppMode mode = pick(rng, 2) == 0 ? SppMode::kOracle : SppMode::kEstimated;
    std::vector<FrameResult> runs[2];
    for (auto& run : runs) {
      const SceneRender r = render_scene(spec, stft);
      const Spectrogram s = analyze(r.mixture, stft);
      const auto labels = presence_of(r);
      FramePipeline pipeline(pipeline_config(mode), db, s.num_channels());
      run = pipeline.process_all(s, mode == SppMode::kOracle ? &labels : nullptr);
    }
    for (std::size_t l = 0; l < runs[0].size(); ++l, ++done) {
      if (!same_result(runs[0][l], runs[1][l])) {
        ctx.fail("pipeline output differs between identical runs");
      }
    }
  }
  ctx.result.cases = done;
}

void pipeline_causal(Context& ctx, Rng& rng, std::size_t cases,
                     const PrototypeDatabase& db) {
  const StftConfig stft;
  std::size_t done = 0;
  while (done < cases) {
    SceneSpec spec;
    spec.azimuths = {-180.0 + 5.0 * static_cast<double>(pick(rng, 72))};
    spec.duration = 2.0;
    spec.seed = rng();
    const SceneRender r = render_scene(spec, stft);
    MultichannelSignal altered = r.mixture;
    const std::size_t cut =
        static_cast<std::size_t>(uniform(rng, 1.0, 1.9) * stft.sample_rate);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& c : altered) {
      for (std::size_t t = cut; t < c.size(); ++t) c[t] = normal(rng);
    }
    const auto run = [&](const MultichannelSignal& x) {
      FramePipeline pipeline(pipeline_config(SppMode::kEstimated), db, x.size());
      return pipeline.process_all(analyze(x, stft));
    };
    const auto a = run(r.mixture);
    const auto b = run(altered);
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (l * stft.hop + stft.window_len > cut) break;
      ++done;
      if (!same_result(a[l], b[l])) ctx.fail("frame output depends on later samples");
    }
  }
  ctx.result.cases = done;
}

void pipeline_single_speaker(Context& ctx, Rng& rng, std::size_t cases,
                             const PrototypeDatabase& db) {
  const StftConfig stft;
  const double skip = 0.5;
  std::vector<std::size_t> order(db.num_directions());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t done = 0;
  for (std::size_t idx = 0; done < cases; ++idx) {
    SceneSpec spec;
    spec.azimuths = {db.direction(order[idx % order.size()])};
    spec.noise = NoiseKind::kNone;
    spec.duration = 2.0;
    spec.seed = rng();
    const SceneRender r = render_scene(spec, stft);
    FramePipeline pipeline(pipeline_config(SppMode::kEstimated), db,
                           r.mixture.size());
    const auto results = pipeline.process_all(analyze(r.mixture, stft));
    for (const auto& fr : results) {
      if (static_cast<double>(fr.frame) * stft.hop_seconds() < skip) continue;
      ++done;
      for (const auto& doa : fr.doas) {
        if (accuracy(doa.azimuths, spec.azimuths) != 1.0) {
          ctx.fail("single speaker at " + std::to_string(spec.azimuths[0]) +
                   " missed at frame " + std::to_string(fr.frame));
          break;
        }
      }
    }
  }
  ctx.result.cases = done;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(std::size_t cases,
                                               std::uint64_t seed) {
  std::vector<PropertyResult> out;
  Rng rng(seed);
  const auto run = [&](const char* module, const char* name, const Check& check) {
    Context ctx;
    ctx.result.module = module;
    ctx.result.name = name;
    Rng local(rng());
    check(ctx, local, cases);
    out.push_back(ctx.result);
  };

  run("stft", "Parseval consistency", stft_parseval);
  run("stft", "linearity", stft_linearity);
  run("spatial-stats", "covariance updates stay Hermitian", covariance_hermitian);
  run("spatial-stats", "CDR monotone in coherent weight", cdr_monotone);
  run("spatial-stats", "select_bins nested in threshold", select_bins_nested);
  run("spatial-stats", "effective coherence converges to model",
      effective_coherence_converges);
  run("rtf", "scale invariance", rtf_scaling);
  run("rtf", "SC and CW agree under the SC premise", rtf_sc_cw_agree);
  run("rtf", "CW invariant to square-root factor", rtf_factor_invariance);
  run("rtf", "SC cost linear and 10x below CW", rtf_cost);
  run("doa", "Hermitian angle scale invariance", angle_scaling);
  run("doa", "spectrum order-free and monotone", spectrum_order_and_monotone);
  run("doa", "peak picks invariant to shift and scale", pick_invariance);
  run("doa", "accuracy symmetric under permutation", accuracy_symmetry);

  {
    Context det;
    det.result = {"scene-sim", "rendering deterministic", 0, 0, {}};
    Context closure;
    closure.result = {"scene-sim", "mixture equals component sum", 0, 0, {}};
    Rng local(rng());
    scene_determinism_and_closure(det, closure, local, cases);
    out.push_back(det.result);
    out.push_back(closure.result);
  }
  run("scene-sim", "oracle labels keep 70% of each talker's power",
      label_power_share);

  const StftConfig stft;
  const auto db = build_prototype_db(head_of(default_geometry()), 5.0, stft, 343.0);
  run("cli", "end-to-end determinism", [&](Context& c, Rng& r, std::size_t n) {
    pipeline_determinism(c, r, n, db);
  });
  run("cli", "frame results causal", [&](Context& c, Rng& r, std::size_t n) {
    pipeline_causal(c, r, n, db);
  });
  run("cli", "noiseless single talker found after convergence",
      [&](Context& c, Rng& r, std::size_t n) { pipeline_single_speaker(c, r, n, db); });
  return out;
}

}  // namespace bindoa::testing
