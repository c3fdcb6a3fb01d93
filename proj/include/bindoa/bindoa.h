/*
 * C interface to the bindoa library.
 *
 * Objects are opaque handles created by *_create / *_build / *_load and
 * released by the matching *_destroy. Every fallible call returns a
 * bindoa_status; on failure bindoa_last_error() describes the cause for the
 * calling thread until its next failing call.
 *
 * Channel and microphone indices are zero-based. Complex spectra are passed
 * as interleaved (re, im) doubles.
 */
#ifndef BINDOA_H_
#define BINDOA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(BINDOA_BUILDING)
#define BINDOA_API __declspec(dllexport)
#else
#define BINDOA_API __declspec(dllimport)
#endif
#else
#define BINDOA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bindoa_status {
  BINDOA_OK = 0,
  BINDOA_ERR_INVALID_ARGUMENT = 1,
  BINDOA_ERR_DIMENSION = 2,
  BINDOA_ERR_NUMERICAL = 3,
  BINDOA_ERR_CONFIG = 4,
  BINDOA_ERR_IO = 5,
  BINDOA_ERR_INTERNAL = 6
} bindoa_status;

typedef enum bindoa_estimator {
  BINDOA_ESTIMATOR_CW = 0,
  BINDOA_ESTIMATOR_SC = 1
} bindoa_estimator;

BINDOA_API const char* bindoa_version(void);
BINDOA_API const char* bindoa_last_error(void);
BINDOA_API const char* bindoa_status_name(bindoa_status status);

/* ---- prototype database ------------------------------------------------ */

typedef struct bindoa_protodb bindoa_protodb;

/* positions: num_mics rows of (x, y, z) in meters, head microphones only. */
BINDOA_API bindoa_status bindoa_protodb_build(const double* positions,
                                              size_t num_mics,
                                              double resolution_deg,
                                              double sample_rate,
                                              size_t window_len,
                                              double speed_of_sound,
                                              bindoa_protodb** out);
BINDOA_API bindoa_status bindoa_protodb_load(const char* path,
                                             bindoa_protodb** out);
BINDOA_API bindoa_status bindoa_protodb_save(const bindoa_protodb* db,
                                             const char* path);
BINDOA_API size_t bindoa_protodb_num_directions(const bindoa_protodb* db);
BINDOA_API size_t bindoa_protodb_num_bins(const bindoa_protodb* db);
BINDOA_API size_t bindoa_protodb_num_mics(const bindoa_protodb* db);
/* Writes num_mics interleaved complex values. */
BINDOA_API bindoa_status bindoa_protodb_vector(const bindoa_protodb* db,
                                               size_t direction, size_t bin,
                                               double* out);
BINDOA_API void bindoa_protodb_destroy(bindoa_protodb* db);

/* Reads a geometry file (see README) and writes its database. */
BINDOA_API bindoa_status bindoa_protodb_from_geometry_file(
    const char* geometry_path, double resolution_deg, double sample_rate,
    size_t window_len, double speed_of_sound, const char* out_path);

/* ---- spatial statistics and RTF estimation ----------------------------- */

BINDOA_API double bindoa_diffuse_coherence(double alpha, double beta,
                                           double distance,
                                           double speed_of_sound,
                                           double frequency_hz);

/* Linear CDR; +inf for a fully coherent input. */
BINDOA_API bindoa_status bindoa_cdr(double gamma_y_re, double gamma_y_im,
                                    double gamma_u, double* out);

/* phi_y, phi_u: (M+1)x(M+1) Hermitian, row-major interleaved complex.
 * g_out receives M interleaved complex values; *valid is 0 when the
 * estimate could not be normalized. *flops (nullable) receives the
 * operation count. phi_u is ignored for SC. */
BINDOA_API bindoa_status bindoa_estimate_rtf(bindoa_estimator estimator,
                                             const double* phi_y,
                                             const double* phi_u,
                                             size_t num_channels,
                                             double* g_out, int* valid,
                                             uint64_t* flops);

/* Hermitian angle in radians between two interleaved complex vectors. */
BINDOA_API bindoa_status bindoa_hermitian_angle(const double* estimate,
                                                const double* prototype,
                                                size_t length, double* out);

/* ---- streaming localizer ----------------------------------------------- */

typedef struct bindoa_localizer_config {
  double sample_rate;
  size_t window_len;
  double tau_y;
  double tau_u;
  double alpha;
  double beta;
  double head_distance;
  double speed_of_sound;
  double cdr_threshold_db; /* -INFINITY selects every bin */
  double f_min;
  double f_max;
  bindoa_estimator estimator;
  size_t num_sources;
  int oracle_spp; /* nonzero: labels supplied per frame */
  double spp_threshold;
} bindoa_localizer_config;

/* Defaults: 16 kHz, 512-sample window, 250/500 ms, alpha 0.5, beta 2.2,
 * r 0.18 m, c 343 m/s, threshold 0 dB, 100 Hz to 8 kHz, SC, one source,
 * estimated presence at 0.5. */
BINDOA_API void bindoa_localizer_config_default(bindoa_localizer_config* cfg);

typedef struct bindoa_localizer bindoa_localizer;

/* The database is copied. num_channels = head microphones + 1.
 * pairs: num_pairs rows of zero-based (left, right) head channel indices,
 * or NULL for all interaural pairs. */
BINDOA_API bindoa_status bindoa_localizer_create(
    const bindoa_localizer_config* cfg, const bindoa_protodb* db,
    size_t num_channels, const size_t* pairs, size_t num_pairs,
    bindoa_localizer** out);

/* frame: num_channels x num_bins interleaved complex, channel-major.
 * labels: num_bins entries (0 noise-only, 1 speech) in oracle mode, else
 * NULL. azimuths_out receives num_sources degrees. */
BINDOA_API bindoa_status bindoa_localizer_process(bindoa_localizer* loc,
                                                  const double* frame,
                                                  const uint8_t* labels,
                                                  double* azimuths_out,
                                                  size_t* contributing_bins);
BINDOA_API void bindoa_localizer_destroy(bindoa_localizer* loc);

/* ---- batch tools -------------------------------------------------------- */

/* Runs the evaluation described by a config file. out_dir overrides the
 * file's output_dir when non-NULL. failed_scenes (nullable) receives the
 * number of scenes that could not be evaluated. */
BINDOA_API bindoa_status bindoa_run_config_file(const char* config_path,
                                                const char* out_dir,
                                                size_t* failed_scenes);

/* Renders every scene of a spec file (same format as run configs) to WAV
 * files and oracle label CSVs under out_dir. */
BINDOA_API bindoa_status bindoa_simulate_spec_file(const char* spec_path,
                                                   const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* BINDOA_H_ */
