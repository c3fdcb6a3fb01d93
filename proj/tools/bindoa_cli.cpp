// Command-line front end. Talks to the library only through bindoa.h.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "bindoa/bindoa.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int report(bindoa_status status) {
  if (status == BINDOA_OK) return kExitOk;
  std::fprintf(stderr, "bindoa: %s: %s\n", bindoa_status_name(status),
               bindoa_last_error());
  return status == BINDOA_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binaural DOA estimation with an external microphone"};
  app.set_version_flag("--version", std::string(bindoa_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Evaluate the scenes of a config file");
  run->add_option("--config", config_path, "Run configuration")->required();
  run->add_option("--out", run_out, "Override the output directory");

  std::string spec_path;
  std::string sim_out;
  auto* simulate =
      app.add_subcommand("simulate", "Render scenes to WAV files and labels");
  simulate->add_option("--spec", spec_path, "Scene specification")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  std::string geometry_path;
  std::string db_out;
  double resolution = 5.0;
  double sample_rate = 16000.0;
  std::size_t window_len = 512;
  double speed_of_sound = 343.0;
  auto* protodb =
      app.add_subcommand("protodb", "Build a prototype RTF database");
  protodb->add_option("--geometry", geometry_path, "Geometry file")->required();
  protodb->add_option("--out", db_out, "Output file")->required();
  protodb->add_option("--resolution", resolution, "Grid step in degrees")
      ->capture_default_str();
  protodb->add_option("--sample-rate", sample_rate)->capture_default_str();
  protodb->add_option("--window-len", window_len)->capture_default_str();
  protodb->add_option("--speed-of-sound", speed_of_sound)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    std::size_t failed = 0;
    const int code = report(bindoa_run_config_file(
        config_path.c_str(), run_out.empty() ? nullptr : run_out.c_str(),
        &failed));
    if (code == kExitOk && failed > 0) {
      std::fprintf(stderr, "bindoa: %zu scene(s) failed, see run_meta.json\n",
                   failed);
      return kExitRuntime;
    }
    return code;
  }
  if (*simulate) {
    return report(bindoa_simulate_spec_file(spec_path.c_str(), sim_out.c_str()));
  }
  return report(bindoa_protodb_from_geometry_file(
      geometry_path.c_str(), resolution, sample_rate, window_len,
      speed_of_sound, db_out.c_str()));
}
