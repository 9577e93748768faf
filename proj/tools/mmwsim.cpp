#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmwsim/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-user mmWave downlink scheduler: training and evaluation harness"};

  std::string config_path;
  std::string controller = "mab";
  std::string mode = "train";
  std::string out_dir = ".";
  std::string checkpoint_path;
  std::uint64_t seed = 1;
  int iterations = -1;
  int realizations = -1;

  app.add_option("--config", config_path, "Scenario config file (key=value lines)");
  app.add_option("--controller", controller,
                 "ppo | mab | mab-no-relay | mab-no-track | mab-fixed-cb=<k>");
  app.add_option("--mode", mode, "train | test")->check(CLI::IsMember({"train", "test"}));
  app.add_option("--seed", seed, "Master seed for environment and controller");
  app.add_option("--iterations", iterations, "Training iterations (default from config)");
  app.add_option("--realizations", realizations, "Test realizations (default from config)");
  app.add_option("--out", out_dir, "Output directory for metrics/checkpoints");
  app.add_option("--checkpoint", checkpoint_path, "Controller checkpoint to load before running");

  CLI11_PARSE(app, argc, argv);

  try {
    mmw::ScenarioConfig cfg =
        config_path.empty() ? mmw::ScenarioConfig{} : mmw::load_scenario(config_path);
    cfg.validate();
    if (iterations > 0) cfg.iterations = iterations;
    if (realizations > 0) cfg.realizations_curve = realizations;

    std::filesystem::create_directories(out_dir);

    auto ctl = mmw::make_controller(controller, cfg, seed + 0x9e3779b97f4a7c15ull);
    if (!checkpoint_path.empty()) ctl->load_file(checkpoint_path);

    mmw::Runner runner(cfg, seed);
    mmw::RunSummary summary;
    if (mode == "train") {
      summary = runner.train(*ctl, cfg.iterations, out_dir, cfg.checkpoint_every);
    } else {
      summary = runner.test(*ctl, cfg.realizations_curve, cfg.slots_per_iteration);
    }

    mmw::emit_metrics(summary, out_dir + "/metrics.tsv");
    mmw::emit_delay_cdf(summary, cfg.t_slot_s, out_dir + "/delay_cdf.tsv");

    std::cout << "controller=" << ctl->name() << " mode=" << mode
              << " avg_delay_ms=" << summary.overall_delay_ms
              << " rate_gbps=" << summary.overall_rate_gbps
              << " blockage_pct=" << summary.overall_blockage_pct << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
