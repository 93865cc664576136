// hgd: run, benchmark and verify preconditioned hidden gradient dynamics.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hgd/bench.hpp"
#include "hgd/error.hpp"
#include "hgd/verify.hpp"

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const hgd::IoError*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioned hidden gradient descent: experiments and self-checks"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds;
  bool quiet = false;
  bool timing = false;
  app.add_option("--out-dir", out_dir, "Directory for output files")->capture_default_str();
  app.add_option("--seeds", seeds, "Override the config's seed list");
  app.add_flag("--quiet", quiet, "Suppress progress output");
  app.add_flag("--timing", timing, "Record wall-clock times in CSVs and the verify table (breaks byte-identical output)");

  std::string run_config, bench_config;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one trajectory per algorithm and seed");
  run_cmd->add_option("config", run_config, "Experiment config")->required();
  CLI::App* bench_cmd = app.add_subcommand("bench", "Multi-seed comparison with rate fits");
  bench_cmd->add_option("config", bench_config, "Experiment config")->required();

  bool full = false;
  std::string fault;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the invariant suites");
  verify_cmd->add_flag("--full", full, "Include the slow checks");
  verify_cmd->add_option("--inject-fault", fault)->group("")->check(CLI::IsMember({"pinv"}));

  std::vector<std::string> inputs;
  std::string plot_out;
  CLI::App* plot_cmd = app.add_subcommand("plot-data", "Long-format CSV for plotting");
  plot_cmd->add_option("csv", inputs, "Trajectory CSVs")->required();
  plot_cmd->add_option("-o,--output", plot_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    hgd::CommandOptions opts;
    opts.out_dir = out_dir;
    if (!seeds.empty()) opts.seeds = seeds;
    opts.quiet = quiet;
    opts.timing = timing;
    if (*run_cmd || *bench_cmd) {
      const std::filesystem::path path = *run_cmd ? run_config : bench_config;
      opts.config_dir = path.parent_path();
      const hgd::ExperimentConfig cfg = hgd::load_config(path);
      return *run_cmd ? hgd::cmd_run(cfg, opts, std::cout) : hgd::cmd_bench(cfg, opts, std::cout);
    }
    if (*verify_cmd) {
      hgd::VerifyOptions vo;
      vo.level = full ? hgd::VerifyLevel::Full : hgd::VerifyLevel::Quick;
      vo.inject_pinv_fault = fault == "pinv";
      vo.timing = timing;
      return hgd::cmd_verify(vo, std::cout);
    }
    std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
    return hgd::cmd_plot_data(paths, plot_out, quiet ? std::cerr : std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
