// Batch driver for the mean-field control solver.
//
//   mfid solve <config>                      run a configured experiment
//   mfid example <name> [--scale ...] [--out DIR]
//   mfid verify <config>                     recheck a saved state
//   mfid reference <config>                  explicit flow + dissipation trace
//
// MFID_THREADS caps the worker count.

#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mfid/config.hpp"
#include "mfid/runner.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mfid::ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field information control solver"};
  app.require_subcommand(1);

  std::string config_path, example_name, scale = "paper", out_override;

  auto* cmd_solve = app.add_subcommand("solve", "run an experiment from a config file");
  cmd_solve->add_option("config", config_path, "config file")->required();

  auto* cmd_example = app.add_subcommand("example", "run a built-in example");
  cmd_example->add_option("name", example_name,
                          "example1_alpha<1..4> or example2_row<1..3>")->required();
  cmd_example->add_option("--scale", scale, "desk (64x64x16) or paper (128x128x30)")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd_example->add_option("--out", out_override, "output directory override");

  auto* cmd_verify = app.add_subcommand("verify", "recompute optimality residuals of a saved run");
  cmd_verify->add_option("config", config_path, "config file")->required();

  auto* cmd_reference = app.add_subcommand("reference", "explicit reaction-diffusion reference run");
  cmd_reference->add_option("config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_solve->parsed()) {
      mfid::ExperimentConfig cfg = mfid::parse_config(slurp(config_path));
      return mfid::run_experiment(cfg).exit_code();
    }
    if (cmd_example->parsed()) {
      mfid::ExperimentConfig cfg = mfid::build_example(
          example_name, scale == "desk" ? mfid::ExampleScale::Desk : mfid::ExampleScale::Paper);
      if (!out_override.empty()) cfg.out_dir = out_override;
      return mfid::run_experiment(cfg).exit_code();
    }
    if (cmd_verify->parsed()) {
      mfid::ExperimentConfig cfg = mfid::parse_config(slurp(config_path));
      mfid::VerifyResult v = mfid::verify_experiment(cfg);
      std::cout << "continuity=" << mfid::fmt_g17(v.residuals.continuity)
                << " m1=" << mfid::fmt_g17(v.residuals.m1)
                << " m2=" << mfid::fmt_g17(v.residuals.m2)
                << " u=" << mfid::fmt_g17(v.residuals.u)
                << " terminal=" << mfid::fmt_g17(v.residuals.terminal)
                << " energy_total=" << mfid::fmt_g17(v.energy.total())
                << " pass=" << (v.pass ? "yes" : "no") << "\n";
      return v.pass ? 0 : 3;
    }
    if (cmd_reference->parsed()) {
      mfid::ExperimentConfig cfg = mfid::parse_config(slurp(config_path));
      mfid::ReferenceResult r = mfid::run_reference(cfg);
      return r.monotone ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
