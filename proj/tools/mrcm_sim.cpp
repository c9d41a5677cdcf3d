// Command-line front end for the two-phase flow simulator: configured runs,
// time-step convergence studies, Newton strategy comparisons, and Gaussian
// permeability field generation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mrcm/config.hpp"
#include "mrcm/experiments.hpp"
#include "mrcm/field_io.hpp"
#include "mrcm/gaussian_field.hpp"

namespace {

mrcm::RunConfig load_config(const std::string& path, long seed,
                            const std::string& out_dir) {
  mrcm::RunConfig cfg = mrcm::load_run_config(path);
  if (seed >= 0) cfg.seed = static_cast<unsigned long>(seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  return cfg;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase flow simulator with a multiscale Darcy backend"};
  app.require_subcommand(1);

  std::string config_path, out_dir, reference_path;
  long seed = -1;

  auto* cmd_run = app.add_subcommand("run", "Run one configured experiment");
  cmd_run->add_option("--config", config_path, "Config file")->required();
  cmd_run->add_option("--seed", seed, "Random seed override");
  cmd_run->add_option("--out", out_dir, "Output directory override");
  cmd_run->add_option("--reference", reference_path,
                      "Reference saturation field for the error report");

  std::string ladder_csv = "";
  double ref_dt = 0.0;
  auto* cmd_conv = app.add_subcommand(
      "converge", "Time-step convergence study against a finer reference");
  cmd_conv->add_option("--config", config_path, "Config file")->required();
  cmd_conv->add_option("--seed", seed, "Random seed override");
  cmd_conv->add_option("--out", out_dir, "Output directory override");
  cmd_conv->add_option("--ladder", ladder_csv,
                       "Comma-separated dt ladder (PVI)")->required();
  cmd_conv->add_option("--reference-dt", ref_dt,
                       "Reference time step (PVI)")->required();

  auto* cmd_cmp = app.add_subcommand(
      "compare-strategies", "Run every Newton strategy on one config");
  cmd_cmp->add_option("--config", config_path, "Config file")->required();
  cmd_cmp->add_option("--seed", seed, "Random seed override");
  cmd_cmp->add_option("--out", out_dir, "Output directory override");

  int nx = 64, ny = 64;
  double lx = 1.0, ly = 1.0, scale = 4.5;
  std::string field_out = "field.txt";
  long gen_seed = 1234;
  auto* cmd_gen = app.add_subcommand("gen-field",
                                     "Generate a Gaussian permeability field");
  cmd_gen->add_option("--seed", gen_seed, "Random seed");
  cmd_gen->add_option("--out", field_out, "Output field file");
  cmd_gen->add_option("--nx", nx, "Cells in x");
  cmd_gen->add_option("--ny", ny, "Cells in y");
  cmd_gen->add_option("--lx", lx, "Domain extent in x");
  cmd_gen->add_option("--ly", ly, "Domain extent in y");
  cmd_gen->add_option("--scale", scale, "Log-permeability scale exponent");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      mrcm::RunConfig cfg = load_config(config_path, seed, out_dir);
      mrcm::ExperimentResult res = mrcm::run_experiment(cfg, reference_path);
      std::cout << "steps: " << res.run.ledger.size() << "\n";
      long total = 0;
      for (const auto& row : res.run.ledger) total += row.newton_iterations;
      std::cout << "total Newton iterations: " << total << "\n";
      if (res.errors)
        std::cout << "saturation L1 error: " << res.errors->sat_l1_rel << "\n";
      std::cout << "artifacts in " << cfg.out_dir << "\n";
    } else if (*cmd_conv) {
      mrcm::RunConfig cfg = load_config(config_path, seed, out_dir);
      mrcm::ConvergenceStudy study =
          mrcm::convergence_study(cfg, parse_list(ladder_csv), ref_dt);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream csv(std::filesystem::path(cfg.out_dir) / "convergence.csv");
      csv << "dt_pvi,sat_l1_rel\n";
      csv.precision(17);
      for (std::size_t k = 0; k < study.dts.size(); ++k)
        csv << study.dts[k] << ',' << study.errors[k] << '\n';
      std::cout << "log-log slope: " << study.slope << "\n";
    } else if (*cmd_cmp) {
      mrcm::RunConfig cfg = load_config(config_path, seed, out_dir);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream csv(std::filesystem::path(cfg.out_dir) / "strategies.csv");
      csv << "strategy,steps,total_newton_iterations,completed\n";
      for (const std::string name :
           {"plain", "under_relax", "inflection", "dogleg", "reflective"}) {
        mrcm::RunConfig c = cfg;
        c.strategy = name;
        mrcm::FlowProblem prob = mrcm::build_problem(c);
        mrcm::RunConfigCore core = mrcm::build_run_core(c, prob);
        mrcm::RunResult r = mrcm::run(prob, core);
        long total = 0;
        for (const auto& row : r.ledger) total += row.newton_iterations;
        csv << name << ',' << r.ledger.size() << ',' << total << ','
            << (r.completed ? 1 : 0) << '\n';
        std::cout << name << ": " << total << " iterations over "
                  << r.ledger.size() << " steps"
                  << (r.completed ? "" : " (aborted)") << "\n";
      }
    } else if (*cmd_gen) {
      mrcm::CartesianGrid grid(nx, ny, lx / nx, ly / ny);
      mrcm::PermField k = mrcm::gen_gaussian_field(
          grid, static_cast<std::uint64_t>(gen_seed), scale);
      mrcm::write_field(k, field_out);
      std::cout << "wrote " << field_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
