#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aogd/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(tok, &used);
    if (used != tok.size()) throw aogd::InputError("bad seed '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw aogd::InputError("--seeds needs at least one value");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw aogd::InputError("cannot write '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive online gradient descent with long-term constraints"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string config_path;
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  std::optional<std::size_t> T_override, checkpoints_override, workers_override;
  std::optional<std::string> out_override, seeds_override, algorithm_override;
  std::vector<std::string> beta_override;
  std::optional<double> c1_override;
  bool no_cache = false;
  run->add_option("--T", T_override, "Horizon");
  run->add_option("--beta", beta_override, "Trade-off exponent(s); fractions like 2/3 accepted");
  run->add_option("--seeds", seeds_override, "Comma-separated seeds");
  run->add_option("--algorithm", algorithm_override, "a_ogd_convex | a_ogd_strongly_convex | fixed_ogd");
  run->add_option("--checkpoints", checkpoints_override, "Number of log-spaced checkpoints");
  run->add_option("--gamma-c1", c1_override, "Enable the gamma shift with this c1");
  run->add_option("--output-dir", out_override, "Result directory");
  run->add_option("--workers", workers_override, "Worker threads (0 = hardware)");
  run->add_flag("--no-cache", no_cache, "Do not read or write offline solution cache files");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare final regret across result manifests");
  std::vector<std::string> manifests;
  std::optional<std::string> compare_csv;
  compare->add_option("manifests", manifests, "manifest.json files or result directories")->required();
  compare->add_option("--csv", compare_csv, "Also write the table as CSV to this path");

  // check-schedule
  auto* check = app.add_subcommand("check-schedule", "Check C1-C3 and print bounds for a schedule");
  aogd::ScheduleParams sp;
  std::size_t check_T = 1000;
  std::string regime = "convex";
  check->add_option("--beta", sp.beta, "Trade-off exponent in (0, 1)")->required();
  check->add_option("--R", sp.constants.R, "Ball radius")->required();
  check->add_option("--G", sp.constants.G, "Gradient bound")->required();
  check->add_option("--D", sp.constants.D, "Constraint value bound")->required();
  check->add_option("--sigma", sp.constants.sigma, "Strong convexity modulus")->default_val(0.0);
  check->add_option("--F", sp.constants.F, "Loss range bound")->default_val(1.0);
  check->add_option("--T", check_T, "Horizon")->required();
  check->add_option("--regime", regime, "convex | strongly_convex")
      ->check(CLI::IsMember({"convex", "strongly_convex"}));

  // solve-offline
  auto* solve = app.add_subcommand("solve-offline", "Offline comparator for a prefix of rounds");
  aogd::ProblemConfig pc;
  std::size_t solve_t = 0;
  std::uint64_t solve_seed = 0;
  std::optional<double> rho;
  solve->add_option("--problem", pc.kind, "dsm | elasticnet")->required()->check(CLI::IsMember({"dsm", "elasticnet"}));
  solve->add_option("--t", solve_t, "Prefix length")->required();
  solve->add_option("--seed", solve_seed, "Stream seed")->default_val(0);
  solve->add_option("--p", pc.p, "DSM side length")->default_val(8);
  solve->add_option("--dataset", pc.dataset, "libsvm file (elasticnet)");
  solve->add_option("--rho", rho, "Elastic-net budget");
  solve->add_option("--max-rows", pc.max_rows, "Rows to read (0 = all)")->default_val(0);
  solve->add_flag("--scale-max-norm", pc.scale_max_norm, "Rescale rows to max norm 1");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = aogd::ExperimentConfig::load(config_path);
      if (T_override) cfg.T = *T_override;
      if (!beta_override.empty()) {
        cfg.betas.clear();
        for (const auto& b : beta_override) cfg.betas.push_back(aogd::detail::parse_beta(aogd::Json(b)));
      }
      if (seeds_override) cfg.seeds = parse_seed_list(*seeds_override);
      if (algorithm_override) cfg.algorithm = aogd::algorithm_from_string(*algorithm_override);
      if (checkpoints_override) cfg.checkpoints = *checkpoints_override;
      if (c1_override) cfg.gamma_c1 = *c1_override;
      if (out_override) cfg.output_dir = *out_override;
      if (workers_override) cfg.workers = *workers_override;
      if (no_cache) cfg.offline_cache = false;
      const auto res = aogd::run_experiment(cfg);
      for (const auto& r : res.manifest["runs"]) {
        const auto& c = r["conditions"];
        const auto& k = r["compliance"];
        std::printf("%s: c1=%d c2=%d c3=%d loss_ok=%d constraint_ok=%d final_loss_regret=%.6g "
                    "final_constraint=%.6g\n",
                    r["label"].get<std::string>().c_str(), c["c1_ok"].get<bool>(), c["c2_ok"].get<bool>(),
                    c["c3_ok"].get<bool>(), k["loss_ok"].get<bool>(), k["constraint_ok"].get<bool>(),
                    r["final"]["loss_regret_mean"].get<double>(), r["final"]["constraint_cum_mean"].get<double>());
      }
      std::printf("manifest: %s\n", res.manifest_path.string().c_str());
    } else if (*compare) {
      const auto cmp = aogd::compare_runs(manifests);
      std::cout << cmp.text();
      if (compare_csv) write_text(*compare_csv, cmp.csv());
    } else if (*check) {
      sp.regime = regime == "convex" ? aogd::Regime::Convex : aogd::Regime::StronglyConvex;
      std::cout << aogd::check_schedule_report(sp, check_T).dump(2) << '\n';
    } else if (*solve) {
      if (pc.kind == "elasticnet") {
        if (!rho) throw aogd::InputError("solve-offline: elasticnet needs --rho");
        if (pc.dataset.empty()) throw aogd::InputError("solve-offline: elasticnet needs --dataset");
        pc.rho = rho;
      }
      std::cout << aogd::solve_offline_report(pc, solve_seed, solve_t).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
