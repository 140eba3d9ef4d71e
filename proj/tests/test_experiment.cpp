#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "aogd/experiment.hpp"
#include "support/synthetic.hpp"

using namespace aogd;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "aogd_experiment_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

ExperimentConfig small_dsm(const fs::path& out) {
  ExperimentConfig c;
  c.problem.kind = "dsm";
  c.problem.p = 4;
  c.T = 200;
  c.seeds = {42};
  c.checkpoints = 8;
  c.output_dir = out.string();
  return c;
}

fs::path synthetic_dataset() {
  static const fs::path p = [] {
    const fs::path d = scratch("data") / "synthetic.libsvm";
    synthetic::write_libsvm(d, 300, 6, 3, 0.7, 3);
    return d;
  }();
  return p;
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(AOGD_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, ParsesFullDocument) {
  const Json j = Json::parse(R"({
    "problem": {"type": "elasticnet", "dataset": "data/x.libsvm", "rho": 2.5, "max_rows": 100},
    "algorithm": {"name": "fixed_ogd", "eta": 0.1, "theta": 0.2, "mu": 0.3},
    "beta": ["1/2", 0.75], "T": 50, "seeds": [3, 4], "gamma_shift": {"c1": 0.5},
    "checkpoints": 5, "output_dir": "out"
  })");
  const auto c = ExperimentConfig::from_json(j, "/cfg");
  EXPECT_EQ(c.problem.kind, "elasticnet");
  EXPECT_EQ(c.problem.dataset, "/cfg/data/x.libsvm");
  EXPECT_EQ(*c.problem.rho, 2.5);
  EXPECT_EQ(c.problem.max_rows, 100u);
  EXPECT_EQ(c.algorithm, Algorithm::FixedOgd);
  EXPECT_EQ(c.fixed.theta, 0.2);
  ASSERT_EQ(c.betas.size(), 2u);
  EXPECT_EQ(c.betas[0], 0.5);
  EXPECT_EQ(c.betas[1], 0.75);
  EXPECT_EQ(*c.gamma_c1, 0.5);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ExperimentConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Config, Rejections) {
  EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"problem": {"type": "dsm"}, "bogus": 1})")), InputError);
  EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"problem": {"type": "dsm"}, "T": "many"})")), InputError);
  EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"T": 5})")), InputError);

  ExperimentConfig c;
  c.problem.kind = "elasticnet";
  c.problem.dataset = "x";
  c.problem.rho = 1.0;
  c.algorithm = Algorithm::AogdStronglyConvex;
  EXPECT_THROW(c.validate(), InputError);  // sigma = 0
  c.algorithm = Algorithm::FixedOgd;
  EXPECT_THROW(c.validate(), InputError);  // eta/theta/mu missing
  c.algorithm = Algorithm::AogdConvex;
  c.problem.rho.reset();
  EXPECT_THROW(c.validate(), InputError);  // neither rho nor target
  c.problem.rho = 1.0;
  c.seeds = {1, 1};
  EXPECT_THROW(c.validate(), InputError);
  c.seeds = {1};
  c.checkpoints = c.T + 1;
  EXPECT_THROW(c.validate(), InputError);
  c.checkpoints = 10;
  c.betas = {1.0};
  EXPECT_THROW(c.validate(), InputError);
}

TEST(RunExperiment, WritesExpectedFiles) {
  const fs::path out = scratch("files");
  auto cfg = small_dsm(out);
  cfg.seeds = {1, 2, 3};
  const auto res = run_experiment(cfg);
  EXPECT_EQ(res.manifest["status"], "ok");
  const fs::path run_dir = out / "a_ogd_convex_beta0.6667";
  for (std::uint64_t s : cfg.seeds) {
    std::string header;
    const auto rows = read_csv(run_dir / ("seed_" + std::to_string(s) + ".csv"), &header);
    EXPECT_EQ(header, kSeedCsvHeader);
    EXPECT_EQ(rows.size(), cfg.checkpoints);
    EXPECT_EQ(rows.back()[0], 200.0);
  }
  std::string header;
  EXPECT_EQ(read_csv(run_dir / "aggregate.csv", &header).size(), cfg.checkpoints);
  EXPECT_EQ(header, kAggregateCsvHeader);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  for (const auto& e : fs::directory_iterator(out / "offline_cache"))
    EXPECT_EQ(e.path().extension(), ".json") << e.path();
}

TEST(RunExperiment, ManifestConstantsMatchProblemModule) {
  const auto res = run_experiment(small_dsm(scratch("constants")));
  const auto c = dsm_constants(4);
  const auto& mc = res.manifest["problem"]["constants"];
  EXPECT_EQ(mc["R"].get<double>(), c.R);
  EXPECT_EQ(mc["G"].get<double>(), c.G);
  EXPECT_EQ(mc["D"].get<double>(), c.D);
  EXPECT_EQ(mc["F"].get<double>(), c.F);
  EXPECT_EQ(mc["sigma"].get<double>(), c.sigma);
  const auto& run = res.manifest["runs"][0];
  EXPECT_TRUE(run["conditions"]["c1_ok"].get<bool>());
  EXPECT_TRUE(run["conditions"]["c2_ok"].get<bool>());
  EXPECT_TRUE(run["compliance"]["loss_ok"].get<bool>());
  EXPECT_EQ(ExperimentConfig::from_json(res.manifest["config"]).to_json(), res.manifest["config"]);
}

TEST(RunExperiment, DeterministicAcrossRunsCacheAndWorkers) {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  run_experiment(small_dsm(a));
  run_experiment(small_dsm(a));  // second pass reads the offline cache
  const std::string first = slurp(a / "a_ogd_convex_beta0.6667" / "seed_42.csv");
  auto cfg = small_dsm(b);
  cfg.offline_cache = false;
  run_experiment(cfg);
  EXPECT_EQ(first, slurp(b / "a_ogd_convex_beta0.6667" / "seed_42.csv"));
  EXPECT_FALSE(fs::exists(b / "offline_cache"));

  auto multi = small_dsm(c);
  multi.seeds = {42, 7, 9};
  multi.workers = 3;
  run_experiment(multi);
  EXPECT_EQ(first, slurp(c / "a_ogd_convex_beta0.6667" / "seed_42.csv"));
}

TEST(RunExperiment, AggregateIsSeedMean) {
  const fs::path out = scratch("aggregate");
  auto cfg = small_dsm(out);
  cfg.seeds = {5, 6, 7, 8};
  run_experiment(cfg);
  const fs::path dir = out / "a_ogd_convex_beta0.6667";
  const auto agg = read_csv(dir / "aggregate.csv");
  std::vector<std::vector<std::vector<double>>> per;
  for (auto s : cfg.seeds) per.push_back(read_csv(dir / ("seed_" + std::to_string(s) + ".csv")));
  for (std::size_t k = 0; k < agg.size(); ++k) {
    double lr = 0.0, cc = 0.0;
    for (const auto& p : per) {
      lr += p[k][1];
      cc += p[k][2];
    }
    EXPECT_NEAR(agg[k][1], lr / 4.0, 1e-12);
    EXPECT_NEAR(agg[k][3], cc / 4.0, 1e-12);
    EXPECT_GE(agg[k][2], 0.0);
  }
}

TEST(RunExperiment, MultipleBetasAndGammaShift) {
  const fs::path out = scratch("betas");
  auto cfg = small_dsm(out);
  cfg.betas = {0.5, 0.75};
  cfg.gamma_c1 = 1.0;
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.manifest["runs"].size(), 2u);
  const auto& r = res.manifest["runs"][1];
  EXPECT_NEAR(r["gamma_shift"]["gamma"].get<double>(), std::pow(200.0, -0.375), 1e-15);
  EXPECT_DOUBLE_EQ(r["learner_constants"]["D"].get<double>(), dsm_constants(4).D + std::pow(200.0, -0.375));
  EXPECT_TRUE(r["conditions"]["c2_ok"].get<bool>());
  // DSM constraint values are never negative, so the unshifted sum stays positive.
  EXPECT_FALSE(r["violation"]["all_seeds_nonpositive_at_T"].get<bool>());
}

TEST(RunExperiment, FailureWritesManifest) {
  const fs::path out = scratch("failure");
  ExperimentConfig cfg;
  cfg.problem.kind = "elasticnet";
  cfg.problem.dataset = (out / "missing.libsvm").string();
  cfg.problem.rho = 1.0;
  cfg.T = 10;
  cfg.checkpoints = 5;
  cfg.output_dir = out.string();
  EXPECT_THROW(run_experiment(cfg), InputError);
  const Json m = load_manifest((out / "manifest.json").string());
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["failure"]["stage"], "load_problem");

  cfg.algorithm = Algorithm::AogdStronglyConvex;
  EXPECT_THROW(run_experiment(cfg), InputError);
  EXPECT_EQ(load_manifest((out / "manifest.json").string())["failure"]["stage"], "validate");
}

TEST(RunExperiment, ElasticNetFixedVsAdaptiveCompare) {
  const fs::path a = scratch("en_adaptive"), b = scratch("en_fixed");
  ExperimentConfig cfg;
  cfg.problem.kind = "elasticnet";
  cfg.problem.dataset = synthetic_dataset().string();
  cfg.problem.rho = 1.0;
  cfg.T = 150;
  cfg.seeds = {1, 2};
  cfg.checkpoints = 6;
  cfg.output_dir = a.string();
  const auto ra = run_experiment(cfg);
  EXPECT_EQ(ra.manifest["problem"]["rows"], 300);
  cfg.algorithm = Algorithm::FixedOgd;
  cfg.fixed = {0.05, 0.5, 0.02};
  cfg.betas = {0.5};
  cfg.output_dir = b.string();
  run_experiment(cfg);

  const auto cmp = compare_runs({a.string(), b.string()});
  ASSERT_EQ(cmp.rows.size(), 2u);
  EXPECT_EQ(cmp.rows[0].algorithm, "a_ogd_convex");
  EXPECT_EQ(cmp.rows[1].algorithm, "fixed_ogd");
  EXPECT_GT(cmp.rows[1].loss_bound, 0.0);
  EXPECT_NE(cmp.rows[0].loss_bound, cmp.rows[1].loss_bound);  // different beta
  EXPECT_NE(cmp.csv().find("fixed_ogd_beta0.5"), std::string::npos);
}

TEST(Compare, IdenticalManifestsHaveZeroDifferences) {
  const fs::path out = scratch("cmp_same");
  run_experiment(small_dsm(out));
  const auto cmp = compare_runs({out.string(), (out / "manifest.json").string()});
  ASSERT_EQ(cmp.rows.size(), 2u);
  EXPECT_EQ(cmp.rows[1].delta_loss_regret, 0.0);
  EXPECT_EQ(cmp.rows[1].delta_constraint_cum, 0.0);
  EXPECT_EQ(cmp.rows[0].final_loss_regret, cmp.rows[1].final_loss_regret);
}

TEST(Compare, MismatchedProblemsAreRejected) {
  const fs::path a = scratch("cmp_a"), b = scratch("cmp_b"), c = scratch("cmp_c");
  run_experiment(small_dsm(a));
  auto cfg = small_dsm(b);
  cfg.problem.p = 3;
  run_experiment(cfg);
  EXPECT_THROW(compare_runs({a.string(), b.string()}), InputError);
  cfg = small_dsm(c);
  cfg.T = 100;
  run_experiment(cfg);
  EXPECT_THROW(compare_runs({a.string(), c.string()}), InputError);
  EXPECT_THROW(compare_runs({}), InputError);
}

TEST(CheckSchedule, ReportStructure) {
  ScheduleParams p;
  p.beta = 0.5;
  p.constants = dsm_constants(4);
  const Json j = check_schedule_report(p, 1000);
  EXPECT_TRUE(j["conditions"]["c1_ok"].get<bool>());
  EXPECT_TRUE(j["conditions"]["c3_ok"].get<bool>());
  EXPECT_DOUBLE_EQ(j["loss_regret_bound"].get<double>(), loss_regret_bound(p, 1000.0));
  EXPECT_LE(j["sums"]["S_eta"].get<double>(), j["sums"]["S_eta_bound"].get<double>());
}

TEST(SolveOfflineReport, DsmMatchesRunningMean) {
  ProblemConfig pc;
  pc.p = 3;
  const Json j = solve_offline_report(pc, 11, 25);
  const auto x = j["x_star"].get<std::vector<double>>();
  const Vector mean = DsmProblem(3, 11, 25).running_mean(25);
  ASSERT_EQ(x.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(x[i], mean[static_cast<Eigen::Index>(i)], 1e-9);
}

TEST(Cli, RunCompareCheckSolve) {
  const fs::path dir = scratch("cli");
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"problem": {"type": "dsm", "p": 3}, "T": 60, "seeds": [1, 2], "checkpoints": 6,
                          "output_dir": ")" << (dir / "out").string() << "\"}";
  EXPECT_EQ(run_cli("run " + cfg.string(), dir / "run.txt"), 0) << slurp(dir / "run.txt");
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  EXPECT_EQ(run_cli("run " + cfg.string() + " --beta 1/2 --seeds 4 --output-dir " + (dir / "out2").string(),
                    dir / "run2.txt"),
            0);
  const Json m2 = load_manifest((dir / "out2").string());
  EXPECT_EQ(m2["config"]["seeds"], Json::array({4}));
  EXPECT_EQ(m2["runs"][0]["beta"], 0.5);

  EXPECT_EQ(run_cli("compare " + (dir / "out").string() + " " + (dir / "out2").string() + " --csv " +
                        (dir / "cmp.csv").string(),
                    dir / "cmp.txt"),
            0);
  EXPECT_NE(slurp(dir / "cmp.csv").find("final_loss_regret"), std::string::npos);

  EXPECT_EQ(run_cli("check-schedule --beta 0.5 --R 1 --G 1 --D 1 --sigma 0 --T 100", dir / "chk.txt"), 0);
  EXPECT_TRUE(Json::parse(slurp(dir / "chk.txt"))["conditions"]["c2_ok"].get<bool>());

  EXPECT_EQ(run_cli("solve-offline --problem dsm --p 3 --seed 1 --t 5", dir / "solve.txt"), 0);
  EXPECT_EQ(Json::parse(slurp(dir / "solve.txt"))["t"], 5);
}

TEST(Cli, ErrorsExitNonzero) {
  const fs::path dir = scratch("cli_err");
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"problem": {"type": "elasticnet", "dataset": "x", "rho": 1},
                          "algorithm": "a_ogd_strongly_convex", "output_dir": ")" << (dir / "out").string() << "\"}";
  EXPECT_NE(run_cli("run " + cfg.string(), dir / "o.txt"), 0);
  EXPECT_NE(slurp(dir / "o.txt").find("sigma"), std::string::npos);
  EXPECT_NE(run_cli("check-schedule --beta 1.5 --R 1 --G 1 --D 1 --T 10", dir / "o2.txt"), 0);
  EXPECT_NE(run_cli("solve-offline --problem elasticnet --t 3", dir / "o3.txt"), 0);
  EXPECT_NE(run_cli("compare " + (dir / "nothing").string(), dir / "o4.txt"), 0);
  EXPECT_NE(run_cli("", dir / "o5.txt"), 0);
}
