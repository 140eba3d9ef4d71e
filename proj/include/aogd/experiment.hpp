#pragma once

// Multi-seed experiment runner: config parsing, per-seed runs with offline
// comparators, CSV/JSON result files and run comparison.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "aogd/core.hpp"
#include "aogd/ingest.hpp"
#include "aogd/learner.hpp"
#include "aogd/metrics.hpp"
#include "aogd/offline_oracle.hpp"
#include "aogd/problems/dsm.hpp"
#include "aogd/problems/elasticnet.hpp"
#include "aogd/schedules.hpp"

namespace aogd {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum class Algorithm { AogdConvex, AogdStronglyConvex, FixedOgd };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::AogdConvex: return "a_ogd_convex";
    case Algorithm::AogdStronglyConvex: return "a_ogd_strongly_convex";
    case Algorithm::FixedOgd: return "fixed_ogd";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "a_ogd_convex") return Algorithm::AogdConvex;
  if (s == "a_ogd_strongly_convex") return Algorithm::AogdStronglyConvex;
  if (s == "fixed_ogd") return Algorithm::FixedOgd;
  throw InputError("unknown algorithm '" + s + "'");
}

/// "%.17g": shortest form that survives a text round trip for every double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ProblemConfig {
  std::string kind = "dsm";  // "dsm" or "elasticnet"
  std::size_t p = 8;
  std::string dataset;
  std::optional<double> rho;
  std::optional<double> target_sparsity;
  std::size_t max_rows = 0;
  bool scale_max_norm = false;

  /// Everything that identifies the problem family, excluding seeds.
  Json signature() const {
    Json j;
    j["type"] = kind;
    if (kind == "dsm") {
      j["p"] = p;
    } else {
      j["dataset"] = dataset;
      if (rho) j["rho"] = *rho;
      if (target_sparsity) j["target_sparsity"] = *target_sparsity;
      j["max_rows"] = max_rows;
      j["scale_max_norm"] = scale_max_norm;
    }
    return j;
  }
};

struct ExperimentConfig {
  ProblemConfig problem;
  Algorithm algorithm = Algorithm::AogdConvex;
  FixedScheduleParams fixed;
  std::vector<double> betas{2.0 / 3.0};
  std::size_t T = 1000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::optional<double> gamma_c1;
  std::size_t checkpoints = 20;
  std::string output_dir = "results";
  std::size_t workers = 0;  // 0: one per hardware thread
  bool offline_cache = true;

  void validate() const {
    if (problem.kind == "dsm") {
      if (problem.p < 2) throw InputError("dsm: p must be >= 2");
    } else if (problem.kind == "elasticnet") {
      if (problem.dataset.empty()) throw InputError("elasticnet: dataset path is required");
      if (problem.rho.has_value() == problem.target_sparsity.has_value())
        throw InputError("elasticnet: give exactly one of rho or target_sparsity");
      if (problem.rho && !(*problem.rho > 0.0)) throw InputError("elasticnet: rho must be positive");
      if (problem.target_sparsity && !(*problem.target_sparsity > 0.0 && *problem.target_sparsity <= 1.0))
        throw InputError("elasticnet: target_sparsity must lie in (0, 1]");
      if (algorithm == Algorithm::AogdStronglyConvex)
        throw InputError("a_ogd_strongly_convex requires sigma > 0; elasticnet losses have sigma = 0");
    } else {
      throw InputError("unknown problem type '" + problem.kind + "'");
    }
    if (algorithm == Algorithm::FixedOgd) fixed.validate();
    if (betas.empty()) throw InputError("at least one beta is required");
    for (double b : betas)
      if (!(b > 0.0 && b < 1.0)) throw InputError("beta must lie in the open interval (0, 1)");
    if (T < 1) throw InputError("T must be >= 1");
    if (seeds.empty()) throw InputError("at least one seed is required");
    auto sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InputError("seeds must be distinct");
    if (checkpoints < 1 || checkpoints > T) throw InputError("checkpoints must lie in [1, T]");
    if (gamma_c1 && !(*gamma_c1 >= 0.0 && std::isfinite(*gamma_c1)))
      throw InputError("gamma_shift.c1 must be >= 0");
    if (output_dir.empty()) throw InputError("output_dir must not be empty");
  }

  Json to_json() const {
    Json j;
    j["problem"] = problem.signature();
    Json a;
    a["name"] = to_string(algorithm);
    if (algorithm == Algorithm::FixedOgd) {
      a["eta"] = fixed.eta;
      a["theta"] = fixed.theta;
      a["mu"] = fixed.mu;
    }
    j["algorithm"] = a;
    j["beta"] = betas;
    j["T"] = T;
    j["seeds"] = seeds;
    j["gamma_shift"] = gamma_c1 ? Json{{"c1", *gamma_c1}} : Json(nullptr);
    j["checkpoints"] = checkpoints;
    j["output_dir"] = output_dir;
    j["workers"] = workers;
    j["offline_cache"] = offline_cache;
    return j;
  }

  /// base_dir resolves a relative dataset path (the config file's directory).
  static ExperimentConfig from_json(const Json& j, const fs::path& base_dir = {});

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("config '" + path + "': " + e.what());
    }
    return from_json(j, fs::path(path).parent_path());
  }
};

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
      throw InputError(where + ": unknown key '" + key + "'");
}

/// A number, or a string "a/b" for exact-looking fractions such as "2/3".
inline double parse_beta(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::exception&) {
      throw InputError("beta: cannot parse '" + s + "'");
    }
  }
  throw InputError("beta must be a number, a fraction string, or a list of those");
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const Json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    detail::reject_unknown_keys(j, {"problem", "algorithm", "beta", "T", "seeds", "gamma_shift", "checkpoints",
                                    "output_dir", "workers", "offline_cache"},
                                "config");
    if (!j.contains("problem")) throw InputError("config: 'problem' is required");
    const Json& pj = j.at("problem");
    detail::reject_unknown_keys(pj, {"type", "p", "dataset", "rho", "target_sparsity", "max_rows", "scale_max_norm"},
                                "problem");
    c.problem.kind = pj.at("type").get<std::string>();
    if (pj.contains("p")) c.problem.p = pj.at("p").get<std::size_t>();
    if (pj.contains("dataset")) {
      fs::path d = pj.at("dataset").get<std::string>();
      if (d.is_relative() && !base_dir.empty()) d = base_dir / d;
      c.problem.dataset = d.lexically_normal().string();
    }
    if (pj.contains("rho")) c.problem.rho = pj.at("rho").get<double>();
    if (pj.contains("target_sparsity")) c.problem.target_sparsity = pj.at("target_sparsity").get<double>();
    if (pj.contains("max_rows")) c.problem.max_rows = pj.at("max_rows").get<std::size_t>();
    if (pj.contains("scale_max_norm")) c.problem.scale_max_norm = pj.at("scale_max_norm").get<bool>();

    if (j.contains("algorithm")) {
      const Json& aj = j.at("algorithm");
      if (aj.is_string()) {
        c.algorithm = algorithm_from_string(aj.get<std::string>());
      } else {
        detail::reject_unknown_keys(aj, {"name", "eta", "theta", "mu"}, "algorithm");
        c.algorithm = algorithm_from_string(aj.at("name").get<std::string>());
        if (aj.contains("eta")) c.fixed.eta = aj.at("eta").get<double>();
        if (aj.contains("theta")) c.fixed.theta = aj.at("theta").get<double>();
        if (aj.contains("mu")) c.fixed.mu = aj.at("mu").get<double>();
      }
    }
    if (j.contains("beta")) {
      const Json& bj = j.at("beta");
      c.betas.clear();
      if (bj.is_array()) {
        for (const auto& b : bj) c.betas.push_back(detail::parse_beta(b));
      } else {
        c.betas.push_back(detail::parse_beta(bj));
      }
    }
    if (j.contains("T")) c.T = j.at("T").get<std::size_t>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("gamma_shift") && !j.at("gamma_shift").is_null()) {
      const Json& gj = j.at("gamma_shift");
      detail::reject_unknown_keys(gj, {"c1"}, "gamma_shift");
      c.gamma_c1 = gj.value("c1", 1.0);
    }
    if (j.contains("checkpoints")) c.checkpoints = j.at("checkpoints").get<std::size_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("offline_cache")) c.offline_cache = j.at("offline_cache").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

/// Seed-independent problem data, loaded once per experiment.
struct ProblemData {
  ProblemConfig config;
  Matrix U;
  Vector y;
  double rho = 0.0;
  std::optional<double> rho_search_fraction;
  std::string name;
  ProblemConstants constants;
  std::size_t dim = 0;
};

namespace detail {

inline std::string fnv1a_hex(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

inline ProblemData prepare_problem(const ProblemConfig& cfg) {
  ProblemData d;
  d.config = cfg;
  if (cfg.kind == "dsm") {
    d.constants = dsm_constants(cfg.p);
    d.dim = cfg.p * cfg.p;
    d.name = "dsm_p" + std::to_string(cfg.p);
    return d;
  }
  const Dataset ds = load_dataset(cfg.dataset, cfg.max_rows);
  d.U = dense_features(ds);
  if (cfg.scale_max_norm) d.U = scale_to_unit_max_norm(d.U);
  d.y = labels(ds);
  if (cfg.rho) {
    d.rho = *cfg.rho;
  } else {
    const auto found = search_rho_for_sparsity(d.U, d.y, *cfg.target_sparsity);
    d.rho = found.rho;
    d.rho_search_fraction = found.nonzero_fraction;
  }
  // The cache key covers the data itself, not just the file name.
  const std::string h = detail::fnv1a_hex(d.U.data(), sizeof(double) * static_cast<std::size_t>(d.U.size()));
  const std::string hy = detail::fnv1a_hex(d.y.data(), sizeof(double) * static_cast<std::size_t>(d.y.size()));
  d.name = "elasticnet_" + fs::path(cfg.dataset).stem().string() + "_" + h.substr(0, 8) + hy.substr(0, 8);
  d.constants = elasticnet_constants(d.rho, d.U);
  d.dim = static_cast<std::size_t>(d.U.cols());
  return d;
}

/// Builds the seeded problem instance and hands it to f.
template <typename F>
decltype(auto) with_problem(const ProblemData& d, std::uint64_t seed, std::size_t T, F&& f) {
  if (d.config.kind == "dsm") return f(DsmProblem(d.config.p, seed, T));
  return f(ElasticNetProblem(d.U, d.y, d.rho, seed, T, d.name));
}

struct OfflineSettings {
  double tol = 1e-9;
  std::size_t max_iter = 100000;
};

inline OfflineSettings offline_settings_for(const ProblemConfig& cfg) {
  return cfg.kind == "dsm" ? OfflineSettings{1e-10, 10000} : OfflineSettings{1e-8, 200000};
}

/// Disk cache of offline solutions, one JSON file per (problem id, t).
class OfflineCache {
 public:
  explicit OfflineCache(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path_for(const std::string& id, std::size_t t) const {
    return dir_ / (id + "_t" + std::to_string(t) + ".json");
  }

  std::optional<OfflineSolution> load(const std::string& id, std::size_t t, std::size_t dim) const {
    if (dir_.empty()) return std::nullopt;
    std::ifstream in(path_for(id, t));
    if (!in) return std::nullopt;
    try {
      const Json j = Json::parse(in);
      if (j.at("problem_id").get<std::string>() != id || j.at("t").get<std::size_t>() != t) return std::nullopt;
      const auto xs = j.at("x_star").get<std::vector<double>>();
      if (xs.size() != dim) return std::nullopt;
      OfflineSolution s;
      s.x_star = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
      s.objective = j.at("objective").get<double>();
      s.iterations = j.at("iterations").get<std::size_t>();
      s.tolerance_met = j.at("tolerance_met").get<bool>();
      return s;
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are recomputed
    }
  }

  void store(const std::string& id, std::size_t t, const OfflineSolution& s) const {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    const fs::path final_path = path_for(id, t);
    std::ostringstream tag;
    tag << ".tmp." << std::this_thread::get_id() << "." << std::random_device{}();
    const fs::path tmp = final_path.string() + tag.str();
    {
      std::ofstream out(tmp);
      out << offline_json(id, t, s).dump() << '\n';
      if (!out) throw InputError("cannot write offline cache file '" + tmp.string() + "'");
    }
    fs::rename(tmp, final_path);
  }

  static Json offline_json(const std::string& id, std::size_t t, const OfflineSolution& s) {
    Json j;
    j["problem_id"] = id;
    j["t"] = t;
    j["objective"] = s.objective;
    j["iterations"] = s.iterations;
    j["tolerance_met"] = s.tolerance_met;
    j["x_star"] = std::vector<double>(s.x_star.data(), s.x_star.data() + s.x_star.size());
    return j;
  }

 private:
  fs::path dir_;
};

/// Offline comparators for every checkpoint, warm-started along the prefix.
template <FeasibleProjectable P>
std::map<std::size_t, OfflineSolution> offline_solutions(const P& problem, std::span<const std::size_t> checkpoints,
                                                         const OfflineSettings& settings, const OfflineCache& cache) {
  std::map<std::size_t, OfflineSolution> out;
  std::optional<Vector> warm;
  for (const std::size_t t : checkpoints) {
    auto sol = cache.load(problem.id(), t, problem.dim());
    if (!sol) {
      sol = solve_offline(problem, t, settings.tol, settings.max_iter, warm);
      cache.store(problem.id(), t, *sol);
    }
    warm = sol->x_star;
    out.emplace(t, std::move(*sol));
  }
  return out;
}

struct CsvRow {
  std::size_t t = 0;
  double loss_regret = 0.0;
  double constraint_cum = 0.0;
  double loss_bound = 0.0;
  double constraint_bound = 0.0;
  double lambda = 0.0;
  double step_eta = 0.0;
  double step_theta = 0.0;
};

inline constexpr const char* kSeedCsvHeader =
    "t,loss_regret,constraint_cum,loss_bound,constraint_bound,lambda,step_eta,step_theta";
inline constexpr const char* kAggregateCsvHeader =
    "t,loss_regret_mean,loss_regret_std,constraint_cum_mean,constraint_cum_std,lambda_mean,lambda_std,"
    "loss_bound,constraint_bound";

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<CsvRow> rows;
  BoundCompliance compliance;
  double max_iterate_norm = 0.0;
  double min_lambda = 0.0;
  double total_constraint = 0.0;            // sum over all T rounds
  std::optional<std::size_t> first_nonpositive_t;    // first t with cumulative g <= 0
  std::optional<std::size_t> settled_nonpositive_t;  // cumulative g <= 0 from here through T
  std::size_t offline_unconverged = 0;
};

/// Everything that varies between the runs of one experiment except the seed.
struct RunPlan {
  double beta = 2.0 / 3.0;
  AnySchedule schedule;
  ScheduleParams bound_params;  // constants as seen by the learner
  std::optional<GammaShift> shift;
  std::size_t T = 0;
  std::vector<std::size_t> checkpoints;
};

template <FeasibleProjectable P>
SeedOutcome run_seed(const P& problem, const RunPlan& plan, const OfflineSettings& settings, const OfflineCache& cache) {
  const std::vector<RoundRecord> records =
      plan.shift ? run(gamma_shifted(problem, *plan.shift), plan.schedule, plan.T)
                 : run(problem, plan.schedule, plan.T);

  SeedOutcome out;
  out.min_lambda = INFINITY;
  double cum = 0.0;
  for (const auto& r : records) {
    out.max_iterate_norm = std::max(out.max_iterate_norm, r.x.norm());
    out.min_lambda = std::min(out.min_lambda, r.lambda);
    cum += r.constraint;
    if (cum <= 0.0) {
      if (!out.first_nonpositive_t) out.first_nonpositive_t = r.t;
      if (!out.settled_nonpositive_t) out.settled_nonpositive_t = r.t;
    } else {
      out.settled_nonpositive_t.reset();
    }
  }
  out.total_constraint = cum;

  const auto offline = offline_solutions(problem, plan.checkpoints, settings, cache);
  for (const auto& [t, s] : offline)
    if (!s.tolerance_met) ++out.offline_unconverged;

  const RegretReport rep = accumulate(std::span<const RoundRecord>(records), std::span<const std::size_t>(plan.checkpoints),
                                      offline, problem, plan.bound_params);
  out.compliance = bound_compliance(rep, plan.bound_params);
  for (const auto& row : rep.rows) {
    const RoundRecord& r = records[row.t - 1];
    out.rows.push_back({row.t, row.loss_regret, row.constraint_cum, row.loss_bound, row.constraint_bound, r.lambda,
                        r.eta, r.theta});
  }
  return out;
}

inline void write_seed_csv(const fs::path& path, const std::vector<CsvRow>& rows) {
  std::ofstream out(path);
  out << kSeedCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.t << ',' << format_double(r.loss_regret) << ',' << format_double(r.constraint_cum) << ','
        << format_double(r.loss_bound) << ',' << format_double(r.constraint_bound) << ','
        << format_double(r.lambda) << ',' << format_double(r.step_eta) << ',' << format_double(r.step_theta)
        << '\n';
  if (!out) throw InputError("cannot write '" + path.string() + "'");
}

struct AggregateRow {
  std::size_t t = 0;
  double loss_regret_mean = 0.0, loss_regret_std = 0.0;
  double constraint_cum_mean = 0.0, constraint_cum_std = 0.0;
  double lambda_mean = 0.0, lambda_std = 0.0;
  double loss_bound = 0.0, constraint_bound = 0.0;
};

/// Mean and sample standard deviation (n - 1; 0 for a single seed).
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::vector<AggregateRow> aggregate(const std::vector<SeedOutcome>& seeds) {
  std::vector<AggregateRow> out;
  if (seeds.empty()) return out;
  for (std::size_t k = 0; k < seeds.front().rows.size(); ++k) {
    std::vector<double> lr, cc, lam;
    for (const auto& s : seeds) {
      lr.push_back(s.rows[k].loss_regret);
      cc.push_back(s.rows[k].constraint_cum);
      lam.push_back(s.rows[k].lambda);
    }
    AggregateRow a;
    a.t = seeds.front().rows[k].t;
    std::tie(a.loss_regret_mean, a.loss_regret_std) = mean_std(lr);
    std::tie(a.constraint_cum_mean, a.constraint_cum_std) = mean_std(cc);
    std::tie(a.lambda_mean, a.lambda_std) = mean_std(lam);
    a.loss_bound = seeds.front().rows[k].loss_bound;
    a.constraint_bound = seeds.front().rows[k].constraint_bound;
    out.push_back(a);
  }
  return out;
}

inline void write_aggregate_csv(const fs::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  out << kAggregateCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.t << ',' << format_double(r.loss_regret_mean) << ',' << format_double(r.loss_regret_std) << ','
        << format_double(r.constraint_cum_mean) << ',' << format_double(r.constraint_cum_std) << ','
        << format_double(r.lambda_mean) << ',' << format_double(r.lambda_std) << ','
        << format_double(r.loss_bound) << ',' << format_double(r.constraint_bound) << '\n';
  if (!out) throw InputError("cannot write '" + path.string() + "'");
}

inline Json constants_json(const ProblemConstants& c) {
  return Json{{"R", c.R}, {"G", c.G}, {"D", c.D}, {"F", c.F}, {"sigma", c.sigma}};
}

inline Json conditions_json(const ConditionReport& r, double u_eta) {
  Json j;
  j["c1_ok"] = r.c1_ok;
  j["c2_ok"] = r.c2_ok;
  j["c3_slack"] = r.c3_slack;
  j["u_eta"] = u_eta;
  j["c3_ok"] = r.c3_within(u_eta);
  j["max_c1"] = r.max_c1;
  j["max_c2"] = r.max_c2;
  j["first_c1_violation"] = r.first_c1_violation;
  j["first_c2_violation"] = r.first_c2_violation;
  return j;
}

inline Json optional_json(const std::optional<std::size_t>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> try_fit(const std::vector<std::pair<double, double>>& c) {
  if (c.size() < 5) return std::nullopt;
  try {
    return fit_rate_exponent(c);
  } catch (const InputError&) {
    return std::nullopt;
  }
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json rate_exponents_json(const std::vector<AggregateRow>& rows) {
  std::vector<std::pair<double, double>> lr, cp, lb, cb;
  for (const auto& r : rows) {
    const double t = static_cast<double>(r.t);
    lr.emplace_back(t, r.loss_regret_mean);
    cp.emplace_back(t, std::max(0.0, r.constraint_cum_mean));
    lb.emplace_back(t, r.loss_bound);
    cb.emplace_back(t, r.constraint_bound);
  }
  return Json{{"loss_regret", optional_json(try_fit(lr))},
              {"constraint_positive", optional_json(try_fit(cp))},
              {"loss_bound", optional_json(try_fit(lb))},
              {"constraint_bound", optional_json(try_fit(cb))}};
}

inline std::string beta_label(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", beta);
  return buf;
}

inline RunPlan make_plan(const ExperimentConfig& cfg, const ProblemData& data, double beta) {
  RunPlan plan;
  plan.beta = beta;
  plan.T = cfg.T;
  plan.checkpoints = log_checkpoints(cfg.T, cfg.checkpoints);
  ProblemConstants learner = data.constants;
  if (cfg.gamma_c1) {
    plan.shift = GammaShift::for_horizon(*cfg.gamma_c1, beta, cfg.T);
    learner.D += plan.shift->gamma;
  }
  plan.bound_params.beta = beta;
  plan.bound_params.constants = learner;
  plan.bound_params.regime =
      cfg.algorithm == Algorithm::AogdStronglyConvex ? Regime::StronglyConvex : Regime::Convex;
  if (cfg.algorithm == Algorithm::FixedOgd) {
    plan.schedule = cfg.fixed;
  } else {
    plan.bound_params.validate();
    plan.schedule = plan.bound_params;
  }
  return plan;
}

inline ConditionReport plan_conditions(const RunPlan& plan) {
  const bool shifted = plan.shift && plan.shift->gamma > 0.0;
  const double mu_scale = shifted ? 2.0 / 3.0 : 1.0;
  const auto s = std::visit([&](const auto& p) { return materialize(p, plan.T, mu_scale); }, plan.schedule);
  const auto& c = plan.bound_params.constants;
  const double sigma = plan.bound_params.regime == Regime::StronglyConvex &&
                               std::holds_alternative<ScheduleParams>(plan.schedule)
                           ? c.sigma
                           : 0.0;
  return check_conditions(s, sigma, c.G, plan.T, shifted ? 1.5 : 1.0);
}

struct ExperimentResult {
  Json manifest;
  fs::path manifest_path;
};

/// Runs every (beta, seed) pair and writes
///   <output_dir>/manifest.json
///   <output_dir>/<algorithm>_beta<b>/seed_<s>.csv and aggregate.csv
///   <output_dir>/offline_cache/<problem-id>_t<t>.json
/// On any error a manifest with status "failed" is written before rethrowing.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const fs::path out_dir = cfg.output_dir;
  Json manifest;
  manifest["status"] = "running";
  manifest["config"] = cfg.to_json();
  std::string stage = "validate";
  Json failure_context = Json::object();

  auto write_manifest = [&]() {
    fs::create_directories(out_dir);
    const fs::path tmp = out_dir / "manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << manifest.dump(2) << '\n';
    }
    fs::rename(tmp, out_dir / "manifest.json");
  };

  try {
    cfg.validate();
    fs::create_directories(out_dir);

    stage = "load_problem";
    const ProblemData data = prepare_problem(cfg.problem);
    Json pj;
    pj["signature"] = cfg.problem.signature();
    pj["name"] = data.name;
    pj["dim"] = data.dim;
    pj["constants"] = constants_json(data.constants);
    if (cfg.problem.kind == "elasticnet") {
      pj["rho"] = data.rho;
      pj["rows"] = static_cast<std::size_t>(data.U.rows());
      if (data.rho_search_fraction) pj["rho_search_nonzero_fraction"] = *data.rho_search_fraction;
    }
    manifest["problem"] = pj;

    const OfflineCache cache(cfg.offline_cache ? out_dir / "offline_cache" : fs::path{});
    const OfflineSettings settings = offline_settings_for(cfg.problem);
    const std::size_t workers = std::max<std::size_t>(
        1, std::min(cfg.seeds.size(), cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency())));

    manifest["runs"] = Json::array();
    std::vector<std::string> labels;
    for (const double beta : cfg.betas) {
      stage = "schedule";
      failure_context = Json{{"beta", beta}};
      const RunPlan plan = make_plan(cfg, data, beta);
      const std::string label = std::string(to_string(cfg.algorithm)) + "_beta" + beta_label(beta);
      if (std::find(labels.begin(), labels.end(), label) != labels.end())
        throw InputError("two beta values share the label '" + label + "'");
      labels.push_back(label);
      const fs::path run_dir = out_dir / label;
      fs::create_directories(run_dir);
      const ConditionReport cond = plan_conditions(plan);

      // Seeds fan out over worker threads; each owns its problem and learner.
      stage = "run";
      std::vector<SeedOutcome> outcomes(cfg.seeds.size());
      std::vector<std::exception_ptr> errors(cfg.seeds.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&]() {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
          try {
            outcomes[i] = with_problem(data, cfg.seeds[i], cfg.T,
                                       [&](const auto& prob) { return run_seed(prob, plan, settings, cache); });
            outcomes[i].seed = cfg.seeds[i];
            write_seed_csv(run_dir / ("seed_" + std::to_string(cfg.seeds[i]) + ".csv"), outcomes[i].rows);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
      worker();
      for (auto& th : pool) th.join();
      for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) {
          failure_context["seed"] = cfg.seeds[i];
          std::rethrow_exception(errors[i]);
        }
      }

      stage = "aggregate";
      const auto agg = aggregate(outcomes);
      write_aggregate_csv(run_dir / "aggregate.csv", agg);

      Json rj;
      rj["label"] = label;
      rj["algorithm"] = to_string(cfg.algorithm);
      rj["beta"] = beta;
      if (cfg.algorithm == Algorithm::FixedOgd) {
        rj["schedule"] = Json{{"kind", "fixed"}, {"eta", cfg.fixed.eta}, {"theta", cfg.fixed.theta}, {"mu", cfg.fixed.mu}};
      } else {
        rj["schedule"] = Json{{"kind", "adaptive"}, {"regime", to_string(plan.bound_params.regime)}};
      }
      rj["gamma_shift"] = plan.shift ? Json{{"c1", plan.shift->c1}, {"gamma", plan.shift->gamma}} : Json(nullptr);
      rj["learner_constants"] = constants_json(plan.bound_params.constants);
      rj["conditions"] = conditions_json(cond, u_eta_bound(plan.bound_params, cfg.T));
      rj["bound_is_conservative"] = bound_is_conservative(plan.bound_params);

      bool loss_ok = true, constraint_ok = true, all_nonpositive = true;
      double max_ratio = -INFINITY, max_norm = 0.0, min_lambda = INFINITY;
      std::optional<std::size_t> latest_settle;
      Json seeds = Json::array();
      for (const auto& o : outcomes) {
        loss_ok = loss_ok && o.compliance.loss_ok;
        constraint_ok = constraint_ok && o.compliance.constraint_ok;
        max_ratio = std::max(max_ratio, o.compliance.max_ratio);
        max_norm = std::max(max_norm, o.max_iterate_norm);
        min_lambda = std::min(min_lambda, o.min_lambda);
        if (o.settled_nonpositive_t) {
          latest_settle = std::max(latest_settle.value_or(0), *o.settled_nonpositive_t);
        } else {
          all_nonpositive = false;
        }
        Json sj;
        sj["seed"] = o.seed;
        sj["csv"] = (fs::path(label) / ("seed_" + std::to_string(o.seed) + ".csv")).string();
        sj["final_loss_regret"] = o.rows.back().loss_regret;
        sj["final_constraint_cum"] = o.rows.back().constraint_cum;
        sj["loss_ok"] = o.compliance.loss_ok;
        sj["constraint_ok"] = o.compliance.constraint_ok;
        sj["max_iterate_norm"] = o.max_iterate_norm;
        sj["min_lambda"] = o.min_lambda;
        sj["first_nonpositive_t"] = optional_json(o.first_nonpositive_t);
        sj["settled_nonpositive_t"] = optional_json(o.settled_nonpositive_t);
        sj["offline_unconverged"] = o.offline_unconverged;
        seeds.push_back(sj);
      }
      rj["compliance"] = Json{{"loss_ok", loss_ok}, {"constraint_ok", constraint_ok}, {"max_ratio", max_ratio}};
      rj["invariants"] = Json{{"max_iterate_norm", max_norm}, {"R", plan.bound_params.constants.R},
                              {"min_lambda", min_lambda}};
      rj["violation"] = Json{{"all_seeds_nonpositive_at_T", all_nonpositive},
                             {"smallest_t_all_seeds_nonpositive", all_nonpositive ? optional_json(latest_settle)
                                                                                  : Json(nullptr)}};
      rj["rate_exponents"] = rate_exponents_json(agg);
      rj["final"] = Json{{"t", agg.back().t},
                         {"loss_regret_mean", agg.back().loss_regret_mean},
                         {"constraint_cum_mean", agg.back().constraint_cum_mean},
                         {"loss_bound", agg.back().loss_bound},
                         {"constraint_bound", agg.back().constraint_bound}};
      rj["aggregate_csv"] = (fs::path(label) / "aggregate.csv").string();
      rj["seeds"] = seeds;
      manifest["runs"].push_back(rj);
    }
    stage = "write";
    manifest["status"] = "ok";
    write_manifest();
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    Json f = failure_context;
    f["stage"] = stage;
    f["message"] = e.what();
    manifest["failure"] = f;
    try {
      write_manifest();
    } catch (...) {
    }
    throw;
  }
  return {manifest, out_dir / "manifest.json"};
}

struct ComparisonRow {
  std::string manifest;
  std::string label;
  std::string algorithm;
  double beta = 0.0;
  double final_loss_regret = 0.0;
  double final_constraint_cum = 0.0;
  double loss_bound = 0.0;
  double constraint_bound = 0.0;
  std::optional<double> loss_rate;
  std::optional<double> constraint_rate;
  double delta_loss_regret = 0.0;  // relative to the first row
  double delta_constraint_cum = 0.0;
};

struct Comparison {
  std::size_t T = 0;
  std::vector<ComparisonRow> rows;

  std::string csv() const {
    std::ostringstream out;
    out << "manifest,label,algorithm,beta,final_loss_regret,final_constraint_cum,loss_bound,constraint_bound,"
           "loss_rate,constraint_rate,delta_loss_regret,delta_constraint_cum\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
    for (const auto& r : rows)
      out << r.manifest << ',' << r.label << ',' << r.algorithm << ',' << format_double(r.beta) << ','
          << format_double(r.final_loss_regret) << ',' << format_double(r.final_constraint_cum) << ','
          << format_double(r.loss_bound) << ',' << format_double(r.constraint_bound) << ',' << opt(r.loss_rate)
          << ',' << opt(r.constraint_rate) << ',' << format_double(r.delta_loss_regret) << ','
          << format_double(r.delta_constraint_cum) << '\n';
    return out.str();
  }

  std::string text() const {
    std::ostringstream out;
    char buf[256];
    out << "T = " << T << '\n';
    std::snprintf(buf, sizeof buf, "%-36s %8s %14s %14s %14s %14s %8s %8s\n", "run", "beta", "loss_regret",
                  "constraint", "loss_bound", "constr_bound", "rate_f", "rate_g");
    out << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-36s %8.4f %14.6g %14.6g %14.6g %14.6g %8s %8s\n", r.label.c_str(), r.beta,
                    r.final_loss_regret, r.final_constraint_cum, r.loss_bound, r.constraint_bound,
                    r.loss_rate ? beta_label(*r.loss_rate).c_str() : "-",
                    r.constraint_rate ? beta_label(*r.constraint_rate).c_str() : "-");
      out << buf;
    }
    return out.str();
  }
};

inline Json load_manifest(const std::string& path) {
  fs::path p = path;
  if (fs::is_directory(p)) p /= "manifest.json";
  std::ifstream in(p);
  if (!in) throw InputError("cannot open manifest '" + p.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest '" + p.string() + "': " + e.what());
  }
}

/// Final-checkpoint comparison of runs that share one problem and horizon.
inline Comparison compare_runs(const std::vector<std::string>& manifest_paths) {
  if (manifest_paths.empty()) throw InputError("compare: no manifests given");
  Comparison cmp;
  Json signature;
  for (std::size_t i = 0; i < manifest_paths.size(); ++i) {
    const Json m = load_manifest(manifest_paths[i]);
    try {
      if (m.at("status") != "ok") throw InputError("manifest '" + manifest_paths[i] + "' records a failed run");
      const Json sig = m.at("problem").at("signature");
      const std::size_t T = m.at("config").at("T").get<std::size_t>();
      if (i == 0) {
        signature = sig;
        cmp.T = T;
      } else if (sig != signature) {
        throw InputError("compare: manifests describe different problems (" + signature.dump() + " vs " +
                         sig.dump() + ")");
      } else if (T != cmp.T) {
        throw InputError("compare: manifests use different horizons T");
      }
      for (const auto& r : m.at("runs")) {
        ComparisonRow row;
        row.manifest = manifest_paths[i];
        row.label = r.at("label").get<std::string>();
        row.algorithm = r.at("algorithm").get<std::string>();
        row.beta = r.at("beta").get<double>();
        const auto& f = r.at("final");
        row.final_loss_regret = f.at("loss_regret_mean").get<double>();
        row.final_constraint_cum = f.at("constraint_cum_mean").get<double>();
        row.loss_bound = f.at("loss_bound").get<double>();
        row.constraint_bound = f.at("constraint_bound").get<double>();
        const auto& e = r.at("rate_exponents");
        if (!e.at("loss_regret").is_null()) row.loss_rate = e.at("loss_regret").get<double>();
        if (!e.at("constraint_positive").is_null()) row.constraint_rate = e.at("constraint_positive").get<double>();
        cmp.rows.push_back(row);
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError("manifest '" + manifest_paths[i] + "' is malformed: " + e.what());
    }
  }
  for (auto& r : cmp.rows) {
    r.delta_loss_regret = r.final_loss_regret - cmp.rows.front().final_loss_regret;
    r.delta_constraint_cum = r.final_constraint_cum - cmp.rows.front().final_constraint_cum;
  }
  return cmp;
}

/// Condition report, schedule sums and bounds for one parameter set.
inline Json check_schedule_report(const ScheduleParams& p, std::size_t T) {
  p.validate();
  const auto s = materialize(p, T);
  const double sigma = p.regime == Regime::StronglyConvex ? p.constants.sigma : 0.0;
  const auto cond = check_conditions(s, sigma, p.constants.G, T);
  const auto sums = schedule_sums(p, T);
  Json j;
  j["beta"] = p.beta;
  j["regime"] = to_string(p.regime);
  j["T"] = T;
  j["constants"] = constants_json(p.constants);
  j["conditions"] = conditions_json(cond, u_eta_bound(p, T));
  j["sums"] = Json{{"S_theta", sums.S_theta}, {"S_theta_bound", sums.S_theta_bound},
                   {"S_eta", sums.S_eta},     {"S_eta_bound", sums.S_eta_bound},
                   {"S_mu", sums.S_mu},       {"S_mu_bound", sums.S_mu_bound},
                   {"U_eta", sums.U_eta},     {"delta_mu", sums.delta_mu},
                   {"delta_eta", sums.delta_eta}};
  const double Td = static_cast<double>(T);
  j["loss_regret_bound"] = loss_regret_bound(p, Td);
  j["constraint_regret_bound"] = constraint_regret_bound(p, Td);
  j["bound_is_conservative"] = bound_is_conservative(p);
  return j;
}

/// Offline solution of the first t rounds of one seeded problem instance.
inline Json solve_offline_report(const ProblemConfig& cfg, std::uint64_t seed, std::size_t t) {
  if (t < 1) throw InputError("t must be >= 1");
  const ProblemData data = prepare_problem(cfg);
  const OfflineSettings settings = offline_settings_for(cfg);
  return with_problem(data, seed, t, [&](const auto& prob) {
    const auto sol = solve_offline(prob, t, settings.tol, settings.max_iter);
    return OfflineCache::offline_json(prob.id(), t, sol);
  });
}

}  // namespace aogd
