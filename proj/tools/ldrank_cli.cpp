// Command-line front end: reproduces the library's experiments and emits
// machine-readable CSV. Every command is deterministic given the config's
// seed; the first output line is a '#'-prefixed JSON echo of the fully
// resolved configuration. Exit codes: 0 success, 2 config error,
// 3 divergence (partial CSV written), 4 numerical failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldrank/ldrank.hpp"

using nlohmann::json;
using namespace ldrank;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  double eta = -1.0;     // <0 means "not set"
  double sigma2 = -1.0;  // <0 means "not set"
  long long seed = -1;   // <0 means "not set"
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Loads the user JSON (if any) onto the defaults, rejecting unknown keys,
/// then applies the per-flag overrides.
json resolve_config(const json& defaults, const CommonFlags& flags) {
  json cfg = defaults;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ConfigError("cannot open config file: " + flags.config_path);
    json user;
    try {
      in >> user;
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!user.is_object()) throw ConfigError("config root must be a JSON object");
    for (const auto& [key, value] : user.items()) {
      if (!cfg.contains(key)) throw ConfigError("unknown config key: " + key);
      cfg[key] = value;
    }
  }
  if (flags.eta >= 0.0 && cfg.contains("eta")) cfg["eta"] = flags.eta;
  if (flags.sigma2 >= 0.0 && cfg.contains("sigma2")) cfg["sigma2"] = flags.sigma2;
  if (flags.seed >= 0 && cfg.contains("seed")) cfg["seed"] = flags.seed;
  return cfg;
}

std::string document_defaults(const json& defaults) {
  std::string doc = "JSON config keys and defaults: ";
  bool first = true;
  for (const auto& [key, value] : defaults.items()) {
    if (!first) doc += ", ";
    doc += key + "=" + value.dump();
    first = false;
  }
  return doc;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + out_path);
  out << text;
}

double get_positive(const json& cfg, const char* key) {
  const double v = cfg.at(key).get<double>();
  if (!(v > 0.0)) throw ConfigError(std::string(key) + " must be positive");
  return v;
}

long get_positive_int(const json& cfg, const char* key) {
  const long v = cfg.at(key).get<long>();
  if (v < 1) throw ConfigError(std::string(key) + " must be >= 1");
  return v;
}

/// Oracle + start point + Hessian spectrum for the theory overlays. Linear
/// nets carry the nonzero spectrum of H through the Gram form 2ΦᵀΦ, so the
/// overlay stays cheap at parameter counts where H itself is out of reach.
struct CurveProblem {
  std::unique_ptr<GradientOracle> oracle;
  Vector theta0;
  Vector hessian_eigenvalues;
  long true_rank = 0;
};

CurveProblem make_problem(const json& cfg, uint64_t seed) {
  CurveProblem p;
  const std::string kind = cfg.at("oracle").get<std::string>();
  if (kind == "linear-net") {
    const int d = static_cast<int>(get_positive_int(cfg, "d"));
    const int depth = static_cast<int>(get_positive_int(cfg, "depth"));
    const LinearNet net =
        init_at_global_minimum(depth, d, d, random_target(d, d, seed + 7919), seed);
    const SymMat gram = gram_hessian(build_phi(net));
    p.hessian_eigenvalues = sym_eig(gram).eigenvalues;
    p.true_rank = numeric_rank(gram);
    p.theta0 = net.pack();
    p.oracle = std::make_unique<LinearNetOracle>(population_oracle(net));
  } else if (kind == "quadratic") {
    const int n = static_cast<int>(get_positive_int(cfg, "n"));
    const int rank = static_cast<int>(cfg.at("rank").get<long>());
    if (rank < 0 || rank > n) throw ConfigError("rank must lie in [0, n]");
    std::mt19937_64 rng(seed);
    const SymMat h = rank == 0 ? SymMat::zero(n)
                               : random_psd_with_rank(n, rank, rng,
                                                      cfg.at("eig_min").get<double>(),
                                                      cfg.at("eig_max").get<double>());
    p.hessian_eigenvalues = sym_eig(h).eigenvalues;
    p.true_rank = rank == 0 ? 0 : numeric_rank(h);
    p.theta0 = Vector(n, 0.0);
    p.oracle = std::make_unique<QuadraticOracle>(h);
  } else {
    throw ConfigError("oracle must be \"linear-net\" or \"quadratic\"");
  }
  return p;
}

/// ¼σ² Σ_{λ>0} (1 − e^{−2λt}) for G = I, Σ = σ²I.
double theory_loss(const Vector& eigenvalues, double sigma2, double t) {
  double max_abs = 0.0;
  for (double l : eigenvalues) max_abs = std::max(max_abs, std::abs(l));
  double s = 0.0;
  for (double l : eigenvalues)
    if (l > 1e-10 * max_abs) s += 1.0 - std::exp(-2.0 * l * t);
  return 0.25 * sigma2 * s;
}

// ---------------------------------------------------------------------------

int cmd_loss_curve(const json& cfg, const std::string& out_path) {
  const double eta = get_positive(cfg, "eta");
  const double sigma2 = get_positive(cfg, "sigma2");
  const long num_steps = get_positive_int(cfg, "num_steps");
  const long record_every = get_positive_int(cfg, "record_every");
  const uint64_t seed = cfg.at("seed").get<uint64_t>();

  CurveProblem p = make_problem(cfg, seed);
  const double steady = 0.25 * sigma2 * static_cast<double>(p.true_rank);

  const int n = p.oracle->dim();
  SimConfig sim(eta, num_steps, SpdOperator::identity(n), SpdOperator::identity(n, sigma2),
                seed, record_every);
  const Trajectory traj = run(p.theta0, *p.oracle, sim);

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "step,simulated_loss,theory_loss_eq5,theory_steady_eq6\n";
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const double t = eta * static_cast<double>(traj.steps[i]);
    csv << traj.steps[i] << "," << format_double(traj.losses[i]) << ","
        << format_double(theory_loss(p.hessian_eigenvalues, sigma2, t)) << ","
        << format_double(steady) << "\n";
  }
  if (traj.diverged) {
    csv << "# diverged_at_step," << traj.diverged_step << "\n";
    write_output(csv.str(), out_path);
    return 3;
  }
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_rank(const json& cfg, const std::string& out_path) {
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  CurveProblem p = make_problem(cfg, seed);
  const int n = p.oracle->dim();

  RankConfig rank_cfg;
  rank_cfg.sigma2 = get_positive(cfg, "sigma2");
  rank_cfg.stepsize = get_positive(cfg, "eta");
  rank_cfg.k_tot = get_positive_int(cfg, "k_tot");
  rank_cfg.k_avg = get_positive_int(cfg, "k_avg");
  if (rank_cfg.k_avg > rank_cfg.k_tot) throw ConfigError("k_avg must be <= k_tot");
  rank_cfg.seed = seed;

  const std::string mode = cfg.at("precond").get<std::string>();
  if (mode == "identity") {
    rank_cfg.precond = SpdOperator::identity(n);
  } else if (mode == "adam") {
    // Second-moment pre-pass from a slightly perturbed start (at the exact
    // minimum all gradients vanish), then the preconditioner is frozen.
    Vector start = p.theta0;
    Vector jitter(n);
    NormalStream(seed, 0xADA).fill(0, jitter.data(), n);
    add_scaled(start, 0.01, jitter);
    const Vector v =
        adam_second_moments(*p.oracle, start, get_positive_int(cfg, "adam_steps"),
                            cfg.at("adam_beta2").get<double>());
    const SpdMat g = make_adam_preconditioner(v);
    Vector diag(n);
    for (int i = 0; i < n; ++i) diag[i] = g(i, i);
    rank_cfg.precond = SpdOperator::diagonal(diag);
  } else {
    throw ConfigError("precond must be \"identity\" or \"adam\"");
  }

  const long record_every = get_positive_int(cfg, "record_every");
  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "step,loss\n";
  try {
    const RankEstimate est = estimate_rank(p.theta0, *p.oracle, rank_cfg);
    for (size_t k = 0; k < est.loss_series.size(); k += record_every)
      csv << k << "," << format_double(est.loss_series[k]) << "\n";
    csv << "# base_loss," << format_double(est.base_loss) << "\n";
    csv << "# avg_loss," << format_double(est.avg_loss) << "\n";
    csv << "# r_hat," << format_double(est.r_hat) << "\n";
    csv << "# r_rounded," << est.r_rounded << "\n";
    csv << "# true_rank," << p.true_rank << "\n";
    csv << "# settled," << (est.settled ? 1 : 0) << "\n";
    csv << "# window_stderr," << format_double(est.window_stderr) << "\n";
  } catch (const DivergedError& e) {
    const auto& partial = e.partial_losses();
    for (size_t k = 0; k < partial.size(); k += record_every)
      csv << k << "," << format_double(partial[k]) << "\n";
    csv << "# diverged_at_step," << e.step() << "\n";
    write_output(csv.str(), out_path);
    return 3;
  }
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_rank_sweep(const json& cfg, const std::string& out_path) {
  const std::vector<int> dims = cfg.at("dims").get<std::vector<int>>();
  if (dims.empty()) throw ConfigError("dims must be a non-empty list");
  for (int d : dims)
    if (d < 1) throw ConfigError("dims entries must be >= 1");
  const int depth = static_cast<int>(get_positive_int(cfg, "depth"));
  const long trials = get_positive_int(cfg, "trials");
  const double eta = get_positive(cfg, "eta");
  const double sigma2 = get_positive(cfg, "sigma2");
  const long k_tot = get_positive_int(cfg, "k_tot");
  const long k_avg = get_positive_int(cfg, "k_avg");
  if (k_avg > k_tot) throw ConfigError("k_avg must be <= k_tot");
  const uint64_t seed = cfg.at("seed").get<uint64_t>();

  FilterConfig filter;
  filter.degree = static_cast<int>(get_positive_int(cfg, "filter_degree"));
  filter.num_probe_vectors = static_cast<int>(get_positive_int(cfg, "filter_probes"));
  filter.threshold_eps = get_positive(cfg, "filter_threshold");

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "d,trial,true_rank,r_hat,r_rounded,polyfilter_estimate\n";

  for (int d : dims) {
    std::vector<double> ours(trials), theirs(trials);
    std::vector<long> rounded(trials);
    parallel_for(0, trials, 0, [&](long trial) {
      const uint64_t trial_seed = seed + 1000003ull * static_cast<uint64_t>(trial) +
                                  999983ull * static_cast<uint64_t>(d);
      const LinearNet net = init_at_global_minimum(
          depth, d, d, random_target(d, d, trial_seed + 7919), trial_seed);
      const PhiBlocks phi = build_phi(net);
      const LinearNetOracle oracle = population_oracle(net);

      RankConfig rc;
      rc.sigma2 = sigma2;
      rc.stepsize = eta;
      rc.k_tot = k_tot;
      rc.k_avg = k_avg;
      rc.seed = trial_seed;
      rc.precond = SpdOperator::identity(oracle.dim());
      const RankEstimate est = estimate_rank(net.pack(), oracle, rc);
      ours[trial] = est.r_hat;
      rounded[trial] = est.r_rounded;
      theirs[trial] = estimate_rank_polyfilter(PhiMatVec(phi), filter, trial_seed);
    });

    const double true_rank = static_cast<double>(d) * d;
    double sq_ours = 0.0, sq_theirs = 0.0;
    for (long t = 0; t < trials; ++t) {
      csv << d << "," << t << "," << static_cast<long>(true_rank) << ","
          << format_double(ours[t]) << "," << rounded[t] << "," << format_double(theirs[t])
          << "\n";
      sq_ours += (ours[t] - true_rank) * (ours[t] - true_rank);
      sq_theirs += (theirs[t] - true_rank) * (theirs[t] - true_rank);
    }
    csv << "# summary,d=" << d
        << ",ours_nrmse=" << format_double(std::sqrt(sq_ours / trials) / true_rank)
        << ",polyfilter_nrmse=" << format_double(std::sqrt(sq_theirs / trials) / true_rank)
        << "\n";
  }
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_saddle(const json& cfg, const std::string& out_path) {
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  const double eta = get_positive(cfg, "eta");
  const long grid_points = get_positive_int(cfg, "grid_points");
  const long paths = get_positive_int(cfg, "ensemble_paths");
  const double t_max_factor = get_positive(cfg, "t_max_factor");

  std::mt19937_64 rng(seed);
  const auto diag_cfg = cfg.at("hessian_diag").get<std::vector<double>>();
  int n;
  SymMat h = SymMat::zero(1);
  if (!diag_cfg.empty()) {
    h = SymMat::diagonal(diag_cfg);
    n = h.dim();
  } else {
    n = static_cast<int>(get_positive_int(cfg, "n"));
    const int negatives = static_cast<int>(get_positive_int(cfg, "num_negative"));
    if (negatives > n) throw ConfigError("num_negative must be <= n");
    h = random_saddle_hessian(n, negatives, rng, cfg.at("eig_min").get<double>(),
                              cfg.at("eig_max").get<double>());
  }

  const std::string mode = cfg.at("mode").get<std::string>();
  SpdMat g = SpdMat::identity(n);
  SpdMat sigma = SpdMat::identity(n);
  if (mode == "random") {
    g = random_spd(n, rng, 0.4, 2.0);
    sigma = random_spd(n, rng, 0.4, 2.0);
  } else if (mode != "identity") {
    throw ConfigError("mode must be \"identity\" or \"random\"");
  }

  const OuSystem sys(g, h, sigma);
  const SpectralCache cache(sys);

  double bound = -1.0;
  if (cache.saddle()) bound = escape_time_bound(cache, sys);
  const double t_max = bound > 0.0 ? t_max_factor * bound : 1.0;

  // Ensemble on (a discrete refinement of) the same time grid.
  const long record_every = std::max<long>(1, std::lround(t_max / grid_points / eta));
  const long steps = record_every * grid_points;
  SimConfig sim(eta, steps, SpdOperator::dense(g), SpdOperator::dense(sigma), seed,
                record_every);
  const QuadraticOracle oracle(h);
  const EnsembleStats stats = ensemble_mean_loss(Vector(n, 0.0), oracle, sim, paths);

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "t,closed_form_loss,ensemble_loss\n";
  for (size_t i = 0; i < stats.steps.size(); ++i) {
    const double t = eta * static_cast<double>(stats.steps[i]);
    csv << format_double(t) << "," << format_double(expected_loss_at_raw(cache, t)) << ","
        << format_double(stats.mean_losses[i]) << "\n";
  }

  // First closed-form crossing below zero, refined by bisection.
  double t_cross = -1.0;
  if (bound > 0.0) {
    const int scan = 4000;
    double prev = 0.0;
    for (int i = 1; i <= scan; ++i) {
      const double t = t_max * i / scan;
      if (expected_loss_at_raw(cache, t) < 0.0) {
        double lo = prev, hi = t;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (expected_loss_at_raw(cache, mid) < 0.0 ? hi : lo) = mid;
        }
        t_cross = hi;
        break;
      }
      prev = t;
    }
  }
  csv << "# t_cross," << (t_cross >= 0.0 ? format_double(t_cross) : "none") << "\n";
  csv << "# bound_eq17," << (bound >= 0.0 ? format_double(bound) : "none") << "\n";
  write_output(csv.str(), out_path);

  if (bound > 0.0 && t_cross >= 0.0 && t_cross > bound * (1.0 + 1e-9)) {
    std::cerr << "saddle: closed-form crossing exceeds the bound\n";
    return 4;
  }
  return 0;
}

int cmd_precond_compare(const json& cfg, const std::string& out_path) {
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  std::mt19937_64 rng(seed);

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "sample,n,trace_sigma,loss_identity_like,loss_adam_like,loss_gstar,"
         "predicate_trace_gt_n,inequality_holds\n";

  const auto emit = [&](long sample, const SpdMat& sigma) {
    const PrecondComparison c = compare_preconditioners(sigma);
    const double loss_gstar = 0.25 * sigma.dense().frobenius_norm();
    csv << sample << "," << sigma.dim() << "," << format_double(sigma.trace()) << ","
        << format_double(c.loss_identity_like) << "," << format_double(c.loss_adam_like)
        << "," << format_double(loss_gstar) << "," << (c.predicate_holds ? 1 : 0) << ","
        << (c.loss_identity_like > c.loss_adam_like ? 1 : 0) << "\n";
  };

  const auto diag_cfg = cfg.at("sigma_diag").get<std::vector<double>>();
  if (!diag_cfg.empty()) {
    emit(0, SpdMat::diagonal(diag_cfg));
  } else {
    const int n = static_cast<int>(get_positive_int(cfg, "n"));
    const long samples = get_positive_int(cfg, "num_samples");
    const double eig_min = get_positive(cfg, "eig_min");
    const double eig_max = get_positive(cfg, "eig_max");
    for (long s = 0; s < samples; ++s) emit(s, random_spd(n, rng, eig_min, eig_max));
  }
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_trace(const json& cfg, const std::string& out_path) {
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  const double eta = get_positive(cfg, "eta");
  CurveProblem p = make_problem(cfg, seed);

  double exact = 0.0;
  for (double l : p.hessian_eigenvalues) exact += l;

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "num_probes,estimate,stderr,exact,abs_error\n";
  for (const long probes : cfg.at("probes").get<std::vector<long>>()) {
    if (probes < 1) throw ConfigError("probes entries must be >= 1");
    const TraceEstimate est = estimate_trace_detailed(p.theta0, *p.oracle, eta, probes, seed);
    csv << probes << "," << format_double(est.mean) << "," << format_double(est.stderr_)
        << "," << format_double(exact) << "," << format_double(std::abs(est.mean - exact))
        << "\n";
  }
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_instability_demo(const json& cfg, const std::string& out_path) {
  const int n = static_cast<int>(get_positive_int(cfg, "n"));
  const double cond = get_positive(cfg, "cond");
  const double eta = get_positive(cfg, "eta");
  const double sigma2 = get_positive(cfg, "sigma2");
  const long k_tot = get_positive_int(cfg, "k_tot");
  const long k_avg = get_positive_int(cfg, "k_avg");
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  if (n < 2) throw ConfigError("n must be >= 2");

  // Ill-conditioned diagonal quadratic: eigenvalues log-spaced over the
  // requested condition number, largest √cond.
  Vector diag(n);
  const double top = std::sqrt(cond);
  for (int i = 0; i < n; ++i)
    diag[i] = top * std::pow(cond, -static_cast<double>(i) / (n - 1));
  const QuadraticOracle oracle(SymMat::diagonal(diag));

  std::ostringstream csv;
  csv << "# " << cfg.dump() << "\n";
  csv << "phase,diverged,divergence_step,settled,r_hat,r_rounded\n";

  RankConfig rc;
  rc.sigma2 = sigma2;
  rc.stepsize = eta;
  rc.k_tot = k_tot;
  rc.k_avg = k_avg;
  rc.seed = seed;

  rc.precond = SpdOperator::identity(n);
  try {
    const RankEstimate est = estimate_rank(Vector(n, 0.0), oracle, rc);
    csv << "identity,0,-1," << (est.settled ? 1 : 0) << "," << format_double(est.r_hat)
        << "," << est.r_rounded << "\n";
  } catch (const DivergedError& e) {
    csv << "identity,1," << e.step() << ",0,nan,-1\n";
  }

  Vector jacobi(n);
  for (int i = 0; i < n; ++i) jacobi[i] = 1.0 / diag[i];
  rc.precond = SpdOperator::diagonal(jacobi);
  try {
    const RankEstimate est = estimate_rank(Vector(n, 0.0), oracle, rc);
    csv << "jacobi,0,-1," << (est.settled ? 1 : 0) << "," << format_double(est.r_hat) << ","
        << est.r_rounded << "\n";
  } catch (const DivergedError& e) {
    csv << "jacobi,1," << e.step() << ",0,nan,-1\n";
    write_output(csv.str(), out_path);
    return 3;  // the preconditioned phase is expected to settle
  }
  write_output(csv.str(), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Preconditioned Langevin dynamics near stationary points: expected-loss "
      "analytics, SDE simulation, and Hessian rank estimation. Parallelism is "
      "capped by the LANGEVIN_RANK_THREADS environment variable (0 = auto)."};
  app.require_subcommand(1);

  const json loss_curve_defaults = {{"oracle", "linear-net"},
                                    {"d", 8},
                                    {"depth", 5},
                                    {"n", 20},
                                    {"rank", 5},
                                    {"eig_min", 0.5},
                                    {"eig_max", 2.0},
                                    {"eta", 1e-4},
                                    {"sigma2", 2e-5},
                                    {"num_steps", 15000},
                                    {"record_every", 50},
                                    {"seed", 1}};
  const json rank_defaults = {{"oracle", "linear-net"},
                              {"d", 8},
                              {"depth", 5},
                              {"n", 20},
                              {"rank", 7},
                              {"eig_min", 5.0},
                              {"eig_max", 10.0},
                              {"eta", 1e-4},
                              {"sigma2", 2e-5},
                              {"k_tot", 15000},
                              {"k_avg", 10000},
                              {"precond", "identity"},
                              {"adam_steps", 1000},
                              {"adam_beta2", 0.999},
                              {"record_every", 10},
                              {"seed", 1}};
  const json rank_sweep_defaults = {{"dims", json::array({4, 8})},
                                    {"depth", 5},
                                    {"trials", 20},
                                    {"eta", 1e-4},
                                    {"sigma2", 2e-5},
                                    {"k_tot", 15000},
                                    {"k_avg", 10000},
                                    {"filter_degree", 50},
                                    {"filter_probes", 300},
                                    {"filter_threshold", 1e-3},
                                    {"seed", 1}};
  const json saddle_defaults = {{"mode", "identity"},
                                {"hessian_diag", json::array({1.0, -1.0})},
                                {"n", 2},
                                {"num_negative", 1},
                                {"eig_min", 0.4},
                                {"eig_max", 2.0},
                                {"grid_points", 50},
                                {"t_max_factor", 1.5},
                                {"ensemble_paths", 2000},
                                {"eta", 1e-3},
                                {"seed", 1}};
  const json precond_defaults = {{"sigma_diag", json::array()},
                                 {"n", 2},
                                 {"num_samples", 200},
                                 {"eig_min", 1.1},
                                 {"eig_max", 4.0},
                                 {"seed", 1}};
  const json trace_defaults = {{"oracle", "quadratic"},
                               {"n", 16},
                               {"rank", 10},
                               {"eig_min", 0.2},
                               {"eig_max", 3.0},
                               {"d", 8},
                               {"depth", 5},
                               {"eta", 1e-4},
                               {"probes", json::array({100, 1000, 10000})},
                               {"seed", 1}};
  // The Jacobi phase needs a long window: with G·H = I the windowed r̂ has
  // std ≈ √(2n/(η·k_avg)), and rounding to the exact rank wants that ≲ 0.15.
  const json instability_defaults = {{"n", 30},        {"cond", 1e6},
                                     {"eta", 0.01},    {"sigma2", 1e-2},
                                     {"k_tot", 500000}, {"k_avg", 400000},
                                     {"seed", 1}};

  struct Command {
    const char* name;
    const char* brief;
    const json* defaults;
    int (*fn)(const json&, const std::string&);
  };
  const Command commands[] = {
      {"loss-curve",
       "Single Langevin path on a loss with theory overlays (expected loss over time and "
       "its steady value). CSV columns: step,simulated_loss,theory_loss_eq5,"
       "theory_steady_eq6. ",
       &loss_curve_defaults, cmd_loss_curve},
      {"rank",
       "One Hessian-rank estimation run; emits the loss series plus footer comments with "
       "base_loss, avg_loss, r_hat, r_rounded, settled. ",
       &rank_defaults, cmd_rank},
      {"rank-sweep",
       "Rank estimation across linear-net dimensions versus the polynomial-filter "
       "baseline, with normalized-RMSE summary rows. ",
       &rank_sweep_defaults, cmd_rank_sweep},
      {"saddle",
       "Closed-form and ensemble expected loss started at a saddle; footer reports the "
       "first negative crossing t_cross and the escape-time bound (\"none\" when the "
       "Hessian has no negative mode). ",
       &saddle_defaults, cmd_saddle},
      {"precond-compare",
       "Steady losses under the Frobenius-matched identity-like preconditioner, Σ^{-1/2}, "
       "and the maximal-loss choice Σ/‖Σ‖_F for sampled (or explicit) noise covariances. ",
       &precond_defaults, cmd_precond_compare},
      {"trace",
       "First-step stochastic Hessian-trace estimates against the exact trace for "
       "increasing probe counts. ",
       &trace_defaults, cmd_trace},
      {"instability-demo",
       "Rank estimation on an ill-conditioned quadratic: the identity preconditioner "
       "diverges, a Jacobi diagonal preconditioner settles. ",
       &instability_defaults, cmd_instability_demo},
  };

  std::vector<std::pair<const Command*, CommonFlags>> invocations;
  invocations.reserve(std::size(commands));
  for (const Command& command : commands) {
    invocations.emplace_back(&command, CommonFlags{});
  }
  for (auto& [command, flags] : invocations) {
    CLI::App* sub = app.add_subcommand(
        command->name, std::string(command->brief) + document_defaults(*command->defaults));
    sub->add_option("--config", flags.config_path, "JSON config file (keys listed above)");
    sub->add_option("--eta", flags.eta, "Override the stepsize");
    sub->add_option("--sigma2", flags.sigma2, "Override the noise power");
    sub->add_option("--seed", flags.seed, "Override the seed");
    sub->add_option("--out", flags.out_path, "Output CSV path (default: stdout)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (auto& [command, flags] : invocations) {
      if (app.get_subcommand(command->name)->parsed()) {
        const json cfg = resolve_config(*command->defaults, flags);
        return command->fn(cfg, flags.out_path);
      }
    }
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergedError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
