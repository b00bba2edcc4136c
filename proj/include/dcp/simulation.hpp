#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "baselines.hpp"
#include "conformal.hpp"
#include "dataset.hpp"
#include "fitters.hpp"
#include "grid.hpp"
#include "prediction_set.hpp"
#include "rng.hpp"

namespace dcp {

enum class Method { kOracle, kParametric, kApproximate, kCpdd, kCpdm, kSplit };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m = {Method::kOracle,      Method::kParametric,
                                        Method::kApproximate, Method::kCpdd,
                                        Method::kCpdm,        Method::kSplit};
  return m;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kOracle: return "oracle";
    case Method::kParametric: return "parametric";
    case Method::kApproximate: return "approximate";
    case Method::kCpdd: return "cpdd";
    case Method::kCpdm: return "cpdm";
    case Method::kSplit: return "split";
  }
  throw std::invalid_argument("method_name: unknown method");
}

inline Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (method_name(m) == name) return m;
  throw std::invalid_argument("unknown method: " + name);
}

inline bool uses_grid(Method m) {
  return m == Method::kApproximate || m == Method::kCpdd || m == Method::kCpdm;
}

// Sparse additive signal over the first ten coordinates; odd in each of
// them, so the population mean response is zero.
inline double true_mean(const Eigen::VectorXd& x) {
  if (x.size() < 10) throw std::invalid_argument("true_mean: needs at least 10 covariates");
  double s = 0.0;
  for (int j = 0; j < 10; ++j)
    s += x[j] + (x[j] > 0.0 ? 1.0 : (x[j] < 0.0 ? -1.0 : 0.0)) * std::sqrt(std::abs(x[j]));
  return s / std::sqrt(10.0);
}

// Penalty level sigma * sqrt(log(p) / (2n)) used for every Lasso fit in the
// harness.
inline double lasso_penalty(double sigma, int p, int n) {
  if (p < 2 || n < 1) throw std::invalid_argument("lasso_penalty: need p >= 2 and n >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("lasso_penalty: sigma must be positive");
  return sigma * std::sqrt(std::log(static_cast<double>(p)) / (2.0 * n));
}

struct ExperimentConfig {
  int n = 100;
  int p = 200;
  double sigma = 1.0;
  double alpha = 0.1;
  std::vector<int> grid_sizes = {5, 10, 20, 40, 80, 160};
  std::vector<Method> methods = {Method::kOracle, Method::kParametric, Method::kApproximate,
                                 Method::kCpdd, Method::kCpdm};
  int trials = 1000;
  std::uint64_t seed = 1;
  int threads = 1;  // 0 picks the hardware thread count
  RoundingMode rounding = RoundingMode::kNearest;
  bool warm_start = true;
  double lasso_tol = 1e-7;
  int lasso_max_iter = 100000;
  bool measure_time = true;

  void validate() const {
    if (n < 2) throw std::invalid_argument("config: n must be at least 2");
    if (p < 10) throw std::invalid_argument("config: the signal needs p >= 10");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("config: sigma must be positive and finite");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("config: alpha must lie strictly in (0,1)");
    if (trials < 1) throw std::invalid_argument("config: trials must be at least 1");
    if (grid_sizes.empty()) throw std::invalid_argument("config: need at least one grid size");
    for (int m : grid_sizes)
      if (m < 1) throw std::invalid_argument("config: grid sizes must be positive");
    if (methods.empty()) throw std::invalid_argument("config: need at least one method");
    if (threads < 0) throw std::invalid_argument("config: threads must be nonnegative");
  }
};

struct Trial {
  Dataset train;
  Eigen::VectorXd x_new;
  double y_new = 0.0;
};

// Draws are keyed by (seed, trial index, purpose), so any trial can be
// regenerated in isolation and the schedule of trials across threads cannot
// change the data.
inline Trial generate_trial(const ExperimentConfig& cfg, std::uint64_t trial_index) {
  cfg.validate();
  StreamRng x_rng(cfg.seed, trial_index, "features");
  StreamRng e_rng(cfg.seed, trial_index, "noise");

  Trial t;
  Eigen::MatrixXd x(cfg.n + 1, cfg.p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = x_rng.normal();
  Eigen::VectorXd y(cfg.n + 1);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y[i] = true_mean(x.row(i).transpose()) + cfg.sigma * e_rng.normal();

  t.train = Dataset(x.topRows(cfg.n), y.head(cfg.n));
  t.x_new = x.row(cfg.n).transpose();
  t.y_new = y[cfg.n];
  return t;
}

struct GridSetup {
  Grid grid;
  Discretizer discretizer;
  bool degenerate_range = false;
};

// Grid spanning the observed response range. A degenerate sample (all
// responses equal) falls back to a unit window around the common value.
inline GridSetup data_range_grid(const Eigen::VectorXd& responses, int m_points,
                                 RoundingMode mode, std::uint64_t seed) {
  if (responses.size() < 1)
    throw std::invalid_argument("data_range_grid: needs at least one response");
  double lo = responses.minCoeff();
  double hi = responses.maxCoeff();
  bool degenerate = false;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
    degenerate = true;
  }
  Grid grid = make_grid(lo, hi, m_points);
  Discretizer disc(grid, mode, seed);
  return GridSetup{std::move(grid), std::move(disc), degenerate};
}

struct TrialRecord {
  Method method = Method::kOracle;
  int grid_size = 0;
  int trial = 0;
  bool covered = false;
  double length = 0.0;
  bool clipped = false;
  int fit_count = 0;
  double wall_time_s = 0.0;
  std::string failure;  // empty on success, reason code otherwise
};

struct SummaryRow {
  Method method = Method::kOracle;
  int grid_size = 0;
  int trials_used = 0;
  int failures = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_length = 0.0;
  double length_se = 0.0;
  double clipped_fraction = 0.0;
  double mean_fit_count = 0.0;
  double wall_time_s = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;  // sorted by (method, grid size, trial)
  std::vector<SummaryRow> summary;   // one row per requested (method, grid size)
  int failed_records = 0;
};

namespace detail {

class StopWatch {
 public:
  explicit StopWatch(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = std::chrono::steady_clock::now();
  }
  double seconds() const {
    if (!enabled_) return 0.0;
    const auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double>(d).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

inline double sample_se(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

// Coverage and length are taken on the smallest interval containing the
// prediction set, which is what the harness reports and compares.
inline void record_set(TrialRecord& rec, const PredictionSet& set, double y_new) {
  const PredictionSet h = set.hull();
  rec.covered = h.contains(y_new);
  rec.length = h.length();
  rec.clipped = h.clipped();
}

}  // namespace detail

// One record per requested (method, grid size, trial). Methods that ignore
// the grid carry the same result across grid sizes so every summary cell has
// the full trial count.
inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, int trial_index) {
  const Trial t = generate_trial(cfg, static_cast<std::uint64_t>(trial_index));
  const double lambda = lasso_penalty(cfg.sigma, cfg.p, cfg.n);
  FitterSpec lasso;
  lasso.kind = FitterKind::kLasso;
  lasso.lambda = lambda;
  lasso.tol = cfg.lasso_tol;
  lasso.max_iter = cfg.lasso_max_iter;

  const auto has = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };

  std::vector<TrialRecord> out;
  auto emit = [&](Method m, int grid_size, const TrialRecord& base) {
    TrialRecord rec = base;
    rec.method = m;
    rec.grid_size = grid_size;
    rec.trial = trial_index;
    out.push_back(std::move(rec));
  };

  // Grid-free methods are computed once and replicated across grid sizes.
  TrialRecord oracle_rec, param_rec, split_rec;
  if (has(Method::kOracle)) {
    detail::StopWatch w(cfg.measure_time);
    try {
      const PredictionSet set = oracle_interval(t.x_new, true_mean, cfg.sigma, cfg.alpha);
      detail::record_set(oracle_rec, set, t.y_new);
      oracle_rec.fit_count = 0;
    } catch (const std::exception& e) {
      oracle_rec.failure = e.what();
    }
    oracle_rec.wall_time_s = w.seconds();
  }
  if (has(Method::kParametric)) {
    detail::StopWatch w(cfg.measure_time);
    try {
      const ParametricResult res =
          parametric_interval(t.train, t.x_new, cfg.sigma, cfg.alpha, lasso);
      detail::record_set(param_rec, res.set, t.y_new);
      param_rec.fit_count = 1;
    } catch (const std::exception& e) {
      param_rec.failure = e.what();
    }
    param_rec.wall_time_s = w.seconds();
  }
  if (has(Method::kSplit)) {
    detail::StopWatch w(cfg.measure_time);
    try {
      const std::uint64_t split_seed =
          mix_keys(cfg.seed, static_cast<std::uint64_t>(trial_index), hash_tag("split"));
      const PredictionSet set =
          split_conformal(t.train, t.x_new, cfg.alpha, lasso, split_seed);
      detail::record_set(split_rec, set, t.y_new);
      split_rec.fit_count = 1;
    } catch (const std::exception& e) {
      split_rec.failure = e.what();
    }
    split_rec.wall_time_s = w.seconds();
  }

  for (int m_points : cfg.grid_sizes) {
    if (has(Method::kOracle)) emit(Method::kOracle, m_points, oracle_rec);
    if (has(Method::kParametric)) emit(Method::kParametric, m_points, param_rec);

    const bool want_dd = has(Method::kCpdd);
    const bool want_dm = has(Method::kCpdm);
    if (has(Method::kApproximate)) {
      TrialRecord rec;
      detail::StopWatch w(cfg.measure_time);
      try {
        const GridSetup gs = data_range_grid(
            t.train.responses, m_points, cfg.rounding,
            mix_keys(cfg.seed, static_cast<std::uint64_t>(trial_index), hash_tag("grid"),
                     static_cast<std::uint64_t>(m_points)));
        ConformalConfig cc(cfg.alpha, lasso, gs.discretizer);
        cc.fit_mode = cfg.warm_start ? GridFitMode::kWarmSequential : GridFitMode::kColdParallel;
        const PredictionSet set = approximate_conformal(t.train, t.x_new, cc);
        detail::record_set(rec, set, t.y_new);
        rec.fit_count = static_cast<int>(m_points);
      } catch (const std::exception& e) {
        rec.failure = e.what();
      }
      rec.wall_time_s = w.seconds();
      emit(Method::kApproximate, m_points, rec);
    }
    if (want_dd || want_dm) {
      TrialRecord dd, dm;
      detail::StopWatch w(cfg.measure_time);
      try {
        const GridSetup gs = data_range_grid(
            t.train.responses, m_points, cfg.rounding,
            mix_keys(cfg.seed, static_cast<std::uint64_t>(trial_index), hash_tag("grid"),
                     static_cast<std::uint64_t>(m_points)));
        ConformalConfig cc(cfg.alpha, lasso, gs.discretizer);
        cc.fit_mode = cfg.warm_start ? GridFitMode::kWarmSequential : GridFitMode::kColdParallel;
        const DiscretizedRun run = run_discretized(t.train, t.x_new, cc);
        detail::record_set(dd, run.rounded_set, t.y_new);
        detail::record_set(dm, run.modified_set, t.y_new);
        dd.fit_count = run.fit_count;
        dm.fit_count = run.fit_count;
      } catch (const std::exception& e) {
        dd.failure = e.what();
        dm.failure = e.what();
      }
      // The two methods share one pass of fits; either alone would pay for
      // it, so the elapsed time goes on both records.
      const double secs = w.seconds();
      dd.wall_time_s = secs;
      dm.wall_time_s = secs;
      if (want_dd) emit(Method::kCpdd, m_points, dd);
      if (want_dm) emit(Method::kCpdm, m_points, dm);
    }
    if (has(Method::kSplit)) emit(Method::kSplit, m_points, split_rec);
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  int t_count = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  if (t_count < 1) t_count = 1;
  t_count = std::min(t_count, cfg.trials);

  std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(cfg.trials));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int trial = next.fetch_add(1);
      if (trial >= cfg.trials) break;
      per_trial[static_cast<std::size_t>(trial)] = run_trial(cfg, trial);
    }
  };
  if (t_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t_count));
    for (int t = 0; t < t_count; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  ExperimentResult result;
  for (std::vector<TrialRecord>& batch : per_trial)
    for (TrialRecord& rec : batch) result.records.push_back(std::move(rec));
  std::sort(result.records.begin(), result.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              if (a.method != b.method) return a.method < b.method;
              if (a.grid_size != b.grid_size) return a.grid_size < b.grid_size;
              return a.trial < b.trial;
            });

  for (Method m : all_methods()) {
    if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) continue;
    for (int g : cfg.grid_sizes) {
      SummaryRow row;
      row.method = m;
      row.grid_size = g;
      std::vector<double> covered, lengths;
      double clipped = 0.0, fits = 0.0, secs = 0.0;
      for (const TrialRecord& rec : result.records) {
        if (rec.method != m || rec.grid_size != g) continue;
        if (!rec.failure.empty()) {
          ++row.failures;
          continue;
        }
        covered.push_back(rec.covered ? 1.0 : 0.0);
        lengths.push_back(rec.length);
        clipped += rec.clipped ? 1.0 : 0.0;
        fits += rec.fit_count;
        secs += rec.wall_time_s;
      }
      row.trials_used = static_cast<int>(covered.size());
      result.failed_records += row.failures;
      if (row.trials_used > 0) {
        const auto used = static_cast<double>(row.trials_used);
        for (double c : covered) row.coverage += c;
        row.coverage /= used;
        for (double l : lengths) row.mean_length += l;
        row.mean_length /= used;
        row.coverage_se = detail::sample_se(covered, row.coverage);
        row.length_se = detail::sample_se(lengths, row.mean_length);
        row.clipped_fraction = clipped / used;
        row.mean_fit_count = fits / used;
        row.wall_time_s = secs;
      }
      result.summary.push_back(row);
    }
  }
  return result;
}

}  // namespace dcp
