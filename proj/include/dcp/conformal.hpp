#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "fitters.hpp"
#include "grid.hpp"
#include "prediction_set.hpp"
#include "rng.hpp"

namespace dcp {

// Index (1-based) of the order statistic a conformal quantile takes from n
// scores at miscoverage alpha: ceil((1-alpha)(n+1)). Computed as
// (n+1) - floor(alpha*(n+1)) so one float rounding cannot bump the ceiling
// (alpha*(n+1) hitting an integer neighborhood is the common case, e.g.
// alpha = 0.1, n = 9).
inline std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("conformal rank: alpha must lie strictly in (0,1)");
  const double scaled = alpha * static_cast<double>(n + 1);
  const auto drop = static_cast<std::size_t>(std::floor(scaled));
  return n + 1 - std::min(drop, n);  // k >= 1 always: (1-alpha)(n+1) > 0
}

// k-th smallest of the score magnitudes, k = ceil((1-alpha)(n+1)); +inf when
// k exceeds n (the finite-sample correction runs off the sample).
inline double conformal_quantile(const std::vector<double>& scores, double alpha) {
  if (scores.empty())
    throw std::invalid_argument("conformal_quantile: needs at least one score");
  for (double s : scores)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("conformal_quantile: scores must be finite and nonnegative");
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) return kInf;
  std::vector<double> work(scores);
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
  return work[k - 1];
}

inline double conformal_quantile(const Eigen::VectorXd& scores, double alpha) {
  return conformal_quantile(std::vector<double>(scores.data(), scores.data() + scores.size()),
                            alpha);
}

enum class GridFitMode { kWarmSequential, kColdParallel };

struct ConformalConfig {
  double alpha = 0.1;
  FitterSpec fitter;
  Discretizer discretizer;
  GridFitMode fit_mode = GridFitMode::kWarmSequential;
  int threads = 1;

  ConformalConfig(double a, FitterSpec f, Discretizer d)
      : alpha(a), fitter(std::move(f)), discretizer(std::move(d)) {
    validate();
  }

  const Grid& grid() const { return discretizer.grid(); }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("conformal: alpha must lie strictly in (0,1)");
    fitter.validate();
    if (threads < 0) throw std::invalid_argument("conformal: threads must be nonnegative");
  }
};

// One model refit per candidate grid value: prediction at the test point and
// at every training row.
struct GridPointFit {
  double mu_new = 0.0;
  Eigen::VectorXd train_mu;
  bool converged = true;
  int iterations = 0;
};

struct GridFitResult {
  std::vector<GridPointFit> points;
  int fit_count = 0;
};

// Refit the model once per grid value with the candidate response appended
// as row n+1. Sequential mode walks the grid in ascending order reusing the
// previous solution as a warm start; parallel mode runs cold fits split
// across threads. Both orders give the same fits up to solver tolerance.
inline GridFitResult fit_over_grid(const Eigen::MatrixXd& x_train,
                                   const Eigen::VectorXd& y_train,
                                   const Eigen::VectorXd& x_new, const Grid& grid,
                                   const FitterSpec& fitter,
                                   GridFitMode mode = GridFitMode::kWarmSequential,
                                   int threads = 1) {
  const Eigen::Index n = x_train.rows();
  if (x_new.size() != x_train.cols())
    throw std::invalid_argument("fit_over_grid: test covariates have the wrong length");
  if (y_train.size() != n) throw std::invalid_argument("fit_over_grid: bad shapes");

  Eigen::MatrixXd x_aug(n + 1, x_train.cols());
  x_aug.topRows(n) = x_train;
  x_aug.row(n) = x_new.transpose();

  const FitFunction fit = make_fitter(fitter);
  const std::size_t m_count = grid.size();
  GridFitResult out;
  out.points.resize(m_count);
  out.fit_count = static_cast<int>(m_count);

  auto fit_one = [&](std::size_t m, Eigen::VectorXd& y_aug, const FittedModel* warm) {
    y_aug[n] = grid.point(m);
    FittedModel model = fit(x_aug, y_aug, warm);
    GridPointFit& slot = out.points[m];
    slot.train_mu = model.predict_rows(x_aug.topRows(n));
    slot.mu_new = model.predict(x_new);
    slot.converged = model.converged;
    slot.iterations = model.iterations;
    return model;
  };

  if (mode == GridFitMode::kWarmSequential) {
    Eigen::VectorXd y_aug(n + 1);
    y_aug.head(n) = y_train;
    FittedModel prev;
    for (std::size_t m = 0; m < m_count; ++m)
      prev = fit_one(m, y_aug, m == 0 ? nullptr : &prev);
    return out;
  }

  int t_count = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (t_count < 1) t_count = 1;
  t_count = std::min<int>(t_count, static_cast<int>(m_count));
  auto worker = [&](int t) {
    Eigen::VectorXd y_aug(n + 1);
    y_aug.head(n) = y_train;
    for (std::size_t m = static_cast<std::size_t>(t); m < m_count;
         m += static_cast<std::size_t>(t_count))
      fit_one(m, y_aug, nullptr);
  };
  if (t_count == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t_count));
    for (int t = 0; t < t_count; ++t) pool.emplace_back(worker, t);
    for (std::thread& th : pool) th.join();
  }
  return out;
}

// Grid-restricted conformal set: keep grid value y_m when its own augmented
// fit leaves |y_m - mu(x_new)| within the conformal quantile of the training
// residuals, then widen each kept value by the grid spacing on both sides
// (open ends). Fits see the raw responses; the grid only restricts the
// candidate values, so the result can be empty or undercover when the grid
// is too coarse.
inline PredictionSet approximate_conformal(const Dataset& data, const Eigen::VectorXd& x_new,
                                           const ConformalConfig& cfg) {
  data.validate();
  cfg.validate();
  const Grid& grid = cfg.grid();
  if (grid.size() < 2)
    throw std::invalid_argument("approximate_conformal: needs at least two grid points");
  const double delta = grid.spacing();

  const GridFitResult fits = fit_over_grid(data.features, data.responses, x_new, grid,
                                           cfg.fitter, cfg.fit_mode, cfg.threads);
  std::vector<Interval> kept;
  std::vector<double> scores(static_cast<std::size_t>(data.n()));
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const GridPointFit& f = fits.points[m];
    for (Eigen::Index i = 0; i < data.n(); ++i)
      scores[static_cast<std::size_t>(i)] = std::abs(data.responses[i] - f.train_mu[i]);
    const double q = conformal_quantile(scores, cfg.alpha);
    const double y_m = grid.point(m);
    if (std::abs(y_m - f.mu_new) <= q) kept.push_back(Interval::open(y_m - delta, y_m + delta));
  }
  return PredictionSet(std::move(kept), grid.reporting_window());
}

// Shared one-pass computation for the two discretized methods. Both reuse
// the same augmented fits on rounded responses; they differ only in which
// residuals feed the quantile and in how kept values map back to intervals.
struct DiscretizedRun {
  PredictionSet rounded_set;           // union of preimage cells
  PredictionSet modified_set;          // cells intersected with the residual band
  std::vector<int> rounded_kept;       // grid indices kept by the rounded rule
  std::vector<double> mu_new;          // per grid point, shared fits
  std::vector<double> q_rounded;
  std::vector<double> q_modified;
  Eigen::VectorXd rounded_responses;
  int fit_count = 0;
};

inline DiscretizedRun run_discretized(const Dataset& data, const Eigen::VectorXd& x_new,
                                      const ConformalConfig& cfg) {
  data.validate();
  cfg.validate();
  const Grid& grid = cfg.grid();
  const std::size_t m_count = grid.size();
  const auto n = data.n();

  DiscretizedRun run;
  Discretizer disc = cfg.discretizer;  // local copy so draws replay per call
  run.rounded_responses.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    run.rounded_responses[i] = disc.discretize(data.responses[i]);

  const GridFitResult fits = fit_over_grid(data.features, run.rounded_responses, x_new,
                                           grid, cfg.fitter, cfg.fit_mode, cfg.threads);
  run.fit_count = fits.fit_count;
  run.mu_new.resize(m_count);
  run.q_rounded.resize(m_count);
  run.q_modified.resize(m_count);

  std::vector<Interval> cells;
  std::vector<Interval> bands;
  std::vector<double> rounded_scores(static_cast<std::size_t>(n));
  std::vector<double> raw_scores(static_cast<std::size_t>(n));
  for (std::size_t m = 0; m < m_count; ++m) {
    const GridPointFit& f = fits.points[m];
    for (Eigen::Index i = 0; i < n; ++i) {
      rounded_scores[static_cast<std::size_t>(i)] =
          std::abs(run.rounded_responses[i] - f.train_mu[i]);
      raw_scores[static_cast<std::size_t>(i)] = std::abs(data.responses[i] - f.train_mu[i]);
    }
    const double q_r = conformal_quantile(rounded_scores, cfg.alpha);
    const double q_m = conformal_quantile(raw_scores, cfg.alpha);
    run.mu_new[m] = f.mu_new;
    run.q_rounded[m] = q_r;
    run.q_modified[m] = q_m;

    if (std::abs(grid.point(m) - f.mu_new) <= q_r) {
      run.rounded_kept.push_back(static_cast<int>(m));
      cells.push_back(grid.cell(m));
    }
    if (std::isfinite(q_m)) {
      const Interval band = Interval::closed(f.mu_new - q_m, f.mu_new + q_m);
      const Interval piece = intersect(grid.cell(m), band);
      if (!piece.empty()) bands.push_back(piece);
    } else {
      bands.push_back(grid.cell(m));
    }
  }
  const ClipWindow window = grid.reporting_window();
  run.rounded_set = PredictionSet(std::move(cells), window);
  run.modified_set = PredictionSet(std::move(bands), window);
  return run;
}

// Conformal set on rounded responses with rounded scores; the kept grid
// values come back as their full preimage cells.
inline PredictionSet cpdd(const Dataset& data, const Eigen::VectorXd& x_new,
                          const ConformalConfig& cfg) {
  return run_discretized(data, x_new, cfg).rounded_set;
}

// Same fits as cpdd, but scores keep the raw responses and each cell is cut
// down to the fitted value's residual band. Membership contract: y belongs
// to the set iff |y - mu_{d(y)}(x_new)| <= q_{d(y)}.
inline PredictionSet cpdm(const Dataset& data, const Eigen::VectorXd& x_new,
                          const ConformalConfig& cfg) {
  return run_discretized(data, x_new, cfg).modified_set;
}

// Classic sample-split baseline: fit on one half, take the conformal
// quantile of the holdout residuals, return a symmetric band around the
// fitted value.
inline PredictionSet split_conformal(const Dataset& data, const Eigen::VectorXd& x_new,
                                     double alpha, const FitterSpec& fitter,
                                     std::uint64_t seed) {
  data.validate();
  fitter.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("split_conformal: alpha must lie strictly in (0,1)");
  const Eigen::Index n = data.n();
  if (n < 2) throw std::invalid_argument("split_conformal: needs at least two rows");
  if (x_new.size() != data.p())
    throw std::invalid_argument("split_conformal: test covariates have the wrong length");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  StreamRng rng(seed, 0, "split-halves");
  deterministic_shuffle(order, rng);

  const Eigen::Index n_fit = n / 2;
  const Eigen::Index n_hold = n - n_fit;
  Eigen::MatrixXd x_fit(n_fit, data.p());
  Eigen::VectorXd y_fit(n_fit);
  Eigen::MatrixXd x_hold(n_hold, data.p());
  Eigen::VectorXd y_hold(n_hold);
  for (Eigen::Index i = 0; i < n_fit; ++i) {
    x_fit.row(i) = data.features.row(order[static_cast<std::size_t>(i)]);
    y_fit[i] = data.responses[order[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index i = 0; i < n_hold; ++i) {
    const Eigen::Index r = order[static_cast<std::size_t>(n_fit + i)];
    x_hold.row(i) = data.features.row(r);
    y_hold[i] = data.responses[r];
  }

  const FittedModel model = make_fitter(fitter)(x_fit, y_fit, nullptr);
  const Eigen::VectorXd hold_mu = model.predict_rows(x_hold);
  std::vector<double> scores(static_cast<std::size_t>(n_hold));
  for (Eigen::Index i = 0; i < n_hold; ++i)
    scores[static_cast<std::size_t>(i)] = std::abs(y_hold[i] - hold_mu[i]);
  const double q = conformal_quantile(scores, alpha);
  const double center = model.predict(x_new);
  if (!std::isfinite(q)) return PredictionSet({Interval{-kInf, kInf, true, true}});
  return PredictionSet({Interval::closed(center - q, center + q)});
}

}  // namespace dcp
