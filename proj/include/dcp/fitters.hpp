#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"

namespace dcp {

enum class FitterKind { kLasso, kRidge, kLeastSquaresOnSupport, kConstantMean };

struct FitterSpec {
  FitterKind kind = FitterKind::kLasso;
  double lambda = 0.0;
  double tol = 1e-7;      // max absolute coefficient change per sweep
  int max_iter = 100000;  // full sweeps
  bool intercept = false;
  bool standardize = false;

  void validate() const {
    if (lambda < 0.0 || !std::isfinite(lambda))
      throw std::invalid_argument("fitter: lambda must be finite and nonnegative");
    if (!(tol > 0.0)) throw std::invalid_argument("fitter: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("fitter: max_iter must be at least 1");
  }
};

// Affine prediction rule x -> intercept + coef . x, plus fit diagnostics.
// Every fitter here is affine; constant-mean is intercept-only.
struct FittedModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  std::string fitter;
  bool converged = true;
  int iterations = 0;
  bool jittered = false;

  double predict(const Eigen::VectorXd& x) const {
    return intercept + (coef.size() > 0 ? coef.dot(x) : 0.0);
  }

  template <typename Derived>
  Eigen::VectorXd predict_rows(const Eigen::MatrixBase<Derived>& x) const {
    if (coef.size() == 0) return Eigen::VectorXd::Constant(x.rows(), intercept);
    return ((x * coef).array() + intercept).matrix();
  }
};

// Warm start is optional and only a hint: the result must not depend on it
// beyond solver tolerance.
using FitFunction = std::function<FittedModel(
    const Eigen::MatrixXd&, const Eigen::VectorXd&, const FittedModel*)>;

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

namespace detail {

// Cyclic coordinate descent on (1/2n)||y - Xb||^2 + lambda*|b|_1 with
// residuals maintained incrementally. Columns with zero norm stay at zero.
inline void lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& col_sq, double lambda, double tol,
                     int max_iter, Eigen::VectorXd& beta, bool& converged,
                     int& sweeps) {
  const auto n = static_cast<double>(x.rows());
  Eigen::VectorXd resid = y - x * beta;
  converged = false;
  sweeps = 0;
  while (sweeps < max_iter) {
    ++sweeps;
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double cj = col_sq[j];
      const double old = beta[j];
      if (cj == 0.0) {
        if (old != 0.0) {
          resid += x.col(j) * old;
          beta[j] = 0.0;
        }
        continue;
      }
      const double rho = x.col(j).dot(resid) / n + cj * old;
      const double next = soft_threshold(rho, lambda) / cj;
      if (next != old) {
        resid -= x.col(j) * (next - old);
        beta[j] = next;
        const double delta = std::abs(next - old);
        if (delta > max_delta) max_delta = delta;
      }
    }
    if (max_delta < tol) {
      converged = true;
      break;
    }
  }
}

}  // namespace detail

inline FittedModel fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const FitterSpec& spec, const FittedModel* warm = nullptr) {
  spec.validate();
  if (x.rows() < 1 || x.rows() != y.size())
    throw std::invalid_argument("fit_lasso: bad shapes");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(p);
  double y_mean = 0.0;
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);

  // Centering/scaling happen on copies; both default off, so the usual path
  // touches nothing.
  const Eigen::MatrixXd* xp = &x;
  const Eigen::VectorXd* yp = &y;
  Eigen::MatrixXd x_work;
  Eigen::VectorXd y_work;
  if (spec.intercept) {
    x_mean = x.colwise().mean();
    y_mean = y.mean();
    x_work = x.rowwise() - x_mean;
    y_work = y.array() - y_mean;
    xp = &x_work;
    yp = &y_work;
  }
  if (spec.standardize) {
    if (!spec.intercept) x_work = x;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double s = std::sqrt(x_work.col(j).squaredNorm() / static_cast<double>(n));
      if (s > 0.0) {
        scale[j] = s;
        x_work.col(j) /= s;
      }
    }
    xp = &x_work;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (warm && warm->coef.size() == p)
    beta = warm->coef.cwiseProduct(scale);  // back to the working scale

  const Eigen::VectorXd col_sq = xp->colwise().squaredNorm() / static_cast<double>(n);
  FittedModel model;
  model.fitter = "lasso";
  detail::lasso_cd(*xp, *yp, col_sq, spec.lambda, spec.tol, spec.max_iter, beta,
                   model.converged, model.iterations);

  model.coef = beta.cwiseQuotient(scale);
  model.intercept = spec.intercept ? y_mean - x_mean * model.coef : 0.0;
  return model;
}

inline FittedModel fit_lasso(const Dataset& data, const FitterSpec& spec,
                             const FittedModel* warm = nullptr) {
  return fit_lasso(data.features, data.responses, spec, warm);
}

inline FittedModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const FitterSpec& spec) {
  spec.validate();
  if (x.rows() < 1 || x.rows() != y.size())
    throw std::invalid_argument("fit_ridge: bad shapes");
  const auto n = static_cast<double>(x.rows());
  const Eigen::Index p = x.cols();

  FittedModel model;
  model.fitter = "ridge";
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += n * spec.lambda;
  const Eigen::VectorXd xty = x.transpose() * y;
  if (spec.lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible())
      throw std::runtime_error("fit_ridge: singular system at lambda = 0");
    model.coef = lu.solve(xty);
  } else {
    model.coef = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(xty);
  }
  model.iterations = 1;
  return model;
}

inline FittedModel fit_ridge(const Dataset& data, const FitterSpec& spec) {
  return fit_ridge(data.features, data.responses, spec);
}

inline FittedModel fit_constant_mean(const Eigen::VectorXd& y) {
  if (y.size() < 1) throw std::invalid_argument("fit_constant_mean: empty responses");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sum += y[i];
  FittedModel model;
  model.coef = Eigen::VectorXd();
  model.intercept = sum / static_cast<double>(y.size());
  model.fitter = "constant_mean";
  model.iterations = 1;
  return model;
}

// Least squares restricted to a column subset. Keeps the Gram factorization
// around for leverage values x_S' (X_S'X_S)^{-1} x_S.
class SupportFit {
 public:
  SupportFit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
             std::vector<int> support)
      : support_(std::move(support)), p_(x.cols()) {
    if (x.rows() < 1 || x.rows() != y.size())
      throw std::invalid_argument("support fit: bad shapes");
    for (int j : support_)
      if (j < 0 || j >= p_) throw std::invalid_argument("support fit: index out of range");
    std::sort(support_.begin(), support_.end());
    for (std::size_t a = 1; a < support_.size(); ++a)
      if (support_[a - 1] == support_[a])
        throw std::invalid_argument("support fit: indices must be distinct");
    if (static_cast<Eigen::Index>(support_.size()) >= x.rows())
      throw std::invalid_argument("support fit: support size must stay below n");

    model_.fitter = "ls_on_support";
    model_.coef = Eigen::VectorXd::Zero(p_);
    model_.iterations = 1;
    if (support_.empty()) return;

    const auto s = static_cast<Eigen::Index>(support_.size());
    Eigen::MatrixXd xs(x.rows(), s);
    for (Eigen::Index k = 0; k < s; ++k) xs.col(k) = x.col(support_[static_cast<std::size_t>(k)]);
    Eigen::MatrixXd gram = xs.transpose() * xs;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success) {
      // Collinear support: nudge the diagonal once and flag it.
      const double jitter = 1e-8 * gram.trace() / static_cast<double>(s);
      gram.diagonal().array() += jitter;
      llt_.compute(gram);
      model_.jittered = true;
      if (llt_.info() != Eigen::Success)
        throw std::runtime_error("support fit: Gram factorization failed");
    }
    const Eigen::VectorXd beta_s = llt_.solve(xs.transpose() * y);
    for (Eigen::Index k = 0; k < s; ++k)
      model_.coef[support_[static_cast<std::size_t>(k)]] = beta_s[k];
  }

  const FittedModel& model() const { return model_; }
  const std::vector<int>& support() const { return support_; }

  double leverage(const Eigen::VectorXd& x_new) const {
    if (x_new.size() != p_) throw std::invalid_argument("support fit: dimension mismatch");
    if (support_.empty()) return 0.0;
    Eigen::VectorXd xs(static_cast<Eigen::Index>(support_.size()));
    for (std::size_t k = 0; k < support_.size(); ++k)
      xs[static_cast<Eigen::Index>(k)] = x_new[support_[k]];
    return xs.dot(llt_.solve(xs));
  }

 private:
  std::vector<int> support_;
  Eigen::Index p_ = 0;
  FittedModel model_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline SupportFit fit_ls_on_support(const Dataset& data, std::vector<int> support) {
  return SupportFit(data.features, data.responses, std::move(support));
}

inline std::vector<int> support_of(const Eigen::VectorXd& beta) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) s.push_back(static_cast<int>(j));
  return s;
}

// Largest stationarity violation of the Lasso objective: |grad_j| must equal
// lambda on the support and stay below it off the support.
inline double lasso_kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& beta, double lambda) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd grad = x.transpose() * (y - x * beta) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    double v = 0.0;
    if (beta[j] > 0.0)
      v = std::abs(grad[j] - lambda);
    else if (beta[j] < 0.0)
      v = std::abs(grad[j] + lambda);
    else
      v = std::max(0.0, std::abs(grad[j]) - lambda);
    if (v > worst) worst = v;
  }
  return worst;
}

// Grid-capable fitters behind one callable; least squares on a support needs
// an explicit support and is not usable here.
inline FitFunction make_fitter(const FitterSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case FitterKind::kLasso:
      return [spec](const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const FittedModel* warm) { return fit_lasso(x, y, spec, warm); };
    case FitterKind::kRidge:
      return [spec](const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const FittedModel*) { return fit_ridge(x, y, spec); };
    case FitterKind::kConstantMean:
      return [](const Eigen::MatrixXd&, const Eigen::VectorXd& y,
                const FittedModel*) { return fit_constant_mean(y); };
    case FitterKind::kLeastSquaresOnSupport:
      throw std::invalid_argument("make_fitter: support fitter needs an explicit support");
  }
  throw std::invalid_argument("make_fitter: unknown fitter kind");
}

}  // namespace dcp
