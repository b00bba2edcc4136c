#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "fitters.hpp"
#include "normal.hpp"
#include "prediction_set.hpp"

namespace dcp {

using MeanFunction = std::function<double(const Eigen::VectorXd&)>;

// Gaussian band around the true regression function; the coverage target
// every data-driven method is judged against.
inline PredictionSet oracle_interval(const Eigen::VectorXd& x_new, const MeanFunction& mu,
                                     double sigma, double alpha) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("oracle_interval: sigma must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("oracle_interval: alpha must lie strictly in (0,1)");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double center = mu(x_new);
  return PredictionSet({Interval::closed(center - z * sigma, center + z * sigma)});
}

struct ParametricOptions {
  bool refit_center = false;  // center on the support-restricted LS fit
};

struct ParametricResult {
  PredictionSet set;
  std::vector<int> support;
  double leverage = 0.0;
  bool jittered = false;
  FittedModel selector;
};

// Textbook normal-theory band, honest only if the selected support were
// fixed in advance: center at the sparse fit, width from the Gaussian
// quantile inflated by the test point's leverage on the selected columns.
inline ParametricResult parametric_interval(const Dataset& data, const Eigen::VectorXd& x_new,
                                            double sigma, double alpha,
                                            const FitterSpec& selector_spec,
                                            const ParametricOptions& opts = {}) {
  data.validate();
  if (x_new.size() != data.p())
    throw std::invalid_argument("parametric_interval: test covariates have the wrong length");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("parametric_interval: sigma must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("parametric_interval: alpha must lie strictly in (0,1)");

  ParametricResult out;
  out.selector = fit_lasso(data, selector_spec);
  out.support = support_of(out.selector.coef);

  double center = out.selector.predict(x_new);
  if (!out.support.empty() &&
      static_cast<Eigen::Index>(out.support.size()) < data.n()) {
    const SupportFit ls(data.features, data.responses, out.support);
    out.leverage = ls.leverage(x_new);
    out.jittered = ls.model().jittered;
    if (opts.refit_center) center = ls.model().predict(x_new);
  }

  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = z * sigma * std::sqrt(1.0 + out.leverage);
  out.set = PredictionSet({Interval::closed(center - half, center + half)});
  return out;
}

}  // namespace dcp
