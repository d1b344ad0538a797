#include "teleop/predictor/arma.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kUnitRootTolerance = 1e-6;
// Shocks older than n samples weigh at most radius^n in the residual filter.
constexpr double kMaxMaRootRadius = 0.9;
constexpr std::size_t kColdFilterLength = 120;

bool solve_full_rank(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::VectorXd& beta) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < x.cols()) return false;
  beta = qr.solve(y);
  return beta.allFinite();
}

// Largest inverse root modulus of 1 - sum_a coef_a z^a.
double spectral_radius(const Eigen::VectorXd& coef) {
  const auto p = coef.size();
  if (p == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  companion.row(0) = coef.transpose();
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Pulls AR roots outside the unit disc back onto the unit circle, keeping
// their angles. Returns false when nothing needed clipping.
bool clip_explosive_roots(Eigen::VectorXd& phi) {
  const auto p = phi.size();
  if (p == 0 || spectral_radius(phi) <= 1.0 + kUnitRootTolerance) return false;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  companion.row(0) = phi.transpose();
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  // Monic polynomial z^p - phi_1 z^(p-1) - ... - phi_p from its roots.
  std::vector<std::complex<double>> poly = {1.0};
  for (Eigen::Index i = 0; i < p; ++i) {
    std::complex<double> root = es.eigenvalues()(i);
    if (std::abs(root) > 1.0) root /= std::abs(root);
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k];
      next[k + 1] -= root * poly[k];
    }
    poly = std::move(next);
  }
  for (Eigen::Index a = 1; a <= p; ++a) phi(a - 1) = -poly[a].real();
  return true;
}

bool ar_polynomial_stationary(const Eigen::VectorXd& phi) {
  return spectral_radius(phi) < 1.0 - kUnitRootTolerance;
}

// The residual recursion runs through the MA polynomial, so a root on or
// inside the unit circle makes the filtered shocks grow without bound.
bool ma_polynomial_invertible(const Eigen::VectorXd& theta) {
  return spectral_radius(-theta) < kMaxMaRootRadius;
}

// Residual proxies from a long autoregression with intercept. Entries before
// the AR order are zero.
std::vector<double> long_ar_residuals(std::span<const double> x, int order) {
  const int n = static_cast<int>(x.size());
  const int rows = n - order;
  Eigen::MatrixXd design(rows, order + 1);
  Eigen::VectorXd target(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = r + order;
    design(r, 0) = 1.0;
    for (int a = 1; a <= order; ++a) design(r, a) = x[t - a];
    target(r) = x[t];
  }
  const Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(target);
  const Eigen::VectorXd fitted = design * beta;
  std::vector<double> eps(n, 0.0);
  for (int r = 0; r < rows; ++r) eps[r + order] = target(r) - fitted(r);
  return eps;
}

ArmaAxis constant_axis(double level, ArmaOrders orders) {
  ArmaAxis axis;
  axis.c = level;
  axis.phi = Eigen::VectorXd::Zero(orders.p);
  axis.theta = Eigen::VectorXd::Zero(orders.q);
  axis.effective_q = 0;
  axis.constant = true;
  axis.stationary = true;
  axis.residuals.assign(orders.q, 0.0);
  return axis;
}

void finish_axis(ArmaAxis& axis, std::span<const double> x, ArmaOrders orders) {
  axis.stationary = ar_polynomial_stationary(axis.phi);
  const auto eps = one_step_residuals(axis, x);
  const std::size_t keep = std::min<std::size_t>(std::max(orders.q, 1), eps.size());
  axis.residuals.assign(eps.end() - static_cast<std::ptrdiff_t>(keep), eps.end());
}

// Joint regression of x_t on [1, x lags, residual-proxy lags].
bool fit_with_ma(std::span<const double> x, int p, int q, ArmaAxis& out) {
  const int n = static_cast<int>(x.size());
  const int long_order = std::clamp(2 * (p + q) + 2, p + q, std::max(p + q, n / 4));
  const auto proxy = long_ar_residuals(x, long_order);
  const int start = std::max(p, long_order + q);
  const int rows = n - start;
  const int cols = 1 + p + q;
  if (rows < cols) return false;
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd target(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = r + start;
    design(r, 0) = 1.0;
    for (int a = 1; a <= p; ++a) design(r, a) = x[t - a];
    for (int b = 1; b <= q; ++b) design(r, p + b) = proxy[t - b];
    target(r) = x[t];
  }
  Eigen::VectorXd beta;
  if (!solve_full_rank(design, target, beta)) return false;
  if (!ma_polynomial_invertible(beta.segment(1 + p, q))) return false;
  out.c = beta(0);
  out.phi = beta.segment(1, p);
  out.theta = beta.segment(1 + p, q);
  out.effective_q = q;
  return true;
}

// Pure AR fit. Falls back to a demeaned regression without intercept, then
// to the minimum-norm solution of that regression.
void fit_ar(std::span<const double> x, int p, ArmaAxis& out) {
  const int n = static_cast<int>(x.size());
  const int rows = n - p;
  Eigen::MatrixXd design(rows, 1 + p);
  Eigen::VectorXd target(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = r + p;
    design(r, 0) = 1.0;
    for (int a = 1; a <= p; ++a) design(r, a) = x[t - a];
    target(r) = x[t];
  }
  out.effective_q = 0;
  Eigen::VectorXd beta;
  if (solve_full_rank(design, target, beta)) {
    out.c = beta(0);
    out.phi = beta.tail(p);
    return;
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  Eigen::MatrixXd centered = design.rightCols(p).array() - mean;
  const Eigen::VectorXd centered_target = target.array() - mean;
  Eigen::VectorXd phi;
  if (!solve_full_rank(centered, centered_target, phi)) {
    phi = centered.completeOrthogonalDecomposition().solve(centered_target);
  }
  if (!phi.allFinite()) throw SingularRegression("AR regression has no finite solution");
  out.phi = phi;
  out.c = mean * (1.0 - phi.sum());
}

// Sum of squared one-step errors over the samples every order can predict.
double residual_ss(const ArmaAxis& axis, std::span<const double> x) {
  const auto eps = one_step_residuals(axis, x);
  const std::size_t from = static_cast<std::size_t>(std::max<Eigen::Index>(axis.phi.size(), 1));
  double ss = 0.0;
  for (std::size_t t = from; t < eps.size(); ++t) ss += eps[t] * eps[t];
  return ss;
}

double naive_residual_ss(std::span<const double> x, int p) {
  double ss = 0.0;
  for (std::size_t t = static_cast<std::size_t>(std::max(p, 1)); t < x.size(); ++t) {
    ss += (x[t] - x[t - 1]) * (x[t] - x[t - 1]);
  }
  return ss;
}

ArmaAxis last_value_axis(ArmaOrders orders) {
  ArmaAxis axis;
  axis.c = 0.0;
  axis.phi = Eigen::VectorXd::Zero(orders.p);
  axis.phi(0) = 1.0;
  axis.theta = Eigen::VectorXd::Zero(orders.q);
  axis.effective_q = 0;
  return axis;
}

void relevel_if_clipped(ArmaAxis& axis, std::span<const double> series) {
  if (!clip_explosive_roots(axis.phi)) return;
  // Re-level against the clipped AR part; the MA shocks average out.
  double level = 0.0;
  const std::size_t p = static_cast<std::size_t>(axis.phi.size());
  for (std::size_t t = p; t < series.size(); ++t) {
    double v = series[t];
    for (std::size_t a = 0; a < p; ++a) v -= axis.phi(a) * series[t - 1 - a];
    level += v;
  }
  axis.c = level / static_cast<double>(series.size() - p);
}

}  // namespace

double ArmaAxis::one_step(std::span<const double> lags, std::span<const double> shocks) const {
  if (constant) return c;
  double v = c;
  const std::size_t p = static_cast<std::size_t>(phi.size());
  for (std::size_t a = 0; a < p && a < lags.size(); ++a) v += phi(a) * lags[a];
  const std::size_t q = static_cast<std::size_t>(effective_q);
  for (std::size_t b = 0; b < q && b < shocks.size(); ++b) v += theta(b) * shocks[b];
  return v;
}

bool ArmaModel::stationary() const {
  return std::all_of(axes.begin(), axes.end(), [](const ArmaAxis& a) { return a.stationary; });
}

ArmaAxis fit_axis(std::span<const double> series, ArmaOrders orders) {
  if (orders.p < 0 || orders.q < 0 || orders.p + orders.q == 0) {
    throw ConfigError("ARMA orders must be non-negative and not both zero");
  }
  const std::size_t needed = 10 * static_cast<std::size_t>(orders.p + orders.q + 1);
  if (series.size() < needed) {
    throw NotEnoughData("ARMA(" + std::to_string(orders.p) + "," + std::to_string(orders.q) +
                        ") needs " + std::to_string(needed) + " samples, have " +
                        std::to_string(series.size()));
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / series.size();
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(mean))) return constant_axis(mean, orders);

  // Highest usable q first; a candidate must beat the last-value predictor
  // on its own filtered residuals, otherwise the next lower order is tried.
  const double naive = naive_residual_ss(series, orders.p);
  std::optional<ArmaAxis> best;
  double best_ss = 0.0;
  for (int q = orders.q; q >= 0; --q) {
    ArmaAxis axis;
    if (q > 0) {
      if (!fit_with_ma(series, orders.p, q, axis)) continue;
    } else {
      fit_ar(series, orders.p, axis);
    }
    axis.theta.conservativeResize(orders.q);
    axis.theta.tail(orders.q - q).setZero();
    relevel_if_clipped(axis, series);
    const double ss = residual_ss(axis, series);
    if (!best || ss < best_ss) {
      best = axis;
      best_ss = ss;
    }
    if (ss <= naive) break;
  }
  ArmaAxis axis = *best;
  if (best_ss > naive && orders.p > 0) axis = last_value_axis(orders);
  finish_axis(axis, series, orders);
  return axis;
}

ArmaModel fit(const HistoryBuffer& history, ArmaOrders orders) {
  const std::size_t needed = 10 * static_cast<std::size_t>(orders.p + orders.q + 1);
  if (history.size() < needed) {
    throw NotEnoughData("history holds " + std::to_string(history.size()) + " samples, need " +
                        std::to_string(needed));
  }
  ArmaModel model;
  model.orders = orders;
  model.sample_period_ms = to_ms(history.span()) / static_cast<double>(history.size() - 1);
  model.fitted_through = history.back().t;
  for (int i = 0; i < 7; ++i) {
    const auto series = history.axis(i);
    model.axes[i] = fit_axis(series, orders);
  }
  return model;
}

std::vector<double> one_step_residuals(const ArmaAxis& axis, std::span<const double> series) {
  const std::size_t n = series.size();
  const std::size_t p = static_cast<std::size_t>(axis.phi.size());
  const std::size_t q = static_cast<std::size_t>(axis.effective_q);
  std::vector<double> eps(n, 0.0);
  std::vector<double> lags(p), shocks(q);
  for (std::size_t t = p; t < n; ++t) {
    for (std::size_t a = 0; a < p; ++a) lags[a] = series[t - 1 - a];
    for (std::size_t b = 0; b < q; ++b) shocks[b] = t >= b + 1 ? eps[t - 1 - b] : 0.0;
    eps[t] = series[t] - axis.one_step(lags, shocks);
  }
  return eps;
}

namespace {

// Forecast path x_{n}, x_{n+1}, ..., x_{n+steps-1} beyond the series.
std::vector<double> forecast_path(const ArmaAxis& axis, std::span<const double> series,
                                  std::span<const double> shocks, int steps) {
  std::vector<double> path;
  path.reserve(steps);
  if (axis.constant) {
    path.assign(steps, axis.c);
    return path;
  }
  const std::size_t p = static_cast<std::size_t>(axis.phi.size());
  const std::size_t q = static_cast<std::size_t>(axis.effective_q);
  // Newest first.
  std::vector<double> lags(p, 0.0), eps(q, 0.0);
  for (std::size_t a = 0; a < p && a < series.size(); ++a) lags[a] = series[series.size() - 1 - a];
  for (std::size_t b = 0; b < q && b < shocks.size(); ++b) eps[b] = shocks[shocks.size() - 1 - b];
  for (int s = 0; s < steps; ++s) {
    const double next = axis.one_step(lags, eps);
    path.push_back(next);
    if (p > 0) {
      std::rotate(lags.rbegin(), lags.rbegin() + 1, lags.rend());
      lags[0] = next;
    }
    if (q > 0) {
      std::rotate(eps.rbegin(), eps.rbegin() + 1, eps.rend());
      eps[0] = 0.0;
    }
  }
  return path;
}

struct AxisTail {
  std::vector<double> values;  // oldest first
  std::vector<double> shocks;  // newest last
};

// Brings the model's residual state up to the newest history sample.
AxisTail catch_up(const ArmaModel& model, const HistoryBuffer& history, int axis_index) {
  const ArmaAxis& axis = model.axes[axis_index];
  const std::size_t n = history.size();
  const std::size_t p = static_cast<std::size_t>(axis.phi.size());
  const std::size_t q = static_cast<std::size_t>(axis.effective_q);

  std::size_t anchor = n;
  for (std::size_t i = n; i-- > 0;) {
    if (history[i].t == model.fitted_through) {
      anchor = i;
      break;
    }
    if (history[i].t < model.fitted_through) break;
  }

  AxisTail tail;
  if (anchor == n || anchor + 1 < p) {
    // Model is not anchored in this history: filter a recent stretch cold.
    const std::size_t begin = n > kColdFilterLength ? n - kColdFilterLength : 0;
    for (std::size_t i = begin; i < n; ++i) tail.values.push_back(history[i].value[axis_index]);
    tail.shocks = one_step_residuals(axis, tail.values);
    return tail;
  }

  const std::size_t begin = anchor + 1 >= p ? anchor + 1 - p : 0;
  for (std::size_t i = begin; i < n; ++i) tail.values.push_back(history[i].value[axis_index]);
  tail.shocks = axis.residuals;
  std::vector<double> lags(p), eps(q);
  for (std::size_t t = anchor + 1 - begin; t < tail.values.size(); ++t) {
    for (std::size_t a = 0; a < p; ++a) lags[a] = tail.values[t - 1 - a];
    const std::size_t m = tail.shocks.size();
    for (std::size_t b = 0; b < q; ++b) eps[b] = b < m ? tail.shocks[m - 1 - b] : 0.0;
    tail.shocks.push_back(tail.values[t] - axis.one_step(lags, eps));
  }
  return tail;
}

void check_horizon(double horizon_ms, double max_horizon_ms) {
  if (!(horizon_ms >= 0.0) || horizon_ms > max_horizon_ms) {
    throw HorizonOutOfRange("horizon " + std::to_string(horizon_ms) + " ms outside [0, " +
                            std::to_string(max_horizon_ms) + "]");
  }
}

struct StepSplit {
  int whole;
  double frac;
};

StepSplit split_horizon(double horizon_ms, double period_ms) {
  const double steps = horizon_ms / period_ms;
  const double rounded = std::round(steps);
  // The period comes from microsecond grid stamps, so allow for that jitter.
  if (std::abs(steps - rounded) < 1e-4) return {static_cast<int>(rounded), 0.0};
  const double whole = std::floor(steps);
  return {static_cast<int>(whole), steps - whole};
}

void forecast_vector(const ArmaModel& model, const HistoryBuffer& history,
                     const std::vector<double>& horizons_ms, std::vector<Vec7>& out) {
  int max_steps = 0;
  std::vector<StepSplit> splits;
  for (double h : horizons_ms) {
    splits.push_back(split_horizon(h, model.sample_period_ms));
    max_steps = std::max(max_steps, splits.back().whole + (splits.back().frac > 0.0 ? 1 : 0));
  }
  out.assign(horizons_ms.size(), history.back().value);
  if (max_steps == 0) return;
  for (int i = 0; i < 7; ++i) {
    const AxisTail tail = catch_up(model, history, i);
    const auto path = forecast_path(model.axes[i], tail.values, tail.shocks, max_steps);
    const double last = tail.values.back();
    auto at = [&](int k) { return k == 0 ? last : path[k - 1]; };
    for (std::size_t h = 0; h < splits.size(); ++h) {
      const auto [whole, frac] = splits[h];
      if (whole == 0 && frac == 0.0) continue;
      out[h][i] = frac == 0.0 ? at(whole) : (1.0 - frac) * at(whole) + frac * at(whole + 1);
    }
  }
  for (std::size_t h = 0; h < splits.size(); ++h) {
    if (splits[h].whole == 0 && splits[h].frac == 0.0) continue;
    renormalize_quaternion_block(out[h]);
  }
}

}  // namespace

double forecast_axis(const ArmaAxis& axis, std::span<const double> series,
                     std::span<const double> shocks, int steps) {
  if (steps <= 0) return series.back();
  return forecast_path(axis, series, shocks, steps).back();
}

Pose predict_recursive(const ArmaModel& model, const HistoryBuffer& history, double horizon_ms,
                       double max_horizon_ms) {
  check_horizon(horizon_ms, max_horizon_ms);
  if (history.empty()) throw NotEnoughData("empty history");
  if (horizon_ms == 0.0) return history.latest();
  std::vector<Vec7> out;
  forecast_vector(model, history, {horizon_ms}, out);
  return Pose::from_vector(out[0]);
}

DualPrediction dual_predict(const ArmaModel& model, const HistoryBuffer& history,
                            double control_horizon_ms, double visual_horizon_ms,
                            double max_horizon_ms) {
  check_horizon(control_horizon_ms, max_horizon_ms);
  check_horizon(visual_horizon_ms, max_horizon_ms);
  if (history.empty()) throw NotEnoughData("empty history");
  std::vector<Vec7> out;
  forecast_vector(model, history, {control_horizon_ms, visual_horizon_ms}, out);
  return {Pose::from_vector(out[0]), Pose::from_vector(out[1])};
}

DualPrediction dual_predict(const HistoryBuffer& history, double control_horizon_ms,
                            double visual_horizon_ms, ArmaOrders orders, double max_horizon_ms) {
  check_horizon(control_horizon_ms, max_horizon_ms);
  check_horizon(visual_horizon_ms, max_horizon_ms);
  const ArmaModel model = fit(history, orders);
  return dual_predict(model, history, control_horizon_ms, visual_horizon_ms, max_horizon_ms);
}

}  // namespace teleop
