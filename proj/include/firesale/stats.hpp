#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

namespace firesale {

class DegenerateDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sample Pearson correlation.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series differ in length");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateDataError(sxx == 0.0 ? "pearson: first series has zero variance"
                                         : "pearson: second series has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Linear map taking pred_lo → ell_min and pred_hi → ell_max.
inline std::vector<double> scale_liquidations(const std::vector<double>& ell_pred, double pred_lo,
                                              double pred_hi, double ell_min, double ell_max) {
  if (!(pred_hi > pred_lo)) throw DegenerateDataError("scale_liquidations: predictions are constant");
  if (!(ell_max > ell_min)) throw std::invalid_argument("scale_liquidations: ell_max must exceed ell_min");
  const double gain = (ell_max - ell_min) / (pred_hi - pred_lo);
  std::vector<double> out(ell_pred.size());
  for (std::size_t i = 0; i < ell_pred.size(); ++i) out[i] = (ell_pred[i] - pred_lo) * gain + ell_min;
  return out;
}

/// Same map with the extrema taken from the series itself.
inline std::vector<double> scale_liquidations(const std::vector<double>& ell_pred, double ell_min,
                                              double ell_max) {
  if (ell_pred.empty()) throw std::invalid_argument("scale_liquidations: empty series");
  const auto [lo, hi] = std::minmax_element(ell_pred.begin(), ell_pred.end());
  return scale_liquidations(ell_pred, *lo, *hi, ell_min, ell_max);
}

struct RegressionResult {
  std::vector<double> estimates;
  std::vector<double> standard_errors;
  std::size_t dof = 0;
  double residual_variance = 0.0;
};

/// Ordinary least squares. `x` is samples × regressors and must already
/// contain the intercept column if one is wanted.
inline RegressionResult ols(const std::vector<double>& y, const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(x.cols());
  if (y.size() != n) throw std::invalid_argument("ols: response and design differ in rows");
  if (k == 0 || n < k + 1) throw std::invalid_argument("ols: need more samples than regressors");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const auto& r = qr.matrixR();
  const double largest = std::abs(r(0, 0));
  const double smallest = std::abs(r(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k - 1)));
  if (qr.rank() < static_cast<Eigen::Index>(k) || smallest <= largest * 1e-12) {
    throw DegenerateDataError("ols: design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(k) + ", |R| diagonal ratio " +
                              std::to_string(largest > 0.0 ? smallest / largest : 0.0) + ")");
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd beta = qr.solve(yv);
  const double rss = (yv - x * beta).squaredNorm();

  // (XᵀX)⁻¹ = P·R⁻¹·R⁻ᵀ·Pᵀ
  const auto ku = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd rinv = r.topLeftCorner(ku, ku).triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(ku, ku));
  const Eigen::MatrixXd inner = rinv * rinv.transpose();
  const Eigen::MatrixXd cov = qr.colsPermutation() * inner * qr.colsPermutation().transpose();

  RegressionResult out;
  out.dof = n - k;
  out.residual_variance = rss / static_cast<double>(out.dof);
  for (std::size_t j = 0; j < k; ++j) {
    const auto ji = static_cast<Eigen::Index>(j);
    out.estimates.push_back(beta(ji));
    out.standard_errors.push_back(std::sqrt(out.residual_variance * cov(ji, ji)));
  }
  return out;
}

/// P(|T| ≥ |t|) for Student's t with `dof` degrees of freedom, through the
/// regularized incomplete beta function I_{ν/(ν+t²)}(ν/2, 1/2).
inline double student_t_two_sided(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_two_sided: dof must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = dof / (dof + t * t);
  return std::clamp(boost::math::ibeta(0.5 * dof, 0.5, x), 0.0, 1.0);
}

struct HypothesisTest {
  std::vector<double> nulls;
  std::vector<double> t_values;
  std::vector<double> p_values;
};

/// t = (estimate − null) / se with a two-sided Student-t p-value.
inline HypothesisTest t_test(const RegressionResult& r, const std::vector<double>& nulls) {
  if (nulls.size() != r.estimates.size()) {
    throw std::invalid_argument("t_test: " + std::to_string(nulls.size()) + " nulls for " +
                                std::to_string(r.estimates.size()) + " coefficients");
  }
  HypothesisTest out;
  out.nulls = nulls;
  for (std::size_t j = 0; j < nulls.size(); ++j) {
    const double diff = r.estimates[j] - nulls[j];
    const double se = r.standard_errors[j];
    double t = 0.0;
    if (diff != 0.0) t = se > 0.0 ? diff / se : std::copysign(std::numeric_limits<double>::infinity(), diff);
    out.t_values.push_back(t);
    out.p_values.push_back(student_t_two_sided(t, static_cast<double>(r.dof)));
  }
  return out;
}

}  // namespace firesale
