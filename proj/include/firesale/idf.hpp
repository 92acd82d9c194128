#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "firesale/tensor.hpp"

namespace firesale {

enum class IdfKind { Linear, Exponential, Arctangent, LinearCross };

inline std::string_view to_string(IdfKind kind) {
  switch (kind) {
    case IdfKind::Linear: return "linear";
    case IdfKind::Exponential: return "exponential";
    case IdfKind::Arctangent: return "arctangent";
    case IdfKind::LinearCross: return "linear_cross";
  }
  return "unknown";
}

inline IdfKind parse_idf_kind(std::string_view name) {
  if (name == "linear") return IdfKind::Linear;
  if (name == "exponential") return IdfKind::Exponential;
  if (name == "arctangent") return IdfKind::Arctangent;
  if (name == "linear_cross") return IdfKind::LinearCross;
  throw std::invalid_argument("unknown inverse demand kind '" + std::string(name) + "'");
}

/// Ground-truth inverse demand function: aggregate per-asset liquidation
/// (asset units) to price.
///
///   Linear       p_m = base_m − c_m·ℓ_m
///   Exponential  p_m = base_m·exp(−c_m·ℓ_m)
///   Arctangent   p_m = base_m·(atan(−ℓ_m) + 2π)/(2π)
///   LinearCross  p   = base − D·ℓ
///
/// Liquidations are admissible on [0, max_liquidation], normally the total
/// supply of each asset.
class IdfSpec {
 public:
  static constexpr double kDefaultImpact = 0.15;

  static IdfSpec linear(std::vector<double> max_liquidation, std::vector<double> impact = {},
                        std::vector<double> base_price = {}) {
    return IdfSpec(IdfKind::Linear, std::move(max_liquidation), std::move(base_price),
                   std::move(impact), std::nullopt);
  }
  static IdfSpec exponential(std::vector<double> max_liquidation, std::vector<double> impact = {},
                             std::vector<double> base_price = {}) {
    return IdfSpec(IdfKind::Exponential, std::move(max_liquidation), std::move(base_price),
                   std::move(impact), std::nullopt);
  }
  static IdfSpec arctangent(std::vector<double> max_liquidation,
                            std::vector<double> base_price = {}) {
    return IdfSpec(IdfKind::Arctangent, std::move(max_liquidation), std::move(base_price), {},
                   std::nullopt);
  }
  static IdfSpec linear_cross(std::vector<double> max_liquidation, Tensor cross_impact,
                              std::vector<double> base_price = {}) {
    return IdfSpec(IdfKind::LinearCross, std::move(max_liquidation), std::move(base_price), {},
                   std::move(cross_impact));
  }

  IdfKind kind() const { return kind_; }
  std::size_t assets() const { return max_liquidation_.size(); }
  const std::vector<double>& base_price() const { return base_price_; }
  const std::vector<double>& impact() const { return impact_; }
  const std::vector<double>& max_liquidation() const { return max_liquidation_; }
  /// Impact matrix D; only present for LinearCross.
  const std::optional<Tensor>& cross_impact() const { return cross_impact_; }

  bool is_linear() const { return kind_ == IdfKind::Linear || kind_ == IdfKind::LinearCross; }

  /// Slope matrix D with p = base − D·ℓ for the two linear kinds.
  Tensor linear_impact_matrix() const {
    if (kind_ == IdfKind::LinearCross) return *cross_impact_;
    if (kind_ != IdfKind::Linear) throw std::logic_error("idf: not a linear inverse demand function");
    const std::size_t m = assets();
    Tensor d = Tensor::zeros({m, m});
    for (std::size_t i = 0; i < m; ++i) d.at(i, i) = impact_[i];
    return d;
  }

  std::vector<double> price(const std::vector<double>& ell) const {
    if (ell.size() != assets()) {
      throw ShapeError("idf: expected " + std::to_string(assets()) + " liquidations, got " +
                       std::to_string(ell.size()));
    }
    for (std::size_t m = 0; m < ell.size(); ++m) {
      const double slack = 1e-12 * std::max(1.0, max_liquidation_[m]);
      if (!(ell[m] >= -slack && ell[m] <= max_liquidation_[m] + slack)) {
        throw std::domain_error("idf: liquidation of asset " + std::to_string(m + 1) + " = " +
                                std::to_string(ell[m]) + " outside admissible range [0, " +
                                std::to_string(max_liquidation_[m]) + "]");
      }
    }
    return price_unchecked(ell);
  }

  Tensor price(const Tensor& ell) const { return Tensor::vector(price(ell.values())); }

  /// Evaluates the closed form without the admissible-range check.
  std::vector<double> price_unchecked(const std::vector<double>& ell) const {
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    const std::size_t n = assets();
    std::vector<double> p(n);
    switch (kind_) {
      case IdfKind::Linear:
        for (std::size_t m = 0; m < n; ++m) p[m] = base_price_[m] - impact_[m] * ell[m];
        break;
      case IdfKind::Exponential:
        for (std::size_t m = 0; m < n; ++m) p[m] = base_price_[m] * std::exp(-impact_[m] * ell[m]);
        break;
      case IdfKind::Arctangent:
        for (std::size_t m = 0; m < n; ++m) {
          p[m] = base_price_[m] * (std::atan(-ell[m]) + two_pi) / two_pi;
        }
        break;
      case IdfKind::LinearCross:
        for (std::size_t m = 0; m < n; ++m) {
          double v = base_price_[m];
          for (std::size_t k = 0; k < n; ++k) v -= cross_impact_->at(m, k) * ell[k];
          p[m] = v;
        }
        break;
    }
    return p;
  }

 private:
  IdfSpec(IdfKind kind, std::vector<double> max_liquidation, std::vector<double> base_price,
          std::vector<double> impact, std::optional<Tensor> cross_impact)
      : kind_(kind),
        max_liquidation_(std::move(max_liquidation)),
        base_price_(std::move(base_price)),
        impact_(std::move(impact)),
        cross_impact_(std::move(cross_impact)) {
    const std::size_t m = max_liquidation_.size();
    if (m == 0) throw std::invalid_argument("idf: at least one asset required");
    if (base_price_.empty()) base_price_.assign(m, 1.0);
    if ((kind_ == IdfKind::Linear || kind_ == IdfKind::Exponential) && impact_.empty()) {
      impact_.assign(m, kDefaultImpact);
    }
    validate();
  }

  void validate() const {
    const std::size_t m = assets();
    if (base_price_.size() != m) throw std::invalid_argument("idf: base_price needs one entry per asset");
    for (std::size_t i = 0; i < m; ++i) {
      if (!(base_price_[i] > 0.0)) throw std::invalid_argument("idf: base_price must be positive");
      if (!(max_liquidation_[i] > 0.0)) {
        throw std::invalid_argument("idf: admissible liquidation range must be positive");
      }
    }
    if (kind_ == IdfKind::Linear || kind_ == IdfKind::Exponential) {
      if (impact_.size() != m) throw std::invalid_argument("idf: impact needs one entry per asset");
      for (double c : impact_) {
        if (!(c >= 0.0)) throw std::invalid_argument("idf: impact must be non-negative");
      }
    }
    if (kind_ == IdfKind::LinearCross) {
      const Tensor& d = *cross_impact_;
      if (d.rank() != 2 || d.rows() != m || d.cols() != m) {
        throw std::invalid_argument("idf: cross_impact must be " + std::to_string(m) + "x" +
                                    std::to_string(m));
      }
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
          if (!(d.at(i, k) >= 0.0)) throw std::invalid_argument("idf: cross_impact entries must be non-negative");
          if (d.at(i, k) > d.at(i, i)) {
            throw std::invalid_argument("idf: cross_impact row " + std::to_string(i + 1) +
                                        " has an off-diagonal entry above its own impact");
          }
        }
      }
    }
    if (is_linear()) {
      // Linear prices are smallest at full liquidation of every asset.
      const auto floor = price_unchecked(max_liquidation_);
      for (std::size_t i = 0; i < m; ++i) {
        if (!(floor[i] > 0.0)) {
          throw std::invalid_argument("idf: price of asset " + std::to_string(i + 1) +
                                      " reaches zero inside the admissible liquidation range");
        }
      }
    }
  }

  IdfKind kind_;
  std::vector<double> max_liquidation_;
  std::vector<double> base_price_;
  std::vector<double> impact_;
  std::optional<Tensor> cross_impact_;
};

}  // namespace firesale
