#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "firesale/contagion.hpp"
#include "firesale/dataset.hpp"
#include "firesale/idf.hpp"
#include "firesale/monotone_net.hpp"
#include "firesale/stats.hpp"
#include "firesale/training.hpp"

namespace firesale {

/// Anything that maps shocks to (ℓ̄, ℓ̂, p̂) and liquidations to prices the
/// way a DualModel does.
template <class P>
concept Predictor = requires(const P& p, const Tensor& t) {
  { p.forward(t, &t) } -> std::same_as<DualModel::Output>;
  { p.predict_prices(t) } -> std::convertible_to<Tensor>;
  { p.needs_true_liquidations() } -> std::convertible_to<bool>;
};

/// Stand-in model answering with the simulator's equilibrium and the true
/// inverse demand function. Evaluating it must give a perfect report.
class OraclePredictor {
 public:
  OraclePredictor(BankingSystem sys, IdfSpec spec) : sys_(std::move(sys)), spec_(std::move(spec)) {}

  bool needs_true_liquidations() const { return false; }

  DualModel::Output forward(const Tensor& shocks, const Tensor* = nullptr) const {
    const std::size_t rows = shocks.rows();
    const std::size_t n = sys_.banks();
    const std::size_t m = sys_.assets();
    DualModel::Output out{Tensor::zeros({rows, n * m}), Tensor::zeros({rows, m}), Tensor::zeros({rows, m})};
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = shocks.at(r, i);
      const auto rec = solve_equilibrium(sys_, s, spec_);
      for (std::size_t i = 0; i < n * m; ++i) out.ell_bar.at(r, i) = rec.ell_bank[i];
      for (std::size_t i = 0; i < m; ++i) {
        out.ell_hat.at(r, i) = rec.ell_agg[i];
        out.p_hat.at(r, i) = rec.p[i];
      }
    }
    return out;
  }

  Tensor predict_prices(const Tensor& ell) const {
    const std::size_t rows = ell.rows();
    const std::size_t m = sys_.assets();
    Tensor out = Tensor::zeros({rows, m});
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> l(m);
      for (std::size_t i = 0; i < m; ++i) l[i] = ell.at(r, i);
      const auto p = spec_.price_unchecked(l);
      for (std::size_t i = 0; i < m; ++i) out.at(r, i) = p[i];
    }
    return out;
  }

 private:
  BankingSystem sys_;
  IdfSpec spec_;
};

/// Predicted aggregate liquidation under the minimal (s = 0) and maximal
/// (s = 1) shocks. These are matched to 0 and the total supply, the two
/// liquidation levels known from balance sheets alone.
struct LiquidationAnchors {
  std::vector<double> pred_lo;
  std::vector<double> pred_hi;
  std::vector<double> ell_min;
  std::vector<double> ell_max;

  double to_true(std::size_t m, double ell_hat) const {
    return (ell_hat - pred_lo[m]) * (ell_max[m] - ell_min[m]) / (pred_hi[m] - pred_lo[m]) + ell_min[m];
  }
  double to_model(std::size_t m, double ell) const {
    return (ell - ell_min[m]) * (pred_hi[m] - pred_lo[m]) / (ell_max[m] - ell_min[m]) + pred_lo[m];
  }
};

template <Predictor P>
LiquidationAnchors liquidation_anchors(const P& model, const BankingSystem& sys, const IdfSpec& spec) {
  const std::size_t n = sys.banks();
  const std::size_t m = sys.assets();
  auto respond = [&](double level) {
    Tensor s = Tensor::full({1, n}, level);
    if (!model.needs_true_liquidations()) return model.forward(s, nullptr).ell_hat;
    const auto rec = solve_equilibrium(sys, std::vector<double>(n, level), spec);
    Tensor liq = Tensor::matrix(1, n * m, rec.ell_bank.values());
    return model.forward(s, &liq).ell_hat;
  };
  const Tensor lo = respond(0.0);
  const Tensor hi = respond(1.0);
  LiquidationAnchors a;
  a.pred_lo = lo.values();
  a.pred_hi = hi.values();
  a.ell_min.assign(m, 0.0);
  a.ell_max = sys.total_supply();
  for (std::size_t i = 0; i < m; ++i) {
    if (!(a.pred_hi[i] > a.pred_lo[i])) {
      throw DegenerateDataError("anchors: predicted liquidation of asset " + std::to_string(i + 1) +
                                " does not respond to the shock");
    }
  }
  return a;
}

struct CurveSample {
  std::size_t asset = 0;
  double ell = 0.0;      ///< true liquidation units
  double ell_hat = 0.0;  ///< the same point in the model's liquidation units
  double p_hat = 0.0;
  double p_true = 0.0;
};

/// Sweeps each asset's liquidation over `points` uniform values in
/// [0, total supply] with the other assets unliquidated, and pairs the Price
/// Net's answer with the true price. Grid points enter the Price Net through
/// the inverse of the anchor scaling.
template <Predictor P>
std::vector<CurveSample> reconstruct_idf(const P& model, const IdfSpec& spec, const LiquidationAnchors& anchors,
                                         std::size_t points = 201) {
  if (points < 2) throw std::invalid_argument("reconstruct_idf: need at least two grid points");
  const std::size_t m = spec.assets();
  std::vector<CurveSample> out;
  for (std::size_t a = 0; a < m; ++a) {
    Tensor hat = Tensor::zeros({points, m});
    std::vector<std::vector<double>> truth(points, std::vector<double>(m, 0.0));
    for (std::size_t k = 0; k < points; ++k) {
      const double ell = anchors.ell_min[a] + (anchors.ell_max[a] - anchors.ell_min[a]) *
                                                  static_cast<double>(k) / static_cast<double>(points - 1);
      truth[k][a] = ell;
      for (std::size_t j = 0; j < m; ++j) hat.at(k, j) = anchors.to_model(j, truth[k][j]);
    }
    const Tensor p = model.predict_prices(hat);
    for (std::size_t k = 0; k < points; ++k) {
      out.push_back({a, truth[k][a], hat.at(k, a), p.at(k, a), spec.price(truth[k])[a]});
    }
  }
  return out;
}

struct AssetReport {
  double mse = 0.0;
  std::optional<double> correlation;  ///< needs true liquidations in the data
  std::optional<double> scaled_mae;
  std::optional<double> scaled_max_error;
  double anchor_lo = 0.0;
  double anchor_hi = 0.0;
};

/// p̂ of one asset regressed on every asset's scaled liquidation plus an intercept.
struct RegressionBlock {
  std::size_t response_asset = 0;
  std::vector<std::string> regressors;
  RegressionResult result;
  std::optional<HypothesisTest> true_null;
  HypothesisTest zero_null;
};

struct EvalReport {
  std::string variant;
  std::size_t samples = 0;
  double mse_mean = 0.0;  ///< over every price entry
  double mse_sum = 0.0;   ///< sum of per-asset MSEs
  std::vector<AssetReport> assets;
  LiquidationAnchors anchors;
  std::optional<RegressionBlock> regression;
  std::vector<CurveSample> curve;
};

/// True coefficients of p_asset in (ℓ_1..ℓ_M, 1) when the inverse demand is linear.
inline std::optional<std::vector<double>> true_coefficients(const IdfSpec& spec, std::size_t asset) {
  if (!spec.is_linear()) return std::nullopt;
  const Tensor d = spec.linear_impact_matrix();
  std::vector<double> beta;
  for (std::size_t j = 0; j < spec.assets(); ++j) beta.push_back(-d.at(asset, j));
  beta.push_back(spec.base_price()[asset]);
  return beta;
}

inline RegressionBlock regress_price(const std::vector<double>& p_hat, const std::vector<std::vector<double>>& scaled,
                                     const IdfSpec& spec, std::size_t asset = 0) {
  const std::size_t rows = p_hat.size();
  const std::size_t m = scaled.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m + 1));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < m; ++j) x(ri, static_cast<Eigen::Index>(j)) = scaled[j][r];
    x(ri, static_cast<Eigen::Index>(m)) = 1.0;
  }
  RegressionBlock block;
  block.response_asset = asset;
  for (std::size_t j = 0; j < m; ++j) block.regressors.push_back("ell_star_" + std::to_string(j + 1));
  block.regressors.push_back("intercept");
  block.result = ols(p_hat, x);
  if (auto beta = true_coefficients(spec, asset)) block.true_null = t_test(block.result, *beta);
  block.zero_null = t_test(block.result, std::vector<double>(m + 1, 0.0));
  return block;
}

/// Every statistic for one model on held-out records.
template <Predictor P>
EvalReport evaluate(const P& model, const std::vector<EquilibriumRecord>& test, const BankingSystem& sys,
                    const IdfSpec& spec, std::string variant = {}, std::size_t curve_points = 201) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  const std::size_t m = sys.assets();
  const Batch batch = Batch::gather_all(test, model.needs_true_liquidations());
  const auto out = model.forward(batch.shocks, batch.true_liq ? &*batch.true_liq : nullptr);

  EvalReport rep;
  rep.variant = std::move(variant);
  rep.samples = test.size();
  rep.mse_mean = mse(out.p_hat, batch.prices);
  rep.anchors = liquidation_anchors(model, sys, spec);
  const bool have_truth = !test.front().ell_agg.empty();

  std::vector<std::vector<double>> scaled(m);
  for (std::size_t a = 0; a < m; ++a) {
    AssetReport ar;
    std::vector<double> hat(test.size()), truth, p_hat(test.size());
    double sq = 0.0;
    for (std::size_t r = 0; r < test.size(); ++r) {
      hat[r] = out.ell_hat.at(r, a);
      const double d = out.p_hat.at(r, a) - batch.prices.at(r, a);
      sq += d * d;
      if (have_truth) truth.push_back(test[r].ell_agg[a]);
    }
    ar.mse = sq / static_cast<double>(test.size());
    rep.mse_sum += ar.mse;
    ar.anchor_lo = rep.anchors.pred_lo[a];
    ar.anchor_hi = rep.anchors.pred_hi[a];
    scaled[a] = scale_liquidations(hat, rep.anchors.pred_lo[a], rep.anchors.pred_hi[a], rep.anchors.ell_min[a],
                                   rep.anchors.ell_max[a]);
    if (have_truth) {
      ar.correlation = pearson(hat, truth);
      double abs_sum = 0.0, worst = 0.0;
      for (std::size_t r = 0; r < truth.size(); ++r) {
        const double e = std::abs(scaled[a][r] - truth[r]);
        abs_sum += e;
        worst = std::max(worst, e);
      }
      ar.scaled_mae = abs_sum / static_cast<double>(truth.size());
      ar.scaled_max_error = worst;
    }
    rep.assets.push_back(ar);
  }

  if (m >= 2) {
    std::vector<double> p1(test.size());
    for (std::size_t r = 0; r < test.size(); ++r) p1[r] = out.p_hat.at(r, 0);
    rep.regression = regress_price(p1, scaled, spec, 0);
  }
  if (curve_points > 0) rep.curve = reconstruct_idf(model, spec, rep.anchors, curve_points);
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json to_json(const HypothesisTest& t) {
  return {{"null", t.nulls}, {"t", t.t_values}, {"p", t.p_values}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json assets = nlohmann::json::array();
  for (const auto& a : r.assets) {
    assets.push_back({{"mse", a.mse},
                      {"correlation", opt(a.correlation)},
                      {"scaled_mae", opt(a.scaled_mae)},
                      {"scaled_max_error", opt(a.scaled_max_error)},
                      {"anchor_lo", a.anchor_lo},
                      {"anchor_hi", a.anchor_hi}});
  }
  nlohmann::json j = {{"variant", r.variant},
                      {"samples", r.samples},
                      {"mse_mean", r.mse_mean},
                      {"mse_sum", r.mse_sum},
                      {"assets", assets},
                      {"anchors",
                       {{"pred_lo", r.anchors.pred_lo},
                        {"pred_hi", r.anchors.pred_hi},
                        {"ell_min", r.anchors.ell_min},
                        {"ell_max", r.anchors.ell_max}}}};
  if (r.regression) {
    const auto& g = *r.regression;
    j["regression"] = {{"response", "p_hat_" + std::to_string(g.response_asset + 1)},
                       {"regressors", g.regressors},
                       {"estimates", g.result.estimates},
                       {"standard_errors", g.result.standard_errors},
                       {"dof", g.result.dof},
                       {"true_null", g.true_null ? to_json(*g.true_null) : nlohmann::json(nullptr)},
                       {"zero_null", to_json(g.zero_null)}};
  } else {
    j["regression"] = nullptr;
  }
  double worst = 0.0;
  for (const auto& c : r.curve) worst = std::max(worst, std::abs(c.p_hat - c.p_true));
  j["curve_max_abs_error"] = r.curve.empty() ? nlohmann::json(nullptr) : nlohmann::json(worst);
  return j;
}

inline void write_curve_csv(std::ostream& os, const std::vector<CurveSample>& curve) {
  os << "asset,ell,ell_hat,p_hat,p_true\n";
  for (const auto& c : curve) {
    os << (c.asset + 1) << ',' << format_double(c.ell) << ',' << format_double(c.ell_hat) << ','
       << format_double(c.p_hat) << ',' << format_double(c.p_true) << '\n';
  }
}

/// One row per asset.
inline void write_asset_table_csv(std::ostream& os, const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  os << "variant,asset,mse,correlation,scaled_mae\n";
  for (std::size_t a = 0; a < r.assets.size(); ++a) {
    const auto& x = r.assets[a];
    os << r.variant << ',' << (a + 1) << ',' << format_double(x.mse) << ',' << opt(x.correlation) << ','
       << opt(x.scaled_mae) << '\n';
  }
}

inline void write_regression_csv(std::ostream& os, const RegressionBlock& g) {
  os << "regressor,estimate,std_error,true_null,t_true,p_true,t_zero,p_zero\n";
  for (std::size_t j = 0; j < g.regressors.size(); ++j) {
    os << g.regressors[j] << ',' << format_double(g.result.estimates[j]) << ','
       << format_double(g.result.standard_errors[j]) << ',';
    if (g.true_null) {
      os << format_double(g.true_null->nulls[j]) << ',' << format_double(g.true_null->t_values[j]) << ','
         << format_double(g.true_null->p_values[j]);
    } else {
      os << ",,";
    }
    os << ',' << format_double(g.zero_null.t_values[j]) << ',' << format_double(g.zero_null.p_values[j]) << '\n';
  }
}

}  // namespace firesale
