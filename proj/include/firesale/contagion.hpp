#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "firesale/idf.hpp"
#include "firesale/random.hpp"
#include "firesale/tensor.hpp"

namespace firesale {

/// Static balance sheets of the banking system.
struct BankingSystem {
  Tensor holdings;                    ///< N×M, units of asset m held by bank n
  std::vector<double> liability_low;  ///< liabilities under zero shock
  std::vector<double> liability_high; ///< liabilities under maximal shock
  double capital_threshold = 0.6;
  double leverage_sensitivity = 0.1;

  /// Same liability range for every bank.
  static BankingSystem with_uniform_liabilities(Tensor holdings, double low, double high,
                                                double threshold = 0.6, double sensitivity = 0.1) {
    const std::size_t n = holdings.rows();
    BankingSystem sys{std::move(holdings), std::vector<double>(n, low),
                      std::vector<double>(n, high), threshold, sensitivity};
    sys.validate();
    return sys;
  }

  std::size_t banks() const { return holdings.rows(); }
  std::size_t assets() const { return holdings.cols(); }

  std::vector<double> total_supply() const {
    std::vector<double> supply(assets(), 0.0);
    for (std::size_t m = 0; m < assets(); ++m) {
      for (std::size_t n = 0; n < banks(); ++n) supply[m] += holdings.at(n, m);
    }
    return supply;
  }

  void validate() const {
    if (holdings.rank() != 2 || banks() == 0 || assets() == 0) {
      throw std::invalid_argument("banking system: holdings must be a non-empty N×M matrix");
    }
    for (double v : holdings.values()) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("banking system: holdings must be finite and non-negative");
      }
    }
    for (double s : total_supply()) {
      if (!(s > 0.0)) throw std::invalid_argument("banking system: every asset needs positive total supply");
    }
    if (liability_low.size() != banks() || liability_high.size() != banks()) {
      throw std::invalid_argument("banking system: liability range needs one entry per bank");
    }
    for (std::size_t n = 0; n < banks(); ++n) {
      if (!(liability_low[n] < liability_high[n])) {
        throw std::invalid_argument("banking system: liability_low must be below liability_high");
      }
      if (!(capital_threshold <= liability_low[n])) {
        throw std::invalid_argument("banking system: capital_threshold must not exceed liability_low");
      }
    }
    if (!(leverage_sensitivity > 0.0)) {
      throw std::invalid_argument("banking system: leverage_sensitivity must be positive");
    }
  }
};

/// One simulated sample. gamma and ell_bank are empty when the record was
/// read from a dataset that only carries the observable columns.
struct EquilibriumRecord {
  std::vector<double> s;        ///< shock per bank, in [0, 1]
  std::vector<double> gamma;    ///< liquidated fraction per bank
  Tensor ell_bank;              ///< N×M fraction of each holding liquidated
  std::vector<double> ell_agg;  ///< aggregate units liquidated per asset
  std::vector<double> p;        ///< equilibrium price per asset
  std::size_t iterations = 0;

  bool has_liquidations() const { return !gamma.empty(); }
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> last_iterate, double residual)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> last_iterate_;
  double residual_;
};

struct SolverOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 10000;
  /// Start from Φ(0) instead of 0; the least fixed point is the same.
  bool start_from_first_image = false;
  /// Receives every iterate, starting with the initial point.
  std::function<void(const std::vector<double>&)> observer;
};

inline void validate_shock(const BankingSystem& sys, const std::vector<double>& s) {
  if (s.size() != sys.banks()) {
    throw ShapeError("shock: expected " + std::to_string(sys.banks()) + " entries, got " +
                     std::to_string(s.size()));
  }
  for (double v : s) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("shock: intensities must lie in [0, 1]");
  }
}

/// L_n = low_n + s_n·(high_n − low_n)
inline std::vector<double> liabilities(const BankingSystem& sys, const std::vector<double>& s) {
  validate_shock(sys, s);
  std::vector<double> out(sys.banks());
  for (std::size_t n = 0; n < sys.banks(); ++n) {
    out[n] = sys.liability_low[n] + s[n] * (sys.liability_high[n] - sys.liability_low[n]);
  }
  return out;
}

/// ℓ_m = Σ_n a[n][m]·γ_n under proportional liquidation.
inline std::vector<double> aggregate_proportional(const BankingSystem& sys,
                                                  const std::vector<double>& gamma) {
  std::vector<double> ell(sys.assets(), 0.0);
  for (std::size_t m = 0; m < sys.assets(); ++m) {
    for (std::size_t n = 0; n < sys.banks(); ++n) ell[m] += sys.holdings.at(n, m) * gamma[n];
  }
  return ell;
}

/// One application of the liquidation map
///   Φ(γ)_n = clamp((L_n − θ) / (κ·V_n(p(γ))), 0, 1),  V_n(p) = Σ_m a[n][m]·p_m.
inline std::vector<double> liquidation_map(const BankingSystem& sys, const IdfSpec& spec,
                                           const std::vector<double>& liab,
                                           const std::vector<double>& gamma) {
  const auto p = spec.price(aggregate_proportional(sys, gamma));
  std::vector<double> next(sys.banks());
  for (std::size_t n = 0; n < sys.banks(); ++n) {
    const double shortfall = liab[n] - sys.capital_threshold;
    if (shortfall <= 0.0) {
      next[n] = 0.0;
      continue;
    }
    double value = 0.0;
    for (std::size_t m = 0; m < sys.assets(); ++m) value += sys.holdings.at(n, m) * p[m];
    const double capacity = sys.leverage_sensitivity * value;
    next[n] = capacity > 0.0 ? std::clamp(shortfall / capacity, 0.0, 1.0) : 1.0;
  }
  return next;
}

/// Largest leverage sensitivity κ for which every bank is fully liquidated
/// under the maximal shock: κ = min_n (high_n − θ) / V_n(p(total supply)).
/// Any larger κ leaves some bank short of full liquidation at s = 1; a
/// smaller one saturates liquidation before the maximal shock.
inline double full_liquidation_sensitivity(const BankingSystem& sys, const IdfSpec& spec) {
  if (spec.assets() != sys.assets()) throw ShapeError("full_liquidation_sensitivity: asset count mismatch");
  const auto p = spec.price(sys.total_supply());
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < sys.banks(); ++n) {
    double value = 0.0;
    for (std::size_t m = 0; m < sys.assets(); ++m) value += sys.holdings.at(n, m) * p[m];
    const double shortfall = sys.liability_high[n] - sys.capital_threshold;
    if (value > 0.0 && shortfall > 0.0) kappa = std::min(kappa, shortfall / value);
  }
  if (!std::isfinite(kappa)) {
    throw std::invalid_argument("full_liquidation_sensitivity: no bank has a shortfall at maximal shock");
  }
  return kappa;
}

/// Least fixed point of the liquidation map by Picard iteration from γ = 0.
/// The map is monotone, so the iterates rise to the fixed point.
inline EquilibriumRecord solve_equilibrium(const BankingSystem& sys, const std::vector<double>& s,
                                           const IdfSpec& spec, const SolverOptions& opts = {}) {
  if (spec.assets() != sys.assets()) {
    throw ShapeError("solve_equilibrium: inverse demand covers " + std::to_string(spec.assets()) +
                     " assets, system holds " + std::to_string(sys.assets()));
  }
  const auto liab = liabilities(sys, s);
  std::vector<double> gamma(sys.banks(), 0.0);
  if (opts.start_from_first_image) gamma = liquidation_map(sys, spec, liab, gamma);
  if (opts.observer) opts.observer(gamma);

  double residual = 0.0;
  std::size_t iter = 0;
  for (;;) {
    auto next = liquidation_map(sys, spec, liab, gamma);
    residual = 0.0;
    for (std::size_t n = 0; n < next.size(); ++n) {
      residual = std::max(residual, std::abs(next[n] - gamma[n]));
    }
    gamma = std::move(next);
    ++iter;
    if (opts.observer) opts.observer(gamma);
    if (residual < opts.tolerance) break;
    if (iter >= opts.max_iterations) {
      throw NonConvergenceError("solve_equilibrium: no convergence after " +
                                    std::to_string(iter) + " iterations (residual " +
                                    std::to_string(residual) + ")",
                                gamma, residual);
    }
  }

  EquilibriumRecord rec;
  rec.s = s;
  rec.gamma = gamma;
  rec.ell_bank = Tensor::zeros({sys.banks(), sys.assets()});
  for (std::size_t n = 0; n < sys.banks(); ++n) {
    for (std::size_t m = 0; m < sys.assets(); ++m) rec.ell_bank.at(n, m) = gamma[n];
  }
  rec.ell_agg = aggregate_proportional(sys, gamma);
  rec.p = spec.price(rec.ell_agg);
  rec.iterations = iter;
  return rec;
}

/// Shock vector for sample `index`, uniform on [0,1]^N and independent of
/// every other sample's draw.
inline std::vector<double> draw_shock(std::size_t banks, std::uint64_t seed, std::uint64_t index) {
  Rng rng{seed, index};
  std::vector<double> s(banks);
  for (double& v : s) v = rng.uniform();
  return s;
}

/// Simulates `count` samples. Sample i's shock depends only on (seed, first_index + i),
/// so the result is the same for any thread count.
inline std::vector<EquilibriumRecord> generate_dataset(const BankingSystem& sys, const IdfSpec& spec,
                                                       std::size_t count, std::uint64_t seed,
                                                       unsigned threads = 1,
                                                       std::uint64_t first_index = 0) {
  if (count == 0) throw std::invalid_argument("generate_dataset: count must be positive");
  sys.validate();
  std::vector<EquilibriumRecord> out(count);
  std::vector<std::string> errors(count);
  std::vector<std::vector<double>> last(count);
  std::vector<double> residuals(count, 0.0);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        out[i] = solve_equilibrium(sys, draw_shock(sys.banks(), seed, first_index + i), spec);
      } catch (const NonConvergenceError& e) {
        errors[i] = e.what();
        last[i] = e.last_iterate();
        residuals[i] = e.residual();
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i].empty()) {
      throw NonConvergenceError("generate_dataset: sample " + std::to_string(first_index + i) + ": " + errors[i],
                                last[i], residuals[i]);
    }
  }
  return out;
}

}  // namespace firesale
