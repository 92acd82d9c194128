#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "firesale/autodiff.hpp"
#include "firesale/random.hpp"
#include "firesale/tensor.hpp"

namespace firesale {

/// Fully connected ReLU network with entrywise non-negative weights.
///
/// Hidden layers compute relu(W·h + b). The output layer computes
/// sign·(W·h) + b, optionally followed by a ReLU. Because every weight is
/// non-negative and ReLU is non-decreasing, each output is non-decreasing
/// in every input for sign = +1 and non-increasing for sign = −1. Biases
/// are free.
class MonotoneMlp {
 public:
  struct Layer {
    Tensor weight;  ///< out × in
    Tensor bias;    ///< out
  };

  MonotoneMlp() = default;

  MonotoneMlp(std::vector<std::size_t> layer_dims, int output_sign, bool output_relu,
              int input_sign = 1)
      : dims_(std::move(layer_dims)),
        output_sign_(output_sign),
        input_sign_(input_sign),
        output_relu_(output_relu) {
    if (dims_.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    for (std::size_t d : dims_) {
      if (d == 0) throw std::invalid_argument("mlp: layer dims must be positive");
    }
    if (output_sign_ != 1 && output_sign_ != -1) throw std::invalid_argument("mlp: output_sign must be ±1");
    if (input_sign_ != 1 && input_sign_ != -1) throw std::invalid_argument("mlp: input_sign must be ±1");
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
      layers_.push_back({Tensor::zeros({dims_[i + 1], dims_[i]}), Tensor::zeros({dims_[i + 1]})});
    }
  }

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  int output_sign() const { return output_sign_; }
  int input_sign() const { return input_sign_; }
  /// +1 if the map is non-decreasing in every input, −1 if non-increasing.
  int monotone_direction() const { return output_sign_ * input_sign_; }
  bool output_relu() const { return output_relu_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  static std::size_t parameter_count(const std::vector<std::size_t>& dims) {
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) count += dims[i + 1] * (dims[i] + 1);
    return count;
  }
  std::size_t parameter_count() const { return parameter_count(dims_); }

  /// Weights uniform on [0, 1/√fan_in]; biases zero except the output bias
  /// and, when inputs are negated, the first hidden bias.
  void initialize(Rng& rng, double output_bias = 0.0, double first_bias = 0.0) {
    for (auto& layer : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (double& w : layer.weight.values()) w = rng.uniform(0.0, bound);
      for (double& b : layer.bias.values()) b = 0.0;
    }
    if (layers_.size() > 1) {
      for (double& b : layers_.front().bias.values()) b = first_bias;
    }
    for (double& b : layers_.back().bias.values()) b = output_bias;
  }

  /// Projects onto the feasible set: negative weight entries become 0.
  void clamp() {
    for (auto& layer : layers_) {
      for (double& w : layer.weight.values()) w = std::max(w, 0.0);
    }
  }

  bool is_feasible() const {
    for (const auto& layer : layers_) {
      for (double w : layer.weight.values()) {
        if (!(w >= 0.0)) return false;
      }
    }
    return true;
  }

  /// Records the network on `tape`. Parameter node ids are appended to
  /// `params` in (weight, bias) order per layer.
  Tape::NodeId forward(Tape& tape, Tape::NodeId input, std::vector<Tape::NodeId>* params = nullptr) const {
    if (!is_feasible()) throw std::logic_error("mlp: forward pass on unclamped weights");
    if (tape.value(input).cols() != input_dim()) {
      throw ShapeError("mlp: input " + tape.value(input).shape_string() + " but network expects " +
                       std::to_string(input_dim()) + " features");
    }
    Tape::NodeId h = input_sign_ < 0 ? tape.negate(input) : input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto w = tape.parameter(layers_[i].weight);
      const auto b = tape.parameter(layers_[i].bias);
      if (params) {
        params->push_back(w);
        params->push_back(b);
      }
      const bool last = i + 1 == layers_.size();
      if (!last) {
        h = tape.relu(tape.affine(h, w, b));
      } else {
        h = tape.signed_affine(h, w, b, static_cast<double>(output_sign_));
        if (output_relu_) h = tape.relu(h);
      }
    }
    return h;
  }

  Tensor operator()(const Tensor& x) const {
    Tape tape;
    return tape.value(forward(tape, tape.constant(x)));
  }

  friend bool operator==(const MonotoneMlp& a, const MonotoneMlp& b) {
    if (a.dims_ != b.dims_ || a.output_sign_ != b.output_sign_ || a.input_sign_ != b.input_sign_ ||
        a.output_relu_ != b.output_relu_) {
      return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      if (!(a.layers_[i].weight == b.layers_[i].weight) || !(a.layers_[i].bias == b.layers_[i].bias)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<Layer> layers_;
  int output_sign_ = 1;
  int input_sign_ = 1;
  bool output_relu_ = false;
};

enum class Variant { Proposed, LinearPrice, Inclusive };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Proposed: return "proposed";
    case Variant::LinearPrice: return "linear_price";
    case Variant::Inclusive: return "inclusive";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view name) {
  if (name == "proposed") return Variant::Proposed;
  if (name == "linear_price") return Variant::LinearPrice;
  if (name == "inclusive") return Variant::Inclusive;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

/// Where the Price Net applies its sign flip.
///   Output  p̂ = b − g(ℓ̂)          concave in ℓ̂
///   Input   p̂ = g(−ℓ̂) + b          convex in ℓ̂
///   Both    p̂ = g₁(−ℓ̂) − g₂(ℓ̂) + b  sum of the two, each branch half width
/// Every form is non-increasing in ℓ̂ for any feasible weights.
enum class PriceNegation { Output, Input, Both };

inline std::string_view to_string(PriceNegation n) {
  switch (n) {
    case PriceNegation::Output: return "output";
    case PriceNegation::Input: return "input";
    case PriceNegation::Both: return "both";
  }
  return "unknown";
}

inline PriceNegation parse_price_negation(std::string_view name) {
  if (name == "output") return PriceNegation::Output;
  if (name == "input") return PriceNegation::Input;
  if (name == "both") return PriceNegation::Both;
  throw std::invalid_argument("unknown price negation '" + std::string(name) + "'");
}

struct Architecture {
  std::vector<std::size_t> liquidation_hidden{32, 32};
  std::vector<std::size_t> price_hidden{32, 32};
  /// Widen the LinearPrice variant's liquidation net so its total parameter
  /// count is as close as possible to the proposed model's.
  bool match_parameters = true;
  PriceNegation price_negation = PriceNegation::Output;
  /// Liquidation Net emits one fraction per bank, sold across every asset
  /// the bank holds, instead of a free fraction per holding.
  bool proportional_liquidation = false;
  /// Adds w_n·s_n (w ≥ 0) to bank n's liquidation output. Bank n's
  /// liabilities depend on its own shock only, and this direct path ties
  /// each output to its bank rather than to any bank with equal holdings.
  bool own_shock_path = false;
  /// Adds a single affine branch p̂ −= W·ℓ̂ (W ≥ 0) next to the MLP branches.
  /// With weight decay on the MLP branches this favours the simplest price map.
  bool price_skip = false;
};

/// Liquidation → price map: the sum of one or more monotone non-increasing
/// branches.
class PriceNet {
 public:
  PriceNet() = default;

  explicit PriceNet(std::vector<MonotoneMlp> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw std::invalid_argument("price net: at least one branch required");
    for (const auto& b : branches_) {
      if (b.input_dim() != input_dim() || b.output_dim() != output_dim()) {
        throw std::invalid_argument("price net: branches disagree on dimensions");
      }
      if (b.monotone_direction() != -1 || b.output_relu()) {
        throw std::invalid_argument("price net: every branch must be non-increasing without output ReLU");
      }
    }
  }

  /// Branches for `negation` with the given hidden widths.
  static PriceNet build(std::size_t assets, const std::vector<std::size_t>& hidden,
                        PriceNegation negation, std::uint64_t seed, bool skip = false) {
    auto dims = [assets](const std::vector<std::size_t>& h) {
      std::vector<std::size_t> d{assets};
      d.insert(d.end(), h.begin(), h.end());
      d.push_back(assets);
      return d;
    };
    std::vector<MonotoneMlp> branches;
    if (negation == PriceNegation::Output || negation == PriceNegation::Both) {
      std::vector<std::size_t> h = hidden;
      if (negation == PriceNegation::Both) {
        for (auto& w : h) w = (w + 1) / 2;
      }
      MonotoneMlp net(dims(h), -1, false, 1);
      Rng rng{seed, 2};
      net.initialize(rng, 1.0);
      branches.push_back(std::move(net));
    }
    if (negation == PriceNegation::Input || negation == PriceNegation::Both) {
      std::vector<std::size_t> h = hidden;
      if (negation == PriceNegation::Both) {
        for (auto& w : h) w = w / 2 == 0 ? 1 : w / 2;
      }
      MonotoneMlp net(dims(h), 1, false, -1);
      Rng rng{seed, 3};
      // Hidden units of an input-negated branch start active at zero liquidation.
      net.initialize(rng, negation == PriceNegation::Both ? 0.0 : 1.0, 1.0);
      branches.push_back(std::move(net));
    }
    if (skip) {
      MonotoneMlp net({assets, assets}, -1, false, 1);
      Rng rng{seed, 4};
      net.initialize(rng);
      branches.push_back(std::move(net));
    }
    return PriceNet(std::move(branches));
  }

  /// Single affine layer p̂ = b − W·ℓ̂.
  static PriceNet linear(std::size_t assets, std::uint64_t seed) {
    MonotoneMlp net({assets, assets}, -1, false, 1);
    Rng rng{seed, 2};
    net.initialize(rng, 1.0);
    return PriceNet({std::move(net)});
  }

  const std::vector<MonotoneMlp>& branches() const { return branches_; }
  std::vector<MonotoneMlp>& branches() { return branches_; }
  std::size_t input_dim() const { return branches_.front().input_dim(); }
  std::size_t output_dim() const { return branches_.front().output_dim(); }

  bool is_single_affine() const {
    return branches_.size() == 1 && branches_.front().layers().size() == 1;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : branches_) n += b.parameter_count();
    return n;
  }

  void clamp() {
    for (auto& b : branches_) b.clamp();
  }

  bool is_feasible() const {
    for (const auto& b : branches_) {
      if (!b.is_feasible()) return false;
    }
    return true;
  }

  Tape::NodeId forward(Tape& tape, Tape::NodeId input, std::vector<Tape::NodeId>* params = nullptr) const {
    Tape::NodeId out = branches_.front().forward(tape, input, params);
    for (std::size_t i = 1; i < branches_.size(); ++i) {
      out = tape.add(out, branches_[i].forward(tape, input, params));
    }
    return out;
  }

  Tensor operator()(const Tensor& x) const {
    Tape tape;
    return tape.value(forward(tape, tape.constant(x)));
  }

  friend bool operator==(const PriceNet& a, const PriceNet& b) { return a.branches_ == b.branches_; }

 private:
  std::vector<MonotoneMlp> branches_;
};

/// Shocks → per-bank liquidations → holdings-weighted aggregate → prices.
class DualModel {
 public:
  /// Node ids of the three pipeline stages plus every parameter node, in
  /// the order of `parameters()`.
  struct TapeOutput {
    Tape::NodeId ell_bar;
    Tape::NodeId ell_hat;
    Tape::NodeId p_hat;
    std::vector<Tape::NodeId> params;
  };

  struct Output {
    Tensor ell_bar;  ///< batch × (N·M), column n·M + m is bank n, asset m
    Tensor ell_hat;  ///< batch × M
    Tensor p_hat;    ///< batch × M
  };

  /// A trainable tensor, whether the non-negativity projection applies to
  /// it, and whether Price Net weight decay applies to it.
  struct Parameter {
    Tensor* value;
    bool constrained;
    bool decays = false;
  };

  DualModel() = default;

  /// `own_shock` is empty for no direct shock path, otherwise one weight per bank.
  DualModel(Variant variant, Tensor holdings, MonotoneMlp liquidation_net, PriceNet price_net,
            Tensor own_shock = {}, std::string fingerprint = {})
      : variant_(variant),
        holdings_(std::move(holdings)),
        liquidation_net_(std::move(liquidation_net)),
        price_net_(std::move(price_net)),
        own_shock_(std::move(own_shock)),
        fingerprint_(std::move(fingerprint)) {
    check_structure();
  }

  /// Builds and initializes a model. Liquidation Net: [in, hidden…, N·M]
  /// with a final ReLU, where in = N, or N + N·M for Inclusive. Price Net:
  /// per `arch.price_negation`, or a single affine layer for LinearPrice.
  static DualModel create(Variant variant, Tensor holdings, const Architecture& arch,
                          std::uint64_t seed) {
    const std::size_t n = holdings.rows();
    const std::size_t m = holdings.cols();
    const std::size_t in = variant == Variant::Inclusive ? n + n * m : n;

    auto dims = [](std::size_t first, const std::vector<std::size_t>& hidden, std::size_t last) {
      std::vector<std::size_t> d{first};
      d.insert(d.end(), hidden.begin(), hidden.end());
      d.push_back(last);
      return d;
    };

    const std::size_t out = arch.proportional_liquidation ? n : n * m;
    std::vector<std::size_t> liq_dims = dims(in, arch.liquidation_hidden, out);
    PriceNet price = variant == Variant::LinearPrice
                         ? PriceNet::linear(m, seed)
                         : PriceNet::build(m, arch.price_hidden, arch.price_negation, seed, arch.price_skip);

    if (variant == Variant::LinearPrice && arch.match_parameters && !arch.liquidation_hidden.empty()) {
      const std::size_t target =
          MonotoneMlp::parameter_count(dims(n, arch.liquidation_hidden, out)) +
          PriceNet::build(m, arch.price_hidden, arch.price_negation, seed, arch.price_skip).parameter_count();
      std::size_t best_width = arch.liquidation_hidden.front();
      std::size_t best_gap = static_cast<std::size_t>(-1);
      for (std::size_t w = 1; w <= 4096; ++w) {
        const std::vector<std::size_t> hidden(arch.liquidation_hidden.size(), w);
        const std::size_t total =
            MonotoneMlp::parameter_count(dims(in, hidden, out)) + price.parameter_count();
        const std::size_t gap = total > target ? total - target : target - total;
        if (gap < best_gap) {
          best_gap = gap;
          best_width = w;
        }
        if (total > target) break;
      }
      liq_dims = dims(in, std::vector<std::size_t>(arch.liquidation_hidden.size(), best_width), out);
    }

    MonotoneMlp liq(liq_dims, +1, true);
    Rng liq_rng{seed, 1};
    liq.initialize(liq_rng, 0.0);
    Tensor own = arch.own_shock_path ? Tensor::full({n}, 1.0) : Tensor{};
    return DualModel(variant, std::move(holdings), std::move(liq), std::move(price), std::move(own));
  }

  Variant variant() const { return variant_; }
  const Tensor& holdings() const { return holdings_; }
  std::size_t banks() const { return holdings_.rows(); }
  std::size_t assets() const { return holdings_.cols(); }
  std::size_t liquidation_input_dim() const { return liquidation_net_.input_dim(); }
  const MonotoneMlp& liquidation_net() const { return liquidation_net_; }
  const PriceNet& price_net() const { return price_net_; }
  MonotoneMlp& liquidation_net() { return liquidation_net_; }
  PriceNet& price_net() { return price_net_; }
  const Tensor& own_shock() const { return own_shock_; }
  bool has_own_shock_path() const { return own_shock_.size() != 0; }
  const std::string& fingerprint() const { return fingerprint_; }
  void set_fingerprint(std::string f) { fingerprint_ = std::move(f); }
  bool needs_true_liquidations() const { return variant_ == Variant::Inclusive; }
  /// True when each bank's single liquidation fraction applies to all its holdings.
  bool proportional() const { return liquidation_net_.output_dim() != banks() * assets(); }

  std::size_t parameter_count() const {
    return liquidation_net_.parameter_count() + own_shock_.size() + price_net_.parameter_count();
  }

  /// Liquidation Net parameters, the own-shock weights if present, then Price
  /// Net parameters; (weight, bias) per layer, branch by branch.
  std::vector<Parameter> parameters() {
    std::vector<Parameter> out;
    auto add = [&out](MonotoneMlp& net, bool decays) {
      for (auto& layer : net.layers()) {
        out.push_back({&layer.weight, true, decays});
        out.push_back({&layer.bias, false});
      }
    };
    add(liquidation_net_, false);
    if (has_own_shock_path()) out.push_back({&own_shock_, true});
    // Affine branches stay free of decay; they are the price map's linear part.
    for (auto& b : price_net_.branches()) add(b, b.layers().size() > 1);
    return out;
  }

  void clamp() {
    liquidation_net_.clamp();
    for (double& w : own_shock_.values()) w = std::max(w, 0.0);
    price_net_.clamp();
  }

  bool is_feasible() const {
    for (double w : own_shock_.values()) {
      if (!(w >= 0.0)) return false;
    }
    return liquidation_net_.is_feasible() && price_net_.is_feasible();
  }

  /// Records the full pipeline. `true_liq` (batch × N·M) must be given iff
  /// the variant is Inclusive.
  TapeOutput forward(Tape& tape, Tape::NodeId shocks, std::optional<Tape::NodeId> true_liq = {}) const {
    if (needs_true_liquidations() != true_liq.has_value()) {
      throw std::invalid_argument(needs_true_liquidations()
                                      ? "dual model: inclusive variant needs true liquidations"
                                      : "dual model: true liquidations are only accepted by the inclusive variant");
    }
    if (tape.value(shocks).cols() != banks()) {
      throw ShapeError("dual model: shocks " + tape.value(shocks).shape_string() + " but system has " +
                       std::to_string(banks()) + " banks");
    }
    TapeOutput out{};
    Tape::NodeId input = shocks;
    if (true_liq) {
      if (tape.value(*true_liq).cols() != banks() * assets()) {
        throw ShapeError("dual model: true liquidations must have N·M columns");
      }
      input = tape.concat(shocks, *true_liq);
    }
    out.ell_bar = liquidation_net_.forward(tape, input, &out.params);
    std::optional<Tape::NodeId> direct;
    if (has_own_shock_path()) {
      const auto w = tape.parameter(own_shock_);
      out.params.push_back(w);
      direct = tape.scale_columns(shocks, w);
    }
    if (proportional()) {
      if (direct) out.ell_bar = tape.add(out.ell_bar, *direct);
      out.ell_bar = tape.spread(out.ell_bar, assets());
    } else if (direct) {
      out.ell_bar = tape.add(out.ell_bar, tape.spread(*direct, assets()));
    }
    out.ell_hat = tape.aggregate(out.ell_bar, holdings_);
    out.p_hat = price_net_.forward(tape, out.ell_hat, &out.params);
    return out;
  }

  Output forward(const Tensor& shocks, const Tensor* true_liq = nullptr) const {
    Tape tape;
    const auto s = tape.constant(shocks);
    std::optional<Tape::NodeId> t;
    if (true_liq) t = tape.constant(*true_liq);
    const auto ids = forward(tape, s, t);
    return {tape.value(ids.ell_bar), tape.value(ids.ell_hat), tape.value(ids.p_hat)};
  }

  Tensor predict_bank_liquidations(const Tensor& shocks, const Tensor* true_liq = nullptr) const {
    return forward(shocks, true_liq).ell_bar;
  }

  Tensor predict_prices(const Tensor& ell_hat) const {
    if (ell_hat.cols() != assets()) {
      throw ShapeError("dual model: liquidations " + ell_hat.shape_string() + " but system has " +
                       std::to_string(assets()) + " assets");
    }
    return price_net_(ell_hat);
  }

  friend bool operator==(const DualModel& a, const DualModel& b) {
    return a.variant_ == b.variant_ && a.holdings_ == b.holdings_ &&
           a.liquidation_net_ == b.liquidation_net_ && a.own_shock_ == b.own_shock_ &&
           a.price_net_ == b.price_net_;
  }

 private:
  void check_structure() const {
    if (holdings_.rank() != 2) throw std::invalid_argument("dual model: holdings must be N×M");
    const std::size_t n = banks();
    const std::size_t m = assets();
    const std::size_t in = variant_ == Variant::Inclusive ? n + n * m : n;
    const std::size_t out = liquidation_net_.output_dim();
    if (liquidation_net_.input_dim() != in || (out != n * m && out != n)) {
      throw std::invalid_argument("dual model: liquidation net dims do not match the banking system");
    }
    if (liquidation_net_.monotone_direction() != 1 || !liquidation_net_.output_relu()) {
      throw std::invalid_argument("dual model: liquidation net must be increasing with a final ReLU");
    }
    if (price_net_.input_dim() != m || price_net_.output_dim() != m) {
      throw std::invalid_argument("dual model: price net must map M liquidations to M prices");
    }
    if (has_own_shock_path() && (own_shock_.rank() != 1 || own_shock_.size() != n)) {
      throw std::invalid_argument("dual model: own-shock weights need one entry per bank");
    }
    if (variant_ == Variant::LinearPrice && !price_net_.is_single_affine()) {
      throw std::invalid_argument("dual model: linear price variant takes a single affine price layer");
    }
  }

  Variant variant_ = Variant::Proposed;
  Tensor holdings_;
  MonotoneMlp liquidation_net_;
  PriceNet price_net_;
  Tensor own_shock_;
  std::string fingerprint_;
};

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const MonotoneMlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    layers.push_back({{"weight", layer.weight.values()}, {"bias", layer.bias.values()}});
  }
  return {{"layer_dims", net.layer_dims()},
          {"input_sign", net.input_sign()},
          {"output_sign", net.output_sign()},
          {"output_relu", net.output_relu()},
          {"layers", layers}};
}

inline MonotoneMlp mlp_from_json(const nlohmann::json& j) {
  MonotoneMlp net(j.at("layer_dims").get<std::vector<std::size_t>>(), j.at("output_sign").get<int>(),
                  j.at("output_relu").get<bool>(), j.value("input_sign", 1));
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw std::invalid_argument("model: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto w = layers[i].at("weight").get<std::vector<double>>();
    auto b = layers[i].at("bias").get<std::vector<double>>();
    auto& dst = net.layers()[i];
    if (w.size() != dst.weight.size() || b.size() != dst.bias.size()) {
      throw std::invalid_argument("model: layer " + std::to_string(i) + " size mismatch");
    }
    dst.weight.values() = std::move(w);
    dst.bias.values() = std::move(b);
  }
  if (!net.is_feasible()) throw std::invalid_argument("model: stored weights violate non-negativity");
  return net;
}

inline nlohmann::json to_json(const DualModel& model) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : model.price_net().branches()) branches.push_back(to_json(b));
  return {{"format", "firesale-dual-model"},
          {"version", 1},
          {"variant", std::string(to_string(model.variant()))},
          {"fingerprint", model.fingerprint()},
          {"holdings",
           {{"rows", model.holdings().rows()},
            {"cols", model.holdings().cols()},
            {"values", model.holdings().values()}}},
          {"liquidation_net", to_json(model.liquidation_net())},
          {"own_shock", model.own_shock().values()},
          {"price_net", {{"branches", branches}}}};
}

inline DualModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "firesale-dual-model") {
    throw std::invalid_argument("model: not a dual-model document");
  }
  const auto& h = j.at("holdings");
  Tensor holdings = Tensor::matrix(h.at("rows").get<std::size_t>(), h.at("cols").get<std::size_t>(),
                                   h.at("values").get<std::vector<double>>());
  std::vector<MonotoneMlp> branches;
  for (const auto& b : j.at("price_net").at("branches")) branches.push_back(mlp_from_json(b));
  Tensor own;
  if (auto it = j.find("own_shock"); it != j.end() && !it->empty()) {
    own = Tensor::vector(it->get<std::vector<double>>());
  }
  return DualModel(parse_variant(j.at("variant").get<std::string>()), std::move(holdings),
                   mlp_from_json(j.at("liquidation_net")), PriceNet(std::move(branches)), std::move(own),
                   j.value("fingerprint", std::string()));
}

}  // namespace firesale
