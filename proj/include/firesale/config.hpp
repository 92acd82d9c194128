#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "toml.hpp"

#include "firesale/contagion.hpp"
#include "firesale/dataset.hpp"
#include "firesale/idf.hpp"
#include "firesale/monotone_net.hpp"
#include "firesale/training.hpp"

namespace firesale {

/// Every problem found in a config, one line per field.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::invalid_argument(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string s = "invalid config:";
    for (const auto& i : issues) s += "\n  " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

struct SystemConfig {
  std::vector<std::vector<double>> holdings{{1.0}, {1.0}};
  std::vector<double> liability_low{0.6, 0.6};
  std::vector<double> liability_high{0.85, 0.85};
  double capital_threshold = 0.6;
  /// Empty means "calibrate": full liquidation exactly at the maximal shock.
  std::optional<double> leverage_sensitivity = 0.1;
};

struct IdfConfig {
  IdfKind kind = IdfKind::Linear;
  std::vector<double> base_price;  ///< empty means 1.0 per asset
  std::vector<double> impact;      ///< Linear/Exponential; empty means 0.15 per asset
  std::vector<std::vector<double>> cross_impact;  ///< LinearCross
};

struct DataConfig {
  std::size_t train_count = 10000;
  std::size_t test_count = 2000;
  std::uint64_t seed = 42;
};

struct ModelConfig {
  std::vector<Variant> variants{Variant::Proposed, Variant::LinearPrice, Variant::Inclusive};
  Architecture architecture;
  std::uint64_t seed = 42;
};

struct ExperimentConfig {
  std::string name = "experiment";
  SystemConfig system;
  IdfConfig idf;
  DataConfig data;
  ModelConfig model;
  TrainConfig training;
  std::string output_dir = "out";

  /// Itemized problems; empty when the config is usable.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    const std::size_t n = system.holdings.size();
    const std::size_t m = n ? system.holdings.front().size() : 0;
    if (n == 0 || m == 0) out.push_back("system.holdings: must be a non-empty N×M table");
    for (std::size_t i = 0; i < n; ++i) {
      if (system.holdings[i].size() != m) out.push_back("system.holdings: row " + std::to_string(i + 1) + " has a different length");
      for (double v : system.holdings[i]) {
        if (!(v >= 0.0)) out.push_back("system.holdings: entries must be non-negative");
      }
    }
    for (std::size_t j = 0; j < m && out.empty(); ++j) {
      double supply = 0.0;
      for (std::size_t i = 0; i < n; ++i) supply += system.holdings[i][j];
      if (!(supply > 0.0)) out.push_back("system.holdings: asset " + std::to_string(j + 1) + " has zero total supply");
    }
    if (system.liability_low.size() != n) out.push_back("system.liability_low: need one value per bank");
    if (system.liability_high.size() != n) out.push_back("system.liability_high: need one value per bank");
    for (std::size_t i = 0; i < std::min({n, system.liability_low.size(), system.liability_high.size()}); ++i) {
      if (!(system.liability_low[i] < system.liability_high[i])) {
        out.push_back("system.liability_low: must be below system.liability_high (bank " + std::to_string(i + 1) + ")");
      }
      if (!(system.capital_threshold <= system.liability_low[i])) {
        out.push_back("system.capital_threshold: must not exceed system.liability_low (bank " + std::to_string(i + 1) + ")");
      }
    }
    if (system.leverage_sensitivity && !(*system.leverage_sensitivity > 0.0)) {
      out.push_back("system.leverage_sensitivity: must be positive or \"calibrate\"");
    }
    if (!idf.base_price.empty() && idf.base_price.size() != m) out.push_back("idf.base_price: need one value per asset");
    for (double b : idf.base_price) {
      if (!(b > 0.0)) out.push_back("idf.base_price: must be positive");
    }
    if (idf.kind == IdfKind::LinearCross) {
      if (idf.cross_impact.size() != m) out.push_back("idf.cross_impact: need an M×M table");
      for (const auto& row : idf.cross_impact) {
        if (row.size() != m) out.push_back("idf.cross_impact: need an M×M table");
      }
    } else if (!idf.impact.empty() && idf.impact.size() != m) {
      out.push_back("idf.impact: need one value per asset");
    }
    if (data.train_count < 2) out.push_back("data.train_count: must be at least 2");
    if (data.test_count < 3) out.push_back("data.test_count: must be at least 3");
    if (model.variants.empty()) out.push_back("model.variants: list at least one variant");
    auto check_train = [&out](bool ok, const char* field, const char* what) {
      if (!ok) out.push_back(std::string("training.") + field + ": " + what);
    };
    check_train(training.learning_rate > 0.0, "learning_rate", "must be positive");
    check_train(training.beta1 >= 0.0 && training.beta1 < 1.0, "beta1", "must lie in [0, 1)");
    check_train(training.beta2 >= 0.0 && training.beta2 < 1.0, "beta2", "must lie in [0, 1)");
    check_train(training.epsilon > 0.0, "epsilon", "must be positive");
    check_train(training.batch_size >= 1, "batch_size", "must be at least 1");
    check_train(training.epochs >= 1, "epochs", "must be at least 1");
    check_train(training.validation_fraction >= 0.0 && training.validation_fraction < 1.0, "validation_fraction",
                "must lie in [0, 1)");
    check_train(training.price_decay >= 0.0, "price_decay", "must be non-negative");
    if (out.empty()) {
      try {
        (void)idf_spec();
      } catch (const std::exception& e) {
        out.push_back(std::string("idf: ") + e.what());
      }
    }
    return out;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw ConfigError(std::move(p));
  }

  Tensor holdings_tensor() const {
    const std::size_t n = system.holdings.size();
    const std::size_t m = system.holdings.front().size();
    std::vector<double> flat;
    for (const auto& row : system.holdings) flat.insert(flat.end(), row.begin(), row.end());
    return Tensor::matrix(n, m, std::move(flat));
  }

  IdfSpec idf_spec() const {
    BankingSystem sys{holdings_tensor(), system.liability_low, system.liability_high, system.capital_threshold, 1.0};
    const auto supply = sys.total_supply();
    switch (idf.kind) {
      case IdfKind::Linear: return IdfSpec::linear(supply, idf.impact, idf.base_price);
      case IdfKind::Exponential: return IdfSpec::exponential(supply, idf.impact, idf.base_price);
      case IdfKind::Arctangent: return IdfSpec::arctangent(supply, idf.base_price);
      case IdfKind::LinearCross: {
        std::vector<double> flat;
        for (const auto& row : idf.cross_impact) flat.insert(flat.end(), row.begin(), row.end());
        return IdfSpec::linear_cross(supply, Tensor::matrix(supply.size(), supply.size(), flat), idf.base_price);
      }
    }
    throw std::logic_error("config: unknown inverse demand kind");
  }

  /// Banking system with κ resolved.
  BankingSystem banking_system() const {
    BankingSystem sys{holdings_tensor(), system.liability_low, system.liability_high, system.capital_threshold,
                      system.leverage_sensitivity.value_or(1.0)};
    if (!system.leverage_sensitivity) sys.leverage_sensitivity = full_liquidation_sensitivity(sys, idf_spec());
    sys.validate();
    return sys;
  }

  TrainConfig train_config() const { return training; }
};

// ---------------------------------------------------------------------------
// TOML

namespace detail {

/// Shortest text that parses back to the same double, always a TOML float.
inline std::string fmt_num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_num(v[i]);
  return s + "]";
}

inline std::string fmt_table(const std::vector<std::vector<double>>& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? ", " : "") + fmt_list(t[i]);
  return s + "]";
}

inline std::string fmt_sizes(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

class Reader {
 public:
  explicit Reader(const toml::table& root) : root_(root) {}

  std::vector<std::string>& issues() { return issues_; }

  const toml::node* find(std::string_view path) const { return root_.at_path(path).node(); }

  template <class T>
  void scalar(std::string_view path, T& dst) {
    const auto* node = find(path);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value<bool>()) dst = *v;
      else bad(path, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) dst = *v;
      else bad(path, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) dst = *v;
      else bad(path, "expected a number");
    } else {
      auto v = node->value<std::int64_t>();
      if (v && *v >= 0) dst = static_cast<T>(*v);
      else bad(path, "expected a non-negative integer");
    }
  }

  /// A number, or one number per entry given as an array.
  void numbers(std::string_view path, std::vector<double>& dst, std::size_t broadcast = 0) {
    const auto* node = find(path);
    if (!node) return;
    if (auto v = node->value<double>()) {
      dst.assign(broadcast ? broadcast : 1, *v);
      return;
    }
    const auto* arr = node->as_array();
    if (!arr) return bad(path, "expected a number or an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
      auto v = e.value<double>();
      if (!v) return bad(path, "expected an array of numbers");
      out.push_back(*v);
    }
    dst = std::move(out);
  }

  void sizes(std::string_view path, std::vector<std::size_t>& dst) {
    const auto* node = find(path);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) return bad(path, "expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : *arr) {
      auto v = e.value<std::int64_t>();
      if (!v || *v <= 0) return bad(path, "expected an array of positive integers");
      out.push_back(static_cast<std::size_t>(*v));
    }
    dst = std::move(out);
  }

  void table(std::string_view path, std::vector<std::vector<double>>& dst) {
    const auto* node = find(path);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) return bad(path, "expected an array of arrays of numbers");
    std::vector<std::vector<double>> out;
    for (const auto& row : *arr) {
      const auto* r = row.as_array();
      if (!r) return bad(path, "expected an array of arrays of numbers");
      std::vector<double> vals;
      for (const auto& e : *r) {
        auto v = e.value<double>();
        if (!v) return bad(path, "expected an array of arrays of numbers");
        vals.push_back(*v);
      }
      out.push_back(std::move(vals));
    }
    dst = std::move(out);
  }

  void bad(std::string_view path, std::string_view what) { issues_.push_back(std::string(path) + ": " + std::string(what)); }

 private:
  const toml::table& root_;
  std::vector<std::string> issues_;
};

}  // namespace detail

/// Reads a config; absent keys keep their defaults. Unknown sections and
/// keys are rejected so typos do not pass silently.
inline ExperimentConfig parse_config(std::string_view text, std::string_view source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError({os.str()});
  }

  static const std::map<std::string, std::vector<std::string>> known = {
      {"", {"name", "system", "idf", "data", "model", "training", "output"}},
      {"system", {"holdings", "liability_low", "liability_high", "capital_threshold", "leverage_sensitivity"}},
      {"idf", {"kind", "base_price", "impact", "cross_impact"}},
      {"data", {"train_count", "test_count", "seed"}},
      {"model",
       {"variants", "liquidation_hidden", "price_hidden", "match_parameters", "price_negation",
        "proportional_liquidation", "own_shock_path", "price_skip", "seed"}},
      {"training",
       {"learning_rate", "beta1", "beta2", "epsilon", "epochs", "batch_size", "seed", "early_stop_patience",
        "validation_fraction", "price_decay"}},
      {"output", {"dir"}},
  };

  ExperimentConfig cfg;
  detail::Reader rd(root);
  auto& issues = rd.issues();
  for (const auto& [key, node] : root) {
    const std::string k(key.str());
    const auto& top = known.at("");
    if (std::find(top.begin(), top.end(), k) == top.end()) {
      issues.push_back(k + ": unknown key");
      continue;
    }
    if (const auto* t = node.as_table()) {
      const auto& allowed = known.at(k);
      for (const auto& [sub, _] : *t) {
        if (std::find(allowed.begin(), allowed.end(), std::string(sub.str())) == allowed.end()) {
          issues.push_back(k + "." + std::string(sub.str()) + ": unknown key");
        }
      }
    } else if (k != "name") {
      issues.push_back(k + ": expected a table");
    }
  }

  rd.scalar("name", cfg.name);
  rd.table("system.holdings", cfg.system.holdings);
  const std::size_t banks = cfg.system.holdings.size();
  cfg.system.liability_low.assign(banks, 0.6);
  cfg.system.liability_high.assign(banks, 0.85);
  rd.numbers("system.liability_low", cfg.system.liability_low, banks);
  rd.numbers("system.liability_high", cfg.system.liability_high, banks);
  rd.scalar("system.capital_threshold", cfg.system.capital_threshold);
  if (const auto* node = rd.find("system.leverage_sensitivity")) {
    if (auto s = node->value<std::string>()) {
      if (*s == "calibrate") cfg.system.leverage_sensitivity.reset();
      else rd.bad("system.leverage_sensitivity", "expected a number or \"calibrate\"");
    } else if (auto v = node->value<double>()) {
      cfg.system.leverage_sensitivity = *v;
    } else {
      rd.bad("system.leverage_sensitivity", "expected a number or \"calibrate\"");
    }
  }

  std::string kind = std::string(to_string(cfg.idf.kind));
  rd.scalar("idf.kind", kind);
  try {
    cfg.idf.kind = parse_idf_kind(kind);
  } catch (const std::exception& e) {
    rd.bad("idf.kind", e.what());
  }
  const std::size_t assets = banks ? cfg.system.holdings.front().size() : 0;
  rd.numbers("idf.base_price", cfg.idf.base_price, assets);
  rd.numbers("idf.impact", cfg.idf.impact, assets);
  rd.table("idf.cross_impact", cfg.idf.cross_impact);

  rd.scalar("data.train_count", cfg.data.train_count);
  rd.scalar("data.test_count", cfg.data.test_count);
  rd.scalar("data.seed", cfg.data.seed);

  if (const auto* node = rd.find("model.variants")) {
    const auto* arr = node->as_array();
    if (!arr) {
      rd.bad("model.variants", "expected an array of strings");
    } else {
      cfg.model.variants.clear();
      for (const auto& e : *arr) {
        auto v = e.value<std::string>();
        try {
          if (!v) throw std::invalid_argument("expected an array of strings");
          cfg.model.variants.push_back(parse_variant(*v));
        } catch (const std::exception& ex) {
          rd.bad("model.variants", ex.what());
        }
      }
    }
  }
  auto& arch = cfg.model.architecture;
  rd.sizes("model.liquidation_hidden", arch.liquidation_hidden);
  rd.sizes("model.price_hidden", arch.price_hidden);
  rd.scalar("model.match_parameters", arch.match_parameters);
  std::string negation = std::string(to_string(arch.price_negation));
  rd.scalar("model.price_negation", negation);
  try {
    arch.price_negation = parse_price_negation(negation);
  } catch (const std::exception& e) {
    rd.bad("model.price_negation", e.what());
  }
  rd.scalar("model.proportional_liquidation", arch.proportional_liquidation);
  rd.scalar("model.own_shock_path", arch.own_shock_path);
  rd.scalar("model.price_skip", arch.price_skip);
  rd.scalar("model.seed", cfg.model.seed);

  auto& tr = cfg.training;
  rd.scalar("training.learning_rate", tr.learning_rate);
  rd.scalar("training.beta1", tr.beta1);
  rd.scalar("training.beta2", tr.beta2);
  rd.scalar("training.epsilon", tr.epsilon);
  rd.scalar("training.epochs", tr.epochs);
  rd.scalar("training.batch_size", tr.batch_size);
  rd.scalar("training.seed", tr.seed);
  rd.scalar("training.early_stop_patience", tr.early_stop_patience);
  rd.scalar("training.validation_fraction", tr.validation_fraction);
  rd.scalar("training.price_decay", tr.price_decay);
  rd.scalar("output.dir", cfg.output_dir);

  if (!issues.empty()) throw ConfigError(issues);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string data_sections_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[system]\n"
     << "holdings = " << detail::fmt_table(c.system.holdings) << "\n"
     << "liability_low = " << detail::fmt_list(c.system.liability_low) << "\n"
     << "liability_high = " << detail::fmt_list(c.system.liability_high) << "\n"
     << "capital_threshold = " << detail::fmt_num(c.system.capital_threshold) << "\n"
     << "leverage_sensitivity = "
     << (c.system.leverage_sensitivity ? detail::fmt_num(*c.system.leverage_sensitivity) : std::string("\"calibrate\""))
     << "\n\n[idf]\n"
     << "kind = \"" << to_string(c.idf.kind) << "\"\n";
  if (!c.idf.base_price.empty()) os << "base_price = " << detail::fmt_list(c.idf.base_price) << "\n";
  if (!c.idf.impact.empty()) os << "impact = " << detail::fmt_list(c.idf.impact) << "\n";
  if (!c.idf.cross_impact.empty()) os << "cross_impact = " << detail::fmt_table(c.idf.cross_impact) << "\n";
  os << "\n[data]\n"
     << "train_count = " << c.data.train_count << "\n"
     << "test_count = " << c.data.test_count << "\n"
     << "seed = " << c.data.seed << "\n";
  return os.str();
}

/// Full config as TOML; parse_config(to_toml(c)) reproduces c.
inline std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& a = c.model.architecture;
  os << "name = \"" << c.name << "\"\n\n" << data_sections_toml(c) << "\n[model]\nvariants = [";
  for (std::size_t i = 0; i < c.model.variants.size(); ++i) {
    os << (i ? ", " : "") << '"' << to_string(c.model.variants[i]) << '"';
  }
  os << "]\n"
     << "liquidation_hidden = " << detail::fmt_sizes(a.liquidation_hidden) << "\n"
     << "price_hidden = " << detail::fmt_sizes(a.price_hidden) << "\n"
     << "match_parameters = " << (a.match_parameters ? "true" : "false") << "\n"
     << "price_negation = \"" << to_string(a.price_negation) << "\"\n"
     << "proportional_liquidation = " << (a.proportional_liquidation ? "true" : "false") << "\n"
     << "own_shock_path = " << (a.own_shock_path ? "true" : "false") << "\n"
     << "price_skip = " << (a.price_skip ? "true" : "false") << "\n"
     << "seed = " << c.model.seed << "\n\n[training]\n"
     << "learning_rate = " << detail::fmt_num(c.training.learning_rate) << "\n"
     << "beta1 = " << detail::fmt_num(c.training.beta1) << "\n"
     << "beta2 = " << detail::fmt_num(c.training.beta2) << "\n"
     << "epsilon = " << detail::fmt_num(c.training.epsilon) << "\n"
     << "epochs = " << c.training.epochs << "\n"
     << "batch_size = " << c.training.batch_size << "\n"
     << "seed = " << c.training.seed << "\n"
     << "early_stop_patience = " << c.training.early_stop_patience << "\n"
     << "validation_fraction = " << detail::fmt_num(c.training.validation_fraction) << "\n"
     << "price_decay = " << detail::fmt_num(c.training.price_decay) << "\n\n[output]\n"
     << "dir = \"" << c.output_dir << "\"\n";
  return os.str();
}

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Identifies the dataset a config generates: the system, inverse demand
/// and data sections only, so model and training edits keep datasets valid.
inline std::string data_hash(const ExperimentConfig& c) { return fnv1a_hex(data_sections_toml(c)); }

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_toml(a) == to_toml(b); }

// ---------------------------------------------------------------------------
// Case studies

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names = {"case1-linear", "case1-exp", "case1-arctan", "case2-nocross",
                                                 "case2-cross"};
  return names;
}

/// For linear inverse demand. Without it the Price Net absorbs an arbitrary
/// monotone reshaping of the hidden liquidations; decaying the MLP branches
/// toward the affine skip branch leaves ℓ̂ affine in the true ℓ.
inline void prefer_affine_price(ExperimentConfig& c) {
  c.model.architecture.price_skip = true;
  c.training.price_decay = 1.0;
}

/// Built-in config for one of the two case studies. Both calibrate κ so
/// that liquidation reaches the total supply exactly at the maximal shock.
inline ExperimentConfig case_config(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.output_dir = "out/" + c.name;
  c.system.leverage_sensitivity.reset();
  if (name.rfind("case1-", 0) == 0) {
    c.system.holdings = {{1.0}, {1.0}};
    c.system.liability_low = {0.6, 0.6};
    c.system.liability_high = {0.85, 0.85};
    c.model.variants = {Variant::Proposed, Variant::LinearPrice, Variant::Inclusive};
    if (name == "case1-linear") {
      c.idf.kind = IdfKind::Linear;
      prefer_affine_price(c);
    } else if (name == "case1-exp") {
      c.idf.kind = IdfKind::Exponential;
    } else if (name == "case1-arctan") {
      c.idf.kind = IdfKind::Arctangent;
      // The arctangent curve is convex in ℓ; an output-negated net is concave.
      c.model.architecture.price_negation = PriceNegation::Both;
    } else {
      throw std::invalid_argument("unknown case '" + std::string(name) + "'");
    }
    return c;
  }
  if (name == "case2-nocross" || name == "case2-cross") {
    const double off = name == "case2-cross" ? 0.015 : 0.0;
    c.system.holdings = {{0.4, 0.6}, {0.6, 0.4}};
    c.system.liability_low = {0.6, 0.6};
    c.system.liability_high = {0.9, 0.9};
    c.idf.kind = IdfKind::LinearCross;
    c.idf.cross_impact = {{0.15, off}, {off, 0.15}};
    c.model.variants = {Variant::Proposed, Variant::Inclusive};
    c.model.architecture.proportional_liquidation = true;
    c.model.architecture.own_shock_path = true;
    prefer_affine_price(c);
    return c;
  }
  throw std::invalid_argument("unknown case '" + std::string(name) + "'");
}

}  // namespace firesale
