#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "firesale/config.hpp"
#include "firesale/contagion.hpp"
#include "firesale/dataset.hpp"
#include "firesale/evaluation.hpp"
#include "firesale/monotone_net.hpp"
#include "firesale/training.hpp"

namespace firesale {

inline constexpr const char* kToolVersion = "1.0.0";

/// Raised when two artifacts do not belong together, e.g. a dataset built
/// from a different config.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t banks = 0;
  std::size_t assets = 0;
  std::size_t train_begin = 0;
  std::size_t train_end = 0;  ///< exclusive; test rows follow
  std::size_t test_end = 0;
  double leverage_sensitivity = 0.0;
};

inline nlohmann::json to_json(const DatasetMeta& m) {
  return {{"config_hash", m.config_hash},
          {"seed", m.seed},
          {"banks", m.banks},
          {"assets", m.assets},
          {"split", {{"train", {m.train_begin, m.train_end}}, {"test", {m.train_end, m.test_end}}}},
          {"leverage_sensitivity", m.leverage_sensitivity},
          {"tool_version", kToolVersion}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.banks = j.at("banks").get<std::size_t>();
  m.assets = j.at("assets").get<std::size_t>();
  const auto& split = j.at("split");
  m.train_begin = split.at("train").at(0).get<std::size_t>();
  m.train_end = split.at("train").at(1).get<std::size_t>();
  m.test_end = split.at("test").at(1).get<std::size_t>();
  m.leverage_sensitivity = j.at("leverage_sensitivity").get<double>();
  return m;
}

/// Sidecar path for a dataset file: same stem, .json extension.
inline std::filesystem::path sidecar_path(const std::filesystem::path& dataset) {
  auto p = dataset;
  return p.replace_extension(".json");
}

struct ExperimentData {
  DatasetMeta meta;
  std::vector<EquilibriumRecord> records;

  std::vector<EquilibriumRecord> train() const {
    return {records.begin() + static_cast<std::ptrdiff_t>(meta.train_begin),
            records.begin() + static_cast<std::ptrdiff_t>(meta.train_end)};
  }
  std::vector<EquilibriumRecord> test() const {
    return {records.begin() + static_cast<std::ptrdiff_t>(meta.train_end),
            records.begin() + static_cast<std::ptrdiff_t>(meta.test_end)};
  }
};

/// Training rows come first, test rows after; a sample's shock depends only
/// on (seed, row index).
inline ExperimentData generate_experiment_data(const ExperimentConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto sys = cfg.banking_system();
  const auto spec = cfg.idf_spec();
  ExperimentData d;
  d.records = generate_dataset(sys, spec, cfg.data.train_count + cfg.data.test_count, cfg.data.seed, threads);
  d.meta = {data_hash(cfg), cfg.data.seed, sys.banks(), sys.assets(), 0, cfg.data.train_count,
            cfg.data.train_count + cfg.data.test_count, sys.leverage_sensitivity};
  return d;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_experiment_data(const std::filesystem::path& csv, const ExperimentData& d) {
  std::ostringstream os;
  write_dataset_csv(os, d.records);
  write_text(csv, os.str());
  write_text(sidecar_path(csv), to_json(d.meta).dump(2) + "\n");
}

/// Loads a dataset and its sidecar, refusing it when the sidecar's hash
/// differs from `expected_hash` (pass an empty string to skip the check).
inline ExperimentData read_experiment_data(const std::filesystem::path& csv, const std::string& expected_hash) {
  ExperimentData d;
  d.meta = meta_from_json(nlohmann::json::parse(read_text(sidecar_path(csv))));
  if (!expected_hash.empty() && d.meta.config_hash != expected_hash) {
    throw ContractError("dataset '" + csv.string() + "' was generated from config hash " + d.meta.config_hash +
                        " but the current config hashes to " + expected_hash);
  }
  std::istringstream is(read_text(csv));
  auto ds = read_dataset_csv(is);
  if (ds.records.size() != d.meta.test_end) {
    throw ContractError("dataset '" + csv.string() + "' has " + std::to_string(ds.records.size()) +
                        " rows but its sidecar records " + std::to_string(d.meta.test_end));
  }
  d.records = std::move(ds.records);
  return d;
}

struct VariantRun {
  DualModel model;
  TrainReport train;
  EvalReport eval;
  double seconds = 0.0;
};

struct CaseResult {
  ExperimentConfig config;
  ExperimentData data;
  std::vector<VariantRun> runs;
};

using Logger = std::function<void(const std::string&)>;

inline VariantRun train_and_evaluate(const ExperimentConfig& cfg, const ExperimentData& data, Variant variant,
                                     const Logger& log = {}) {
  const auto sys = cfg.banking_system();
  const auto spec = cfg.idf_spec();
  const auto t0 = std::chrono::steady_clock::now();
  VariantRun run;
  run.model = DualModel::create(variant, sys.holdings, cfg.model.architecture, cfg.model.seed);
  run.model.set_fingerprint(data.meta.config_hash);
  run.train = train(run.model, data.train(), cfg.train_config());
  run.eval = evaluate(run.model, data.test(), sys, spec, std::string(to_string(variant)));
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) {
    std::ostringstream os;
    os << cfg.name << " " << to_string(variant) << ": test mse " << format_double(run.eval.mse_sum) << ", best epoch "
       << run.train.best_epoch << ", " << std::fixed << std::setprecision(1) << run.seconds << " s";
    log(os.str());
  }
  return run;
}

/// Generation, training of every configured variant, and evaluation.
inline CaseResult run_case(const ExperimentConfig& cfg, unsigned threads = 1, const Logger& log = {}) {
  CaseResult res;
  res.config = cfg;
  res.data = generate_experiment_data(cfg, threads);
  for (auto v : cfg.model.variants) res.runs.push_back(train_and_evaluate(cfg, res.data, v, log));
  return res;
}

inline std::string comparison_csv(const CaseResult& res) {
  std::ostringstream os;
  const std::size_t m = res.data.meta.assets;
  os << "variant,mse_sum";
  for (std::size_t a = 1; a <= m; ++a) os << ",mse_" << a << ",corr_" << a << ",scaled_mae_" << a;
  os << ",best_epoch,parameters\n";
  for (const auto& r : res.runs) {
    os << r.eval.variant << ',' << format_double(r.eval.mse_sum);
    for (const auto& a : r.eval.assets) {
      os << ',' << format_double(a.mse) << ',' << (a.correlation ? format_double(*a.correlation) : "") << ','
         << (a.scaled_mae ? format_double(*a.scaled_mae) : "");
    }
    os << ',' << r.train.best_epoch << ',' << r.model.parameter_count() << '\n';
  }
  return os.str();
}

/// Plain-text table for the terminal and for comparison.md.
inline std::string comparison_table(const CaseResult& res) {
  std::ostringstream os;
  const std::size_t m = res.data.meta.assets;
  auto sci = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return std::string(buf);
  };
  os << "| model | MSE" << (m > 1 ? " (sum)" : "") << " |";
  for (std::size_t a = 1; a <= m; ++a) os << " corr " << a << " |";
  os << "\n|---|---|";
  for (std::size_t a = 0; a < m; ++a) os << "---|";
  os << '\n';
  for (const auto& r : res.runs) {
    os << "| " << r.eval.variant << " | " << sci(r.eval.mse_sum) << " |";
    for (const auto& a : r.eval.assets) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", a.correlation.value_or(0.0));
      os << ' ' << buf << " |";
    }
    os << '\n';
  }
  for (const auto& r : res.runs) {
    if (!r.eval.regression) continue;
    const auto& g = *r.eval.regression;
    os << "\nregression of p_hat_1 (" << r.eval.variant << ")\n\n| term | estimate | s.e. | t (true) | p (true) | t (0) | p (0) |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (std::size_t j = 0; j < g.regressors.size(); ++j) {
      char buf[256];
      const double tt = g.true_null ? g.true_null->t_values[j] : 0.0;
      const double pt = g.true_null ? g.true_null->p_values[j] : 0.0;
      std::snprintf(buf, sizeof buf, "| %s | %.4f | %.2e | %.3f | %.3g | %.1f | %.3g |\n", g.regressors[j].c_str(),
                    g.result.estimates[j], g.result.standard_errors[j], tt, pt, g.zero_null.t_values[j],
                    g.zero_null.p_values[j]);
      os << buf;
    }
  }
  return os.str();
}

/// Writes every artifact of a case run into `dir`.
inline void write_case_artifacts(const CaseResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.toml", to_toml(res.config));
  write_experiment_data(dir / "dataset.csv", res.data);
  nlohmann::json files = nlohmann::json::array({"config.toml", "dataset.csv", "dataset.json"});
  for (const auto& r : res.runs) {
    const std::string v = r.eval.variant;
    write_text(dir / ("model_" + v + ".json"), to_json(r.model).dump() + "\n");
    std::ostringstream tr;
    write_train_report_csv(tr, r.train);
    write_text(dir / ("train_" + v + ".csv"), tr.str());
    write_text(dir / ("report_" + v + ".json"), to_json(r.eval).dump(2) + "\n");
    std::ostringstream curve;
    write_curve_csv(curve, r.eval.curve);
    write_text(dir / ("curve_" + v + ".csv"), curve.str());
    std::ostringstream table;
    write_asset_table_csv(table, r.eval);
    write_text(dir / ("assets_" + v + ".csv"), table.str());
    for (const char* f : {"model_", "train_", "report_", "curve_", "assets_"}) {
      files.push_back(std::string(f) + v + (std::string(f) == "model_" || std::string(f) == "report_" ? ".json" : ".csv"));
    }
    if (r.eval.regression) {
      std::ostringstream reg;
      write_regression_csv(reg, *r.eval.regression);
      write_text(dir / ("regression_" + v + ".csv"), reg.str());
      files.push_back("regression_" + v + ".csv");
    }
  }
  write_text(dir / "comparison.csv", comparison_csv(res));
  write_text(dir / "comparison.md", comparison_table(res));
  files.push_back("comparison.csv");
  files.push_back("comparison.md");
  nlohmann::json manifest = {{"case", res.config.name},
                             {"config_hash", res.data.meta.config_hash},
                             {"data_seed", res.config.data.seed},
                             {"model_seed", res.config.model.seed},
                             {"training_seed", res.config.training.seed},
                             {"tool_version", kToolVersion},
                             {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace firesale
