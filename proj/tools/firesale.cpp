// Command-line driver: dataset generation, training, evaluation, curve
// export and one-shot reproduction of the two case studies.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "firesale/config.hpp"
#include "firesale/experiment.hpp"

namespace fs = std::filesystem;
using namespace firesale;

namespace {

enum Exit { kOk = 0, kIo = 1, kContract = 2, kNumerical = 3 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
};

ExperimentConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError({"--config: required for this command"});
  ExperimentConfig cfg = load_config(g.config);
  if (g.seed) {
    cfg.data.seed = *g.seed;
    cfg.model.seed = *g.seed;
    cfg.training.seed = *g.seed;
  }
  return cfg;
}

fs::path out_dir(const Globals& g, const ExperimentConfig& cfg) {
  fs::path dir = g.out.empty() ? fs::path(cfg.output_dir) : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

DualModel load_model(const std::string& path) {
  const auto text = read_text(path);
  try {
    return model_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw std::ios_base::failure("model '" + path + "' is not readable: " + e.what());
  }
}

void print_report(const EvalReport& r) {
  std::printf("%-12s mse %.6e", r.variant.c_str(), r.mse_sum);
  for (std::size_t a = 0; a < r.assets.size(); ++a) {
    if (r.assets[a].correlation) std::printf("  corr_%zu %.6f", a + 1, *r.assets[a].correlation);
    if (r.assets[a].scaled_mae) std::printf("  mae*_%zu %.3e", a + 1, *r.assets[a].scaled_mae);
  }
  std::printf("\n");
  if (r.regression) {
    const auto& g = *r.regression;
    for (std::size_t j = 0; j < g.regressors.size(); ++j) {
      std::printf("  %-10s %+.5f (se %.2e)", g.regressors[j].c_str(), g.result.estimates[j],
                  g.result.standard_errors[j]);
      if (g.true_null) std::printf("  p[true] %.3g", g.true_null->p_values[j]);
      std::printf("  p[0] %.3g\n", g.zero_null.p_values[j]);
    }
  }
}

int cmd_gen_data(const Globals& g) {
  const auto cfg = load(g);
  const auto dir = out_dir(g, cfg);
  const auto data = generate_experiment_data(cfg, g.threads);
  write_experiment_data(dir / "dataset.csv", data);
  nlohmann::json manifest = {{"command", "gen-data"},
                             {"config_hash", data.meta.config_hash},
                             {"seed", cfg.data.seed},
                             {"tool_version", kToolVersion}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::printf("wrote %zu rows to %s (config hash %s)\n", data.records.size(), (dir / "dataset.csv").c_str(),
              data.meta.config_hash.c_str());
  return kOk;
}

int cmd_train(const Globals& g, const std::string& dataset, const std::string& variant_name) {
  const auto cfg = load(g);
  const auto variant = parse_variant(variant_name);
  const auto data = read_experiment_data(dataset, data_hash(cfg));
  const auto sys = cfg.banking_system();
  auto model = DualModel::create(variant, sys.holdings, cfg.model.architecture, cfg.model.seed);
  model.set_fingerprint(data.meta.config_hash);
  const auto report = train(model, data.train(), cfg.train_config());
  const auto dir = out_dir(g, cfg);
  write_text(dir / ("model_" + variant_name + ".json"), to_json(model).dump() + "\n");
  std::ostringstream os;
  write_train_report_csv(os, report);
  write_text(dir / ("train_" + variant_name + ".csv"), os.str());
  nlohmann::json manifest = {{"command", "train"},
                             {"config_hash", data.meta.config_hash},
                             {"seed", cfg.training.seed},
                             {"variant", variant_name},
                             {"tool_version", kToolVersion}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::printf("%s: best epoch %zu, validation mse %.6e\n", variant_name.c_str(), report.best_epoch,
              report.best_val_loss);
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& model_path, const std::string& dataset) {
  const auto cfg = load(g);
  const auto model = load_model(model_path);
  const auto data = read_experiment_data(dataset, data_hash(cfg));
  if (model.banks() != data.meta.banks || model.assets() != data.meta.assets) {
    throw ContractError("model '" + model_path + "' is for " + std::to_string(model.banks()) + " banks and " +
                        std::to_string(model.assets()) + " assets, dataset has " + std::to_string(data.meta.banks) +
                        " and " + std::to_string(data.meta.assets));
  }
  const auto report = evaluate(model, data.test(), cfg.banking_system(), cfg.idf_spec(),
                               std::string(to_string(model.variant())));
  const auto dir = out_dir(g, cfg);
  const std::string v = report.variant;
  write_text(dir / ("report_" + v + ".json"), to_json(report).dump(2) + "\n");
  std::ostringstream curve, table;
  write_curve_csv(curve, report.curve);
  write_asset_table_csv(table, report);
  write_text(dir / ("curve_" + v + ".csv"), curve.str());
  write_text(dir / ("assets_" + v + ".csv"), table.str());
  if (report.regression) {
    std::ostringstream reg;
    write_regression_csv(reg, *report.regression);
    write_text(dir / ("regression_" + v + ".csv"), reg.str());
  }
  print_report(report);
  return kOk;
}

int cmd_curve(const Globals& g, const std::string& model_path, std::size_t points) {
  const auto cfg = load(g);
  const auto model = load_model(model_path);
  const auto sys = cfg.banking_system();
  const auto spec = cfg.idf_spec();
  const auto curve = reconstruct_idf(model, spec, liquidation_anchors(model, sys, spec), points);
  const auto dir = out_dir(g, cfg);
  std::ostringstream os;
  write_curve_csv(os, curve);
  const auto path = dir / ("curve_" + std::string(to_string(model.variant())) + ".csv");
  write_text(path, os.str());
  double worst = 0.0;
  for (const auto& c : curve) worst = std::max(worst, std::abs(c.p_hat - c.p_true));
  std::printf("wrote %zu points to %s, max |p_hat - p_true| = %.3e\n", curve.size(), path.c_str(), worst);
  return kOk;
}

int cmd_repro(const Globals& g, const std::string& name) {
  ExperimentConfig cfg = g.config.empty() ? case_config(name) : load(g);
  if (g.seed) {
    cfg.data.seed = *g.seed;
    cfg.model.seed = *g.seed;
    cfg.training.seed = *g.seed;
  }
  const fs::path dir = g.out.empty() ? fs::path(cfg.output_dir) : fs::path(g.out);
  const auto res = run_case(cfg, g.threads, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
  write_case_artifacts(res, dir);
  std::printf("%s\n%s", cfg.name.c_str(), comparison_table(res).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fire-sale contagion simulator and dual monotone network"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (TOML)");
  app.add_option("--seed", g.seed, "override the data, model and training seeds");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads for dataset generation")->check(CLI::PositiveNumber);

  std::string dataset, model_path, variant = "proposed", case_name;
  std::size_t points = 201;

  auto* gen = app.add_subcommand("gen-data", "simulate a dataset with a metadata sidecar");
  auto* tr = app.add_subcommand("train", "train one model variant on a dataset");
  tr->add_option("--data", dataset, "dataset CSV")->required();
  tr->add_option("--variant", variant, "proposed, linear_price or inclusive");
  auto* ev = app.add_subcommand("eval", "evaluate a model on a dataset's test rows");
  ev->add_option("--model", model_path, "model JSON")->required();
  ev->add_option("--data", dataset, "dataset CSV")->required();
  auto* cu = app.add_subcommand("curve", "export predicted and true inverse demand curves");
  cu->add_option("--model", model_path, "model JSON")->required();
  cu->add_option("--points", points, "grid points per asset")->check(CLI::Range(2, 100000));
  auto* re = app.add_subcommand("repro", "reproduce a case study end to end");
  re->add_option("case", case_name, "case name")->required()->check(CLI::IsMember(case_names()));
  auto* show = app.add_subcommand("config", "print a built-in case config as TOML");
  show->add_option("case", case_name, "case name")->required()->check(CLI::IsMember(case_names()));

  for (auto* sub : {gen, tr, ev, cu, re, show}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (tr->parsed()) return cmd_train(g, dataset, variant);
    if (ev->parsed()) return cmd_eval(g, model_path, dataset);
    if (cu->parsed()) return cmd_curve(g, model_path, points);
    if (re->parsed()) return cmd_repro(g, case_name);
    if (show->parsed()) {
      std::cout << to_toml(case_config(case_name));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kContract;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kContract;
  } catch (const TrainingDivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const DatasetFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
