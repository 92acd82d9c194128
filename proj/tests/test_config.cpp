#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "firesale/config.hpp"
#include "firesale/experiment.hpp"

using namespace firesale;
namespace fs = std::filesystem;

namespace {

std::string issues_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

ExperimentConfig tiny(const std::string& name = "case1-linear") {
  auto c = case_config(name);
  c.data.train_count = 40;
  c.data.test_count = 10;
  return c;
}

fs::path scratch(const std::string& leaf) {
  const auto dir = fs::temp_directory_path() / ("firesale_config_test_" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, ShippedFilesEqualBuiltInCases) {
  for (const auto& name : case_names()) {
    const auto path = std::string(FIRESALE_SOURCE_DIR) + "/configs/" + name + ".toml";
    const auto cfg = load_config(path);
    EXPECT_TRUE(cfg == case_config(name)) << name;
    EXPECT_EQ(cfg.name, name);
  }
}

TEST(Config, TomlRoundTrip) {
  for (const auto& name : case_names()) {
    const auto c = case_config(name);
    EXPECT_TRUE(parse_config(to_toml(c)) == c) << name;
  }
  auto c = case_config("case1-exp");
  c.system.leverage_sensitivity = 0.123456789;
  c.idf.base_price = {1.25};
  c.idf.impact = {0.2};
  c.model.variants = {Variant::Inclusive};
  c.model.architecture.liquidation_hidden = {7};
  c.training.learning_rate = 3.3e-4;
  const auto back = parse_config(to_toml(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(*back.system.leverage_sensitivity, 0.123456789);
  EXPECT_EQ(back.training.learning_rate, 3.3e-4);
}

TEST(Config, DefaultsApplyToAbsentKeys) {
  const auto c = parse_config("name = \"x\"\n");
  EXPECT_EQ(c.data.train_count, 10000u);
  EXPECT_EQ(c.data.test_count, 2000u);
  EXPECT_EQ(*c.system.leverage_sensitivity, 0.1);
  EXPECT_EQ(c.training.learning_rate, 1e-3);
}

TEST(Config, LiabilityOrderErrorNamesTheField) {
  const auto msg = issues_of("[system]\nliability_low = 0.9\nliability_high = 0.6\n");
  EXPECT_NE(msg.find("system.liability_low"), std::string::npos) << msg;
}

TEST(Config, ProblemsAreItemized) {
  const auto msg = issues_of("[system]\ncapital_threshold = 0.7\n[training]\nlearning_rate = -1.0\nbatch_size = 0\n");
  EXPECT_NE(msg.find("system.capital_threshold"), std::string::npos) << msg;
  EXPECT_NE(msg.find("training.learning_rate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("training.batch_size"), std::string::npos) << msg;
  EXPECT_NE(issues_of("[training]\nprice_decay = -0.5\n").find("training.price_decay"), std::string::npos);
}

TEST(Config, LinearCasesPreferAnAffinePriceMap) {
  for (const auto& name : case_names()) {
    const auto c = case_config(name);
    const bool linear = c.idf.kind == IdfKind::Linear || c.idf.kind == IdfKind::LinearCross;
    EXPECT_EQ(c.model.architecture.price_skip, linear) << name;
    EXPECT_EQ(c.training.price_decay, linear ? 1.0 : 0.0) << name;
  }
}

TEST(Config, UnknownKeysAndBadTypesAreRejected) {
  EXPECT_NE(issues_of("[training]\nlearning_rat = 0.1\n").find("training.learning_rat"), std::string::npos);
  EXPECT_NE(issues_of("[bogus]\nx = 1\n").find("bogus"), std::string::npos);
  EXPECT_NE(issues_of("[data]\nseed = \"abc\"\n").find("data.seed"), std::string::npos);
  EXPECT_NE(issues_of("[idf]\nkind = \"cubic\"\n").find("idf.kind"), std::string::npos);
  EXPECT_NE(issues_of("[model]\nvariants = [\"fancy\"]\n").find("model.variants"), std::string::npos);
  EXPECT_NE(issues_of("[data\n").find(":1:"), std::string::npos);
}

TEST(Config, CrossImpactShapeIsChecked) {
  const auto msg = issues_of(
      "[system]\nholdings = [[0.4, 0.6], [0.6, 0.4]]\n[idf]\nkind = \"linear_cross\"\ncross_impact = [[0.15]]\n");
  EXPECT_NE(msg.find("idf.cross_impact"), std::string::npos) << msg;
}

TEST(Config, NegativeLinearPricesAreRejected) {
  const auto msg = issues_of("[idf]\nkind = \"linear\"\nimpact = 0.9\n");
  EXPECT_NE(msg.find("idf"), std::string::npos) << msg;
}

TEST(Config, CalibratedSensitivity) {
  EXPECT_DOUBLE_EQ(case_config("case1-linear").banking_system().leverage_sensitivity, 0.25 / 0.7);
  EXPECT_DOUBLE_EQ(case_config("case2-nocross").banking_system().leverage_sensitivity, 0.3 / 0.85);
  EXPECT_DOUBLE_EQ(case_config("case2-cross").banking_system().leverage_sensitivity, 0.3 / 0.835);
  auto c = case_config("case1-linear");
  c.system.leverage_sensitivity = 0.1;
  EXPECT_EQ(c.banking_system().leverage_sensitivity, 0.1);
}

TEST(Config, DataHashCoversOnlyDataSections) {
  const auto base = case_config("case1-linear");
  auto c = base;
  c.training.learning_rate = 5e-4;
  c.model.architecture.price_hidden = {4};
  c.output_dir = "elsewhere";
  EXPECT_EQ(data_hash(c), data_hash(base));
  c = base;
  c.data.seed = 43;
  EXPECT_NE(data_hash(c), data_hash(base));
  c = base;
  c.idf.kind = IdfKind::Exponential;
  EXPECT_NE(data_hash(c), data_hash(base));
  EXPECT_EQ(data_hash(base).size(), 16u);
}

TEST(Config, UnknownCaseIsRejected) { EXPECT_THROW(case_config("case3"), std::invalid_argument); }

TEST(Experiment, DatasetAndSidecarRoundTrip) {
  const auto dir = scratch("roundtrip");
  const auto cfg = tiny();
  const auto data = generate_experiment_data(cfg);
  ASSERT_EQ(data.records.size(), 50u);
  write_experiment_data(dir / "d.csv", data);
  const auto side = nlohmann::json::parse(read_text(dir / "d.json"));
  EXPECT_EQ(side.at("config_hash"), data_hash(cfg));
  EXPECT_EQ(side.at("seed"), 42);
  EXPECT_EQ(side.at("split").at("train"), nlohmann::json({0, 40}));
  EXPECT_EQ(side.at("split").at("test"), nlohmann::json({40, 50}));
  EXPECT_EQ(side.at("tool_version"), kToolVersion);
  const auto back = read_experiment_data(dir / "d.csv", data_hash(cfg));
  EXPECT_EQ(back.train().size(), 40u);
  EXPECT_EQ(back.test().size(), 10u);
  EXPECT_EQ(back.test().front().p, data.records[40].p);
  EXPECT_EQ(back.meta.leverage_sensitivity, data.meta.leverage_sensitivity);
}

TEST(Experiment, HashMismatchIsAContractViolation) {
  const auto dir = scratch("mismatch");
  const auto cfg = tiny();
  write_experiment_data(dir / "d.csv", generate_experiment_data(cfg));
  auto other = cfg;
  other.data.seed = 1;
  try {
    (void)read_experiment_data(dir / "d.csv", data_hash(other));
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(data_hash(cfg)), std::string::npos);
    EXPECT_NE(msg.find(data_hash(other)), std::string::npos);
  }
}

TEST(Experiment, TruncatedDatasetIsRejected) {
  const auto dir = scratch("truncated");
  const auto cfg = tiny();
  write_experiment_data(dir / "d.csv", generate_experiment_data(cfg));
  auto text = read_text(dir / "d.csv");
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  write_text(dir / "d.csv", text);
  EXPECT_THROW(read_experiment_data(dir / "d.csv", data_hash(cfg)), ContractError);
}

TEST(Experiment, TrainSplitPrecedesTestSplit) {
  const auto cfg = tiny();
  const auto a = generate_experiment_data(cfg);
  auto bigger = cfg;
  bigger.data.test_count = 20;
  const auto b = generate_experiment_data(bigger);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.records[i].s, b.records[i].s);
}
