#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cbpsim/calibration.hpp"
#include "cbpsim/commands.hpp"
#include "cbpsim/config.hpp"
#include "cbpsim/stats.hpp"

namespace cbpsim {
namespace {

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.preset = "bernoulli-rounding";
  c.alpha = 0.25;
  c.m = 2.5;
  c.offspring = "geometric";
  c.n_values = {7, 70};
  c.ks_threshold = 0.03;
  c.sigma2 = 4.0;
  c.checks = {"lemma1", "moments"};
  c.formats = {"json"};
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_EQ(config_from_json(to_json(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, PartialOverlayKeepsDefaults) {
  const ExperimentConfig c = config_from_json(nlohmann::json{{"alpha", 3.0}, {"ks_threshold", nullptr}});
  ExperimentConfig expected;
  expected.alpha = 3.0;
  EXPECT_EQ(c, expected);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"alhpa", 1.0}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json{{"alpha", "one"}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST(Config, PresetsBuildCriticalModels) {
  ExperimentConfig c;
  EXPECT_THROW(make_model(c), std::invalid_argument);  // missing preset
  c.preset = "poisson-immigration";
  const CbpModel p1 = make_model(c);
  EXPECT_EQ(p1.m(), 1.0);
  EXPECT_EQ(p1.sigma2(), 1.0);
  EXPECT_EQ(classify(p1), Criticality::critical);
  c.m = 2.0;
  EXPECT_THROW(make_model(c), std::invalid_argument);
  c.preset = "bernoulli-rounding";
  for (const char* family : {"poisson", "geometric", "two-point"}) {
    c.offspring = family;
    const CbpModel p2 = make_model(c);
    EXPECT_EQ(p2.m(), 2.0);
    EXPECT_EQ(classify(p2), Criticality::critical);
  }
  c.offspring = "deterministic";
  EXPECT_EQ(make_model(c).sigma2(), 0.0);
  c.offspring = "cauchy";
  EXPECT_THROW(make_model(c), std::invalid_argument);
  c.offspring = "poisson";
  c.z0_law = "uniform";
  EXPECT_THROW(make_model(c), std::invalid_argument);
  c.z0_law = "poisson";
  c.z0 = 4;
  EXPECT_EQ(make_model(c).initial().variance(), 4.0);
  c.preset = "nope";
  EXPECT_THROW(make_model(c), std::invalid_argument);
}

TEST(Config, ThresholdSourceOrder) {
  ExperimentConfig c;
  c.preset = "poisson-immigration";
  ConvergenceStudy s = make_study(c);
  ASSERT_TRUE(s.ks_threshold.has_value());
  EXPECT_EQ(*s.ks_threshold, kKsCalibration.threshold);
  c.ks_threshold = 0.05;
  s = make_study(c);
  EXPECT_EQ(*s.ks_threshold, 0.05);
  EXPECT_EQ(s.ks_threshold_source, "config");
  c.ks_threshold.reset();
  c.replicates = 500;  // no longer the calibrated configuration
  s = make_study(c);
  EXPECT_DOUBLE_EQ(*s.ks_threshold, ks_critical_value(500, 5000));
}

// The constants compiled into the library must match the committed
// calibration record they were derived from.
TEST(Calibration, HeaderMatchesRecord) {
  std::ifstream in(std::string(CBPSIM_SOURCE_DIR) + "/calibration/ks_n1250.json");
  ASSERT_TRUE(in.good());
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto ks = j.at("ks").get<std::vector<double>>();
  ASSERT_EQ(ks.size(), 20u);
  const double med = median(ks);
  const double spread = mad(ks);
  EXPECT_NEAR(kKsCalibration.median, med, 1e-9);
  EXPECT_NEAR(kKsCalibration.mad, spread, 1e-9);
  EXPECT_NEAR(kKsCalibration.threshold, med + 3 * spread, 1e-9);
  EXPECT_EQ(kKsCalibration.n, j.at("n").get<std::size_t>());
  EXPECT_EQ(kKsCalibration.replicates, j.at("replicates").get<std::size_t>());
  EXPECT_EQ(kKsCalibration.reference_factor, j.at("reference_factor").get<std::size_t>());
}

}  // namespace
}  // namespace cbpsim
