#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "pevade/model/gbdt.hpp"
#include "pevade/model/metrics.hpp"
#include "pevade/util/rng.hpp"

using namespace pevade;

namespace {

// Two clusters separated along feature 0 with a clean margin.
void make_separable(int per_class, Eigen::MatrixXd* x, std::vector<int>* y, std::uint64_t seed) {
  RandomDraw rng(seed);
  const int n = per_class * 2;
  x->resize(n, 3);
  y->assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const bool mal = i >= per_class;
    (*x)(i, 0) = mal ? 0.6 + 0.4 * rng.real() : 0.4 * rng.real();
    (*x)(i, 1) = rng.real();           // noise
    (*x)(i, 2) = mal ? rng.real() : 0; // weak hint
    (*y)[static_cast<std::size_t>(i)] = mal ? 1 : 0;
  }
}

nlohmann::json leaf(double v) {
  return {{"f", -1}, {"t", 0.0}, {"l", -1}, {"r", -1}, {"v", v}};
}

}  // namespace

TEST_CASE("logistic is the standard sigmoid") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(40.0) == doctest::Approx(1.0));
  CHECK(logistic(-40.0) == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : {-3.0, -0.5, 0.25, 2.0})
    CHECK(logistic(-v) == doctest::Approx(1.0 - logistic(v)));
  CHECK(logistic(1.0) > logistic(0.5));
}

TEST_CASE("training separates a clean two-cluster problem") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(100, &x, &y, 11);
  GbdtParams params;
  params.rounds = 30;
  params.max_depth = 3;
  const GbdtModel model = GbdtModel::train(x, y, params);

  std::vector<double> scores;
  for (int i = 0; i < x.rows(); ++i) scores.push_back(model.score(Eigen::VectorXd(x.row(i))));
  CHECK(roc_auc(scores, y) == 1.0);
  CHECK(testpe::oracle_auc(scores, y) == 1.0);
  for (double s : scores) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
  CHECK(model.feature_dim() == 3);
  CHECK_FALSE(model.trees().empty());
}

TEST_CASE("training loss never increases between rounds") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(60, &x, &y, 5);
  GbdtParams params;
  params.rounds = 40;
  params.max_depth = 4;
  std::vector<double> losses;
  GbdtModel::train(x, y, params, &losses);
  REQUIRE(losses.size() == 40);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-9);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("degenerate and mismatched training inputs are typed errors") {
  Eigen::MatrixXd x(4, 2);
  x.setRandom();
  CHECK_THROWS_AS(GbdtModel::train(x, {0, 0, 0, 0}, GbdtParams{}), DegenerateDataError);
  CHECK_THROWS_AS(GbdtModel::train(x, {1, 1, 1, 1}, GbdtParams{}), DegenerateDataError);
  CHECK_THROWS_AS(GbdtModel::train(x, {0, 1, 0}, GbdtParams{}), std::invalid_argument);

  Eigen::MatrixXd empty(0, 2);
  CHECK_THROWS_AS(GbdtModel::train(empty, {}, GbdtParams{}), std::invalid_argument);
}

TEST_CASE("scoring a wrong-length vector is a typed error") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(20, &x, &y, 3);
  GbdtParams params;
  params.rounds = 3;
  const GbdtModel model = GbdtModel::train(x, y, params);
  Eigen::VectorXd wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(model.score(wrong), DimensionMismatchError);
}

TEST_CASE("constant features degrade to leaf-only trees without failing") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(10, 2, 3.25);
  std::vector<int> y = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  GbdtParams params;
  params.rounds = 5;
  const GbdtModel model = GbdtModel::train(x, y, params);
  const double s = model.score(Eigen::VectorXd(x.row(0)));
  CHECK(s > 0.0);
  CHECK(s < 1.0);
}

TEST_CASE("prediction walks the tree with boundary-inclusive left splits") {
  nlohmann::json j = {
      {"format", "pevade-gbdt"},
      {"version", 1},
      {"feature_dim", 2},
      {"base_score", 0.0},
      {"learning_rate", 1.0},
      {"threshold", 0.5},
      {"trees",
       {{{"nodes",
          {{{"f", 0}, {"t", 0.5}, {"l", 1}, {"r", 2}, {"v", 0.0}}, leaf(-2.0), leaf(2.0)}}}}},
  };
  const GbdtModel model = GbdtModel::from_json(j);

  Eigen::VectorXd v(2);
  v << 0.4, 9.0;
  CHECK(model.score(v) == logistic(-2.0));
  v << 0.5, 9.0;  // exactly on the threshold goes left
  CHECK(model.score(v) == logistic(-2.0));
  v << std::nextafter(0.5, 1.0), 9.0;
  CHECK(model.score(v) == logistic(2.0));

  // Ensemble, base score and shrinkage all enter the margin.
  j["trees"].push_back({{"nodes", {leaf(0.7)}}});
  j["base_score"] = 0.25;
  j["learning_rate"] = 0.1;
  const GbdtModel two = GbdtModel::from_json(j);
  v << 1.0, 0.0;
  CHECK(two.score(v) == logistic(0.25 + 0.1 * (2.0 + 0.7)));
}

TEST_CASE("maliciousness threshold is boundary inclusive") {
  nlohmann::json j = {{"format", "pevade-gbdt"}, {"version", 1},      {"feature_dim", 1},
                      {"base_score", 0.0},       {"learning_rate", 1.0}, {"threshold", 0.5},
                      {"trees", nlohmann::json::array()}};
  GbdtModel model = GbdtModel::from_json(j);  // empty ensemble scores 0.5 everywhere
  Eigen::VectorXd v(1);
  v << 0.0;
  CHECK(model.score(v) == 0.5);
  model.set_threshold(0.5);
  CHECK(model.is_malicious(v));
  model.set_threshold(std::nextafter(0.5, 1.0));
  CHECK_FALSE(model.is_malicious(v));
}

TEST_CASE("threshold calibration finds the smallest admissible score") {
  const std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK(GbdtModel::calibrate_threshold(scores, labels, 0.0) == 0.8);
  CHECK(GbdtModel::calibrate_threshold(scores, labels, 0.49) == 0.8);
  CHECK(GbdtModel::calibrate_threshold(scores, labels, 0.5) == 0.2);
  CHECK(GbdtModel::calibrate_threshold(scores, labels, 1.0) == 0.1);

  // Candidate order is immaterial.
  CHECK(GbdtModel::calibrate_threshold({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, 0.0) == 0.8);

  // Fully tied scores admit no cut: the threshold lands one ulp past the max.
  const double t = GbdtModel::calibrate_threshold({0.5, 0.5, 0.5}, {0, 0, 1}, 0.0);
  CHECK(t == std::nextafter(0.5, std::numeric_limits<double>::infinity()));
  CHECK(false_positive_rate({0.5, 0.5}, {0, 0}, t) == 0.0);

  CHECK_THROWS_AS(GbdtModel::calibrate_threshold({0.5, 0.6}, {0, 0}, 0.1), DegenerateDataError);
  CHECK_THROWS_AS(GbdtModel::calibrate_threshold({}, {}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(GbdtModel::calibrate_threshold({0.5}, {0, 1}, 0.1), std::invalid_argument);
}

TEST_CASE("calibrated threshold meets the rate it promises") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(150, &x, &y, 23);
  GbdtParams params;
  params.rounds = 15;
  GbdtModel model = GbdtModel::train(x, y, params);
  std::vector<double> scores;
  for (int i = 0; i < x.rows(); ++i) scores.push_back(model.score(Eigen::VectorXd(x.row(i))));
  for (double target : {0.0, 0.01, 0.1, 0.25}) {
    const double t = GbdtModel::calibrate_threshold(scores, y, target);
    CHECK(false_positive_rate(scores, y, t) <= target);
  }
}

TEST_CASE("roc_auc agrees with the quadratic rank-free oracle") {
  RandomDraw rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    const std::size_t n = 30 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng.below(8)) / 8.0);  // force score ties
      labels.push_back(rng.below(2) ? 1 : 0);
    }
    bool both = false;
    if (std::count(labels.begin(), labels.end(), 1) > 0 &&
        std::count(labels.begin(), labels.end(), 0) > 0)
      both = true;
    if (!both) continue;
    CHECK(roc_auc(scores, labels) == doctest::Approx(testpe::oracle_auc(scores, labels)).epsilon(1e-12));
  }
  CHECK(roc_auc({0.3, 0.7}, {1, 1}) == 0.5);
  CHECK(roc_auc({0.3, 0.7}, {0, 0}) == 0.5);
  CHECK(roc_auc({0.1, 0.9}, {0, 1}) == 1.0);
  CHECK(roc_auc({0.9, 0.1}, {0, 1}) == 0.0);
}

TEST_CASE("log loss and false positive rate basics") {
  CHECK(log_loss({0.5, 0.5}, {0, 1}) == doctest::Approx(std::log(2.0)));
  CHECK(log_loss({0.0, 1.0}, {0, 1}) < 1e-6);           // clamped, finite
  CHECK(std::isfinite(log_loss({1.0, 0.0}, {0, 1})));   // confidently wrong
  CHECK(log_loss({0.9}, {1}) == doctest::Approx(-std::log(0.9)));

  CHECK(false_positive_rate({0.2, 0.9}, {0, 0}, 0.9) == 0.5);  // boundary inclusive
  CHECK(false_positive_rate({0.2, 0.9}, {0, 0}, 0.91) == 0.0);
  CHECK(false_positive_rate({0.2, 0.9, 0.99}, {0, 0, 1}, 0.1) == 1.0);
}

TEST_CASE("serialization reproduces scores bit for bit") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(80, &x, &y, 47);
  GbdtParams params;
  params.rounds = 25;
  params.max_depth = 4;
  GbdtModel model = GbdtModel::train(x, y, params);
  model.set_threshold(0.731);

  const GbdtModel copy = GbdtModel::from_json(model.to_json());
  CHECK(copy.threshold() == 0.731);
  CHECK(copy.feature_dim() == model.feature_dim());
  CHECK(copy.base_score() == model.base_score());
  CHECK(copy.trees().size() == model.trees().size());

  const GbdtModel* via_file = nullptr;
  const std::string path = "/tmp/pevade-test-model.json";
  model.save(path);
  const GbdtModel loaded = GbdtModel::load(path);
  via_file = &loaded;

  RandomDraw rng(53);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd v(3);
    v << rng.real() * 2 - 1, rng.real() * 2 - 1, rng.real() * 2 - 1;
    const double s = model.score(v);
    CHECK(copy.score(v) == s);
    CHECK(via_file->score(v) == s);
  }
  std::remove(path.c_str());
}

TEST_CASE("model files with foreign format or version are refused") {
  nlohmann::json j = {{"format", "other"}, {"version", 1}};
  CHECK_THROWS_AS(GbdtModel::from_json(j), std::runtime_error);
  j["format"] = "pevade-gbdt";
  j["version"] = 2;
  CHECK_THROWS_AS(GbdtModel::from_json(j), std::runtime_error);
  CHECK_THROWS_AS(GbdtModel::load("/tmp/definitely-missing-model.json"), std::runtime_error);
}

TEST_CASE("default decision threshold is conservative") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  make_separable(20, &x, &y, 2);
  GbdtParams params;
  params.rounds = 2;
  const GbdtModel model = GbdtModel::train(x, y, params);
  CHECK(model.threshold() == 0.9);
}
