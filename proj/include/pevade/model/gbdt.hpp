#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace pevade {

// Training or calibration data with only one class present.
struct DegenerateDataError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GbdtParams {
  int rounds = 100;
  int max_depth = 5;
  double learning_rate = 0.1;
  double lambda = 1.0;
  int max_bins = 256;
  double leaf_clamp = 4.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(const double* x) const;
};

// Gradient-boosted decision trees with logistic loss, trained on 256-bin
// quantile-coded features. Scores are probabilities in (0, 1); a file is
// flagged malicious when score >= threshold (boundary inclusive).
class GbdtModel {
 public:
  // x: one row per sample, one column per feature. y: 0 benign, 1 malicious.
  // round_losses, when given, receives mean training log-loss after each round.
  static GbdtModel train(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         const GbdtParams& params, std::vector<double>* round_losses = nullptr);

  double score(const Eigen::VectorXd& features) const;
  double score(const double* features) const;
  bool is_malicious(const Eigen::VectorXd& features) const { return score(features) >= threshold_; }

  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }

  // Smallest validation score whose false-positive rate over the label-0
  // rows does not exceed max_fpr; one past the largest score when none
  // qualifies. Needs both classes present.
  static double calibrate_threshold(std::vector<double> scores, const std::vector<int>& labels,
                                    double max_fpr);

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static GbdtModel load(const std::string& path);

  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<Tree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }

 private:
  std::size_t feature_dim_ = 0;
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  double threshold_ = 0.9;
  std::vector<Tree> trees_;
};

double logistic(double x);

}  // namespace pevade
