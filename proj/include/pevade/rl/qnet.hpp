#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "pevade/util/rng.hpp"

namespace pevade {

// Training abort signal: the TD loss left the reals (divergence, bad input).
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Component-wise sign(x) * log1p(|x|); keeps byte counts and file sizes from
// swamping the normalized histogram features.
Eigen::VectorXd scale_features(const Eigen::VectorXd& raw);

struct Transition {
  Eigen::VectorXd state;       // raw (unscaled) features
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;  // raw features
  bool done = false;
};

// One hidden layer, ReLU, linear head: Q(s, .) for every action.
struct QNetwork {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // actions x hidden
  Eigen::VectorXd b2;

  static QNetwork init(int input_dim, int hidden_dim, int action_count, RandomDraw& rng);
  Eigen::VectorXd forward(const Eigen::VectorXd& scaled_input) const;
  int input_dim() const { return static_cast<int>(w1.cols()); }
  int action_count() const { return static_cast<int>(w2.rows()); }
};

struct QGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static QGradients zeros_like(const QNetwork& net);
};

// Mean squared one-step TD error over the batch, taken actions only:
//   target_i = r_i + gamma * max_a Q_target(s'_i, a) * (1 - done_i)
double td_loss(const QNetwork& online, const QNetwork& target,
               const std::vector<const Transition*>& batch, double gamma);

// Analytic gradient of td_loss with respect to the online parameters.
QGradients td_gradients(const QNetwork& online, const QNetwork& target,
                        const std::vector<const Transition*>& batch, double gamma,
                        double* loss_out = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(QNetwork& net, const QGradients& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  QGradients m_, v_;
  bool initialized_ = false;
};

}  // namespace pevade
