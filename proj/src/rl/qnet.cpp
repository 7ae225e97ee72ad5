#include "pevade/rl/qnet.hpp"

#include <cmath>
#include <stdexcept>

namespace pevade {

Eigen::VectorXd scale_features(const Eigen::VectorXd& raw) {
  return raw.array().sign() * raw.array().abs().log1p();
}

QNetwork QNetwork::init(int input_dim, int hidden_dim, int action_count, RandomDraw& rng) {
  QNetwork net;
  const auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols, double bound) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.real() - 1.0) * bound;
    return m;
  };
  net.w1 = uniform(hidden_dim, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  net.b1 = Eigen::VectorXd::Zero(hidden_dim);
  net.w2 = uniform(action_count, hidden_dim, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  net.b2 = Eigen::VectorXd::Zero(action_count);
  return net;
}

Eigen::VectorXd QNetwork::forward(const Eigen::VectorXd& scaled_input) const {
  const Eigen::VectorXd h = (w1 * scaled_input + b1).cwiseMax(0.0);
  return w2 * h + b2;
}

QGradients QGradients::zeros_like(const QNetwork& net) {
  QGradients g;
  g.w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(net.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
  g.b2 = Eigen::VectorXd::Zero(net.b2.size());
  return g;
}

namespace {

double td_target(const QNetwork& target, const Transition& t, double gamma) {
  if (t.done || gamma == 0.0) return t.reward;
  return t.reward + gamma * target.forward(scale_features(t.next_state)).maxCoeff();
}

}  // namespace

double td_loss(const QNetwork& online, const QNetwork& target,
               const std::vector<const Transition*>& batch, double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double loss = 0.0;
  for (const Transition* t : batch) {
    const double q = online.forward(scale_features(t->state))(t->action);
    const double diff = q - td_target(target, *t, gamma);
    loss += diff * diff;
  }
  return loss / static_cast<double>(batch.size());
}

QGradients td_gradients(const QNetwork& online, const QNetwork& target,
                        const std::vector<const Transition*>& batch, double gamma,
                        double* loss_out) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  QGradients grads = QGradients::zeros_like(online);
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const Transition* t : batch) {
    const Eigen::VectorXd x = scale_features(t->state);
    const Eigen::VectorXd z1 = online.w1 * x + online.b1;
    const Eigen::VectorXd h = z1.cwiseMax(0.0);
    const double q = online.w2.row(t->action).dot(h) + online.b2(t->action);

    const double diff = q - td_target(target, *t, gamma);
    loss += diff * diff;
    const double dq = 2.0 * diff * inv_batch;

    grads.w2.row(t->action) += dq * h.transpose();
    grads.b2(t->action) += dq;
    Eigen::VectorXd dz1 = dq * online.w2.row(t->action).transpose();
    for (Eigen::Index i = 0; i < dz1.size(); ++i)
      if (z1(i) <= 0.0) dz1(i) = 0.0;
    grads.w1.noalias() += dz1 * x.transpose();
    grads.b1 += dz1;
  }
  if (!std::isfinite(loss)) throw NonFiniteLossError("TD loss is not finite");
  if (loss_out) *loss_out = loss * inv_batch;
  return grads;
}

void AdamOptimizer::step(QNetwork& net, const QGradients& grads) {
  if (!initialized_) {
    m_ = QGradients::zeros_like(net);
    v_ = QGradients::zeros_like(net);
    initialized_ = true;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  const auto update = [&](Eigen::MatrixXd& param, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                          const Eigen::MatrixXd& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * g.array().square().matrix();
    param.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  };
  const auto update_vec = [&](Eigen::VectorXd& param, Eigen::VectorXd& m, Eigen::VectorXd& v,
                              const Eigen::VectorXd& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * g.array().square().matrix();
    param.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  };
  update(net.w1, m_.w1, v_.w1, grads.w1);
  update_vec(net.b1, m_.b1, v_.b1, grads.b1);
  update(net.w2, m_.w2, v_.w2, grads.w2);
  update_vec(net.b2, m_.b2, v_.b2, grads.b2);
}

}  // namespace pevade
