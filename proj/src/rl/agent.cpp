#include "pevade/rl/agent.hpp"

#include <cmath>
#include <stdexcept>

#include "pevade/util/fnv.hpp"

namespace pevade {

int boltzmann_pick(const Eigen::VectorXd& q, double tau, RandomDraw& rng) {
  if (q.size() == 0) throw std::invalid_argument("empty action values");
  if (tau <= 1e-9) {
    int best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
      if (q(i) > q(best)) best = static_cast<int>(i);
    return best;
  }
  const Eigen::ArrayXd z = (q.array() - q.maxCoeff()) / tau;
  Eigen::ArrayXd p = z.exp();
  p /= p.sum();
  const double u = rng.real();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    cum += p(i);
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

DqnAgent::DqnAgent(int feature_dim, std::vector<ActionKind> actions, AgentParams params,
                   std::uint64_t seed)
    : actions_(std::move(actions)),
      params_(params),
      online_(),
      target_(),
      opt_(params.learning_rate),
      buffer_(params.replay_capacity),
      learn_rng_(mix_seed(seed, "learn")) {
  if (actions_.empty()) throw std::invalid_argument("agent needs at least one action");
  RandomDraw init_rng(mix_seed(seed, "init"));
  online_ = QNetwork::init(feature_dim, params_.hidden_dim, static_cast<int>(actions_.size()), init_rng);
  target_ = online_;
}

int proportional_pick(const Eigen::VectorXd& q, RandomDraw& rng) {
  if (q.size() == 0) throw std::invalid_argument("empty action values");
  const double lo = q.minCoeff();
  const double span = q.maxCoeff() - lo;
  const double floor = span > 0.0 ? span * 1e-6 : 1.0;
  Eigen::ArrayXd w = q.array() - lo + floor;
  w /= w.sum();
  const double u = rng.real();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    cum += w(i);
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

ActionKind DqnAgent::act(const Eigen::VectorXd& observation, double tau, RandomDraw& rng) const {
  const Eigen::VectorXd q = online_.forward(scale_features(observation));
  const int pick = params_.proportional ? proportional_pick(q, rng) : boltzmann_pick(q, tau, rng);
  return actions_[static_cast<std::size_t>(pick)];
}

Eigen::VectorXd DqnAgent::q_values(const Eigen::VectorXd& observation) const {
  return online_.forward(scale_features(observation));
}

int DqnAgent::action_index(ActionKind kind) const {
  for (std::size_t i = 0; i < actions_.size(); ++i)
    if (actions_[i] == kind) return static_cast<int>(i);
  throw std::invalid_argument("action not in agent's action set");
}

void DqnAgent::record(Transition t) {
  buffer_.push(std::move(t));
  learn();
}

void DqnAgent::learn() {
  if (buffer_.size() < static_cast<std::size_t>(params_.batch_size)) return;
  const auto batch = buffer_.sample(static_cast<std::size_t>(params_.batch_size), learn_rng_);
  const QGradients grads = td_gradients(online_, target_, batch, params_.gamma);
  opt_.step(online_, grads);
  ++updates_;
  if (params_.target_refresh > 0 && updates_ % static_cast<std::uint64_t>(params_.target_refresh) == 0)
    target_ = online_;
}

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

nlohmann::json DqnAgent::checkpoint() const {
  nlohmann::json actions = nlohmann::json::array();
  for (auto a : actions_) actions.push_back(std::string(action_name(a)));
  return {{"format", "pevade-agent"},
          {"version", 1},
          {"actions", std::move(actions)},
          {"updates", updates_},
          {"params",
           {{"gamma", params_.gamma},
            {"learning_rate", params_.learning_rate},
            {"tau_train", params_.tau_train},
            {"tau_eval", params_.tau_eval},
            {"hidden_dim", params_.hidden_dim},
            {"batch_size", params_.batch_size},
            {"replay_capacity", params_.replay_capacity},
            {"target_refresh", params_.target_refresh},
            {"proportional", params_.proportional}}},
          {"w1", mat_json(online_.w1)},
          {"b1", vec_json(online_.b1)},
          {"w2", mat_json(online_.w2)},
          {"b2", vec_json(online_.b2)}};
}

DqnAgent DqnAgent::from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "pevade-agent") throw std::runtime_error("not an agent checkpoint");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported checkpoint version");
  std::vector<ActionKind> actions;
  for (const auto& name : j.at("actions")) {
    const auto kind = action_from_name(name.get<std::string>());
    if (!kind) throw std::runtime_error("unknown action in checkpoint");
    actions.push_back(*kind);
  }
  const auto& p = j.at("params");
  AgentParams params;
  params.gamma = p.at("gamma").get<double>();
  params.learning_rate = p.at("learning_rate").get<double>();
  params.tau_train = p.at("tau_train").get<double>();
  params.tau_eval = p.at("tau_eval").get<double>();
  params.hidden_dim = p.at("hidden_dim").get<int>();
  params.batch_size = p.at("batch_size").get<int>();
  params.replay_capacity = p.at("replay_capacity").get<std::size_t>();
  params.target_refresh = p.at("target_refresh").get<int>();
  params.proportional = p.at("proportional").get<bool>();

  const Eigen::MatrixXd w1 = mat_from_json(j.at("w1"));
  DqnAgent agent(static_cast<int>(w1.cols()), std::move(actions), params, 0);
  agent.online_.w1 = w1;
  agent.online_.b1 = vec_from_json(j.at("b1"));
  agent.online_.w2 = mat_from_json(j.at("w2"));
  agent.online_.b2 = vec_from_json(j.at("b2"));
  agent.target_ = agent.online_;
  agent.updates_ = j.at("updates").get<std::uint64_t>();
  return agent;
}

}  // namespace pevade
