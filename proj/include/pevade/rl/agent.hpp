#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "pevade/mutate/engine.hpp"
#include "pevade/rl/qnet.hpp"
#include "pevade/rl/replay.hpp"

namespace pevade {

struct AgentParams {
  double gamma = 0.95;
  double learning_rate = 1e-3;
  double tau_train = 1.0;   // Boltzmann temperature while learning
  double tau_eval = 0.05;   // near-greedy temperature for evaluation
  int hidden_dim = 64;
  int batch_size = 32;
  std::size_t replay_capacity = 5000;
  int target_refresh = 250;  // gradient updates between target-network syncs
  // Draw directly proportionally to shifted Q-values instead of softmax(Q/tau).
  bool proportional = false;
};

// Index into an action list drawn from softmax(q / tau), computed with
// max-subtraction. Temperatures at or below 1e-9 collapse to argmax.
int boltzmann_pick(const Eigen::VectorXd& q, double tau, RandomDraw& rng);

// Index drawn with probability proportional to q - min(q), floored so every
// action keeps a sliver of mass (uniform when all values tie).
int proportional_pick(const Eigen::VectorXd& q, RandomDraw& rng);

// DQN-style learner over a fixed action list. One gradient update per
// recorded transition once the buffer can fill a batch.
class DqnAgent {
 public:
  DqnAgent(int feature_dim, std::vector<ActionKind> actions, AgentParams params, std::uint64_t seed);

  ActionKind act(const Eigen::VectorXd& observation, double tau, RandomDraw& rng) const;
  void record(Transition t);

  nlohmann::json checkpoint() const;
  static DqnAgent from_checkpoint(const nlohmann::json& j);

  Eigen::VectorXd q_values(const Eigen::VectorXd& observation) const;
  const std::vector<ActionKind>& actions() const { return actions_; }
  int action_index(ActionKind kind) const;
  const AgentParams& params() const { return params_; }
  std::uint64_t updates() const { return updates_; }
  const QNetwork& network() const { return online_; }

 private:
  void learn();

  std::vector<ActionKind> actions_;
  AgentParams params_;
  QNetwork online_;
  QNetwork target_;
  AdamOptimizer opt_;
  ReplayBuffer buffer_;
  RandomDraw learn_rng_;
  std::uint64_t updates_ = 0;
};

}  // namespace pevade
