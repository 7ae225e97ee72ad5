#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pevade/env/blackbox.hpp"
#include "pevade/mutate/engine.hpp"
#include "pevade/util/rng.hpp"

namespace pevade {

struct EpisodeFinishedError : std::logic_error {
  using std::logic_error::logic_error;
};

struct NotEvadedError : std::logic_error {
  using std::logic_error::logic_error;
};

struct EnvParams {
  int max_turns = 10;
  double evasion_reward = 10.0;
};

enum class SkipReason { kNone, kInitiallyBenign, kMalformed };

struct ResetResult {
  bool skipped = false;
  SkipReason reason = SkipReason::kNone;
  Eigen::VectorXd observation;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
  bool evaded = false;
  bool identity = false;  // mutation was unavailable, failed, or had nothing to do
  int turn = 0;
  ActionKind action = ActionKind::kImportsAppend;
  bool label_malicious = true;
  std::size_t bytes_length = 0;
};

// Episodic evasion game: each step rewrites the working file with one
// mutation and asks the detector for a label. Exactly one query per step,
// plus one at reset to confirm the sample starts detected. A failed mutation
// becomes an identity step (zero reward, query still spent).
class EvasionEnv {
 public:
  EvasionEnv(MutationEngine engine, Blackbox& blackbox, EnvParams params = {})
      : engine_(std::move(engine)), blackbox_(&blackbox), params_(params) {
    if (params_.max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
    if (params_.evasion_reward <= 0.0) throw std::invalid_argument("evasion reward must be > 0");
  }

  ResetResult reset(const ByteBuf& sample, std::uint64_t episode_seed);
  StepResult step(ActionKind action);

  // Bytes of the evading variant; only meaningful once the episode evaded.
  const ByteBuf& harvest_evader() const;

  bool episode_active() const { return active_; }
  bool evaded() const { return evaded_; }
  int turn() const { return turn_; }
  const ByteBuf& current_bytes() const { return current_; }
  std::uint64_t total_steps() const { return total_steps_; }
  const EnvParams& params() const { return params_; }
  const MutationEngine& engine() const { return engine_; }

 private:
  MutationEngine engine_;
  Blackbox* blackbox_;
  EnvParams params_;
  RandomDraw rng_{0};
  ByteBuf current_;
  bool active_ = false;
  bool evaded_ = false;
  int turn_ = 0;
  std::uint64_t total_steps_ = 0;
};

}  // namespace pevade
