#include "pevade/env/env.hpp"

#include <stdexcept>

#include "pevade/features/extract.hpp"
#include "pevade/pe/errors.hpp"

namespace pevade {

bool ModelBlackbox::classify(const ByteBuf& bytes) {
  try {
    return model_.is_malicious(extract_features(bytes));
  } catch (const std::exception&) {
    return true;
  }
}

ResetResult EvasionEnv::reset(const ByteBuf& sample, std::uint64_t episode_seed) {
  active_ = false;
  evaded_ = false;
  turn_ = 0;
  ResetResult result;
  try {
    parse(sample);
  } catch (const std::exception&) {
    result.skipped = true;
    result.reason = SkipReason::kMalformed;
    return result;
  }
  if (!blackbox_->query(sample)) {
    result.skipped = true;
    result.reason = SkipReason::kInitiallyBenign;
    return result;
  }
  current_ = sample;
  rng_ = RandomDraw(episode_seed);
  active_ = true;
  result.observation = extract_features(current_);
  return result;
}

StepResult EvasionEnv::step(ActionKind action) {
  if (!active_) throw EpisodeFinishedError("step on a finished episode");
  ++turn_;
  ++total_steps_;

  StepResult result;
  result.turn = turn_;
  result.action = action;
  ByteBuf next;
  try {
    next = engine_.apply(current_, action, rng_);
    if (next != current_) parse(next);  // engine output must round-trip
    else result.identity = true;
  } catch (const std::exception&) {
    next = current_;
    result.identity = true;
  }

  const bool malicious = blackbox_->query(next);
  current_ = std::move(next);
  result.observation = extract_features(current_);
  result.label_malicious = malicious;
  result.bytes_length = current_.size();
  if (!malicious) {
    result.reward = params_.evasion_reward;
    result.evaded = true;
    result.done = true;
    evaded_ = true;
  } else {
    result.done = turn_ >= params_.max_turns;
  }
  if (result.done) active_ = false;
  return result;
}

const ByteBuf& EvasionEnv::harvest_evader() const {
  if (!evaded_) throw NotEvadedError("episode did not evade");
  return current_;
}

}  // namespace pevade
