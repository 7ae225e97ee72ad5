#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pevade/campaign/corpus.hpp"
#include "pevade/env/env.hpp"
#include "pevade/features/extract.hpp"
#include "pevade/model/gbdt.hpp"
#include "pevade/rl/agent.hpp"

namespace pevade {

struct CampaignConfig {
  std::uint64_t seed = 1;
  std::uint64_t training_budget = 50000;  // exact number of environment steps
  std::size_t holdout_count = 200;
  EnvParams env;
  AgentParams agent;
  std::string packer;  // empty disables the packing actions
};

struct EpisodeRecord {
  std::string id;
  bool skipped = false;
  SkipReason skip_reason = SkipReason::kNone;
  bool evaded = false;
  int moves = 0;
  std::vector<ActionKind> actions;
  std::vector<double> rewards;  // one per action
};

// "evaded", "failed" or "skipped".
std::string episode_outcome(const EpisodeRecord& episode);

// One JSON object per line: {id, actions, rewards, outcome}.
std::string training_log_jsonl(const std::vector<EpisodeRecord>& log);

struct EmptyCorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PolicyEval {
  std::vector<EpisodeRecord> episodes;
  std::size_t eligible = 0;
  std::size_t evaded = 0;
  double evasion_rate = 0.0;       // evaded / eligible
  double median_moves = 0.0;       // over evaded episodes
  std::string dominant_mutation;   // modal final action over evaded episodes
  std::map<std::string, std::size_t> action_histogram;
};

struct CorpusSample {
  CorpusEntry entry;
  ByteBuf bytes;
};

struct FingerprintFlag {
  std::size_t index = 0;  // absolute feature index
  std::string block;
  std::size_t index_in_block = 0;
  double mean_original = 0.0;
  double mean_evaded = 0.0;
  double delta = 0.0;
};

struct FingerprintReport {
  std::size_t pairs = 0;
  std::vector<FingerprintFlag> flags;
  std::map<std::string, std::size_t> artifacts;  // audit fingerprint tallies
};

// Mean feature drift between originals and their evaded counterparts. A
// feature is flagged when |mean_evaded - mean_original| exceeds
// max(0.05, 0.25 * avg(|mean_original|, |mean_evaded|)).
FingerprintReport fingerprint_features(const std::vector<ByteBuf>& originals,
                                       const std::vector<ByteBuf>& evaded);

nlohmann::json fingerprint_json(const FingerprintReport& report);
std::string fingerprint_text(const FingerprintReport& report);

struct CampaignResult {
  CampaignConfig config;
  std::uint64_t training_steps = 0;
  std::size_t corpus_size = 0;
  std::size_t malicious_count = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> holdout_ids;
  std::vector<EpisodeRecord> training_log;  // every episode incl. skipped
  std::size_t training_episodes = 0;
  std::size_t training_evaded = 0;
  std::uint64_t blackbox_queries = 0;
  PolicyEval agent_eval;
  PolicyEval random_eval;
  // Original and mutated bytes of every evaded training episode; feeds
  // adversarial retraining and fingerprint analysis.
  std::vector<std::pair<ByteBuf, ByteBuf>> evader_pairs;
  FingerprintReport fingerprints;  // drift audit over the harvested evaders
};

std::vector<CorpusSample> load_corpus(const std::string& manifest_path);

struct DetectorTraining {
  GbdtModel model;
  std::vector<double> round_losses;
  std::vector<std::string> holdout_ids;  // validation rows, both classes
  double holdout_auc = 0.0;
  double achieved_fpr = 0.0;
  double achieved_tpr = 0.0;
};

// Trains the detector on the corpus minus a per-class validation holdout
// (the malicious side shared with campaign evaluation), then calibrates the
// decision threshold on that holdout for the target false-positive rate.
DetectorTraining train_detector(const std::vector<CorpusSample>& corpus, std::uint64_t seed,
                                std::size_t holdout_count, const GbdtParams& params,
                                double target_fpr = 0.01);

// Trains an evasion agent against the detector on the non-holdout malicious
// samples (spending exactly training_budget environment steps), then plays
// the trained policy and a uniform-random baseline over the holdout. The
// trained agent is handed back through trained_agent when given, so callers
// can replay the frozen policy against other detectors.
CampaignResult run_campaign(const std::vector<CorpusSample>& corpus, Blackbox& blackbox,
                            const CampaignConfig& config,
                            std::unique_ptr<DqnAgent>* trained_agent = nullptr);

// Holdout evaluation of an already-trained policy, using the same holdout
// split and per-sample episode seeds as run_campaign with this config.
PolicyEval eval_frozen_agent(const std::vector<CorpusSample>& corpus, Blackbox& blackbox,
                             const CampaignConfig& config, const DqnAgent& agent);

// Reports carry no timestamps: same seed, same corpus, same bytes out.
nlohmann::json campaign_json(const CampaignResult& result);
std::string campaign_text(const CampaignResult& result);

struct NoEvadersError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HardenResult {
  CampaignResult pre;
  PolicyEval post;  // the same frozen agent replayed against the hardened model
  GbdtModel hardened;
  double pre_rate = 0.0;
  double post_rate = 0.0;
  double hardened_auc = 0.0;  // over the original corpus
  double hardened_fpr = 0.0;
};

// Adversarial retraining: campaign against the base model, fold the evaded
// training files back in as malicious, retrain with the same parameters,
// recalibrate, then replay the frozen agent against the hardened detector.
// Throws NoEvadersError when the campaign harvested nothing to retrain on.
HardenResult harden(const std::vector<CorpusSample>& corpus, const GbdtModel& base_model,
                    const CampaignConfig& config, const GbdtParams& gbdt_params,
                    double calibrate_fpr = 0.01);

nlohmann::json harden_json(const HardenResult& result);
std::string harden_text(const HardenResult& result);

}  // namespace pevade
