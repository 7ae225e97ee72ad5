#include "pevade/campaign/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pevade/model/metrics.hpp"
#include "pevade/mutate/audit.hpp"
#include "pevade/util/fnv.hpp"

namespace pevade {

namespace {

double median_of(std::vector<int> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2])
               : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

void finalize_eval(PolicyEval& eval) {
  std::vector<int> moves;
  std::map<std::string, std::size_t> finals;
  for (const auto& ep : eval.episodes) {
    if (ep.skipped) continue;
    ++eval.eligible;
    for (auto a : ep.actions) ++eval.action_histogram[std::string(action_name(a))];
    if (ep.evaded) {
      ++eval.evaded;
      moves.push_back(ep.moves);
      ++finals[std::string(action_name(ep.actions.back()))];
    }
  }
  eval.evasion_rate =
      eval.eligible ? static_cast<double>(eval.evaded) / static_cast<double>(eval.eligible) : 0.0;
  eval.median_moves = median_of(std::move(moves));
  eval.dominant_mutation = "none";
  std::size_t best = 0;
  for (const auto& [name, count] : finals) {  // ties break lexicographically
    if (count > best) {
      best = count;
      eval.dominant_mutation = name;
    }
  }
}

const char* skip_reason_name(SkipReason r) {
  switch (r) {
    case SkipReason::kInitiallyBenign: return "initially_benign";
    case SkipReason::kMalformed: return "malformed";
    case SkipReason::kNone: break;
  }
  return "none";
}

struct Pools {
  std::vector<const CorpusSample*> train;
  std::vector<const CorpusSample*> holdout;
  std::size_t malicious = 0;
};

Pools split_pools(const std::vector<CorpusSample>& corpus, std::uint64_t seed,
                  std::size_t holdout_count) {
  std::vector<CorpusEntry> entries;
  entries.reserve(corpus.size());
  for (const auto& s : corpus) entries.push_back(s.entry);
  const auto holdout_ids = select_holdout(entries, seed, holdout_count);
  const std::set<std::string> holdout_set(holdout_ids.begin(), holdout_ids.end());

  Pools pools;
  for (const auto& s : corpus) {
    if (s.entry.label == 0) continue;
    ++pools.malicious;
    (holdout_set.count(s.entry.id) ? pools.holdout : pools.train).push_back(&s);
  }
  const auto by_id = [](const CorpusSample* a, const CorpusSample* b) {
    return a->entry.id < b->entry.id;
  };
  std::sort(pools.train.begin(), pools.train.end(), by_id);
  std::sort(pools.holdout.begin(), pools.holdout.end(), by_id);
  return pools;
}

using PolicyFn = std::function<ActionKind(const Eigen::VectorXd&, RandomDraw&)>;

PolicyEval eval_policy(EvasionEnv& env, const std::vector<const CorpusSample*>& holdout,
                       std::uint64_t eval_seed, const PolicyFn& policy) {
  PolicyEval eval;
  for (const CorpusSample* sample : holdout) {
    const std::uint64_t ep_seed = mix_seed(eval_seed, sample->entry.id);
    EpisodeRecord rec;
    rec.id = sample->entry.id;
    const ResetResult reset = env.reset(sample->bytes, ep_seed);
    if (reset.skipped) {
      rec.skipped = true;
      rec.skip_reason = reset.reason;
      eval.episodes.push_back(std::move(rec));
      continue;
    }
    RandomDraw policy_rng(mix_seed(ep_seed, "policy"));
    Eigen::VectorXd obs = reset.observation;
    bool done = false;
    while (!done) {
      const ActionKind a = policy(obs, policy_rng);
      const StepResult sr = env.step(a);
      rec.actions.push_back(a);
      rec.rewards.push_back(sr.reward);
      ++rec.moves;
      rec.evaded = sr.evaded;
      obs = sr.observation;
      done = sr.done;
    }
    eval.episodes.push_back(std::move(rec));
  }
  finalize_eval(eval);
  return eval;
}

}  // namespace

std::vector<CorpusSample> load_corpus(const std::string& manifest_path) {
  const auto entries = load_manifest(manifest_path);
  const std::string dir = manifest_dir(manifest_path);
  std::vector<CorpusSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({e, read_file(dir + "/" + e.file)});
  return out;
}

std::string episode_outcome(const EpisodeRecord& episode) {
  if (episode.skipped) return "skipped";
  return episode.evaded ? "evaded" : "failed";
}

std::string training_log_jsonl(const std::vector<EpisodeRecord>& log) {
  std::ostringstream os;
  for (const auto& ep : log) {
    nlohmann::json actions = nlohmann::json::array();
    for (auto a : ep.actions) actions.push_back(std::string(action_name(a)));
    const nlohmann::json line = {{"id", ep.id},
                                 {"actions", std::move(actions)},
                                 {"rewards", ep.rewards},
                                 {"outcome", episode_outcome(ep)}};
    os << line.dump() << "\n";
  }
  return os.str();
}

namespace {

std::set<std::string> validation_ids(const std::vector<CorpusSample>& corpus, std::uint64_t seed,
                                     std::size_t holdout_count) {
  std::vector<CorpusEntry> entries;
  entries.reserve(corpus.size());
  for (const auto& s : corpus) entries.push_back(s.entry);
  const auto malicious = select_holdout(entries, seed, holdout_count);
  const auto benign = select_benign_holdout(entries, seed, holdout_count);
  std::set<std::string> ids(malicious.begin(), malicious.end());
  ids.insert(benign.begin(), benign.end());
  return ids;
}

}  // namespace

DetectorTraining train_detector(const std::vector<CorpusSample>& corpus, std::uint64_t seed,
                                std::size_t holdout_count, const GbdtParams& params,
                                double target_fpr) {
  const auto holdout = validation_ids(corpus, seed, holdout_count);

  std::vector<const CorpusSample*> train_rows, valid_rows;
  for (const auto& s : corpus) (holdout.count(s.entry.id) ? valid_rows : train_rows).push_back(&s);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(train_rows.size()),
                    static_cast<Eigen::Index>(kFeatureDim));
  std::vector<int> y;
  y.reserve(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = extract_features(train_rows[i]->bytes).transpose();
    y.push_back(train_rows[i]->entry.label);
  }

  DetectorTraining out;
  out.model = GbdtModel::train(x, y, params, &out.round_losses);
  for (const auto* s : valid_rows) out.holdout_ids.push_back(s->entry.id);

  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t flagged_malicious = 0, malicious = 0;
  for (const auto* s : valid_rows) {
    scores.push_back(out.model.score(extract_features(s->bytes)));
    labels.push_back(s->entry.label);
  }
  out.holdout_auc = roc_auc(scores, labels);
  out.model.set_threshold(GbdtModel::calibrate_threshold(scores, labels, target_fpr));
  out.achieved_fpr = false_positive_rate(scores, labels, out.model.threshold());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    ++malicious;
    if (scores[i] >= out.model.threshold()) ++flagged_malicious;
  }
  out.achieved_tpr =
      malicious ? static_cast<double>(flagged_malicious) / static_cast<double>(malicious) : 0.0;
  return out;
}

CampaignResult run_campaign(const std::vector<CorpusSample>& corpus, Blackbox& blackbox,
                            const CampaignConfig& config,
                            std::unique_ptr<DqnAgent>* trained_agent) {
  CampaignResult res;
  res.config = config;
  res.corpus_size = corpus.size();

  const Pools pools = split_pools(corpus, config.seed, config.holdout_count);
  res.malicious_count = pools.malicious;
  for (const auto* s : pools.train) res.train_ids.push_back(s->entry.id);
  for (const auto* s : pools.holdout) res.holdout_ids.push_back(s->entry.id);

  MutationEngine engine(config.packer);
  const std::vector<ActionKind> actions = engine.available_actions();
  EvasionEnv env(engine, blackbox, config.env);
  auto agent = std::make_unique<DqnAgent>(static_cast<int>(kFeatureDim), actions, config.agent,
                                          mix_seed(config.seed, "agent"));

  const std::uint64_t queries_before = blackbox.query_count();

  if (config.training_budget > 0 && pools.train.empty())
    throw EmptyCorpusError("no malicious samples left to train on");

  std::vector<const CorpusSample*> order = pools.train;
  const auto reshuffle = [&](std::uint64_t pass) {
    RandomDraw rng(mix_seed(mix_seed(config.seed, "epoch"), pass));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
  };

  std::uint64_t steps = 0;
  std::size_t cursor = 0;
  std::uint64_t pass = 0;
  bool started_this_pass = false;
  if (!order.empty()) reshuffle(pass);
  RandomDraw act_rng(mix_seed(config.seed, "train-policy"));
  while (steps < config.training_budget && !order.empty()) {
    if (cursor == order.size()) {
      if (!started_this_pass) break;  // nothing in the pool can start an episode
      cursor = 0;
      ++pass;
      started_this_pass = false;
      reshuffle(pass);
    }
    const CorpusSample& sample = *order[cursor++];
    const std::uint64_t ep_seed =
        mix_seed(mix_seed(config.seed, fnv1a64(sample.bytes.data(), sample.bytes.size())), pass);
    EpisodeRecord rec;
    rec.id = sample.entry.id;
    const ResetResult reset = env.reset(sample.bytes, ep_seed);
    if (reset.skipped) {
      rec.skipped = true;
      rec.skip_reason = reset.reason;
      res.training_log.push_back(std::move(rec));
      continue;
    }
    started_this_pass = true;
    ++res.training_episodes;

    Eigen::VectorXd obs = reset.observation;
    bool done = false;
    while (!done && steps < config.training_budget) {
      const ActionKind a = agent->act(obs, config.agent.tau_train, act_rng);
      const StepResult sr = env.step(a);
      ++steps;
      agent->record({obs, agent->action_index(a), sr.reward, sr.observation, sr.done});
      rec.actions.push_back(a);
      rec.rewards.push_back(sr.reward);
      ++rec.moves;
      rec.evaded = sr.evaded;
      obs = sr.observation;
      done = sr.done;
    }
    if (rec.evaded) {
      ++res.training_evaded;
      res.evader_pairs.emplace_back(sample.bytes, env.harvest_evader());
    }
    res.training_log.push_back(std::move(rec));
  }
  res.training_steps = steps;

  res.agent_eval = eval_policy(env, pools.holdout, mix_seed(config.seed, "eval-agent"),
                               [&](const Eigen::VectorXd& obs, RandomDraw& rng) {
                                 return agent->act(obs, config.agent.tau_eval, rng);
                               });
  res.random_eval = eval_policy(env, pools.holdout, mix_seed(config.seed, "eval-random"),
                                [&](const Eigen::VectorXd&, RandomDraw& rng) {
                                  return actions[rng.below(actions.size())];
                                });
  res.blackbox_queries = blackbox.query_count() - queries_before;

  std::vector<ByteBuf> originals, evaded;
  for (const auto& [before, after] : res.evader_pairs) {
    originals.push_back(before);
    evaded.push_back(after);
  }
  res.fingerprints = fingerprint_features(originals, evaded);

  if (trained_agent) *trained_agent = std::move(agent);
  return res;
}

PolicyEval eval_frozen_agent(const std::vector<CorpusSample>& corpus, Blackbox& blackbox,
                             const CampaignConfig& config, const DqnAgent& agent) {
  const Pools pools = split_pools(corpus, config.seed, config.holdout_count);
  MutationEngine engine(config.packer);
  EvasionEnv env(engine, blackbox, config.env);
  return eval_policy(env, pools.holdout, mix_seed(config.seed, "eval-agent"),
                     [&](const Eigen::VectorXd& obs, RandomDraw& rng) {
                       return agent.act(obs, config.agent.tau_eval, rng);
                     });
}

namespace {

nlohmann::json eval_json(const PolicyEval& eval) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& ep : eval.episodes) {
    nlohmann::json actions = nlohmann::json::array();
    for (auto a : ep.actions) actions.push_back(std::string(action_name(a)));
    episodes.push_back({{"id", ep.id},
                        {"skipped", ep.skipped},
                        {"skip_reason", skip_reason_name(ep.skip_reason)},
                        {"outcome", episode_outcome(ep)},
                        {"evaded", ep.evaded},
                        {"moves", ep.moves},
                        {"actions", std::move(actions)},
                        {"rewards", ep.rewards}});
  }
  return {{"episodes", std::move(episodes)},
          {"eligible", eval.eligible},
          {"evaded", eval.evaded},
          {"evasion_rate", eval.evasion_rate},
          {"median_moves", eval.median_moves},
          {"dominant_mutation", eval.dominant_mutation},
          {"action_histogram", eval.action_histogram}};
}

}  // namespace

nlohmann::json config_json(const CampaignConfig& c) {
  return {{"seed", c.seed},
          {"training_budget", c.training_budget},
          {"holdout_count", c.holdout_count},
          {"max_turns", c.env.max_turns},
          {"evasion_reward", c.env.evasion_reward},
          {"gamma", c.agent.gamma},
          {"learning_rate", c.agent.learning_rate},
          {"tau_train", c.agent.tau_train},
          {"tau_eval", c.agent.tau_eval},
          {"hidden_dim", c.agent.hidden_dim},
          {"batch_size", c.agent.batch_size},
          {"replay_capacity", c.agent.replay_capacity},
          {"target_refresh", c.agent.target_refresh},
          {"packer", c.packer}};
}

nlohmann::json campaign_json(const CampaignResult& result) {
  bool disjoint = true;
  const std::set<std::string> train_set(result.train_ids.begin(), result.train_ids.end());
  for (const auto& id : result.holdout_ids)
    if (train_set.count(id)) disjoint = false;
  return {{"format", "pevade-campaign"},
          {"version", 1},
          {"config", config_json(result.config)},
          {"corpus", {{"files", result.corpus_size}, {"malicious", result.malicious_count}}},
          {"training",
           {{"steps", result.training_steps},
            {"pool", result.train_ids.size()},
            {"episodes", result.training_episodes},
            {"evaded", result.training_evaded}}},
          {"blackbox_queries", result.blackbox_queries},
          {"train_ids", result.train_ids},
          {"holdout_ids", result.holdout_ids},
          {"holdout_disjoint_from_training", disjoint},
          {"agent", eval_json(result.agent_eval)},
          {"random", eval_json(result.random_eval)},
          {"fingerprints", fingerprint_json(result.fingerprints)}};
}

namespace {

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v * 100.0 << "%";
  return os.str();
}

std::string fixed1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

void put_row(std::ostringstream& os, const std::vector<std::string>& cells,
             const std::vector<int>& widths) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << std::left << std::setw(widths[i]) << cells[i];
    if (i + 1 < cells.size()) os << "  ";
  }
  os << "\n";
}

}  // namespace

std::string campaign_text(const CampaignResult& r) {
  std::ostringstream os;
  os << "== campaign ==\n";
  os << "seed              " << r.config.seed << "\n";
  os << "corpus            " << r.corpus_size << " files (" << r.malicious_count << " malicious)\n";
  os << "holdout           " << r.holdout_ids.size() << "\n";
  os << "training          " << r.training_steps << "/" << r.config.training_budget << " steps, "
     << r.training_episodes << " episodes, " << r.training_evaded << " evaded\n";
  os << "blackbox queries  " << r.blackbox_queries << "\n\n";

  os << "== holdout evasion ==\n";
  const std::vector<int> w = {8, 9, 9, 7, 9, 7, 16};
  put_row(os, {"policy", "episodes", "eligible", "evaded", "rate", "median", "dominant"}, w);
  const auto eval_row = [&](const char* name, const PolicyEval& e) {
    put_row(os,
            {name, std::to_string(e.episodes.size()), std::to_string(e.eligible),
             std::to_string(e.evaded), pct(e.evasion_rate), fixed1(e.median_moves),
             e.dominant_mutation},
            w);
  };
  eval_row("agent", r.agent_eval);
  eval_row("random", r.random_eval);

  os << "\n== agent action usage ==\n";
  std::size_t total = 0;
  for (const auto& [name, count] : r.agent_eval.action_histogram) total += count;
  const std::vector<int> w2 = {16, 7, 7};
  put_row(os, {"action", "count", "share"}, w2);
  for (const auto& [name, count] : r.agent_eval.action_histogram)
    put_row(os,
            {name, std::to_string(count),
             pct(total ? static_cast<double>(count) / static_cast<double>(total) : 0.0)},
            w2);
  os << "\n" << fingerprint_text(r.fingerprints);
  return os.str();
}

HardenResult harden(const std::vector<CorpusSample>& corpus, const GbdtModel& base_model,
                    const CampaignConfig& config, const GbdtParams& gbdt_params,
                    double calibrate_fpr) {
  HardenResult hr;
  std::unique_ptr<DqnAgent> agent;
  {
    ModelBlackbox blackbox(base_model);
    hr.pre = run_campaign(corpus, blackbox, config, &agent);
  }
  if (hr.pre.evader_pairs.empty())
    throw NoEvadersError("campaign harvested no evasive variants to retrain on");

  // Same train/validation split the base detector saw; evaders join the
  // training rows as malicious.
  const auto holdout = validation_ids(corpus, config.seed, config.holdout_count);
  std::vector<const CorpusSample*> train_rows, valid_rows;
  for (const auto& s : corpus) (holdout.count(s.entry.id) ? valid_rows : train_rows).push_back(&s);

  const std::size_t extra = hr.pre.evader_pairs.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(train_rows.size() + extra),
                    static_cast<Eigen::Index>(kFeatureDim));
  std::vector<int> y;
  y.reserve(train_rows.size() + extra);
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = extract_features(train_rows[i]->bytes).transpose();
    y.push_back(train_rows[i]->entry.label);
  }
  for (std::size_t k = 0; k < extra; ++k) {
    x.row(static_cast<Eigen::Index>(train_rows.size() + k)) =
        extract_features(hr.pre.evader_pairs[k].second).transpose();
    y.push_back(1);
  }
  hr.hardened = GbdtModel::train(x, y, gbdt_params);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* s : valid_rows) {
    scores.push_back(hr.hardened.score(extract_features(s->bytes)));
    labels.push_back(s->entry.label);
  }
  hr.hardened.set_threshold(GbdtModel::calibrate_threshold(scores, labels, calibrate_fpr));
  hr.hardened_auc = roc_auc(scores, labels);
  hr.hardened_fpr = false_positive_rate(scores, labels, hr.hardened.threshold());

  {
    ModelBlackbox blackbox(hr.hardened);
    hr.post = eval_frozen_agent(corpus, blackbox, config, *agent);
  }
  hr.pre_rate = hr.pre.agent_eval.evasion_rate;
  hr.post_rate = hr.post.evasion_rate;
  return hr;
}

nlohmann::json harden_json(const HardenResult& r) {
  return {{"format", "pevade-harden"},
          {"version", 1},
          {"pre", campaign_json(r.pre)},
          {"post_frozen_agent", eval_json(r.post)},
          {"pre_evasion_rate", r.pre_rate},
          {"post_evasion_rate", r.post_rate},
          {"hardened_auc", r.hardened_auc},
          {"hardened_fpr", r.hardened_fpr},
          {"retrain_added", r.pre.evader_pairs.size()}};
}

std::string harden_text(const HardenResult& r) {
  std::ostringstream os;
  os << "== adversarial hardening ==\n";
  os << "evaders folded in    " << r.pre.evader_pairs.size() << "\n";
  os << "pre-harden evasion   " << pct(r.pre_rate) << "\n";
  os << "post-harden evasion  " << pct(r.post_rate) << "\n";
  os << std::fixed << std::setprecision(4);
  os << "hardened auc         " << r.hardened_auc << "\n";
  os << "hardened fpr         " << r.hardened_fpr << "\n";
  return os.str();
}

FingerprintReport fingerprint_features(const std::vector<ByteBuf>& originals,
                                       const std::vector<ByteBuf>& evaded) {
  if (originals.size() != evaded.size())
    throw std::invalid_argument("fingerprinting needs matched original/evaded pairs");

  FingerprintReport report;
  report.pairs = originals.size();
  if (originals.empty()) return report;
  Eigen::VectorXd mean_orig = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kFeatureDim));
  Eigen::VectorXd mean_evaded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < originals.size(); ++i) {
    mean_orig += extract_features(originals[i]);
    mean_evaded += extract_features(evaded[i]);
    const ValidityAudit audit = validity_audit(originals[i], evaded[i]);
    for (const auto& fp : audit.fingerprints) ++report.artifacts[fp];
  }
  mean_orig /= static_cast<double>(originals.size());
  mean_evaded /= static_cast<double>(evaded.size());

  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double mo = mean_orig(static_cast<Eigen::Index>(i));
    const double me = mean_evaded(static_cast<Eigen::Index>(i));
    const double delta = me - mo;
    const double floor = std::max(0.05, 0.25 * (std::abs(mo) + std::abs(me)) / 2.0);
    if (std::abs(delta) <= floor) continue;
    FingerprintFlag flag;
    flag.index = i;
    for (const auto& b : feature_blocks())
      if (i >= b.offset && i < b.offset + b.size) {
        flag.block = std::string(b.name);
        flag.index_in_block = i - b.offset;
      }
    flag.mean_original = mo;
    flag.mean_evaded = me;
    flag.delta = delta;
    report.flags.push_back(std::move(flag));
  }
  return report;
}

nlohmann::json fingerprint_json(const FingerprintReport& report) {
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& f : report.flags)
    flags.push_back({{"index", f.index},
                     {"block", f.block},
                     {"index_in_block", f.index_in_block},
                     {"mean_original", f.mean_original},
                     {"mean_evaded", f.mean_evaded},
                     {"delta", f.delta}});
  return {{"format", "pevade-fingerprints"},
          {"version", 1},
          {"pairs", report.pairs},
          {"flags", std::move(flags)},
          {"artifacts", report.artifacts}};
}

std::string fingerprint_text(const FingerprintReport& report) {
  std::ostringstream os;
  os << "== feature drift over " << report.pairs << " pairs ==\n";
  const std::vector<int> w = {24, 6, 12, 12, 12};
  put_row(os, {"block", "index", "mean_before", "mean_after", "delta"}, w);
  for (const auto& f : report.flags) {
    const auto fmt = [](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v;
      return s.str();
    };
    put_row(os,
            {f.block, std::to_string(f.index_in_block), fmt(f.mean_original), fmt(f.mean_evaded),
             fmt(f.delta)},
            w);
  }
  os << "\n== rewrite artifacts ==\n";
  if (report.artifacts.empty()) os << "(none)\n";
  for (const auto& [name, count] : report.artifacts) os << name << "  " << count << "\n";
  return os.str();
}

}  // namespace pevade
