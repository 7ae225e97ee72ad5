#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pevade/campaign/campaign.hpp"
#include "pevade/campaign/corpus.hpp"
#include "pevade/features/extract.hpp"
#include "pevade/model/gbdt.hpp"
#include "pevade/model/metrics.hpp"
#include "pevade/mutate/audit.hpp"
#include "pevade/mutate/engine.hpp"
#include "pevade/pe/errors.hpp"
#include "pevade/util/bytes.hpp"

namespace fs = std::filesystem;
using namespace pevade;

namespace {

// Config mistakes the option parser cannot catch; exits with code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string resolve_manifest(const std::string& path) {
  if (fs::is_directory(path)) return path + "/manifest.json";
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct CampaignFlags {
  std::string corpus;
  std::string model;
  std::string out_dir = "campaign_out";
  CampaignConfig config;
};

void add_campaign_options(CLI::App* sub, CampaignFlags& f) {
  sub->add_option("--corpus", f.corpus, "corpus directory or manifest path")->required();
  sub->add_option("--model", f.model, "detector model file")->required();
  sub->add_option("--out", f.out_dir, "output directory");
  sub->add_option("--seed", f.config.seed, "master seed");
  sub->add_option("--budget", f.config.training_budget, "total training mutations");
  sub->add_option("--holdout", f.config.holdout_count, "holdout size");
  sub->add_option("--max-turns", f.config.env.max_turns, "mutations per episode");
  sub->add_option("--reward", f.config.env.evasion_reward, "evasion reward");
  sub->add_option("--gamma", f.config.agent.gamma, "discount factor");
  sub->add_option("--agent-lr", f.config.agent.learning_rate, "optimizer step size");
  sub->add_option("--tau-train", f.config.agent.tau_train, "training exploration temperature");
  sub->add_option("--tau-eval", f.config.agent.tau_eval, "evaluation temperature");
  sub->add_option("--hidden", f.config.agent.hidden_dim, "value-network hidden width");
  sub->add_option("--batch", f.config.agent.batch_size, "replay batch size");
  sub->add_option("--replay", f.config.agent.replay_capacity, "replay buffer capacity");
  sub->add_option("--target-refresh", f.config.agent.target_refresh,
                  "updates between target syncs");
  sub->add_option("--packer", f.config.packer, "packer command for the pack/unpack actions")
      ->envname("PEVADE_PACKER");
  sub->set_config("--config", "", "key=value config file (keys match the long option names)");
}

void write_evaders(const std::string& dir, const CampaignResult& result) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < result.evader_pairs.size(); ++i) {
    std::snprintf(name, sizeof name, "%04zu", i);
    write_file(dir + "/" + name + "_orig.bin", result.evader_pairs[i].first);
    write_file(dir + "/" + name + "_mod.bin", result.evader_pairs[i].second);
  }
}

GbdtParams gbdt_flags(CLI::App* sub, GbdtParams& p) {
  sub->add_option("--rounds", p.rounds, "boosting rounds");
  sub->add_option("--depth", p.max_depth, "tree depth limit");
  sub->add_option("--lr", p.learning_rate, "shrinkage per round");
  sub->add_option("--bins", p.max_bins, "split candidate bins per feature");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-PE evasion testbed: corpus generation, GBDT detector, "
               "mutation engine, and RL evasion campaigns"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a labeled synthetic corpus");
  std::string gen_dir = "corpus";
  CorpusParams gen_params;
  gen->add_option("--out", gen_dir, "output directory");
  gen->add_option("--benign", gen_params.benign, "benign file count")->check(CLI::PositiveNumber);
  gen->add_option("--malicious", gen_params.malicious, "malicious file count")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_params.seed, "generator seed");
  gen->add_option("--stealthy", gen_params.stealthy_fraction,
                  "fraction of malicious files with a single weak trait")
      ->check(CLI::Range(0.0, 1.0));
  gen->callback([&] {
    const auto entries = generate_corpus(gen_dir, gen_params);
    std::cout << "wrote " << entries.size() << " files + manifest to " << gen_dir << "\n";
  });

  // model train | score | calibrate
  auto* model = app.add_subcommand("model", "detector operations");
  model->require_subcommand(1);

  auto* train = model->add_subcommand("train", "train the detector on a corpus");
  std::string train_corpus, train_out = "model.json";
  std::uint64_t train_seed = 1;
  std::size_t train_holdout = 200;
  double train_fpr = 0.01;
  GbdtParams train_params;
  train->add_option("--corpus", train_corpus, "corpus directory or manifest path")->required();
  train->add_option("--out", train_out, "model output path");
  train->add_option("--seed", train_seed, "holdout selection seed");
  train->add_option("--holdout", train_holdout, "validation holdout size per class");
  train->add_option("--fpr", train_fpr, "target false-positive rate")->check(CLI::Range(0.0, 1.0));
  gbdt_flags(train, train_params);
  train->callback([&] {
    const auto corpus = load_corpus(resolve_manifest(train_corpus));
    const auto result = train_detector(corpus, train_seed, train_holdout, train_params, train_fpr);
    result.model.save(train_out);
    std::cout << "trained on " << corpus.size() - result.holdout_ids.size() << " files, "
              << result.round_losses.size() << " rounds, final log-loss "
              << result.round_losses.back() << "\n"
              << "holdout auc " << result.holdout_auc << ", threshold "
              << result.model.threshold() << " (fpr " << result.achieved_fpr << ", tpr "
              << result.achieved_tpr << ")\n"
              << "saved " << train_out << "\n";
  });

  auto* score = model->add_subcommand("score", "score one file");
  std::string score_model = "model.json", score_file;
  score->add_option("--model", score_model, "detector model file");
  score->add_option("file", score_file, "PE file to score")->required();
  score->callback([&] {
    const GbdtModel m = GbdtModel::load(score_model);
    const double s = m.score(extract_features(read_file(score_file)));
    std::cout << nlohmann::json{{"file", score_file},
                                {"score", s},
                                {"threshold", m.threshold()},
                                {"label", s >= m.threshold() ? "malicious" : "benign"}}
                     .dump(2)
              << "\n";
  });

  auto* calib = model->add_subcommand("calibrate", "re-fit the decision threshold");
  std::string calib_model = "model.json", calib_corpus, calib_out;
  std::uint64_t calib_seed = 1;
  std::size_t calib_holdout = 200;
  double calib_fpr = 0.01;
  calib->add_option("--model", calib_model, "detector model file");
  calib->add_option("--corpus", calib_corpus, "corpus directory or manifest path")->required();
  calib->add_option("--out", calib_out, "output path (defaults to --model)");
  calib->add_option("--seed", calib_seed, "holdout selection seed");
  calib->add_option("--holdout", calib_holdout, "validation holdout size per class");
  calib->add_option("--fpr", calib_fpr, "target false-positive rate")->check(CLI::Range(0.0, 1.0));
  calib->callback([&] {
    GbdtModel m = GbdtModel::load(calib_model);
    const auto corpus = load_corpus(resolve_manifest(calib_corpus));
    std::vector<CorpusEntry> entries;
    for (const auto& s : corpus) entries.push_back(s.entry);
    const auto mal = select_holdout(entries, calib_seed, calib_holdout);
    const auto ben = select_benign_holdout(entries, calib_seed, calib_holdout);
    std::set<std::string> ids(mal.begin(), mal.end());
    ids.insert(ben.begin(), ben.end());
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : corpus) {
      if (!ids.count(s.entry.id)) continue;
      scores.push_back(m.score(extract_features(s.bytes)));
      labels.push_back(s.entry.label);
    }
    m.set_threshold(GbdtModel::calibrate_threshold(scores, labels, calib_fpr));
    const double fpr = false_positive_rate(scores, labels, m.threshold());
    m.save(calib_out.empty() ? calib_model : calib_out);
    std::cout << "threshold " << m.threshold() << " (validation fpr " << fpr << ")\n";
  });

  // features
  auto* feat = app.add_subcommand("features", "dump a file's feature vector as JSON");
  std::string feat_file, feat_out;
  feat->add_option("file", feat_file, "PE file")->required();
  feat->add_option("--out", feat_out, "write JSON here instead of stdout");
  feat->callback([&] {
    const Eigen::VectorXd v = extract_features(read_file(feat_file));
    nlohmann::json blocks;
    for (const auto& b : feature_blocks()) {
      std::vector<double> vals(v.data() + b.offset, v.data() + b.offset + b.size);
      blocks[std::string(b.name)] = std::move(vals);
    }
    const nlohmann::json j = {{"file", feat_file}, {"dim", kFeatureDim}, {"blocks", blocks}};
    if (feat_out.empty())
      std::cout << j.dump(2) << "\n";
    else
      write_json(feat_out, j);
  });

  // mutate
  auto* mut = app.add_subcommand("mutate", "apply one mutation to a file");
  std::string mut_file, mut_action, mut_out, mut_packer;
  std::uint64_t mut_seed = 1;
  mut->add_option("file", mut_file, "PE file")->required();
  mut->add_option("--action", mut_action, "mutation name")->required();
  mut->add_option("--seed", mut_seed, "draw seed");
  mut->add_option("--out", mut_out, "output path (defaults to <file>.mut)");
  mut->add_option("--packer", mut_packer, "packer command")->envname("PEVADE_PACKER");
  mut->callback([&] {
    const auto kind = action_from_name(mut_action);
    if (!kind) throw UsageError("unknown action '" + mut_action + "'");
    const ByteBuf input = read_file(mut_file);
    RandomDraw rng(mut_seed);
    const ByteBuf output = MutationEngine(mut_packer).apply(input, *kind, rng);
    const std::string out_path = mut_out.empty() ? mut_file + ".mut" : mut_out;
    write_file(out_path, output);
    const ValidityAudit audit = validity_audit(input, output);
    std::cout << mut_action << ": " << input.size() << " -> " << output.size() << " bytes, "
              << (output == input ? "identity" : "rewritten") << ", parses "
              << (audit.still_parses ? "yes" : "no") << ", wrote " << out_path << "\n";
  });

  // campaign run
  auto* campaign = app.add_subcommand("campaign", "evasion campaigns");
  campaign->require_subcommand(1);
  auto* run = campaign->add_subcommand("run", "train the agent and evaluate on the holdout");
  CampaignFlags run_flags;
  add_campaign_options(run, run_flags);
  run->callback([&] {
    const auto corpus = load_corpus(resolve_manifest(run_flags.corpus));
    ModelBlackbox blackbox(GbdtModel::load(run_flags.model));
    std::unique_ptr<DqnAgent> agent;
    const CampaignResult result = run_campaign(corpus, blackbox, run_flags.config, &agent);
    fs::create_directories(run_flags.out_dir);
    write_json(run_flags.out_dir + "/report.json", campaign_json(result));
    write_text(run_flags.out_dir + "/report.txt", campaign_text(result));
    write_text(run_flags.out_dir + "/training_log.jsonl", training_log_jsonl(result.training_log));
    write_json(run_flags.out_dir + "/agent.json", agent->checkpoint());
    write_evaders(run_flags.out_dir + "/evaders", result);
    std::cout << campaign_text(result);
  });

  // harden
  auto* hard = app.add_subcommand("harden", "adversarial retraining experiment");
  CampaignFlags hard_flags;
  hard_flags.out_dir = "harden_out";
  GbdtParams hard_params;
  double hard_fpr = 0.01;
  add_campaign_options(hard, hard_flags);
  gbdt_flags(hard, hard_params);
  hard->add_option("--fpr", hard_fpr, "re-calibration false-positive target")
      ->check(CLI::Range(0.0, 1.0));
  hard->callback([&] {
    const auto corpus = load_corpus(resolve_manifest(hard_flags.corpus));
    const GbdtModel base = GbdtModel::load(hard_flags.model);
    const HardenResult result = harden(corpus, base, hard_flags.config, hard_params, hard_fpr);
    fs::create_directories(hard_flags.out_dir);
    result.hardened.save(hard_flags.out_dir + "/hardened_model.json");
    write_json(hard_flags.out_dir + "/harden.json", harden_json(result));
    write_text(hard_flags.out_dir + "/harden.txt", harden_text(result));
    write_evaders(hard_flags.out_dir + "/evaders", result.pre);
    std::cout << harden_text(result);
  });

  // fingerprints
  auto* fp = app.add_subcommand("fingerprints", "feature-drift audit of harvested evaders");
  std::string fp_dir, fp_out;
  fp->add_option("--evaders", fp_dir, "directory of NNNN_orig.bin / NNNN_mod.bin pairs")
      ->required();
  fp->add_option("--out", fp_out, "write JSON here as well");
  fp->callback([&] {
    std::vector<std::string> stems;
    for (const auto& ent : fs::directory_iterator(fp_dir)) {
      const std::string name = ent.path().filename().string();
      if (name.size() > 9 && name.substr(name.size() - 9) == "_orig.bin")
        stems.push_back(name.substr(0, name.size() - 9));
    }
    std::sort(stems.begin(), stems.end());
    std::vector<ByteBuf> originals, evaded;
    for (const auto& stem : stems) {
      const std::string mod = fp_dir + "/" + stem + "_mod.bin";
      if (!fs::exists(mod)) continue;
      originals.push_back(read_file(fp_dir + "/" + stem + "_orig.bin"));
      evaded.push_back(read_file(mod));
    }
    const FingerprintReport report = fingerprint_features(originals, evaded);
    if (!fp_out.empty()) write_json(fp_out, fingerprint_json(report));
    std::cout << fingerprint_text(report);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
