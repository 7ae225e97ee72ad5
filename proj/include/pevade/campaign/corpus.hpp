#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pevade/util/bytes.hpp"
#include "pevade/util/rng.hpp"

namespace pevade {

struct CorpusEntry {
  std::string id;
  std::string file;  // relative to the manifest's directory
  int label = 0;     // 0 benign, 1 malicious
};

struct CorpusParams {
  std::size_t benign = 1000;
  std::size_t malicious = 1000;
  std::uint64_t seed = 1;
  double stealthy_fraction = 0.25;  // malicious drawn with a single weak trait
};

// One synthetic program image. Benign samples look like ordinary small
// executables; malicious ones carry detectable traits (odd section names,
// high-entropy payloads, loader-abuse imports, sparse strings), with
// "stealthy" ones showing just a single mild trait.
ByteBuf synth_sample(RandomDraw& rng, int label, bool stealthy);

// Writes one file per sample plus manifest.json into dir; deterministic in
// params.seed and independent of generation order.
std::vector<CorpusEntry> generate_corpus(const std::string& dir, const CorpusParams& params);

void save_manifest(const std::string& manifest_path, const std::vector<CorpusEntry>& entries,
                   std::uint64_t seed);
std::vector<CorpusEntry> load_manifest(const std::string& manifest_path);

// Directory holding a manifest's files.
std::string manifest_dir(const std::string& manifest_path);

// Deterministic draw of malicious sample ids to reserve for campaign
// evaluation. Stable under manifest reordering; shared by detector training
// and campaign evaluation so holdout files stay unseen on both sides.
std::vector<std::string> select_holdout(const std::vector<CorpusEntry>& entries, std::uint64_t seed,
                                        std::size_t count);

// Matching draw over the benign ids; completes the detector's validation
// split with the other class.
std::vector<std::string> select_benign_holdout(const std::vector<CorpusEntry>& entries,
                                               std::uint64_t seed, std::size_t count);

}  // namespace pevade
