#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pevade/features/extract.hpp"
#include "pevade/mutate/engine.hpp"
#include "pevade/pe/image.hpp"
#include "pevade/util/fnv.hpp"

using namespace pevade;
using namespace testpe;

namespace {

// Printable-run statistics recomputed from scratch: runs of [0x20, 0x7f]
// at least five long, a 96-bin character distribution over them, and a few
// landmark substring counts.
std::array<double, 104> oracle_strings(const ByteBuf& bytes) {
  std::array<double, 104> out{};
  std::vector<std::vector<std::uint8_t>> runs;
  std::vector<std::uint8_t> cur;
  auto flush = [&] {
    if (cur.size() >= 5) runs.push_back(cur);
    cur.clear();
  };
  for (auto b : bytes) {
    if (b >= 0x20 && b <= 0x7f)
      cur.push_back(b);
    else
      flush();
  }
  flush();

  double total = 0;
  std::array<double, 96> hist{};
  for (const auto& r : runs) {
    total += static_cast<double>(r.size());
    for (auto c : r) hist[c - 0x20] += 1.0;
  }
  out[0] = static_cast<double>(runs.size());
  out[1] = runs.empty() ? 0.0 : total / static_cast<double>(runs.size());
  double entropy = 0.0;
  for (std::size_t i = 0; i < 96; ++i) {
    const double p = hist[i] / (total > 0 ? total : 1.0);
    out[2 + i] = p;
    if (p > 0) entropy -= p * std::log2(p);
  }
  out[98] = entropy;
  auto count = [&](const std::string& needle) {
    double n = 0;
    if (bytes.size() < needle.size()) return 0.0;
    for (std::size_t i = 0; i + needle.size() <= bytes.size(); ++i) {
      bool hit = true;
      for (std::size_t k = 0; k < needle.size(); ++k)
        if (bytes[i + k] != static_cast<std::uint8_t>(needle[k])) hit = false;
      if (hit) ++n;
    }
    return n;
  };
  out[99] = count("C:\\");
  out[100] = count("http");
  out[101] = count("HKEY_");
  out[102] = count("MZ");
  out[103] = total;
  return out;
}

double local_entropy(const ByteBuf& data) {
  if (data.empty()) return 0.0;
  std::array<double, 256> c{};
  for (auto b : data) c[b] += 1.0;
  double h = 0.0;
  for (double n : c) {
    if (n == 0) continue;
    const double p = n / static_cast<double>(data.size());
    h -= p * std::log2(p);
  }
  return h;
}

void check_block_exact(const Eigen::VectorXd& v, std::string_view block,
                       const std::vector<double>& expected) {
  const FeatureBlock& b = feature_block(block);
  REQUIRE(expected.size() == b.size);
  for (std::size_t i = 0; i < b.size; ++i) {
    CAPTURE(i);
    CHECK(v[static_cast<Eigen::Index>(b.offset + i)] == expected[i]);
  }
}

bool blocks_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b, std::string_view block) {
  const FeatureBlock& fb = feature_block(block);
  for (std::size_t i = 0; i < fb.size; ++i)
    if (a[static_cast<Eigen::Index>(fb.offset + i)] != b[static_cast<Eigen::Index>(fb.offset + i)])
      return false;
  return true;
}

// import_pe with a debug directory and an overlay certificate grafted on,
// wrapped with a correct checksum: every action has something to act on.
ByteBuf rich_fixture() {
  TinyPeLayout lay;
  ByteBuf f = import_pe(false, &lay);
  put_u32(f, 88 + 96 + 8 * kDirDebug, lay.va[1] + 400);
  put_u32(f, 88 + 96 + 8 * kDirDebug + 4, 28);
  const auto cert_at = static_cast<std::uint32_t>(f.size());
  put_u32(f, 88 + 96 + 8 * kDirSecurity, cert_at);
  put_u32(f, 88 + 96 + 8 * kDirSecurity + 4, 64);
  f.insert(f.end(), 64, 0xab);
  PeImage img = parse(f);
  return serialize_with_checksum(img);
}

}  // namespace

TEST_CASE("feature blocks tile the vector exactly") {
  const auto& blocks = feature_blocks();
  REQUIRE(blocks.size() == 8);
  std::size_t cursor = 0;
  for (const auto& b : blocks) {
    CHECK(b.offset == cursor);
    cursor += b.size;
  }
  CHECK(cursor == kFeatureDim);
  CHECK(feature_offset("byte_histogram") == 0);
  CHECK(feature_offset("byte_entropy_histogram") == 256);
  CHECK(feature_offset("strings") == 512);
  CHECK(feature_offset("general") == 616);
  CHECK(feature_offset("header") == 626);
  CHECK(feature_offset("sections") == 688);
  CHECK(feature_offset("imports") == 943);
  CHECK(feature_offset("exports") == 2222);
  CHECK(checksum_valid_feature_index() == 627);
  CHECK_THROWS_AS(feature_block("entropy"), std::out_of_range);
}

TEST_CASE("extraction rejects non-PE bytes and has fixed dimension") {
  CHECK_THROWS_AS(extract_features(ByteBuf(300, 9)), NotPeError);
  const Eigen::VectorXd v = extract_features(minimal_pe());
  CHECK(v.size() == 2350);
}

TEST_CASE("byte histogram is the exact normalized byte count") {
  const ByteBuf f = two_section_pe();
  const Eigen::VectorXd v = extract_features(f);
  std::array<std::uint64_t, 256> counts{};
  for (auto b : f) ++counts[b];
  std::vector<double> expected(256);
  for (std::size_t i = 0; i < 256; ++i)
    expected[i] = static_cast<double>(counts[i]) / static_cast<double>(f.size());
  check_block_exact(v, "byte_histogram", expected);
  CHECK(std::abs(v.segment(0, 256).sum() - 1.0) < 1e-9);
}

TEST_CASE("entropy histogram equals an independent second implementation") {
  std::vector<ByteBuf> files = {minimal_pe(), two_section_pe(), import_pe(true), cert_pe()};

  TinyPeSpec exact;  // file lands on exactly one full window
  exact.sections.push_back({".text", kCode, make_code(1536), 0});
  files.push_back(build_tiny_pe(exact));
  REQUIRE(files.back().size() == 2048);

  TinyPeSpec big;  // several overlapping windows with mixed content
  big.sections.push_back({".text", kCode, make_code(8192), 0});
  ByteBuf mixed(12288);
  for (std::size_t i = 0; i < 4096; ++i) mixed[i] = 0;
  for (std::size_t i = 4096; i < 8192; ++i) mixed[i] = static_cast<std::uint8_t>(0x20 + (i % 0x5f));
  for (std::size_t i = 8192; i < 12288; ++i) mixed[i] = static_cast<std::uint8_t>((i * 131 + 17) & 0xff);
  big.sections.push_back({".data", kData, std::move(mixed), 0});
  big.overlay = ByteBuf(333, 0xff);  // odd tail, not window aligned
  files.push_back(build_tiny_pe(big));

  for (const auto& f : files) {
    CAPTURE(f.size());
    const Eigen::VectorXd v = extract_features(f);
    const auto expected = oracle_entropy_hist(f);
    for (std::size_t i = 0; i < 256; ++i) {
      CAPTURE(i);
      CHECK(v[static_cast<Eigen::Index>(256 + i)] == expected[i]);
    }
    CHECK(std::abs(v.segment(256, 256).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("entropy oracle sanity on degenerate content") {
  // Constant bytes: zero entropy, all mass in (bin 0, value nibble).
  const ByteBuf zeros(4096, 0);
  const auto h0 = oracle_entropy_hist(zeros);
  CHECK(h0[0] == 1.0);
  const ByteBuf ffs(4096, 0xff);
  const auto hf = oracle_entropy_hist(ffs);
  CHECK(hf[15] == 1.0);  // nibble 0xf, entropy bin 0
  // A short file is one window.
  ByteBuf tiny = {0x10, 0x10, 0x20, 0x20};
  const auto ht = oracle_entropy_hist(tiny);
  CHECK(ht[2 * 16 + 1] == 0.5);  // H = 1, hbin 2
  CHECK(ht[2 * 16 + 2] == 0.5);
}

TEST_CASE("string statistics match a from-scratch recount") {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  ByteBuf data(512, 0);
  const std::string s1 = "C:\\Users\\r\\AppData\\run.exe";
  const std::string s2 = "http://stage.example.com/p?id=1";
  const std::string s3 = "HKEY_LOCAL_MACHINE\\Software\\Run";
  const std::string s4 = "abc";  // below the run threshold
  const std::string s5 = "AAAAA";
  std::size_t at = 3;
  for (const auto* s : {&s1, &s2, &s3, &s4, &s5}) {
    std::copy(s->begin(), s->end(), data.begin() + static_cast<std::ptrdiff_t>(at));
    at += s->size() + 2;  // NUL separated
  }
  spec.sections.push_back({".data", kData, std::move(data), 0});
  const ByteBuf f = build_tiny_pe(spec);

  const Eigen::VectorXd v = extract_features(f);
  const auto expected = oracle_strings(f);
  check_block_exact(v, "strings", std::vector<double>(expected.begin(), expected.end()));

  // Landmarks counted at least where planted.
  const std::size_t off = feature_offset("strings");
  CHECK(v[off + 99] >= 1.0);   // C:\ path
  CHECK(v[off + 100] >= 1.0);  // URL
  CHECK(v[off + 101] >= 1.0);  // registry key
  CHECK(v[off + 102] >= 1.0);  // the DOS magic itself
  CHECK(v[off + 0] >= 4.0);    // s1, s2, s3, s5 and the section names

  for (const auto& g : {minimal_pe(), two_section_pe(), import_pe(false)}) {
    const auto exp = oracle_strings(g);
    const Eigen::VectorXd w = extract_features(g);
    for (std::size_t i = 0; i < 104; ++i) CHECK(w[static_cast<Eigen::Index>(off + i)] == exp[i]);
  }
}

TEST_CASE("general block reports sizes, directory presence and table counts") {
  TinyPeLayout lay;
  ByteBuf f = import_pe(false, &lay);
  // Point the informational directories somewhere plausible.
  for (std::size_t d : {kDirResource, kDirBaseReloc, kDirDebug, kDirTls}) {
    put_u32(f, 88 + 96 + 8 * d, lay.va[1] + 64);
    put_u32(f, 88 + 96 + 8 * d + 4, 8);
  }
  const Eigen::VectorXd v = extract_features(f);
  const std::vector<double> expected = {
      static_cast<double>(f.size()),
      static_cast<double>(parse(f).optional.size_of_image),
      1.0,  // debug
      0.0,  // signature
      1.0,  // relocations
      1.0,  // resources
      1.0,  // tls
      4.0,  // imported functions
      0.0,  // exports
      0.0,  // symbols
  };
  check_block_exact(v, "general", expected);

  const std::size_t off = feature_offset("general");
  const Eigen::VectorXd plain = extract_features(minimal_pe());
  for (std::size_t i = 2; i < 7; ++i) CHECK(plain[static_cast<Eigen::Index>(off + i)] == 0.0);
  CHECK(extract_features(cert_pe())[static_cast<Eigen::Index>(off + 3)] == 1.0);
  CHECK(extract_features(export_pe())[static_cast<Eigen::Index>(off + 8)] == 2.0);

  TinyPeSpec sym;
  sym.symbol_count = 17;
  sym.sections.push_back({".text", kCode, make_code(512), 0});
  CHECK(extract_features(build_tiny_pe(sym))[static_cast<Eigen::Index>(off + 9)] == 17.0);
}

TEST_CASE("header block separates scalars from hashed categorical slots") {
  const ByteBuf f = minimal_pe();
  const Eigen::VectorXd v = extract_features(f);

  std::vector<double> expected(62, 0.0);
  expected[0] = static_cast<double>(0x41424344);
  expected[1] = 0.0;  // stored checksum is zero
  expected[2 + hash_bin("machine:332", 10)] += 1.0;
  for (int bit : {1, 8})  // COFF characteristics 0x0102
    expected[12 + hash_bin("coff_char:" + std::to_string(bit), 10)] += 1.0;
  expected[22 + hash_bin("subsystem:3", 10)] += 1.0;
  for (int bit : {6, 8})  // DLL characteristics 0x0140
    expected[32 + hash_bin("dll_char:" + std::to_string(bit), 10)] += 1.0;
  expected[42 + hash_bin("magic:267", 9)] += 1.0;
  expected[51] = 14.0;
  expected[53] = 6.0;
  expected[55] = 1.0;
  expected[57] = 6.0;
  expected[59] = 512.0;   // size of code
  expected[60] = 512.0;   // size of headers
  expected[61] = 4096.0;  // heap commit
  check_block_exact(v, "header", expected);
}

TEST_CASE("checksum validity flag requires a nonzero exact match") {
  const std::size_t idx = checksum_valid_feature_index();
  CHECK(extract_features(minimal_pe())[static_cast<Eigen::Index>(idx)] == 0.0);

  PeImage img = parse(minimal_pe());
  ByteBuf good = serialize_with_checksum(img);
  CHECK(extract_features(good)[static_cast<Eigen::Index>(idx)] == 1.0);

  ByteBuf bad = good;
  put_u32(bad, parse(good).checksum_field_offset(), get_u32(good, parse(good).checksum_field_offset()) + 1);
  CHECK(extract_features(bad)[static_cast<Eigen::Index>(idx)] == 0.0);
}

TEST_CASE("sections block summarizes the table through hashed name maps") {
  const ByteBuf f = two_section_pe();
  const Eigen::VectorXd v = extract_features(f);
  const PeImage img = parse(f);

  std::vector<double> expected(255, 0.0);
  expected[0] = 2.0;  // section count
  expected[1] = 0.0;  // none without raw data
  expected[2] = 0.0;  // no RWX
  expected[3] = 0.0;  // entry in section 0
  expected[4] = 1.0;  // one executable
  for (const auto& sec : img.sections) {
    expected[5 + hash_bin(sec.name(), 50)] += static_cast<double>(sec.raw_size);
    expected[55 + hash_bin(sec.name(), 50)] += local_entropy(sec.data);
    expected[105 + hash_bin(sec.name(), 50)] += static_cast<double>(sec.virtual_size);
  }
  expected[155 + hash_bin(".text", 50)] += 1.0;
  for (int bit : {5, 29, 30})  // code | execute | read
    expected[205 + hash_bin("scn_char:" + std::to_string(bit), 50)] += 1.0;
  check_block_exact(v, "sections", expected);
}

TEST_CASE("sections block counts raw-less and writable-executable sections") {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode | kScnMemWrite, make_code(512), 0});
  spec.sections.push_back({".bss", 0xc0000080, ByteBuf{}, 64});
  const Eigen::VectorXd v = extract_features(build_tiny_pe(spec));
  const std::size_t off = feature_offset("sections");
  CHECK(v[static_cast<Eigen::Index>(off + 0)] == 2.0);
  CHECK(v[static_cast<Eigen::Index>(off + 1)] == 1.0);  // .bss has no raw bytes
  CHECK(v[static_cast<Eigen::Index>(off + 2)] == 1.0);  // .text is now RWX
  CHECK(v[static_cast<Eigen::Index>(off + 4)] == 1.0);
}

TEST_CASE("import block hashes libraries and library:function pairs") {
  const ByteBuf f = import_pe(false);
  const Eigen::VectorXd v = extract_features(f);

  std::vector<double> expected(1279, 0.0);
  expected[hash_bin("kernel32.dll", 255)] += 1.0;
  expected[hash_bin("user32.dll", 255)] += 1.0;
  for (const char* pair : {"kernel32.dll:ExitProcess", "kernel32.dll:GetProcAddress",
                           "user32.dll:MessageBoxA", "user32.dll:ord17"})
    expected[255 + hash_bin(pair, 1024)] += 1.0;
  check_block_exact(v, "imports", expected);

  // Library casing is folded before hashing: PE32+ twin hashes identically.
  const Eigen::VectorXd w = extract_features(import_pe(true));
  CHECK(blocks_equal(v, w, "imports"));
}

TEST_CASE("export block hashes the exported names") {
  const Eigen::VectorXd v = extract_features(export_pe());
  std::vector<double> expected(128, 0.0);
  expected[hash_bin("alpha", 128)] += 1.0;
  expected[hash_bin("omega", 128)] += 1.0;
  check_block_exact(v, "exports", expected);
}

TEST_CASE("each mutation lands in its own feature blocks") {
  const MutationEngine engine;
  const ByteBuf base = rich_fixture();
  const Eigen::VectorXd before = extract_features(base);
  REQUIRE(before[static_cast<Eigen::Index>(checksum_valid_feature_index())] == 1.0);

  SUBCASE("overlay append leaves structured blocks alone") {
    RandomDraw rng(41);
    const Eigen::VectorXd after =
        extract_features(engine.apply(base, ActionKind::kOverlayAppend, rng));
    CHECK(blocks_equal(before, after, "header"));
    CHECK(blocks_equal(before, after, "sections"));
    CHECK(blocks_equal(before, after, "imports"));
    CHECK(blocks_equal(before, after, "exports"));
    const std::size_t g = feature_offset("general");
    CHECK(after[static_cast<Eigen::Index>(g)] > before[static_cast<Eigen::Index>(g)]);  // size
    for (std::size_t i = 1; i < 10; ++i)
      CHECK(after[static_cast<Eigen::Index>(g + i)] == before[static_cast<Eigen::Index>(g + i)]);
    CHECK_FALSE(blocks_equal(before, after, "byte_histogram"));
  }
  SUBCASE("break_checksum flips exactly the validity flag") {
    RandomDraw rng(43);
    const Eigen::VectorXd after =
        extract_features(engine.apply(base, ActionKind::kBreakChecksum, rng));
    CHECK(blocks_equal(before, after, "general"));
    CHECK(blocks_equal(before, after, "sections"));
    CHECK(blocks_equal(before, after, "imports"));
    CHECK(blocks_equal(before, after, "exports"));
    const std::size_t h = feature_offset("header");
    CHECK(after[static_cast<Eigen::Index>(checksum_valid_feature_index())] == 0.0);
    for (std::size_t i = 0; i < 62; ++i) {
      if (h + i == checksum_valid_feature_index()) continue;
      CHECK(after[static_cast<Eigen::Index>(h + i)] == before[static_cast<Eigen::Index>(h + i)]);
    }
  }
  SUBCASE("section rename keeps imports, exports and general fixed") {
    RandomDraw rng(47);
    const Eigen::VectorXd after =
        extract_features(engine.apply(base, ActionKind::kSectionRename, rng));
    CHECK(blocks_equal(before, after, "imports"));
    CHECK(blocks_equal(before, after, "exports"));
    CHECK(blocks_equal(before, after, "general"));
    CHECK(blocks_equal(before, after, "header"));
    CHECK_FALSE(blocks_equal(before, after, "sections"));
  }
  SUBCASE("imports append shows up in the import block") {
    RandomDraw rng(53);
    const Eigen::VectorXd after =
        extract_features(engine.apply(base, ActionKind::kImportsAppend, rng));
    CHECK_FALSE(blocks_equal(before, after, "imports"));
    CHECK(blocks_equal(before, after, "exports"));
  }
}

TEST_CASE("mutations are visible in feature space") {
  const MutationEngine engine;
  const ByteBuf base = rich_fixture();
  const Eigen::VectorXd before = extract_features(base);
  std::size_t changed = 0, total = 0;
  for (auto kind : engine.available_actions()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      RandomDraw rng(seed * 1000 + static_cast<std::uint64_t>(kind));
      const Eigen::VectorXd after = extract_features(engine.apply(base, kind, rng));
      ++total;
      if ((after - before).cwiseAbs().maxCoeff() > 0.0) ++changed;
    }
  }
  REQUIRE(total == 180);
  CHECK(static_cast<double>(changed) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("extraction is deterministic") {
  const ByteBuf f = rich_fixture();
  const Eigen::VectorXd a = extract_features(f);
  const Eigen::VectorXd b = extract_features(f);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shannon entropy basics") {
  CHECK(shannon_entropy(ByteBuf{}) == 0.0);
  CHECK(shannon_entropy(ByteBuf(100, 7)) == 0.0);
  ByteBuf uniform(256);
  for (std::size_t i = 0; i < 256; ++i) uniform[i] = static_cast<std::uint8_t>(i);
  CHECK(shannon_entropy(uniform) == doctest::Approx(8.0));
  const ByteBuf half = {'a', 'a', 'b', 'b'};
  CHECK(shannon_entropy(half) == doctest::Approx(1.0));
}
