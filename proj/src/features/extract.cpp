#include "pevade/features/extract.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "pevade/util/fnv.hpp"

namespace pevade {

namespace {

constexpr std::size_t kByteHistDim = 256;
constexpr std::size_t kEntropyHistDim = 256;
constexpr std::size_t kStringsDim = 104;
constexpr std::size_t kGeneralDim = 10;
constexpr std::size_t kHeaderDim = 62;
constexpr std::size_t kSectionsDim = 255;
constexpr std::size_t kImportsDim = 1279;
constexpr std::size_t kExportsDim = 128;

constexpr std::size_t kEntropyWindow = 2048;
constexpr std::size_t kEntropyStride = 1024;

const std::array<FeatureBlock, 8> kBlocks = {{
    {"byte_histogram", 0, kByteHistDim},
    {"byte_entropy_histogram", 256, kEntropyHistDim},
    {"strings", 512, kStringsDim},
    {"general", 616, kGeneralDim},
    {"header", 626, kHeaderDim},
    {"sections", 688, kSectionsDim},
    {"imports", 943, kImportsDim},
    {"exports", 2222, kExportsDim},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

void fill_byte_histogram(const ByteBuf& bytes, double* out) {
  std::array<std::uint64_t, 256> counts{};
  for (auto b : bytes) ++counts[b];
  const double n = bytes.empty() ? 1.0 : static_cast<double>(bytes.size());
  for (std::size_t i = 0; i < 256; ++i) out[i] = static_cast<double>(counts[i]) / n;
}

double entropy_of_counts(const std::array<std::uint32_t, 256>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  const auto n = static_cast<double>(total);
  for (std::size_t i = 0; i < 256; ++i) {
    if (counts[i] == 0) continue;
    const double p = static_cast<double>(counts[i]) / n;
    h -= p * std::log2(p);
  }
  return h;
}

void fill_entropy_histogram(const ByteBuf& bytes, double* out) {
  std::array<std::uint64_t, 256> cells{};
  std::uint64_t total = 0;

  auto account_window = [&](std::size_t start, std::size_t len) {
    std::array<std::uint32_t, 256> counts{};
    for (std::size_t i = start; i < start + len; ++i) ++counts[bytes[i]];
    const double h = entropy_of_counts(counts, len);
    const auto hbin = std::min<std::size_t>(15, static_cast<std::size_t>(h * 2.0));
    for (std::size_t i = start; i < start + len; ++i) ++cells[hbin * 16 + (bytes[i] >> 4)];
    total += len;
  };

  if (bytes.size() < kEntropyWindow) {
    if (!bytes.empty()) account_window(0, bytes.size());
  } else {
    for (std::size_t off = 0; off + kEntropyWindow <= bytes.size(); off += kEntropyStride)
      account_window(off, kEntropyWindow);
  }
  const double n = total == 0 ? 1.0 : static_cast<double>(total);
  for (std::size_t i = 0; i < 256; ++i) out[i] = static_cast<double>(cells[i]) / n;
}

std::size_t count_substr(const ByteBuf& bytes, std::string_view needle) {
  if (needle.empty() || bytes.size() < needle.size()) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + needle.size() <= bytes.size(); ++i)
    if (std::memcmp(bytes.data() + i, needle.data(), needle.size()) == 0) ++count;
  return count;
}

// strings: [count, avg_length, char_hist(96), hist_entropy, paths, urls,
//           registry, mz, total_chars]
void fill_strings(const ByteBuf& bytes, double* out) {
  std::array<std::uint64_t, 96> hist{};
  std::uint64_t num_strings = 0, total_chars = 0;
  std::size_t run = 0;

  auto flush = [&](std::size_t end) {
    if (run >= 5) {
      ++num_strings;
      total_chars += run;
      for (std::size_t i = end - run; i < end; ++i) ++hist[bytes[i] - 0x20];
    }
    run = 0;
  };
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] >= 0x20 && bytes[i] <= 0x7f)
      ++run;
    else
      flush(i);
  }
  flush(bytes.size());

  out[0] = static_cast<double>(num_strings);
  out[1] = num_strings ? static_cast<double>(total_chars) / static_cast<double>(num_strings) : 0.0;
  const double denom = total_chars ? static_cast<double>(total_chars) : 1.0;
  double entropy = 0.0;
  for (std::size_t i = 0; i < 96; ++i) {
    const double p = static_cast<double>(hist[i]) / denom;
    out[2 + i] = p;
    if (p > 0.0) entropy -= p * std::log2(p);
  }
  out[98] = entropy;
  out[99] = static_cast<double>(count_substr(bytes, "C:\\"));
  out[100] = static_cast<double>(count_substr(bytes, "http"));
  out[101] = static_cast<double>(count_substr(bytes, "HKEY_"));
  out[102] = static_cast<double>(count_substr(bytes, "MZ"));
  out[103] = static_cast<double>(total_chars);
}

// general: [size, vsize, has_debug, has_signature, has_relocations,
//           has_resources, has_tls, imports, exports, symbols]
void fill_general(const PeImage& img, const ByteBuf& bytes, const ImportTable& imports,
                  const ExportTable& exports, double* out) {
  const auto& dirs = img.optional.data_dirs;
  out[0] = static_cast<double>(bytes.size());
  out[1] = static_cast<double>(img.optional.size_of_image);
  out[2] = dirs[kDirDebug].rva != 0 ? 1.0 : 0.0;
  out[3] = dirs[kDirSecurity].rva != 0 ? 1.0 : 0.0;
  out[4] = dirs[kDirBaseReloc].rva != 0 ? 1.0 : 0.0;
  out[5] = dirs[kDirResource].rva != 0 ? 1.0 : 0.0;
  out[6] = dirs[kDirTls].rva != 0 ? 1.0 : 0.0;
  out[7] = static_cast<double>(imports.function_count());
  out[8] = static_cast<double>(exports.names.size());
  out[9] = static_cast<double>(img.coff.symbol_count);
}

void hash_token(double* slot, std::size_t bins, const std::string& token, double weight = 1.0) {
  slot[hash_bin(token, bins)] += weight;
}

// header: [timestamp, checksum_valid, machine(10), coff_characteristics(10),
//          subsystem(10), dll_characteristics(10), magic(9),
//          linker_major, linker_minor, os_major, os_minor, image_major,
//          image_minor, subsystem_major, subsystem_minor,
//          size_of_code, size_of_headers, heap_commit]
void fill_header(const PeImage& img, const ByteBuf& bytes, double* out) {
  const OptionalHeader& o = img.optional;
  out[0] = static_cast<double>(img.coff.timestamp);
  out[1] = (o.checksum != 0 && o.checksum == compute_pe_checksum(bytes)) ? 1.0 : 0.0;
  hash_token(out + 2, 10, "machine:" + std::to_string(img.coff.machine));
  for (int bit = 0; bit < 16; ++bit)
    if (img.coff.characteristics & (1u << bit))
      hash_token(out + 12, 10, "coff_char:" + std::to_string(bit));
  hash_token(out + 22, 10, "subsystem:" + std::to_string(o.subsystem));
  for (int bit = 0; bit < 16; ++bit)
    if (o.dll_characteristics & (1u << bit))
      hash_token(out + 32, 10, "dll_char:" + std::to_string(bit));
  hash_token(out + 42, 9, "magic:" + std::to_string(o.magic));
  out[51] = o.linker_major;
  out[52] = o.linker_minor;
  out[53] = o.os_major;
  out[54] = o.os_minor;
  out[55] = o.image_major;
  out[56] = o.image_minor;
  out[57] = o.subsystem_major;
  out[58] = o.subsystem_minor;
  out[59] = static_cast<double>(o.size_of_code);
  out[60] = static_cast<double>(o.size_of_headers);
  out[61] = static_cast<double>(o.heap_commit);
}

// sections: [count, zero_raw, rwx, entry_index, executable] followed by
// five 50-bin hashes: raw sizes, entropies, virtual sizes, entry section
// name, entry section characteristic bits.
void fill_sections(const PeImage& img, double* out) {
  constexpr std::uint32_t kRwx = kScnMemRead | kScnMemWrite | kScnMemExecute;
  const int entry = img.section_index_containing_rva(img.optional.entry_point_rva);
  out[0] = static_cast<double>(img.sections.size());
  for (const auto& sec : img.sections) {
    if (sec.raw_size == 0) out[1] += 1.0;
    if ((sec.characteristics & kRwx) == kRwx) out[2] += 1.0;
    if (sec.characteristics & kScnMemExecute) out[4] += 1.0;
  }
  out[3] = static_cast<double>(entry);
  for (const auto& sec : img.sections) {
    const std::string name = sec.name();
    hash_token(out + 5, 50, name, static_cast<double>(sec.raw_size));
    hash_token(out + 55, 50, name, shannon_entropy(sec.data));
    hash_token(out + 105, 50, name, static_cast<double>(sec.virtual_size));
  }
  if (entry >= 0) {
    const Section& sec = img.sections[static_cast<std::size_t>(entry)];
    hash_token(out + 155, 50, sec.name());
    for (int bit = 0; bit < 32; ++bit)
      if (sec.characteristics & (1u << bit))
        hash_token(out + 205, 50, "scn_char:" + std::to_string(bit));
  }
}

// imports: hashed libraries (255) then hashed "library:function" pairs (1024)
void fill_imports(const ImportTable& imports, double* out) {
  for (const auto& lib : imports.libraries) {
    const std::string name = lower(lib.library);
    hash_token(out, 255, name);
    for (const auto& fn : lib.functions) hash_token(out + 255, 1024, name + ":" + fn);
  }
}

void fill_exports(const ExportTable& exports, double* out) {
  for (const auto& name : exports.names) hash_token(out, 128, name);
}

}  // namespace

const std::array<FeatureBlock, 8>& feature_blocks() { return kBlocks; }

std::size_t feature_offset(std::string_view block) { return feature_block(block).offset; }

const FeatureBlock& feature_block(std::string_view block) {
  for (const auto& b : kBlocks)
    if (b.name == block) return b;
  throw std::out_of_range("unknown feature block: " + std::string(block));
}

std::size_t checksum_valid_feature_index() { return feature_offset("header") + 1; }

double shannon_entropy(const std::uint8_t* data, std::size_t len) {
  if (len == 0) return 0.0;
  std::array<std::uint64_t, 256> counts{};
  for (std::size_t i = 0; i < len; ++i) ++counts[data[i]];
  double h = 0.0;
  const auto n = static_cast<double>(len);
  for (std::size_t i = 0; i < 256; ++i) {
    if (counts[i] == 0) continue;
    const double p = static_cast<double>(counts[i]) / n;
    h -= p * std::log2(p);
  }
  return h;
}

Eigen::VectorXd extract_features(const ByteBuf& bytes) {
  const PeImage img = parse(bytes);
  ImportTable imports;
  ExportTable exports;
  try {
    imports = parse_imports(img, bytes);
  } catch (const MalformedPeError&) {
  }
  try {
    exports = parse_exports(img, bytes);
  } catch (const MalformedPeError&) {
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kFeatureDim));
  double* p = v.data();
  fill_byte_histogram(bytes, p + kBlocks[0].offset);
  fill_entropy_histogram(bytes, p + kBlocks[1].offset);
  fill_strings(bytes, p + kBlocks[2].offset);
  fill_general(img, bytes, imports, exports, p + kBlocks[3].offset);
  fill_header(img, bytes, p + kBlocks[4].offset);
  fill_sections(img, p + kBlocks[5].offset);
  fill_imports(imports, p + kBlocks[6].offset);
  fill_exports(exports, p + kBlocks[7].offset);
  return v;
}

}  // namespace pevade
