#pragma once

// Hand-rolled PE fixtures and independent oracles for the test suites.
// Nothing in this header calls the library's serializer or extractor;
// layout math is written out from the documented PE/COFF field offsets so
// these byte buffers can disagree with the implementation under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pevade/util/bytes.hpp"

namespace testpe {

using pevade::ByteBuf;

inline std::uint32_t align_to(std::uint32_t v, std::uint32_t a) { return (v + a - 1) / a * a; }

struct TinySection {
  std::string name;
  std::uint32_t characteristics = 0;
  ByteBuf data;
  std::uint32_t vsize = 0;  // 0 means data.size()
};

struct TinyPeSpec {
  bool plus = false;
  std::uint16_t machine = 0x014c;
  std::uint32_t timestamp = 0x41424344;
  std::uint32_t symbol_count = 0;
  std::uint16_t coff_characteristics = 0x0102;  // executable image, 32-bit word machine
  std::uint32_t entry_rva = 0xffffffff;         // sentinel: first executable section
  std::uint32_t file_alignment = 512;
  std::uint32_t section_alignment = 4096;
  std::uint16_t subsystem = 3;
  std::uint16_t dll_characteristics = 0x0140;
  std::uint32_t checksum = 0;
  std::uint64_t heap_commit = 0x1000;
  ByteBuf dos_stub;
  std::vector<TinySection> sections;
  ByteBuf overlay;
  // data-directory pokes: index -> {rva, size}
  std::map<std::size_t, std::pair<std::uint32_t, std::uint32_t>> dirs;
};

struct TinyPeLayout {
  std::uint32_t e_lfanew = 0;
  std::uint32_t size_of_headers = 0;
  std::uint32_t size_of_image = 0;
  std::vector<std::uint32_t> va;
  std::vector<std::uint32_t> raw_off;
};

inline ByteBuf build_tiny_pe(TinyPeSpec spec, TinyPeLayout* layout_out = nullptr) {
  while ((64 + spec.dos_stub.size()) % 4 != 0) spec.dos_stub.push_back(0);
  const auto e_lfanew = static_cast<std::uint32_t>(64 + spec.dos_stub.size());
  const bool plus = spec.plus;
  const std::uint32_t opt_size = (plus ? 112u : 96u) + 16u * 8u;
  const auto nsec = static_cast<std::uint32_t>(spec.sections.size());
  const std::uint32_t table_end = e_lfanew + 4 + 20 + opt_size + 40 * nsec;
  const std::uint32_t soh = align_to(table_end, spec.file_alignment);

  TinyPeLayout lay;
  lay.e_lfanew = e_lfanew;
  lay.size_of_headers = soh;
  std::uint32_t cursor = soh;
  std::uint32_t vcur = align_to(std::max(soh, 1u), spec.section_alignment);
  std::uint32_t size_of_code = 0, size_of_init = 0;
  std::uint32_t base_of_code = 0, default_entry = 0;
  std::vector<std::uint32_t> vsizes;
  for (const auto& s : spec.sections) {
    const auto raw = static_cast<std::uint32_t>(s.data.size());
    const std::uint32_t vsz = s.vsize ? s.vsize : raw;
    vsizes.push_back(vsz);
    lay.va.push_back(vcur);
    if ((s.characteristics & 0x20000000u) && default_entry == 0) default_entry = vcur;
    if ((s.characteristics & 0x00000020u) && base_of_code == 0) base_of_code = vcur;
    if (s.characteristics & 0x00000020u) size_of_code += raw;
    if (s.characteristics & 0x00000040u) size_of_init += raw;
    vcur = align_to(lay.va.back() + std::max(vsz, 1u), spec.section_alignment);
    if (raw > 0) {
      lay.raw_off.push_back(cursor);
      cursor = align_to(cursor + raw, spec.file_alignment);
    } else {
      lay.raw_off.push_back(0);
    }
  }
  lay.size_of_image = vcur;
  const std::uint32_t entry = spec.entry_rva != 0xffffffff ? spec.entry_rva : default_entry;

  ByteBuf f;
  // DOS header
  f.push_back('M');
  f.push_back('Z');
  f.resize(64, 0);
  pevade::put_u32(f, 0x3c, e_lfanew);
  pevade::append_bytes(f, spec.dos_stub);
  // signature + COFF
  f.push_back('P');
  f.push_back('E');
  f.push_back(0);
  f.push_back(0);
  pevade::append_u16(f, spec.machine);
  pevade::append_u16(f, static_cast<std::uint16_t>(nsec));
  pevade::append_u32(f, spec.timestamp);
  pevade::append_u32(f, 0);  // symbol table ptr
  pevade::append_u32(f, spec.symbol_count);
  pevade::append_u16(f, static_cast<std::uint16_t>(opt_size));
  pevade::append_u16(f, spec.coff_characteristics);
  // optional header
  pevade::append_u16(f, plus ? 0x20b : 0x10b);
  f.push_back(14);  // linker major
  f.push_back(0);   // linker minor
  pevade::append_u32(f, size_of_code);
  pevade::append_u32(f, size_of_init);
  pevade::append_u32(f, 0);  // uninitialized
  pevade::append_u32(f, entry);
  pevade::append_u32(f, base_of_code);
  if (plus) {
    pevade::append_u64(f, 0x140000000ull);
  } else {
    pevade::append_u32(f, 0);  // base of data
    pevade::append_u32(f, 0x400000u);
  }
  pevade::append_u32(f, spec.section_alignment);
  pevade::append_u32(f, spec.file_alignment);
  pevade::append_u16(f, 6);  // os major
  pevade::append_u16(f, 0);
  pevade::append_u16(f, 1);  // image major
  pevade::append_u16(f, 0);
  pevade::append_u16(f, 6);  // subsystem major
  pevade::append_u16(f, 0);
  pevade::append_u32(f, 0);  // win32 version
  pevade::append_u32(f, lay.size_of_image);
  pevade::append_u32(f, soh);
  pevade::append_u32(f, spec.checksum);
  pevade::append_u16(f, spec.subsystem);
  pevade::append_u16(f, spec.dll_characteristics);
  if (plus) {
    pevade::append_u64(f, 0x100000ull);  // stack reserve
    pevade::append_u64(f, 0x1000ull);
    pevade::append_u64(f, 0x100000ull);  // heap reserve
    pevade::append_u64(f, spec.heap_commit);
  } else {
    pevade::append_u32(f, 0x100000u);
    pevade::append_u32(f, 0x1000u);
    pevade::append_u32(f, 0x100000u);
    pevade::append_u32(f, static_cast<std::uint32_t>(spec.heap_commit));
  }
  pevade::append_u32(f, 0);   // loader flags
  pevade::append_u32(f, 16);  // rva and sizes count
  for (std::size_t i = 0; i < 16; ++i) {
    const auto it = spec.dirs.find(i);
    pevade::append_u32(f, it == spec.dirs.end() ? 0 : it->second.first);
    pevade::append_u32(f, it == spec.dirs.end() ? 0 : it->second.second);
  }
  // section table
  for (std::size_t i = 0; i < spec.sections.size(); ++i) {
    const auto& s = spec.sections[i];
    for (std::size_t k = 0; k < 8; ++k)
      f.push_back(k < s.name.size() ? static_cast<std::uint8_t>(s.name[k]) : 0);
    pevade::append_u32(f, vsizes[i]);
    pevade::append_u32(f, lay.va[i]);
    pevade::append_u32(f, static_cast<std::uint32_t>(s.data.size()));
    pevade::append_u32(f, lay.raw_off[i]);
    pevade::append_u32(f, 0);
    pevade::append_u32(f, 0);
    pevade::append_u16(f, 0);
    pevade::append_u16(f, 0);
    pevade::append_u32(f, s.characteristics);
  }
  f.resize(soh, 0);  // header slack
  // raw section data with alignment gaps; no padding after the last one
  std::vector<std::size_t> raw_sections;
  for (std::size_t i = 0; i < spec.sections.size(); ++i)
    if (!spec.sections[i].data.empty()) raw_sections.push_back(i);
  for (std::size_t k = 0; k < raw_sections.size(); ++k) {
    const auto& s = spec.sections[raw_sections[k]];
    f.resize(lay.raw_off[raw_sections[k]], 0);
    pevade::append_bytes(f, s.data);
    if (k + 1 < raw_sections.size()) f.resize(lay.raw_off[raw_sections[k + 1]], 0);
  }
  pevade::append_bytes(f, spec.overlay);

  if (layout_out) *layout_out = lay;
  return f;
}

constexpr std::uint32_t kCode = 0x60000020;  // code | execute | read
constexpr std::uint32_t kData = 0xc0000040;  // initialized | read | write

// Deterministic filler that looks vaguely like machine code: mid entropy,
// a few embedded printable strings.
inline ByteBuf make_code(std::size_t n, std::uint32_t seed = 1) {
  static const std::array<std::uint8_t, 12> ops = {0x55, 0x8b, 0xec, 0x90, 0xc3, 0xe8,
                                                   0x83, 0xc4, 0x04, 0x33, 0xc0, 0x5d};
  ByteBuf out(n);
  std::uint32_t s = seed * 2654435761u + 12345u;
  for (auto& b : out) {
    s = s * 1664525u + 1013904223u;
    b = ops[(s >> 13) % ops.size()];
  }
  const std::string tag = "runtime error: invalid handle";
  for (std::size_t i = 0; i < tag.size() && i + 16 < n; ++i) out[16 + i] = static_cast<std::uint8_t>(tag[i]);
  return out;
}

inline ByteBuf minimal_pe() {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  return build_tiny_pe(spec);
}

inline ByteBuf two_section_pe() {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  ByteBuf data(512, 0);
  const std::string s = "C:\\windows http HKEY_LOCAL";
  std::copy(s.begin(), s.end(), data.begin() + 8);
  const std::string s2 = "hello world from the data section";
  std::copy(s2.begin(), s2.end(), data.begin() + 64);
  for (std::size_t i = 128; i < 512; ++i) data[i] = 0x41;
  spec.sections.push_back({".data", kData, std::move(data), 0});
  return build_tiny_pe(spec);
}

// Handcrafted import table: KERNEL32.dll -> {ExitProcess, GetProcAddress},
// USER32.dll -> {MessageBoxA, ord17}.
inline ByteBuf import_pe(bool plus = false, TinyPeLayout* layout_out = nullptr) {
  TinyPeSpec spec;
  spec.plus = plus;
  if (plus) spec.machine = 0x8664;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  spec.sections.push_back({".rdata", kData, ByteBuf(512, 0), 0});
  TinyPeLayout lay;
  build_tiny_pe(spec, &lay);  // first pass just to learn the .rdata RVA
  const std::uint32_t base = lay.va[1];
  const std::uint32_t tsz = plus ? 8 : 4;  // thunk entry size

  ByteBuf blob(512, 0);
  const std::uint32_t oft1 = 60, oft2 = oft1 + 3 * tsz, ft1 = oft2 + 3 * tsz, ft2 = ft1 + 3 * tsz;
  std::uint32_t pos = ft2 + 3 * tsz;
  auto put_hint = [&](const std::string& name) {
    const std::uint32_t at = pos;
    blob[pos] = 0;
    blob[pos + 1] = 0;
    for (std::size_t i = 0; i < name.size(); ++i) blob[pos + 2 + i] = static_cast<std::uint8_t>(name[i]);
    pos += static_cast<std::uint32_t>(2 + name.size() + 1);
    return at;
  };
  const std::uint32_t h_exit = put_hint("ExitProcess");
  const std::uint32_t h_gpa = put_hint("GetProcAddress");
  const std::uint32_t h_mba = put_hint("MessageBoxA");
  auto put_name = [&](const std::string& name) {
    const std::uint32_t at = pos;
    for (std::size_t i = 0; i < name.size(); ++i) blob[pos + i] = static_cast<std::uint8_t>(name[i]);
    pos += static_cast<std::uint32_t>(name.size() + 1);
    return at;
  };
  const std::uint32_t n_k32 = put_name("KERNEL32.dll");
  const std::uint32_t n_u32 = put_name("USER32.dll");

  auto put_thunk = [&](std::uint32_t at, std::uint64_t value) {
    if (plus)
      pevade::put_u64(blob, at, value);
    else
      pevade::put_u32(blob, at, static_cast<std::uint32_t>(value));
  };
  const std::uint64_t ord17 = (plus ? (1ull << 63) : (1ull << 31)) | 17u;
  put_thunk(oft1, base + h_exit);
  put_thunk(oft1 + tsz, base + h_gpa);
  put_thunk(oft2, base + h_mba);
  put_thunk(oft2 + tsz, ord17);
  put_thunk(ft1, base + h_exit);
  put_thunk(ft1 + tsz, base + h_gpa);
  put_thunk(ft2, base + h_mba);
  put_thunk(ft2 + tsz, ord17);

  auto put_desc = [&](std::uint32_t at, std::uint32_t oft, std::uint32_t name, std::uint32_t ft) {
    pevade::put_u32(blob, at, oft ? base + oft : 0);
    pevade::put_u32(blob, at + 4, 0);
    pevade::put_u32(blob, at + 8, 0);
    pevade::put_u32(blob, at + 12, name ? base + name : 0);
    pevade::put_u32(blob, at + 16, ft ? base + ft : 0);
  };
  put_desc(0, oft1, n_k32, ft1);
  put_desc(20, oft2, n_u32, ft2);
  put_desc(40, 0, 0, 0);

  spec.sections[1].data = std::move(blob);
  spec.dirs[1] = {base, 60};
  return build_tiny_pe(spec, layout_out);
}

// Handcrafted export name table: {"alpha", "omega"}.
inline ByteBuf export_pe() {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  spec.sections.push_back({".rdata", kData, ByteBuf(512, 0), 0});
  TinyPeLayout lay;
  build_tiny_pe(spec, &lay);
  const std::uint32_t base = lay.va[1];

  ByteBuf blob(512, 0);
  const std::uint32_t names_tbl = 40, n1 = 48, n2 = 54, dll = 60;
  pevade::put_u32(blob, 12, base + dll);  // dll name rva
  pevade::put_u32(blob, 16, 1);           // ordinal base
  pevade::put_u32(blob, 20, 2);           // function count
  pevade::put_u32(blob, 24, 2);           // name count
  pevade::put_u32(blob, 28, 0);           // address-of-functions (unused here)
  pevade::put_u32(blob, 32, base + names_tbl);
  pevade::put_u32(blob, 36, 0);
  pevade::put_u32(blob, names_tbl, base + n1);
  pevade::put_u32(blob, names_tbl + 4, base + n2);
  const std::string a = "alpha", o = "omega", d = "tiny.dll";
  std::copy(a.begin(), a.end(), blob.begin() + n1);
  std::copy(o.begin(), o.end(), blob.begin() + n2);
  std::copy(d.begin(), d.end(), blob.begin() + dll);

  spec.sections[1].data = std::move(blob);
  spec.dirs[0] = {base, 40};
  return build_tiny_pe(spec);
}

// Certificate blob parked in the overlay, security directory pointing at it
// by file offset.
inline ByteBuf cert_pe(std::uint32_t cert_size = 64) {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  TinyPeLayout lay;
  build_tiny_pe(spec, &lay);
  const std::uint32_t content_end = lay.raw_off[0] + 512;
  spec.overlay.assign(cert_size, 0xab);
  spec.dirs[4] = {content_end, cert_size};
  return build_tiny_pe(spec);
}

// Debug directory descriptor living inside .rdata.
inline ByteBuf debug_pe() {
  TinyPeSpec spec;
  spec.sections.push_back({".text", kCode, make_code(512), 0});
  spec.sections.push_back({".rdata", kData, ByteBuf(512, 0x11), 0});
  TinyPeLayout lay;
  build_tiny_pe(spec, &lay);
  spec.dirs[6] = {lay.va[1], 28};
  return build_tiny_pe(spec);
}

// ----- independent oracles -----

// PE image checksum, written from the documented algorithm with a different
// accumulation strategy (wide sum, folded once at the end).
inline std::uint32_t oracle_checksum(const ByteBuf& f) {
  const std::size_t pe_off = static_cast<std::size_t>(f[0x3c]) | (static_cast<std::size_t>(f[0x3d]) << 8) |
                             (static_cast<std::size_t>(f[0x3e]) << 16) |
                             (static_cast<std::size_t>(f[0x3f]) << 24);
  const std::size_t csum_off = pe_off + 4 + 20 + 64;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < f.size(); i += 2) {
    if (i >= csum_off && i < csum_off + 4) continue;
    std::uint64_t word = f[i];
    if (i + 1 < f.size()) word |= static_cast<std::uint64_t>(f[i + 1]) << 8;
    sum += word;
  }
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint32_t>(sum) + static_cast<std::uint32_t>(f.size());
}

// Windowed byte/entropy joint histogram: 2048-byte windows at stride 1024,
// one short window only when the whole file is shorter than a window; each
// byte lands in cell (entropy bin) * 16 + (high nibble); normalized.
inline std::array<double, 256> oracle_entropy_hist(const ByteBuf& bytes) {
  std::array<double, 256> out{};
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (bytes.size() < 2048) {
    if (!bytes.empty()) windows.emplace_back(0, bytes.size());
  } else {
    for (std::size_t start = 0; start + 2048 <= bytes.size(); start += 1024)
      windows.emplace_back(start, 2048);
  }
  std::array<std::uint64_t, 256> cells{};
  std::uint64_t total = 0;
  for (const auto& [start, len] : windows) {
    std::array<std::uint64_t, 256> counts{};
    for (std::size_t i = 0; i < len; ++i) ++counts[bytes[start + i]];
    double h = 0.0;
    for (std::size_t v = 0; v < 256; ++v) {
      if (!counts[v]) continue;
      const double p = static_cast<double>(counts[v]) / static_cast<double>(len);
      h -= p * std::log2(p);
    }
    auto hbin = static_cast<std::size_t>(h * 2.0);
    if (hbin > 15) hbin = 15;
    for (std::size_t i = 0; i < len; ++i) ++cells[hbin * 16 + (bytes[start + i] >> 4)];
    total += len;
  }
  if (total == 0) return out;
  for (std::size_t i = 0; i < 256; ++i)
    out[i] = static_cast<double>(cells[i]) / static_cast<double>(total);
  return out;
}

// Exhaustive pairwise ROC-AUC with half credit for ties.
inline double oracle_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::uint64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return pairs ? wins / static_cast<double>(pairs) : 0.5;
}

// Positional byte differences plus any length difference.
inline std::size_t diff_bytes(const ByteBuf& a, const ByteBuf& b) {
  const std::size_t common = std::min(a.size(), b.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < common; ++i)
    if (a[i] != b[i]) ++diffs;
  return diffs + (std::max(a.size(), b.size()) - common);
}

// Positional differences outside the 4-byte checksum field.
inline std::size_t diff_bytes_excluding(const ByteBuf& a, const ByteBuf& b, std::size_t skip_off) {
  const std::size_t common = std::min(a.size(), b.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < common; ++i) {
    if (i >= skip_off && i < skip_off + 4) continue;
    if (a[i] != b[i]) ++diffs;
  }
  return diffs + (std::max(a.size(), b.size()) - common);
}

}  // namespace testpe
