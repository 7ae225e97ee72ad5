#include "pevade/pe/image.hpp"

#include <algorithm>

namespace pevade {

std::uint32_t align_up(std::uint32_t v, std::uint32_t a) {
  if (a == 0) return v;
  return (v + a - 1) / a * a;
}

std::string Section::name() const {
  std::string out;
  for (auto c : name_raw) {
    if (c == 0) break;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

void Section::set_name(const std::string& n) {
  name_raw.fill(0);
  for (std::size_t i = 0; i < n.size() && i < 8; ++i) name_raw[i] = static_cast<std::uint8_t>(n[i]);
}

std::size_t ImportTable::function_count() const {
  std::size_t n = 0;
  for (const auto& lib : libraries) n += lib.functions.size();
  return n;
}

namespace {

constexpr std::size_t kDosHeaderSize = 64;
constexpr std::size_t kCoffSize = 20;
constexpr std::size_t kSectionHeaderSize = 40;

bool is_pow2(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::size_t optional_layout_size(std::uint16_t magic, std::uint32_t ndirs) {
  return (magic == kMagicPe32 ? 96u : 112u) + 8u * ndirs;
}

// table order restricted to sections that occupy file space
std::vector<std::size_t> raw_bearing(const std::vector<Section>& sections) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sections.size(); ++i)
    if (sections[i].raw_size > 0) idx.push_back(i);
  return idx;
}

}  // namespace

PeImage parse(const ByteBuf& b) {
  if (b.size() < 2 || b[0] != 'M' || b[1] != 'Z') throw NotPeError("missing MZ signature");
  if (b.size() < kDosHeaderSize) throw NotPeError("file shorter than DOS header");
  const std::uint32_t e_lfanew = get_u32(b, 0x3c);
  if (e_lfanew < kDosHeaderSize || static_cast<std::size_t>(e_lfanew) + 4 > b.size())
    throw NotPeError("e_lfanew out of range");
  if (b[e_lfanew] != 'P' || b[e_lfanew + 1] != 'E' || b[e_lfanew + 2] != 0 || b[e_lfanew + 3] != 0)
    throw NotPeError("missing PE signature");
  if (e_lfanew % 4 != 0) throw MalformedPeError("unaligned PE header");

  PeImage img;
  img.e_lfanew = e_lfanew;
  img.dos_header.assign(b.begin(), b.begin() + kDosHeaderSize);
  img.dos_stub.assign(b.begin() + kDosHeaderSize, b.begin() + e_lfanew);

  std::size_t off = e_lfanew + 4;
  if (off + kCoffSize > b.size()) throw MalformedPeError("COFF header truncated");
  CoffHeader& c = img.coff;
  c.machine = get_u16(b, off);
  c.section_count = get_u16(b, off + 2);
  c.timestamp = get_u32(b, off + 4);
  c.symbol_table_ptr = get_u32(b, off + 8);
  c.symbol_count = get_u32(b, off + 12);
  c.optional_header_size = get_u16(b, off + 16);
  c.characteristics = get_u16(b, off + 18);
  off += kCoffSize;

  if (c.section_count < 1 || c.section_count > 96) throw MalformedPeError("implausible section count");
  if (off + c.optional_header_size > b.size()) throw MalformedPeError("optional header truncated");
  if (c.optional_header_size < 96 + 8) throw MalformedPeError("optional header too small");

  OptionalHeader& o = img.optional;
  o.magic = get_u16(b, off);
  if (o.magic != kMagicPe32 && o.magic != kMagicPe32Plus) throw MalformedPeError("unknown optional magic");
  const bool plus = o.magic == kMagicPe32Plus;
  o.linker_major = b[off + 2];
  o.linker_minor = b[off + 3];
  o.size_of_code = get_u32(b, off + 4);
  o.size_of_initialized_data = get_u32(b, off + 8);
  o.size_of_uninitialized_data = get_u32(b, off + 12);
  o.entry_point_rva = get_u32(b, off + 16);
  o.base_of_code = get_u32(b, off + 20);
  if (plus) {
    o.image_base = get_u64(b, off + 24);
  } else {
    o.base_of_data = get_u32(b, off + 24);
    o.image_base = get_u32(b, off + 28);
  }
  o.section_alignment = get_u32(b, off + 32);
  o.file_alignment = get_u32(b, off + 36);
  o.os_major = get_u16(b, off + 40);
  o.os_minor = get_u16(b, off + 42);
  o.image_major = get_u16(b, off + 44);
  o.image_minor = get_u16(b, off + 46);
  o.subsystem_major = get_u16(b, off + 48);
  o.subsystem_minor = get_u16(b, off + 50);
  o.win32_version = get_u32(b, off + 52);
  o.size_of_image = get_u32(b, off + 56);
  o.size_of_headers = get_u32(b, off + 60);
  o.checksum = get_u32(b, off + 64);
  o.subsystem = get_u16(b, off + 68);
  o.dll_characteristics = get_u16(b, off + 70);
  if (plus) {
    o.stack_reserve = get_u64(b, off + 72);
    o.stack_commit = get_u64(b, off + 80);
    o.heap_reserve = get_u64(b, off + 88);
    o.heap_commit = get_u64(b, off + 96);
    o.loader_flags = get_u32(b, off + 104);
    o.rva_and_sizes_count = get_u32(b, off + 108);
  } else {
    o.stack_reserve = get_u32(b, off + 72);
    o.stack_commit = get_u32(b, off + 76);
    o.heap_reserve = get_u32(b, off + 80);
    o.heap_commit = get_u32(b, off + 84);
    o.loader_flags = get_u32(b, off + 88);
    o.rva_and_sizes_count = get_u32(b, off + 92);
  }
  if (o.rva_and_sizes_count < 1 || o.rva_and_sizes_count > 16)
    throw MalformedPeError("implausible data directory count");
  if (optional_layout_size(o.magic, o.rva_and_sizes_count) != c.optional_header_size)
    throw MalformedPeError("optional header size inconsistent with directory count");
  if (!is_pow2(o.file_alignment) || o.file_alignment < 512 || o.file_alignment > 65536)
    throw MalformedPeError("bad file alignment");
  if (!is_pow2(o.section_alignment) || o.section_alignment < o.file_alignment)
    throw MalformedPeError("bad section alignment");

  const std::size_t dirs_off = off + (plus ? 112 : 96);
  for (std::uint32_t i = 0; i < o.rva_and_sizes_count; ++i) {
    o.data_dirs[i].rva = get_u32(b, dirs_off + 8 * i);
    o.data_dirs[i].size = get_u32(b, dirs_off + 8 * i + 4);
  }
  off += c.optional_header_size;

  const std::size_t table_end = off + kSectionHeaderSize * c.section_count;
  if (table_end > b.size()) throw MalformedPeError("section table truncated");
  for (std::uint16_t i = 0; i < c.section_count; ++i) {
    const std::size_t s = off + kSectionHeaderSize * i;
    Section sec;
    std::copy(b.begin() + s, b.begin() + s + 8, sec.name_raw.begin());
    sec.virtual_size = get_u32(b, s + 8);
    sec.virtual_address = get_u32(b, s + 12);
    sec.raw_size = get_u32(b, s + 16);
    sec.raw_offset = get_u32(b, s + 20);
    sec.reloc_ptr = get_u32(b, s + 24);
    sec.linenum_ptr = get_u32(b, s + 28);
    sec.reloc_count = get_u16(b, s + 32);
    sec.linenum_count = get_u16(b, s + 34);
    sec.characteristics = get_u32(b, s + 36);
    img.sections.push_back(std::move(sec));
  }

  const std::uint32_t soh = o.size_of_headers;
  if (soh < table_end || soh > b.size()) throw MalformedPeError("size_of_headers out of range");

  // File layout: strictly ascending raw extents, first one at size_of_headers.
  const auto raws = raw_bearing(img.sections);
  std::size_t cursor = soh;
  for (std::size_t k = 0; k < raws.size(); ++k) {
    Section& sec = img.sections[raws[k]];
    if (sec.raw_offset % o.file_alignment != 0) throw MalformedPeError("unaligned section data");
    if (k == 0 && sec.raw_offset != soh) throw MalformedPeError("first section does not start at size_of_headers");
    if (sec.raw_offset < cursor) throw MalformedPeError("overlapping or out-of-order sections");
    const std::size_t end = static_cast<std::size_t>(sec.raw_offset) + sec.raw_size;
    if (end > b.size()) throw MalformedPeError("section data out of range");
    cursor = end;
  }
  std::uint32_t prev_va = 0;
  for (const auto& sec : img.sections) {
    if (sec.virtual_address < soh || sec.virtual_address <= prev_va)
      throw MalformedPeError("bad section virtual layout");
    prev_va = sec.virtual_address;
  }

  img.header_slack.assign(b.begin() + table_end, b.begin() + soh);

  // Section payloads plus any verbatim inter-section gap bytes.
  for (std::size_t k = 0; k < raws.size(); ++k) {
    Section& sec = img.sections[raws[k]];
    const std::size_t start = sec.raw_offset;
    const std::size_t end = start + sec.raw_size;
    sec.data.assign(b.begin() + start, b.begin() + end);
    const std::size_t next =
        (k + 1 < raws.size()) ? img.sections[raws[k + 1]].raw_offset : end;
    sec.trailing_gap.assign(b.begin() + end, b.begin() + next);
  }
  const std::size_t content_end = raws.empty()
                                      ? soh
                                      : static_cast<std::size_t>(img.sections[raws.back()].raw_offset) +
                                            img.sections[raws.back()].raw_size;
  img.overlay.assign(b.begin() + content_end, b.end());

  const DataDirectory& sec_dir = img.optional.data_dirs[kDirSecurity];
  if (sec_dir.rva != 0 &&
      static_cast<std::size_t>(sec_dir.rva) + sec_dir.size > b.size())
    throw MalformedPeError("certificate table out of range");

  return img;
}

ByteBuf serialize(const PeImage& img) {
  PeImage work = img;  // relayout may adjust offsets
  OptionalHeader& o = work.optional;
  CoffHeader& c = work.coff;

  if (work.dos_header.size() != kDosHeaderSize) throw MalformedPeError("DOS header must be 64 bytes");
  for (const auto& sec : work.sections)
    if (sec.data.size() != sec.raw_size) throw MalformedPeError("section data length != raw_size");

  c.section_count = static_cast<std::uint16_t>(work.sections.size());
  c.optional_header_size =
      static_cast<std::uint16_t>(optional_layout_size(o.magic, o.rva_and_sizes_count));

  const std::size_t table_end = static_cast<std::size_t>(work.e_lfanew) + 4 + kCoffSize +
                                c.optional_header_size +
                                kSectionHeaderSize * work.sections.size();
  const auto raws = raw_bearing(work.sections);
  const std::size_t content_start =
      raws.empty() ? o.size_of_headers : work.sections[raws[0]].raw_offset;

  if (table_end <= content_start) {
    // Slack absorbs section table growth; keep its tail bytes.
    const std::size_t needed = content_start - table_end;
    if (work.header_slack.size() < needed)
      work.header_slack.insert(work.header_slack.begin(), needed - work.header_slack.size(), 0);
    else if (work.header_slack.size() > needed)
      work.header_slack.erase(work.header_slack.begin(),
                              work.header_slack.end() - static_cast<std::ptrdiff_t>(needed));
  } else {
    // Header region must grow; shift data by a file-alignment multiple so
    // section offsets stay aligned.
    const auto deficit = static_cast<std::uint32_t>(table_end - content_start);
    const std::uint32_t shift = align_up(deficit, o.file_alignment);
    const std::uint32_t old_soh = o.size_of_headers;
    const std::uint32_t new_soh = old_soh + shift;
    for (const auto& sec : work.sections)
      if (sec.virtual_address < new_soh)
        throw LayoutOverflowError("section table grew past first section RVA");
    work.header_slack.assign(shift - deficit, 0);
    o.size_of_headers = new_soh;
    for (auto i : raws) work.sections[i].raw_offset += shift;
    DataDirectory& cert = o.data_dirs[kDirSecurity];
    if (cert.rva >= old_soh) cert.rva += shift;
  }

  // Re-derive the fields that depend on the section list.
  std::uint32_t max_virtual = o.size_of_headers;
  for (const auto& sec : work.sections)
    max_virtual = std::max(max_virtual, sec.virtual_address + std::max(sec.virtual_size, 1u));
  o.size_of_image = align_up(max_virtual, o.section_alignment);

  ByteBuf out;
  out.reserve(work.end_of_section_file_extent() + work.overlay.size());
  append_bytes(out, work.dos_header);
  put_u32(out, 0x3c, work.e_lfanew);
  append_bytes(out, work.dos_stub);

  out.push_back('P');
  out.push_back('E');
  out.push_back(0);
  out.push_back(0);
  append_u16(out, c.machine);
  append_u16(out, c.section_count);
  append_u32(out, c.timestamp);
  append_u32(out, c.symbol_table_ptr);
  append_u32(out, c.symbol_count);
  append_u16(out, c.optional_header_size);
  append_u16(out, c.characteristics);

  const bool plus = o.is_pe32_plus();
  append_u16(out, o.magic);
  out.push_back(o.linker_major);
  out.push_back(o.linker_minor);
  append_u32(out, o.size_of_code);
  append_u32(out, o.size_of_initialized_data);
  append_u32(out, o.size_of_uninitialized_data);
  append_u32(out, o.entry_point_rva);
  append_u32(out, o.base_of_code);
  if (plus) {
    append_u64(out, o.image_base);
  } else {
    append_u32(out, o.base_of_data);
    append_u32(out, static_cast<std::uint32_t>(o.image_base));
  }
  append_u32(out, o.section_alignment);
  append_u32(out, o.file_alignment);
  append_u16(out, o.os_major);
  append_u16(out, o.os_minor);
  append_u16(out, o.image_major);
  append_u16(out, o.image_minor);
  append_u16(out, o.subsystem_major);
  append_u16(out, o.subsystem_minor);
  append_u32(out, o.win32_version);
  append_u32(out, o.size_of_image);
  append_u32(out, o.size_of_headers);
  append_u32(out, o.checksum);
  append_u16(out, o.subsystem);
  append_u16(out, o.dll_characteristics);
  if (plus) {
    append_u64(out, o.stack_reserve);
    append_u64(out, o.stack_commit);
    append_u64(out, o.heap_reserve);
    append_u64(out, o.heap_commit);
  } else {
    append_u32(out, static_cast<std::uint32_t>(o.stack_reserve));
    append_u32(out, static_cast<std::uint32_t>(o.stack_commit));
    append_u32(out, static_cast<std::uint32_t>(o.heap_reserve));
    append_u32(out, static_cast<std::uint32_t>(o.heap_commit));
  }
  append_u32(out, o.loader_flags);
  append_u32(out, o.rva_and_sizes_count);
  for (std::uint32_t i = 0; i < o.rva_and_sizes_count; ++i) {
    append_u32(out, o.data_dirs[i].rva);
    append_u32(out, o.data_dirs[i].size);
  }

  for (const auto& sec : work.sections) {
    out.insert(out.end(), sec.name_raw.begin(), sec.name_raw.end());
    append_u32(out, sec.virtual_size);
    append_u32(out, sec.virtual_address);
    append_u32(out, sec.raw_size);
    append_u32(out, sec.raw_offset);
    append_u32(out, sec.reloc_ptr);
    append_u32(out, sec.linenum_ptr);
    append_u16(out, sec.reloc_count);
    append_u16(out, sec.linenum_count);
    append_u32(out, sec.characteristics);
  }
  append_bytes(out, work.header_slack);

  for (auto i : raws) {
    const Section& sec = work.sections[i];
    if (out.size() != sec.raw_offset)
      throw MalformedPeError("section offsets inconsistent with layout");
    append_bytes(out, sec.data);
    append_bytes(out, sec.trailing_gap);
  }
  append_bytes(out, work.overlay);
  return out;
}

std::uint32_t checksum_fold(const ByteBuf& bytes, std::size_t skip_offset) {
  std::uint32_t sum = 0;
  const std::size_t n = bytes.size();
  for (std::size_t i = 0; i < n; i += 2) {
    if (i == skip_offset || i == skip_offset + 2) continue;
    std::uint32_t word = bytes[i];
    if (i + 1 < n) word |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
    sum += word;
    sum = (sum & 0xffff) + (sum >> 16);
  }
  sum = (sum & 0xffff) + (sum >> 16);
  return sum;
}

std::uint32_t compute_pe_checksum(const ByteBuf& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'M' || bytes[1] != 'Z') throw NotPeError("missing MZ signature");
  if (bytes.size() < kDosHeaderSize) throw NotPeError("file shorter than DOS header");
  const std::uint32_t e_lfanew = get_u32(bytes, 0x3c);
  if (e_lfanew < kDosHeaderSize || static_cast<std::size_t>(e_lfanew) + 4 + kCoffSize + 68 > bytes.size())
    throw NotPeError("e_lfanew out of range");
  if (bytes[e_lfanew] != 'P' || bytes[e_lfanew + 1] != 'E' || bytes[e_lfanew + 2] != 0 ||
      bytes[e_lfanew + 3] != 0)
    throw NotPeError("missing PE signature");
  const std::size_t checksum_off = static_cast<std::size_t>(e_lfanew) + 4 + kCoffSize + 64;
  return checksum_fold(bytes, checksum_off) + static_cast<std::uint32_t>(bytes.size());
}

ByteBuf serialize_with_checksum(PeImage& img) {
  img.optional.checksum = 0;
  ByteBuf out = serialize(img);
  const std::uint32_t sum = compute_pe_checksum(out);
  img.optional.checksum = sum;
  put_u32(out, img.checksum_field_offset(), sum);
  return out;
}

std::optional<std::size_t> PeImage::rva_to_offset(std::uint32_t rva) const {
  if (rva < optional.size_of_headers) return static_cast<std::size_t>(rva);
  for (const auto& sec : sections) {
    const std::uint32_t extent = align_up(std::max(sec.virtual_size, 1u), optional.section_alignment);
    if (rva >= sec.virtual_address && rva < sec.virtual_address + extent) {
      const std::uint32_t delta = rva - sec.virtual_address;
      if (delta < sec.raw_size) return static_cast<std::size_t>(sec.raw_offset) + delta;
      return std::nullopt;  // zero-filled virtual tail
    }
  }
  return std::nullopt;
}

const Section* PeImage::section_containing_rva(std::uint32_t rva) const {
  const int i = section_index_containing_rva(rva);
  return i < 0 ? nullptr : &sections[static_cast<std::size_t>(i)];
}

int PeImage::section_index_containing_rva(std::uint32_t rva) const {
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& sec = sections[i];
    const std::uint32_t extent =
        align_up(std::max(std::max(sec.virtual_size, sec.raw_size), 1u), optional.section_alignment);
    if (rva >= sec.virtual_address && rva < sec.virtual_address + extent) return static_cast<int>(i);
  }
  return -1;
}

std::uint32_t PeImage::next_free_rva() const {
  std::uint32_t max_end = optional.size_of_headers;
  for (const auto& sec : sections)
    max_end = std::max(max_end, sec.virtual_address + std::max(sec.virtual_size, sec.raw_size));
  return align_up(std::max(max_end, 1u), optional.section_alignment);
}

std::size_t PeImage::end_of_section_file_extent() const {
  std::size_t end = optional.size_of_headers;
  for (const auto& sec : sections)
    if (sec.raw_size > 0)
      end = std::max(end, static_cast<std::size_t>(sec.raw_offset) + sec.raw_size + sec.trailing_gap.size());
  return end;
}

namespace {

std::string read_cstring(const PeImage& img, const ByteBuf& raw, std::uint32_t rva, std::size_t cap) {
  std::string out;
  for (std::size_t i = 0; i < cap; ++i) {
    auto off = img.rva_to_offset(rva + static_cast<std::uint32_t>(i));
    if (!off || *off >= raw.size()) throw MalformedPeError("string RVA unresolvable");
    const char ch = static_cast<char>(raw[*off]);
    if (ch == 0) return out;
    out.push_back(ch);
  }
  throw MalformedPeError("unterminated string");
}

std::uint32_t read_u32_rva(const PeImage& img, const ByteBuf& raw, std::uint32_t rva) {
  auto off = img.rva_to_offset(rva);
  if (!off || *off + 4 > raw.size()) throw MalformedPeError("RVA unresolvable");
  return get_u32(raw, *off);
}

std::uint64_t read_u64_rva(const PeImage& img, const ByteBuf& raw, std::uint32_t rva) {
  auto off = img.rva_to_offset(rva);
  if (!off || *off + 8 > raw.size()) throw MalformedPeError("RVA unresolvable");
  return get_u64(raw, *off);
}

}  // namespace

ImportTable parse_imports(const PeImage& img, const ByteBuf& raw) {
  ImportTable table;
  const DataDirectory& dir = img.optional.data_dirs[kDirImport];
  if (dir.rva == 0) return table;
  const bool plus = img.optional.is_pe32_plus();

  for (std::uint32_t i = 0; i < 256; ++i) {
    const std::uint32_t desc_rva = dir.rva + 20 * i;
    ImportedLibrary lib;
    lib.original_first_thunk = read_u32_rva(img, raw, desc_rva);
    lib.timestamp = read_u32_rva(img, raw, desc_rva + 4);
    lib.forwarder_chain = read_u32_rva(img, raw, desc_rva + 8);
    lib.name_rva = read_u32_rva(img, raw, desc_rva + 12);
    lib.first_thunk = read_u32_rva(img, raw, desc_rva + 16);
    if (lib.original_first_thunk == 0 && lib.name_rva == 0 && lib.first_thunk == 0) return table;

    lib.library = read_cstring(img, raw, lib.name_rva, 256);
    if (lib.library.empty()) throw MalformedPeError("empty import library name");

    std::uint32_t thunk_rva = lib.original_first_thunk ? lib.original_first_thunk : lib.first_thunk;
    for (std::uint32_t t = 0; t < 4096; ++t) {
      std::uint64_t entry = plus ? read_u64_rva(img, raw, thunk_rva) : read_u32_rva(img, raw, thunk_rva);
      if (entry == 0) break;
      const std::uint64_t ordinal_bit = plus ? (1ull << 63) : (1ull << 31);
      if (entry & ordinal_bit) {
        lib.functions.push_back("ord" + std::to_string(entry & 0xffff));
      } else {
        lib.functions.push_back(read_cstring(img, raw, static_cast<std::uint32_t>(entry) + 2, 512));
      }
      thunk_rva += plus ? 8 : 4;
    }
    table.libraries.push_back(std::move(lib));
  }
  throw MalformedPeError("import descriptor list not terminated");
}

ExportTable parse_exports(const PeImage& img, const ByteBuf& raw) {
  ExportTable table;
  const DataDirectory& dir = img.optional.data_dirs[kDirExport];
  if (dir.rva == 0) return table;

  const std::uint32_t name_count = read_u32_rva(img, raw, dir.rva + 24);
  const std::uint32_t names_rva = read_u32_rva(img, raw, dir.rva + 32);
  if (name_count > 4096) throw MalformedPeError("implausible export name count");
  for (std::uint32_t i = 0; i < name_count; ++i) {
    const std::uint32_t name_rva = read_u32_rva(img, raw, names_rva + 4 * i);
    table.names.push_back(read_cstring(img, raw, name_rva, 512));
  }
  return table;
}

namespace {

bool sections_equal(const Section& a, const Section& b) {
  return a.name_raw == b.name_raw && a.virtual_size == b.virtual_size &&
         a.virtual_address == b.virtual_address && a.raw_size == b.raw_size &&
         a.raw_offset == b.raw_offset && a.reloc_ptr == b.reloc_ptr && a.linenum_ptr == b.linenum_ptr &&
         a.reloc_count == b.reloc_count && a.linenum_count == b.linenum_count &&
         a.characteristics == b.characteristics && a.data == b.data && a.trailing_gap == b.trailing_gap;
}

}  // namespace

bool structurally_equal(const PeImage& a, const PeImage& b) {
  if (a.dos_header != b.dos_header || a.e_lfanew != b.e_lfanew || a.dos_stub != b.dos_stub) return false;
  const CoffHeader &ca = a.coff, &cb = b.coff;
  if (ca.machine != cb.machine || ca.section_count != cb.section_count || ca.timestamp != cb.timestamp ||
      ca.symbol_table_ptr != cb.symbol_table_ptr || ca.symbol_count != cb.symbol_count ||
      ca.optional_header_size != cb.optional_header_size || ca.characteristics != cb.characteristics)
    return false;
  const OptionalHeader &oa = a.optional, &ob = b.optional;
  if (oa.magic != ob.magic || oa.linker_major != ob.linker_major || oa.linker_minor != ob.linker_minor ||
      oa.size_of_code != ob.size_of_code || oa.size_of_initialized_data != ob.size_of_initialized_data ||
      oa.size_of_uninitialized_data != ob.size_of_uninitialized_data ||
      oa.entry_point_rva != ob.entry_point_rva || oa.base_of_code != ob.base_of_code ||
      oa.base_of_data != ob.base_of_data || oa.image_base != ob.image_base ||
      oa.section_alignment != ob.section_alignment || oa.file_alignment != ob.file_alignment ||
      oa.os_major != ob.os_major || oa.os_minor != ob.os_minor || oa.image_major != ob.image_major ||
      oa.image_minor != ob.image_minor || oa.subsystem_major != ob.subsystem_major ||
      oa.subsystem_minor != ob.subsystem_minor || oa.win32_version != ob.win32_version ||
      oa.size_of_image != ob.size_of_image || oa.size_of_headers != ob.size_of_headers ||
      oa.checksum != ob.checksum || oa.subsystem != ob.subsystem ||
      oa.dll_characteristics != ob.dll_characteristics || oa.stack_reserve != ob.stack_reserve ||
      oa.stack_commit != ob.stack_commit || oa.heap_reserve != ob.heap_reserve ||
      oa.heap_commit != ob.heap_commit || oa.loader_flags != ob.loader_flags ||
      oa.rva_and_sizes_count != ob.rva_and_sizes_count)
    return false;
  for (std::size_t i = 0; i < 16; ++i)
    if (oa.data_dirs[i].rva != ob.data_dirs[i].rva || oa.data_dirs[i].size != ob.data_dirs[i].size)
      return false;
  if (a.header_slack != b.header_slack || a.overlay != b.overlay) return false;
  if (a.sections.size() != b.sections.size()) return false;
  for (std::size_t i = 0; i < a.sections.size(); ++i)
    if (!sections_equal(a.sections[i], b.sections[i])) return false;
  return true;
}

}  // namespace pevade
