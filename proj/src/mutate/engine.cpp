#include "pevade/mutate/engine.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "pevade/pe/errors.hpp"

namespace pevade {

namespace {

constexpr std::array<std::string_view, 11> kActionNames = {
    "imports_append", "section_rename", "section_add",    "section_append",
    "new_entry_point", "remove_signer",  "remove_debug",   "upx_pack",
    "upx_unpack",      "break_checksum", "overlay_append",
};

}  // namespace

std::string_view action_name(ActionKind kind) { return kActionNames[static_cast<std::size_t>(kind)]; }

std::optional<ActionKind> action_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i)
    if (kActionNames[i] == name) return static_cast<ActionKind>(i);
  return std::nullopt;
}

const std::array<std::string_view, 50>& benign_section_names() {
  static const std::array<std::string_view, 50> names = {
      ".text",   ".data",    ".rdata",  ".idata",  ".edata",  ".rsrc",   ".reloc",  ".tls",
      ".bss",    ".pdata",   ".xdata",  ".didat",  ".sdata",  ".shared", ".cormeta", ".sxdata",
      ".textbss", ".ndata",  ".itext",  ".dtext",  ".code",   ".icode",  ".data1",  ".data2",
      ".rdata2", ".text1",   ".text2",  ".init",   ".fini",   ".ctors",  ".dtors",  ".stab",
      ".stabstr", ".drectve", ".debug",  ".msvcjmc", ".00cfg",  ".gfids",  ".giats",  ".gljmp",
      ".retplne", ".rodata",  ".voltbl", ".mrdata", ".crt",    ".orpc",   ".srdata", ".sbss",
      ".vsdata", ".extrel",
  };
  return names;
}

bool is_pool_section_name(std::string_view name) {
  const auto& pool = benign_section_names();
  return std::find(pool.begin(), pool.end(), name) != pool.end();
}

const std::vector<ImportPoolEntry>& benign_import_pool() {
  static const std::vector<ImportPoolEntry> pool = {
      {"kernel32.dll", "GetLastError"},    {"kernel32.dll", "CloseHandle"},
      {"kernel32.dll", "GetCurrentProcess"}, {"kernel32.dll", "Sleep"},
      {"kernel32.dll", "GetTickCount"},    {"kernel32.dll", "GetModuleHandleA"},
      {"user32.dll", "MessageBoxA"},       {"user32.dll", "GetDC"},
      {"user32.dll", "ReleaseDC"},         {"user32.dll", "LoadIconA"},
      {"advapi32.dll", "RegOpenKeyExA"},   {"advapi32.dll", "RegCloseKey"},
      {"advapi32.dll", "RegQueryValueExA"}, {"shell32.dll", "ShellExecuteA"},
      {"shell32.dll", "SHGetFolderPathA"}, {"ole32.dll", "CoInitialize"},
      {"ole32.dll", "CoUninitialize"},     {"gdi32.dll", "GetStockObject"},
      {"gdi32.dll", "DeleteObject"},       {"comctl32.dll", "InitCommonControls"},
      {"ws2_32.dll", "WSAStartup"},        {"ws2_32.dll", "WSACleanup"},
      {"msvcrt.dll", "malloc"},            {"msvcrt.dll", "free"},
  };
  return pool;
}

EntropyClass draw_entropy_class(RandomDraw& rng) {
  return static_cast<EntropyClass>(rng.below(3));
}

std::size_t draw_payload_length(RandomDraw& rng) { return rng.log_range(32, 4096); }

ByteBuf draw_payload(RandomDraw& rng, std::size_t len, EntropyClass cls) {
  switch (cls) {
    case EntropyClass::kLow: return rng.bytes_repeated(len);
    case EntropyClass::kMedium: return rng.bytes_ascii(len);
    case EntropyClass::kHigh: return rng.bytes_uniform(len);
  }
  return {};
}

namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

// Appends a section at the end of both the RVA space and the file layout,
// keeping the overlay (and any certificate offset into it) consistent.
Section& append_section(PeImage& img, std::string_view name, ByteBuf data,
                        std::uint32_t virtual_size, std::uint32_t characteristics) {
  const std::uint32_t falign = img.optional.file_alignment;
  const std::size_t extent = img.end_of_section_file_extent();
  const auto raw_off = align_up(static_cast<std::uint32_t>(extent), falign);
  const std::size_t pad = raw_off - extent;
  if (pad > 0) {
    Section* last_raw = nullptr;
    for (auto& sec : img.sections)
      if (sec.raw_size > 0) last_raw = &sec;
    if (last_raw)
      last_raw->trailing_gap.insert(last_raw->trailing_gap.end(), pad, 0);
    else {
      img.header_slack.insert(img.header_slack.end(), pad, 0);
      img.optional.size_of_headers += static_cast<std::uint32_t>(pad);
    }
  }

  Section sec;
  sec.set_name(std::string(name));
  sec.virtual_address = img.next_free_rva();
  sec.virtual_size = virtual_size;
  data.resize(align_up(static_cast<std::uint32_t>(data.size()), falign), 0);
  sec.raw_size = static_cast<std::uint32_t>(data.size());
  sec.raw_offset = raw_off;
  sec.characteristics = characteristics;
  sec.data = std::move(data);

  DataDirectory& cert = img.optional.data_dirs[kDirSecurity];
  if (cert.rva != 0 && cert.rva >= extent)
    cert.rva += static_cast<std::uint32_t>(raw_off + sec.raw_size - extent);

  img.sections.push_back(std::move(sec));
  return img.sections.back();
}

}  // namespace

std::vector<ActionKind> MutationEngine::available_actions() const {
  std::vector<ActionKind> out;
  for (auto kind : kAllActions)
    if (action_available(kind)) out.push_back(kind);
  return out;
}

bool MutationEngine::action_available(ActionKind kind) const {
  if (kind == ActionKind::kUpxPack || kind == ActionKind::kUpxUnpack) return !packer_.empty();
  return true;
}

ByteBuf MutationEngine::apply(const ByteBuf& input, ActionKind kind, RandomDraw& rng) const {
  switch (kind) {
    case ActionKind::kImportsAppend: return imports_append(input, rng);
    case ActionKind::kSectionRename: return section_rename(input, rng);
    case ActionKind::kSectionAdd: return section_add(input, rng);
    case ActionKind::kSectionAppend: return section_append(input, rng);
    case ActionKind::kNewEntryPoint: return new_entry_point(input, rng);
    case ActionKind::kRemoveSigner: return remove_signer(input);
    case ActionKind::kRemoveDebug: return remove_debug(input);
    case ActionKind::kUpxPack: return run_packer(input, false, rng);
    case ActionKind::kUpxUnpack: return run_packer(input, true, rng);
    case ActionKind::kBreakChecksum: return break_checksum(input, rng);
    case ActionKind::kOverlayAppend: return overlay_append(input, rng);
  }
  throw std::logic_error("unknown action");
}

ByteBuf MutationEngine::imports_append(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  const ImportTable existing = parse_imports(img, input);

  std::vector<const ImportPoolEntry*> candidates;
  for (const auto& entry : benign_import_pool()) {
    bool present = false;
    for (const auto& lib : existing.libraries) {
      if (!iequals(lib.library, entry.library)) continue;
      for (const auto& fn : lib.functions)
        if (fn == entry.function) {
          present = true;
          break;
        }
      if (present) break;
    }
    if (!present) candidates.push_back(&entry);
  }
  if (candidates.empty()) return input;
  const ImportPoolEntry& pick = *candidates[rng.below(candidates.size())];
  const std::string sec_name(rng.pick(benign_section_names()));

  const bool plus = img.optional.is_pe32_plus();
  const std::uint32_t ptr = plus ? 8 : 4;
  const std::size_t ndesc = existing.libraries.size() + 1;
  const std::uint32_t va = img.next_free_rva();

  const std::uint32_t ilt_off = align_up(static_cast<std::uint32_t>((ndesc + 1) * 20), ptr);
  const std::uint32_t iat_off = ilt_off + 2 * ptr;
  const std::uint32_t hint_off = iat_off + 2 * ptr;
  std::uint32_t name_off = hint_off + 2 + static_cast<std::uint32_t>(pick.function.size()) + 1;
  if (name_off % 2 != 0) ++name_off;

  ByteBuf blob;
  for (const auto& lib : existing.libraries) {
    append_u32(blob, lib.original_first_thunk);
    append_u32(blob, lib.timestamp);
    append_u32(blob, lib.forwarder_chain);
    append_u32(blob, lib.name_rva);
    append_u32(blob, lib.first_thunk);
  }
  append_u32(blob, va + ilt_off);
  append_u32(blob, 0);
  append_u32(blob, 0);
  append_u32(blob, va + name_off);
  append_u32(blob, va + iat_off);
  blob.insert(blob.end(), 20, 0);  // terminator
  blob.resize(ilt_off, 0);
  for (int rep = 0; rep < 2; ++rep) {  // identical fresh lookup and address tables
    if (plus) {
      append_u64(blob, va + hint_off);
      append_u64(blob, 0);
    } else {
      append_u32(blob, va + hint_off);
      append_u32(blob, 0);
    }
  }
  append_u16(blob, 0);  // hint
  append_cstr(blob, pick.function);
  blob.resize(name_off, 0);
  append_cstr(blob, pick.library);

  const auto vsize = static_cast<std::uint32_t>(blob.size());
  append_section(img, sec_name, std::move(blob), vsize,
                 kScnInitializedData | kScnMemRead | kScnMemWrite);
  img.optional.data_dirs[kDirImport] = {va, static_cast<std::uint32_t>(ndesc + 1) * 20};
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::section_rename(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  Section& sec = img.sections[rng.below(img.sections.size())];
  const std::string current = sec.name();
  std::vector<std::string_view> options;
  for (auto name : benign_section_names())
    if (name != current) options.push_back(name);
  sec.set_name(std::string(options[rng.below(options.size())]));
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::section_add(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  const std::size_t len = draw_payload_length(rng);
  const EntropyClass cls = draw_entropy_class(rng);
  ByteBuf payload = draw_payload(rng, len, cls);
  const std::string name(rng.pick(benign_section_names()));
  append_section(img, name, std::move(payload), static_cast<std::uint32_t>(len),
                 kScnInitializedData | kScnMemRead);
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::section_append(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  Section* last_raw = nullptr;
  for (auto& sec : img.sections)
    if (sec.raw_size > 0) last_raw = &sec;
  if (!last_raw) return input;

  const std::size_t len = draw_payload_length(rng);
  const ByteBuf payload = draw_payload(rng, len, draw_entropy_class(rng));

  if (last_raw->virtual_size < last_raw->raw_size &&
      last_raw->raw_size - last_raw->virtual_size >= len) {
    std::copy(payload.begin(), payload.end(), last_raw->data.begin() + last_raw->virtual_size);
  } else {
    const std::size_t old_extent = img.end_of_section_file_extent();
    last_raw->data.insert(last_raw->data.end(), payload.begin(), payload.end());
    last_raw->raw_size += static_cast<std::uint32_t>(len);
    last_raw->virtual_size = std::max(last_raw->virtual_size, last_raw->raw_size);
    DataDirectory& cert = img.optional.data_dirs[kDirSecurity];
    if (cert.rva != 0 && cert.rva >= old_extent) cert.rva += static_cast<std::uint32_t>(len);
  }
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::new_entry_point(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  if (img.coff.machine != kMachineI386 && img.coff.machine != kMachineAmd64) return input;
  const std::uint32_t old_entry = img.optional.entry_point_rva;
  if (old_entry == 0) return input;

  const std::uint32_t va = img.next_free_rva();
  const auto rel = static_cast<std::int32_t>(old_entry - (va + 5));
  ByteBuf stub;
  stub.push_back(0xE9);
  append_u32(stub, static_cast<std::uint32_t>(rel));
  const std::string name(rng.pick(benign_section_names()));
  append_section(img, name, std::move(stub), 5, kScnCode | kScnMemExecute | kScnMemRead);
  img.optional.entry_point_rva = va;
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::remove_signer(const ByteBuf& input) const {
  PeImage img = parse(input);
  DataDirectory& cert = img.optional.data_dirs[kDirSecurity];
  if (cert.rva == 0) return input;
  const std::size_t content_end = img.end_of_section_file_extent();
  if (cert.rva >= content_end &&
      static_cast<std::size_t>(cert.rva) + cert.size <= content_end + img.overlay.size()) {
    const std::size_t start = cert.rva - content_end;
    img.overlay.erase(img.overlay.begin() + static_cast<std::ptrdiff_t>(start),
                      img.overlay.begin() + static_cast<std::ptrdiff_t>(start + cert.size));
  }
  cert = {0, 0};
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::remove_debug(const ByteBuf& input) const {
  PeImage img = parse(input);
  DataDirectory& dbg = img.optional.data_dirs[kDirDebug];
  if (dbg.rva == 0) return input;
  const int si = img.section_index_containing_rva(dbg.rva);
  if (si >= 0) {
    Section& sec = img.sections[static_cast<std::size_t>(si)];
    const std::uint32_t delta = dbg.rva - sec.virtual_address;
    const std::size_t end = std::min<std::size_t>(delta + dbg.size, sec.data.size());
    for (std::size_t i = delta; i < end; ++i) sec.data[i] = 0;
  }
  dbg = {0, 0};
  return serialize_with_checksum(img);
}

ByteBuf MutationEngine::run_packer(const ByteBuf& input, bool unpack, RandomDraw& rng) const {
  if (packer_.empty()) throw ActionUnavailableError("no packer configured");
  parse(input);  // do not hand garbage to the external tool

  char path[] = "/tmp/pevade-XXXXXX";
  const int fd = mkstemp(path);
  if (fd < 0) throw ActionUnavailableError("cannot create temp file");
  close(fd);
  write_file(path, input);

  std::string cmd = packer_;
  if (unpack)
    cmd += " -d";
  else
    cmd += " -" + std::to_string(rng.range(1, 9));
  cmd += " ";
  cmd += path;
  cmd += " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());

  ByteBuf out;
  try {
    out = read_file(path);
  } catch (const std::exception&) {
    unlink(path);
    throw ActionUnavailableError("packer produced no output");
  }
  unlink(path);
  if (rc != 0) throw ActionUnavailableError("packer exited nonzero");
  try {
    PeImage img = parse(out);
    return serialize_with_checksum(img);
  } catch (const std::exception&) {
    throw ActionUnavailableError("packer output does not parse");
  }
}

ByteBuf MutationEngine::break_checksum(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  img.optional.checksum = 0;
  ByteBuf out = serialize(img);
  const std::uint32_t correct = compute_pe_checksum(out);
  std::uint32_t drawn;
  do {
    drawn = static_cast<std::uint32_t>(rng.next_u64());
  } while (drawn == correct);
  put_u32(out, img.checksum_field_offset(), drawn);
  return out;
}

ByteBuf MutationEngine::overlay_append(const ByteBuf& input, RandomDraw& rng) const {
  PeImage img = parse(input);
  const std::size_t len = draw_payload_length(rng);
  const ByteBuf payload = draw_payload(rng, len, draw_entropy_class(rng));
  img.overlay.insert(img.overlay.end(), payload.begin(), payload.end());
  return serialize_with_checksum(img);
}

}  // namespace pevade
