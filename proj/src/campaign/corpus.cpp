#include "pevade/campaign/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "pevade/mutate/engine.hpp"
#include "pevade/pe/image.hpp"
#include "pevade/util/fnv.hpp"

namespace pevade {

namespace {

constexpr std::uint32_t kElfanew = 192;
constexpr std::uint32_t kSizeOfHeaders = 1024;
constexpr std::uint32_t kSectionAlign = 4096;
constexpr std::uint32_t kFileAlign = 512;

const std::vector<std::string_view>& word_pool() {
  static const std::vector<std::string_view> words = {
      "config",  "update",  "service", "client",  "server",  "report",  "window",  "handle",
      "buffer",  "stream",  "module",  "loader",  "driver",  "format",  "parse",   "version",
      "system",  "output",  "input",   "cache",   "index",   "record",  "status",  "backup",
      "helper",  "common",  "global",  "engine",  "render",  "object",  "string",  "memory",
      "thread",  "mutex",   "event",   "timer",   "socket",  "packet",  "session", "account",
  };
  return words;
}

struct LibSpec {
  std::string_view lib;
  std::vector<std::string_view> funcs;
};

const std::vector<LibSpec>& benign_lib_catalog() {
  static const std::vector<LibSpec> catalog = {
      {"kernel32.dll",
       {"ExitProcess", "GetModuleHandleA", "GetProcAddress", "GetLastError", "CloseHandle",
        "ReadFile", "WriteFile", "CreateFileA", "HeapAlloc", "HeapFree", "Sleep", "GetTickCount",
        "LoadLibraryA", "FreeLibrary", "GetCommandLineA", "GetStdHandle"}},
      {"user32.dll",
       {"MessageBoxA", "CreateWindowExA", "DefWindowProcA", "RegisterClassA", "ShowWindow",
        "UpdateWindow", "GetMessageA", "TranslateMessage", "DispatchMessageA", "PostQuitMessage",
        "LoadCursorA", "LoadIconA"}},
      {"gdi32.dll", {"GetStockObject", "SelectObject", "DeleteObject", "BitBlt", "CreateCompatibleDC"}},
      {"advapi32.dll", {"RegOpenKeyExA", "RegQueryValueExA", "RegCloseKey", "OpenProcessToken"}},
      {"msvcrt.dll",
       {"malloc", "free", "memcpy", "memset", "printf", "strlen", "strcmp", "atoi", "exit"}},
      {"shell32.dll", {"ShellExecuteA", "SHGetFolderPathA"}},
      {"ws2_32.dll", {"WSAStartup", "WSACleanup", "socket", "connect", "send", "recv"}},
  };
  return catalog;
}

const std::vector<ImportPoolEntry>& suspicious_import_pool() {
  static const std::vector<ImportPoolEntry> pool = {
      {"kernel32.dll", "VirtualAlloc"},      {"kernel32.dll", "VirtualProtect"},
      {"kernel32.dll", "WriteProcessMemory"}, {"kernel32.dll", "CreateRemoteThread"},
      {"kernel32.dll", "OpenProcess"},       {"user32.dll", "GetAsyncKeyState"},
      {"user32.dll", "keybd_event"},         {"user32.dll", "SetWindowsHookExA"},
      {"advapi32.dll", "RegSetValueExA"},    {"advapi32.dll", "AdjustTokenPrivileges"},
      {"wininet.dll", "InternetOpenA"},      {"wininet.dll", "InternetReadFile"},
      {"urlmon.dll", "URLDownloadToFileA"},  {"shell32.dll", "IsUserAnAdmin"},
  };
  return pool;
}

const std::vector<std::string_view>& odd_section_names() {
  static const std::vector<std::string_view> names = {".vmp0", ".enc",  ".xpk", "qtz0",
                                                      ".krn",  "abc0",  ".pkd", ".zz1"};
  return names;
}

ByteBuf dos_header_and_stub() {
  ByteBuf b(kElfanew, 0);
  b[0] = 'M';
  b[1] = 'Z';
  put_u16(b, 0x02, 0x0090);  // bytes on last page
  put_u16(b, 0x04, 0x0003);  // pages
  put_u16(b, 0x08, 0x0004);  // header paragraphs
  put_u16(b, 0x0a, 0x0000);
  put_u16(b, 0x0c, 0xffff);  // max alloc
  put_u16(b, 0x10, 0x00b8);  // initial SP
  put_u16(b, 0x18, 0x0040);  // relocation table offset
  put_u32(b, 0x3c, kElfanew);
  static const std::uint8_t stub[] = {0x0e, 0x1f, 0xba, 0x0e, 0x00, 0xb4, 0x09, 0xcd,
                                      0x21, 0xb8, 0x01, 0x4c, 0xcd, 0x21};
  std::copy(std::begin(stub), std::end(stub), b.begin() + 64);
  const std::string msg = "This program cannot be run in DOS mode.\r\r\n$";
  std::copy(msg.begin(), msg.end(), b.begin() + 64 + sizeof(stub));
  return b;
}

ByteBuf code_blob(RandomDraw& rng, std::size_t approx) {
  static const std::vector<std::vector<std::uint8_t>> fragments = {
      {0x55},       {0x8b, 0xec},       {0x53},        {0x56},
      {0x57},       {0x5f},             {0x5e},        {0x5b},
      {0x5d},       {0xc3},             {0xc9},        {0x90},
      {0x33, 0xc0}, {0x31, 0xdb},       {0x85, 0xc0},  {0x74, 0x08},
      {0x75, 0x0c}, {0x8b, 0x45, 0x08}, {0x89, 0x45, 0xfc}, {0x83, 0xc4, 0x04},
      {0x83, 0xec, 0x20}, {0x6a, 0x00}, {0x6a, 0x01},  {0x50},
      {0x51},       {0x52},             {0xff, 0x75, 0x08},
  };
  ByteBuf out;
  while (out.size() < approx) {
    const std::size_t pick = rng.below(fragments.size() + 3);
    if (pick < fragments.size()) {
      const auto& f = fragments[pick];
      out.insert(out.end(), f.begin(), f.end());
    } else if (pick == fragments.size()) {
      out.push_back(0xe8);  // call rel32
      append_u32(out, static_cast<std::uint32_t>(rng.below(0x400)));
    } else if (pick == fragments.size() + 1) {
      out.push_back(0x68);  // push imm32
      append_u32(out, static_cast<std::uint32_t>(rng.below(0x10000)));
    } else {
      out.push_back(0xb8);  // mov eax, imm32
      append_u32(out, static_cast<std::uint32_t>(rng.below(0x10000)));
    }
  }
  return out;
}

std::string draw_word(RandomDraw& rng) { return std::string(rng.pick(word_pool())); }

std::string draw_string(RandomDraw& rng, bool rich) {
  switch (rng.below(rich ? 6 : 2)) {
    case 0: {
      std::string s = draw_word(rng);
      s += '_';
      s += draw_word(rng);
      return s;
    }
    case 1: {
      std::string s = draw_word(rng);
      const std::size_t extra = 1 + rng.below(4);
      for (std::size_t i = 0; i < extra; ++i) {
        s += ' ';
        s += draw_word(rng);
      }
      return s;
    }
    case 2:
      return "C:\\Program Files\\" + draw_word(rng) + "\\" + draw_word(rng) + ".dll";
    case 3:
      return "https://" + draw_word(rng) + ".example.com/" + draw_word(rng);
    case 4:
      return "Software\\" + draw_word(rng) + "\\" + draw_word(rng);
    default:
      return std::to_string(1 + rng.below(9)) + "." + std::to_string(rng.below(20)) + "." +
             std::to_string(rng.below(9000));
  }
}

ByteBuf strings_blob(RandomDraw& rng, std::size_t count, bool rich) {
  ByteBuf out;
  for (std::size_t i = 0; i < count; ++i) {
    append_cstr(out, draw_string(rng, rich));
    if (rng.below(3) == 0) out.push_back(0);
  }
  return out;
}

struct ImportSpec {
  std::string lib;
  std::vector<std::string> funcs;
};

ByteBuf imports_blob(std::uint32_t va, bool plus, const std::vector<ImportSpec>& libs,
                     DataDirectory* import_dir, DataDirectory* iat_dir) {
  const std::uint32_t ptr = plus ? 8 : 4;
  const std::size_t n = libs.size();
  std::uint32_t off = align_up(static_cast<std::uint32_t>((n + 1) * 20), ptr);

  std::vector<std::uint32_t> ilt_off(n), iat_off(n);
  for (std::size_t i = 0; i < n; ++i) {
    ilt_off[i] = off;
    off += static_cast<std::uint32_t>(libs[i].funcs.size() + 1) * ptr;
  }
  const std::uint32_t iat_begin = off;
  for (std::size_t i = 0; i < n; ++i) {
    iat_off[i] = off;
    off += static_cast<std::uint32_t>(libs[i].funcs.size() + 1) * ptr;
  }
  const std::uint32_t iat_end = off;
  std::vector<std::vector<std::uint32_t>> hint_off(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& fn : libs[i].funcs) {
      hint_off[i].push_back(off);
      off += 2 + static_cast<std::uint32_t>(fn.size()) + 1;
      if (off % 2) ++off;
    }
  std::vector<std::uint32_t> name_off(n);
  for (std::size_t i = 0; i < n; ++i) {
    name_off[i] = off;
    off += static_cast<std::uint32_t>(libs[i].lib.size()) + 1;
  }

  ByteBuf b(off, 0);
  for (std::size_t i = 0; i < n; ++i) {
    put_u32(b, i * 20, va + ilt_off[i]);
    put_u32(b, i * 20 + 12, va + name_off[i]);
    put_u32(b, i * 20 + 16, va + iat_off[i]);
    for (std::size_t j = 0; j < libs[i].funcs.size(); ++j) {
      if (plus) {
        put_u64(b, ilt_off[i] + j * 8, va + hint_off[i][j]);
        put_u64(b, iat_off[i] + j * 8, va + hint_off[i][j]);
      } else {
        put_u32(b, ilt_off[i] + j * 4, va + hint_off[i][j]);
        put_u32(b, iat_off[i] + j * 4, va + hint_off[i][j]);
      }
      std::copy(libs[i].funcs[j].begin(), libs[i].funcs[j].end(),
                b.begin() + hint_off[i][j] + 2);
    }
    std::copy(libs[i].lib.begin(), libs[i].lib.end(), b.begin() + name_off[i]);
  }
  *import_dir = {va, static_cast<std::uint32_t>((n + 1) * 20)};
  *iat_dir = {va + iat_begin, iat_end - iat_begin};
  return b;
}

ByteBuf exports_blob(std::uint32_t va, const std::string& dll_name,
                     const std::vector<std::string>& names, std::uint32_t code_va,
                     DataDirectory* dir) {
  const auto n = static_cast<std::uint32_t>(names.size());
  const std::uint32_t funcs_off = 40;
  const std::uint32_t names_off = funcs_off + 4 * n;
  const std::uint32_t ords_off = names_off + 4 * n;
  std::uint32_t off = ords_off + 2 * n;
  const std::uint32_t dllname_off = off;
  off += static_cast<std::uint32_t>(dll_name.size()) + 1;
  std::vector<std::uint32_t> name_off(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    name_off[i] = off;
    off += static_cast<std::uint32_t>(names[i].size()) + 1;
  }

  ByteBuf b(off, 0);
  put_u32(b, 12, va + dllname_off);
  put_u32(b, 16, 1);  // ordinal base
  put_u32(b, 20, n);
  put_u32(b, 24, n);
  put_u32(b, 28, va + funcs_off);
  put_u32(b, 32, va + names_off);
  put_u32(b, 36, va + ords_off);
  for (std::uint32_t i = 0; i < n; ++i) {
    put_u32(b, funcs_off + 4 * i, code_va + 16 * i);
    put_u32(b, names_off + 4 * i, va + name_off[i]);
    put_u16(b, ords_off + 2 * i, static_cast<std::uint16_t>(i));
    std::copy(names[i].begin(), names[i].end(), b.begin() + name_off[i]);
  }
  std::copy(dll_name.begin(), dll_name.end(), b.begin() + dllname_off);
  *dir = {va, off};
  return b;
}

ByteBuf debug_blob(RandomDraw& rng, std::uint32_t va, DataDirectory* dir) {
  ByteBuf b(28, 0);
  put_u32(b, 4, 1420000000 + static_cast<std::uint32_t>(rng.below(300000000)));
  put_u32(b, 12, 2);  // codeview
  const std::string path = "c:\\build\\" + draw_word(rng) + ".pdb";
  const auto payload_len = static_cast<std::uint32_t>(4 + 16 + 4 + path.size() + 1);
  put_u32(b, 16, payload_len);
  put_u32(b, 20, va + 28);
  b.resize(28 + payload_len, 0);
  b[28] = 'R';
  b[29] = 'S';
  b[30] = 'D';
  b[31] = 'S';
  for (std::size_t i = 0; i < 16; ++i) b[32 + i] = rng.byte();
  put_u32(b, 48, 1);
  std::copy(path.begin(), path.end(), b.begin() + 52);
  *dir = {va, 28};
  return b;
}

ByteBuf reloc_blob(RandomDraw& rng, std::uint32_t text_va) {
  const std::size_t entries = 4 + rng.below(9);
  const std::size_t padded = entries + (entries % 2);
  ByteBuf b;
  append_u32(b, text_va);
  append_u32(b, static_cast<std::uint32_t>(8 + 2 * padded));
  for (std::size_t i = 0; i < entries; ++i)
    append_u16(b, static_cast<std::uint16_t>((3u << 12) | rng.below(0x800)));
  if (padded != entries) append_u16(b, 0);
  return b;
}

ByteBuf rsrc_blob(RandomDraw& rng, std::size_t approx) {
  ByteBuf b;
  append_u32(b, 0);
  append_u32(b, 1420000000 + static_cast<std::uint32_t>(rng.below(300000000)));
  append_u32(b, 0);
  append_u16(b, 0);
  append_u16(b, static_cast<std::uint16_t>(1 + rng.below(3)));
  while (b.size() < approx) {
    if (rng.below(3) == 0) {
      const std::string w = draw_word(rng);
      for (char c : w) {
        b.push_back(static_cast<std::uint8_t>(c));
        b.push_back(0);  // utf-16-ish
      }
      b.push_back(0);
      b.push_back(0);
    } else {
      b.push_back(rng.below(4) == 0 ? rng.byte() : 0);
    }
  }
  return b;
}

struct SectionPlan {
  std::string name;
  ByteBuf content;
  std::uint32_t characteristics = 0;
};

std::vector<ImportSpec> draw_imports(RandomDraw& rng, std::size_t nlibs, std::size_t min_funcs,
                                     std::size_t max_funcs, bool suspicious) {
  const auto& catalog = benign_lib_catalog();
  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i)
    std::swap(order[i], order[i + rng.below(order.size() - i)]);

  std::vector<ImportSpec> specs;
  for (std::size_t k = 0; k < std::min(nlibs, order.size()); ++k) {
    const LibSpec& lib = catalog[order[k]];
    std::vector<std::size_t> fidx(lib.funcs.size());
    std::iota(fidx.begin(), fidx.end(), 0);
    for (std::size_t i = 0; i + 1 < fidx.size(); ++i)
      std::swap(fidx[i], fidx[i + rng.below(fidx.size() - i)]);
    const std::size_t take =
        std::min(lib.funcs.size(), min_funcs + rng.below(max_funcs - min_funcs + 1));
    ImportSpec spec;
    spec.lib = std::string(lib.lib);
    for (std::size_t i = 0; i < take; ++i) spec.funcs.emplace_back(lib.funcs[fidx[i]]);
    std::sort(spec.funcs.begin(), spec.funcs.end());
    specs.push_back(std::move(spec));
  }

  if (suspicious) {
    const auto& pool = suspicious_import_pool();
    const std::size_t take = 2 + rng.below(4);
    for (std::size_t i = 0; i < take; ++i) {
      const ImportPoolEntry& e = pool[rng.below(pool.size())];
      auto it = std::find_if(specs.begin(), specs.end(),
                             [&](const ImportSpec& s) { return s.lib == e.library; });
      if (it == specs.end()) {
        specs.push_back({std::string(e.library), {std::string(e.function)}});
      } else if (std::find(it->funcs.begin(), it->funcs.end(), e.function) == it->funcs.end()) {
        it->funcs.emplace_back(e.function);
      }
    }
  }
  std::sort(specs.begin(), specs.end(),
            [](const ImportSpec& a, const ImportSpec& b) { return a.lib < b.lib; });
  return specs;
}

}  // namespace

ByteBuf synth_sample(RandomDraw& rng, int label, bool stealthy) {
  const bool plus = rng.real() < 0.5;
  const bool malicious = label != 0;

  bool weird_entry_name = false;
  bool payload = false, weird_payload_name = false;
  std::size_t payload_len = 0;
  bool susp_imports = false;
  std::size_t nstrings;
  bool rich_strings = true;
  bool with_debug, with_rsrc, with_cert, with_tls, with_reloc, with_exports;

  if (!malicious) {
    nstrings = 25 + rng.below(40);
    with_debug = rng.real() < 0.30;
    with_rsrc = rng.real() < 0.40;
    with_cert = rng.real() < 0.25;
    with_tls = rng.real() < 0.10;
    with_reloc = rng.real() < 0.50;
    with_exports = rng.real() < 0.15;
  } else if (!stealthy) {
    weird_entry_name = rng.real() < 0.50;
    payload = rng.real() < 0.70;
    payload_len = 1024 + rng.below(3072);
    weird_payload_name = payload && rng.real() < 0.80;
    susp_imports = rng.real() < 0.50;
    nstrings = 2 + rng.below(6);
    rich_strings = false;
    with_debug = rng.real() < 0.60;
    with_rsrc = rng.real() < 0.15;
    with_cert = rng.real() < 0.05;
    with_tls = rng.real() < 0.20;
    with_reloc = rng.real() < 0.20;
    with_exports = rng.real() < 0.05;
  } else {
    const std::size_t trait = rng.below(3);
    weird_entry_name = trait == 0;
    payload = trait == 1;
    payload_len = 512 + rng.below(512);
    nstrings = trait == 2 ? 1 + rng.below(3) : 8 + rng.below(10);
    rich_strings = trait != 2;
    with_debug = rng.real() < 0.40;
    with_rsrc = rng.real() < 0.30;
    with_cert = rng.real() < 0.15;
    with_tls = rng.real() < 0.10;
    with_reloc = rng.real() < 0.40;
    with_exports = rng.real() < 0.10;
  }

  PeImage img;
  img.dos_header = dos_header_and_stub();
  img.dos_stub.assign(img.dos_header.begin() + 64, img.dos_header.end());
  img.dos_header.resize(64);
  img.e_lfanew = kElfanew;

  CoffHeader& c = img.coff;
  c.machine = plus ? kMachineAmd64 : kMachineI386;
  c.timestamp = 1420000000 + static_cast<std::uint32_t>(rng.below(300000000));
  c.characteristics = plus ? 0x0022 : 0x0102;

  OptionalHeader& o = img.optional;
  o.magic = plus ? kMagicPe32Plus : kMagicPe32;
  o.linker_major = 14;
  o.linker_minor = static_cast<std::uint8_t>(rng.below(30));
  o.image_base = plus ? 0x140000000ull : 0x400000ull;
  o.section_alignment = kSectionAlign;
  o.file_alignment = kFileAlign;
  o.os_major = 6;
  o.subsystem_major = 6;
  o.image_minor = static_cast<std::uint16_t>(rng.below(10));
  o.size_of_headers = kSizeOfHeaders;
  o.subsystem = rng.real() < 0.5 ? 2 : 3;
  o.dll_characteristics = plus ? 0x8160 : 0x8140;
  o.stack_reserve = 0x100000;
  o.stack_commit = 0x1000;
  o.heap_reserve = 0x100000;
  o.heap_commit = 0x1000;

  // Sections are laid out in VA order; content that carries RVAs (imports,
  // exports, debug) is built once its section's base address is known.
  std::vector<SectionPlan> plans;
  std::uint32_t va_cursor = 0x1000;
  const auto add_plan = [&](SectionPlan plan) -> std::uint32_t {
    const std::uint32_t va = va_cursor;
    va_cursor = align_up(va + std::max<std::uint32_t>(static_cast<std::uint32_t>(plan.content.size()), 1),
                         kSectionAlign);
    plans.push_back(std::move(plan));
    return va;
  };

  const std::size_t text_len = 1024 + rng.below(3072);
  std::string text_name = ".text";
  if (weird_entry_name) text_name = std::string(rng.pick(odd_section_names()));
  const std::uint32_t text_va =
      add_plan({text_name, code_blob(rng, text_len), kScnCode | kScnMemExecute | kScnMemRead});

  // .rdata: strings, import tables, optional export and debug blocks
  ByteBuf rdata = strings_blob(rng, nstrings, rich_strings);
  rdata.resize(align_up(static_cast<std::uint32_t>(rdata.size()), 8), 0);
  const std::uint32_t rdata_va = va_cursor;

  const std::size_t nlibs = malicious ? 1 + rng.below(3) : 2 + rng.below(4);
  const auto specs = draw_imports(rng, nlibs, 3, 8, susp_imports);
  DataDirectory import_dir{}, iat_dir{};
  ByteBuf imports =
      imports_blob(rdata_va + static_cast<std::uint32_t>(rdata.size()), plus, specs, &import_dir, &iat_dir);
  rdata.insert(rdata.end(), imports.begin(), imports.end());
  rdata.resize(align_up(static_cast<std::uint32_t>(rdata.size()), 8), 0);

  DataDirectory export_dir{};
  if (with_exports) {
    std::vector<std::string> names;
    const std::size_t n = 2 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) names.push_back(draw_word(rng) + "_" + draw_word(rng));
    std::sort(names.begin(), names.end());
    ByteBuf exports = exports_blob(rdata_va + static_cast<std::uint32_t>(rdata.size()),
                                   draw_word(rng) + ".dll", names, text_va, &export_dir);
    rdata.insert(rdata.end(), exports.begin(), exports.end());
    rdata.resize(align_up(static_cast<std::uint32_t>(rdata.size()), 8), 0);
  }

  DataDirectory debug_dir{};
  if (with_debug) {
    ByteBuf dbg = debug_blob(rng, rdata_va + static_cast<std::uint32_t>(rdata.size()), &debug_dir);
    rdata.insert(rdata.end(), dbg.begin(), dbg.end());
  }
  add_plan({".rdata", std::move(rdata), kScnInitializedData | kScnMemRead});

  // .data: writable block, optionally hosting the TLS directory
  ByteBuf data(256 + rng.below(1024), 0);
  for (std::size_t i = 0; i < data.size() / 6; ++i) data[rng.below(data.size())] = rng.byte();
  DataDirectory tls_dir{};
  const std::uint32_t data_va = va_cursor;
  if (with_tls) {
    const std::uint32_t tls_size = plus ? 40 : 24;
    data.resize(align_up(static_cast<std::uint32_t>(data.size()), 8) + tls_size, 0);
    tls_dir = {data_va + static_cast<std::uint32_t>(data.size()) - tls_size, tls_size};
  }
  add_plan({".data", std::move(data), kScnInitializedData | kScnMemRead | kScnMemWrite});

  DataDirectory rsrc_dir{};
  if (with_rsrc) {
    ByteBuf rsrc = rsrc_blob(rng, 256 + rng.below(768));
    rsrc_dir = {va_cursor, static_cast<std::uint32_t>(rsrc.size())};
    add_plan({".rsrc", std::move(rsrc), kScnInitializedData | kScnMemRead});
  }

  DataDirectory reloc_dir{};
  if (with_reloc) {
    ByteBuf reloc = reloc_blob(rng, text_va);
    reloc_dir = {va_cursor, static_cast<std::uint32_t>(reloc.size())};
    add_plan({".reloc", std::move(reloc), kScnInitializedData | kScnMemRead | 0x02000000});
  }

  if (payload) {
    std::string name = weird_payload_name ? std::string(rng.pick(odd_section_names())) : ".rsrc1";
    add_plan({name, rng.bytes_uniform(payload_len), kScnInitializedData | kScnMemRead});
  }

  std::uint32_t raw_cursor = kSizeOfHeaders;
  std::uint32_t size_of_code = 0, size_of_init = 0;
  for (auto& plan : plans) {
    Section sec;
    sec.set_name(plan.name);
    sec.virtual_size = static_cast<std::uint32_t>(plan.content.size());
    sec.raw_size = align_up(sec.virtual_size, kFileAlign);
    plan.content.resize(sec.raw_size, 0);
    sec.data = std::move(plan.content);
    sec.raw_offset = raw_cursor;
    raw_cursor += sec.raw_size;
    sec.characteristics = plan.characteristics;
    if (sec.characteristics & kScnCode)
      size_of_code += sec.raw_size;
    else
      size_of_init += sec.raw_size;
    img.sections.push_back(std::move(sec));
  }
  std::uint32_t va = 0x1000;
  for (auto& sec : img.sections) {
    sec.virtual_address = va;
    va = align_up(va + std::max(sec.virtual_size, 1u), kSectionAlign);
  }

  o.size_of_code = size_of_code;
  o.size_of_initialized_data = size_of_init;
  o.entry_point_rva = text_va;
  o.base_of_code = text_va;
  if (!plus) o.base_of_data = img.sections[1].virtual_address;
  o.data_dirs[kDirImport] = import_dir;
  o.data_dirs[kDirIat] = iat_dir;
  o.data_dirs[kDirExport] = export_dir;
  o.data_dirs[kDirDebug] = debug_dir;
  o.data_dirs[kDirTls] = tls_dir;
  o.data_dirs[kDirResource] = rsrc_dir;
  o.data_dirs[kDirBaseReloc] = reloc_dir;

  img.header_slack.assign(kSizeOfHeaders - (kElfanew + 4 + 20 + (plus ? 240 : 224) +
                                            40 * img.sections.size()),
                          0);

  if (with_cert) {
    ByteBuf cert;
    const std::size_t payload_bytes = 200 + rng.below(320);
    append_u32(cert, static_cast<std::uint32_t>(8 + payload_bytes));
    append_u16(cert, 0x0200);
    append_u16(cert, 0x0002);
    ByteBuf blob = rng.bytes_uniform(payload_bytes);
    cert.insert(cert.end(), blob.begin(), blob.end());
    o.data_dirs[kDirSecurity] = {raw_cursor, static_cast<std::uint32_t>(cert.size())};
    img.overlay = std::move(cert);
  }

  return serialize_with_checksum(img);
}

std::vector<CorpusEntry> generate_corpus(const std::string& dir, const CorpusParams& params) {
  std::filesystem::create_directories(dir);
  std::vector<CorpusEntry> entries;

  const auto make = [&](const std::string& id, int label) {
    RandomDraw rng(mix_seed(params.seed, id));
    const bool stealthy = label != 0 && rng.real() < params.stealthy_fraction;
    const ByteBuf bytes = synth_sample(rng, label, stealthy);
    const std::string file = id + ".exe";
    write_file(dir + "/" + file, bytes);
    entries.push_back({id, file, label});
  };

  char buf[16];
  for (std::size_t i = 0; i < params.benign; ++i) {
    std::snprintf(buf, sizeof(buf), "b%04zu", i);
    make(buf, 0);
  }
  for (std::size_t i = 0; i < params.malicious; ++i) {
    std::snprintf(buf, sizeof(buf), "m%04zu", i);
    make(buf, 1);
  }
  save_manifest(dir + "/manifest.json", entries, params.seed);
  return entries;
}

void save_manifest(const std::string& manifest_path, const std::vector<CorpusEntry>& entries,
                   std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = "pevade-corpus";
  j["version"] = 1;
  j["seed"] = seed;
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({{"id", e.id}, {"file", e.file}, {"label", e.label}});
  j["entries"] = std::move(arr);
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + manifest_path + " for writing");
  out << j.dump(2) << "\n";
}

std::vector<CorpusEntry> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "pevade-corpus") throw std::runtime_error("not a corpus manifest");
  std::vector<CorpusEntry> entries;
  for (const auto& e : j.at("entries"))
    entries.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                       e.at("label").get<int>()});
  return entries;
}

std::string manifest_dir(const std::string& manifest_path) {
  const auto parent = std::filesystem::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

namespace {

std::vector<std::string> select_ids(const std::vector<CorpusEntry>& entries, int label,
                                    std::uint64_t draw_seed, std::size_t count) {
  std::vector<std::string> ids;
  for (const auto& e : entries)
    if ((e.label != 0) == (label != 0)) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  RandomDraw rng(draw_seed);
  for (std::size_t i = 0; i + 1 < ids.size(); ++i)
    std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
  if (ids.size() > count) ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::vector<std::string> select_holdout(const std::vector<CorpusEntry>& entries, std::uint64_t seed,
                                        std::size_t count) {
  return select_ids(entries, 1, mix_seed(seed, "holdout"), count);
}

std::vector<std::string> select_benign_holdout(const std::vector<CorpusEntry>& entries,
                                               std::uint64_t seed, std::size_t count) {
  return select_ids(entries, 0, mix_seed(seed, "benign-holdout"), count);
}

}  // namespace pevade
