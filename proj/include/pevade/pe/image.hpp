#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pevade/pe/errors.hpp"
#include "pevade/util/bytes.hpp"

namespace pevade {

// Data directory indices (partial; only the ones the toolkit touches).
enum DataDirIndex : std::size_t {
  kDirExport = 0,
  kDirImport = 1,
  kDirResource = 2,
  kDirSecurity = 4,
  kDirBaseReloc = 5,
  kDirDebug = 6,
  kDirTls = 9,
  kDirBoundImport = 11,
  kDirIat = 12,
};

// Section characteristics bits used here.
constexpr std::uint32_t kScnCode = 0x00000020;
constexpr std::uint32_t kScnInitializedData = 0x00000040;
constexpr std::uint32_t kScnUninitializedData = 0x00000080;
constexpr std::uint32_t kScnMemExecute = 0x20000000;
constexpr std::uint32_t kScnMemRead = 0x40000000;
constexpr std::uint32_t kScnMemWrite = 0x80000000;

constexpr std::uint16_t kMachineI386 = 0x014c;
constexpr std::uint16_t kMachineAmd64 = 0x8664;
constexpr std::uint16_t kMagicPe32 = 0x10b;
constexpr std::uint16_t kMagicPe32Plus = 0x20b;

struct Section {
  std::array<std::uint8_t, 8> name_raw{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t raw_offset = 0;
  std::uint32_t reloc_ptr = 0;
  std::uint32_t linenum_ptr = 0;
  std::uint16_t reloc_count = 0;
  std::uint16_t linenum_count = 0;
  std::uint32_t characteristics = 0;
  ByteBuf data;          // exactly raw_size bytes
  ByteBuf trailing_gap;  // verbatim bytes between this section's raw end and the next owned region

  std::string name() const;
  void set_name(const std::string& n);
  bool executable() const { return (characteristics & kScnMemExecute) != 0; }
};

struct CoffHeader {
  std::uint16_t machine = 0;
  std::uint16_t section_count = 0;  // re-derived on serialize
  std::uint32_t timestamp = 0;
  std::uint32_t symbol_table_ptr = 0;
  std::uint32_t symbol_count = 0;
  std::uint16_t optional_header_size = 0;
  std::uint16_t characteristics = 0;
};

struct DataDirectory {
  std::uint32_t rva = 0;  // file offset, not RVA, for the security directory
  std::uint32_t size = 0;
};

struct OptionalHeader {
  std::uint16_t magic = 0;  // PE32 or PE32+
  std::uint8_t linker_major = 0, linker_minor = 0;
  std::uint32_t size_of_code = 0;
  std::uint32_t size_of_initialized_data = 0;
  std::uint32_t size_of_uninitialized_data = 0;
  std::uint32_t entry_point_rva = 0;
  std::uint32_t base_of_code = 0;
  std::uint32_t base_of_data = 0;  // PE32 only
  std::uint64_t image_base = 0;
  std::uint32_t section_alignment = 0;
  std::uint32_t file_alignment = 0;
  std::uint16_t os_major = 0, os_minor = 0;
  std::uint16_t image_major = 0, image_minor = 0;
  std::uint16_t subsystem_major = 0, subsystem_minor = 0;
  std::uint32_t win32_version = 0;
  std::uint32_t size_of_image = 0;    // re-derived on serialize
  std::uint32_t size_of_headers = 0;  // re-derived on serialize when the table grows
  std::uint32_t checksum = 0;
  std::uint16_t subsystem = 0;
  std::uint16_t dll_characteristics = 0;
  std::uint64_t stack_reserve = 0, stack_commit = 0;
  std::uint64_t heap_reserve = 0, heap_commit = 0;
  std::uint32_t loader_flags = 0;
  std::uint32_t rva_and_sizes_count = 16;
  std::array<DataDirectory, 16> data_dirs{};

  bool is_pe32_plus() const { return magic == kMagicPe32Plus; }
};

struct ImportedLibrary {
  std::string library;
  std::vector<std::string> functions;  // ordinals rendered as "ord<N>"
  // Original descriptor fields, written back verbatim on import-table rebuild.
  std::uint32_t original_first_thunk = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t forwarder_chain = 0;
  std::uint32_t name_rva = 0;
  std::uint32_t first_thunk = 0;
};

struct ImportTable {
  std::vector<ImportedLibrary> libraries;
  std::size_t function_count() const;
};

struct ExportTable {
  std::vector<std::string> names;
};

// Structured, lossless in-memory model of a PE file. Every input byte is
// attributable to exactly one region: DOS header, DOS stub, PE headers and
// section table, header slack, section raw data, inter-section gaps
// (carried on the preceding section), and the overlay.
struct PeImage {
  ByteBuf dos_header;  // 64 bytes, e_lfanew at 0x3c kept in sync
  std::uint32_t e_lfanew = 0;
  ByteBuf dos_stub;  // [64, e_lfanew), verbatim
  CoffHeader coff;
  OptionalHeader optional;
  ByteBuf header_slack;  // between section table end and size_of_headers, verbatim
  std::vector<Section> sections;
  ByteBuf overlay;  // beyond the last owned file extent

  // Maps an RVA to a file offset through the section table (headers are
  // identity-mapped). Returns nullopt when the RVA lands in no mapped region
  // or in a section's zero-filled virtual tail.
  std::optional<std::size_t> rva_to_offset(std::uint32_t rva) const;
  const Section* section_containing_rva(std::uint32_t rva) const;
  int section_index_containing_rva(std::uint32_t rva) const;

  std::uint32_t next_free_rva() const;
  std::size_t end_of_section_file_extent() const;

  // File offset of the optional-header checksum field in serialized output.
  std::size_t checksum_field_offset() const { return static_cast<std::size_t>(e_lfanew) + 4 + 20 + 64; }
};

PeImage parse(const ByteBuf& bytes);
ByteBuf serialize(const PeImage& img);

// Standard PE image checksum: 16-bit ones-complement folding over the file
// with the checksum field treated as zero, plus the file length.
std::uint32_t compute_pe_checksum(const ByteBuf& bytes);
// Folding core, exposed for tests; skips the 4 bytes at skip_offset
// (pass >= bytes.size() to fold everything).
std::uint32_t checksum_fold(const ByteBuf& bytes, std::size_t skip_offset);

// Serialize with the checksum field rewritten to the correct value.
ByteBuf serialize_with_checksum(PeImage& img);

ImportTable parse_imports(const PeImage& img, const ByteBuf& raw);
ExportTable parse_exports(const PeImage& img, const ByteBuf& raw);

bool structurally_equal(const PeImage& a, const PeImage& b);

std::uint32_t align_up(std::uint32_t v, std::uint32_t a);

}  // namespace pevade
