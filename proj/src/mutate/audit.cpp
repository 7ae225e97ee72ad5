#include "pevade/mutate/audit.hpp"

#include <optional>
#include <set>

#include "pevade/mutate/engine.hpp"

namespace pevade {

ValidityAudit validity_audit(const ByteBuf& original, const ByteBuf& mutated) {
  ValidityAudit audit;
  PeImage mut;
  try {
    mut = parse(mutated);
  } catch (const std::exception&) {
    return audit;
  }
  audit.still_parses = true;

  const std::uint32_t entry = mut.optional.entry_point_rva;
  if (entry == 0) {
    audit.entry_point_resolves = true;  // entryless images (resource DLLs) are fine
  } else {
    const int si = mut.section_index_containing_rva(entry);
    audit.entry_point_resolves = si >= 0 &&
                                 mut.sections[static_cast<std::size_t>(si)].executable() &&
                                 mut.rva_to_offset(entry).has_value();
  }

  audit.imports_resolve = true;
  try {
    const ImportTable imports = parse_imports(mut, mutated);
    for (const auto& lib : imports.libraries)
      if (lib.library.empty() || lib.functions.empty()) audit.imports_resolve = false;
  } catch (const std::exception&) {
    audit.imports_resolve = false;
  }

  if (entry != 0) {
    const auto off = mut.rva_to_offset(entry);
    if (off && *off + 5 <= mutated.size() && mutated[*off] == 0xE9) {
      const auto rel = static_cast<std::int32_t>(get_u32(mutated, *off + 1));
      audit.entry_jump_target = entry + 5 + static_cast<std::uint32_t>(rel);
    }
  }

  std::optional<PeImage> orig;
  try {
    orig = parse(original);
  } catch (const std::exception&) {
  }

  std::set<std::string> original_names;
  if (orig)
    for (const auto& sec : orig->sections) original_names.insert(sec.name());
  for (const auto& sec : mut.sections) {
    const std::string name = sec.name();
    if (is_pool_section_name(name) && original_names.count(name) == 0)
      audit.fingerprints.push_back("pool_section_name:" + name);
  }

  const std::uint32_t stored = mut.optional.checksum;
  if (stored != 0 && stored != compute_pe_checksum(mutated))
    audit.fingerprints.push_back("checksum_mismatch");

  if (orig && audit.entry_jump_target != 0 && entry != orig->optional.entry_point_rva &&
      audit.entry_jump_target == orig->optional.entry_point_rva)
    audit.fingerprints.push_back("entry_stub");

  return audit;
}

}  // namespace pevade
