#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pevade/pe/image.hpp"

namespace pevade {

// Structural comparison of a mutated file against its origin: does it still
// hold together as a loadable image, and which rewriting artifacts does it
// carry that a defender could key on.
struct ValidityAudit {
  bool still_parses = false;
  bool entry_point_resolves = false;
  bool imports_resolve = false;
  std::uint32_t entry_jump_target = 0;  // rel32 target when entry starts with jmp
  std::vector<std::string> fingerprints;
};

ValidityAudit validity_audit(const ByteBuf& original, const ByteBuf& mutated);

}  // namespace pevade
