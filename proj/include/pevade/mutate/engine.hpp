#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pevade/pe/image.hpp"
#include "pevade/util/rng.hpp"

namespace pevade {

enum class ActionKind {
  kImportsAppend,
  kSectionRename,
  kSectionAdd,
  kSectionAppend,
  kNewEntryPoint,
  kRemoveSigner,
  kRemoveDebug,
  kUpxPack,
  kUpxUnpack,
  kBreakChecksum,
  kOverlayAppend,
};

inline constexpr std::array<ActionKind, 11> kAllActions = {
    ActionKind::kImportsAppend, ActionKind::kSectionRename, ActionKind::kSectionAdd,
    ActionKind::kSectionAppend, ActionKind::kNewEntryPoint, ActionKind::kRemoveSigner,
    ActionKind::kRemoveDebug,   ActionKind::kUpxPack,       ActionKind::kUpxUnpack,
    ActionKind::kBreakChecksum, ActionKind::kOverlayAppend,
};

std::string_view action_name(ActionKind kind);
std::optional<ActionKind> action_from_name(std::string_view name);

// Plausible section names drawn for renames and appended sections.
const std::array<std::string_view, 50>& benign_section_names();
bool is_pool_section_name(std::string_view name);

// Common (library, function) pairs drawn for import appends.
struct ImportPoolEntry {
  std::string_view library;
  std::string_view function;
};
const std::vector<ImportPoolEntry>& benign_import_pool();

class MutationEngine {
 public:
  MutationEngine() = default;
  explicit MutationEngine(std::string packer_command) : packer_(std::move(packer_command)) {}

  // Actions usable in this configuration; packing needs an external packer.
  std::vector<ActionKind> available_actions() const;
  bool action_available(ActionKind kind) const;

  // Applies one mutation and returns the rewritten file. Returns the input
  // unchanged when the action has nothing to act on (identity). Throws
  // ActionUnavailableError when the action cannot run in this configuration,
  // NotPeError/MalformedPeError when the input does not parse.
  ByteBuf apply(const ByteBuf& input, ActionKind kind, RandomDraw& rng) const;

  const std::string& packer() const { return packer_; }

 private:
  ByteBuf imports_append(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf section_rename(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf section_add(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf section_append(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf new_entry_point(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf remove_signer(const ByteBuf& input) const;
  ByteBuf remove_debug(const ByteBuf& input) const;
  ByteBuf run_packer(const ByteBuf& input, bool unpack, RandomDraw& rng) const;
  ByteBuf break_checksum(const ByteBuf& input, RandomDraw& rng) const;
  ByteBuf overlay_append(const ByteBuf& input, RandomDraw& rng) const;

  std::string packer_;
};

// Random payload generators shared by mutations and corpus synthesis.
enum class EntropyClass { kLow, kMedium, kHigh };
ByteBuf draw_payload(RandomDraw& rng, std::size_t len, EntropyClass cls);
EntropyClass draw_entropy_class(RandomDraw& rng);
std::size_t draw_payload_length(RandomDraw& rng);

}  // namespace pevade
