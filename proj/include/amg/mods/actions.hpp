#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amg/pe/image.hpp"

namespace amg::mods {

enum class ActionId : std::uint8_t {
  BreakChecksum,
  AppendOverlay,
  RemoveDebug,
  RemoveCertificate,
  AddNewSection,
  AppendToSection,
  RenameSection,
  IncreaseTimestamp,
  DecreaseTimestamp,
  AppendNewImport,
};

inline constexpr std::size_t kActionCount = 10;

inline constexpr std::array<ActionId, kActionCount> kAllActions = {
    ActionId::BreakChecksum,     ActionId::AppendOverlay,   ActionId::RemoveDebug,
    ActionId::RemoveCertificate, ActionId::AddNewSection,   ActionId::AppendToSection,
    ActionId::RenameSection,     ActionId::IncreaseTimestamp, ActionId::DecreaseTimestamp,
    ActionId::AppendNewImport};

/// 500 days in seconds.
inline constexpr std::uint32_t kTimestampShift = 500u * 86400u;
/// Bytes a new section header needs between the header table and section data.
inline constexpr std::uint64_t kSectionHeaderSlack = 40;

std::string_view action_name(ActionId id);  // snake_case, e.g. "break_checksum"
std::optional<ActionId> action_from_name(std::string_view name);
inline ActionId action_from_index(std::size_t i) { return kAllActions.at(i); }
inline std::size_t action_index(ActionId id) { return static_cast<std::size_t>(id); }

struct ModificationAction {
  ActionId id = ActionId::BreakChecksum;
  std::uint64_t rng_seed = 0;
};

enum class Outcome { Applied, NoOp, Failed };

std::string_view outcome_name(Outcome outcome);

struct ModResult {
  Outcome outcome = Outcome::NoOp;
  pe::PeImage image;
  std::int64_t delta_bytes = 0;
  std::string detail;  // which path an action took, or why it failed
};

/// Benign material the content-adding actions draw from.
struct BenignContentPool {
  std::vector<Bytes> blobs;
  std::vector<std::string> section_names;
  std::map<std::string, std::vector<std::string>> dll_catalog;

  /// Harvests section bytes of benign images into blobs of at most 1 KiB;
  /// names and DLL catalog come from the fixed tables.
  static BenignContentPool harvest(const std::vector<pe::PeImage>& benign_images);
  /// Pool harvested from a fixed-seed synthetic benign set.
  static const BenignContentPool& builtin();

  void validate() const;  // throws std::invalid_argument
};

ModResult break_checksum(const pe::PeImage& img);
ModResult append_overlay(const pe::PeImage& img, const BenignContentPool& pool, std::uint64_t seed);
ModResult remove_debug(const pe::PeImage& img);
ModResult remove_certificate(const pe::PeImage& img);
ModResult add_new_section(const pe::PeImage& img, const BenignContentPool& pool, std::uint64_t seed);
ModResult append_to_section(const pe::PeImage& img, const BenignContentPool& pool, std::uint64_t seed);
ModResult rename_section(const pe::PeImage& img, const BenignContentPool& pool, std::uint64_t seed);
ModResult increase_timestamp(const pe::PeImage& img);
ModResult decrease_timestamp(const pe::PeImage& img);
ModResult append_new_import(const pe::PeImage& img, const BenignContentPool& pool, std::uint64_t seed);

ModResult apply(const pe::PeImage& img, const ModificationAction& action, const BenignContentPool& pool);

}  // namespace amg::mods
