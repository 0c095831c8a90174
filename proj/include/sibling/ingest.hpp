#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sibling/core.hpp"

namespace sibling {

enum class IngestErrc { MalformedRecord, DuplicateLabel, MissingFile };

class IngestError : public std::runtime_error {
 public:
  IngestError(IngestErrc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}
  IngestErrc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  IngestErrc code_;
  std::size_t line_;
};

struct LoadedBatch {
  std::vector<CandidatePair> pairs;
  /// Skipped candidates, e.g. "MissingSeries(c00012)".
  std::vector<std::string> warnings;
};

/// Assembles candidate pairs from traces.jsonl + options.jsonl (+ labels.csv).
/// Pair order follows first appearance in the trace file.
LoadedBatch load_batch(const std::filesystem::path& trace_path,
                       const std::filesystem::path& options_path,
                       const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Inverse of load_batch for pairs with distinct ids. Files are replaced
/// atomically.
void save_batch(std::span<const CandidatePair> pairs, const std::filesystem::path& trace_path,
                const std::filesystem::path& options_path,
                const std::optional<std::filesystem::path>& labels_path = std::nullopt);

std::string trace_record(const std::string& id, Family family, const std::string& ip,
                         const TimestampSample& s);
std::string options_record(const std::string& id, Family family, const OptionsFingerprint& fp);

/// All ordered (v6 owner, v4 owner) index combinations with i ≠ j.
std::vector<std::pair<std::size_t, std::size_t>> nonsibling_index_pairs(std::span<const std::size_t> members);

/// Builds the non-sibling pair of sibling i's v6 side and sibling j's v4 side.
CandidatePair mix_pair(const CandidatePair& owner6, const CandidatePair& owner4);

/// n·(n-1) non-siblings: the v6 series of each sibling against the v4 series
/// of every other one.
std::vector<CandidatePair> synthesize_nonsiblings(std::span<const CandidatePair> siblings);

}  // namespace sibling
