#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tape/graph.hpp"

namespace tape {

enum class ParseStatus { full, partial, fallback };

std::string_view to_string(ParseStatus status) noexcept;
// Throws ConfigError for unknown names.
ParseStatus parse_status_from(std::string_view name);

// ranked holds distinct class indices < C, at most k of them.
// status == fallback implies ranked is empty and explanation is the raw text.
struct EnrichmentRecord {
  std::string node_id;
  std::vector<std::size_t> ranked;
  std::string explanation;
  ParseStatus status = ParseStatus::fallback;

  friend bool operator==(const EnrichmentRecord&, const EnrichmentRecord&) = default;
};

struct LabelMention {
  std::size_t class_index;
  std::size_t offset;  // byte offset of the match in the scanned text
  std::size_t length;
};

// Every whole-word, case-insensitive occurrence of a match form, in text
// order. At a given offset the longest form wins; matches never overlap.
std::vector<LabelMention> find_label_mentions(std::string_view text, const LabelSpace& labels);

// Class of the first mention in `window`, if any.
std::optional<std::size_t> match_label(std::string_view window, const LabelSpace& labels);

// Total: never throws on any input bytes. The head segment runs from the first
// non-whitespace byte to the first blank line or sentence end ('.', '!' or '?'
// followed by whitespace or end of text).
EnrichmentRecord parse_answer(std::string_view raw, const LabelSpace& labels, std::size_t k);

enum class PadStrategy { absent };

// Exactly k entries: ranked followed by `absent_index` (= C) fillers.
// Throws ConfigError if ranked is longer than k.
std::vector<std::size_t> pad_ranked(const EnrichmentRecord& record, std::size_t k,
                                    std::size_t absent_index,
                                    PadStrategy strategy = PadStrategy::absent);

// Enriched JSONL: {"id", "ranked": [class names], "explanation", "status"}.
void write_enriched(const std::vector<EnrichmentRecord>& records, const LabelSpace& labels,
                    const std::filesystem::path& path);
std::vector<EnrichmentRecord> read_enriched(const std::filesystem::path& path,
                                            const LabelSpace& labels);

struct ParseSummary {
  std::size_t full = 0;
  std::size_t partial = 0;
  std::size_t fallback = 0;

  std::size_t total() const noexcept { return full + partial + fallback; }
  double fallback_rate() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(fallback) / static_cast<double>(total());
  }
};

ParseSummary summarize(const std::vector<EnrichmentRecord>& records);

// One line per node: {"id", "status", "num_ranked"}.
void write_parse_report(const std::vector<EnrichmentRecord>& records,
                        const std::filesystem::path& path);

}  // namespace tape
