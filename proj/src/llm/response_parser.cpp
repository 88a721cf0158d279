#include "tape/response_parser.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/io.hpp"

namespace tape {
namespace {

using json = nlohmann::json;

bool is_word(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool equals_lower_at(std::string_view text, std::size_t at, std::string_view form) noexcept {
  if (at + form.size() > text.size()) return false;
  for (std::size_t i = 0; i < form.size(); ++i)
    if (lower(text[at + i]) != form[i]) return false;
  return true;
}

// End of the head segment, measured from `begin`.
std::size_t head_end(std::string_view raw, std::size_t begin) noexcept {
  for (std::size_t i = begin; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '.' || c == '!' || c == '?') {
      if (i + 1 == raw.size() || is_space(raw[i + 1])) return i + 1;
    } else if (c == '\n') {
      std::size_t j = i + 1;
      while (j < raw.size() && raw[j] != '\n' && is_space(raw[j])) ++j;
      if (j < raw.size() && raw[j] == '\n') return i;
    }
  }
  return raw.size();
}

std::vector<std::size_t> distinct_classes(const std::vector<LabelMention>& mentions, std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& m : mentions) {
    if (out.size() == k) break;
    if (std::find(out.begin(), out.end(), m.class_index) == out.end()) out.push_back(m.class_index);
  }
  return out;
}

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace

std::string_view to_string(ParseStatus status) noexcept {
  switch (status) {
    case ParseStatus::full: return "full";
    case ParseStatus::partial: return "partial";
    case ParseStatus::fallback: return "fallback";
  }
  return "fallback";
}

ParseStatus parse_status_from(std::string_view name) {
  if (name == "full") return ParseStatus::full;
  if (name == "partial") return ParseStatus::partial;
  if (name == "fallback") return ParseStatus::fallback;
  throw ConfigError("unknown parse status '" + std::string(name) + "'");
}

std::vector<LabelMention> find_label_mentions(std::string_view text, const LabelSpace& labels) {
  std::vector<LabelMention> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (i > 0 && is_word(text[i - 1]) && is_word(text[i])) {
      ++i;
      continue;
    }
    std::optional<LabelMention> best;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      for (const auto& form : labels[c].match) {
        if (form.empty() || (best && form.size() <= best->length)) continue;
        if (!equals_lower_at(text, i, form)) continue;
        const std::size_t end = i + form.size();
        if (end < text.size() && is_word(form.back()) && is_word(text[end])) continue;
        best = LabelMention{c, i, form.size()};
      }
    }
    if (best) {
      out.push_back(*best);
      i += best->length;
    } else {
      ++i;
    }
  }
  return out;
}

std::optional<std::size_t> match_label(std::string_view window, const LabelSpace& labels) {
  const auto mentions = find_label_mentions(window, labels);
  if (mentions.empty()) return std::nullopt;
  return mentions.front().class_index;
}

EnrichmentRecord parse_answer(std::string_view raw, const LabelSpace& labels, std::size_t k) {
  EnrichmentRecord rec;
  if (k == 0) {
    rec.explanation = std::string(raw);
    return rec;
  }
  std::size_t begin = 0;
  while (begin < raw.size() && is_space(raw[begin])) ++begin;
  const std::size_t end = head_end(raw, begin);

  rec.ranked = distinct_classes(find_label_mentions(raw.substr(begin, end - begin), labels), k);
  if (!rec.ranked.empty()) {
    rec.status = ParseStatus::full;
    rec.explanation = std::string(trim(raw.substr(end)));
    return rec;
  }
  rec.ranked = distinct_classes(find_label_mentions(raw, labels), k);
  rec.status = rec.ranked.empty() ? ParseStatus::fallback : ParseStatus::partial;
  rec.explanation = std::string(raw);
  return rec;
}

std::vector<std::size_t> pad_ranked(const EnrichmentRecord& record, std::size_t k,
                                    std::size_t absent_index, PadStrategy strategy) {
  if (record.ranked.size() > k)
    throw ConfigError("ranked list of length " + std::to_string(record.ranked.size()) +
                      " exceeds k = " + std::to_string(k));
  std::vector<std::size_t> out = record.ranked;
  switch (strategy) {
    case PadStrategy::absent: out.resize(k, absent_index); break;
  }
  return out;
}

void write_enriched(const std::vector<EnrichmentRecord>& records, const LabelSpace& labels,
                    const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    json names = json::array();
    for (const auto c : r.ranked) {
      if (c >= labels.size()) throw ConfigError("record " + r.node_id + ": class index out of range");
      names.push_back(labels[c].name);
    }
    out += dump_line({{"id", r.node_id},
                      {"ranked", std::move(names)},
                      {"explanation", r.explanation},
                      {"status", to_string(r.status)}});
  }
  write_file_atomic(path, out);
}

std::vector<EnrichmentRecord> read_enriched(const std::filesystem::path& path,
                                            const LabelSpace& labels) {
  const auto lines = split_lines(read_file(path));
  std::vector<EnrichmentRecord> records;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    try {
      const json j = json::parse(lines[n]);
      EnrichmentRecord r;
      r.node_id = j.at("id").get<std::string>();
      for (const auto& name : j.at("ranked")) {
        const auto c = labels.index_of(name.get<std::string>());
        if (!c) throw ConfigError("label '" + name.get<std::string>() + "' is not in the label space");
        r.ranked.push_back(*c);
      }
      r.explanation = j.at("explanation").get<std::string>();
      r.status = parse_status_from(j.at("status").get<std::string>());
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), n + 1, e.what());
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), n + 1, e.what());
    }
  }
  return records;
}

ParseSummary summarize(const std::vector<EnrichmentRecord>& records) {
  ParseSummary s;
  for (const auto& r : records) {
    switch (r.status) {
      case ParseStatus::full: ++s.full; break;
      case ParseStatus::partial: ++s.partial; break;
      case ParseStatus::fallback: ++s.fallback; break;
    }
  }
  return s;
}

void write_parse_report(const std::vector<EnrichmentRecord>& records,
                        const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records)
    out += dump_line({{"id", r.node_id}, {"status", to_string(r.status)}, {"num_ranked", r.ranked.size()}});
  write_file_atomic(path, out);
}

}  // namespace tape
