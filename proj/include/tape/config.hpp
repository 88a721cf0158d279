#pragma once

// Run configuration: a flat, sectioned key = value file (a TOML subset:
// strings, integers, floats, booleans, flat arrays, '#' comments). Every key
// has a typed default; unknown keys and type mismatches are ConfigErrors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tape/ensemble.hpp"
#include "tape/features.hpp"
#include "tape/graph.hpp"
#include "tape/llm_client.hpp"

namespace tape {

// Parses one TOML-subset value ("text", 12, 0.5, true, [1, 2]). Throws
// ConfigError.
nlohmann::json parse_config_value(std::string_view text);

// {"section": {"key": value}} from file text. `name` labels errors.
nlohmann::json parse_config_text(std::string_view text, const std::string& name);

// Inverse of parse_config_text for a {"section": {"key": value}} object.
std::string render_config(const nlohmann::json& table);

class RunConfig {
 public:
  // All keys at their defaults.
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);

  // "section.key"; throws ConfigError for unknown keys and mistyped values.
  void set(const std::string& dotted_key, const nlohmann::json& value);
  // Parses `text` as a config value; bare words are taken as strings.
  void set_text(const std::string& dotted_key, std::string_view text);
  const nlohmann::json& get(const std::string& dotted_key) const;

  // Every known key, "section.key"; sections in fixed order, keys sorted.
  static std::vector<std::string> keys();

  const nlohmann::json& table() const noexcept { return table_; }
  std::string render() const { return render_config(table_); }
  // FNV-1a of the canonical table minus the output directory.
  std::string hash() const;

  // Typed views.
  DatasetPaths dataset_paths() const;
  std::string template_spec() const { return get("dataset.template").get<std::string>(); }
  std::size_t abstract_budget() const { return get("dataset.abstract_budget").get<std::size_t>(); }
  LlmConfig llm() const;
  bool mock() const { return get("mock.enabled").get<bool>(); }
  double mock_accuracy() const { return get("mock.accuracy").get<double>(); }
  bool repair_cache() const { return get("llm.repair_cache").get<bool>(); }
  FeatureBuildConfig features() const;
  GnnConfig gnn() const;
  std::vector<std::uint64_t> seeds() const;
  ExperimentSpec experiment() const;
  std::filesystem::path out_dir() const { return get("experiment.out").get<std::string>(); }
  std::string sweep_family() const { return get("sweep.family").get<std::string>(); }
  std::size_t sweep_sample_size() const { return get("sweep.sample_size").get<std::size_t>(); }

  // Checks cross-field constraints (nonempty seeds, known enum names, ...).
  void validate() const;

 private:
  nlohmann::json table_;
};

}  // namespace tape
