#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tape/matrix.hpp"

namespace tape {

// A frozen N x d node-feature matrix plus provenance.
struct FeatureMatrix {
  DenseMatrix values;
  std::string source;  // "orig" | "expl" | "pred"
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// Binary layout (little endian): 8-byte magic "TAPEFM1\0", u64 rows, u64 cols,
// rows*cols float32 row-major. A JSON sidecar at `<path>.json` carries
// source, seed and config_hash.
void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& fm);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

// Little-endian helpers shared by the binary formats.
void put_u32_le(std::string& out, std::uint32_t v);
void put_u64_le(std::string& out, std::uint64_t v);
void put_f32_le(std::string& out, float v);

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string raw(std::size_t n);
  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::string bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace tape
