#include "tape/feature_io.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/io.hpp"

namespace tape {
namespace {

constexpr char kMagic[8] = {'T', 'A', 'P', 'E', 'F', 'M', '1', '\0'};

std::filesystem::path sidecar(const std::filesystem::path& path) {
  std::filesystem::path s = path;
  s += ".json";
  return s;
}

}  // namespace

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32_le(out, bits);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw ConfigError(name_ + ": truncated file");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() {
  const std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& fm) {
  std::string out(kMagic, sizeof(kMagic));
  out.reserve(24 + fm.values.size() * 4);
  put_u64_le(out, fm.values.rows());
  put_u64_le(out, fm.values.cols());
  for (const float v : fm.values.data()) put_f32_le(out, v);
  write_file_atomic(path, out);

  const nlohmann::json meta = {{"source", fm.source},
                               {"seed", fm.seed},
                               {"config_hash", fm.config_hash},
                               {"rows", fm.values.rows()},
                               {"cols", fm.values.cols()}};
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  ByteReader in(read_file(path), path.string());
  if (in.raw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw ConfigError(path.string() + ": bad magic, not a feature matrix");
  const std::uint64_t rows = in.u64();
  const std::uint64_t cols = in.u64();
  if (in.remaining() != rows * cols * 4) throw ConfigError(path.string() + ": payload size mismatch");
  std::vector<float> data(rows * cols);
  for (float& v : data) v = in.f32();

  FeatureMatrix fm;
  fm.values = DenseMatrix(rows, cols, std::move(data));
  if (std::filesystem::exists(sidecar(path))) {
    const auto meta = nlohmann::json::parse(read_file(sidecar(path)));
    fm.source = meta.value("source", "");
    fm.seed = meta.value("seed", std::uint64_t{0});
    fm.config_hash = meta.value("config_hash", "");
  }
  return fm;
}

}  // namespace tape
