#include "caloricflow/field_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace caloricflow::io {

namespace fs = std::filesystem;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
  return out;
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  fs::path p = stem;
  p += suffix;
  return p;
}

}  // namespace

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_field(const fs::path& stem, const Field& f, const std::optional<AmbientVec>& constant_at_infinity) {
  std::string bytes(f.values().size() * sizeof(double), '\0');
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    const std::uint64_t raw = to_little(std::bit_cast<std::uint64_t>(f.values()[i]));
    std::memcpy(bytes.data() + i * sizeof(double), &raw, sizeof(raw));
  }
  nlohmann::json meta{{"n", f.grid().n}, {"L", f.grid().L}, {"components", f.components()}};
  if (constant_at_infinity)
    meta["constant_at_infinity"] =
        std::vector<double>(constant_at_infinity->span().begin(), constant_at_infinity->span().end());
  else
    meta["constant_at_infinity"] = nullptr;
  write_text_atomic(with_suffix(stem, ".bin"), bytes);
  write_text_atomic(with_suffix(stem, ".json"), meta.dump(2) + "\n");
}

StoredField read_field(const fs::path& stem) {
  std::ifstream js(with_suffix(stem, ".json"));
  if (!js) throw std::runtime_error("missing sidecar for " + stem.string());
  const nlohmann::json meta = nlohmann::json::parse(js);
  const Grid2D g(meta.at("n").get<int>(), meta.at("L").get<double>());
  Field f(g, meta.at("components").get<int>());
  std::ifstream bs(with_suffix(stem, ".bin"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
  if (bytes.size() != f.values().size() * sizeof(double)) throw std::runtime_error("field payload has the wrong size");
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    std::uint64_t raw = 0;
    std::memcpy(&raw, bytes.data() + i * sizeof(double), sizeof(raw));
    f.values()[i] = std::bit_cast<double>(to_little(raw));
  }
  StoredField out{std::move(f), std::nullopt};
  if (!meta.at("constant_at_infinity").is_null()) {
    const auto v = meta.at("constant_at_infinity").get<std::vector<double>>();
    out.constant_at_infinity = AmbientVec(std::span<const double>(v));
  }
  return out;
}

}  // namespace caloricflow::io
