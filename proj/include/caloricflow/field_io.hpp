/// @file field_io.hpp
/// @brief Field files: raw little-endian float64 values plus a JSON sidecar.
///
/// `<stem>.bin` holds node-major values (node = j*n + i, components innermost).
/// `<stem>.json` holds {"n", "L", "components", "constant_at_infinity"}.
#pragma once

#include "caloricflow/grid.hpp"

#include <filesystem>
#include <optional>

namespace caloricflow::io {

struct StoredField {
  Field field;
  std::optional<AmbientVec> constant_at_infinity;
};

/// Writes both files atomically (temporary name, then rename).
void write_field(const std::filesystem::path& stem, const Field& f,
                 const std::optional<AmbientVec>& constant_at_infinity = {});
StoredField read_field(const std::filesystem::path& stem);

/// Writes text through a temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace caloricflow::io
