#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "lga/matrix.hpp"

namespace lga {

inline constexpr std::string_view kFeatureMagic = "LGAF";
inline constexpr std::uint16_t kFeatureVersion = 1;

// Feature blob: "LGAF", u16 version, u32 rows, u32 cols, then rows*cols
// little-endian f32 in row-major order. Values are narrowed to float on write.
void write_feature_blob(const std::filesystem::path& path, const Matrix& m);
std::vector<char> encode_feature_blob(const Matrix& m);

// Throws missing_blob if the file cannot be opened, corrupt_file (offset 0)
// on bad magic, truncated_file when the payload is short, invalid_data on
// NaN/Inf payload values.
Matrix read_feature_blob(const std::filesystem::path& path);

}  // namespace lga
