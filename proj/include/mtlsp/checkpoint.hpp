#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mtlsp/tensor.hpp"

namespace mtlsp {

inline constexpr const char* kCheckpointHeader = "mtlsp-ckpt-v1";

// Flat name -> (shape, values) map. Binary on disk: header line, entry
// count, then per entry name, rank, dims, raw little-endian doubles.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& named);

// Throws DataError when the header line is not kCheckpointHeader or the
// payload is truncated/corrupt.
std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace mtlsp
