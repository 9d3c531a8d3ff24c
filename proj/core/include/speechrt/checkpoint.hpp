#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>

#include "speechrt/tensor.hpp"

namespace speechrt {

// Named matrices. On disk: a text manifest line `speechrt-weights 1 <count>`,
// then one `<name> <rows> <cols>` line per tensor, a blank line, then the
// values of every tensor in manifest order as little-endian float64.
using TensorMap = std::map<std::string, Matrix>;

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors);
// Throws FormatError.
TensorMap load_tensors(const std::filesystem::path& path);

// Copies `name` out of `tensors` into `target`; throws FormatError on a missing
// name or ShapeMismatch on a shape difference.
void restore_tensor(const TensorMap& tensors, const std::string& name, Matrix& target);

}  // namespace speechrt
