#ifndef PARSAC_TENSOR_FILE_HPP_
#define PARSAC_TENSOR_FILE_HPP_

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace parsac {

/// Binary tensor container:
///   line 1   magic tag
///   line 2   JSON header: {"format_version", "meta", "tensors": [{name, rows, cols}]}
///   payload  64-bit little-endian doubles, tensors in manifest order,
///            each tensor row-major.
struct StoredTensor {
  std::string name;
  long rows = 0;
  long cols = 0;
  std::vector<double> values;  // row-major
};

struct TensorFile {
  int format_version = 1;
  nlohmann::json meta;
  std::vector<StoredTensor> tensors;
};

inline constexpr int kTensorFileVersion = 1;

void write_tensor_file(const std::filesystem::path& path, const std::string& magic, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& magic);

}  // namespace parsac

#endif  // PARSAC_TENSOR_FILE_HPP_
