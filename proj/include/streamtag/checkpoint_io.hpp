#ifndef STREAMTAG_CHECKPOINT_IO_HPP_
#define STREAMTAG_CHECKPOINT_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "streamtag/tensor.hpp"

namespace streamtag::num {

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

using ParameterContainer = std::vector<NamedTensor>;

// Layout: "STPC", u32 version, u64 count, then per record
// (u32 name length, name bytes, u32 rank, u64 dims..., float64 payload), all LE.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_parameters(std::ostream& os, const ParameterContainer& params);
ParameterContainer read_parameters(std::istream& is);

std::string parameters_to_bytes(const ParameterContainer& params);
void save_parameters(const std::filesystem::path& path, const ParameterContainer& params);
ParameterContainer load_parameters(const std::filesystem::path& path);

}  // namespace streamtag::num

#endif  // STREAMTAG_CHECKPOINT_IO_HPP_
