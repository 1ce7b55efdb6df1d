#include "streamtag/checkpoint_io.hpp"

#include <fstream>
#include <sstream>

#include "streamtag/binary_io.hpp"

namespace streamtag::num {

void write_parameters(std::ostream& os, const ParameterContainer& params) {
  io::BinaryWriter w(os);
  w.magic("STPC");
  w.u32(kCheckpointVersion);
  w.u64(params.size());
  for (const NamedTensor& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u64(d);
    for (double v : p.value.data()) w.f64(v);
  }
}

ParameterContainer read_parameters(std::istream& is) {
  io::BinaryReader r(is);
  r.expect_magic("STPC");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = r.u64();
  ParameterContainer out;
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor nt;
    nt.name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = r.f64();
    nt.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  return out;
}

std::string parameters_to_bytes(const ParameterContainer& params) {
  std::ostringstream os(std::ios::binary);
  write_parameters(os, params);
  return os.str();
}

void save_parameters(const std::filesystem::path& path, const ParameterContainer& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_parameters(os, params);
}

ParameterContainer load_parameters(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_parameters(is);
}

}  // namespace streamtag::num
