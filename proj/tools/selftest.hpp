#ifndef STREAMTAG_TOOLS_SELFTEST_HPP_
#define STREAMTAG_TOOLS_SELFTEST_HPP_

#include <cstdint>
#include <ostream>

namespace streamtag::tools {

/// Finite-difference check of every parameter group of a memory-enabled model.
bool run_gradcheck(std::uint64_t seed, std::ostream& out);

/// Brute-force CRF, linear-scan retrieval and gradient oracles.
bool run_selftest(std::uint64_t seed, std::ostream& out);

}  // namespace streamtag::tools

#endif  // STREAMTAG_TOOLS_SELFTEST_HPP_
