#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

struct FuzzOutcome {
  std::size_t cases = 0;       // queried frames examined
  std::size_t emitted = 0;     // gated samples produced
  std::size_t violations = 0;  // gated samples on a frame lacking a required flag
  std::vector<std::string> examples;
};

/// Randomly rewrites the lane/crossing completeness flags of the fixture
/// scenes and checks that gated templates only emit on flagged frames.
FuzzOutcome completeness_fuzz(std::size_t min_cases, std::uint64_t seed);

}  // namespace oracle
