#include <doctest.h>

#include "gating_fuzz.hpp"

TEST_CASE("gated templates never emit on unflagged frames") {
  auto outcome = oracle::completeness_fuzz(500, 17);
  CHECK(outcome.cases >= 500);
  CHECK(outcome.emitted > 0);
  CHECK(outcome.violations == 0);
}
