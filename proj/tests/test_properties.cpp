#include "property_suite.hpp"

#include <gtest/gtest.h>

namespace {

void expect_clean(const props::Outcome& o) {
  EXPECT_EQ(o.cases, 1000);
  EXPECT_EQ(o.failures, 0) << o.first_failure;
}

}  // namespace

TEST(Properties, UncertaintyPreserved) { expect_clean(props::uncertainty_preservation(1000, 101)); }

TEST(Properties, SymplecticComposition) { expect_clean(props::symplectic_identity(1000, 202)); }

TEST(Properties, FidelityAboveHalfIffXiBelowFour) { expect_clean(props::fidelity_xi_equivalence(1000, 303)); }

TEST(Properties, AttenuationNeverHurts) { expect_clean(props::attenuation_non_worsening(1000, 404)); }

TEST(Properties, AjMaxMonotone) { expect_clean(props::aj_max_monotonicity(1000, 505)); }
