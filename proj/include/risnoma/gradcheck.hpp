#pragma once

#include <string>
#include <vector>

#include "risnoma/common.hpp"

namespace rn::num {

struct ComponentReport {
  std::string name;
  double max_rel_err = 0.0;
  int instances = 0;
};

/// Finite-difference verification of every differentiable component:
/// individual primitives, the effective-channel composition (including the
/// mutual-coupling solve), the precoder value functions, and full
/// network-to-loss programs on a 9x9 panel. `corrupt_adjoint` routes one
/// component through an intentionally wrong adjoint (negative control).
std::vector<ComponentReport> run_gradcheck(std::uint64_t seed, bool corrupt_adjoint = false);

/// Pass threshold shared by the CLI and the test suite.
inline constexpr double kGradCheckTol = 1e-4;

}  // namespace rn::num
