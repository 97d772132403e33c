#pragma once

#include "risnoma/common.hpp"

namespace rn::num {

/// X with ||A X - B||_F <= 1e-10 ||B||_F via partial-pivoted LU.
/// Throws Error naming the condition estimate when A is singular or
/// has an estimated condition number above 1e12.
CMat solve_linear(const CMat& a, const CMat& b);

/// Moore-Penrose pseudo-inverse (SVD). Throws on an all-zero input.
CMat pseudo_inverse(const CMat& h);

/// Spectral norm estimate via power iteration on A^H A.
double spectral_norm(const CMat& a);

}  // namespace rn::num
