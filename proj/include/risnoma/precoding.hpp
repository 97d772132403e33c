#pragma once

#include "risnoma/common.hpp"
#include "risnoma/tape.hpp"

namespace rn::prec {

struct SinrTriple {
  double b1 = 0.0;   // SNR of user 1's own signal
  double b21 = 0.0;  // SINR of user 2's signal at user 1 (SIC decode)
  double b22 = 0.0;  // SINR of user 2's signal at user 2
};

enum class Regime : std::uint8_t {
  DegradedCollinear,  // c2 parallel to c1: always quasi-degraded
  QdClosedForm,       // penalty 0, benchmark solution is NOMA-feasible
  ConstraintAActive,  // SIC constraint binds, 1-D search branch
};

struct PrecodingResult {
  CVec v1, v2;
  double total_power = 0.0;  // ||v1||^2 + ||v2||^2
  double penalty = 0.0;
  Regime regime = Regime::QdClosedForm;
  SinrTriple sinrs;
  bool swapped = false;
};

/// beta1 = |c1^H v1|^2/s2, beta21 = |c1^H v2|^2/(|c1^H v1|^2 + s2),
/// beta22 = |c2^H v2|^2/(|c2^H v1|^2 + s2). Row 1 of c is the strong user.
SinrTriple noma_sinrs(const CMat& c, const CVec& v1, const CVec& v2, double sigma2);

/// Orthonormal reduction of span{c1, c2}: e1 = c1/a; c2 = conj(b_c) e1 + d e2.
struct SpanReduction {
  double a = 0.0;      // ||c1||
  double b_mag = 0.0;  // |c2^H c1| / ||c1||
  double d = 0.0;      // ||c2 - projection onto e1||
  cd b_c;              // c2^H e1
  CVec e1, e2;         // e2 empty in the collinear case
  bool collinear = false;
};

SpanReduction reduce_to_span(const CVec& c1, const CVec& c2);

/// Benchmark problem: user 1 decodes interference-free, user 2 sees v1 as
/// interference; minimizes ||v1||^2 + ||v2||^2 subject to beta1 >= g1 and
/// beta22 >= g2. Caller must order users so ||c1|| >= ||c2||.
PrecodingResult bc_precoder(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2);

/// Quasi-degradation penalty: the benchmark precoders' violation of the SIC
/// constraint, p = max(0, g2 (|c1^H v1|^2 + s2) - |c1^H v2|^2) / s2.
double qd_penalty(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2);

/// Full NOMA problem (benchmark constraints plus beta21 >= g2). Returns the
/// benchmark solution when the channel is quasi-degraded; otherwise solves
/// the active-constraint branch by a guarded scalar search over the
/// interference-steering parameter t in [0, 1].
PrecodingResult noma_precoder(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2);

enum class OracleVariant { Noma, Benchmark };

/// Brute-force reference: exhaustive grid over (t, x) in the reduced span
/// with the remaining component y closed-form, then local refinement.
double oracle_precoder(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2,
                       OracleVariant variant);

// ---- user ordering / loss construction -------------------------------------

/// Strong user = larger effective-channel row norm, ties to the original
/// order. Targets g_u = 2^{r_u} - 1 follow their user.
struct OrderedProblem {
  CVec c1, c2;
  double g1 = 0.0, g2 = 0.0;
  bool swapped = false;
};

OrderedProblem order_users(const CMat& c, double r1, double r2);

/// Branch decisions frozen from a plain-arithmetic solve at the current
/// channel; used so the taped expression takes a fixed code path.
struct PrecoderPlan {
  bool swapped = false;
  bool qd = true;          // penalty == 0 branch
  bool b_zero = false;     // channels numerically orthogonal in the span
  double t_active = 0.0;   // active-branch steering parameter (held fixed)
  double g1 = 0.0, g2 = 0.0;
  PrecodingResult solution;  // plain solution, for metrics
};

PrecoderPlan plan_precoding(const CMat& c, double r1, double r2, double sigma2);

/// Builds loss = ||v1|| + ||v2|| + eta_p * p on the tape as a function of the
/// complex 2xM effective channel `c`. The active branch holds the inner
/// minimizer t fixed (envelope principle); everything else is symbolic.
num::Var loss_on_tape(num::Tape& t, num::Var c, const PrecoderPlan& plan, double sigma2,
                      double eta_p);

}  // namespace rn::prec
