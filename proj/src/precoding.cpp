#include "risnoma/precoding.hpp"

namespace rn::prec {

namespace {

constexpr double kCollinearTol = 1e-9;   // relative d threshold
constexpr double kOrthogonalTol = 1e-12; // relative b threshold
constexpr double kFeasSlack = 1e-9;

double sq(double x) { return x * x; }

// Minimizes a convex scalar function on [lo, hi]: golden-section bracket
// shrink, then a guarded finite-difference Newton polish.
template <typename F>
double minimize_scalar(F f, double lo, double hi) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 90 && (b - a) > 1e-13; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  double best = 0.5 * (a + b);
  double fbest = f(best);
  // Newton polish on the derivative (central differences).
  double t = best;
  for (int it = 0; it < 6; ++it) {
    double h = 1e-7 * std::max(1.0, std::abs(t));
    double fp = f(t + h), fm = f(t - h), f0 = f(t);
    double d1 = (fp - fm) / (2.0 * h);
    double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    if (!(d2 > 0.0)) break;
    double next = std::clamp(t - d1 / d2, lo, hi);
    if (std::abs(next - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  if (f(t) < fbest) {
    best = t;
    fbest = f(t);
  }
  for (double cand : {lo, hi})
    if (f(cand) < fbest) {
      best = cand;
      fbest = f(cand);
    }
  return best;
}

}  // namespace

SinrTriple noma_sinrs(const CMat& c, const CVec& v1, const CVec& v2, double sigma2) {
  if (!(sigma2 > 0)) throw Error("noma_sinrs: noise power must be > 0");
  double s11 = std::norm(cd(c.row(0) * v1));  // |c1^H v1|^2
  double s12 = std::norm(cd(c.row(0) * v2));
  double s21 = std::norm(cd(c.row(1) * v1));
  double s22 = std::norm(cd(c.row(1) * v2));
  SinrTriple out;
  out.b1 = s11 / sigma2;
  out.b21 = s12 / (s11 + sigma2);
  out.b22 = s22 / (s21 + sigma2);
  return out;
}

SpanReduction reduce_to_span(const CVec& c1, const CVec& c2) {
  SpanReduction sr;
  sr.a = c1.norm();
  if (sr.a == 0.0) throw Error("reduce_to_span: strong-user channel is zero");
  sr.e1 = c1 / sr.a;
  sr.b_c = c2.dot(sr.e1);  // c2^H e1
  sr.b_mag = std::abs(sr.b_c);
  CVec resid = c2 - std::conj(sr.b_c) * sr.e1;  // c2 = conj(b_c) e1 + d e2
  sr.d = resid.norm();
  double c2n = c2.norm();
  sr.collinear = sr.d < kCollinearTol * std::max(c2n, 1e-300);
  if (!sr.collinear) sr.e2 = resid / sr.d;
  return sr;
}

PrecodingResult bc_precoder(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2) {
  if (!(g1 > 0) || !(g2 > 0)) throw Error("bc_precoder: SINR targets must be > 0");
  if (!(sigma2 > 0)) throw Error("bc_precoder: noise power must be > 0");
  double c2n2 = c2.squaredNorm();
  if (c2n2 == 0.0) throw Error("bc_precoder: weak-user channel is zero");
  SpanReduction sr = reduce_to_span(c1, c2);
  const double u = std::sqrt(g1 * sigma2) / sr.a;
  const double b2 = sq(sr.b_mag);

  PrecodingResult r;
  double i2, p1;  // interference at user 2, ||v1||^2
  if (sr.collinear) {
    r.v1 = u * sr.e1;
    i2 = b2 * sq(u);
    p1 = sq(u);
    r.regime = Regime::DegradedCollinear;
  } else {
    double d2 = sq(sr.d);
    double t = g2 * d2 / (c2n2 + g2 * d2);
    r.v1 = u * sr.e1 - (t * sr.b_c * u / sr.d) * sr.e2;
    i2 = b2 * sq(u) * sq(1.0 - t);
    p1 = sq(u) * (1.0 + b2 * sq(t) / d2);
  }
  double p2 = g2 * (i2 + sigma2) / c2n2;  // ||v2||^2, MRT along c2
  r.v2 = std::sqrt(p2) * c2 / std::sqrt(c2n2);
  r.total_power = p1 + p2;
  // SIC-constraint violation of this solution, normalized by noise power:
  // |c1^H v1|^2 = g1 sigma2 exactly, |c1^H v2|^2 = p2 b^2 a^2 / ||c2||^2.
  double sic_lhs = g2 * (g1 * sigma2 + sigma2);
  double sic_rhs = p2 * b2 * sq(sr.a) / c2n2;
  r.penalty = std::max(0.0, sic_lhs - sic_rhs) / sigma2;
  if (!sr.collinear) r.regime = r.penalty > 0.0 ? Regime::ConstraintAActive : Regime::QdClosedForm;
  CMat c(2, c1.size());
  c.row(0) = c1.adjoint();
  c.row(1) = c2.adjoint();
  r.sinrs = noma_sinrs(c, r.v1, r.v2, sigma2);
  if (r.sinrs.b1 < g1 * (1.0 - kFeasSlack) || r.sinrs.b22 < g2 * (1.0 - kFeasSlack))
    throw Error("bc_precoder: constructed solution violates its own constraints");
  return r;
}

double qd_penalty(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2) {
  return bc_precoder(c1, c2, g1, g2, sigma2).penalty;
}

PrecodingResult noma_precoder(const CVec& c1, const CVec& c2, double g1, double g2,
                              double sigma2) {
  PrecodingResult bc = bc_precoder(c1, c2, g1, g2, sigma2);
  if (bc.penalty <= 0.0) return bc;  // quasi-degraded: benchmark solution is feasible
  SpanReduction sr = reduce_to_span(c1, c2);
  if (sr.collinear)
    throw Error("noma_precoder: collinear channel with positive penalty (ordering violated?)");

  const double c2n2 = c2.squaredNorm();
  const double u = std::sqrt(g1 * sigma2) / sr.a;
  const double b = sr.b_mag;
  const double b2 = sq(b);
  const double d = sr.d, d2 = sq(d);
  const double big_a = g2 * (1.0 + g1) * sigma2;
  const double x = std::sqrt(big_a) / sr.a;
  auto y_of = [&](double t) {
    return std::max(0.0, (std::sqrt(g2 * (b2 * sq(u) * sq(1.0 - t) + sigma2)) - x * b) / d);
  };
  auto total = [&](double t) {
    return sq(u) * (1.0 + b2 * sq(t) / d2) + sq(x) + sq(y_of(t));
  };
  double t = minimize_scalar(total, 0.0, 1.0);
  double y = y_of(t);

  PrecodingResult r;
  r.v1 = u * sr.e1 - (t * sr.b_c * u / sr.d) * sr.e2;
  CVec dir1 = b > kOrthogonalTol * std::sqrt(c2n2) ? CVec((std::conj(sr.b_c) / b) * sr.e1)
                                                   : CVec(sr.e1);
  r.v2 = x * dir1 + y * sr.e2;
  r.total_power = total(t);
  r.penalty = bc.penalty;
  r.regime = Regime::ConstraintAActive;
  CMat c(2, c1.size());
  c.row(0) = c1.adjoint();
  c.row(1) = c2.adjoint();
  r.sinrs = noma_sinrs(c, r.v1, r.v2, sigma2);
  if (r.sinrs.b1 < g1 * (1.0 - kFeasSlack) || r.sinrs.b21 < g2 * (1.0 - kFeasSlack) ||
      r.sinrs.b22 < g2 * (1.0 - kFeasSlack))
    throw Error("noma_precoder: constructed solution violates a constraint");
  return r;
}

double oracle_precoder(const CVec& c1, const CVec& c2, double g1, double g2, double sigma2,
                       OracleVariant variant) {
  SpanReduction sr = reduce_to_span(c1, c2);
  double c2n2 = c2.squaredNorm();
  if (c2n2 == 0.0) throw Error("oracle_precoder: weak-user channel is zero");
  const double u = std::sqrt(g1 * sigma2) / sr.a;
  const double b = sr.b_mag, b2 = sq(b);
  const double big_a = g2 * (1.0 + g1) * sigma2;
  const double x_lo = variant == OracleVariant::Noma ? std::sqrt(big_a) / sr.a : 0.0;

  if (sr.collinear) {
    // Only the e1 direction exists; interference at user 2 is fixed at b^2 u^2.
    double x_needed = std::sqrt(g2 * (b2 * sq(u) + sigma2)) / b;
    double x = std::max(x_lo, x_needed);
    return sq(u) + sq(x);
  }
  const double d = sr.d, d2 = sq(d);
  auto power = [&](double t, double x) {
    double y =
        std::max(0.0, (std::sqrt(g2 * (b2 * sq(u) * sq(1.0 - t) + sigma2)) - x * b) / d);
    return sq(u) * (1.0 + b2 * sq(t) / d2) + sq(x) + sq(y);
  };
  double x_hi = b > kOrthogonalTol * std::sqrt(c2n2)
                    ? std::max(x_lo, std::sqrt(g2 * (b2 * sq(u) + sigma2)) / b)
                    : x_lo;
  double t_lo = 0.0, t_hi = 1.0, xa = x_lo, xb = x_hi;
  double best = std::numeric_limits<double>::infinity();
  double best_t = 0.0, best_x = x_lo;
  for (int round = 0; round < 4; ++round) {
    const int n = round == 0 ? 2000 : 200;
    double dt = (t_hi - t_lo) / (n - 1);
    double dx = xb > xa ? (xb - xa) / (n - 1) : 0.0;
    for (int i = 0; i < n; ++i) {
      double t = t_lo + dt * i;
      for (int j = 0; j < (dx > 0.0 ? n : 1); ++j) {
        double x = xa + dx * j;
        double p = power(t, x);
        if (p < best) {
          best = p;
          best_t = t;
          best_x = x;
        }
      }
    }
    double wt = 1.5 * dt, wx = 1.5 * dx;
    t_lo = std::max(0.0, best_t - wt);
    t_hi = std::min(1.0, best_t + wt);
    xa = std::max(x_lo, best_x - wx);
    xb = std::min(x_hi, best_x + wx);
  }
  return best;
}

OrderedProblem order_users(const CMat& c, double r1, double r2) {
  if (c.rows() != 2) throw Error("order_users: expected a 2-row effective channel");
  double n1 = c.row(0).norm(), n2 = c.row(1).norm();
  OrderedProblem op;
  op.swapped = n2 > n1;
  int strong = op.swapped ? 1 : 0;
  op.c1 = c.row(strong).adjoint();
  op.c2 = c.row(1 - strong).adjoint();
  double r_strong = op.swapped ? r2 : r1;
  double r_weak = op.swapped ? r1 : r2;
  op.g1 = std::exp2(r_strong) - 1.0;
  op.g2 = std::exp2(r_weak) - 1.0;
  return op;
}

PrecoderPlan plan_precoding(const CMat& c, double r1, double r2, double sigma2) {
  OrderedProblem op = order_users(c, r1, r2);
  PrecoderPlan plan;
  plan.swapped = op.swapped;
  plan.g1 = op.g1;
  plan.g2 = op.g2;
  plan.solution = noma_precoder(op.c1, op.c2, op.g1, op.g2, sigma2);
  plan.solution.swapped = op.swapped;
  plan.qd = plan.solution.regime != Regime::ConstraintAActive;
  SpanReduction sr = reduce_to_span(op.c1, op.c2);
  plan.b_zero = sr.b_mag <= kOrthogonalTol * op.c2.norm();
  if (!plan.qd) {
    // Recover the steering parameter actually used from v1's e2 component:
    // |e2^H v1| = t b u / d.
    double u = std::sqrt(op.g1 * sigma2) / sr.a;
    double comp = sr.e2.size() ? std::abs(cd(sr.e2.dot(plan.solution.v1))) : 0.0;
    plan.t_active =
        sr.b_mag > 0.0 ? std::clamp(comp * sr.d / (sr.b_mag * u), 0.0, 1.0) : 0.0;
  }
  return plan;
}

num::Var loss_on_tape(num::Tape& t, num::Var c, const PrecoderPlan& plan, double sigma2,
                      double eta_p) {
  using namespace num;
  const int i1 = plan.swapped ? 1 : 0;
  const double g1 = plan.g1, g2 = plan.g2;
  Var r1 = row(c, i1);      // strong user row of C (acts as c1^H)
  Var r2 = row(c, 1 - i1);  // weak user row

  // Scalar building blocks (all 1x1 real nodes).
  Var a2 = sum_all(square(cabs(r1)));                 // ||c1||^2
  Var c22 = sum_all(square(cabs(r2)));                // ||c2||^2
  Var ip = matmul(r2, conj_transpose(r1));            // c2 . conj(c1), |ip| = |c2^H c1|
  Var bsq = square(cabs(ip));                         // b^2 a^2
  Var inv_a2 = inv(a2);
  Var b2 = mul(bsq, inv_a2);                          // b^2
  Var d2 = hinge(sub(c22, b2));                       // d^2 (clamped; 0 when collinear)
  Var u2 = scale(inv_a2, g1 * sigma2);                // u^2

  // Benchmark quantities (fully symbolic; t_bc = g2 d^2 / (||c2||^2 + g2 d^2)).
  Var s = add(c22, scale(d2, g2));
  Var ratio = mul(c22, inv(s));                       // 1 - t_bc
  Var i2 = mul(mul(b2, u2), square(ratio));           // interference at user 2
  Var p2_bc = scale(mul(add_const(i2, sigma2), inv(c22)), g2);  // ||v2_bc||^2
  // Penalty: max(0, g2 (g1+1) s2 - p2_bc b^2 a^2 / ||c2||^2) / s2.
  Var sic = mul(p2_bc, mul(bsq, inv(c22)));
  Var pen = scale(hinge(add_const(scale(sic, -1.0), g2 * (1.0 + g1) * sigma2)), 1.0 / sigma2);

  Var p1, p2;
  if (plan.qd) {
    // ||v1_bc||^2 = u^2 (1 + g2^2 b^2 d^2 / s^2).
    p1 = mul(u2, add_const(scale(mul(b2, mul(d2, inv(square(s)))), g2 * g2), 1.0));
    p2 = p2_bc;
  } else {
    const double ta = plan.t_active;
    const double big_a = g2 * (1.0 + g1) * sigma2;
    Var x2 = scale(inv_a2, big_a);
    // t held fixed at the inner minimizer (envelope principle).
    p1 = plan.b_zero ? u2
                     : mul(u2, add_const(scale(mul(b2, inv(d2)), ta * ta), 1.0));
    Var r_req = sqrt_v(scale(add_const(scale(mul(b2, u2), sq(1.0 - ta)), sigma2), g2));
    Var gap = plan.b_zero ? r_req : sub(r_req, sqrt_v(mul(b2, x2)));
    Var y = hinge(mul(gap, inv(sqrt_v(d2))));
    p2 = add(x2, square(y));
  }
  Var loss = add(add(sqrt_v(p1), sqrt_v(p2)), scale(pen, eta_p));
  return loss;
}

}  // namespace rn::prec
