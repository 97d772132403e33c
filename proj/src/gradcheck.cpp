#include "risnoma/gradcheck.hpp"

#include "risnoma/channel.hpp"
#include "risnoma/precoding.hpp"
#include "risnoma/risnet.hpp"
#include "risnoma/tape.hpp"
#include "risnoma/training.hpp"

namespace rn::num {

namespace {

RMat random_rmat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  RMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

CMat random_cmat(Rng& rng, int r, int c, double scale = 1.0) {
  CMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.cnormal();
  return m;
}

CMat random_coupling(Rng& rng, int n, double scale) {
  CMat s = random_cmat(rng, n, n, scale);
  s.diagonal().setZero();
  s = (s + s.transpose().eval()).eval() * 0.5;
  return s;
}

// Identity whose backward deliberately mis-scales the gradient; used as the
// negative control for the checker itself.
Var bad_identity(Var a) {
  Tape& t = *a.tape;
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(t.node(self).rg * 1.001));
  });
}

struct Case {
  Program program;
  std::vector<RMat> point;
};

double check_cases(const std::vector<Case>& cases, double step = 1e-5) {
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, grad_check(c.program, c.point, step));
  return worst;
}

}  // namespace

std::vector<ComponentReport> run_gradcheck(std::uint64_t seed, bool corrupt_adjoint) {
  Rng rng(derive_seed(seed, 0x6c4d));
  std::vector<ComponentReport> out;
  auto report = [&](const std::string& name, const std::vector<Case>& cases) {
    out.push_back({name, check_cases(cases), int(cases.size())});
  };

  // ---- primitives ----------------------------------------------------------
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      Program p(
          [](Tape& t, std::span<const Var> in) {
            Var prod = matmul(in[0], in[1]);
            return sum_all(square(prod));
          },
          {{3, 4}, {4, 2}});
      cases.push_back({p, {random_rmat(rng, 3, 4), random_rmat(rng, 4, 2)}});
    }
    report("matmul_real", cases);
  }
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      CMat a = random_cmat(rng, 6, 3);
      CMat b = random_cmat(rng, 6, 2);
      Program p(
          [a, b](Tape& t, std::span<const Var> in) {
            // Mixing across rows makes the phases interfere; a plain
            // Gram matrix of z would be phase-invariant.
            Var z = rowscale(cis(in[0]), t.constant(a));
            Var w = matmul(conj_transpose(z), t.constant(b));
            return sum_all(square(cabs(w)));
          },
          {{6, 1}});
      cases.push_back({p, {random_rmat(rng, 6, 1, 0.1, 6.0)}});
    }
    report("cis_rowscale_cabs", cases);
  }
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      // Keep arguments away from the branch cut at pi.
      CMat a = random_cmat(rng, 5, 2);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 2; ++j)
          a(i, j) = std::polar(rng.uniform(0.5, 2.0), rng.uniform(-2.0, 2.0));
      Program p(
          [a](Tape& t, std::span<const Var> in) {
            Var z = rowscale(cis(in[0]), t.constant(a));
            return sum_all(square(carg(z)));
          },
          {{5, 1}});
      cases.push_back({p, {random_rmat(rng, 5, 1, -0.4, 0.4)}});
    }
    report("carg", cases);
  }
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      CMat s0 = random_coupling(rng, 4, 0.15);
      CMat b = random_cmat(rng, 4, 3);
      CMat eye = CMat::Identity(4, 4);
      Program p(
          [s0, b, eye](Tape& t, std::span<const Var> in) {
            Var a = sub(t.constant(eye), rowscale(cis(in[0]), t.constant(s0)));
            Var x = solve(a, t.constant(b));
            return sum_all(square(cabs(x)));
          },
          {{4, 1}});
      cases.push_back({p, {random_rmat(rng, 4, 1, 0.0, 6.28)}});
    }
    report("linear_solve", cases);
  }
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      Program p(
          [](Tape& t, std::span<const Var> in) {
            Var a = relu(in[0]);
            Var b = hinge(add_const(in[0], -0.2));
            Var c = vcat(a, b);
            Var d = hcat(c, scale(c, 0.5));
            Var e = mean_cols(d);
            Var f = broadcast_cols(e, d.tape->rval(d).cols() == 6 ? 6 : 6);
            Var g = mul(d, f);
            Var h = sqrt_v(add_const(square(g), 1.0));
            Var i = inv(add_const(square(e), 0.5));
            return add(sum_all(h), sum_all(transpose_r(i)));
          },
          {{4, 3}});
      cases.push_back({p, {random_rmat(rng, 4, 3)}});
    }
    report("real_elementwise_and_reshape", cases);
  }
  {
    std::vector<Case> cases;
    for (int k = 0; k < 12; ++k) {
      int n = 8, m = 3;
      auto h = std::make_shared<const CMat>(random_cmat(rng, n, m));
      auto s = std::make_shared<const CMat>(random_coupling(rng, n, 0.1));
      Program p(
          [h, s](Tape& t, std::span<const Var> in) {
            Var x = ris_cascade(in[0], h, s);
            return sum_all(square(cabs(x)));
          },
          {{8, 1}});
      cases.push_back({p, {random_rmat(rng, 8, 1, 0.0, 6.28)}});
    }
    report("ris_cascade", cases);
  }

  // ---- effective channel (coupling inverse included) ------------------------
  {
    std::vector<Case> cases;
    const int n = 81, m = 2;
    for (int k = 0; k < 30; ++k) {
      CMat hm = random_cmat(rng, n, m, 0.5);
      CMat g = random_cmat(rng, 2, n, 0.3);
      CMat d = random_cmat(rng, 2, m, 0.1);
      auto h = std::make_shared<const CMat>(hm);
      auto s = std::make_shared<const CMat>(random_coupling(rng, n, 0.02));
      Program p(
          [h, s, g, d, corrupt_adjoint](Tape& t, std::span<const Var> in) {
            Var c = chan::effective_channel_on_tape(t, in[0], d, g, h, s);
            Var v = sum_all(square(cabs(c)));
            return corrupt_adjoint ? bad_identity(v) : v;
          },
          {{n, 1}});
      cases.push_back({p, {random_rmat(rng, n, 1, 0.0, 6.28)}});
    }
    report("effective_channel", cases);
  }

  // ---- precoder value functions through the channel --------------------------
  {
    std::vector<Case> cases;
    const int n = 81, m = 2;
    for (int k = 0; k < 100; ++k) {
      CMat hm = random_cmat(rng, n, m, 0.5);
      CMat g = random_cmat(rng, 2, n, 0.3);
      CMat d = random_cmat(rng, 2, m, 0.1);
      auto h = std::make_shared<const CMat>(hm);
      auto s = std::make_shared<const CMat>(random_coupling(rng, n, 0.02));
      double r1 = rng.uniform(0.5, 2.0), r2 = rng.uniform(0.5, 2.0);
      RMat psi0 = random_rmat(rng, n, 1, 0.0, 6.28);
      CMat c0 = chan::effective_channel(d, g, *h, *s, psi0.col(0));
      prec::PrecoderPlan plan = prec::plan_precoding(c0, r1, r2, 1.0);
      Program p(
          [h, s, g, d, plan](Tape& t, std::span<const Var> in) {
            Var c = chan::effective_channel_on_tape(t, in[0], d, g, h, s);
            return prec::loss_on_tape(t, c, plan, 1.0, 100.0);
          },
          {{n, 1}});
      cases.push_back({p, {psi0}});
    }
    report("precoder_loss", cases);
  }

  // ---- full programs: network parameters -> loss -----------------------------
  // The taped parameter gradient is compared against central differences of
  // the branch-fixed loss on a random subset of parameter coordinates.
  for (auto variant : {net::Variant::FullCsi, net::Variant::PartialCsi}) {
    const int rows = 9, cols = 9, n = rows * cols, m = 2;
    double worst = 0.0;
    const int n_instances = 3;
    for (int k = 0; k < n_instances; ++k) {
      net::RISnetModel model =
          net::make_model(variant, rows, cols, derive_seed(seed, 100 + k), 6, 2);
      model.feature_scale = 1.0;
      chan::ScenarioConfig sc;
      sc.ris_rows = rows;
      sc.ris_cols = cols;
      sc.bs_antennas = m;
      chan::Scene scene = chan::build_scene(sc, derive_seed(seed, 200 + k));
      chan::ChannelSample sample = chan::sample_channels(
          sc, scene, chan::ModelKind::DeterministicPlusScatter, derive_seed(seed, 300 + k));
      RMat features = chan::build_features(sample, model.feature_scale);
      CMat smat = random_coupling(rng, n, 0.02);
      RVec analytic;
      train::loss_and_grad(model, sample, smat, 1.0, 100.0, analytic);
      // Branch decisions frozen at the base point for the difference quotient.
      RVec psi0 = net::model_forward(model, features);
      CMat c0 = chan::effective_channel(sample.d, sample.g, sample.h, smat, psi0);
      prec::PrecoderPlan plan = prec::plan_precoding(c0, sample.r1, sample.r2, 1.0);
      RVec theta = model.flatten();
      auto fixed_loss = [&](const RVec& th) {
        net::RISnetModel local = model;
        local.unflatten(th);
        RVec psi = net::model_forward(local, features);
        CMat c = chan::effective_channel(sample.d, sample.g, sample.h, smat, psi);
        Tape t;
        return t.scalar(prec::loss_on_tape(t, t.constant(c), plan, 1.0, 100.0));
      };
      const int n_coords = std::min<int>(150, int(theta.size()));
      double floor = 1e-6 * std::max(analytic.cwiseAbs().maxCoeff(), 1e-6);
      double f0 = fixed_loss(theta);
      for (int q = 0; q < n_coords; ++q) {
        int i = rng.uniform_int(0, int(theta.size()) - 1);
        double h = 1e-4 * std::max(1.0, std::abs(theta(i)));
        auto at = [&](double d) {
          RVec tt = theta;
          tt(i) += d;
          return fixed_loss(tt);
        };
        // 5-point stencil: O(h^4) truncation keeps the quotient accurate
        // through the deep composition while h stays large enough to
        // dominate roundoff.
        auto stencil = [&](double hh) {
          return (at(-2 * hh) - 8 * at(-hh) + 8 * at(hh) - at(2 * hh)) / (12 * hh);
        };
        // If quotients at h and h/4 disagree, the stencil straddles an
        // activation kink; shrink until two consecutive scales agree.
        double fd = stencil(h), fd4 = stencil(h / 4);
        for (int r = 0; r < 3 && std::abs(fd - fd4) >
                                     1e-5 * std::max({std::abs(fd), std::abs(fd4), floor});
             ++r) {
          h /= 4;
          fd = fd4;
          fd4 = stencil(h / 4);
        }
        fd = fd4;
        h /= 4;
        // Differences below the roundoff level of the quotient itself
        // (eps * |f| / h) carry no information; common for coordinates
        // feeding inactive units, where the true derivative is zero.
        double noise = 100.0 * std::numeric_limits<double>::epsilon() *
                       std::max(std::abs(f0), 1.0) / h;
        if (std::abs(analytic(i) - fd) <= noise) continue;
        double err = std::abs(analytic(i) - fd) /
                     std::max({std::abs(analytic(i)), std::abs(fd), floor});
        worst = std::max(worst, err);
      }
    }
    out.push_back({variant == net::Variant::FullCsi ? "end_to_end_full_csi"
                                                    : "end_to_end_partial_csi",
                   worst, n_instances});
  }

  return out;
}

}  // namespace rn::num
