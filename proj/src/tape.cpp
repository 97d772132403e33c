#include "risnoma/tape.hpp"

#include <Eigen/LU>

namespace rn::num {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

Tape& tp(Var a) { return *a.tape; }

void check_same(Var a, Var b, const char* op) {
  require(a.tape == b.tape, std::string(op) + ": operands on different tapes");
}

void check_shape_r(Tape& t, Var a, Var b, const char* op) {
  require(t.rval(a).rows() == t.rval(b).rows() && t.rval(a).cols() == t.rval(b).cols(),
          std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::constant(const RMat& v) {
  nodes_.push_back(Node{true, v, {}, {}, {}, false, nullptr, nullptr});
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::constant(const CMat& v) {
  nodes_.push_back(Node{false, {}, v, {}, {}, false, nullptr, nullptr});
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::input(const RMat& v) {
  Var out = constant(v);
  input_ids_.push_back(out.id);
  return out;
}

const RMat& Tape::rval(Var v) const {
  const Node& n = node(v.id);
  require(n.is_real, "expected real value");
  return n.rv;
}

const CMat& Tape::cval(Var v) const {
  const Node& n = node(v.id);
  require(!n.is_real, "expected complex value");
  return n.cv;
}

double Tape::scalar(Var v) const {
  const RMat& m = rval(v);
  require(m.rows() == 1 && m.cols() == 1, "expected 1x1 scalar");
  return m(0, 0);
}

Var Tape::push_real(RMat v, std::function<void(Tape&)> bw, std::shared_ptr<void> aux) {
  if (!v.allFinite()) throw Error("tape op produced a non-finite real value");
  nodes_.push_back(Node{true, std::move(v), {}, {}, {}, false, std::move(bw), std::move(aux)});
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::push_complex(CMat v, std::function<void(Tape&)> bw, std::shared_ptr<void> aux) {
  if (!v.allFinite()) throw Error("tape op produced a non-finite complex value");
  nodes_.push_back(Node{false, {}, std::move(v), {}, {}, false, std::move(bw), std::move(aux)});
  return Var{this, int(nodes_.size()) - 1};
}

void Tape::accum_r(int id, const RMat& g) {
  Node& n = nodes_[size_t(id)];
  if (!n.has_grad) {
    n.has_grad = true;
    n.rg = RMat::Zero(n.rv.rows(), n.rv.cols());
  }
  n.rg += g;
}

void Tape::accum_c(int id, const CMat& g) {
  Node& n = nodes_[size_t(id)];
  if (!n.has_grad) {
    n.has_grad = true;
    if (n.is_real)
      n.rg = RMat::Zero(n.rv.rows(), n.rv.cols());
    else
      n.cg = CMat::Zero(n.cv.rows(), n.cv.cols());
  }
  if (n.is_real)
    n.rg += g.real();
  else
    n.cg += g;
}

void Tape::run_backward(Var output) {
  require(output.tape == this, "output belongs to a different tape");
  const Node& out = node(output.id);
  require(out.is_real && out.rv.rows() == 1 && out.rv.cols() == 1,
          "backward requires a real 1x1 output");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.rg.resize(0, 0);
    n.cg.resize(0, 0);
  }
  accum_r(output.id, RMat::Ones(1, 1));
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[size_t(id)];
    if (n.has_grad && n.backward) n.backward(*this);
  }
}

const RMat& Tape::grad(Var input) const {
  const Node& n = node(input.id);
  require(n.is_real, "gradients are exposed for real inputs");
  if (!n.has_grad) {
    // unreachable from the output: zero gradient
    Node& m = const_cast<Node&>(n);
    m.rg = RMat::Zero(n.rv.rows(), n.rv.cols());
    m.has_grad = true;
  }
  return n.rg;
}

// ---- primitives ----------------------------------------------------------

Var add(Var a, Var b) {
  check_same(a, b, "add");
  Tape& t = tp(a);
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  if (t.is_real(a) && t.is_real(b)) {
    check_shape_r(t, a, b, "add");
    return t.push_real(t.rval(a) + t.rval(b), [self, ia, ib](Tape& t) {
      const RMat& g = t.node(self).rg;
      t.accum_r(ia, g);
      t.accum_r(ib, g);
    });
  }
  require(!t.is_real(a) && !t.is_real(b), "add: mixed real/complex operands");
  require(t.cval(a).rows() == t.cval(b).rows() && t.cval(a).cols() == t.cval(b).cols(),
          "add: shape mismatch");
  return t.push_complex(t.cval(a) + t.cval(b), [self, ia, ib](Tape& t) {
    const CMat& g = t.node(self).cg;
    t.accum_c(ia, g);
    t.accum_c(ib, g);
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  Tape& t = tp(a);
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  if (t.is_real(a) && t.is_real(b)) {
    check_shape_r(t, a, b, "sub");
    return t.push_real(t.rval(a) - t.rval(b), [self, ia, ib](Tape& t) {
      const RMat& g = t.node(self).rg;
      t.accum_r(ia, g);
      t.accum_r(ib, RMat(-g));
    });
  }
  require(!t.is_real(a) && !t.is_real(b), "sub: mixed real/complex operands");
  return t.push_complex(t.cval(a) - t.cval(b), [self, ia, ib](Tape& t) {
    const CMat& g = t.node(self).cg;
    t.accum_c(ia, g);
    t.accum_c(ib, CMat(-g));
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  Tape& t = tp(a);
  require(t.is_real(a) && t.is_real(b), "mul: real operands expected");
  check_shape_r(t, a, b, "mul");
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).cwiseProduct(t.rval(b)), [self, ia, ib](Tape& t) {
    const RMat& g = t.node(self).rg;
    t.accum_r(ia, g.cwiseProduct(t.node(ib).rv));
    t.accum_r(ib, g.cwiseProduct(t.node(ia).rv));
  });
}

Var scale(Var a, double k) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  if (t.is_real(a)) {
    return t.push_real(k * t.rval(a), [self, ia, k](Tape& t) {
      t.accum_r(ia, RMat(k * t.node(self).rg));
    });
  }
  return t.push_complex(k * t.cval(a), [self, ia, k](Tape& t) {
    t.accum_c(ia, CMat(k * t.node(self).cg));
  });
}

Var add_const(Var a, double k) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(RMat(t.rval(a).array() + k), [self, ia](Tape& t) {
    t.accum_r(ia, t.node(self).rg);
  });
}

Var matmul(Var a, Var b) {
  check_same(a, b, "matmul");
  Tape& t = tp(a);
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  if (t.is_real(a) && t.is_real(b)) {
    require(t.rval(a).cols() == t.rval(b).rows(), "matmul: inner dimension mismatch");
    return t.push_real(t.rval(a) * t.rval(b), [self, ia, ib](Tape& t) {
      const RMat& g = t.node(self).rg;
      t.accum_r(ia, RMat(g * t.node(ib).rv.transpose()));
      t.accum_r(ib, RMat(t.node(ia).rv.transpose() * g));
    });
  }
  require(!t.is_real(a) && !t.is_real(b), "matmul: mixed real/complex operands");
  require(t.cval(a).cols() == t.cval(b).rows(), "matmul: inner dimension mismatch");
  return t.push_complex(t.cval(a) * t.cval(b), [self, ia, ib](Tape& t) {
    const CMat& g = t.node(self).cg;
    t.accum_c(ia, CMat(g * t.node(ib).cv.adjoint()));
    t.accum_c(ib, CMat(t.node(ia).cv.adjoint() * g));
  });
}

Var conj_transpose(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_complex(t.cval(a).adjoint(), [self, ia](Tape& t) {
    t.accum_c(ia, CMat(t.node(self).cg.adjoint()));
  });
}

Var transpose_r(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).transpose(), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(t.node(self).rg.transpose()));
  });
}

Var to_complex(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_complex(t.rval(a).cast<cd>(), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(t.node(self).cg.real()));
  });
}

namespace {
struct LuAux {
  Eigen::PartialPivLU<CMat> lu;
};
}  // namespace

Var solve(Var a, Var b) {
  check_same(a, b, "solve");
  Tape& t = tp(a);
  require(!t.is_real(a) && !t.is_real(b), "solve: complex operands expected");
  const CMat& av = t.cval(a);
  const CMat& bv = t.cval(b);
  require(av.rows() == av.cols(), "solve: A must be square");
  require(bv.rows() == av.rows(), "solve: B row count must match A");
  auto aux = std::make_shared<LuAux>();
  aux->lu.compute(av);
  double rcond = aux->lu.rcond();
  if (!(rcond > 1e-12)) {
    throw Error("solve: matrix is singular or ill-conditioned (condition estimate " +
                std::to_string(rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) +
                ")");
  }
  CMat x = aux->lu.solve(bv);
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  return t.push_complex(std::move(x), [self, ia, ib, aux](Tape& t) {
    // gB = A^{-H} gX; gA = -gB X^H  (from d(A^{-1}) = -A^{-1} dA A^{-1})
    const CMat& gx = t.node(self).cg;
    CMat gb = aux->lu.adjoint().solve(gx);
    t.accum_c(ia, CMat(-gb * t.node(self).cv.adjoint()));
    t.accum_c(ib, gb);
  }, aux);
}

Var rowscale(Var s, Var a) {
  check_same(s, a, "rowscale");
  Tape& t = tp(s);
  require(!t.is_real(s) && !t.is_real(a), "rowscale: complex operands expected");
  const CMat& sv = t.cval(s);
  const CMat& av = t.cval(a);
  require(sv.cols() == 1 && sv.rows() == av.rows(), "rowscale: s must be N x 1 with N = A rows");
  CMat out = sv.col(0).asDiagonal() * av;
  int is = s.id, ia = a.id;
  int self = int(t.size());
  return t.push_complex(std::move(out), [self, is, ia](Tape& t) {
    const CMat& g = t.node(self).cg;
    const CMat& sv = t.node(is).cv;
    const CMat& av = t.node(ia).cv;
    CMat gs = (g.cwiseProduct(av.conjugate())).rowwise().sum();
    t.accum_c(is, gs);
    t.accum_c(ia, CMat(sv.col(0).conjugate().asDiagonal() * g));
  });
}

Var cis(Var psi) {
  Tape& t = tp(psi);
  require(t.is_real(psi), "cis: real argument expected");
  const RMat& p = t.rval(psi);
  CMat out(p.rows(), p.cols());
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      out(i, j) = cd(std::cos(p(i, j)), std::sin(p(i, j)));
  int ip = psi.id;
  int self = int(t.size());
  return t.push_complex(std::move(out), [self, ip](Tape& t) {
    const CMat& g = t.node(self).cg;
    const CMat& y = t.node(self).cv;
    // dL/dpsi = Im(conj(y) .* g)
    t.accum_r(ip, RMat((y.conjugate().cwiseProduct(g)).imag()));
  });
}

Var cabs(Var z) {
  Tape& t = tp(z);
  const CMat& v = t.cval(z);
  RMat out = v.cwiseAbs();
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (out(i, j) == 0.0) ++t.kink_events;
  int iz = z.id;
  int self = int(t.size());
  return t.push_real(std::move(out), [self, iz](Tape& t) {
    const RMat& g = t.node(self).rg;
    const CMat& v = t.node(iz).cv;
    const RMat& r = t.node(self).rv;
    CMat gz(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      for (Eigen::Index i = 0; i < v.rows(); ++i)
        gz(i, j) = r(i, j) > 0.0 ? cd(g(i, j) / r(i, j)) * v(i, j) : cd(0.0);
    t.accum_c(iz, gz);
  });
}

Var carg(Var z) {
  Tape& t = tp(z);
  const CMat& v = t.cval(z);
  RMat out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      cd w = v(i, j);
      if (w == cd(0.0)) {
        out(i, j) = 0.0;  // arg(0) := 0
        ++t.kink_events;
      } else {
        out(i, j) = std::arg(w);
      }
    }
  int iz = z.id;
  int self = int(t.size());
  return t.push_real(std::move(out), [self, iz](Tape& t) {
    const RMat& g = t.node(self).rg;
    const CMat& v = t.node(iz).cv;
    CMat gz(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        double r2 = std::norm(v(i, j));
        gz(i, j) = r2 > 0.0 ? cd(0.0, g(i, j) / r2) * v(i, j) : cd(0.0);
      }
    t.accum_c(iz, gz);
  });
}

Var relu(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).cwiseMax(0.0), [self, ia](Tape& t) {
    const RMat& g = t.node(self).rg;
    const RMat& x = t.node(ia).rv;
    t.accum_r(ia, RMat(((x.array() > 0.0).cast<double>() * g.array()).matrix()));
  });
}

Var hinge(Var a) { return relu(a); }  // same value and subgradient convention

Var square(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).cwiseProduct(t.rval(a)), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(2.0 * t.node(ia).rv.cwiseProduct(t.node(self).rg)));
  });
}

Var sqrt_v(Var a) {
  Tape& t = tp(a);
  require((t.rval(a).array() > 0.0).all(), "sqrt: argument must be positive");
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).cwiseSqrt(), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(t.node(self).rg.cwiseQuotient(2.0 * t.node(self).rv)));
  });
}

Var inv(Var a) {
  Tape& t = tp(a);
  require((t.rval(a).array() != 0.0).all(), "inv: division by zero");
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).cwiseInverse(), [self, ia](Tape& t) {
    const RMat& y = t.node(self).rv;
    t.accum_r(ia, RMat(-t.node(self).rg.cwiseProduct(y).cwiseProduct(y)));
  });
}

Var sum_all(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  RMat s(1, 1);
  s(0, 0) = t.rval(a).sum();
  return t.push_real(std::move(s), [self, ia](Tape& t) {
    const Tape::Node& n = t.node(ia);
    t.accum_r(ia, RMat::Constant(n.rv.rows(), n.rv.cols(), t.node(self).rg(0, 0)));
  });
}

Var mean_cols(Var a) {
  Tape& t = tp(a);
  int ia = a.id;
  int self = int(t.size());
  const RMat& v = t.rval(a);
  double k = double(v.cols());
  return t.push_real(v.rowwise().sum() / k, [self, ia, k](Tape& t) {
    const RMat& g = t.node(self).rg;
    const Tape::Node& n = t.node(ia);
    t.accum_r(ia, RMat(g.replicate(1, n.rv.cols()) / k));
  });
}

Var broadcast_cols(Var a, int k) {
  Tape& t = tp(a);
  require(t.rval(a).cols() == 1, "broadcast_cols: column vector expected");
  int ia = a.id;
  int self = int(t.size());
  return t.push_real(t.rval(a).replicate(1, k), [self, ia](Tape& t) {
    t.accum_r(ia, RMat(t.node(self).rg.rowwise().sum()));
  });
}

Var vcat(Var a, Var b) {
  check_same(a, b, "vcat");
  Tape& t = tp(a);
  const RMat& av = t.rval(a);
  const RMat& bv = t.rval(b);
  require(av.cols() == bv.cols(), "vcat: column count mismatch");
  RMat out(av.rows() + bv.rows(), av.cols());
  out << av, bv;
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  long ra = av.rows(), rb = bv.rows();
  return t.push_real(std::move(out), [self, ia, ib, ra, rb](Tape& t) {
    const RMat& g = t.node(self).rg;
    t.accum_r(ia, RMat(g.topRows(ra)));
    t.accum_r(ib, RMat(g.bottomRows(rb)));
  });
}

Var hcat(Var a, Var b) {
  check_same(a, b, "hcat");
  Tape& t = tp(a);
  const RMat& av = t.rval(a);
  const RMat& bv = t.rval(b);
  require(av.rows() == bv.rows(), "hcat: row count mismatch");
  RMat out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  int ia = a.id, ib = b.id;
  int self = int(t.size());
  long ca = av.cols(), cb = bv.cols();
  return t.push_real(std::move(out), [self, ia, ib, ca, cb](Tape& t) {
    const RMat& g = t.node(self).rg;
    t.accum_r(ia, RMat(g.leftCols(ca)));
    t.accum_r(ib, RMat(g.rightCols(cb)));
  });
}

Var row(Var a, int i) {
  Tape& t = tp(a);
  const CMat& v = t.cval(a);
  require(i >= 0 && i < v.rows(), "row: index out of range");
  int ia = a.id;
  int self = int(t.size());
  return t.push_complex(v.row(i), [self, ia, i](Tape& t) {
    const Tape::Node& n = t.node(ia);
    CMat g = CMat::Zero(n.cv.rows(), n.cv.cols());
    g.row(i) = t.node(self).cg;
    t.accum_c(ia, g);
  });
}

Var permute_cols(Var a, std::vector<int> dst) {
  Tape& t = tp(a);
  const RMat& v = t.rval(a);
  require(int(dst.size()) == v.cols(), "permute_cols: index count mismatch");
  RMat out(v.rows(), v.cols());
  std::vector<char> seen(dst.size(), 0);
  for (size_t j = 0; j < dst.size(); ++j) {
    require(dst[j] >= 0 && dst[j] < int(dst.size()) && !seen[size_t(dst[j])],
            "permute_cols: not a permutation");
    seen[size_t(dst[j])] = 1;
    out.col(dst[j]) = v.col(Eigen::Index(j));
  }
  int ia = a.id;
  int self = int(t.size());
  auto idx = std::make_shared<std::vector<int>>(std::move(dst));
  return t.push_real(std::move(out), [self, ia, idx](Tape& t) {
    const RMat& g = t.node(self).rg;
    RMat ga(g.rows(), g.cols());
    for (size_t j = 0; j < idx->size(); ++j) ga.col(Eigen::Index(j)) = g.col((*idx)[j]);
    t.accum_r(ia, ga);
  });
}

namespace {
struct CascadeAux {
  std::shared_ptr<const CMat> h;
  std::shared_ptr<const CMat> s;
  CVec phi;
  std::unique_ptr<Eigen::PartialPivLU<CMat>> lu;  // null when s is empty
};
}  // namespace

Var ris_cascade(Var psi, std::shared_ptr<const CMat> h, std::shared_ptr<const CMat> s) {
  Tape& t = tp(psi);
  const RMat& p = t.rval(psi);
  require(p.cols() == 1, "ris_cascade: psi must be N x 1");
  const long n = p.rows();
  require(h && h->rows() == n, "ris_cascade: H row count must equal N");
  bool coupled = s && s->size() > 0;
  if (coupled) require(s->rows() == n && s->cols() == n, "ris_cascade: S must be N x N");

  auto aux = std::make_shared<CascadeAux>();
  aux->h = h;
  aux->s = s;
  aux->phi.resize(n);
  for (long i = 0; i < n; ++i) aux->phi(i) = cd(std::cos(p(i, 0)), std::sin(p(i, 0)));

  CMat b = aux->phi.asDiagonal() * (*h);
  CMat x;
  if (coupled) {
    CMat a = CMat::Identity(n, n) - CMat(aux->phi.asDiagonal() * (*s));
    aux->lu = std::make_unique<Eigen::PartialPivLU<CMat>>(a);
    x = aux->lu->solve(b);
  } else {
    x = b;
  }
  int ip = psi.id;
  int self = int(t.size());
  return t.push_complex(std::move(x), [self, ip, aux, coupled](Tape& t) {
    // With A = I - diag(phi) S and B = diag(phi) H:
    //   dX = A^{-1} diag(dphi) (H + S X), and S X = conj(phi) .* (X - B) row-wise,
    // so with W = A^{-H} gX the psi-gradient is -Im(phi_n * z_n) with
    //   z_n = sum_k conj(W(n,k)) (H + S X)(n,k).
    const CMat& gx = t.node(self).cg;
    const CMat& x = t.node(self).cv;
    const CMat& h = *aux->h;
    CMat w = coupled ? CMat(aux->lu->adjoint().solve(gx)) : gx;
    CMat m = h;  // H + S X
    if (coupled) {
      CMat b = aux->phi.asDiagonal() * h;
      m += CMat(aux->phi.conjugate().asDiagonal() * (x - b));
    }
    RMat gpsi(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      cd z = (w.row(i).conjugate().cwiseProduct(m.row(i))).sum();
      gpsi(i, 0) = -(aux->phi(i) * z).imag();
    }
    t.accum_r(ip, gpsi);
  }, aux);
}

// ---- program wrapper ------------------------------------------------------

Var Program::run(Tape& t, const std::vector<RMat>& inputs) const {
  require(inputs.size() == shapes_.size(), "program: wrong number of inputs");
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    require(inputs[i].rows() == shapes_[i].first && inputs[i].cols() == shapes_[i].second,
            "program: input " + std::to_string(i) + " has wrong shape");
    vars.push_back(t.input(inputs[i]));
  }
  return builder_(t, vars);
}

double Program::value(const std::vector<RMat>& inputs) const {
  Tape t;
  Var out = run(t, inputs);
  return t.scalar(out);
}

Program::Result Program::evaluate_with_gradient(const std::vector<RMat>& inputs) const {
  Tape t;
  Var out = run(t, inputs);
  Result r;
  r.value = t.scalar(out);
  t.run_backward(out);
  for (int id : t.input_ids()) r.grads.push_back(t.grad(Var{&t, id}));
  r.kink_events = t.kink_events;
  return r;
}

double grad_check(const Program& p, const std::vector<RMat>& point, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw Error("grad_check: step must be in [1e-7, 1e-3]");
  Program::Result res = p.evaluate_with_gradient(point);
  double worst = 0.0;
  std::vector<RMat> probe = point;
  for (size_t s = 0; s < point.size(); ++s) {
    for (Eigen::Index j = 0; j < point[s].cols(); ++j) {
      for (Eigen::Index i = 0; i < point[s].rows(); ++i) {
        double x0 = point[s](i, j);
        double h = step * std::max(1.0, std::abs(x0));
        probe[s](i, j) = x0 + h;
        double fp = p.value(probe);
        probe[s](i, j) = x0 - h;
        double fm = p.value(probe);
        probe[s](i, j) = x0;
        double fd = (fp - fm) / (2.0 * h);
        double an = res.grads[s](i, j);
        double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12});
        worst = std::max(worst, err);
      }
    }
  }
  return worst;
}

}  // namespace rn::num
