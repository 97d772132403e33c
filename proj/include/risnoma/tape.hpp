#pragma once

// Reverse-mode differentiation over complex/real matrices.
//
// Values are matrices; real-valued nodes use real storage and arithmetic,
// complex nodes enter through cis() or complex constants. Gradients of a
// complex entry z = x + iy are stored as dL/dx + i*dL/dy (the loss at the
// output is always real). Evaluation is eager: a node's value is computed
// when the op is recorded, so intermediate values can be inspected while
// the program is still being built.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "risnoma/common.hpp"

namespace rn::num {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  struct Node {
    bool is_real = true;
    RMat rv;
    CMat cv;
    RMat rg;
    CMat cg;
    bool has_grad = false;
    std::function<void(Tape&)> backward;  // null for leaves
    std::shared_ptr<void> aux;            // op-specific (e.g. LU factorization)
  };

  Var constant(const RMat& v);
  Var constant(const CMat& v);
  /// Registers `v` as a differentiable input slot.
  Var input(const RMat& v);

  const std::vector<int>& input_ids() const { return input_ids_; }

  Node& node(int id) { return nodes_[size_t(id)]; }
  const Node& node(int id) const { return nodes_[size_t(id)]; }

  const RMat& rval(Var v) const;
  const CMat& cval(Var v) const;
  bool is_real(Var v) const { return node(v.id).is_real; }
  double scalar(Var v) const;

  /// Reverse sweep from a real 1x1 output. Gradients of inputs are then
  /// available through grad().
  void run_backward(Var output);

  const RMat& grad(Var input) const;

  Var push_real(RMat v, std::function<void(Tape&)> bw, std::shared_ptr<void> aux = nullptr);
  Var push_complex(CMat v, std::function<void(Tape&)> bw, std::shared_ptr<void> aux = nullptr);

  void accum_r(int id, const RMat& g);
  void accum_c(int id, const CMat& g);

  /// Number of primitive evaluations that hit a registered
  /// non-differentiable point (|z| or arg at 0); the subgradient
  /// convention (0) was applied there.
  long kink_events = 0;

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::vector<int> input_ids_;
};

// ---- primitives ----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);          // elementwise, real
Var scale(Var a, double k);     // k * a
Var add_const(Var a, double k); // a + k (real)
Var matmul(Var a, Var b);       // real*real or complex*complex
Var conj_transpose(Var a);      // complex
Var transpose_r(Var a);         // real
Var to_complex(Var a);          // real -> complex (zero imaginary part)
Var solve(Var a, Var b);        // X with A X = B, complex square A
Var rowscale(Var s, Var a);     // diag(s) * A, s complex n x 1
Var cis(Var psi);               // e^{i psi}, psi real
Var cabs(Var z);                // |z|, complex -> real
Var carg(Var z);                // arg(z), complex -> real
Var relu(Var a);                // real
Var hinge(Var a);               // max(0, a), real
Var square(Var a);              // real
Var sqrt_v(Var a);              // real, entries must be > 0
Var inv(Var a);                 // 1/a elementwise, real
Var sum_all(Var a);             // real -> 1x1
Var mean_cols(Var a);           // real QxK -> Qx1
Var broadcast_cols(Var a, int k);  // real Qx1 -> QxK
Var vcat(Var a, Var b);         // real, stack rows
Var hcat(Var a, Var b);         // real, stack columns
Var row(Var a, int i);          // complex, extract row i as 1 x cols
Var permute_cols(Var a, std::vector<int> dst);  // real; out col dst[j] = in col j

/// Fused RIS cascade X = (I - diag(e^{i psi}) S)^{-1} diag(e^{i psi}) H,
/// differentiable w.r.t. psi (N x 1 real). S may be empty (no coupling),
/// in which case X = diag(e^{i psi}) H. H and S are per-sample constants.
Var ris_cascade(Var psi, std::shared_ptr<const CMat> h, std::shared_ptr<const CMat> s);

// ---- program wrapper ------------------------------------------------------

/// A differentiable program: a deterministic builder that maps input slots
/// to a real scalar output. Re-running the builder on the same inputs
/// reproduces the forward value bit-identically.
class Program {
 public:
  using Builder = std::function<Var(Tape&, std::span<const Var>)>;

  Program(Builder builder, std::vector<std::pair<int, int>> input_shapes)
      : builder_(std::move(builder)), shapes_(std::move(input_shapes)) {}

  struct Result {
    double value = 0.0;
    std::vector<RMat> grads;
    long kink_events = 0;
  };

  double value(const std::vector<RMat>& inputs) const;
  Result evaluate_with_gradient(const std::vector<RMat>& inputs) const;

  const std::vector<std::pair<int, int>>& input_shapes() const { return shapes_; }

 private:
  Var run(Tape& t, const std::vector<RMat>& inputs) const;
  Builder builder_;
  std::vector<std::pair<int, int>> shapes_;
};

/// Max over all input coordinates of
/// |analytic - central difference| / max(|analytic|, |central|, 1e-12).
double grad_check(const Program& p, const std::vector<RMat>& point, double step);

}  // namespace rn::num
