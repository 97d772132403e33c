#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <random>
#include <set>

#include "risnoma/channel.hpp"
#include "risnoma/risnet.hpp"

using namespace rn;
using namespace rn::net;

namespace {

RMat random_features(Rng& rng, int rows, int cols) {
  RMat f(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) f(i, j) = rng.uniform(-1.0, 1.0);
  return f;
}

std::string temp_path(const char* stem) {
  return std::string("/tmp/risnoma_test_") + stem + ".bin";
}

}  // namespace

TEST_CASE("full variant layer structure and widths") {
  RISnetModel m = make_model(Variant::FullCsi, 6, 6, 1, 24, 3);
  REQUIRE(m.layers.size() == 4);  // 3 normal + final
  for (int l = 0; l < 3; ++l) {
    CHECK(m.layers[l].kind == Layer::Kind::Normal);
    CHECK(m.layers[l].quads.size() == 1);
  }
  CHECK(m.layers.back().kind == Layer::Kind::Final);
  // First layer consumes the 10-row feature matrix.
  CHECK(m.layers[0].quads[0].wc.cols() == 10);
  CHECK(m.layers[0].quads[0].wc.rows() == 24);
  // Later layers consume the concatenated local+global output (2 * width).
  CHECK(m.layers[1].quads[0].wc.cols() == 48);
  // Final layer maps to a single phase per element.
  CHECK(m.layers.back().quads[0].wc.rows() == 1);
}

TEST_CASE("partial variant layer structure: N N E(3) N N E(1) N F") {
  RISnetModel m = make_model(Variant::PartialCsi, 18, 18, 1, 24, 3);
  REQUIRE(m.layers.size() == 8);
  using K = Layer::Kind;
  const K kinds[8] = {K::Normal, K::Normal, K::Expansion, K::Normal,
                      K::Normal, K::Expansion, K::Normal, K::Final};
  const int strides[8] = {1, 1, 3, 1, 1, 1, 1, 1};
  for (int l = 0; l < 8; ++l) {
    CHECK(m.layers[l].kind == kinds[l]);
    if (m.layers[l].kind == K::Expansion) {
      CHECK(m.layers[l].stride == strides[l]);
      CHECK(m.layers[l].quads.size() == 9);
    } else {
      CHECK(m.layers[l].quads.size() == 1);
    }
  }
}

TEST_CASE("parameter count does not depend on the panel size") {
  int n1 = make_model(Variant::FullCsi, 6, 6, 1, 24, 3).param_count();
  int n2 = make_model(Variant::FullCsi, 36, 36, 1, 24, 3).param_count();
  CHECK(n1 == n2);
  // 10->24 quad: 2*(24*10+24); two 48->24 quads: 2*(24*48+24) each; final 48->1.
  CHECK(n1 == 2 * (24 * 10 + 24) + 2 * 2 * (24 * 48 + 24) + (48 + 1));
  CHECK(n1 == 5281);

  int p1 = make_model(Variant::PartialCsi, 18, 18, 1, 24, 3).param_count();
  int p2 = make_model(Variant::PartialCsi, 36, 36, 1, 24, 3).param_count();
  CHECK(p1 == p2);
}

TEST_CASE("default full model has the reference parameter count") {
  CHECK(make_model(Variant::FullCsi, 36, 36, 1).param_count() == 117121);
}

TEST_CASE("flatten and unflatten round-trip bit-exactly") {
  RISnetModel m = make_model(Variant::PartialCsi, 18, 18, 5, 16, 2);
  RVec theta = m.flatten();
  REQUIRE(theta.size() == m.param_count());
  RISnetModel m2 = make_model(Variant::PartialCsi, 18, 18, 99, 16, 2);
  m2.unflatten(theta);
  RVec theta2 = m2.flatten();
  CHECK(std::memcmp(theta.data(), theta2.data(), sizeof(double) * theta.size()) == 0);
}

TEST_CASE("neighbor map nu on a 36-column panel") {
  // j runs 1..9 over the 3x3 block: dr = ceil(j/3)-2, dc = (j-1)%3 - 1.
  const int H = 36;
  const int n = 5 * H + 10;  // interior element, 1-based
  CHECK(nu_index(n, 5, 1, H) == n);              // center: identity
  CHECK(nu_index(n, 1, 1, H) == n - H - 1);      // up-left
  CHECK(nu_index(n, 9, 1, H) == n + H + 1);      // down-right
  CHECK(nu_index(n, 2, 3, H) == n - 3 * H);      // stride scales the offset
  CHECK(nu_index(n, 6, 3, H) == n + 3);
}

TEST_CASE("expansion id coverage partitions the panel exactly") {
  // 36x36 panel: 16 anchors -> 144 ids -> 1296 ids, no collisions, full cover.
  std::vector<int> ids = chan::anchor_element_ids(36, 36);
  REQUIRE(ids.size() == 16);
  for (int& id : ids) ++id;  // anchor ids are 0-based, the expansion map is 1-based
  std::vector<int> mid = expand_ids(ids, 3, 36, 36);
  REQUIRE(mid.size() == 144);
  std::vector<int> full = expand_ids(mid, 1, 36, 36);
  REQUIRE(full.size() == 1296);
  std::set<int> uniq(full.begin(), full.end());
  CHECK(uniq.size() == 1296);
  CHECK(*uniq.begin() == 1);
  CHECK(*uniq.rbegin() == 1296);
}

TEST_CASE("expansion throws on indices that leave the panel") {
  std::vector<int> edge = {1};  // top-left corner has no up-left neighbor
  CHECK_THROWS_AS(expand_ids(edge, 1, 6, 6), Error);
}

TEST_CASE("forward output has one phase per element, in panel order") {
  RISnetModel m = make_model(Variant::FullCsi, 6, 6, 3, 16, 2);
  Rng rng(21);
  RMat f = random_features(rng, 10, 36);
  RVec psi = model_forward(m, f);
  CHECK(psi.size() == 36);
  CHECK(psi.minCoeff() >= 0.0);  // output rectifier keeps phases non-negative
}

TEST_CASE("full variant is equivariant under element permutations") {
  RISnetModel m = make_model(Variant::FullCsi, 6, 6, 7, 16, 2);
  Rng rng(22);
  RMat f = random_features(rng, 10, 36);
  RVec psi = model_forward(m, f);

  std::vector<int> perm(36);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(123));
  RMat fp(10, 36);
  for (int j = 0; j < 36; ++j) fp.col(j) = f.col(perm[j]);
  RVec psip = model_forward(m, fp);
  for (int j = 0; j < 36; ++j) CHECK(std::abs(psip(j) - psi(perm[j])) <= 1e-12);
}

TEST_CASE("partial variant reads only the anchor columns") {
  RISnetModel m = make_model(Variant::PartialCsi, 18, 18, 9, 16, 2);
  Rng rng(23);
  RMat f = random_features(rng, 10, 18 * 18);
  RVec psi = model_forward(m, f);

  std::vector<int> ids = chan::anchor_element_ids(18, 18);  // 0-based columns
  std::set<int> anchors(ids.begin(), ids.end());
  RMat f2 = f;
  for (int j = 0; j < f2.cols(); ++j)
    if (!anchors.count(j)) f2.col(j) *= -3.7;  // scramble non-anchor columns
  RVec psi2 = model_forward(m, f2);
  CHECK((psi - psi2).norm() == 0.0);
}

TEST_CASE("tape forward matches the plain forward") {
  for (Variant v : {Variant::FullCsi, Variant::PartialCsi}) {
    int rows = v == Variant::FullCsi ? 6 : 9;
    RISnetModel m = make_model(v, rows, rows, 11, 16, 2);
    Rng rng(24);
    RMat f = random_features(rng, 10, rows * rows);
    RVec plain = model_forward(m, f);
    num::Tape t;
    std::vector<num::Var> params;
    num::Var psi = model_forward_on_tape(t, m, f, params);
    RMat taped = t.rval(psi);
    CHECK((plain - taped.col(0)).norm() == 0.0);
    CHECK(!params.empty());
  }
}

TEST_CASE("checkpoint round-trips bit-exactly and preserves metadata") {
  RISnetModel m = make_model(Variant::PartialCsi, 18, 18, 31, 24, 3);
  m.feature_scale = 3.25;
  std::string path = temp_path("ckpt");
  save_checkpoint(m, path);
  RISnetModel r = load_checkpoint(path);
  CHECK(r.variant == m.variant);
  CHECK(r.ris_rows == 18);
  CHECK(r.ris_cols == 18);
  CHECK(r.feature_scale == 3.25);
  RVec a = m.flatten(), b = r.flatten();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  std::remove(path.c_str());
}

TEST_CASE("initialization: bounded weights, seeded reproducibly") {
  RISnetModel a = make_model(Variant::FullCsi, 6, 6, 77, 16, 2);
  RISnetModel b = make_model(Variant::FullCsi, 6, 6, 77, 16, 2);
  RISnetModel c = make_model(Variant::FullCsi, 6, 6, 78, 16, 2);
  RVec ta = a.flatten(), tb = b.flatten(), tc = c.flatten();
  CHECK(std::memcmp(ta.data(), tb.data(), sizeof(double) * ta.size()) == 0);
  CHECK((ta - tc).norm() > 0.0);
  const auto& q = a.layers[0].quads[0];
  double bound = std::sqrt(6.0 / (q.wc.cols() + q.wc.rows()));
  CHECK(q.wc.cwiseAbs().maxCoeff() <= bound);
  CHECK(q.wa.cwiseAbs().maxCoeff() <= bound);
  CHECK((q.ba.array() == 0.01).all());
}
