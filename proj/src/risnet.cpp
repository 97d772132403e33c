#include "risnoma/risnet.hpp"

#include <cstring>
#include <fstream>

#include "risnoma/channel.hpp"

namespace rn::net {

namespace {

void init_matrix(RMat& m, int rows, int cols, double lim, Rng& rng) {
  m.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-lim, lim);
}

LayerQuad make_quad(int p, int q, Rng& rng, bool with_global) {
  LayerQuad quad;
  double lim = std::sqrt(6.0 / double(p + q));
  init_matrix(quad.wc, q, p, lim, rng);
  quad.bc = RMat::Constant(q, 1, 0.01);
  if (with_global) {
    init_matrix(quad.wa, q, p, lim, rng);
    quad.ba = RMat::Constant(q, 1, 0.01);
  }
  return quad;
}

template <typename Fn>
void for_each_param(RISnetModel& m, Fn fn) {
  for (auto& layer : m.layers)
    for (auto& q : layer.quads) {
      fn(q.wc);
      fn(q.bc);
      if (q.wa.size()) {
        fn(q.wa);
        fn(q.ba);
      }
    }
}

template <typename Fn>
void for_each_param(const RISnetModel& m, Fn fn) {
  for_each_param(const_cast<RISnetModel&>(m), [&](RMat& p) { fn(const_cast<const RMat&>(p)); });
}

std::vector<int> start_ids(const RISnetModel& m) {
  const int n = m.ris_rows * m.ris_cols;
  std::vector<int> ids;
  if (m.variant == Variant::FullCsi) {
    ids.resize(size_t(n));
    for (int i = 0; i < n; ++i) ids[size_t(i)] = i + 1;
  } else {
    for (int id0 : chan::anchor_element_ids(m.ris_rows, m.ris_cols)) ids.push_back(id0 + 1);
  }
  return ids;
}

}  // namespace

int RISnetModel::param_count() const {
  int n = 0;
  for_each_param(*this, [&](const RMat& p) { n += int(p.size()); });
  return n;
}

RVec RISnetModel::flatten() const {
  RVec out(param_count());
  Eigen::Index at = 0;
  for_each_param(*this, [&](const RMat& p) {
    out.segment(at, p.size()) = Eigen::Map<const RVec>(p.data(), p.size());
    at += p.size();
  });
  return out;
}

void RISnetModel::unflatten(const RVec& theta) {
  if (theta.size() != param_count()) throw Error("unflatten: parameter size mismatch");
  Eigen::Index at = 0;
  for_each_param(*this, [&](RMat& p) {
    Eigen::Map<RVec>(p.data(), p.size()) = theta.segment(at, p.size());
    at += p.size();
  });
}

RISnetModel make_model(Variant variant, int ris_rows, int ris_cols, std::uint64_t seed,
                       int hidden_width, int full_depth) {
  if (hidden_width < 1) throw ConfigError("hidden_width: must be >= 1");
  if (full_depth < 1) throw ConfigError("full_depth: must be >= 1");
  RISnetModel m;
  m.variant = variant;
  m.ris_rows = ris_rows;
  m.ris_cols = ris_cols;
  Rng rng(derive_seed(seed, 0x9137));
  const int q = hidden_width;
  auto normal = [&](int p) {
    Layer l;
    l.kind = Layer::Kind::Normal;
    l.quads.push_back(make_quad(p, q, rng, true));
    m.layers.push_back(std::move(l));
  };
  auto expansion = [&](int p, int stride) {
    Layer l;
    l.kind = Layer::Kind::Expansion;
    l.stride = stride;
    for (int j = 0; j < 9; ++j) l.quads.push_back(make_quad(p, q, rng, true));
    m.layers.push_back(std::move(l));
  };
  auto final_layer = [&](int p) {
    Layer l;
    l.kind = Layer::Kind::Final;
    l.quads.push_back(make_quad(p, 1, rng, false));
    // Start the phases mid-range: a near-zero bias would put most outputs in
    // the flat region of the output rectifier at initialization.
    l.quads.back().bc.setConstant(M_PI);
    m.layers.push_back(std::move(l));
  };
  if (variant == Variant::FullCsi) {
    normal(10);
    for (int i = 1; i < full_depth; ++i) normal(2 * q);
    final_layer(2 * q);
  } else {
    chan::anchor_element_ids(ris_rows, ris_cols);  // validates divisibility by 9
    normal(10);
    normal(2 * q);
    expansion(2 * q, 3);
    normal(2 * q);
    normal(2 * q);
    expansion(2 * q, 1);
    normal(2 * q);
    final_layer(2 * q);
  }
  return m;
}

int nu_index(int n, int j, int stride, int h_cols) {
  if (j < 1 || j > 9) throw Error("nu_index: j must be in 1..9");
  int dr = (j + 2) / 3 - 2;  // ceil(j/3) - 2
  int dc = (j - 1) % 3 - 1;
  return n + stride * (dr * h_cols + dc);
}

std::vector<int> expand_ids(const std::vector<int>& ids_1based, int stride, int ris_rows,
                            int ris_cols) {
  const int n_total = ris_rows * ris_cols;
  std::vector<int> out;
  out.reserve(ids_1based.size() * 9);
  std::vector<char> seen(size_t(n_total) + 1, 0);
  for (int j = 1; j <= 9; ++j)
    for (int n : ids_1based) {
      int v = nu_index(n, j, stride, ris_cols);
      // The stride move must stay on the panel without wrapping rows.
      int r0 = (n - 1) / ris_cols, c0 = (n - 1) % ris_cols;
      int dr = (j + 2) / 3 - 2, dc = (j - 1) % 3 - 1;
      int r = r0 + stride * dr, c = c0 + stride * dc;
      if (r < 0 || r >= ris_rows || c < 0 || c >= ris_cols || v != r * ris_cols + c + 1)
        throw Error("expansion: index " + std::to_string(v) + " leaves the panel");
      if (seen[size_t(v)]) throw Error("expansion: coverage collision at element " +
                                       std::to_string(v));
      seen[size_t(v)] = 1;
      out.push_back(v);
    }
  return out;
}

RMat normal_layer_forward(const LayerQuad& q, const RMat& f) {
  if (q.wc.cols() != f.rows()) throw Error("normal layer: feature width mismatch");
  const Eigen::Index k = f.cols();
  RMat local = ((q.wc * f).colwise() + q.bc.col(0)).cwiseMax(0.0);
  RMat g = ((q.wa * f).colwise() + q.ba.col(0)).cwiseMax(0.0);
  RVec global = g.rowwise().sum() / double(k);
  RMat out(2 * local.rows(), k);
  out.topRows(local.rows()) = local;
  out.bottomRows(local.rows()) = global.replicate(1, k);
  return out;
}

RMat expansion_layer_forward(const Layer& layer, const RMat& f) {
  if (layer.quads.size() != 9) throw Error("expansion layer: expected nine units");
  const Eigen::Index k = f.cols();
  const Eigen::Index q2 = 2 * layer.quads[0].wc.rows();
  RMat out(q2, 9 * k);
  for (int j = 0; j < 9; ++j)
    out.middleCols(Eigen::Index(j) * k, k) = normal_layer_forward(layer.quads[size_t(j)], f);
  return out;
}

RVec model_forward(const RISnetModel& m, const RMat& features) {
  const int n = m.ris_rows * m.ris_cols;
  if (features.rows() != 10 || features.cols() != n)
    throw Error("model_forward: expected a 10 x N feature matrix");
  std::vector<int> ids = start_ids(m);
  RMat f;
  if (m.variant == Variant::PartialCsi) {
    f.resize(10, Eigen::Index(ids.size()));
    for (size_t i = 0; i < ids.size(); ++i) f.col(Eigen::Index(i)) = features.col(ids[i] - 1);
  } else {
    f = features;
  }
  for (const auto& layer : m.layers) {
    switch (layer.kind) {
      case Layer::Kind::Normal:
        f = normal_layer_forward(layer.quads[0], f);
        break;
      case Layer::Kind::Expansion:
        f = expansion_layer_forward(layer, f);
        ids = expand_ids(ids, layer.stride, m.ris_rows, m.ris_cols);
        break;
      case Layer::Kind::Final: {
        const auto& q = layer.quads[0];
        f = ((q.wc * f).colwise() + q.bc.col(0)).cwiseMax(0.0);
        break;
      }
    }
  }
  if (int(ids.size()) != n || f.rows() != 1)
    throw Error("model_forward: layer stack does not produce one phase per element");
  RVec psi(n);
  for (size_t i = 0; i < ids.size(); ++i) psi(ids[i] - 1) = f(0, Eigen::Index(i));
  return psi;
}

namespace {

num::Var normal_on_tape(num::Tape& t, const LayerQuad& q, num::Var f, int k,
                        std::vector<num::Var>& params) {
  using namespace num;
  Var wc = t.input(q.wc), bc = t.input(q.bc), wa = t.input(q.wa), ba = t.input(q.ba);
  params.insert(params.end(), {wc, bc, wa, ba});
  Var local = relu(add(matmul(wc, f), broadcast_cols(bc, k)));
  Var global = mean_cols(relu(add(matmul(wa, f), broadcast_cols(ba, k))));
  return vcat(local, broadcast_cols(global, k));
}

}  // namespace

num::Var model_forward_on_tape(num::Tape& t, const RISnetModel& m, const RMat& features,
                               std::vector<num::Var>& params) {
  using namespace num;
  const int n = m.ris_rows * m.ris_cols;
  if (features.rows() != 10 || features.cols() != n)
    throw Error("model_forward_on_tape: expected a 10 x N feature matrix");
  std::vector<int> ids = start_ids(m);
  RMat f0;
  if (m.variant == Variant::PartialCsi) {
    f0.resize(10, Eigen::Index(ids.size()));
    for (size_t i = 0; i < ids.size(); ++i) f0.col(Eigen::Index(i)) = features.col(ids[i] - 1);
  } else {
    f0 = features;
  }
  Var f = t.constant(f0);
  int k = int(ids.size());
  for (const auto& layer : m.layers) {
    switch (layer.kind) {
      case Layer::Kind::Normal:
        f = normal_on_tape(t, layer.quads[0], f, k, params);
        break;
      case Layer::Kind::Expansion: {
        Var out = normal_on_tape(t, layer.quads[0], f, k, params);
        for (int j = 1; j < 9; ++j)
          out = hcat(out, normal_on_tape(t, layer.quads[size_t(j)], f, k, params));
        f = out;
        ids = expand_ids(ids, layer.stride, m.ris_rows, m.ris_cols);
        k = int(ids.size());
        break;
      }
      case Layer::Kind::Final: {
        const auto& q = layer.quads[0];
        Var wc = t.input(q.wc), bc = t.input(q.bc);
        params.insert(params.end(), {wc, bc});
        f = relu(add(matmul(wc, f), broadcast_cols(bc, k)));
        break;
      }
    }
  }
  if (k != n) throw Error("model_forward_on_tape: layer stack does not cover the panel");
  if (m.variant == Variant::PartialCsi) {
    std::vector<int> dst(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) dst[i] = ids[i] - 1;
    f = permute_cols(f, std::move(dst));
  }
  return transpose_r(f);  // N x 1 phase vector
}

// ---- checkpoint io ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'N', 'E', 'T'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("checkpoint file truncated");
  return v;
}

void put_mat(std::ostream& os, const RMat& m) {
  put<std::int32_t>(os, std::int32_t(m.rows()));
  put<std::int32_t>(os, std::int32_t(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), std::streamsize(m.size() * sizeof(double)));
}

RMat get_mat(std::istream& is) {
  auto rows = get<std::int32_t>(is);
  auto cols = get<std::int32_t>(is);
  if (rows < 0 || cols < 0 || rows > 1 << 20 || cols > 1 << 20)
    throw Error("checkpoint file corrupt: absurd matrix size");
  RMat m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()), std::streamsize(m.size() * sizeof(double)));
  if (!is) throw Error("checkpoint file truncated");
  return m;
}

}  // namespace

void save_checkpoint(const RISnetModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  put<std::uint8_t>(os, std::uint8_t(m.variant));
  put<std::int32_t>(os, m.ris_rows);
  put<std::int32_t>(os, m.ris_cols);
  put<double>(os, m.feature_scale);
  put<std::uint32_t>(os, std::uint32_t(m.layers.size()));
  for (const auto& layer : m.layers) {
    put<std::uint8_t>(os, std::uint8_t(layer.kind));
    put<std::int32_t>(os, layer.stride);
    put<std::uint32_t>(os, std::uint32_t(layer.quads.size()));
    for (const auto& q : layer.quads) {
      put_mat(os, q.wc);
      put_mat(os, q.bc);
      put_mat(os, q.wa);
      put_mat(os, q.ba);
    }
  }
  if (!os) throw Error("write error on '" + path + "'");
}

RISnetModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("'" + path + "' is not a model checkpoint (bad magic)");
  auto version = get<std::uint16_t>(is);
  if (version != kVersion)
    throw Error("unsupported checkpoint format version " + std::to_string(version));
  RISnetModel m;
  auto variant = get<std::uint8_t>(is);
  if (variant > 1) throw Error("checkpoint file corrupt: unknown variant");
  m.variant = Variant(variant);
  m.ris_rows = get<std::int32_t>(is);
  m.ris_cols = get<std::int32_t>(is);
  m.feature_scale = get<double>(is);
  auto n_layers = get<std::uint32_t>(is);
  if (n_layers > 1024) throw Error("checkpoint file corrupt: absurd layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    Layer layer;
    auto kind = get<std::uint8_t>(is);
    if (kind > 2) throw Error("checkpoint file corrupt: unknown layer kind");
    layer.kind = Layer::Kind(kind);
    layer.stride = get<std::int32_t>(is);
    auto n_quads = get<std::uint32_t>(is);
    if (n_quads != 1 && n_quads != 9) throw Error("checkpoint file corrupt: quad count");
    for (std::uint32_t j = 0; j < n_quads; ++j) {
      LayerQuad q;
      q.wc = get_mat(is);
      q.bc = get_mat(is);
      q.wa = get_mat(is);
      q.ba = get_mat(is);
      layer.quads.push_back(std::move(q));
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace rn::net
