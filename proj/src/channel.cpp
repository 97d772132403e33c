#include "risnoma/channel.hpp"

#include <Eigen/LU>

#include "risnoma/linalg.hpp"

namespace rn::chan {

namespace {

// Fixed world layout (meters). The BS-user line of sight is treated as
// blocked: the direct channel only carries reflected paths.
const Eigen::Vector3d kBsCenter(0.0, 10.0, 6.0);
const Eigen::Vector3d kRisCenter(30.0, 0.0, 10.0);
constexpr double kUserXMin = 27.0, kUserXMax = 33.0;
constexpr double kUserYMin = 15.0, kUserYMax = 25.0;
constexpr double kUserZ = 1.5;
constexpr double kScatXMin = 10.0, kScatXMax = 35.0;
constexpr double kScatYMin = 5.0, kScatYMax = 25.0;
constexpr double kScatZMin = 0.0, kScatZMax = 15.0;
constexpr double kReflectionLoss = 0.3;

struct AzEl {
  double az, el;
};

// Direction cosines relative to an array whose columns run along world x
// and rows along world z (the BS ULA is the single-row case).
AzEl to_azel(const Eigen::Vector3d& unit_dir) {
  double v = std::clamp(unit_dir.z(), -1.0, 1.0);
  double el = std::asin(v);
  double ce = std::cos(el);
  double u = unit_dir.x();
  double az = ce > 1e-12 ? std::asin(std::clamp(u / ce, -1.0, 1.0)) : 0.0;
  return {az, el};
}

CVec rx_steer(const ArrayGeometry& g, const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  Eigen::Vector3d dir = (to - from).normalized();
  AzEl ae = to_azel(dir);
  return steering_vector(g, ae.az, ae.el);
}

}  // namespace

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Deterministic: return "deterministic";
    case ModelKind::DeterministicPlusScatter: return "deterministic_plus_scatter";
    case ModelKind::Iid: return "iid";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "deterministic") return ModelKind::Deterministic;
  if (s == "deterministic_plus_scatter") return ModelKind::DeterministicPlusScatter;
  if (s == "iid") return ModelKind::Iid;
  throw ConfigError("model_kind: expected deterministic|deterministic_plus_scatter|iid, got '" +
                    s + "'");
}

void ScenarioConfig::validate() const {
  if (bs_antennas < 2) throw ConfigError("bs_antennas: must be >= 2");
  if (ris_rows < 1 || ris_cols < 1 || n_elements() < 9)
    throw ConfigError("ris_rows/ris_cols: panel must have at least 9 elements");
  if (!(carrier_wavelength > 0)) throw ConfigError("carrier_wavelength: must be > 0");
  if (!(bs_spacing > 0)) throw ConfigError("bs_spacing: must be > 0");
  if (!(ris_spacing > 0)) throw ConfigError("ris_spacing: must be > 0");
  if (!(noise_power > 0)) throw ConfigError("noise_power: must be > 0");
  if (!(coupling_strength >= 0)) throw ConfigError("coupling_strength: must be >= 0");
  if (path_count_min < 1 || path_count_max < path_count_min)
    throw ConfigError("path_count_min/path_count_max: need 1 <= min <= max");
  if (!(rate_min > 0) || !(rate_max >= rate_min))
    throw ConfigError("rate_min/rate_max: need 0 < min <= max");
  if (!(scatter_power_ratio >= 0)) throw ConfigError("scatter_power_ratio: must be >= 0");
  if (!(iid_entry_power > 0)) throw ConfigError("iid_entry_power: must be > 0");
}

CVec steering_vector(const ArrayGeometry& g, double azimuth, double elevation) {
  if (!(g.spacing_wl > 0)) throw Error("steering_vector: spacing must be > 0");
  double u = std::sin(azimuth) * std::cos(elevation);
  double v = std::sin(elevation);
  CVec a(g.rows * g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      double phase = 2.0 * M_PI * g.spacing_wl * (c * u + r * v);
      a(r * g.cols + c) = cd(std::cos(phase), std::sin(phase));
    }
  }
  return a;
}

Scene build_scene(const ScenarioConfig& sc, std::uint64_t master_seed) {
  Rng rng(derive_seed(master_seed, 0xa11ce));
  Scene scene;
  scene.bs_center = kBsCenter;
  scene.ris_center = kRisCenter;
  int n_scatter = std::max(0, sc.path_count_max - 1);
  for (int i = 0; i < n_scatter; ++i) {
    scene.scatterers.emplace_back(rng.uniform(kScatXMin, kScatXMax),
                                  rng.uniform(kScatYMin, kScatYMax),
                                  rng.uniform(kScatZMin, kScatZMax));
    scene.scatter_gain.push_back(std::exp(0.3 * rng.normal()));
  }
  scene.paths_h = rng.uniform_int(sc.path_count_min, sc.path_count_max);
  return scene;
}

namespace {

CMat deterministic_h(const ScenarioConfig& sc, const Scene& scene) {
  ArrayGeometry ris{sc.ris_rows, sc.ris_cols, sc.ris_spacing};
  ArrayGeometry bs{1, sc.bs_antennas, sc.bs_spacing};
  const double lambda = sc.carrier_wavelength;
  CMat h = CMat::Zero(sc.n_elements(), sc.bs_antennas);
  auto add_path = [&](const Eigen::Vector3d& via, double gain, double dist) {
    double amp = gain / dist;
    double phase = -2.0 * M_PI * dist / lambda;
    cd coeff = amp * cd(std::cos(phase), std::sin(phase));
    CVec ar = rx_steer(ris, scene.ris_center, via);
    CVec ab = rx_steer(bs, scene.bs_center, via);
    h.noalias() += coeff * ar * ab.adjoint();
  };
  // path 1: line of sight
  add_path(scene.bs_center, 1.0, (scene.bs_center - scene.ris_center).norm());
  for (int p = 0; p + 1 < scene.paths_h && p < int(scene.scatterers.size()); ++p) {
    const auto& s = scene.scatterers[size_t(p)];
    double dist = (s - scene.bs_center).norm() + (s - scene.ris_center).norm();
    add_path(s, kReflectionLoss * scene.scatter_gain[size_t(p)], dist);
  }
  return h;
}

void deterministic_user_rows(const ScenarioConfig& sc, const Scene& scene,
                             const Eigen::Vector3d& user, int paths_g, int paths_d,
                             Eigen::RowVectorXcd& g_row, Eigen::RowVectorXcd& d_row) {
  ArrayGeometry ris{sc.ris_rows, sc.ris_cols, sc.ris_spacing};
  ArrayGeometry bs{1, sc.bs_antennas, sc.bs_spacing};
  const double lambda = sc.carrier_wavelength;
  auto coeff_for = [&](double gain, double dist) {
    double phase = -2.0 * M_PI * dist / lambda;
    return (gain / dist) * cd(std::cos(phase), std::sin(phase));
  };
  g_row.setZero(sc.n_elements());
  d_row.setZero(sc.bs_antennas);
  // RIS -> user: line of sight plus scatterer bounces (fixed RIS-side directions)
  {
    double dist = (user - scene.ris_center).norm();
    g_row += coeff_for(1.0, dist) * rx_steer(ris, scene.ris_center, user).conjugate().transpose();
  }
  for (int p = 0; p + 1 < paths_g && p < int(scene.scatterers.size()); ++p) {
    const auto& s = scene.scatterers[size_t(p)];
    double dist = (s - scene.ris_center).norm() + (s - user).norm();
    g_row += coeff_for(kReflectionLoss * scene.scatter_gain[size_t(p)], dist) *
             rx_steer(ris, scene.ris_center, s).conjugate().transpose();
  }
  // BS -> user: blocked line of sight, reflections only, extra attenuation
  double direct_scale = std::pow(10.0, sc.direct_path_attenuation_db / 20.0);
  for (int p = 0; p < paths_d && p < int(scene.scatterers.size()); ++p) {
    const auto& s = scene.scatterers[size_t(p)];
    double dist = (s - scene.bs_center).norm() + (s - user).norm();
    d_row += direct_scale * coeff_for(kReflectionLoss * scene.scatter_gain[size_t(p)], dist) *
             rx_steer(bs, scene.bs_center, s).conjugate().transpose();
  }
}

void add_scatter_term(CMat& m, double ratio, Rng& rng) {
  if (ratio <= 0.0 || m.size() == 0) return;
  double mean_power = m.squaredNorm() / double(m.size());
  double sigma = std::sqrt(ratio * mean_power);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) += sigma * rng.cnormal();
}

bool full_column_rank(const CMat& h) {
  Eigen::JacobiSVD<CMat> svd(h);
  const auto& sv = svd.singularValues();
  return sv.size() == std::min(h.rows(), h.cols()) && sv(0) > 0 &&
         sv(sv.size() - 1) > 1e-10 * sv(0);
}

}  // namespace

ChannelSample sample_channels(const ScenarioConfig& sc, const Scene& scene, ModelKind kind,
                              std::uint64_t seed) {
  Rng rng(seed);
  const int n = sc.n_elements();
  const int m = sc.bs_antennas;
  ChannelSample out;
  out.kind = kind;
  out.seed = seed;

  if (kind == ModelKind::Iid) {
    double sigma = std::sqrt(sc.iid_entry_power);
    int retries = 0;
    for (;;) {
      out.h.resize(n, m);
      out.g.resize(2, n);
      out.d.resize(2, m);
      for (Eigen::Index jcol = 0; jcol < m; ++jcol)
        for (Eigen::Index i = 0; i < n; ++i) out.h(i, jcol) = sigma * rng.cnormal();
      for (Eigen::Index jcol = 0; jcol < n; ++jcol)
        for (Eigen::Index i = 0; i < 2; ++i) out.g(i, jcol) = sigma * rng.cnormal();
      for (Eigen::Index jcol = 0; jcol < m; ++jcol)
        for (Eigen::Index i = 0; i < 2; ++i) out.d(i, jcol) = sigma * rng.cnormal();
      if (full_column_rank(out.h)) break;
      if (++retries > 16) throw Error("sample_channels: H stayed rank-deficient after 16 redraws");
    }
  } else {
    out.h = deterministic_h(sc, scene);
    out.g.resize(2, n);
    out.d.resize(2, m);
    for (int u = 0; u < 2; ++u) {
      Eigen::Vector3d user(rng.uniform(kUserXMin, kUserXMax), rng.uniform(kUserYMin, kUserYMax),
                           kUserZ);
      int paths_g = rng.uniform_int(sc.path_count_min, sc.path_count_max);
      int paths_d = rng.uniform_int(sc.path_count_min, sc.path_count_max);
      Eigen::RowVectorXcd g_row, d_row;
      deterministic_user_rows(sc, scene, user, paths_g, paths_d, g_row, d_row);
      out.g.row(u) = g_row;
      out.d.row(u) = d_row;
    }
    if (kind == ModelKind::DeterministicPlusScatter) {
      add_scatter_term(out.h, sc.scatter_power_ratio, rng);
      add_scatter_term(out.g, sc.scatter_power_ratio, rng);
    }
  }

  out.r1 = rng.uniform(sc.rate_min, sc.rate_max);
  out.r2 = rng.uniform(sc.rate_min, sc.rate_max);
  out.j = out.d * num::pseudo_inverse(out.h);
  if (!out.h.allFinite() || !out.g.allFinite() || !out.d.allFinite() || !out.j.allFinite())
    throw Error("sample_channels: non-finite channel matrices");
  return out;
}

CMat build_s_matrix(const ScenarioConfig& sc) {
  const int n = sc.n_elements();
  CMat s = CMat::Zero(n, n);
  if (sc.coupling_strength == 0.0) return s;
  const double lambda = sc.carrier_wavelength;
  const double d_ref = sc.ris_spacing * lambda;
  for (int a = 0; a < n; ++a) {
    int ra = a / sc.ris_cols, ca = a % sc.ris_cols;
    for (int b = a + 1; b < n; ++b) {
      int rb = b / sc.ris_cols, cb = b % sc.ris_cols;
      double dist = d_ref * std::hypot(double(ra - rb), double(ca - cb));
      double phase = -2.0 * M_PI * dist / lambda;
      cd v = sc.coupling_strength * (d_ref / dist) * cd(std::cos(phase), std::sin(phase));
      s(a, b) = v;
      s(b, a) = v;  // reciprocity
    }
  }
  double norm = num::spectral_norm(s);
  if (norm > 0.5) s *= 0.5 / norm;
  return s;
}

CMat effective_channel(const CMat& d, const CMat& g, const CMat& h, const CMat& s,
                       const RVec& psi) {
  const Eigen::Index n = h.rows();
  if (g.cols() != n || psi.size() != n || d.cols() != h.cols() || d.rows() != g.rows())
    throw Error("effective_channel: dimension mismatch");
  CVec phi(n);
  for (Eigen::Index i = 0; i < n; ++i) phi(i) = cd(std::cos(psi(i)), std::sin(psi(i)));
  CMat b = phi.asDiagonal() * h;
  if (s.size() == 0 || s.norm() == 0.0) return d + g * b;
  CMat a = CMat::Identity(n, n) - CMat(phi.asDiagonal() * s);
  return d + g * num::solve_linear(a, b);
}

num::Var effective_channel_on_tape(num::Tape& t, num::Var psi, const CMat& d, const CMat& g,
                                   std::shared_ptr<const CMat> h,
                                   std::shared_ptr<const CMat> s) {
  num::Var x = num::ris_cascade(psi, std::move(h), std::move(s));
  num::Var ris_path = num::matmul(t.constant(g), x);
  return num::add(t.constant(d), ris_path);
}

RMat build_features(const ChannelSample& s, double feature_scale) {
  const Eigen::Index n = s.g.cols();
  if (s.j.cols() != n) throw Error("build_features: J missing or mis-sized");
  RMat f(10, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    for (int u = 0; u < 2; ++u) {
      cd gv = s.g(u, col);
      cd jv = s.j(u, col);
      int base = 5 * u;
      f(base + 0, col) = std::abs(gv) * feature_scale;
      f(base + 1, col) = gv == cd(0.0) ? 0.0 : std::arg(gv);
      f(base + 2, col) = std::abs(jv) * feature_scale;
      f(base + 3, col) = jv == cd(0.0) ? 0.0 : std::arg(jv);
      f(base + 4, col) = u == 0 ? s.r1 : s.r2;
    }
  }
  return f;
}

std::vector<int> anchor_element_ids(int ris_rows, int ris_cols) {
  if (ris_rows % 9 != 0 || ris_cols % 9 != 0)
    throw ConfigError("anchor layout requires panel dimensions divisible by 9 (got " +
                std::to_string(ris_rows) + "x" + std::to_string(ris_cols) + ")");
  std::vector<int> ids;
  for (int k = 0; k < ris_rows / 9; ++k)
    for (int l = 0; l < ris_cols / 9; ++l)
      ids.push_back((9 * k + 4) * ris_cols + (9 * l + 4));
  return ids;
}

PartialObservation observe(const RMat& features, int ris_rows, int ris_cols) {
  if (features.cols() != Eigen::Index(ris_rows) * ris_cols)
    throw Error("observe: feature column count does not match the panel");
  std::vector<int> ids = anchor_element_ids(ris_rows, ris_cols);
  PartialObservation o;
  o.features.resize(features.rows(), Eigen::Index(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) {
    o.features.col(Eigen::Index(i)) = features.col(ids[i]);
    o.anchor_indices.push_back(ids[i] + 1);  // 1-based at the interface
  }
  return o;
}

}  // namespace rn::chan
