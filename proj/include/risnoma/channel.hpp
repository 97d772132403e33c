#pragma once

#include <memory>
#include <vector>

#include "risnoma/common.hpp"
#include "risnoma/tape.hpp"

namespace rn::chan {

enum class ModelKind : std::uint8_t {
  Deterministic = 0,
  DeterministicPlusScatter = 1,
  Iid = 2,
};

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ScenarioConfig {
  int bs_antennas = 9;
  int ris_rows = 36;
  int ris_cols = 36;
  double carrier_wavelength = 0.0856550;  // meters, 3.5 GHz
  double bs_spacing = 0.5;                // wavelengths
  double ris_spacing = 0.25;              // wavelengths
  double noise_power = 1.0;               // watts, normalized
  double coupling_strength = 0.3;         // kappa
  double direct_path_attenuation_db = -20.0;
  int path_count_min = 2;
  int path_count_max = 4;
  double rate_min = 0.5;  // bits/s/Hz
  double rate_max = 2.0;
  double scatter_power_ratio = 0.1;  // model 2 perturbation power / deterministic power
  double iid_entry_power = 1.0;      // model 3 per-entry power

  int n_elements() const { return ris_rows * ris_cols; }
  void validate() const;  // throws ConfigError naming the violated constraint
};

struct ChannelSample {
  CMat h;  // N x M, BS -> RIS
  CMat g;  // 2 x N, RIS -> users
  CMat d;  // 2 x M, BS -> users direct
  CMat j;  // 2 x N, = D H^+
  double r1 = 0.0, r2 = 0.0;  // bits/s/Hz
  ModelKind kind = ModelKind::Deterministic;
  std::uint64_t seed = 0;
};

struct PartialObservation {
  std::vector<int> anchor_indices;  // 1-based element indices, strictly increasing
  RMat features;                    // 10 x anchor count
};

// ---- array geometry / steering --------------------------------------------

struct ArrayGeometry {
  int rows = 1;
  int cols = 1;
  double spacing_wl = 0.5;  // element spacing in wavelengths
};

/// Unit-modulus steering vector, entry (r, c) laid out row-major:
/// e^{i 2 pi spacing (c u + r v)} with u = sin(az) cos(el), v = sin(el).
CVec steering_vector(const ArrayGeometry& g, double azimuth, double elevation);

// ---- scene ------------------------------------------------------------------

// A fixed propagation scene shared by all samples of a dataset: BS and RIS
// placements plus a set of scatterers drawn once from the master seed. Users
// move inside a rectangular region, which is what varies between samples.
struct Scene {
  Eigen::Vector3d bs_center, ris_center;
  std::vector<Eigen::Vector3d> scatterers;
  std::vector<double> scatter_gain;  // log-normal shadowing per scatterer
  int paths_h = 1;                   // path count for the BS->RIS link
};

Scene build_scene(const ScenarioConfig& sc, std::uint64_t master_seed);

ChannelSample sample_channels(const ScenarioConfig& sc, const Scene& scene, ModelKind kind,
                              std::uint64_t seed);

// ---- mutual coupling --------------------------------------------------------

/// S-parameter matrix: zero diagonal, symmetric, |S[m,n]| = kappa d_ref/d_mn
/// with phase -2 pi d_mn / lambda, globally rescaled to spectral norm <= 0.5.
CMat build_s_matrix(const ScenarioConfig& sc);

// ---- effective channel ------------------------------------------------------

/// C = D + G (I - Phi S)^{-1} Phi H, Phi = diag(e^{i psi}). Pass an empty S
/// (or size 0) for a coupling-free panel.
CMat effective_channel(const CMat& d, const CMat& g, const CMat& h, const CMat& s,
                       const RVec& psi);

/// Tape version of the same composition, differentiable w.r.t. psi.
num::Var effective_channel_on_tape(num::Tape& t, num::Var psi, const CMat& d, const CMat& g,
                                   std::shared_ptr<const CMat> h,
                                   std::shared_ptr<const CMat> s);

// ---- features / observation -------------------------------------------------

/// 10 x N feature matrix; column n is
/// (|g1n| k, arg g1n, |j1n| k, arg j1n, r1, |g2n| k, arg g2n, |j2n| k, arg j2n, r2)
/// with k the global feature scale.
RMat build_features(const ChannelSample& s, double feature_scale);

/// 0-based element ids of the anchor grid (rows (9k+4), cols (9l+4)).
/// Throws unless both panel dimensions are divisible by 9.
std::vector<int> anchor_element_ids(int ris_rows, int ris_cols);

PartialObservation observe(const RMat& features, int ris_rows, int ris_cols);

}  // namespace rn::chan
