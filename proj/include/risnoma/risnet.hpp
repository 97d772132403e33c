#pragma once

#include <string>
#include <vector>

#include "risnoma/common.hpp"
#include "risnoma/tape.hpp"

namespace rn::net {

enum class Variant : std::uint8_t { FullCsi = 0, PartialCsi = 1 };

/// One information-processing unit: local branch (W_c, b_c) and global
/// branch (W_a, b_a). The final layer uses only the local pair.
struct LayerQuad {
  RMat wc, bc, wa, ba;  // biases stored as Qx1 matrices
};

struct Layer {
  enum class Kind : std::uint8_t { Normal = 0, Expansion = 1, Final = 2 };
  Kind kind = Kind::Normal;
  int stride = 1;               // expansion layers only
  std::vector<LayerQuad> quads; // 1 for normal/final, 9 for expansion
};

struct RISnetModel {
  Variant variant = Variant::FullCsi;
  int ris_rows = 0, ris_cols = 0;
  double feature_scale = 1.0;
  std::vector<Layer> layers;

  int param_count() const;
  RVec flatten() const;
  void unflatten(const RVec& theta);
};

/// Full-CSI: `full_depth` normal layers + final. Partial-CSI: 2 normal,
/// expansion stride 3, 2 normal, expansion stride 1, 1 normal, final.
/// Weights uniform in +-sqrt(6/(P+Q)), biases 0.01.
RISnetModel make_model(Variant variant, int ris_rows, int ris_cols, std::uint64_t seed,
                       int hidden_width = 64, int full_depth = 8);

/// 1-based neighbor map: nu(n, j) = n + s (dr H_cols + dc) with
/// dr = ceil(j/3) - 2 and dc = (j-1) mod 3 - 1. Throws if the result
/// leaves the panel.
int nu_index(int n, int j, int stride, int h_cols);

/// Applies nu to every id for j = 1..9 (j-major block order). Throws on an
/// out-of-panel index or a coverage collision.
std::vector<int> expand_ids(const std::vector<int>& ids_1based, int stride, int ris_rows,
                            int ris_cols);

RMat normal_layer_forward(const LayerQuad& q, const RMat& f);
/// Returns 2Q x 9K, block j holding the columns placed at nu(., j).
RMat expansion_layer_forward(const Layer& layer, const RMat& f);

/// Full variant consumes the 10 x N feature matrix; the partial variant
/// selects the anchor columns itself. Returns N phases in panel order.
RVec model_forward(const RISnetModel& m, const RMat& features);

/// Tape twin of model_forward; registers every parameter matrix as an
/// input (flatten order) and appends the Vars to `params`.
num::Var model_forward_on_tape(num::Tape& t, const RISnetModel& m, const RMat& features,
                               std::vector<num::Var>& params);

/// Binary checkpoint, magic "RNET"; bit-exact round-trip.
void save_checkpoint(const RISnetModel& m, const std::string& path);
RISnetModel load_checkpoint(const std::string& path);

}  // namespace rn::net
