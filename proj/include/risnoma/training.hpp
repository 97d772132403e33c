#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "risnoma/dataset.hpp"
#include "risnoma/risnet.hpp"

namespace rn::train {

struct TrainingConfig {
  double learning_rate = 1.5e-3;
  double learning_rate_final = 8e-4;  // linear decay target over the epoch range
  int batch_size = 512;
  double penalty_weight = 100.0;  // eta_p
  double grad_clip = 10.0;        // global-norm cap on batch gradients; 0 = off
  int epochs = 30;
  std::uint64_t seed = 1;
  int threads = 1;
  bool record_timing = true;     // off -> wall_ms columns are 0, outputs bit-stable
  double early_stop_rel = 0.005; // minimum relative test-power improvement ...
  int early_stop_patience = 10;  // ... over this many epochs

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  std::string split;  // "train", "test", "random", "direct"
  double mean_loss = 0.0;
  double mean_power = 0.0;  // mean ||v1||^2 + ||v2||^2
  double qd_ratio = 0.0;    // fraction of samples with penalty <= 1e-6
  long wall_ms = 0;
};

std::string metrics_csv_header();
std::string to_csv_row(const MetricsRecord& r);

class Adam {
 public:
  Adam(Eigen::Index n, double lr);
  void step(RVec& params, const RVec& grad);

  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  RVec m, v;
};

/// Global magnitude-feature scale: reciprocal of the mean magnitude feature
/// (|g| and |j| entries) over the given samples.
double compute_feature_scale(std::span<const chan::ChannelSample> samples);

struct SampleResult {
  double loss = 0.0;
  double power = 0.0;
  double penalty = 0.0;
};

/// Plain-arithmetic evaluation of one sample under the model's phases.
SampleResult eval_sample(const net::RISnetModel& model, const chan::ChannelSample& s,
                         const CMat& smat, double sigma2, double eta_p);

/// Loss and parameter gradient for one sample (taped forward + backward).
SampleResult loss_and_grad(const net::RISnetModel& model, const chan::ChannelSample& s,
                           const CMat& smat, double sigma2, double eta_p, RVec& grad_out);

MetricsRecord evaluate(const net::RISnetModel& model, std::span<const chan::ChannelSample> samples,
                       const CMat& smat, double sigma2, double eta_p, int threads);

struct TrainResult {
  net::RISnetModel best;
  net::RISnetModel last;
  std::vector<MetricsRecord> metrics;
};

/// Runs the training loop. `model` supplies the initialization (and panel
/// geometry); its feature_scale is computed from the training split unless
/// a resume state provides one. `state_path`, when non-empty, is read to
/// resume an interrupted run and rewritten after every epoch.
TrainResult train(net::RISnetModel model, const data::Dataset& ds, const CMat& smat,
                  const TrainingConfig& cfg, const std::string& state_path = "",
                  std::ostream* log = nullptr);

MetricsRecord baseline_random(std::span<const chan::ChannelSample> samples, const CMat& smat,
                              double sigma2, double eta_p, std::uint64_t seed);

/// Per-sample direct optimization of the phases (no network): `steps`
/// optimizer iterations per sample, reporting the best iterate found.
MetricsRecord baseline_direct_opt(std::span<const chan::ChannelSample> samples, const CMat& smat,
                                  double sigma2, double eta_p, int steps, double lr);

}  // namespace rn::train
