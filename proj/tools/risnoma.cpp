// Command-line entry point: dataset generation, training, evaluation with
// baselines, and the gradient-check suite.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 runtime/numerical
// failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "risnoma/config.hpp"
#include "risnoma/dataset.hpp"
#include "risnoma/gradcheck.hpp"
#include "risnoma/training.hpp"

namespace {

using namespace rn;

struct CommonOpts {
  std::string preset = "paper";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--preset", o.preset, "Configuration preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", o.config_path, "key=value configuration file applied on top");
  cmd->add_option("--seed", o.seed, "Override the configured seed");
  cmd->add_option("--threads", o.threads, "Override the configured worker-thread count");
}

cfg::RunConfig resolve_config(const CommonOpts& o) {
  cfg::RunConfig c = cfg::preset(o.preset);
  if (!o.config_path.empty()) cfg::apply_file(c, o.config_path);
  if (o.seed) c.training.seed = *o.seed;
  if (o.threads) c.training.threads = *o.threads;
  c.validate();
  return c;
}

std::string describe(const chan::ScenarioConfig& s) {
  std::ostringstream os;
  os << s.bs_antennas << " antennas, " << s.ris_rows << "x" << s.ris_cols
     << " panel, lambda=" << s.carrier_wavelength << ", sigma2=" << s.noise_power
     << ", kappa=" << s.coupling_strength;
  return os.str();
}

void require_scenario_match(const chan::ScenarioConfig& config_side,
                            const chan::ScenarioConfig& dataset_side) {
  auto close = [](double a, double b) { return a == b; };
  bool ok = config_side.bs_antennas == dataset_side.bs_antennas &&
            config_side.ris_rows == dataset_side.ris_rows &&
            config_side.ris_cols == dataset_side.ris_cols &&
            close(config_side.carrier_wavelength, dataset_side.carrier_wavelength) &&
            close(config_side.noise_power, dataset_side.noise_power) &&
            close(config_side.coupling_strength, dataset_side.coupling_strength);
  if (!ok)
    throw ConfigError("config scenario (" + describe(config_side) +
                      ") does not match the dataset scenario (" + describe(dataset_side) + ")");
}

CMat coupling_matrix(const cfg::RunConfig& c, const chan::ScenarioConfig& sc) {
  if (!c.mutual_coupling) return CMat();  // empty = coupling-free panel
  return chan::build_s_matrix(sc);
}

// ---- generate ---------------------------------------------------------------

int cmd_generate(const CommonOpts& o, const std::string& out_path) {
  cfg::RunConfig c = resolve_config(o);
  data::Dataset ds =
      data::generate_dataset(c.scenario, c.model_kind, c.training.seed, c.n_train, c.n_test);
  data::write_dataset(ds, out_path);
  std::cout << "wrote " << out_path << ": " << ds.train.size() << " train + " << ds.test.size()
            << " test samples, model_kind=" << chan::to_string(ds.kind)
            << ", seed=" << ds.master_seed << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const CommonOpts& o, const std::string& dataset_path, const std::string& out_dir,
              const std::string& checkpoint_path) {
  cfg::RunConfig c = resolve_config(o);
  data::Dataset ds = data::read_dataset(dataset_path);
  require_scenario_match(c.scenario, ds.scenario);

  std::filesystem::create_directories(out_dir);
  std::string state_path =
      checkpoint_path.empty() ? (std::filesystem::path(out_dir) / "state.bin").string()
                              : checkpoint_path;

  net::Variant variant = c.partial_csi ? net::Variant::PartialCsi : net::Variant::FullCsi;
  net::RISnetModel model = net::make_model(variant, ds.scenario.ris_rows, ds.scenario.ris_cols,
                                           c.training.seed, c.hidden_width, c.full_depth);
  CMat smat = coupling_matrix(c, ds.scenario);

  train::TrainResult res = train::train(model, ds, smat, c.training, state_path, &std::cout);

  std::string metrics_path = (std::filesystem::path(out_dir) / "metrics.csv").string();
  std::ofstream mcsv(metrics_path);
  if (!mcsv) throw Error("cannot write metrics file '" + metrics_path + "'");
  mcsv << train::metrics_csv_header() << '\n';
  for (const auto& r : res.metrics) mcsv << train::to_csv_row(r) << '\n';

  std::string model_path = (std::filesystem::path(out_dir) / "model.rnet").string();
  net::save_checkpoint(res.best, model_path);

  train::MetricsRecord final_rec = train::evaluate(res.best, ds.test, smat,
                                                   ds.scenario.noise_power,
                                                   c.training.penalty_weight, c.training.threads);
  std::cout << "best checkpoint: " << model_path << "\n"
            << "final qd_ratio=" << final_rec.qd_ratio
            << " mean_power_w=" << final_rec.mean_power << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(const CommonOpts& o, const std::string& checkpoint_path,
             const std::string& dataset_path, const std::string& baseline,
             const std::string& out_path) {
  cfg::RunConfig c = resolve_config(o);
  data::Dataset ds = data::read_dataset(dataset_path);
  net::RISnetModel model = net::load_checkpoint(checkpoint_path);
  if (model.ris_rows != ds.scenario.ris_rows || model.ris_cols != ds.scenario.ris_cols)
    throw ConfigError("checkpoint panel " + std::to_string(model.ris_rows) + "x" +
                      std::to_string(model.ris_cols) + " does not match dataset panel " +
                      std::to_string(ds.scenario.ris_rows) + "x" +
                      std::to_string(ds.scenario.ris_cols));

  CMat smat = coupling_matrix(c, ds.scenario);
  const double sigma2 = ds.scenario.noise_power;
  const double eta_p = c.training.penalty_weight;

  std::vector<train::MetricsRecord> rows;
  rows.push_back(train::evaluate(model, ds.test, smat, sigma2, eta_p, c.training.threads));
  if (baseline == "random")
    rows.push_back(train::baseline_random(ds.test, smat, sigma2, eta_p, c.training.seed));
  else if (baseline == "direct")
    rows.push_back(train::baseline_direct_opt(ds.test, smat, sigma2, eta_p, c.direct_opt_steps,
                                              c.direct_opt_lr));

  std::ostringstream report;
  report << train::metrics_csv_header() << '\n';
  for (const auto& r : rows) report << train::to_csv_row(r) << '\n';
  std::cout << report.str();
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw Error("cannot write report file '" + out_path + "'");
    os << report.str();
  }

  if (!ds.test.empty()) {
    RMat features = chan::build_features(ds.test.front(), model.feature_scale);
    RVec psi = net::model_forward(model, features);  // warm-up
    auto t0 = std::chrono::steady_clock::now();
    const int reps = 10;
    for (int r = 0; r < reps; ++r) psi = net::model_forward(model, features);
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
    std::cout << "forward latency: " << ms << " ms (single sample, single thread, N="
              << ds.scenario.ris_rows * ds.scenario.ris_cols << ")\n";
  }
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

int cmd_gradcheck(const CommonOpts& o, bool corrupt_adjoint) {
  std::uint64_t seed = o.seed.value_or(1);
  auto reports = num::run_gradcheck(seed, corrupt_adjoint);
  std::string failing;
  for (const auto& r : reports) {
    bool ok = r.max_rel_err < num::kGradCheckTol;
    std::cout << (ok ? "PASS " : "FAIL ") << r.name << "  instances=" << r.instances
              << "  max_rel_err=" << r.max_rel_err << "\n";
    if (!ok) failing += (failing.empty() ? "" : ", ") + r.name;
  }
  if (!failing.empty()) throw Error("gradient check failed for: " + failing);
  std::cout << "all components below " << num::kGradCheckTol << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS phase-shift and NOMA precoding optimizer"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, gc_o;
  std::string gen_out, train_ds, train_out = ".", train_ckpt;
  std::string eval_ckpt, eval_ds, eval_baseline = "none", eval_out;
  bool corrupt_adjoint = false;

  CLI::App* gen = app.add_subcommand("generate", "Generate a channel dataset");
  add_common(gen, gen_o);
  gen->add_option("--out", gen_out, "Output dataset path")->required();

  CLI::App* tr = app.add_subcommand("train", "Train a model on a dataset");
  add_common(tr, train_o);
  tr->add_option("--dataset", train_ds, "Input dataset path")->required();
  tr->add_option("--out", train_out, "Output directory for metrics and checkpoints");
  tr->add_option("--checkpoint", train_ckpt, "Trainer state path (resumes if present)");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(ev, eval_o);
  ev->add_option("--checkpoint", eval_ckpt, "Model checkpoint path")->required();
  ev->add_option("--dataset", eval_ds, "Input dataset path")->required();
  ev->add_option("--baseline", eval_baseline, "Additional baseline row")
      ->check(CLI::IsMember({"none", "random", "direct"}));
  ev->add_option("--out", eval_out, "Write the report CSV here as well");

  CLI::App* gc = app.add_subcommand("gradcheck", "Run the gradient-check suite");
  add_common(gc, gc_o);
  gc->add_flag("--corrupt-adjoint", corrupt_adjoint,
               "Route one component through a deliberately wrong adjoint (negative control)")
      ->group("");  // hidden: testing hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors map to exit code 1
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_o, gen_out);
    if (tr->parsed()) return cmd_train(train_o, train_ds, train_out, train_ckpt);
    if (ev->parsed()) return cmd_eval(eval_o, eval_ckpt, eval_ds, eval_baseline, eval_out);
    if (gc->parsed()) return cmd_gradcheck(gc_o, corrupt_adjoint);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
