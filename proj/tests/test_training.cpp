#include <doctest.h>

#include <cstdio>
#include <cstring>

#include "risnoma/training.hpp"

using namespace rn;
using namespace rn::train;

namespace {

chan::ScenarioConfig tiny_scenario() {
  chan::ScenarioConfig sc;
  sc.bs_antennas = 3;
  sc.ris_rows = 6;
  sc.ris_cols = 6;
  return sc;
}

data::Dataset tiny_dataset(int n_train = 8, int n_test = 4) {
  return data::generate_dataset(tiny_scenario(), chan::ModelKind::Deterministic, 1234, n_train,
                                n_test);
}

net::RISnetModel tiny_model(std::uint64_t seed = 1) {
  return net::make_model(net::Variant::FullCsi, 6, 6, seed, 12, 2);
}

TrainingConfig tiny_config() {
  TrainingConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.record_timing = false;
  cfg.early_stop_patience = 100;  // keep smoke runs deterministic in length
  return cfg;
}

}  // namespace

TEST_CASE("adam: first step uses the bias-corrected update") {
  RVec p(2), g(2);
  p << 1.0, -2.0;
  g << 0.5, -0.25;
  Adam opt(2, 0.1);
  opt.step(p, g);
  // After one step m-hat = g and v-hat = g*g, so the move is lr*g/(|g|+eps).
  CHECK(p(0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(-2.0 + 0.1 * 0.25 / (0.25 + 1e-8)).epsilon(1e-12));
  CHECK(opt.t == 1);
}

TEST_CASE("config validation names the offending key") {
  TrainingConfig cfg = tiny_config();
  cfg.grad_clip = -1.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("grad_clip"), ConfigError);
  cfg = tiny_config();
  cfg.learning_rate_final = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("learning_rate_final"), ConfigError);
  cfg = tiny_config();
  cfg.epochs = -1;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("epochs"), ConfigError);
}

TEST_CASE("feature scale is the reciprocal mean magnitude feature") {
  data::Dataset ds = tiny_dataset();
  double k = compute_feature_scale(ds.train);
  double sum = 0.0;
  long count = 0;
  for (const auto& s : ds.train) {
    sum += s.g.cwiseAbs().sum() + s.j.cwiseAbs().sum();
    count += s.g.size() + s.j.size();
  }
  CHECK(k == doctest::Approx(double(count) / sum).epsilon(1e-15));
  CHECK(k * (sum / double(count)) == doctest::Approx(1.0));
}

TEST_CASE("taped per-sample loss matches the plain evaluation") {
  data::Dataset ds = tiny_dataset();
  net::RISnetModel m = tiny_model();
  m.feature_scale = compute_feature_scale(ds.train);
  CMat smat = chan::build_s_matrix(ds.scenario);
  RVec grad;
  for (int i = 0; i < 4; ++i) {
    SampleResult a = eval_sample(m, ds.train[size_t(i)], smat, 1.0, 100.0);
    SampleResult b = loss_and_grad(m, ds.train[size_t(i)], smat, 1.0, 100.0, grad);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    CHECK(a.power == doctest::Approx(b.power).epsilon(1e-12));
    CHECK(grad.size() == m.param_count());
    CHECK(grad.allFinite());
  }
}

TEST_CASE("zero epochs: one evaluation record, parameters untouched") {
  data::Dataset ds = tiny_dataset();
  net::RISnetModel m = tiny_model();
  TrainingConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult res = rn::train::train(m, ds, CMat(), cfg);
  REQUIRE(res.metrics.size() == 1);
  CHECK(res.metrics[0].epoch == 0);
  CHECK(res.metrics[0].split == "test");
  RVec before = m.flatten(), after = res.last.flatten();
  CHECK(std::memcmp(before.data(), after.data(), sizeof(double) * before.size()) == 0);
}

TEST_CASE("two-epoch smoke run: record layout and parameter movement") {
  data::Dataset ds = tiny_dataset();
  TrainResult res = rn::train::train(tiny_model(), ds, CMat(), tiny_config());
  // epoch-0 test row, then (train, test) per epoch.
  REQUIRE(res.metrics.size() == 5);
  CHECK(res.metrics[1].split == "train");
  CHECK(res.metrics[1].epoch == 1);
  CHECK(res.metrics[4].split == "test");
  CHECK(res.metrics[4].epoch == 2);
  for (const auto& r : res.metrics) {
    CHECK(std::isfinite(r.mean_loss));
    CHECK(r.wall_ms == 0);  // record_timing off
    CHECK(r.qd_ratio >= 0.0);
    CHECK(r.qd_ratio <= 1.0);
  }
  CHECK((tiny_model().flatten() - res.last.flatten()).norm() > 0.0);
}

TEST_CASE("interrupted run resumes to a bit-identical result") {
  data::Dataset ds = tiny_dataset();
  TrainingConfig cfg = tiny_config();
  cfg.epochs = 3;

  TrainResult straight = rn::train::train(tiny_model(), ds, CMat(), cfg);

  std::string sp = "/tmp/risnoma_test_state.bin";
  std::remove(sp.c_str());
  TrainingConfig first = cfg;
  first.epochs = 1;
  rn::train::train(tiny_model(), ds, CMat(), first, sp);
  TrainResult resumed = rn::train::train(tiny_model(), ds, CMat(), cfg, sp);
  std::remove(sp.c_str());

  RVec a = straight.last.flatten(), b = resumed.last.flatten();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  REQUIRE(straight.metrics.size() == resumed.metrics.size());
  for (size_t i = 0; i < straight.metrics.size(); ++i) {
    CHECK(straight.metrics[i].mean_loss == resumed.metrics[i].mean_loss);
    CHECK(straight.metrics[i].mean_power == resumed.metrics[i].mean_power);
    CHECK(straight.metrics[i].split == resumed.metrics[i].split);
  }
}

TEST_CASE("random baseline is deterministic in the seed") {
  data::Dataset ds = tiny_dataset();
  MetricsRecord a = baseline_random(ds.test, CMat(), 1.0, 100.0, 9);
  MetricsRecord b = baseline_random(ds.test, CMat(), 1.0, 100.0, 9);
  MetricsRecord c = baseline_random(ds.test, CMat(), 1.0, 100.0, 10);
  CHECK(a.mean_loss == b.mean_loss);
  CHECK(a.mean_power == b.mean_power);
  CHECK(a.mean_loss != c.mean_loss);
  CHECK(a.split == "random");
}

TEST_CASE("direct phase optimization improves with more steps") {
  data::Dataset ds = tiny_dataset(2, 3);
  CMat smat = chan::build_s_matrix(ds.scenario);
  MetricsRecord few = baseline_direct_opt(ds.test, smat, 1.0, 100.0, 1, 0.05);
  MetricsRecord many = baseline_direct_opt(ds.test, smat, 1.0, 100.0, 40, 0.05);
  CHECK(many.mean_loss <= few.mean_loss);
  CHECK(many.split == "direct");
  CHECK_THROWS_AS(baseline_direct_opt(ds.test, smat, 1.0, 100.0, 0, 0.05), ConfigError);
}
