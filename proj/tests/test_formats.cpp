#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "risnoma/config.hpp"
#include "risnoma/dataset.hpp"
#include "risnoma/training.hpp"

using namespace rn;

namespace {

bool same_cmat(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(cd) * size_t(a.size())) == 0;
}

bool same_sample(const chan::ChannelSample& a, const chan::ChannelSample& b) {
  return same_cmat(a.h, b.h) && same_cmat(a.g, b.g) && same_cmat(a.d, b.d) &&
         same_cmat(a.j, b.j) && std::memcmp(&a.r1, &b.r1, sizeof a.r1) == 0 &&
         std::memcmp(&a.r2, &b.r2, sizeof a.r2) == 0 && a.kind == b.kind && a.seed == b.seed;
}

data::Dataset small_dataset() {
  chan::ScenarioConfig sc;
  sc.bs_antennas = 3;
  sc.ris_rows = 6;
  sc.ris_cols = 6;
  return data::generate_dataset(sc, chan::ModelKind::DeterministicPlusScatter, 77, 5, 3);
}

void apply_text(cfg::RunConfig& c, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    cfg::apply_kv(c, line.substr(0, eq), line.substr(eq + 1));
  }
}

}  // namespace

TEST_CASE("dataset container round-trips bit-exactly") {
  data::Dataset ds = small_dataset();
  std::string path = "/tmp/risnoma_test_ds.bin";
  data::write_dataset(ds, path);
  data::Dataset r = data::read_dataset(path);
  CHECK(r.master_seed == ds.master_seed);
  CHECK(r.kind == ds.kind);
  CHECK(r.scenario.bs_antennas == 3);
  CHECK(r.scenario.ris_rows == 6);
  CHECK(std::memcmp(&r.scenario.noise_power, &ds.scenario.noise_power,
                    sizeof(double)) == 0);
  REQUIRE(r.train.size() == ds.train.size());
  REQUIRE(r.test.size() == ds.test.size());
  for (size_t i = 0; i < ds.train.size(); ++i) CHECK(same_sample(r.train[i], ds.train[i]));
  for (size_t i = 0; i < ds.test.size(); ++i) CHECK(same_sample(r.test[i], ds.test[i]));
  std::remove(path.c_str());
}

TEST_CASE("dataset reader rejects files with the wrong magic") {
  std::string path = "/tmp/risnoma_test_badmagic.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE this is not a dataset";
  }
  CHECK_THROWS_AS(data::read_dataset(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("regeneration from the same seed is bit-identical") {
  data::Dataset a = small_dataset();
  data::Dataset b = small_dataset();
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(same_sample(a.train[i], b.train[i]));
}

TEST_CASE("config echo parses back to an identical configuration") {
  cfg::RunConfig c = cfg::preset("desk");
  c.training.seed = 99;
  c.training.learning_rate = 0.00123;
  c.scenario.coupling_strength = 0.17;
  c.partial_csi = true;
  std::string text = cfg::echo(c);
  cfg::RunConfig r = cfg::preset("paper");  // start from different values
  apply_text(r, text);
  CHECK(cfg::echo(r) == text);
  CHECK(r.training.seed == 99);
  CHECK(r.training.learning_rate == 0.00123);
  CHECK(r.scenario.coupling_strength == 0.17);
  CHECK(r.partial_csi);
  CHECK(r.scenario.ris_rows == 18);
}

TEST_CASE("unknown configuration keys are rejected by name") {
  cfg::RunConfig c = cfg::preset("paper");
  CHECK_THROWS_WITH_AS(cfg::apply_kv(c, "learning_rte", "0.1"),
                       doctest::Contains("learning_rte"), ConfigError);
}

TEST_CASE("malformed values are rejected with the key named") {
  cfg::RunConfig c = cfg::preset("paper");
  CHECK_THROWS_WITH_AS(cfg::apply_kv(c, "epochs", "many"), doctest::Contains("epochs"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(cfg::apply_kv(c, "csi_mode", "both"), doctest::Contains("csi_mode"),
                       ConfigError);
}

TEST_CASE("metrics CSV header is stable") {
  CHECK(train::metrics_csv_header() == "epoch,split,mean_loss,mean_power_w,qd_ratio,wall_ms");
  train::MetricsRecord r;
  r.epoch = 3;
  r.split = "test";
  r.mean_loss = 1.5;
  r.mean_power = 2.25;
  r.qd_ratio = 0.5;
  CHECK(train::to_csv_row(r) == "3,test,1.5,2.25,0.5,0");
}

TEST_CASE("presets expose the documented shapes") {
  cfg::RunConfig desk = cfg::preset("desk");
  CHECK(desk.scenario.ris_rows == 18);
  CHECK(desk.scenario.ris_cols == 18);
  cfg::RunConfig paper = cfg::preset("paper");
  CHECK(paper.scenario.ris_rows == 36);
  CHECK(paper.n_train == 10240);
  CHECK_THROWS_AS(cfg::preset("office"), ConfigError);
}
