#include "risnoma/training.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "risnoma/precoding.hpp"

namespace rn::train {

namespace {

constexpr double kQdThreshold = 1e-6;    // penalty below this counts as quasi-degraded
constexpr double kBestQdGate = 0.99;     // test qd needed to rank checkpoints by power

long now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<const CMat> borrow(const CMat& m) {
  return std::shared_ptr<const CMat>(&m, [](const CMat*) {});
}

// Runs fn(begin, end, slot) over contiguous chunks; results must be merged
// by the caller in slot order so the reduction order is fixed.
void parallel_chunks(int n, int threads, const std::function<void(int, int, int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  int base = n / threads, extra = n % threads;
  int at = 0;
  for (int s = 0; s < threads; ++s) {
    int len = base + (s < extra ? 1 : 0);
    pool.emplace_back(fn, at, at + len, s);
    at += len;
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate: must be > 0");
  if (!(learning_rate_final > 0))
    throw ConfigError("learning_rate_final: must be > 0");
  if (grad_clip < 0) throw ConfigError("grad_clip: must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (!(penalty_weight >= 0)) throw ConfigError("penalty_weight: must be >= 0");
  if (epochs < 0) throw ConfigError("epochs: must be >= 0");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience: must be >= 1");
}

std::string metrics_csv_header() { return "epoch,split,mean_loss,mean_power_w,qd_ratio,wall_ms"; }

std::string to_csv_row(const MetricsRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.epoch << ',' << r.split << ',' << r.mean_loss << ',' << r.mean_power << ','
     << r.qd_ratio << ',' << r.wall_ms;
  return os.str();
}

Adam::Adam(Eigen::Index n, double lr_) : lr(lr_), m(RVec::Zero(n)), v(RVec::Zero(n)) {}

void Adam::step(RVec& params, const RVec& grad) {
  if (params.size() != m.size() || grad.size() != m.size())
    throw Error("adam_step: shape mismatch");
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(beta1, double(t));
  double c2 = 1.0 - std::pow(beta2, double(t));
  params -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
}

double compute_feature_scale(std::span<const chan::ChannelSample> samples) {
  double sum = 0.0;
  long count = 0;
  for (const auto& s : samples) {
    sum += s.g.cwiseAbs().sum() + s.j.cwiseAbs().sum();
    count += s.g.size() + s.j.size();
  }
  if (count == 0 || !(sum > 0)) throw Error("feature scale: no nonzero magnitude features");
  return double(count) / sum;
}

SampleResult eval_sample(const net::RISnetModel& model, const chan::ChannelSample& s,
                         const CMat& smat, double sigma2, double eta_p) {
  RMat features = chan::build_features(s, model.feature_scale);
  RVec psi = net::model_forward(model, features);
  CMat c = chan::effective_channel(s.d, s.g, s.h, smat, psi);
  prec::OrderedProblem op = prec::order_users(c, s.r1, s.r2);
  prec::PrecodingResult res = prec::noma_precoder(op.c1, op.c2, op.g1, op.g2, sigma2);
  SampleResult out;
  out.power = res.total_power;
  out.penalty = res.penalty;
  out.loss = res.v1.norm() + res.v2.norm() + eta_p * res.penalty;
  return out;
}

SampleResult loss_and_grad(const net::RISnetModel& model, const chan::ChannelSample& s,
                           const CMat& smat, double sigma2, double eta_p, RVec& grad_out) {
  RMat features = chan::build_features(s, model.feature_scale);
  num::Tape t;
  std::vector<num::Var> params;
  num::Var psi = net::model_forward_on_tape(t, model, features, params);
  num::Var c = chan::effective_channel_on_tape(t, psi, s.d, s.g, borrow(s.h), borrow(smat));
  prec::PrecoderPlan plan = prec::plan_precoding(t.cval(c), s.r1, s.r2, sigma2);
  num::Var loss = prec::loss_on_tape(t, c, plan, sigma2, eta_p);
  t.run_backward(loss);
  grad_out.resize(model.param_count());
  Eigen::Index at = 0;
  for (num::Var p : params) {
    const RMat& g = t.grad(p);
    grad_out.segment(at, g.size()) = Eigen::Map<const RVec>(g.data(), g.size());
    at += g.size();
  }
  SampleResult out;
  out.loss = t.scalar(loss);
  out.power = plan.solution.total_power;
  out.penalty = plan.solution.penalty;
  return out;
}

namespace {

MetricsRecord reduce_records(std::span<const SampleResult> rs) {
  MetricsRecord rec;
  if (rs.empty()) return rec;
  for (const auto& r : rs) {
    rec.mean_loss += r.loss;
    rec.mean_power += r.power;
    rec.qd_ratio += r.penalty <= kQdThreshold ? 1.0 : 0.0;
  }
  rec.mean_loss /= double(rs.size());
  rec.mean_power /= double(rs.size());
  rec.qd_ratio /= double(rs.size());
  return rec;
}

}  // namespace

MetricsRecord evaluate(const net::RISnetModel& model, std::span<const chan::ChannelSample> samples,
                       const CMat& smat, double sigma2, double eta_p, int threads) {
  long t0 = now_ms();
  std::vector<SampleResult> rs(samples.size());
  std::exception_ptr err;
  std::mutex err_mu;
  parallel_chunks(int(samples.size()), threads, [&](int b, int e, int) {
    try {
      for (int i = b; i < e; ++i)
        rs[size_t(i)] = eval_sample(model, samples[size_t(i)], smat, sigma2, eta_p);
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!err) err = std::current_exception();
    }
  });
  if (err) std::rethrow_exception(err);
  MetricsRecord rec = reduce_records(rs);
  rec.split = "test";
  rec.wall_ms = now_ms() - t0;
  return rec;
}

// ---- training state persistence --------------------------------------------

namespace {

constexpr char kStateMagic[4] = {'R', 'N', 'S', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("training state file truncated");
  return v;
}
void put_vec(std::ostream& os, const RVec& v) {
  put<std::int64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
}
RVec get_vec(std::istream& is) {
  auto n = get<std::int64_t>(is);
  if (n < 0 || n > (1ll << 32)) throw Error("training state file corrupt");
  RVec v(n);
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(double)));
  if (!is) throw Error("training state file truncated");
  return v;
}

struct TrainerState {
  int epoch = 0;  // last completed epoch
  double feature_scale = 1.0;
  Adam adam{0, 1e-3};
  RVec params;
  bool has_best = false;
  bool best_qualified = false;
  double best_power = 0.0, best_qd = 0.0;
  RVec best_params;
  std::vector<MetricsRecord> metrics;
};

void save_state(const TrainerState& st, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kStateMagic, 4);
  put<std::uint16_t>(os, 1);
  put<std::int32_t>(os, st.epoch);
  put<double>(os, st.feature_scale);
  put<double>(os, st.adam.lr);
  put<std::int64_t>(os, st.adam.t);
  put_vec(os, st.adam.m);
  put_vec(os, st.adam.v);
  put_vec(os, st.params);
  put<std::uint8_t>(os, st.has_best);
  put<std::uint8_t>(os, st.best_qualified);
  put<double>(os, st.best_power);
  put<double>(os, st.best_qd);
  put_vec(os, st.best_params);
  put<std::uint32_t>(os, std::uint32_t(st.metrics.size()));
  for (const auto& r : st.metrics) {
    put<std::int32_t>(os, r.epoch);
    put<std::uint8_t>(os, std::uint8_t(r.split.size()));
    os.write(r.split.data(), std::streamsize(r.split.size()));
    put<double>(os, r.mean_loss);
    put<double>(os, r.mean_power);
    put<double>(os, r.qd_ratio);
    put<std::int64_t>(os, r.wall_ms);
  }
  if (!os) throw Error("write error on '" + path + "'");
}

TrainerState load_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kStateMagic, 4) != 0)
    throw Error("'" + path + "' is not a training state file");
  if (get<std::uint16_t>(is) != 1) throw Error("unsupported training state version");
  TrainerState st;
  st.epoch = get<std::int32_t>(is);
  st.feature_scale = get<double>(is);
  double lr = get<double>(is);
  long t = get<std::int64_t>(is);
  RVec m = get_vec(is), v = get_vec(is);
  st.adam = Adam(m.size(), lr);
  st.adam.t = t;
  st.adam.m = m;
  st.adam.v = v;
  st.params = get_vec(is);
  st.has_best = get<std::uint8_t>(is);
  st.best_qualified = get<std::uint8_t>(is);
  st.best_power = get<double>(is);
  st.best_qd = get<double>(is);
  st.best_params = get_vec(is);
  auto nrec = get<std::uint32_t>(is);
  if (nrec > 1u << 24) throw Error("training state file corrupt");
  for (std::uint32_t i = 0; i < nrec; ++i) {
    MetricsRecord r;
    r.epoch = get<std::int32_t>(is);
    auto len = get<std::uint8_t>(is);
    r.split.resize(len);
    is.read(r.split.data(), len);
    r.mean_loss = get<double>(is);
    r.mean_power = get<double>(is);
    r.qd_ratio = get<double>(is);
    r.wall_ms = get<std::int64_t>(is);
    st.metrics.push_back(std::move(r));
  }
  return st;
}

}  // namespace

TrainResult train(net::RISnetModel model, const data::Dataset& ds, const CMat& smat,
                  const TrainingConfig& cfg, const std::string& state_path, std::ostream* log) {
  cfg.validate();
  const double sigma2 = ds.scenario.noise_power;
  const double eta_p = cfg.penalty_weight;
  const int n_train = int(ds.train.size());
  if (cfg.epochs > 0 && n_train == 0) throw ConfigError("training requested on an empty dataset");

  TrainerState st;
  bool resumed = false;
  if (!state_path.empty() && std::ifstream(state_path).good()) {
    st = load_state(state_path);
    if (st.params.size() != model.param_count())
      throw Error("training state does not match the model architecture");
    model.feature_scale = st.feature_scale;
    model.unflatten(st.params);
    resumed = true;
  } else {
    model.feature_scale = compute_feature_scale(ds.train);
    st.feature_scale = model.feature_scale;
    st.adam = Adam(model.param_count(), cfg.learning_rate);
    st.params = model.flatten();
  }

  auto update_best = [&](const MetricsRecord& test, const RVec& params) {
    bool qualified = test.qd_ratio >= kBestQdGate;
    bool better;
    if (!st.has_best)
      better = true;
    else if (qualified != st.best_qualified)
      better = qualified;
    else if (qualified)
      better = test.mean_power < st.best_power;
    else
      better = test.qd_ratio > st.best_qd;
    if (better) {
      st.has_best = true;
      st.best_qualified = qualified;
      st.best_power = test.mean_power;
      st.best_qd = test.qd_ratio;
      st.best_params = params;
    }
  };

  if (!resumed) {
    MetricsRecord rec = evaluate(model, ds.test, smat, sigma2, eta_p, cfg.threads);
    rec.epoch = 0;
    if (!cfg.record_timing) rec.wall_ms = 0;
    st.metrics.push_back(rec);
    update_best(rec, st.params);
    if (!state_path.empty()) save_state(st, state_path);
    if (log) *log << to_csv_row(rec) << '\n';
  }

  std::vector<double> test_power;
  for (const auto& r : st.metrics)
    if (r.split == "test" && r.epoch > 0) test_power.push_back(r.mean_power);

  RVec params = st.params;
  std::vector<int> order(static_cast<size_t>(n_train), 0);

  for (int epoch = st.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    long t0 = now_ms();
    // Linear learning-rate decay across the epoch range (recomputed from the
    // epoch index, so resumed runs follow the same schedule).
    double frac = cfg.epochs > 1 ? double(epoch - 1) / double(cfg.epochs - 1) : 0.0;
    st.adam.lr = cfg.learning_rate + frac * (cfg.learning_rate_final - cfg.learning_rate);
    // The permutation is a function of the epoch index alone (shuffled from
    // the identity every epoch), so resumed runs visit identical batches.
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5f0f000ull + std::uint64_t(epoch)));
    for (int i = n_train - 1; i > 0; --i)
      std::swap(order[size_t(i)], order[size_t(shuffle_rng.uniform_int(0, i))]);

    std::vector<SampleResult> epoch_results(static_cast<size_t>(n_train), SampleResult{});
    for (int b0 = 0; b0 < n_train; b0 += cfg.batch_size) {
      int bn = std::min(cfg.batch_size, n_train - b0);
      std::vector<RVec> chunk_grads(size_t(std::max(1, std::min(cfg.threads, bn))));
      std::exception_ptr err;
      std::mutex err_mu;
      parallel_chunks(bn, cfg.threads, [&](int b, int e, int slot) {
        try {
          RVec acc = RVec::Zero(params.size());
          RVec g;
          for (int i = b; i < e; ++i) {
            const auto& sample = ds.train[size_t(order[size_t(b0 + i)])];
            SampleResult r = loss_and_grad(model, sample, smat, sigma2, eta_p, g);
            if (!std::isfinite(r.loss) || !g.allFinite())
              throw Error("non-finite loss at sample seed " + std::to_string(sample.seed));
            acc += g;
            epoch_results[size_t(order[size_t(b0 + i)])] = r;
          }
          chunk_grads[size_t(slot)] = std::move(acc);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      });
      if (err) std::rethrow_exception(err);
      RVec grad = RVec::Zero(params.size());
      for (const auto& g : chunk_grads)
        if (g.size()) grad += g;
      grad /= double(bn);
      if (cfg.grad_clip > 0) {
        double gn = grad.norm();
        if (gn > cfg.grad_clip) grad *= cfg.grad_clip / gn;
      }
      st.adam.step(params, grad);
      model.unflatten(params);
    }

    MetricsRecord train_rec = reduce_records(epoch_results);
    train_rec.epoch = epoch;
    train_rec.split = "train";
    train_rec.wall_ms = cfg.record_timing ? now_ms() - t0 : 0;
    st.metrics.push_back(train_rec);
    if (log) *log << to_csv_row(train_rec) << '\n';

    MetricsRecord test_rec = evaluate(model, ds.test, smat, sigma2, eta_p, cfg.threads);
    test_rec.epoch = epoch;
    if (!cfg.record_timing) test_rec.wall_ms = 0;
    st.metrics.push_back(test_rec);
    if (log) *log << to_csv_row(test_rec) << '\n';

    st.epoch = epoch;
    st.params = params;
    update_best(test_rec, params);
    if (!state_path.empty()) save_state(st, state_path);

    // Early stop: the best test power inside the trailing window must improve
    // on the best before it by at least early_stop_rel.
    test_power.push_back(test_rec.mean_power);
    int w = cfg.early_stop_patience;
    if (int(test_power.size()) > w) {
      double before = *std::min_element(test_power.begin(), test_power.end() - w);
      double recent = *std::min_element(test_power.end() - w, test_power.end());
      if (before > 0.0 && (before - recent) / before < cfg.early_stop_rel) break;
    }
  }

  TrainResult out;
  out.metrics = st.metrics;
  out.last = model;
  out.best = model;
  if (st.has_best) out.best.unflatten(st.best_params);
  return out;
}

MetricsRecord baseline_random(std::span<const chan::ChannelSample> samples, const CMat& smat,
                              double sigma2, double eta_p, std::uint64_t seed) {
  long t0 = now_ms();
  Rng rng(derive_seed(seed, 0xba5e11e));
  std::vector<SampleResult> rs;
  rs.reserve(samples.size());
  for (const auto& s : samples) {
    RVec psi(s.g.cols());
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) = rng.uniform(0.0, 2.0 * M_PI);
    CMat c = chan::effective_channel(s.d, s.g, s.h, smat, psi);
    prec::OrderedProblem op = prec::order_users(c, s.r1, s.r2);
    prec::PrecodingResult res = prec::noma_precoder(op.c1, op.c2, op.g1, op.g2, sigma2);
    rs.push_back({res.v1.norm() + res.v2.norm() + eta_p * res.penalty, res.total_power,
                  res.penalty});
  }
  MetricsRecord rec = reduce_records(rs);
  rec.split = "random";
  rec.wall_ms = now_ms() - t0;
  return rec;
}

MetricsRecord baseline_direct_opt(std::span<const chan::ChannelSample> samples, const CMat& smat,
                                  double sigma2, double eta_p, int steps, double lr) {
  if (steps < 1) throw ConfigError("direct optimization needs steps >= 1");
  long t0 = now_ms();
  std::vector<SampleResult> rs;
  rs.reserve(samples.size());
  for (const auto& s : samples) {
    const int n = int(s.g.cols());
    RMat psi = RMat::Zero(n, 1);
    Adam adam(n, lr);
    double best_loss = std::numeric_limits<double>::infinity();
    SampleResult best;
    for (int it = 0; it < steps; ++it) {
      num::Tape t;
      num::Var pv = t.input(psi);
      num::Var c = chan::effective_channel_on_tape(t, pv, s.d, s.g, borrow(s.h), borrow(smat));
      prec::PrecoderPlan plan = prec::plan_precoding(t.cval(c), s.r1, s.r2, sigma2);
      num::Var loss = prec::loss_on_tape(t, c, plan, sigma2, eta_p);
      t.run_backward(loss);
      double lv = t.scalar(loss);
      if (!std::isfinite(lv))
        throw Error("non-finite loss at sample seed " + std::to_string(s.seed));
      if (lv < best_loss) {
        best_loss = lv;
        best = {lv, plan.solution.total_power, plan.solution.penalty};
      }
      RVec flat = psi.col(0);
      RVec g = t.grad(pv).col(0);
      adam.step(flat, g);
      psi.col(0) = flat;
    }
    rs.push_back(best);
  }
  MetricsRecord rec = reduce_records(rs);
  rec.split = "direct";
  rec.wall_ms = now_ms() - t0;
  return rec;
}

}  // namespace rn::train
