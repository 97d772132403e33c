#include "risnoma/dataset.hpp"

#include <cstring>
#include <fstream>

namespace rn::data {

namespace {

constexpr char kMagic[4] = {'R', 'I', 'S', 'N'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint64_t kTestStreamBase = 1ull << 20;

// All scalar writers assume a little-endian host (checked once below).
void check_endianness() {
  static const bool little = [] {
    std::uint32_t x = 1;
    char c;
    std::memcpy(&c, &x, 1);
    return c == 1;
  }();
  if (!little) throw Error("dataset format requires a little-endian host");
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("dataset file truncated");
  return v;
}

void put_cmat(std::ostream& os, const CMat& m) {
  put<std::uint32_t>(os, std::uint32_t(m.rows()));
  put<std::uint32_t>(os, std::uint32_t(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      put<double>(os, m(i, j).real());
      put<double>(os, m(i, j).imag());
    }
}

CMat get_cmat(std::istream& is) {
  auto rows = get<std::uint32_t>(is);
  auto cols = get<std::uint32_t>(is);
  if (rows > 1u << 20 || cols > 1u << 20) throw Error("dataset file corrupt: absurd matrix size");
  CMat m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      double re = get<double>(is);
      double im = get<double>(is);
      m(i, j) = cd(re, im);
    }
  return m;
}

}  // namespace

Dataset generate_dataset(const chan::ScenarioConfig& sc, chan::ModelKind kind,
                         std::uint64_t master_seed, int n_train, int n_test) {
  sc.validate();
  if (n_train < 0 || n_test < 0) throw ConfigError("sample counts must be >= 0");
  Dataset ds;
  ds.scenario = sc;
  ds.kind = kind;
  ds.master_seed = master_seed;
  chan::Scene scene = chan::build_scene(sc, master_seed);
  ds.train.reserve(size_t(n_train));
  ds.test.reserve(size_t(n_test));
  for (int k = 0; k < n_train; ++k)
    ds.train.push_back(chan::sample_channels(sc, scene, kind, derive_seed(master_seed, k)));
  for (int k = 0; k < n_test; ++k)
    ds.test.push_back(
        chan::sample_channels(sc, scene, kind, derive_seed(master_seed, kTestStreamBase + k)));
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  check_endianness();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  const auto& sc = ds.scenario;
  put<std::int32_t>(os, sc.bs_antennas);
  put<std::int32_t>(os, sc.ris_rows);
  put<std::int32_t>(os, sc.ris_cols);
  put<double>(os, sc.carrier_wavelength);
  put<double>(os, sc.bs_spacing);
  put<double>(os, sc.ris_spacing);
  put<double>(os, sc.noise_power);
  put<double>(os, sc.coupling_strength);
  put<double>(os, sc.direct_path_attenuation_db);
  put<std::int32_t>(os, sc.path_count_min);
  put<std::int32_t>(os, sc.path_count_max);
  put<double>(os, sc.rate_min);
  put<double>(os, sc.rate_max);
  put<double>(os, sc.scatter_power_ratio);
  put<double>(os, sc.iid_entry_power);
  put<std::uint8_t>(os, std::uint8_t(ds.kind));
  put<std::uint64_t>(os, ds.master_seed);
  put<std::uint32_t>(os, std::uint32_t(ds.train.size()));
  put<std::uint32_t>(os, std::uint32_t(ds.test.size()));
  auto put_sample = [&](const chan::ChannelSample& s) {
    put<std::uint64_t>(os, s.seed);
    put<double>(os, s.r1);
    put<double>(os, s.r2);
    put_cmat(os, s.h);
    put_cmat(os, s.g);
    put_cmat(os, s.d);
    put_cmat(os, s.j);
  };
  for (const auto& s : ds.train) put_sample(s);
  for (const auto& s : ds.test) put_sample(s);
  if (!os) throw Error("write error on '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  check_endianness();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("'" + path + "' is not a dataset file (bad magic)");
  auto version = get<std::uint16_t>(is);
  if (version != kVersion)
    throw Error("unsupported dataset format version " + std::to_string(version));
  Dataset ds;
  auto& sc = ds.scenario;
  sc.bs_antennas = get<std::int32_t>(is);
  sc.ris_rows = get<std::int32_t>(is);
  sc.ris_cols = get<std::int32_t>(is);
  sc.carrier_wavelength = get<double>(is);
  sc.bs_spacing = get<double>(is);
  sc.ris_spacing = get<double>(is);
  sc.noise_power = get<double>(is);
  sc.coupling_strength = get<double>(is);
  sc.direct_path_attenuation_db = get<double>(is);
  sc.path_count_min = get<std::int32_t>(is);
  sc.path_count_max = get<std::int32_t>(is);
  sc.rate_min = get<double>(is);
  sc.rate_max = get<double>(is);
  sc.scatter_power_ratio = get<double>(is);
  sc.iid_entry_power = get<double>(is);
  sc.validate();
  auto kind_raw = get<std::uint8_t>(is);
  if (kind_raw > 2) throw Error("dataset file corrupt: unknown model kind");
  ds.kind = chan::ModelKind(kind_raw);
  ds.master_seed = get<std::uint64_t>(is);
  auto n_train = get<std::uint32_t>(is);
  auto n_test = get<std::uint32_t>(is);
  auto get_sample = [&] {
    chan::ChannelSample s;
    s.kind = ds.kind;
    s.seed = get<std::uint64_t>(is);
    s.r1 = get<double>(is);
    s.r2 = get<double>(is);
    s.h = get_cmat(is);
    s.g = get_cmat(is);
    s.d = get_cmat(is);
    s.j = get_cmat(is);
    return s;
  };
  ds.train.reserve(n_train);
  ds.test.reserve(n_test);
  for (std::uint32_t k = 0; k < n_train; ++k) ds.train.push_back(get_sample());
  for (std::uint32_t k = 0; k < n_test; ++k) ds.test.push_back(get_sample());
  return ds;
}

}  // namespace rn::data
