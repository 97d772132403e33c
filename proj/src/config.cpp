#include "risnoma/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rn::cfg {

namespace {

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return int(x);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool parse_onoff(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected on|off, got '" + v + "'");
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  training.validate();
  if (n_train < 0 || n_test < 0) throw ConfigError("n_train/n_test: must be >= 0");
  if (hidden_width < 1) throw ConfigError("hidden_width: must be >= 1");
  if (full_depth < 1) throw ConfigError("full_depth: must be >= 1");
  if (direct_opt_steps < 1) throw ConfigError("direct_opt_steps: must be >= 1");
  if (!(direct_opt_lr > 0)) throw ConfigError("direct_opt_lr: must be > 0");
  if (partial_csi && (scenario.ris_rows % 9 != 0 || scenario.ris_cols % 9 != 0))
    throw ConfigError("csi_mode: partial requires panel dimensions divisible by 9");
}

void apply_kv(RunConfig& c, const std::string& key, const std::string& value) {
  auto& sc = c.scenario;
  auto& tr = c.training;
  if (key == "bs_antennas") sc.bs_antennas = parse_int(key, value);
  else if (key == "ris_rows") sc.ris_rows = parse_int(key, value);
  else if (key == "ris_cols") sc.ris_cols = parse_int(key, value);
  else if (key == "carrier_wavelength") sc.carrier_wavelength = parse_double(key, value);
  else if (key == "bs_spacing") sc.bs_spacing = parse_double(key, value);
  else if (key == "ris_spacing") sc.ris_spacing = parse_double(key, value);
  else if (key == "noise_power") sc.noise_power = parse_double(key, value);
  else if (key == "coupling_strength") sc.coupling_strength = parse_double(key, value);
  else if (key == "direct_path_attenuation_db")
    sc.direct_path_attenuation_db = parse_double(key, value);
  else if (key == "path_count_min") sc.path_count_min = parse_int(key, value);
  else if (key == "path_count_max") sc.path_count_max = parse_int(key, value);
  else if (key == "rate_min") sc.rate_min = parse_double(key, value);
  else if (key == "rate_max") sc.rate_max = parse_double(key, value);
  else if (key == "scatter_power_ratio") sc.scatter_power_ratio = parse_double(key, value);
  else if (key == "iid_entry_power") sc.iid_entry_power = parse_double(key, value);
  else if (key == "model_kind") c.model_kind = chan::model_kind_from_string(value);
  else if (key == "csi_mode") {
    if (value == "full") c.partial_csi = false;
    else if (value == "partial") c.partial_csi = true;
    else throw ConfigError("csi_mode: expected full|partial, got '" + value + "'");
  }
  else if (key == "mutual_coupling") c.mutual_coupling = parse_onoff(key, value);
  else if (key == "learning_rate") tr.learning_rate = parse_double(key, value);
  else if (key == "learning_rate_final") tr.learning_rate_final = parse_double(key, value);
  else if (key == "batch_size") tr.batch_size = parse_int(key, value);
  else if (key == "penalty_weight") tr.penalty_weight = parse_double(key, value);
  else if (key == "grad_clip") tr.grad_clip = parse_double(key, value);
  else if (key == "epochs") tr.epochs = parse_int(key, value);
  else if (key == "seed") tr.seed = parse_u64(key, value);
  else if (key == "threads") tr.threads = parse_int(key, value);
  else if (key == "record_timing") tr.record_timing = parse_onoff(key, value);
  else if (key == "early_stop_rel") tr.early_stop_rel = parse_double(key, value);
  else if (key == "early_stop_patience") tr.early_stop_patience = parse_int(key, value);
  else if (key == "n_train") c.n_train = parse_int(key, value);
  else if (key == "n_test") c.n_test = parse_int(key, value);
  else if (key == "hidden_width") c.hidden_width = parse_int(key, value);
  else if (key == "full_depth") c.full_depth = parse_int(key, value);
  else if (key == "direct_opt_steps") c.direct_opt_steps = parse_int(key, value);
  else if (key == "direct_opt_lr") c.direct_opt_lr = parse_double(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_file(RunConfig& c, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_kv(c, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

RunConfig preset(const std::string& name) {
  RunConfig c;  // struct defaults are the paper-scale values
  if (name == "paper" || name.empty()) {
    c.training.epochs = 60;
    return c;
  }
  if (name == "desk") {
    c.scenario.ris_rows = 18;
    c.scenario.ris_cols = 18;
    c.scenario.noise_power = 1e-4;
    c.n_train = 2048;
    c.n_test = 512;
    c.training.batch_size = 64;
    c.training.learning_rate = 3e-3;
    c.training.learning_rate_final = 3e-4;
    c.training.epochs = 100;
    c.hidden_width = 24;
    c.full_depth = 3;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk|paper)");
}

std::string echo(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& sc = c.scenario;
  const auto& tr = c.training;
  os << "bs_antennas=" << sc.bs_antennas << '\n'
     << "ris_rows=" << sc.ris_rows << '\n'
     << "ris_cols=" << sc.ris_cols << '\n'
     << "carrier_wavelength=" << sc.carrier_wavelength << '\n'
     << "bs_spacing=" << sc.bs_spacing << '\n'
     << "ris_spacing=" << sc.ris_spacing << '\n'
     << "noise_power=" << sc.noise_power << '\n'
     << "coupling_strength=" << sc.coupling_strength << '\n'
     << "direct_path_attenuation_db=" << sc.direct_path_attenuation_db << '\n'
     << "path_count_min=" << sc.path_count_min << '\n'
     << "path_count_max=" << sc.path_count_max << '\n'
     << "rate_min=" << sc.rate_min << '\n'
     << "rate_max=" << sc.rate_max << '\n'
     << "scatter_power_ratio=" << sc.scatter_power_ratio << '\n'
     << "iid_entry_power=" << sc.iid_entry_power << '\n'
     << "model_kind=" << chan::to_string(c.model_kind) << '\n'
     << "csi_mode=" << (c.partial_csi ? "partial" : "full") << '\n'
     << "mutual_coupling=" << (c.mutual_coupling ? "on" : "off") << '\n'
     << "learning_rate=" << tr.learning_rate << '\n'
     << "learning_rate_final=" << tr.learning_rate_final << '\n'
     << "batch_size=" << tr.batch_size << '\n'
     << "penalty_weight=" << tr.penalty_weight << '\n'
     << "grad_clip=" << tr.grad_clip << '\n'
     << "epochs=" << tr.epochs << '\n'
     << "seed=" << tr.seed << '\n'
     << "threads=" << tr.threads << '\n'
     << "record_timing=" << (tr.record_timing ? "on" : "off") << '\n'
     << "early_stop_rel=" << tr.early_stop_rel << '\n'
     << "early_stop_patience=" << tr.early_stop_patience << '\n'
     << "n_train=" << c.n_train << '\n'
     << "n_test=" << c.n_test << '\n'
     << "hidden_width=" << c.hidden_width << '\n'
     << "full_depth=" << c.full_depth << '\n'
     << "direct_opt_steps=" << c.direct_opt_steps << '\n'
     << "direct_opt_lr=" << c.direct_opt_lr << '\n';
  return os.str();
}

}  // namespace rn::cfg
