// Run configuration, dataset CSV, surrogate checkpoints, result documents and plot emission.
#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exoplore/domain.hpp"
#include "exoplore/gait_generator.hpp"
#include "exoplore/metrics.hpp"
#include "exoplore/optimizer.hpp"
#include "exoplore/surrogate.hpp"

namespace exoplore {

using json = nlohmann::ordered_json;

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// run configuration

struct PwsSettings {
  std::size_t n_length = 12;
  std::size_t n_freq = 12;
  std::size_t rollouts_per_point = 5;
  double v_real = 1.25;
  std::vector<std::pair<double, double>> candidates{{1.0, 1.0}, {1.5, 1.0}, {2.0, 1.0}};
};

struct LandscapeSettings {
  GaitParams gait{0.6, 2.0};
  double severity = 0.0;
  std::size_t n_kappa = 43;
  std::size_t n_delay = 51;
};

/// Input files for commands that consume earlier artifacts; empty means "<output_dir>/default".
struct InputPaths {
  std::string dataset;
  std::string checkpoint;
  std::string sim_series;
  std::string ref_series;
};

struct RunConfig {
  GeneratorConfig generator = default_generator_config();
  MEEParams mee;
  PathologyKind pathology = PathologyKind::none;
  SampleSpace space;
  std::size_t samples = 20000;
  SurrogateConfig surrogate;
  OptimizerConfig optimizer;
  ControlBox box;
  std::vector<double> speeds_kmh{2.0, 3.0, 4.0, 5.0};  // used when `gaits` is empty
  std::vector<GaitParams> gaits;
  double severity = 0.0;
  PwsSettings pws;
  LandscapeSettings landscape;
  InputPaths inputs;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string output_dir = "out";
};

namespace io_detail {

template <class E>
struct EnumNames;

#define EXOPLORE_ENUM_NAMES(E, ...)                                         \
  template <>                                                               \
  struct EnumNames<E> {                                                     \
    static constexpr std::pair<E, std::string_view> table[] = {__VA_ARGS__}; \
  };

EXOPLORE_ENUM_NAMES(GeneratorMode, {GeneratorMode::physiological, "physiological"},
                    {GeneratorMode::planted_bowl, "planted_bowl"})
EXOPLORE_ENUM_NAMES(PathologyKind, {PathologyKind::none, "none"},
                    {PathologyKind::calcaneus, "calcaneus"}, {PathologyKind::footdrop, "footdrop"},
                    {PathologyKind::waddling, "waddling"}, {PathologyKind::equinus, "equinus"},
                    {PathologyKind::crouch, "crouch"})
EXOPLORE_ENUM_NAMES(Joint, {Joint::hip, "hip"}, {Joint::knee, "knee"}, {Joint::ankle, "ankle"})
EXOPLORE_ENUM_NAMES(Side, {Side::left, "left"}, {Side::right, "right"})
EXOPLORE_ENUM_NAMES(Activation, {Activation::tanh, "tanh"}, {Activation::identity, "identity"})
EXOPLORE_ENUM_NAMES(RegressionLoss, {RegressionLoss::huber, "huber"},
                    {RegressionLoss::squared, "squared"})
EXOPLORE_ENUM_NAMES(PenaltyMode, {PenaltyMode::analytic, "analytic"},
                    {PenaltyMode::finite_difference, "finite_difference"})
EXOPLORE_ENUM_NAMES(TrainOptimizer, {TrainOptimizer::adam, "adam"},
                    {TrainOptimizer::sgd_momentum, "sgd_momentum"})
#undef EXOPLORE_ENUM_NAMES

template <class E>
concept NamedEnum = requires { EnumNames<E>::table; };

template <NamedEnum E>
std::string enum_name(E e) {
  for (const auto& [v, n] : EnumNames<E>::table)
    if (v == e) return std::string(n);
  return "?";
}

// Field lists shared by the reader and the writer.
template <class V> void fields(V& v, PlantedBowl& b) {
  v("base", b.base); v("kappa_weight", b.kappa_weight); v("delay_weight", b.delay_weight);
  v("kappa_star", b.kappa_star); v("delay_star", b.delay_star); v("noise_std", b.noise_std);
}
template <class V> void fields(V& v, PathologyModel& m) {
  v("weak_joint", m.weak_joint); v("weakness_remaining", m.weakness_remaining);
  v("hip_contracture", m.hip_contracture); v("ankle_contracture", m.ankle_contracture);
  v("hip_demand_gain", m.hip_demand_gain); v("activation_baseline", m.activation_baseline);
  v("assist_destabilizes", m.assist_destabilizes); v("stabilization_gain", m.stabilization_gain);
  v("burst_scale", m.burst_scale);
}
template <class V> void fields(V& v, LineMuscle& m) {
  v("name", m.name); v("mass", m.mass); v("torque_capacity", m.torque_capacity);
  v("joint", m.joint); v("side", m.side);
}
template <class V> void fields(V& v, MuscleSet& m) { v("muscles", m.muscles); v("groups", m.groups); }
template <class V> void fields(V& v, GeneratorConfig& c) {
  v("mode", c.mode); v("leg_length", c.leg_length); v("hip_offset", c.hip_offset);
  v("adaptation_gain", c.adaptation_gain); v("cycle_jitter_std", c.cycle_jitter_std);
  v("measurement_noise_std", c.measurement_noise_std); v("inertia", c.inertia);
  v("damping", c.damping); v("leg_mass", c.leg_mass); v("com_length", c.com_length);
  v("gravity", c.gravity); v("knee_gain", c.knee_gain); v("ankle_gain", c.ankle_gain);
  v("reference_frequency", c.reference_frequency);
  v("activation_baseline", c.activation_baseline); v("control_dt", c.control_dt);
  v("cutoff_hz", c.cutoff_hz); v("sensor_sign", c.sensor_sign); v("total_cycles", c.total_cycles);
  v("discarded_cycles", c.discarded_cycles); v("bowl", c.bowl); v("pathologies", c.pathologies);
  v("muscles", c.muscles);
}
template <class V> void fields(V& v, MEEParams& m) {
  v("alpha", m.alpha); v("beta", m.beta); v("basal_rate", m.basal_rate);
}
template <class V> void fields(V& v, SampleSpace& s) {
  v("step_length", s.step_length); v("step_frequency", s.step_frequency);
  v("gain_kappa", s.gain_kappa); v("delay_dt", s.delay_dt); v("severity", s.severity);
}
template <class V> void fields(V& v, SurrogateConfig& c) {
  v("hidden", c.hidden); v("epochs", c.epochs); v("lr_init", c.lr_init); v("lr_end", c.lr_end);
  v("huber_delta", c.huber_delta); v("lambda_grad", c.lambda_grad); v("lambda_l1", c.lambda_l1);
  v("lambda_l2", c.lambda_l2); v("batch_size", c.batch_size); v("loss", c.loss);
  v("penalty_mode", c.penalty_mode); v("optimizer", c.optimizer); v("momentum", c.momentum);
  v("fd_step", c.fd_step);
}
template <class V> void fields(V& v, OptimizerConfig& c) {
  v("lambda1", c.lambda1); v("lambda2", c.lambda2); v("starts", c.starts);
  v("max_iters", c.max_iters); v("smoothing", c.smoothing);
}
template <class V> void fields(V& v, ControlBox& b) { v("kappa", b.kappa); v("delay", b.delay); }
template <class V> void fields(V& v, GaitParams& g) {
  v("step_length", g.step_length); v("step_frequency", g.step_frequency);
}
template <class V> void fields(V& v, PwsSettings& p) {
  v("n_length", p.n_length); v("n_freq", p.n_freq); v("rollouts_per_point", p.rollouts_per_point);
  v("v_real", p.v_real); v("candidates", p.candidates);
}
template <class V> void fields(V& v, LandscapeSettings& l) {
  v("gait", l.gait); v("severity", l.severity); v("n_kappa", l.n_kappa); v("n_delay", l.n_delay);
}
template <class V> void fields(V& v, InputPaths& p) {
  v("dataset", p.dataset); v("checkpoint", p.checkpoint); v("sim_series", p.sim_series);
  v("ref_series", p.ref_series);
}
template <class V> void fields(V& v, RunConfig& c) {
  v("seed", c.seed); v("threads", c.threads); v("output_dir", c.output_dir);
  v("pathology", c.pathology); v("severity", c.severity); v("samples", c.samples);
  v("space", c.space); v("speeds_kmh", c.speeds_kmh); v("gaits", c.gaits); v("mee", c.mee);
  v("generator", c.generator); v("surrogate", c.surrogate); v("optimizer", c.optimizer);
  v("box", c.box); v("pws", c.pws); v("landscape", c.landscape); v("inputs", c.inputs);
}

// ----- writer
json to_value(const auto& x);

struct Writer {
  json& out;
  template <class T>
  void operator()(const char* key, const T& x) { out[key] = to_value(x); }
};

template <class T>
json to_value_impl(const T& x) {
  if constexpr (NamedEnum<T>) {
    return enum_name(x);
  } else if constexpr (std::is_same_v<T, Interval>) {
    return json::array({x.lo, x.hi});
  } else if constexpr (std::is_same_v<T, std::array<PathologyModel, 6>>) {
    json o = json::object();
    for (auto k : all_pathologies) o[std::string(to_string(k))] = to_value(x[static_cast<std::size_t>(k)]);
    return o;
  } else if constexpr (requires { x.first; x.second; }) {
    return json::array({to_value(x.first), to_value(x.second)});
  } else if constexpr (requires { x.begin(); x.size(); } && !std::is_same_v<T, std::string>) {
    json a = json::array();
    for (const auto& e : x) a.push_back(to_value(e));
    return a;
  } else if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
    return x;
  } else {
    json o = json::object();
    Writer w{o};
    fields(w, const_cast<T&>(x));
    return o;
  }
}

inline json to_value(const auto& x) { return to_value_impl(x); }

// ----- reader
struct Reader;
template <class T>
void from_value(const json& j, T& x, const std::string& path);

struct Reader {
  const json& in;
  std::string path;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& x) {
    seen.insert(key);
    if (in.contains(key)) from_value(in.at(key), x, path + "." + key);
  }

  void reject_unknown() const {
    for (auto it = in.begin(); it != in.end(); ++it)
      if (!seen.count(it.key())) throw ConfigError(path + "." + it.key() + ": unknown key");
  }
};

template <class T>
void from_value(const json& j, T& x, const std::string& path) {
  auto fail = [&](const std::string& what) { throw ConfigError(path + ": " + what); };
  if constexpr (NamedEnum<T>) {
    if (!j.is_string()) fail("expected a string");
    const auto s = j.get<std::string>();
    for (const auto& [v, n] : EnumNames<T>::table)
      if (n == s) {
        x = v;
        return;
      }
    fail("unknown value '" + s + "'");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) fail("expected a boolean");
    x = j.get<bool>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) fail("expected a number");
    x = j.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) fail("expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (j.is_number_unsigned()) {
        x = j.get<T>();
      } else {
        if (j.get<std::int64_t>() < 0) fail("expected a non-negative integer");
        x = static_cast<T>(j.get<std::int64_t>());
      }
    } else {
      x = j.get<T>();
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) fail("expected a string");
    x = j.get<std::string>();
  } else if constexpr (std::is_same_v<T, Interval>) {
    if (!j.is_array() || j.size() != 2) fail("expected [lo, hi]");
    from_value(j[0], x.lo, path + "[0]");
    from_value(j[1], x.hi, path + "[1]");
    if (!(x.lo <= x.hi)) fail("lo must not exceed hi");
  } else if constexpr (std::is_same_v<T, std::array<PathologyModel, 6>>) {
    if (!j.is_object()) fail("expected an object keyed by pathology");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto k = pathology_from_string(it.key());
      if (!k) fail("unknown pathology '" + it.key() + "'");
      from_value(it.value(), x[static_cast<std::size_t>(*k)], path + "." + it.key());
    }
  } else if constexpr (requires { x.first; x.second; }) {
    if (!j.is_array() || j.size() != 2) fail("expected a pair");
    from_value(j[0], x.first, path + "[0]");
    from_value(j[1], x.second, path + "[1]");
  } else if constexpr (requires { x.push_back(std::declval<typename T::value_type>()); }) {
    if (!j.is_array()) fail("expected an array");
    x.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      typename T::value_type e{};
      from_value(j[i], e, path + "[" + std::to_string(i) + "]");
      x.push_back(std::move(e));
    }
  } else {
    if (!j.is_object()) fail("expected an object");
    Reader r{j, path, {}};
    fields(r, x);
    r.reject_unknown();
  }
}

}  // namespace io_detail

inline json config_to_json(const RunConfig& cfg) { return io_detail::to_value(cfg); }

/// Missing keys keep their defaults except `seed`, which must be given explicitly.
inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("seed")) throw ConfigError("config.seed: required");
  RunConfig cfg;
  io_detail::from_value(j, cfg, "config");
  if (auto e = validate(cfg.generator)) throw ConfigError(std::string("config.generator: ") + e->what());
  if (auto e = validate(cfg.mee)) throw ConfigError(std::string("config.mee: ") + e->what());
  for (const auto& g : cfg.gaits)
    if (auto e = validate(g)) throw ConfigError(std::string("config.gaits: ") + e->what());
  for (const Interval& iv : cfg.space.as_vector())
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw ConfigError("config.space: non-finite bound");
  if (cfg.optimizer.lambda1 < 0.0 || cfg.optimizer.lambda2 < 0.0)
    throw ConfigError("config.optimizer: lambdas must be non-negative");
  return cfg;
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed for " + path);
}

inline RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// dataset CSV

inline constexpr std::array<std::string_view, 8> dataset_columns{
    "step_length_m", "step_freq_hz", "kappa_nm", "delta_t_s",
    "severity",      "pathology",    "seed",     "cot_j_per_m"};

/// Shortest decimal form that reads back to the same double, capped at 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string dataset_to_csv(const std::vector<DatasetRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < dataset_columns.size(); ++i) {
    if (i) out += ',';
    out += dataset_columns[i];
  }
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.step_length) + ',' + format_double(r.step_frequency) + ',' +
           format_double(r.kappa) + ',' + format_double(r.delta_t) + ',' +
           format_double(r.severity) + ',' + std::string(to_string(r.pathology)) + ',' +
           std::to_string(r.seed) + ',' + format_double(r.cot) + '\n';
  }
  return out;
}

namespace io_detail {
inline std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    cells.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw SchemaError(where + ": not a number '" + s + "'");
  return v;
}
}  // namespace io_detail

/// Strict reader: the header must list exactly the dataset columns in order.
inline std::vector<DatasetRow> dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("dataset: missing header");
  const auto header = io_detail::split_csv_line(line);
  for (auto col : dataset_columns)
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw SchemaError("dataset: missing column '" + std::string(col) + "'");
  for (const auto& h : header)
    if (std::find(dataset_columns.begin(), dataset_columns.end(), h) == dataset_columns.end())
      throw SchemaError("dataset: unknown column '" + h + "'");
  for (std::size_t i = 0; i < dataset_columns.size(); ++i)
    if (header.size() != dataset_columns.size() || header[i] != dataset_columns[i])
      throw SchemaError("dataset: column '" + std::string(dataset_columns[i]) +
                        "' out of order or duplicated");

  std::vector<DatasetRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto c = io_detail::split_csv_line(line);
    const std::string where = "dataset row " + std::to_string(line_no);
    if (c.size() != dataset_columns.size())
      throw SchemaError(where + ": expected " + std::to_string(dataset_columns.size()) + " cells, got " +
                        std::to_string(c.size()));
    auto num = [&](std::size_t k) {
      return io_detail::parse_double(c[k], where + " column '" + std::string(dataset_columns[k]) + "'");
    };
    DatasetRow r;
    r.step_length = num(0);
    r.step_frequency = num(1);
    r.kappa = num(2);
    r.delta_t = num(3);
    r.severity = num(4);
    const auto kind = pathology_from_string(c[5]);
    if (!kind) throw SchemaError(where + " column 'pathology': unknown value '" + c[5] + "'");
    r.pathology = *kind;
    const auto [p, ec] = std::from_chars(c[6].data(), c[6].data() + c[6].size(), r.seed);
    if (ec != std::errc() || p != c[6].data() + c[6].size())
      throw SchemaError(where + " column 'seed': not an unsigned integer '" + c[6] + "'");
    r.cot = num(7);
    rows.push_back(r);
  }
  return rows;
}

inline void write_dataset(const std::vector<DatasetRow>& rows, const std::string& path) {
  write_text(path, dataset_to_csv(rows));
}

inline std::vector<DatasetRow> read_dataset(const std::string& path) {
  return dataset_from_csv(read_text(path));
}

// ---------------------------------------------------------------------------
// surrogate checkpoint

inline json checkpoint_to_json(const SurrogateNet& net) {
  json j;
  j["format"] = "exoplore-surrogate-1";
  json sizes = json::array({net.mlp.input_dim()});
  json layers = json::array();
  for (const auto& l : net.mlp.layers) {
    sizes.push_back(l.outputs());
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    json b = json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) b.push_back(l.bias[r]);
    layers.push_back({{"activation", io_detail::enum_name(l.activation)},
                      {"weights_row_major", std::move(w)},
                      {"bias", std::move(b)}});
  }
  j["layer_sizes"] = std::move(sizes);
  j["layers"] = std::move(layers);
  j["normalization"] = {{"x_bounds", io_detail::to_value(net.norm.x_bounds)},
                        {"y_mean", net.norm.y_mean},
                        {"y_std", net.norm.y_std}};
  j["config"] = io_detail::to_value(net.config);
  j["seed"] = net.seed;
  j["final_loss"] = net.final_loss;
  return j;
}

inline SurrogateNet checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "exoplore-surrogate-1") throw SchemaError("checkpoint: unsupported format");
    SurrogateNet net;
    const auto& sizes = j.at("layer_sizes");
    const auto& layers = j.at("layers");
    if (sizes.size() != layers.size() + 1) throw SchemaError("checkpoint: layer count mismatch");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto in = sizes[k].get<Eigen::Index>(), out = sizes[k + 1].get<Eigen::Index>();
      const auto& lj = layers[k];
      DenseLayer l;
      io_detail::from_value(lj.at("activation"), l.activation, "checkpoint.layers.activation");
      const auto& w = lj.at("weights_row_major");
      const auto& b = lj.at("bias");
      if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
        throw SchemaError("checkpoint: layer " + std::to_string(k) + " has wrong parameter count");
      l.weight.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c)
          l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)].get<double>();
      l.bias.resize(out);
      for (Eigen::Index r = 0; r < out; ++r) l.bias[r] = b[static_cast<std::size_t>(r)].get<double>();
      net.mlp.layers.push_back(std::move(l));
    }
    const auto& nj = j.at("normalization");
    io_detail::from_value(nj.at("x_bounds"), net.norm.x_bounds, "checkpoint.normalization.x_bounds");
    net.norm.y_mean = nj.at("y_mean").get<double>();
    net.norm.y_std = nj.at("y_std").get<double>();
    io_detail::from_value(j.at("config"), net.config, "checkpoint.config");
    net.seed = j.at("seed").get<std::uint64_t>();
    net.final_loss = j.at("final_loss").get<double>();
    if (net.mlp.layers.empty() ||
        static_cast<std::size_t>(net.mlp.input_dim()) != net.norm.x_bounds.size())
      throw SchemaError("checkpoint: input dimension does not match normalization bounds");
    return net;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
}

inline void write_checkpoint(const SurrogateNet& net, const std::string& path) {
  write_text(path, dump_json(checkpoint_to_json(net)));
}

inline SurrogateNet read_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline std::string loss_curve_csv(const std::vector<double>& curve) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out += std::to_string(i) + ',' + format_double(curve[i]) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// result documents

inline json optimization_to_json(const OptimizationResult& r) {
  json per = json::array();
  for (const auto& s : r.per_speed)
    per.push_back({{"step_length_m", s.gait.step_length},
                   {"step_freq_hz", s.gait.step_frequency},
                   {"speed_m_per_s", speed_of(s.gait)},
                   {"kappa_nm", s.kappa},
                   {"delta_t_s", s.delta_t},
                   {"predicted_cot_j_per_m", s.predicted_cot}});
  return {{"per_speed", std::move(per)},
          {"objective", r.objective},
          {"severity", r.severity},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"starts_tried", r.starts_tried}};
}

inline json calibration_to_json(const CalibrationResult& c, double v_real) {
  json table = json::array();
  for (const auto& row : c.table)
    table.push_back({{"alpha", row.alpha}, {"beta", row.beta}, {"pws_m_per_s", row.pws}, {"abs_error", row.error}});
  return {{"v_real_m_per_s", v_real}, {"alpha_star", c.alpha_star}, {"beta_star", c.beta_star}, {"table", std::move(table)}};
}

/// Reads one numeric series: one value per line, or the first column of a CSV.
/// A non-numeric first line is treated as a header.
inline std::vector<double> read_series(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<double> out;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = io_detail::split_csv_line(line);
    if (cells.empty() || cells[0].empty()) continue;
    double v = 0.0;
    const auto& s = cells[0];
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      if (line_no == 1) continue;
      throw SchemaError(path + " line " + std::to_string(line_no) + ": not a number '" + s + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw SchemaError(path + ": no values");
  return out;
}

/// NRMSE, Pearson r and NDTW of `sim` against `ref`. `sim` is linearly resampled to the
/// reference length for the pointwise metrics. Metric failures become {"error": message}.
inline json compare_series(const std::vector<double>& sim, const std::vector<double>& ref) {
  const std::vector<double> aligned = sim.size() == ref.size() ? sim : resample_linear(sim, ref.size());
  auto guarded = [](auto&& fn) -> json {
    try {
      return fn();
    } catch (const ZeroVariance&) {
      return json{{"error", "zero variance"}};
    } catch (const ZeroRange&) {
      return json{{"error", "zero range"}};
    }
  };
  return {{"nrmse", guarded([&] { return json(nrmse(aligned, ref)); })},
          {"r", guarded([&] { return json(pearson_r(aligned, ref)); })},
          {"ndtw", guarded([&] { return json(ndtw(sim, ref)); })},
          {"sim_length", sim.size()},
          {"ref_length", ref.size()}};
}

struct Landscape {
  std::vector<double> kappa;
  std::vector<double> delay;
  Eigen::MatrixXd cot;  // rows follow kappa, columns follow delay
};

inline Landscape surrogate_landscape(const SurrogateNet& net, const LandscapeSettings& s,
                                     const ControlBox& box) {
  Landscape l;
  const Eigen::MatrixXd pts = uniform_grid({box.kappa, box.delay}, {s.n_kappa, s.n_delay});
  Eigen::MatrixXd rows(pts.rows(), 5);
  rows.col(0).setConstant(s.gait.step_length);
  rows.col(1).setConstant(s.gait.step_frequency);
  rows.col(2) = pts.col(0);
  rows.col(3) = pts.col(1);
  rows.col(4).setConstant(s.severity);
  const Eigen::VectorXd y = predict(net, rows);
  l.cot.resize(static_cast<Eigen::Index>(s.n_kappa), static_cast<Eigen::Index>(s.n_delay));
  for (std::size_t i = 0; i < s.n_kappa; ++i) {
    l.kappa.push_back(pts(static_cast<Eigen::Index>(i * s.n_delay), 0));
    for (std::size_t j = 0; j < s.n_delay; ++j)
      l.cot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          y[static_cast<Eigen::Index>(i * s.n_delay + j)];
  }
  for (std::size_t j = 0; j < s.n_delay; ++j) l.delay.push_back(pts(static_cast<Eigen::Index>(j), 1));
  return l;
}

inline std::string landscape_csv(const Landscape& l) {
  std::string out = "kappa_nm,delta_t_s,cot_j_per_m\n";
  for (Eigen::Index i = 0; i < l.cot.rows(); ++i)
    for (Eigen::Index j = 0; j < l.cot.cols(); ++j)
      out += format_double(l.kappa[static_cast<std::size_t>(i)]) + ',' +
             format_double(l.delay[static_cast<std::size_t>(j)]) + ',' + format_double(l.cot(i, j)) + '\n';
  return out;
}

/// Heat map of the landscape with the grid minimum marked; delay on x, gain on y.
inline std::string landscape_svg(const Landscape& l) {
  const double cell = 8.0, margin = 50.0;
  const auto nk = l.cot.rows(), nd = l.cot.cols();
  const double w = margin * 2 + cell * static_cast<double>(nd);
  const double h = margin * 2 + cell * static_cast<double>(nk);
  const double lo = l.cot.minCoeff(), hi = l.cot.maxCoeff();
  Eigen::Index bi = 0, bj = 0;
  l.cot.minCoeff(&bi, &bj);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  for (Eigen::Index i = 0; i < nk; ++i)
    for (Eigen::Index j = 0; j < nd; ++j) {
      const double t = hi > lo ? (l.cot(i, j) - lo) / (hi - lo) : 0.0;
      const int r = static_cast<int>(std::lround(255 * t)), b = 255 - r;
      s << "<rect x=\"" << margin + cell * static_cast<double>(j) << "\" y=\""
        << margin + cell * static_cast<double>(nk - 1 - i) << "\" width=\"" << cell << "\" height=\""
        << cell << "\" fill=\"rgb(" << r << ",40," << b << ")\"/>\n";
    }
  s << "<circle cx=\"" << margin + cell * (static_cast<double>(bj) + 0.5) << "\" cy=\""
    << margin + cell * (static_cast<double>(nk - 1 - bi) + 0.5)
    << "\" r=\"4\" fill=\"none\" stroke=\"white\" stroke-width=\"2\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\" font-size=\"12\">delay (s) "
    << format_double(l.delay.front()) << " to " << format_double(l.delay.back()) << "</text>\n";
  s << "<text x=\"15\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 15 " << h / 2
    << ")\" text-anchor=\"middle\">gain (N m) " << format_double(l.kappa.front()) << " to "
    << format_double(l.kappa.back()) << "</text>\n";
  s << "<text x=\"" << margin << "\" y=\"30\" font-size=\"12\">predicted CoT " << format_double(lo)
    << " to " << format_double(hi) << "; minimum at gain " << format_double(l.kappa[static_cast<std::size_t>(bi)])
    << ", delay " << format_double(l.delay[static_cast<std::size_t>(bj)]) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace exoplore
