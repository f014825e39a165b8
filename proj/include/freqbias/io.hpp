#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqbias/error.hpp"
#include "freqbias/init.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/seqtrain.hpp"
#include "freqbias/spectral.hpp"

namespace freqbias {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Files.

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames it over `path`, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(out.good(), "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw PreconditionError(path.string() + ": invalid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV: header row, doubles at 17 significant digits.

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return ss.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    require(!header.empty(), "CsvWriter: header must be nonempty");
    write_row_text(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    write_row_text(cells);
  }

  // Mixed rows: already formatted cells (use format_double for numbers).
  void row_text(const std::vector<std::string>& cells) { write_row_text(cells); }

  std::string str() const { return out_.str(); }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

 private:
  void write_row_text(const std::vector<std::string>& cells) {
    require(cells.size() == columns_, "CsvWriter: row has " + std::to_string(cells.size()) +
                                          " cells, header has " + std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

// Single-column numeric CSV. A first line that does not parse as a number is
// treated as the header.
inline std::vector<double> parse_column_csv(const std::string& text, const std::string& source = "csv") {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t begin = line.find_first_not_of(" \t+");
    const std::size_t end = line.find_last_not_of(" \t") + 1;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data() + begin, line.data() + end, v);
    const bool ok = ec == std::errc() && ptr == line.data() + end &&
                    std::isfinite(v);
    if (!ok) {
      if (values.empty() && line_no == 1) continue;
      throw PreconditionError(source + ":" + std::to_string(line_no) + ": not a number: '" + line + "'");
    }
    values.push_back(v);
  }
  return values;
}

inline std::vector<double> read_column_csv(const std::filesystem::path& path) {
  return parse_column_csv(read_text_file(path), path.string());
}

inline void write_column_csv(const std::filesystem::path& path, const std::string& header,
                             std::span<const double> values) {
  CsvWriter w({header});
  for (double v : values) w.row({v});
  w.save(path);
}

// ---------------------------------------------------------------------------
// JSON forms.

inline Json lti_to_json(const DiagonalLti& sys) {
  const auto& p = sys.params();
  return {{"x", p.x}, {"y", p.y}, {"xi", p.xi}, {"zeta", p.zeta}, {"d", p.d}};
}

inline DiagonalLti lti_from_json(const Json& j) {
  require(j.is_object(), "DiagonalLti JSON must be an object");
  const auto array = [&](const char* key) {
    require(j.contains(key) && j.at(key).is_array(),
            std::string("DiagonalLti JSON: missing array '") + key + "'");
    return j.at(key).get<std::vector<double>>();
  };
  DiagonalLti::Params p;
  p.x = array("x");
  p.y = array("y");
  p.xi = array("xi");
  p.zeta = array("zeta");
  require(j.contains("d") && j.at("d").is_number(), "DiagonalLti JSON: missing number 'd'");
  p.d = j.at("d").get<double>();
  return DiagonalLti(std::move(p));
}

inline Json scaling_report_to_json(const ScalingReport& r, bool include_spectrum = false) {
  Json j = {{"pole_index", r.pole_index},
            {"pole_real", r.pole_real},
            {"pole_imag", r.pole_imag},
            {"g_norm_2", r.g_norm_2},
            {"g_norm_inf", r.g_norm_inf},
            {"rule1_ratio", r.rule1_ratio},
            {"inf_norm_expression", r.inf_norm_expression},
            {"rule2_ratio", r.rule2_ratio},
            {"inf_norm_envelope", r.inf_norm_envelope ? Json(*r.inf_norm_envelope) : Json(nullptr)},
            {"rule2_alpha_max", r.rule2_alpha_max},
            {"aliasing_alpha_max", r.aliasing_alpha_max}};
  if (include_spectrum) j["g_abs"] = r.g_abs;
  return j;
}

inline const char* to_string(PoolMode p) { return p == PoolMode::rms ? "rms" : "mean"; }

inline PoolMode pool_mode_from_string(const std::string& s) {
  if (s == "rms") return PoolMode::rms;
  if (s == "mean") return PoolMode::mean;
  throw PreconditionError("unknown pool mode '" + s + "' (expected rms or mean)");
}

inline Json toy_config_to_json(const ToySsmConfig& c) {
  return {{"channels", c.channels}, {"states", c.states},   {"seq_len", c.seq_len},
          {"dt", c.dt},             {"outputs", c.outputs}, {"alpha", c.alpha},
          {"beta", c.beta},         {"train_beta", c.train_beta}, {"use_skip", c.use_skip},
          {"pool", to_string(c.pool)}, {"seed", c.seed}};
}

inline ToySsmConfig toy_config_from_json(const Json& j) {
  ToySsmConfig c;
  c.channels = j.value("channels", c.channels);
  c.states = j.value("states", c.states);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.dt = j.value("dt", c.dt);
  c.outputs = j.value("outputs", c.outputs);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.train_beta = j.value("train_beta", c.train_beta);
  c.use_skip = j.value("use_skip", c.use_skip);
  c.pool = pool_mode_from_string(j.value("pool", std::string(to_string(c.pool))));
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

inline Json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_fast", c.lr_fast},
          {"lr_slow", c.lr_slow},
          {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_fast = j.value("lr_fast", c.lr_fast);
  c.lr_slow = j.value("lr_slow", c.lr_slow);
  const std::string opt = j.value("optimizer", std::string("adam"));
  require(opt == "adam" || opt == "sgd", "unknown optimizer '" + opt + "'");
  c.optimizer = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// Checkpoint: one DiagonalLti object per channel plus the readout arrays.
inline Json checkpoint_to_json(const ToySsmModel& m) {
  m.validate();
  Json channels = Json::array();
  for (std::size_t h = 0; h < m.channels(); ++h) {
    Json c = lti_to_json(m.channel(h));
    c["d"] = m.params.d[h];
    channels.push_back(std::move(c));
  }
  return {{"config", toy_config_to_json(m.config)},
          {"channels", std::move(channels)},
          {"encoder", m.params.encoder},
          {"head", m.params.head},
          {"bias", m.params.bias},
          {"beta", m.params.beta}};
}

inline ToySsmModel checkpoint_from_json(const Json& j) {
  require(j.is_object() && j.contains("config") && j.contains("channels"),
          "checkpoint JSON needs 'config' and 'channels'");
  ToySsmModel m;
  m.config = toy_config_from_json(j.at("config"));
  const auto& channels = j.at("channels");
  require(channels.is_array() && channels.size() == m.config.channels,
          "checkpoint JSON: 'channels' must hold config.channels systems");
  for (const auto& c : channels) {
    const DiagonalLti sys = lti_from_json(c);
    require(sys.size() == m.config.states, "checkpoint JSON: every channel must have config.states poles");
    for (std::size_t k = 0; k < sys.size(); ++k) {
      m.params.nu.push_back(std::log(-sys.x()[k]));
      m.params.y.push_back(sys.y()[k]);
      m.params.xi.push_back(sys.xi()[k]);
      m.params.zeta.push_back(sys.zeta()[k]);
    }
    m.params.d.push_back(sys.d());
  }
  m.params.encoder = j.at("encoder").get<std::vector<double>>();
  m.params.head = j.at("head").get<std::vector<double>>();
  m.params.bias = j.at("bias").get<std::vector<double>>();
  m.params.beta = j.at("beta").get<double>();
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Run manifest written next to every CLI output.

struct RunManifest {
  std::string subcommand;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string version = kVersion;
  double duration_seconds = 0.0;

  Json to_json() const {
    return {{"subcommand", subcommand}, {"config", config},   {"seed", seed},
            {"artifacts", artifacts},   {"version", version}, {"duration_seconds", duration_seconds}};
  }

  static RunManifest from_json(const Json& j) {
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    m.version = j.at("version").get<std::string>();
    m.duration_seconds = j.at("duration_seconds").get<double>();
    return m;
  }

  void save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }
};

}  // namespace freqbias
