#include "rdosr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace rdosr {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::rdosr: return "rdosr";
    case Mode::ae_cls: return "ae_cls";
    case Mode::ae_cls_dirichlet: return "ae_cls_dirichlet";
    case Mode::softmax: return "softmax";
  }
  return "?";
}

std::string_view to_string(Space s) { return s == Space::image ? "image" : "embedding"; }

Mode parse_mode(std::string_view s) {
  if (s == "rdosr") return Mode::rdosr;
  if (s == "ae_cls") return Mode::ae_cls;
  if (s == "ae_cls_dirichlet") return Mode::ae_cls_dirichlet;
  if (s == "softmax") return Mode::softmax;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

Space parse_space(std::string_view s) {
  if (s == "image") return Space::image;
  if (s == "embedding") return Space::embedding;
  throw ConfigError("unknown space '" + std::string(s) + "'");
}

double TrainConfig::lambda_s_at(std::size_t epoch) const {
  return lambda_s * std::pow(lambda_s_decay, static_cast<double>(epoch));
}

void TrainConfig::validate() const {
  for (double l : {lambda_f, lambda_z, lambda_r, lambda_s, lambda_c})
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be finite and >= 0");
  if (!(lambda_s_decay > 0.0 && lambda_s_decay <= 1.0))
    throw ConfigError("lambda_s_decay must lie in (0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(stage1_target_accuracy >= 0.0 && stage1_target_accuracy <= 1.0))
    throw ConfigError("stage1_target_accuracy must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(embedding_scale > 0.0)) throw ConfigError("embedding_scale must be > 0");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ConfigError("train_fraction must lie in (0, 1]");
}

std::size_t TrainConfig::stage2_epochs(std::size_t stage1_epochs_run) const {
  if (epochs_stage2) return *epochs_stage2;
  return epoch_budget > stage1_epochs_run ? epoch_budget - stage1_epochs_run : 0;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) +
                      "' is not a non-negative integer");
  return out;
}

}  // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  auto& t = cfg.train;
  if (key == "lambda_f") t.lambda_f = to_double(key, value);
  else if (key == "lambda_z") t.lambda_z = to_double(key, value);
  else if (key == "lambda_r") t.lambda_r = to_double(key, value);
  else if (key == "lambda_s") t.lambda_s = to_double(key, value);
  else if (key == "lambda_c") t.lambda_c = to_double(key, value);
  else if (key == "lambda_s_decay") t.lambda_s_decay = to_double(key, value);
  else if (key == "lr") t.lr = to_double(key, value);
  else if (key == "epochs_stage1") t.epochs_stage1 = to_uint(key, value);
  else if (key == "epochs_stage2")
    t.epochs_stage2 = value == "auto" ? std::nullopt : std::optional(to_uint(key, value));
  else if (key == "epoch_budget") t.epoch_budget = to_uint(key, value);
  else if (key == "stage1_target_accuracy") t.stage1_target_accuracy = to_double(key, value);
  else if (key == "batch_size") t.batch_size = to_uint(key, value);
  else if (key == "seed") t.seed = to_uint(key, value);
  else if (key == "embedding_scale") t.embedding_scale = to_double(key, value);
  else if (key == "train_fraction") t.train_fraction = to_double(key, value);
  else if (key == "mode") t.mode = parse_mode(value);
  else if (key == "space") t.space = parse_space(value);
  else if (key == "cube") cfg.cube = std::string(value);
  else if (key == "labels") cfg.labels = std::string(value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::map<std::string, std::string> config_entries(const TrainConfig& c) {
  return {
      {"lambda_f", format_double(c.lambda_f)},
      {"lambda_z", format_double(c.lambda_z)},
      {"lambda_r", format_double(c.lambda_r)},
      {"lambda_s", format_double(c.lambda_s)},
      {"lambda_c", format_double(c.lambda_c)},
      {"lambda_s_decay", format_double(c.lambda_s_decay)},
      {"lr", format_double(c.lr)},
      {"epochs_stage1", std::to_string(c.epochs_stage1)},
      {"epochs_stage2", c.epochs_stage2 ? std::to_string(*c.epochs_stage2) : "auto"},
      {"epoch_budget", std::to_string(c.epoch_budget)},
      {"stage1_target_accuracy", format_double(c.stage1_target_accuracy)},
      {"batch_size", std::to_string(c.batch_size)},
      {"seed", std::to_string(c.seed)},
      {"embedding_scale", format_double(c.embedding_scale)},
      {"train_fraction", format_double(c.train_fraction)},
      {"mode", std::string(to_string(c.mode))},
      {"space", std::string(to_string(c.space))},
  };
}

std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

}  // namespace rdosr
