#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rdosr {

enum class Mode { rdosr, ae_cls, ae_cls_dirichlet, softmax };
enum class Space { image, embedding };

std::string_view to_string(Mode m);
std::string_view to_string(Space s);
Mode parse_mode(std::string_view s);
Space parse_space(std::string_view s);

// Training hyperparameters. Every field is settable from a config file.
struct TrainConfig {
  double lambda_f = 1.0;
  double lambda_z = 0.1;
  double lambda_r = 0.5;
  double lambda_s = 1e-3;
  double lambda_c = 0.5;
  double lambda_s_decay = 0.9977;  // per epoch
  double lr = 1e-3;
  std::size_t epochs_stage1 = 7500;  // cap; stage 1 stops at the accuracy target
  // Empty means "auto": whatever is left of epoch_budget after stage 1.
  std::optional<std::size_t> epochs_stage2;
  std::size_t epoch_budget = 15000;
  double stage1_target_accuracy = 0.9988;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double embedding_scale = 10.0;
  double train_fraction = 0.5;
  Mode mode = Mode::rdosr;
  Space space = Space::embedding;

  // Stage-2 epoch count once stage 1 has run `stage1_epochs_run` epochs.
  std::size_t stage2_epochs(std::size_t stage1_epochs_run) const;

  // λ_s at a 0-based stage-2 epoch.
  double lambda_s_at(std::size_t epoch) const;

  // Throws ConfigError when a value is out of range.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Contents of a run configuration file: TrainConfig keys plus data paths.
struct RunConfig {
  TrainConfig train;
  std::string cube;
  std::string labels;
};

// Sets one key. Unknown keys and malformed values throw ConfigError.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// key=value per line, '#' starts a comment. Missing keys keep their defaults.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every TrainConfig key in a fixed order, doubles in shortest round-trip form.
std::map<std::string, std::string> config_entries(const TrainConfig& cfg);
std::string format_config(const TrainConfig& cfg);
std::string format_double(double v);

}  // namespace rdosr
