#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rdosr/config.hpp"
#include "rdosr/data.hpp"
#include "rdosr/dirichlet.hpp"
#include "rdosr/layers.hpp"
#include "rdosr/losses.hpp"

namespace rdosr {

// Layer widths of the four networks.
struct Architecture {
  std::vector<std::size_t> classifier_hidden{512, 1024, 512, 32};
  std::vector<std::size_t> encoder_hidden{3, 3, 3, 3};
  std::size_t sticks = 10;
  std::size_t decoder_hidden = 10;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// F: pixels → logits z_F (width L). relu hidden layers, linear output.
struct ClassifierF {
  Mlp net;

  ClassifierF() = default;
  ClassifierF(std::size_t bands, std::size_t classes, const Architecture& arch, Rng& rng);
  Matrix logits(const Matrix& x) const { return net.forward(x); }
};

struct EncoderTape {
  MlpTape trunk;
  dirichlet::StickTape stick;
  Matrix plain_pre, plain_out;
};

// E: trunk of relu layers feeding either the stick-breaking head or, for the
// ae_cls ablation, a plain affine+relu layer of the same width.
struct EncoderE {
  Mlp trunk;
  bool dirichlet = true;
  dirichlet::StickHead stick;
  Dense plain;

  EncoderE() = default;
  EncoderE(std::size_t in, bool use_dirichlet, const Architecture& arch, Rng& rng);

  std::size_t width() const noexcept { return dirichlet ? stick.sticks() : plain.out(); }
  Matrix encode(const Matrix& z) const;
  Matrix encode(const Matrix& z, EncoderTape& tape) const;
  void backward(const EncoderTape& tape, const Matrix& ds);
  std::vector<ParamBlock*> params();
  std::vector<const ParamBlock*> params() const;
};

// D: affine(c→c) relu, then affine(c→out). The last weight holds the shared bases.
struct DecoderD {
  Mlp net;

  DecoderD() = default;
  DecoderD(std::size_t sticks, std::size_t hidden, std::size_t out, Rng& rng);
  const Matrix& bases() const { return net.layers().back().weight.value; }
};

// C: one affine layer on the representation, producing logits.
struct ClassifierC {
  Dense layer;

  ClassifierC() = default;
  ClassifierC(std::size_t sticks, std::size_t classes, Rng& rng);
};

// Where the model came from; used by evaluation to recover the held-out split.
struct Provenance {
  std::string cube_digest;
  std::string labels_digest;
  std::vector<int> unknown_classes;  // original ids
};

class RdosrModel {
 public:
  RdosrModel() = default;
  RdosrModel(std::size_t bands, std::size_t classes, const TrainConfig& config,
             const Architecture& arch = {});

  std::size_t bands() const noexcept { return bands_; }
  std::size_t classes() const noexcept { return classes_; }
  // Input/output width of the E-D branch.
  std::size_t branch_width() const noexcept {
    return config.space == Space::image ? bands_ : classes_;
  }

  std::vector<ParamBlock*> stage1_params() { return f.net.params(); }
  std::vector<ParamBlock*> stage2_params();
  std::vector<const ParamBlock*> all_params() const;

  TrainConfig config;
  Architecture arch;
  data::Normalizer normalizer;
  std::vector<int> known_classes;  // original class id per dense index
  Provenance provenance;
  bool stage1_trained = false;
  bool stage2_trained = false;

  ClassifierF f;
  EncoderE e;
  DecoderD d;
  ClassifierC c;

 private:
  std::size_t bands_ = 0;
  std::size_t classes_ = 0;
};

// FNV-1a over the raw bytes of the parameter values.
std::uint64_t param_digest(const std::vector<const ParamBlock*>& params);

// --- objectives ------------------------------------------------------------

// λ_f·xent(F(x), y) + λ_z·mean ‖z_F‖₁. Accumulates gradients into F when backward.
double stage1_loss(ClassifierF& f, const Matrix& x, const Matrix& onehot, double lambda_f,
                   double lambda_z, bool backward);

struct Stage2Weights {
  double recon = 0.5;
  double sparsity = 1e-3;
  double classify = 0.5;
};

// λ_r·L_r(z, D(E(z))) + λ_s·H(E(z)) + λ_c·xent(C(E(z)), y). The entropy term is
// skipped for a plain (non-Dirichlet) encoder.
double stage2_loss(EncoderE& e, DecoderD& d, ClassifierC& c, const Matrix& z,
                   const Matrix& onehot, const Stage2Weights& w, bool backward);

// --- training --------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // stage 1 only
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  bool reached_target = false;
};

// labels are 0-based dense class indices; x is already normalised.
TrainLog train_stage1(ClassifierF& f, const Matrix& x, std::span<const int> labels,
                      const TrainConfig& cfg);

// z_F = F(x) / scale
Matrix embed(const ClassifierF& f, const Matrix& x, double scale);

// An "auto" epochs_stage2 here runs the whole epoch budget; fit() passes the
// remainder after stage 1 instead.
TrainLog train_stage2(EncoderE& e, DecoderD& d, ClassifierC& c, const Matrix& z,
                      std::span<const int> labels, const TrainConfig& cfg);

struct FitReport {
  TrainLog stage1;
  TrainLog stage2;
  double stage1_accuracy = 0.0;
  double final_stage1_loss = 0.0;
  double final_stage2_loss = 0.0;
};

// Fits the normaliser on `train_known` (labels 1..L), then runs both stages.
// Only softmax mode skips stage 2.
RdosrModel fit(const data::HsiDataset& train_known, const TrainConfig& cfg,
               const Architecture& arch = {}, FitReport* report = nullptr);

// --- inference (raw pixels; the model applies its own normaliser) ----------

// Higher means more likely unknown: reconstruction error ‖z - D(E(z))‖₂, or
// 1 - max softmax(F) in softmax mode.
std::vector<double> open_score(const RdosrModel& model, const Matrix& pixels);

// Dense labels 1..L; ties go to the lowest index.
std::vector<int> closed_predict(const RdosrModel& model, const Matrix& pixels);

std::vector<int> argmax_rows(const Matrix& m);

// --- checkpoint ------------------------------------------------------------

void write_checkpoint(const std::filesystem::path& path, const RdosrModel& model);
RdosrModel read_checkpoint(const std::filesystem::path& path);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rdosr
