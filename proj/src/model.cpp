#include "rdosr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "rdosr/adam.hpp"
#include "rdosr/errors.hpp"

namespace rdosr {

namespace {

// Inference is chunked so the 1024-wide hidden layer of F stays small in memory.
constexpr std::size_t kInferenceChunk = 4096;

// Seed offsets keep the shuffling streams independent of initialisation.
constexpr std::uint64_t kStage1ShuffleSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kStage2ShuffleSalt = 0xbf58476d1ce4e5b9ull;

// The L1 penalty on z_F belongs to the full method only; the baselines train F
// with cross-entropy alone.
double effective_lambda_z(const TrainConfig& cfg) {
  return cfg.mode == Mode::rdosr ? cfg.lambda_z : 0.0;
}

template <typename Fn>
Matrix map_chunks(const Matrix& x, std::size_t out_cols, Fn&& fn) {
  Matrix out(x.rows(), out_cols);
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < x.rows(); begin += kInferenceChunk) {
    const std::size_t end = std::min(x.rows(), begin + kInferenceChunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Matrix part = fn(x.gather_rows(idx));
    std::copy(part.values().begin(), part.values().end(), out.row(begin).begin());
  }
  return out;
}

double accuracy(const ClassifierF& f, const Matrix& x, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const Matrix logits =
      map_chunks(x, f.net.out(), [&](const Matrix& part) { return f.logits(part); });
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

// --- networks --------------------------------------------------------------

ClassifierF::ClassifierF(std::size_t bands, std::size_t classes, const Architecture& arch,
                         Rng& rng) {
  std::vector<std::size_t> widths = arch.classifier_hidden;
  widths.push_back(classes);
  net = Mlp(bands, widths, Activation::relu, Activation::identity, rng);
}

EncoderE::EncoderE(std::size_t in, bool use_dirichlet, const Architecture& arch, Rng& rng)
    : dirichlet(use_dirichlet) {
  if (arch.encoder_hidden.empty()) throw DomainError("encoder needs at least one hidden layer");
  trunk = Mlp(in, arch.encoder_hidden, Activation::relu, Activation::relu, rng);
  const std::size_t h = arch.encoder_hidden.back();
  if (dirichlet)
    stick = dirichlet::StickHead(h, arch.sticks, rng);
  else
    plain = Dense(h, arch.sticks, Activation::relu, rng);
}

Matrix EncoderE::encode(const Matrix& z) const {
  const Matrix h = trunk.forward(z);
  return dirichlet ? stick.encode(h) : plain.forward(h);
}

Matrix EncoderE::encode(const Matrix& z, EncoderTape& tape) const {
  const Matrix h = trunk.forward(z, tape.trunk);
  if (dirichlet) return stick.encode(h, tape.stick);
  tape.stick.hidden = h;
  tape.plain_pre = affine(plain.weight.value, plain.bias.value, h);
  tape.plain_out = activate(plain.act, tape.plain_pre);
  return tape.plain_out;
}

void EncoderE::backward(const EncoderTape& tape, const Matrix& ds) {
  Matrix dh;
  if (dirichlet) {
    dh = stick.backward(tape.stick, ds);
  } else {
    const Matrix g = activate_backward(plain.act, tape.plain_pre, tape.plain_out, ds);
    dh = affine_backward(plain.weight.value, tape.stick.hidden, g, plain.weight.grad,
                         plain.bias.grad);
  }
  trunk.backward(tape.trunk, dh, false);
}

std::vector<ParamBlock*> EncoderE::params() {
  auto out = trunk.params();
  if (dirichlet) {
    for (auto* p : stick.params()) out.push_back(p);
  } else {
    out.push_back(&plain.weight);
    out.push_back(&plain.bias);
  }
  return out;
}

std::vector<const ParamBlock*> EncoderE::params() const {
  auto out = trunk.params();
  if (dirichlet) {
    for (const auto* p : stick.params()) out.push_back(p);
  } else {
    out.push_back(&plain.weight);
    out.push_back(&plain.bias);
  }
  return out;
}

DecoderD::DecoderD(std::size_t sticks, std::size_t hidden, std::size_t out, Rng& rng) {
  const std::size_t widths[] = {hidden, out};
  net = Mlp(sticks, widths, Activation::relu, Activation::identity, rng);
}

ClassifierC::ClassifierC(std::size_t sticks, std::size_t classes, Rng& rng)
    : layer(sticks, classes, Activation::identity, rng) {}

RdosrModel::RdosrModel(std::size_t bands, std::size_t classes, const TrainConfig& cfg,
                       const Architecture& architecture)
    : config(cfg), arch(architecture), bands_(bands), classes_(classes) {
  if (bands == 0 || classes == 0) throw DomainError("model needs at least one band and class");
  config.validate();
  known_classes.resize(classes);
  std::iota(known_classes.begin(), known_classes.end(), 1);
  Rng rng(config.seed);
  f = ClassifierF(bands, classes, arch, rng);
  e = EncoderE(branch_width(), config.mode != Mode::ae_cls, arch, rng);
  d = DecoderD(arch.sticks, arch.decoder_hidden, branch_width(), rng);
  c = ClassifierC(arch.sticks, classes, rng);
}

std::vector<ParamBlock*> RdosrModel::stage2_params() {
  auto out = e.params();
  for (auto* p : d.net.params()) out.push_back(p);
  out.push_back(&c.layer.weight);
  out.push_back(&c.layer.bias);
  return out;
}

std::vector<const ParamBlock*> RdosrModel::all_params() const {
  auto out = f.net.params();
  for (const auto* p : e.params()) out.push_back(p);
  for (const auto* p : d.net.params()) out.push_back(p);
  out.push_back(&c.layer.weight);
  out.push_back(&c.layer.bias);
  return out;
}

std::uint64_t param_digest(const std::vector<const ParamBlock*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : params) {
    for (double v : p->value.values()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

// --- objectives ------------------------------------------------------------

double stage1_loss(ClassifierF& f, const Matrix& x, const Matrix& onehot, double lambda_f,
                   double lambda_z, bool backward) {
  MlpTape tape;
  const Matrix logits = f.net.forward(x, tape);
  const LossResult xent = softmax_xent(logits, onehot);
  const LossResult sparse = l1_mean(logits);
  const double value = lambda_f * xent.value + lambda_z * sparse.value;
  if (backward) {
    Matrix g = xent.grad * lambda_f;
    g += sparse.grad * lambda_z;
    f.net.backward(tape, g, false);
  }
  return value;
}

double stage2_loss(EncoderE& e, DecoderD& d, ClassifierC& c, const Matrix& z,
                   const Matrix& onehot, const Stage2Weights& w, bool backward) {
  EncoderTape etape;
  const Matrix s = e.encode(z, etape);
  MlpTape dtape;
  const Matrix zhat = d.net.forward(s, dtape);
  const Matrix logits = affine(c.layer.weight.value, c.layer.bias.value, s);

  const LossResult recon = l2_recon_mean(z, zhat);
  const LossResult xent = softmax_xent(logits, onehot);
  const bool use_entropy = e.dirichlet && w.sparsity > 0.0;
  LossResult entropy;
  if (use_entropy) entropy = dirichlet::entropy_sparsity(s);

  const double value =
      w.recon * recon.value + w.sparsity * entropy.value + w.classify * xent.value;
  if (backward) {
    Matrix ds = d.net.backward(dtape, recon.grad * w.recon);
    ds += affine_backward(c.layer.weight.value, s, xent.grad * w.classify, c.layer.weight.grad,
                          c.layer.bias.grad);
    if (use_entropy) ds += entropy.grad * w.sparsity;
    e.backward(etape, ds);
  }
  return value;
}

// --- training --------------------------------------------------------------

TrainLog train_stage1(ClassifierF& f, const Matrix& x, std::span<const int> labels,
                      const TrainConfig& cfg) {
  if (x.rows() == 0) throw DomainError("train_stage1: empty dataset");
  if (labels.size() != x.rows()) throw DimensionError("train_stage1: label count mismatch");
  cfg.validate();
  TrainLog log;
  if (cfg.epochs_stage1 == 0) return log;

  const Matrix y = one_hot(labels, f.net.out());
  const double lambda_z = effective_lambda_z(cfg);
  Rng rng(cfg.seed ^ kStage1ShuffleSalt);
  auto order = iota_indices(x.rows());
  Adam opt(f.net.params(), cfg.lr);
  opt.zero_grad();

  for (std::size_t epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double loss =
          stage1_loss(f, x.gather_rows(batch), y.gather_rows(batch), cfg.lambda_f, lambda_z, true);
      if (!std::isfinite(loss))
        throw NumericalError("stage 1 epoch " + std::to_string(epoch) + ": non-finite loss");
      total += loss * static_cast<double>(batch.size());
      opt.step();
    }
    const double acc = accuracy(f, x, labels);
    log.epochs.push_back({epoch, total / static_cast<double>(x.rows()), acc});
    if (acc >= cfg.stage1_target_accuracy) {
      log.reached_target = true;
      break;
    }
  }
  return log;
}

Matrix embed(const ClassifierF& f, const Matrix& x, double scale) {
  if (!(scale > 0.0)) throw DomainError("embed: scale must be > 0");
  if (x.cols() != f.net.in())
    throw DimensionError("embed: input " + shape_string(x.rows(), x.cols()) +
                         " vs classifier input width " + std::to_string(f.net.in()));
  Matrix z = map_chunks(x, f.net.out(), [&](const Matrix& part) { return f.logits(part); });
  for (double& v : z.values()) v /= scale;
  return z;
}

TrainLog train_stage2(EncoderE& e, DecoderD& d, ClassifierC& c, const Matrix& z,
                      std::span<const int> labels, const TrainConfig& cfg) {
  if (z.rows() == 0) throw DomainError("train_stage2: empty dataset");
  if (labels.size() != z.rows()) throw DimensionError("train_stage2: label count mismatch");
  cfg.validate();
  TrainLog log;
  const std::size_t epochs = cfg.stage2_epochs(0);
  if (epochs == 0) return log;

  const Matrix y = one_hot(labels, c.layer.out());
  Rng rng(cfg.seed ^ kStage2ShuffleSalt);
  auto order = iota_indices(z.rows());
  std::vector<ParamBlock*> params = e.params();
  for (auto* p : d.net.params()) params.push_back(p);
  params.push_back(&c.layer.weight);
  params.push_back(&c.layer.bias);
  Adam opt(params, cfg.lr);
  opt.zero_grad();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const Stage2Weights w{cfg.lambda_r, e.dirichlet ? cfg.lambda_s_at(epoch) : 0.0, cfg.lambda_c};
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double loss = stage2_loss(e, d, c, z.gather_rows(batch), y.gather_rows(batch), w, true);
      if (!std::isfinite(loss))
        throw NumericalError("stage 2 epoch " + std::to_string(epoch) + ": non-finite loss");
      total += loss * static_cast<double>(batch.size());
      opt.step();
    }
    log.epochs.push_back({epoch, total / static_cast<double>(z.rows()), 0.0});
  }
  return log;
}

RdosrModel fit(const data::HsiDataset& train_known, const TrainConfig& cfg,
               const Architecture& arch, FitReport* report) {
  if (train_known.size() == 0) throw DomainError("fit: empty training set");
  RdosrModel model(train_known.band_count, train_known.class_count, cfg, arch);
  model.normalizer = data::normalize_fit(train_known.pixels);
  const Matrix x = data::normalize_apply(model.normalizer, train_known.pixels);
  std::vector<int> labels(train_known.labels.size());
  std::transform(train_known.labels.begin(), train_known.labels.end(), labels.begin(),
                 [](int l) { return l - 1; });

  FitReport local;
  FitReport& rep = report ? *report : local;
  rep.stage1 = train_stage1(model.f, x, labels, model.config);
  model.stage1_trained = true;
  rep.stage1_accuracy =
      rep.stage1.epochs.empty() ? accuracy(model.f, x, labels) : rep.stage1.epochs.back().accuracy;
  if (!rep.stage1.epochs.empty()) rep.final_stage1_loss = rep.stage1.epochs.back().loss;

  if (model.config.mode != Mode::softmax) {
    const Matrix z = model.config.space == Space::embedding
                         ? embed(model.f, x, model.config.embedding_scale)
                         : x;
    TrainConfig stage2_cfg = model.config;
    stage2_cfg.epochs_stage2 = model.config.stage2_epochs(rep.stage1.epochs.size());
    rep.stage2 = train_stage2(model.e, model.d, model.c, z, labels, stage2_cfg);
    model.stage2_trained = true;
    if (!rep.stage2.epochs.empty()) rep.final_stage2_loss = rep.stage2.epochs.back().loss;
  }
  return model;
}

// --- inference -------------------------------------------------------------

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    // max_element returns the first maximum, so ties resolve to the lowest index
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<double> open_score(const RdosrModel& model, const Matrix& pixels) {
  if (!model.stage1_trained) throw StateError("open_score: classifier F is not trained");
  const Matrix x = data::normalize_apply(model.normalizer, pixels);
  if (model.config.mode == Mode::softmax) {
    const Matrix p = softmax(embed(model.f, x, 1.0));
    std::vector<double> score(p.rows());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto row = p.row(r);
      score[r] = 1.0 - *std::max_element(row.begin(), row.end());
    }
    return score;
  }
  if (!model.stage2_trained) throw StateError("open_score: encoder/decoder are not trained");
  const Matrix z = model.config.space == Space::embedding
                       ? embed(model.f, x, model.config.embedding_scale)
                       : x;
  const Matrix zhat = map_chunks(z, z.cols(), [&](const Matrix& part) {
    return model.d.net.forward(model.e.encode(part));
  });
  return row_distances(z, zhat);
}

std::vector<int> closed_predict(const RdosrModel& model, const Matrix& pixels) {
  if (!model.stage1_trained) throw StateError("closed_predict: classifier F is not trained");
  const Matrix x = data::normalize_apply(model.normalizer, pixels);
  auto pred = argmax_rows(embed(model.f, x, 1.0));
  for (int& p : pred) ++p;
  return pred;
}

}  // namespace rdosr
