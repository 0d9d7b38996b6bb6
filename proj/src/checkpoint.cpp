#include <bit>
#include <cstring>
#include <fstream>

#include "rdosr/model.hpp"

// Checkpoint layout (little-endian):
//   "RDSM" u32 version
//   str   config (key=value text)
//   u64   bands, classes
//   vec   classifier_hidden, encoder_hidden (u32 count, u64 each); u64 sticks, decoder_hidden
//   vec   known_classes (u32 count, i32 each)
//   u64   band count, f64 mean[], f64 stddev[]
//   str   cube digest, labels digest; vec unknown_classes
//   u8    stage1_trained, stage2_trained
//   u32   block count, then per block u64 rows, u64 cols, f64 values[]
// str is u32 length plus bytes.

namespace rdosr {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U bits = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void sizes(const std::vector<std::size_t>& v) {
    le(static_cast<std::uint32_t>(v.size()));
    for (auto x : v) le(static_cast<std::uint64_t>(x));
  }
  void ints(const std::vector<int>& v) {
    le(static_cast<std::uint32_t>(v.size()));
    for (int x : v) le(static_cast<std::int32_t>(x));
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> b) : buf_(std::move(b)) {}

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T le() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }
  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<std::size_t> sizes() {
    std::vector<std::size_t> v(le<std::uint32_t>());
    for (auto& x : v) x = static_cast<std::size_t>(le<std::uint64_t>());
    return v;
  }
  std::vector<int> ints() {
    std::vector<int> v(le<std::uint32_t>());
    for (auto& x : v) x = le<std::int32_t>();
    return v;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const RdosrModel& m) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le(kVersion);
  w.str(format_config(m.config));
  w.le(static_cast<std::uint64_t>(m.bands()));
  w.le(static_cast<std::uint64_t>(m.classes()));
  w.sizes(m.arch.classifier_hidden);
  w.sizes(m.arch.encoder_hidden);
  w.le(static_cast<std::uint64_t>(m.arch.sticks));
  w.le(static_cast<std::uint64_t>(m.arch.decoder_hidden));
  w.ints(m.known_classes);
  w.le(static_cast<std::uint64_t>(m.normalizer.bands()));
  for (double v : m.normalizer.mean) w.le(v);
  for (double v : m.normalizer.stddev) w.le(v);
  w.str(m.provenance.cube_digest);
  w.str(m.provenance.labels_digest);
  w.ints(m.provenance.unknown_classes);
  w.le(static_cast<std::uint8_t>(m.stage1_trained));
  w.le(static_cast<std::uint8_t>(m.stage2_trained));
  const auto params = m.all_params();
  w.le(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.le(static_cast<std::uint64_t>(p->value.rows()));
    w.le(static_cast<std::uint64_t>(p->value.cols()));
    for (double v : p->value.values()) w.le(v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

RdosrModel read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a model checkpoint");
  if (const auto v = r.le<std::uint32_t>(); v != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));

  TrainConfig cfg;
  try {
    cfg = parse_run_config(r.str()).train;
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  const auto bands = static_cast<std::size_t>(r.le<std::uint64_t>());
  const auto classes = static_cast<std::size_t>(r.le<std::uint64_t>());
  Architecture arch;
  arch.classifier_hidden = r.sizes();
  arch.encoder_hidden = r.sizes();
  arch.sticks = static_cast<std::size_t>(r.le<std::uint64_t>());
  arch.decoder_hidden = static_cast<std::size_t>(r.le<std::uint64_t>());

  RdosrModel m(bands, classes, cfg, arch);
  m.known_classes = r.ints();
  if (m.known_classes.size() != classes) throw CheckpointError("known class list length mismatch");
  const auto nb = static_cast<std::size_t>(r.le<std::uint64_t>());
  m.normalizer.mean.resize(nb);
  m.normalizer.stddev.resize(nb);
  for (double& v : m.normalizer.mean) v = r.le<double>();
  for (double& v : m.normalizer.stddev) v = r.le<double>();
  m.provenance.cube_digest = r.str();
  m.provenance.labels_digest = r.str();
  m.provenance.unknown_classes = r.ints();
  m.stage1_trained = r.le<std::uint8_t>() != 0;
  m.stage2_trained = r.le<std::uint8_t>() != 0;

  std::vector<ParamBlock*> params = m.stage1_params();
  for (auto* p : m.stage2_params()) params.push_back(p);
  if (r.le<std::uint32_t>() != params.size()) throw CheckpointError("parameter block count mismatch");
  for (auto* p : params) {
    const auto rows = r.le<std::uint64_t>();
    const auto cols = r.le<std::uint64_t>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw CheckpointError("parameter block shape mismatch");
    for (double& v : p->value.values()) v = r.le<double>();
    p->zero_grad();
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes in checkpoint");
  return m;
}

}  // namespace rdosr
