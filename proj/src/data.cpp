#include "rdosr/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "rdosr/errors.hpp"

namespace rdosr::data {

std::vector<std::size_t> HsiDataset::class_histogram() const {
  std::vector<std::size_t> h(class_count + 1, 0);
  for (int l : labels)
    if (l >= 0 && static_cast<std::size_t>(l) <= class_count) ++h[static_cast<std::size_t>(l)];
  return h;
}

void HsiDataset::validate() const {
  if (pixels.rows() != labels.size())
    throw std::invalid_argument("dataset: " + std::to_string(pixels.rows()) + " pixels but " +
                                std::to_string(labels.size()) + " labels");
  if (pixels.cols() != band_count)
    throw std::invalid_argument("dataset: pixel width " + std::to_string(pixels.cols()) +
                                " differs from band count " + std::to_string(band_count));
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) > class_count)
      throw std::invalid_argument("dataset: label " + std::to_string(l) + " outside 0.." +
                                  std::to_string(class_count));
  const auto h = class_histogram();
  for (std::size_t c = 1; c <= class_count; ++c)
    if (h[c] == 0) throw std::invalid_argument("dataset: class " + std::to_string(c) + " is empty");
  if (!pixels.all_finite()) throw std::invalid_argument("dataset: non-finite pixel value");
}

HsiDataset make_dataset(Matrix pixels, std::vector<int> labels) {
  HsiDataset ds;
  ds.band_count = pixels.cols();
  ds.pixels = std::move(pixels);
  ds.labels = std::move(labels);
  const auto mx = std::max_element(ds.labels.begin(), ds.labels.end());
  ds.class_count = mx == ds.labels.end() ? 0 : static_cast<std::size_t>(std::max(0, *mx));
  ds.validate();
  return ds;
}

// --- container -------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kCubeMagic{'H', 'S', 'I', 'D'};
constexpr std::array<char, 4> kLabelMagic{'H', 'S', 'I', 'L'};

template <typename T>
void put_le(std::vector<char>& out, T value) {
  static_assert(sizeof(T) == 4);
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(const char* p) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(bits);
}

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrc::io, "write failed for " + path.string());
}

void check_header(const std::vector<char>& bytes, const std::array<char, 4>& magic,
                  std::size_t header_size, const std::filesystem::path& path) {
  if (bytes.size() < 4 || !std::equal(magic.begin(), magic.end(), bytes.begin()))
    throw FormatError(FormatErrc::bad_magic, path.string() + ": bad magic");
  if (bytes.size() < header_size)
    throw FormatError(FormatErrc::truncated, path.string() + ": truncated header");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kContainerVersion)
    throw FormatError(FormatErrc::bad_version,
                      path.string() + ": unsupported version " + std::to_string(version));
}

void check_payload(std::size_t have, std::size_t need, const std::filesystem::path& path) {
  if (have < need)
    throw FormatError(FormatErrc::truncated, path.string() + ": expected " + std::to_string(need) +
                                                 " bytes, found " + std::to_string(have));
  if (have > need)
    throw FormatError(FormatErrc::invalid, path.string() + ": " + std::to_string(have - need) +
                                               " trailing bytes");
}

}  // namespace

Cube load_cube(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  constexpr std::size_t header = 20;
  check_header(bytes, kCubeMagic, header, path);
  Cube cube;
  cube.height = get_le<std::uint32_t>(bytes.data() + 8);
  cube.width = get_le<std::uint32_t>(bytes.data() + 12);
  cube.bands = get_le<std::uint32_t>(bytes.data() + 16);
  const std::size_t count = std::size_t{cube.height} * cube.width * cube.bands;
  check_payload(bytes.size() - header, count * 4, path);
  cube.pixels = Matrix(std::size_t{cube.height} * cube.width, cube.bands);
  auto out = cube.pixels.values();
  for (std::size_t i = 0; i < count; ++i)
    out[i] = static_cast<double>(get_le<float>(bytes.data() + header + 4 * i));
  return cube;
}

LabelMap load_labels(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  constexpr std::size_t header = 16;
  check_header(bytes, kLabelMagic, header, path);
  LabelMap map;
  map.height = get_le<std::uint32_t>(bytes.data() + 8);
  map.width = get_le<std::uint32_t>(bytes.data() + 12);
  const std::size_t count = std::size_t{map.height} * map.width;
  check_payload(bytes.size() - header, count * 4, path);
  map.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    map.labels[i] = get_le<std::int32_t>(bytes.data() + header + 4 * i);
  return map;
}

void save_cube(const std::filesystem::path& path, const Cube& cube) {
  if (cube.pixels.rows() != std::size_t{cube.height} * cube.width ||
      cube.pixels.cols() != cube.bands)
    throw FormatError(FormatErrc::dimension_mismatch, "cube header disagrees with pixel matrix");
  std::vector<char> out;
  out.reserve(20 + cube.pixels.size() * 4);
  out.insert(out.end(), kCubeMagic.begin(), kCubeMagic.end());
  put_le(out, kContainerVersion);
  put_le(out, cube.height);
  put_le(out, cube.width);
  put_le(out, cube.bands);
  for (double v : cube.pixels.values()) put_le(out, static_cast<float>(v));
  write_all(path, out);
}

void save_labels(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.labels.size() != std::size_t{labels.height} * labels.width)
    throw FormatError(FormatErrc::dimension_mismatch, "label header disagrees with label count");
  std::vector<char> out;
  out.reserve(16 + labels.labels.size() * 4);
  out.insert(out.end(), kLabelMagic.begin(), kLabelMagic.end());
  put_le(out, kContainerVersion);
  put_le(out, labels.height);
  put_le(out, labels.width);
  for (std::int32_t l : labels.labels) put_le(out, l);
  write_all(path, out);
}

HsiDataset pair(const Cube& cube, const LabelMap& labels) {
  if (cube.height != labels.height || cube.width != labels.width)
    throw FormatError(FormatErrc::dimension_mismatch,
                      "cube is " + std::to_string(cube.height) + "x" + std::to_string(cube.width) +
                          " but labels are " + std::to_string(labels.height) + "x" +
                          std::to_string(labels.width));
  std::vector<std::size_t> keep;
  std::vector<int> kept_labels;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] < 0)
      throw FormatError(FormatErrc::invalid, "negative label " + std::to_string(labels.labels[i]));
    if (labels.labels[i] > 0) {
      keep.push_back(i);
      kept_labels.push_back(labels.labels[i]);
    }
  }
  try {
    return make_dataset(cube.pixels.gather_rows(keep), std::move(kept_labels));
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrc::invalid, e.what());
  }
}

HsiDataset load_dataset(const std::filesystem::path& cube, const std::filesystem::path& labels) {
  return pair(load_cube(cube), load_labels(labels));
}

void save_dataset(const std::filesystem::path& cube_path, const std::filesystem::path& label_path,
                  const HsiDataset& ds) {
  Cube cube{1, static_cast<std::uint32_t>(ds.size()), static_cast<std::uint32_t>(ds.band_count),
            ds.pixels};
  LabelMap map{1, static_cast<std::uint32_t>(ds.size()),
               std::vector<std::int32_t>(ds.labels.begin(), ds.labels.end())};
  save_cube(cube_path, cube);
  save_labels(label_path, map);
}

std::string file_digest(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// --- normalisation ---------------------------------------------------------

Normalizer normalize_fit(const Matrix& pixels) {
  if (pixels.rows() == 0) throw DimensionError("normalize_fit: empty fit set");
  const std::size_t n = pixels.rows();
  const std::size_t b = pixels.cols();
  Normalizer norm{std::vector<double>(b, 0.0), std::vector<double>(b, 0.0)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < b; ++c) norm.mean[c] += pixels(r, c);
  for (double& m : norm.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < b; ++c) {
      const double d = pixels(r, c) - norm.mean[c];
      norm.stddev[c] += d * d;
    }
  for (double& s : norm.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  return norm;
}

Matrix normalize_apply(const Normalizer& norm, const Matrix& pixels) {
  if (pixels.cols() != norm.bands())
    throw DimensionError("normalize_apply: " + std::to_string(pixels.cols()) +
                         " bands, normalizer has " + std::to_string(norm.bands()));
  Matrix out(pixels.rows(), pixels.cols());
  for (std::size_t r = 0; r < pixels.rows(); ++r)
    for (std::size_t c = 0; c < pixels.cols(); ++c)
      out(r, c) = (pixels(r, c) - norm.mean[c]) / norm.stddev[c];
  return out;
}

// --- split -----------------------------------------------------------------

namespace {

HsiDataset subset(const HsiDataset& ds, const std::vector<std::size_t>& rows,
                  std::vector<int> labels, std::size_t class_count) {
  HsiDataset out;
  out.pixels = ds.pixels.gather_rows(rows);
  out.labels = std::move(labels);
  out.band_count = ds.band_count;
  out.class_count = class_count;
  return out;
}

}  // namespace

Split split(const HsiDataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0))
    throw DomainError("split: train_fraction must lie in (0, 1]");
  for (int u : spec.unknown_classes)
    if (u < 1 || static_cast<std::size_t>(u) > ds.class_count)
      throw DomainError("split: unknown class " + std::to_string(u) + " not in dataset");
  if (spec.unknown_classes.size() >= ds.class_count)
    throw DomainError("split: at least one class must stay known");

  Split out;
  std::vector<std::vector<std::size_t>> by_class(ds.class_count + 1);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] > 0) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  Rng rng(spec.seed);
  std::vector<int> train_labels, test_labels, unknown_labels;
  for (std::size_t c = 1; c <= ds.class_count; ++c) {
    auto& rows = by_class[c];
    if (spec.unknown_classes.contains(static_cast<int>(c))) {
      for (std::size_t r : rows) {
        out.unknown_index.push_back(r);
        unknown_labels.push_back(static_cast<int>(c));
      }
      continue;
    }
    if (rows.size() < 2)
      throw DomainError("split: known class " + std::to_string(c) + " has fewer than 2 pixels");
    out.known_classes.push_back(static_cast<int>(c));
    const int dense = static_cast<int>(out.known_classes.size());
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(rows.size()))),
        1, rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k < n_train) {
        out.train_index.push_back(rows[k]);
        train_labels.push_back(dense);
      } else {
        out.test_index.push_back(rows[k]);
        test_labels.push_back(dense);
      }
    }
  }
  const std::size_t known = out.known_classes.size();
  out.train_known = subset(ds, out.train_index, std::move(train_labels), known);
  out.test_known = subset(ds, out.test_index, std::move(test_labels), known);
  out.unknown_pool = subset(ds, out.unknown_index, std::move(unknown_labels), ds.class_count);
  return out;
}

// --- synthetic generator ---------------------------------------------------

namespace {

// Smooth non-negative spectrum: a small offset plus three Gaussian bumps.
std::vector<double> random_spectrum(std::size_t bands, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double b = static_cast<double>(bands);
  std::vector<double> s(bands, 0.05 * unit(rng));
  for (int bump = 0; bump < 3; ++bump) {
    const double amp = 0.2 + 0.8 * unit(rng);
    const double center = b * unit(rng);
    const double width = b / 20.0 + (b / 5.0 - b / 20.0) * unit(rng);
    for (std::size_t k = 0; k < bands; ++k) {
      const double d = (static_cast<double>(k) - center) / width;
      s[k] += amp * std::exp(-0.5 * d * d);
    }
  }
  return s;
}

}  // namespace

SynthOutput synth_generate_detailed(const SynthParams& p) {
  if (p.classes < 1) throw DomainError("synth: need at least one class");
  if (p.per_class < 1) throw DomainError("synth: per_class must be >= 1");
  if (p.bases_per_class < 1) throw DomainError("synth: bases_per_class must be >= 1");
  if (p.bands < p.bases_per_class) throw DomainError("synth: bands must be >= bases_per_class");
  if (!(p.dirichlet_alpha > 0.0)) throw DomainError("synth: dirichlet_alpha must be > 0");
  if (!(p.noise_sigma >= 0.0)) throw DomainError("synth: noise_sigma must be >= 0");

  Rng rng(p.seed);
  const std::size_t pool = p.classes * p.bases_per_class;
  SynthOutput out;
  out.bases = Matrix(pool, p.bands);
  for (std::size_t r = 0; r < pool; ++r) {
    const auto s = random_spectrum(p.bands, rng);
    for (std::size_t k = 0; k < p.bands; ++k)
      out.bases(r, k) = static_cast<double>(static_cast<float>(s[k]));
  }

  const std::size_t n = p.classes * p.per_class;
  const std::size_t m = p.bases_per_class;
  Matrix pixels(n, p.bands);
  std::vector<int> labels(n);
  out.abundances = Matrix(n, m);
  std::gamma_distribution<double> gamma(p.dirichlet_alpha, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> a(m);
  for (std::size_t c = 0; c < p.classes; ++c) {
    for (std::size_t i = 0; i < p.per_class; ++i) {
      const std::size_t row = c * p.per_class + i;
      labels[row] = static_cast<int>(c + 1);
      double sum = 0.0;
      for (double& x : a) {
        x = gamma(rng);
        sum += x;
      }
      if (sum == 0.0) {
        std::fill(a.begin(), a.end(), 0.0);
        a[0] = 1.0;
        sum = 1.0;
      }
      for (std::size_t j = 0; j < m; ++j) out.abundances(row, j) = a[j] / sum;
      for (std::size_t k = 0; k < p.bands; ++k) {
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j) v += out.abundances(row, j) * out.bases(c * m + j, k);
        if (p.noise_sigma > 0.0) v += p.noise_sigma * noise(rng);
        pixels(row, k) = static_cast<double>(static_cast<float>(v));
      }
    }
  }
  out.dataset = make_dataset(std::move(pixels), std::move(labels));
  return out;
}

HsiDataset synth_generate(const SynthParams& params) {
  return synth_generate_detailed(params).dataset;
}

}  // namespace rdosr::data
