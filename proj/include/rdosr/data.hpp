#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdosr/layers.hpp"
#include "rdosr/matrix.hpp"

namespace rdosr::data {

// Labelled pixel spectra. labels[i] is 0 for unlabelled, else 1..class_count.
struct HsiDataset {
  Matrix pixels;  // N × B
  std::vector<int> labels;
  std::size_t band_count = 0;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  // Pixel count of each class 1..class_count (index 0 holds unlabelled).
  std::vector<std::size_t> class_histogram() const;
  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

// Build a dataset, inferring class_count from the largest label, and validate it.
HsiDataset make_dataset(Matrix pixels, std::vector<int> labels);

// --- binary container ------------------------------------------------------
//
// Cube:   "HSID" u32 version=1, u32 H, u32 W, u32 B, then H·W·B float32,
//         pixel-major in raster order.
// Labels: "HSIL" u32 version=1, u32 H, u32 W, then H·W int32.
// All little-endian.

enum class FormatErrc { io, bad_magic, bad_version, truncated, dimension_mismatch, invalid };

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

struct Cube {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t bands = 0;
  Matrix pixels;  // (H·W) × B, values exactly representable as float32
};

struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::int32_t> labels;  // H·W
};

inline constexpr std::uint32_t kContainerVersion = 1;

Cube load_cube(const std::filesystem::path& path);
LabelMap load_labels(const std::filesystem::path& path);
void save_cube(const std::filesystem::path& path, const Cube& cube);
void save_labels(const std::filesystem::path& path, const LabelMap& labels);

// Keeps only labelled pixels. Throws FormatError(dimension_mismatch) when H×W differ.
HsiDataset pair(const Cube& cube, const LabelMap& labels);
HsiDataset load_dataset(const std::filesystem::path& cube, const std::filesystem::path& labels);

// Writes a dataset as a 1 × N raster.
void save_dataset(const std::filesystem::path& cube, const std::filesystem::path& labels,
                  const HsiDataset& ds);

// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// --- normalisation ---------------------------------------------------------

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // > 0

  std::size_t bands() const noexcept { return mean.size(); }
};

// Per-band mean and population standard deviation. Zero-variance bands get 1.
Normalizer normalize_fit(const Matrix& pixels);
Matrix normalize_apply(const Normalizer& norm, const Matrix& pixels);

// --- known/unknown split ---------------------------------------------------

struct SplitSpec {
  std::set<int> unknown_classes;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct Split {
  HsiDataset train_known;  // labels re-indexed 1..L
  HsiDataset test_known;   // labels re-indexed 1..L
  HsiDataset unknown_pool; // original labels
  std::vector<int> known_classes;  // original id of dense label k+1 at index k
  std::vector<std::size_t> train_index, test_index, unknown_index;  // rows of the source
};

// Unknown classes go to unknown_pool; each known class is shuffled and split
// by train_fraction independently. Unlabelled pixels are dropped.
Split split(const HsiDataset& ds, const SplitSpec& spec);

// --- synthetic linear-mixing generator -------------------------------------

struct SynthParams {
  std::size_t classes = 6;
  std::size_t bands = 64;
  std::size_t per_class = 2000;
  std::size_t bases_per_class = 3;
  double dirichlet_alpha = 1.0;
  double noise_sigma = 0.01;
  std::uint64_t seed = 42;
};

struct SynthOutput {
  HsiDataset dataset;
  Matrix bases;       // (classes·bases_per_class) × bands, class k owns rows [k·m, (k+1)·m)
  Matrix abundances;  // N × bases_per_class
};

// Each class owns a disjoint set of smooth non-negative basis spectra; a pixel
// is a Dirichlet(α) mixture of its class's bases plus Gaussian noise. Pixel
// values are rounded to float32 so the dataset survives the container format.
SynthOutput synth_generate_detailed(const SynthParams& params);
HsiDataset synth_generate(const SynthParams& params);

}  // namespace rdosr::data
