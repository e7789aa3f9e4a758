#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

inline constexpr std::size_t kImageSide = 16;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr int kGlyphCount = 16;

// Images are flattened rows of 256 pixels in [0,1].
struct LabeledSet {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  LabeledSet subset(std::span<const std::size_t> indices) const;
};

struct DatasetSplit {
  LabeledSet train;
  LabeledSet test;
  int num_classes = 0;
  std::uint64_t seed = 0;
};

struct SynthSignsOptions {
  std::uint64_t seed = 42;
  int num_classes = 8;
  std::size_t n_train = 4000;
  std::size_t n_test = 1000;
  double noise_sigma = 0.05;
  double max_shift_px = 2.0;
  double scale_jitter = 0.15;
  // Glyph pixels are painted at `foreground` over a `background` field.
  double background = 0.2;
  double foreground = 0.8;
};

// Glyph order: circle, square, triangle, cross, bar, ring, diamond, chevron,
// then eight further shapes for K up to 16.
const char* glyph_name(int cls);
// Noise-free, centred, unit-scale rendering of a class at the intensities
// of `opts`.
Tensor glyph_template(int cls, const SynthSignsOptions& opts = {});

DatasetSplit generate_synthsigns(const SynthSignsOptions& opts);

// <root>/<class>/*.pgm|*.ppm (binary P5/P6, maxval 255). Images are converted
// to grayscale and bilinearly resized to 16x16. Within each class, files are
// taken in lexicographic order and every fifth one goes to the test split.
DatasetSplit load_image_folder(const std::filesystem::path& root);

// Decoded grayscale image in [0,1], row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
};
GrayImage read_netpbm(const std::filesystem::path& file);
void write_pgm(const std::filesystem::path& file, std::span<const double> pixels, std::size_t width,
               std::size_t height);
// Half-pixel-centre bilinear resampling with edge clamping.
std::vector<double> resize_bilinear(const GrayImage& img, std::size_t width, std::size_t height);

// Seeded shuffled mini-batches; each call to next_epoch draws a fresh
// permutation from the same stream. The last short batch is kept.
class Batcher {
 public:
  Batcher(std::size_t n, std::size_t batch_size, Rng rng);
  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
};

}  // namespace semcom
