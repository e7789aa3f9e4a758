#include "semcom/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr double kPixel = 2.0 / static_cast<double>(kImageSide);  // canvas units per pixel
constexpr int kSuper = 4;

bool in_triangle(double u, double v) { return v >= -0.5 && v <= 0.6 - (1.1 / 0.6) * std::abs(u); }

// Canvas is [-1,1]^2 with v pointing up; glyphs are sized to roughly 0.6.
bool inside(int cls, double u, double v) {
  const double r2 = u * u + v * v;
  const double au = std::abs(u), av = std::abs(v);
  switch (cls) {
    case 0: return r2 <= 0.36;
    case 1: return au <= 0.5 && av <= 0.5;
    case 2: return in_triangle(u, v);
    case 3: return (au <= 0.15 && av <= 0.6) || (av <= 0.15 && au <= 0.6);
    case 4: return au <= 0.65 && av <= 0.18;
    case 5: return r2 >= 0.38 * 0.38 && r2 <= 0.62 * 0.62;
    case 6: return au + av <= 0.65;
    case 7: return au <= 0.6 && std::abs(v - (0.35 - (0.7 / 0.6) * au)) <= 0.15;
    case 8: return au <= 0.18 && av <= 0.65;
    case 9:
      return au <= 0.5 && av <= 0.5 &&
             (std::abs(u - v) / std::sqrt(2.0) <= 0.13 || std::abs(u + v) / std::sqrt(2.0) <= 0.13);
    case 10: return au <= 0.6 && av <= 0.6 && !(au <= 0.38 && av <= 0.38);
    case 11: return r2 <= 0.28 * 0.28;
    case 12: {
      const double w = v + 0.2;
      return w >= 0.0 && u * u + w * w <= 0.36;
    }
    case 13: return (std::abs(v - 0.45) <= 0.15 && au <= 0.6) || (au <= 0.15 && v <= 0.45 && v >= -0.6);
    case 14: return in_triangle(u, v) && !in_triangle(u * 1.8, (v + 0.12) * 1.8);
    case 15: return in_triangle(u, -v);
    default: return false;
  }
}

void render(int cls, double tx, double ty, double s, std::span<double> out) {
  for (std::size_t i = 0; i < kImageSide; ++i) {
    for (std::size_t j = 0; j < kImageSide; ++j) {
      int hits = 0;
      for (int a = 0; a < kSuper; ++a) {
        for (int b = 0; b < kSuper; ++b) {
          const double x = (static_cast<double>(j) + (b + 0.5) / kSuper) * kPixel - 1.0;
          const double y = 1.0 - (static_cast<double>(i) + (a + 0.5) / kSuper) * kPixel;
          if (inside(cls, (x - tx) / s, (y - ty) / s)) ++hits;
        }
      }
      out[i * kImageSide + j] = static_cast<double>(hits) / (kSuper * kSuper);
    }
  }
}

LabeledSet make_split(const SynthSignsOptions& o, std::size_t count, std::size_t first_index,
                      std::string_view name) {
  LabeledSet set;
  set.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) set.labels[i] = static_cast<int>(i % static_cast<std::size_t>(o.num_classes));
  Rng order(o.seed, std::string("synthsigns/labels/") + std::string(name));
  order.shuffle(std::span(set.labels));

  set.images = Tensor({count, kImagePixels});
  const std::uint64_t base = stream_seed(o.seed, "synthsigns/samples");
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(stream_seed(base, static_cast<std::uint64_t>(first_index + i)));
    const double tx = rng.uniform(-o.max_shift_px, o.max_shift_px) * kPixel;
    const double ty = rng.uniform(-o.max_shift_px, o.max_shift_px) * kPixel;
    const double s = 1.0 + rng.uniform(-o.scale_jitter, o.scale_jitter);
    auto px = set.images.row(i);
    render(set.labels[i], tx, ty, s, px);
    for (double& p : px) p = o.background + (o.foreground - o.background) * p;
    if (o.noise_sigma > 0.0)
      for (double& p : px) p = std::clamp(p + o.noise_sigma * rng.normal(), 0.0, 1.0);
  }
  return set;
}

}  // namespace

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.images = gather_rows(images, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  return out;
}

const char* glyph_name(int cls) {
  static constexpr const char* kNames[kGlyphCount] = {
      "circle", "square", "triangle", "cross",   "bar",       "ring",     "diamond",  "chevron",
      "vbar",   "xcross", "frame",    "dot",     "halfdisk",  "tee",      "outline",  "downtri"};
  require(cls >= 0 && cls < kGlyphCount, ErrorCode::kInvalidArgument, "glyph index out of range");
  return kNames[cls];
}

Tensor glyph_template(int cls, const SynthSignsOptions& o) {
  require(cls >= 0 && cls < kGlyphCount, ErrorCode::kInvalidArgument, "glyph index out of range");
  Tensor t({kImagePixels});
  render(cls, 0.0, 0.0, 1.0, t.data());
  for (double& p : t.data()) p = o.background + (o.foreground - o.background) * p;
  return t;
}

DatasetSplit generate_synthsigns(const SynthSignsOptions& o) {
  require(o.num_classes >= 2, ErrorCode::kInvalidArgument, "SynthSigns needs at least 2 classes");
  require(o.num_classes <= kGlyphCount, ErrorCode::kInvalidArgument,
          "SynthSigns glyph library has " + std::to_string(kGlyphCount) + " shapes, asked for " +
              std::to_string(o.num_classes));
  require(o.n_train > 0 && o.n_test > 0, ErrorCode::kInvalidArgument, "SynthSigns split sizes must be positive");
  require(o.background >= 0.0 && o.foreground <= 1.0 && o.background < o.foreground, ErrorCode::kInvalidArgument,
          "SynthSigns intensities must satisfy 0 <= background < foreground <= 1");
  DatasetSplit split;
  split.num_classes = o.num_classes;
  split.seed = o.seed;
  split.train = make_split(o, o.n_train, 0, "train");
  split.test = make_split(o, o.n_test, o.n_train, "test");
  return split;
}

// ---------------------------------------------------------------------------
// Netpbm ingestion

namespace {

std::size_t read_header_int(std::istream& in, const std::filesystem::path& file) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  std::size_t v = 0;
  if (!(in >> v)) fail(ErrorCode::kIo, "malformed netpbm header: " + file.string());
  return v;
}

}  // namespace

GrayImage read_netpbm(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open image: " + file.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    fail(ErrorCode::kIo, "not a binary P5/P6 image: " + file.string());
  const bool color = magic[1] == '6';
  GrayImage img;
  img.width = read_header_int(in, file);
  img.height = read_header_int(in, file);
  const std::size_t maxval = read_header_int(in, file);
  if (img.width == 0 || img.height == 0 || maxval != 255)
    fail(ErrorCode::kIo, "unsupported netpbm geometry or maxval: " + file.string());
  in.get();  // single whitespace before raster
  const std::size_t channels = color ? 3 : 1;
  std::vector<unsigned char> raw(img.width * img.height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    fail(ErrorCode::kIo, "truncated image raster: " + file.string());
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (color) {
      const double r = raw[3 * i], g = raw[3 * i + 1], b = raw[3 * i + 2];
      img.pixels[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    } else {
      img.pixels[i] = raw[i] / 255.0;
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& file, std::span<const double> pixels, std::size_t width,
               std::size_t height) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write image: " + file.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  for (double p : pixels) out.put(static_cast<char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
  if (!out) fail(ErrorCode::kIo, "write failed: " + file.string());
}

std::vector<double> resize_bilinear(const GrayImage& img, std::size_t width, std::size_t height) {
  std::vector<double> out(width * height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  auto src = [&](std::size_t x, std::size_t y) { return img.pixels[y * img.width + x]; };
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src(x0, y0) * (1.0 - wx) + src(x1, y0) * wx;
      const double bot = src(x0, y1) * (1.0 - wx) + src(x1, y1) * wx;
      out[y * width + x] = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
    }
  }
  return out;
}

DatasetSplit load_image_folder(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "image folder not found: " + root.string());
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());
  if (classes.size() < 2) fail(ErrorCode::kIo, "image folder needs at least two class directories: " + root.string());

  std::vector<double> train_px, test_px;
  std::vector<int> train_lab, test_lab;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[c])) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::kIo, "empty class directory: " + classes[c].string());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto px = resize_bilinear(read_netpbm(files[i]), kImageSide, kImageSide);
      const bool test = i % 5 == 4;
      auto& dst = test ? test_px : train_px;
      dst.insert(dst.end(), px.begin(), px.end());
      (test ? test_lab : train_lab).push_back(static_cast<int>(c));
    }
  }
  DatasetSplit split;
  split.num_classes = static_cast<int>(classes.size());
  auto build = [](std::vector<double>& px, std::vector<int>& lab) {
    LabeledSet s;
    if (!lab.empty()) s.images = Tensor({lab.size(), kImagePixels}, std::move(px));
    s.labels = std::move(lab);
    return s;
  };
  split.train = build(train_px, train_lab);
  split.test = build(test_px, test_lab);
  return split;
}

// ---------------------------------------------------------------------------

Batcher::Batcher(std::size_t n, std::size_t batch_size, Rng rng)
    : n_(n), batch_size_(batch_size), rng_(rng) {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
}

std::vector<std::vector<std::size_t>> Batcher::next_epoch() {
  std::vector<std::size_t> perm(n_);
  for (std::size_t i = 0; i < n_; ++i) perm[i] = i;
  rng_.shuffle(std::span(perm));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n_; i += batch_size_)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_, i + batch_size_)));
  return out;
}

}  // namespace semcom
