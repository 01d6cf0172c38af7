// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "data/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "common/errors.hpp"

namespace mixctc::data {

namespace fs = std::filesystem;

namespace {

// 5x7 bitmap font, one byte per row, low five bits used (bit 4 = leftmost
// column). Lowercase letters, digits, and space.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kGlyphs[] = {
    {'a', {0b00000, 0b00000, 0b01110, 0b00001, 0b01111, 0b10001, 0b01111}},
    {'b', {0b10000, 0b10000, 0b10110, 0b11001, 0b10001, 0b10001, 0b11110}},
    {'c', {0b00000, 0b00000, 0b01110, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'d', {0b00001, 0b00001, 0b01101, 0b10011, 0b10001, 0b10001, 0b01111}},
    {'e', {0b00000, 0b00000, 0b01110, 0b10001, 0b11111, 0b10000, 0b01110}},
    {'f', {0b00110, 0b01001, 0b01000, 0b11100, 0b01000, 0b01000, 0b01000}},
    {'g', {0b00000, 0b01111, 0b10001, 0b10001, 0b01111, 0b00001, 0b01110}},
    {'h', {0b10000, 0b10000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001}},
    {'i', {0b00100, 0b00000, 0b01100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'j', {0b00010, 0b00000, 0b00110, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'k', {0b10000, 0b10000, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010}},
    {'l', {0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'m', {0b00000, 0b00000, 0b11010, 0b10101, 0b10101, 0b10101, 0b10101}},
    {'n', {0b00000, 0b00000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001}},
    {'o', {0b00000, 0b00000, 0b01110, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'p', {0b00000, 0b10110, 0b11001, 0b10001, 0b11110, 0b10000, 0b10000}},
    {'q', {0b00000, 0b01101, 0b10011, 0b10001, 0b01111, 0b00001, 0b00001}},
    {'r', {0b00000, 0b00000, 0b10110, 0b11001, 0b10000, 0b10000, 0b10000}},
    {'s', {0b00000, 0b00000, 0b01111, 0b10000, 0b01110, 0b00001, 0b11110}},
    {'t', {0b01000, 0b01000, 0b11100, 0b01000, 0b01000, 0b01001, 0b00110}},
    {'u', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b10011, 0b01101}},
    {'v', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'w', {0b00000, 0b00000, 0b10001, 0b10001, 0b10101, 0b10101, 0b01010}},
    {'x', {0b00000, 0b00000, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001}},
    {'y', {0b00000, 0b10001, 0b10001, 0b10001, 0b01111, 0b00001, 0b01110}},
    {'z', {0b00000, 0b00000, 0b11111, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {' ', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000}},
};

constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 7;

const Glyph* find_glyph(char c) {
  for (const Glyph& g : kGlyphs) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

// Geometry of one character placement, fully determined by its style draws.
struct CharBox {
  const Glyph* glyph;
  int cell_w;    // horizontal pixels per glyph cell
  double shear;  // column shift per vertical pixel (applied around the base)
  int jitter;    // vertical offset
  int spacing;   // gap after this character
  int width;     // total box width including shear overhang
  int lead;      // left inset so sheared rows stay inside the box
};

CharBox layout_char(char c, Rng& rng, const StyleParams& style) {
  const Glyph* glyph = find_glyph(c);
  if (glyph == nullptr) {
    throw UnknownGlyph(std::string("no glyph for character '") + c + "'");
  }
  CharBox box;
  box.glyph = glyph;
  const double scale = rng.uniform(style.scale_min, style.scale_max);
  box.cell_w = std::max(1, static_cast<int>(std::lround(style.cell_size * scale)));
  box.shear = rng.uniform(style.shear_min, style.shear_max);
  box.jitter = style.jitter > 0 ? rng.uniform_int(2 * style.jitter + 1) - style.jitter : 0;
  box.spacing = style.spacing_min + rng.uniform_int(style.spacing_max - style.spacing_min + 1);

  // Rows shift horizontally by shear * (distance above the glyph base). A
  // negative shear would push rows left of the pen, so the whole glyph leads
  // with the overhang instead.
  const int glyph_h = kGlyphRows * style.cell_size;
  const int top_shift = static_cast<int>(std::lround(box.shear * (glyph_h - 1)));
  box.lead = std::max(0, -top_shift);
  box.width = kGlyphCols * box.cell_w + std::abs(top_shift);
  return box;
}

}  // namespace

bool has_glyph(char c) { return find_glyph(c) != nullptr; }

LineImage render_line(const std::string& text, Rng& rng, const StyleParams& style) {
  if (text.empty()) throw InvalidConfig("cannot render an empty line");
  const int background = style.background_min +
                         rng.uniform_int(style.background_max - style.background_min + 1);

  std::vector<CharBox> boxes;
  boxes.reserve(text.size());
  int text_width = 0;
  for (char c : text) {
    boxes.push_back(layout_char(c, rng, style));
    text_width += boxes.back().width + boxes.back().spacing;
  }
  text_width -= boxes.back().spacing;  // no gap after the last character

  LineImage image;
  image.height = style.canvas_height;
  image.width = text_width + 2 * style.margin;
  image.transcript = text;
  image.pixels.assign(static_cast<size_t>(image.height) * image.width,
                      static_cast<uint8_t>(background));

  const int glyph_h = kGlyphRows * style.cell_size;
  int pen_x = style.margin;
  for (const CharBox& box : boxes) {
    const int top = (image.height - glyph_h) / 2 + box.jitter;
    for (int gy = 0; gy < kGlyphRows; ++gy) {
      const uint8_t row_bits = box.glyph->rows[gy];
      for (int sy = 0; sy < style.cell_size; ++sy) {
        const int y = top + gy * style.cell_size + sy;
        if (y < 0 || y >= image.height) continue;
        // Shear grows toward the top of the glyph; the base row stays put.
        const int above_base = glyph_h - 1 - (gy * style.cell_size + sy);
        const int shift = box.lead + static_cast<int>(std::lround(box.shear * above_base));
        for (int gx = 0; gx < kGlyphCols; ++gx) {
          if ((row_bits & (1 << (kGlyphCols - 1 - gx))) == 0) continue;
          for (int sx = 0; sx < box.cell_w; ++sx) {
            const int x = pen_x + shift + gx * box.cell_w + sx;
            if (x < 0 || x >= image.width) continue;
            image.pixels[static_cast<size_t>(y) * image.width + x] = 0;
          }
        }
      }
    }
    pen_x += box.width + box.spacing;
  }

  if (style.noise_sigma > 0.0) {
    for (uint8_t& p : image.pixels) {
      const double v = p + rng.normal() * style.noise_sigma;
      p = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
  }
  return image;
}

void save_pgm(const std::string& path, const LineImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string pgm_token(std::istream& in, const std::string& path) {
  std::string token;
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (token.empty()) throw MalformedPGM("'" + path + "': truncated header");
  return token;
}

int pgm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string token = pgm_token(in, path);
  try {
    size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size() || value < 1) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw MalformedPGM("'" + path + "': bad " + what + " '" + token + "'");
  }
}

}  // namespace

LineImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  if (pgm_token(in, path) != "P5") {
    throw MalformedPGM("'" + path + "': not a binary PGM (P5)");
  }
  LineImage image;
  image.width = pgm_int(in, path, "width");
  image.height = pgm_int(in, path, "height");
  const int maxval = pgm_int(in, path, "maxval");
  if (maxval != 255) {
    throw MalformedPGM("'" + path + "': maxval " + std::to_string(maxval) + ", expected 255");
  }
  // Exactly one whitespace byte separates the header from the raster.
  const size_t count = static_cast<size_t>(image.width) * image.height;
  image.pixels.resize(count);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(count));
  if (static_cast<size_t>(in.gcount()) != count) {
    throw MalformedPGM("'" + path + "': raster has " + std::to_string(in.gcount()) +
                       " bytes, expected " + std::to_string(count));
  }
  return image;
}

std::vector<int> Dataset::split_indices(Split split) const {
  std::vector<int> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(static_cast<int>(i));
  }
  return out;
}

void GenConfig::validate() const {
  if (lines < 2) throw InvalidConfig("need at least 2 lines (one per split)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidConfig("val_fraction must be inside (0, 1)");
  }
  if (alphabet.empty()) throw InvalidConfig("alphabet is empty");
  for (size_t i = 0; i < alphabet.size(); ++i) {
    if (alphabet.find(alphabet[i], i + 1) != std::string::npos) {
      throw InvalidConfig(std::string("alphabet repeats character '") + alphabet[i] + "'");
    }
    if (!has_glyph(alphabet[i])) {
      throw UnknownGlyph(std::string("no glyph for character '") + alphabet[i] + "'");
    }
  }
  if (min_len < 1 || max_len < min_len) throw InvalidConfig("need 1 <= min_len <= max_len");
  if (style.canvas_height < kGlyphRows * style.cell_size) {
    throw InvalidConfig("canvas shorter than a glyph");
  }
  if (style.scale_min <= 0.0 || style.scale_max < style.scale_min) {
    throw InvalidConfig("bad scale range");
  }
  if (style.spacing_min < 0 || style.spacing_max < style.spacing_min) {
    throw InvalidConfig("bad spacing range");
  }
  if (style.background_min < 0 || style.background_max > 255 ||
      style.background_max < style.background_min) {
    throw InvalidConfig("bad background range");
  }
}

KeyValueConfig GenConfig::serialize() const {
  KeyValueConfig kv;
  kv.set_int("lines", lines);
  kv.set_double("val_fraction", val_fraction);
  kv.set("alphabet", alphabet);
  kv.set_int("min_len", min_len);
  kv.set_int("max_len", max_len);
  kv.set_int("seed", static_cast<int64_t>(seed));
  kv.set_int("style.canvas_height", style.canvas_height);
  kv.set_int("style.cell_size", style.cell_size);
  kv.set_double("style.scale_min", style.scale_min);
  kv.set_double("style.scale_max", style.scale_max);
  kv.set_double("style.shear_min", style.shear_min);
  kv.set_double("style.shear_max", style.shear_max);
  kv.set_int("style.jitter", style.jitter);
  kv.set_int("style.spacing_min", style.spacing_min);
  kv.set_int("style.spacing_max", style.spacing_max);
  kv.set_int("style.margin", style.margin);
  kv.set_double("style.noise_sigma", style.noise_sigma);
  kv.set_int("style.background_min", style.background_min);
  kv.set_int("style.background_max", style.background_max);
  return kv;
}

GenConfig GenConfig::parse(const KeyValueConfig& kv) {
  kv.reject_unknown_keys({"lines", "val_fraction", "alphabet", "min_len", "max_len", "seed",
                          "style.canvas_height", "style.cell_size", "style.scale_min",
                          "style.scale_max", "style.shear_min", "style.shear_max", "style.jitter",
                          "style.spacing_min", "style.spacing_max", "style.margin",
                          "style.noise_sigma", "style.background_min", "style.background_max"});
  GenConfig config;
  config.lines = static_cast<int>(kv.get_int("lines", config.lines));
  config.val_fraction = kv.get_double("val_fraction", config.val_fraction);
  config.alphabet = kv.get("alphabet", config.alphabet);
  config.min_len = static_cast<int>(kv.get_int("min_len", config.min_len));
  config.max_len = static_cast<int>(kv.get_int("max_len", config.max_len));
  config.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(config.seed)));
  StyleParams& s = config.style;
  s.canvas_height = static_cast<int>(kv.get_int("style.canvas_height", s.canvas_height));
  s.cell_size = static_cast<int>(kv.get_int("style.cell_size", s.cell_size));
  s.scale_min = kv.get_double("style.scale_min", s.scale_min);
  s.scale_max = kv.get_double("style.scale_max", s.scale_max);
  s.shear_min = kv.get_double("style.shear_min", s.shear_min);
  s.shear_max = kv.get_double("style.shear_max", s.shear_max);
  s.jitter = static_cast<int>(kv.get_int("style.jitter", s.jitter));
  s.spacing_min = static_cast<int>(kv.get_int("style.spacing_min", s.spacing_min));
  s.spacing_max = static_cast<int>(kv.get_int("style.spacing_max", s.spacing_max));
  s.margin = static_cast<int>(kv.get_int("style.margin", s.margin));
  s.noise_sigma = kv.get_double("style.noise_sigma", s.noise_sigma);
  s.background_min = static_cast<int>(kv.get_int("style.background_min", s.background_min));
  s.background_max = static_cast<int>(kv.get_int("style.background_max", s.background_max));
  config.validate();
  return config;
}

GenSummary generate_dataset(const std::string& dir, const GenConfig& config) {
  config.validate();
  fs::create_directories(fs::path(dir) / "img");

  int valid = static_cast<int>(std::llround(config.lines * config.val_fraction));
  valid = std::clamp(valid, 1, config.lines - 1);
  const int train = config.lines - valid;

  Rng rng(config.seed);
  std::ostringstream manifest;
  char name[48];
  for (int i = 0; i < config.lines; ++i) {
    const int length = config.min_len + rng.uniform_int(config.max_len - config.min_len + 1);
    std::string text;
    for (int c = 0; c < length; ++c) {
      text.push_back(config.alphabet[static_cast<size_t>(rng.uniform_int(
          static_cast<int>(config.alphabet.size())))]);
    }
    LineImage image = render_line(text, rng, config.style);
    if (i < train) {
      std::snprintf(name, sizeof(name), "img/train_%06d.pgm", i);
    } else {
      std::snprintf(name, sizeof(name), "img/valid_%06d.pgm", i - train);
    }
    save_pgm((fs::path(dir) / name).string(), image);
    manifest << name << '\t' << text << '\n';
  }

  {
    std::ofstream out(fs::path(dir) / "manifest.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in '" + dir + "'");
    out << manifest.str();
  }
  config.serialize().save_file((fs::path(dir) / "genconfig.txt").string());
  return {train, valid};
}

Dataset load_dataset(const std::string& dir) {
  Dataset dataset;
  dataset.root = dir;
  dataset.genconfig = KeyValueConfig::load_file((fs::path(dir) / "genconfig.txt").string());
  dataset.alphabet = dataset.genconfig.require("alphabet");

  std::ifstream in(fs::path(dir) / "manifest.tsv", std::ios::binary);
  if (!in) throw IoError("cannot open manifest in '" + dir + "'");
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw MalformedManifest("manifest row " + std::to_string(row) + ": expected path<TAB>text");
    }
    Record record;
    record.path = line.substr(0, tab);
    record.transcript = line.substr(tab + 1);
    const std::string base = fs::path(record.path).filename().string();
    if (base.rfind("train_", 0) == 0) {
      record.split = Split::kTrain;
    } else if (base.rfind("valid_", 0) == 0) {
      record.split = Split::kValid;
    } else {
      throw MalformedManifest("manifest row " + std::to_string(row) +
                              ": file name must start with train_ or valid_");
    }
    for (char c : record.transcript) {
      if (dataset.alphabet.find(c) == std::string::npos) {
        throw MalformedManifest("manifest row " + std::to_string(row) +
                                ": transcript character outside the alphabet");
      }
    }
    for (const Record& seen : dataset.records) {
      if (seen.path == record.path) {
        throw MalformedManifest("manifest row " + std::to_string(row) + ": duplicate path '" +
                                record.path + "'");
      }
    }
    record.image = load_pgm((fs::path(dir) / record.path).string());
    record.image.transcript = record.transcript;
    dataset.records.push_back(std::move(record));
  }
  if (dataset.records.empty()) throw EmptyDataset("'" + dir + "' lists no images");
  return dataset;
}

GrayImage rescale_bilinear(const LineImage& image, int target_height) {
  if (target_height < 1) throw InvalidConfig("target height must be positive");
  GrayImage out;
  const double scale = static_cast<double>(target_height) / image.height;
  out.height = target_height;
  out.width = std::max(1, static_cast<int>(std::lround(image.width * scale)));
  out.pixels.resize(static_cast<size_t>(out.height) * out.width);

  for (int y = 0; y < out.height; ++y) {
    // Align pixel centers; clamp samples to the source rectangle.
    const double sy = (y + 0.5) / scale - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int x = 0; x < out.width; ++x) {
      const double sx = (x + 0.5) / scale - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      const double top = (1.0 - fx) * image.pixels[static_cast<size_t>(y0) * image.width + x0] +
                         fx * image.pixels[static_cast<size_t>(y0) * image.width + x1];
      const double bottom =
          (1.0 - fx) * image.pixels[static_cast<size_t>(y1) * image.width + x0] +
          fx * image.pixels[static_cast<size_t>(y1) * image.width + x1];
      out.pixels[static_cast<size_t>(y) * out.width + x] = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

void standardize(std::vector<double>& pixels) {
  const double n = static_cast<double>(pixels.size());
  double mean = 0.0;
  for (double p : pixels) mean += p;
  mean /= n;
  double var = 0.0;
  for (double p : pixels) var += (p - mean) * (p - mean);
  var /= n;
  const double sd = std::sqrt(std::max(var, 1e-6));
  for (double& p : pixels) p = (p - mean) / sd;
}

autodiff::TensorPtr preprocess(const LineImage& image, int target_height) {
  GrayImage scaled = rescale_bilinear(image, target_height);
  standardize(scaled.pixels);
  return autodiff::Tensor::from({scaled.height, scaled.width}, std::move(scaled.pixels));
}

std::vector<std::vector<int>> bucket_indices(const std::vector<int>& widths, int batch_size) {
  if (widths.empty()) throw EmptyDataset("nothing to batch");
  if (batch_size < 1) throw InvalidConfig("batch size must be positive");
  std::vector<int> order(widths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return widths[a] < widths[b]; });
  std::vector<std::vector<int>> buckets;
  for (size_t at = 0; at < order.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(order.size(), at + static_cast<size_t>(batch_size));
    buckets.emplace_back(order.begin() + static_cast<long>(at),
                         order.begin() + static_cast<long>(end));
  }
  return buckets;
}

int scaled_width(const LineImage& image, int target_height) {
  const double scale = static_cast<double>(target_height) / image.height;
  return std::max(1, static_cast<int>(std::lround(image.width * scale)));
}

Batch make_batch(const Dataset& dataset, const std::vector<int>& indices, int target_height,
                 int width_multiple, const ctc::Vocabulary& vocab) {
  if (indices.empty()) throw EmptyDataset("empty batch request");
  const int batch = static_cast<int>(indices.size());

  std::vector<GrayImage> scaled;
  scaled.reserve(indices.size());
  int widest = 0;
  for (int idx : indices) {
    scaled.push_back(rescale_bilinear(dataset.records[static_cast<size_t>(idx)].image,
                                      target_height));
    widest = std::max(widest, scaled.back().width);
  }
  const int pad_width = ((widest + width_multiple - 1) / width_multiple) * width_multiple;

  Batch out;
  out.images = autodiff::Tensor::zeros({batch, 1, target_height, pad_width});
  for (int b = 0; b < batch; ++b) {
    const GrayImage& img = scaled[static_cast<size_t>(b)];
    // White padding first, then the per-image standardization, so the pad
    // region carries the same value as blank paper.
    std::vector<double> padded(static_cast<size_t>(target_height) * pad_width, 255.0);
    for (int y = 0; y < img.height; ++y) {
      std::copy(img.pixels.begin() + static_cast<long>(y) * img.width,
                img.pixels.begin() + static_cast<long>(y + 1) * img.width,
                padded.begin() + static_cast<long>(y) * pad_width);
    }
    standardize(padded);
    std::copy(padded.begin(), padded.end(),
              out.images->values.begin() + static_cast<long>(b) * target_height * pad_width);

    const Record& record = dataset.records[static_cast<size_t>(indices[static_cast<size_t>(b)])];
    out.widths.push_back(img.width);
    out.labels.push_back(ctc::LabelSequence::from_string(record.transcript, vocab));
    out.transcripts.push_back(record.transcript);
  }
  return out;
}

}  // namespace mixctc::data
