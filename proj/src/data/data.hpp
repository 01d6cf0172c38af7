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
//
// Synthetic text-line data: a deterministic glyph renderer with per-character
// style jitter, grayscale PGM + TSV manifest persistence, isotropic rescaling
// with per-image standardization, and width-bucketed batch assembly.

#ifndef MIXCTC_DATA_DATA_HPP
#define MIXCTC_DATA_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "autodiff/tensor.hpp"
#include "common/config.hpp"
#include "common/rng.hpp"
#include "ctc/ctc.hpp"

namespace mixctc::data {

// 8-bit grayscale line image; 0 is ink, 255 is paper.
struct LineImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // row-major height x width
  std::string transcript;
};

// Grayscale buffer with fractional values, produced by rescaling.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major, [0, 255] before standardization
};

// Randomized rendering style. Every character draws its own horizontal
// scale, shear, vertical jitter, and trailing gap from these ranges; the
// background level is drawn once per line and Gaussian pixel noise last.
struct StyleParams {
  int canvas_height = 32;   // rendered line height in pixels
  int cell_size = 3;        // vertical pixels per glyph cell (glyphs are 5x7)
  double scale_min = 0.8;   // horizontal cell scale range
  double scale_max = 1.4;
  double shear_min = -0.3;  // horizontal shift per vertical pixel
  double shear_max = 0.3;
  int jitter = 2;           // vertical baseline jitter, +- pixels
  int spacing_min = 1;      // gap after each character, pixels
  int spacing_max = 4;
  int margin = 3;           // blank border on the left and right
  double noise_sigma = 8.0;
  int background_min = 200;
  int background_max = 255;
};

// True for every character the built-in 5x7 font can draw.
bool has_glyph(char c);

// Draws the text onto a fresh canvas. Style draws are consumed per character
// in text order, so two renders from the same RNG state agree on a shared
// prefix and appending characters strictly widens the line.
// Throws UnknownGlyph for characters outside the font.
LineImage render_line(const std::string& text, Rng& rng, const StyleParams& style);

// Binary 8-bit PGM (P5, maxval 255). Loading anything else is MalformedPGM.
void save_pgm(const std::string& path, const LineImage& image);
LineImage load_pgm(const std::string& path);

enum class Split { kTrain, kValid };

struct Record {
  std::string path;  // relative to the dataset root, e.g. "img/train_000012.pgm"
  std::string transcript;
  Split split = Split::kTrain;
  LineImage image;  // loaded eagerly; desk-scale datasets fit in memory
};

// A dataset directory: manifest.tsv + img/*.pgm + genconfig.txt.
struct Dataset {
  std::string root;
  std::string alphabet;
  KeyValueConfig genconfig;
  std::vector<Record> records;

  std::vector<int> split_indices(Split split) const;
  ctc::Vocabulary vocabulary() const { return ctc::Vocabulary(alphabet); }
};

// Generation parameters; persisted as genconfig.txt so a dataset directory
// can be regenerated byte-identically from this struct alone.
struct GenConfig {
  int lines = 1000;
  double val_fraction = 0.1;
  std::string alphabet = "abcdefghij";
  int min_len = 1;
  int max_len = 12;
  uint64_t seed = 1;
  StyleParams style;

  void validate() const;  // InvalidConfig on bad ranges, UnknownGlyph on font gaps
  KeyValueConfig serialize() const;
  static GenConfig parse(const KeyValueConfig& kv);
};

struct GenSummary {
  int train_lines = 0;
  int valid_lines = 0;
};

// Renders `lines` random transcripts and writes the directory layout above.
// The first (1 - val_fraction) share becomes the train split.
GenSummary generate_dataset(const std::string& dir, const GenConfig& config);

// Reads manifest + genconfig and every referenced image.
// MalformedManifest/MalformedPGM carry row or path diagnostics.
Dataset load_dataset(const std::string& dir);

// Bilinear isotropic rescale to the target height; width scales by the same
// factor (rounded, floor 1).
GrayImage rescale_bilinear(const LineImage& image, int target_height);

// In-place shift/scale to zero mean and unit variance (variance floor 1e-6).
void standardize(std::vector<double>& pixels);

// rescale + standardize for a single image, as a [height, width] tensor.
autodiff::TensorPtr preprocess(const LineImage& image, int target_height);

// One training batch. Images were padded to a common width with white
// *before* standardization, so padding looks like paper, not like a constant
// step the network would have to explain away.
struct Batch {
  autodiff::TensorPtr images;  // [B, 1, H, W_pad]
  std::vector<int> widths;     // per-sample width after rescaling, pre-padding
  std::vector<ctc::LabelSequence> labels;
  std::vector<std::string> transcripts;
  int bucket = 0;
};

// Sorts record indices by preprocessed width and cuts consecutive runs of
// batch_size (the last run may be short). Throws EmptyDataset on no input.
std::vector<std::vector<int>> bucket_indices(const std::vector<int>& widths, int batch_size);

// Width each record would have after rescaling to the target height.
int scaled_width(const LineImage& image, int target_height);

// Assembles the listed records into a batch: rescale, pad to the widest
// member rounded up to width_multiple, standardize, encode transcripts.
Batch make_batch(const Dataset& dataset, const std::vector<int>& indices, int target_height,
                 int width_multiple, const ctc::Vocabulary& vocab);

}  // namespace mixctc::data

#endif  // MIXCTC_DATA_DATA_HPP
