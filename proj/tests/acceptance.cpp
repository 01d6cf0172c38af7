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

// Release gate. Ten numbered criteria, one PASS/FAIL line each; the binary
// exits 0 only when every selected criterion passes. With no arguments all
// ten run in order; criterion numbers as arguments restrict the run while
// iterating on a fix (e.g. `mixctc_acceptance 5 9`).
//
//  1 alignment-loss-oracle      dynamic-programming loss == brute-force path
//                               enumeration on 1000 random small instances
//  2 alignment-loss-gradient    analytic gradients vs central finite
//                               differences of the enumerated loss
//  3 blend-linearity            mixed loss/gradients == lambda-weighted sum
//                               of single-label evaluations, depths 0/4/8
//  4 blend-endpoint-identity    lambda forced to 1 trains bit-identically to
//                               blending disabled
//  5 full-model-gradient        every parameter gradient of the tiny stack vs
//                               finite differences, with and without a plan
//  6 lambda-samplers            beta(1/2,1/2) KS distance and affine-uniform
//                               bounds/mean
//  7 shape-contract             full-size stack maps [1,1,128,256] to
//                               [1,32,classes+1] with 32 frames
//  8 end-to-end-learning        1000/100-line synthetic set reaches val CER
//                               < 0.15 for at least 2 of 3 seeds
//  9 blend-regularization-trend 200-line-subset ablation on a high-variance
//                               render style: blended arm beats or ties the
//                               plain arm on mean CER and mean loss
// 10 determinism-persistence    rerun log identity, checkpoint round-trip,
//                               byte-identical dataset regeneration
//
// Every tolerance is a literal pinned next to the check it guards. The
// trend criterion shells out to the command-line frontend named by the
// MIXCTC_CLI environment variable so the shipped binary is what gets judged.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "autodiff/tape.hpp"
#include "autodiff/tensor.hpp"
#include "common/rng.hpp"
#include "ctc/ctc.hpp"
#include "data/data.hpp"
#include "metrics/metrics.hpp"
#include "mixup/mixup.hpp"
#include "model/model.hpp"
#include "selftest/selftest.hpp"
#include "train/train.hpp"

namespace {

using namespace mixctc;
namespace fs = std::filesystem;

constexpr const char* kWorkDir = "acceptance_work";

// Settings for the ablation run behind criterion 9; sized so both arms reach
// genuine early stop on the 200-line subset of the high-variance set.
constexpr int kAblateMaxEpochs = 200;
constexpr int kAblatePatience = 40;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, ...) {
  char buffer[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buffer, sizeof buffer, pattern, args);
  va_end(args);
  return buffer;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// --- shared fixtures -------------------------------------------------------

// Small two-symbol dataset for the training-identity and determinism checks:
// 32 train / 8 valid lines of 1-3 characters.
data::GenConfig small_gen_config() {
  data::GenConfig g;
  g.lines = 40;
  g.val_fraction = 0.2;
  g.alphabet = "ab";
  g.min_len = 1;
  g.max_len = 3;
  g.seed = 11;
  return g;
}

const data::Dataset& small_dataset() {
  static const data::Dataset dataset = [] {
    const std::string dir = std::string(kWorkDir) + "/small_data";
    data::generate_dataset(dir, small_gen_config());
    return data::load_dataset(dir);
  }();
  return dataset;
}

std::string make_thousand_line_set(const std::string& name, const data::GenConfig& config) {
  const std::string path = std::string(kWorkDir) + "/" + name;
  data::GenSummary s = data::generate_dataset(path, config);
  if (s.train_lines != 1000 || s.valid_lines != 100)
    throw std::runtime_error(
        fmt("%s split %d/%d, wanted 1000/100", name.c_str(), s.train_lines, s.valid_lines));
  return path;
}

// The learning benchmark set: 1000 train / 100 valid lines over a ten-symbol
// alphabet, lengths 1-12, default render style. Generation is deterministic,
// so rebuilding it on every run costs a few seconds and guarantees a clean
// fixture.
const std::string& learn_dataset_dir() {
  static const std::string dir = [] {
    data::GenConfig g;
    g.lines = 1100;
    g.val_fraction = 100.0 / 1100.0;
    g.alphabet = "abcdefghij";
    g.min_len = 1;
    g.max_len = 12;
    g.seed = 42;
    return make_thousand_line_set("learn_data", g);
  }();
  return dir;
}

// The regularization-trend set: same split and alphabet, but rendered with a
// much wider style range (scale, shear, jitter, spacing, noise, background).
// On a 200-line subset of the default style the unregularized baseline
// already reaches ~1% CER, leaving nothing to regularize; the high-variance
// style opens a real generalization gap (train loss near zero, validation
// loss well above it), which is the regime the blending trend is about.
const std::string& trend_dataset_dir() {
  static const std::string dir = [] {
    data::GenConfig g;
    g.lines = 1100;
    g.val_fraction = 100.0 / 1100.0;
    g.alphabet = "abcdefghij";
    g.min_len = 1;
    g.max_len = 12;
    g.seed = 4242;
    g.style.scale_min = 0.6;
    g.style.scale_max = 1.8;
    g.style.shear_min = -0.5;
    g.style.shear_max = 0.5;
    g.style.jitter = 4;
    g.style.spacing_min = 1;
    g.style.spacing_max = 6;
    g.style.noise_sigma = 14.0;
    g.style.background_min = 170;
    return make_thousand_line_set("trend_data", g);
  }();
  return dir;
}

bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_params_bits(const model::ModelParams& a, const model::ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& va = a.tensors[i]->values;
    const auto& vb = b.tensors[i]->values;
    if (va.size() != vb.size()) return false;
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

// Drops the wall-time column (the last field) of every log row; it is the
// one column documented as excluded from reproducibility comparisons.
std::string strip_seconds_column(const std::string& tsv) {
  std::string out;
  std::istringstream in(tsv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!header) {
      size_t cut = line.rfind('\t');
      if (cut != std::string::npos) line.erase(cut);
    }
    header = false;
    out += line;
    out += '\n';
  }
  return out;
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- criterion 1: enumeration oracle ---------------------------------------

Outcome criterion_oracle() {
  selftest::SelftestOptions options;
  options.seed = 1001;
  options.oracle_cases = 1000;  // random instances with T <= 8, S <= 4, C <= 4
  Stopwatch sw;
  selftest::SuiteResult r = selftest::run_ctc_oracle(options);
  double secs = sw.seconds();
  bool pass = r.pass && r.cases >= 1000 && r.max_err < 1e-9 && secs < 30.0;
  return {pass, fmt("cases=%d max_err=%.3e bound=1e-09 time=%.1fs budget=30s", r.cases,
                    r.max_err, secs)};
}

// --- criterion 2: alignment-loss gradients ----------------------------------

Outcome criterion_loss_gradient() {
  selftest::SelftestOptions options;
  options.seed = 2002;
  options.gradient_cases = 100;
  selftest::SuiteResult r = selftest::run_ctc_gradient(options);
  bool pass = r.pass && r.cases >= 100 && r.max_err < 1e-5;
  return {pass,
          fmt("cases=%d max_rel_err=%.3e bound=1e-05", r.cases, r.max_err)};
}

// --- criterion 3: blend linearity -------------------------------------------

Outcome criterion_linearity() {
  selftest::SelftestOptions options;
  options.seed = 3003;
  // The suite cycles the candidate depths {0, 4, 8}, so 21 draws cover each
  // depth seven times; the criterion needs at least 20 draws in total.
  options.linearity_draws = 21;
  selftest::SuiteResult r = selftest::run_mixup_linearity(options);
  bool pass = r.pass && r.cases >= 20 && r.max_err < 1e-10;
  return {pass, fmt("draws=%d depths={0,4,8} max_rel_err=%.3e bound=1e-10", r.cases, r.max_err)};
}

// --- criterion 4: endpoint identity -----------------------------------------

Outcome criterion_endpoint_identity() {
  const data::Dataset& dataset = small_dataset();
  model::NetworkConfig net = model::NetworkConfig::tiny_preset(
      static_cast<int>(dataset.alphabet.size()));
  net.dropout = 0.25;  // nonzero on purpose: the dropout stream must align too

  train::TrainConfig off;
  off.seed = 17;
  off.max_epochs = 3;
  off.patience = 10;
  off.mixup.enabled = false;

  train::TrainConfig pinned = off;
  pinned.mixup.enabled = true;
  pinned.mixup.force_lambda = 1.0;  // every sample keeps weight 1 on itself

  train::TrainResult a = train::train(dataset, net, off);
  train::TrainResult b = train::train(dataset, net, pinned);

  bool rows_equal = a.log.epochs.size() == b.log.epochs.size();
  if (rows_equal) {
    for (size_t i = 0; i < a.log.epochs.size(); ++i) {
      const train::EpochStats& ea = a.log.epochs[i];
      const train::EpochStats& eb = b.log.epochs[i];
      // All statistics must agree bitwise; the mean drawn weight differs by
      // construction (0 when off, 1 when pinned) and wall time is untracked.
      rows_equal = rows_equal && ea.epoch == eb.epoch && bits_equal(ea.train_loss, eb.train_loss) &&
                   bits_equal(ea.val_loss, eb.val_loss) && bits_equal(ea.val_cer, eb.val_cer) &&
                   ea.skipped_pairs == eb.skipped_pairs;
    }
  }
  bool params_equal = same_params_bits(a.best.params, b.best.params);
  bool pass = rows_equal && params_equal && a.log.best_epoch == b.log.best_epoch;
  return {pass, fmt("epochs=%zu rows_bitwise=%s best_params_bitwise=%s", a.log.epochs.size(),
                    rows_equal ? "yes" : "NO", params_equal ? "yes" : "NO")};
}

// --- criterion 5: full-model gradient check ----------------------------------

Outcome criterion_full_model_gradient() {
  Stopwatch sw;
  model::NetworkConfig cfg = model::NetworkConfig::tiny_preset(3);
  cfg.dropout = 0.0;  // finite differences need a deterministic forward
  Rng init(515151);
  model::Network net(cfg, model::build(cfg, init));

  // Smallest width that yields at least two frames, so length-2 labels are
  // alignable and the batch stays cheap enough to difference every entry.
  int width = net.min_width();
  while (net.output_length(width) < 2) width += cfg.width_multiple();
  const int frames = net.output_length(width);
  const int batch = 2;

  autodiff::TensorPtr images = autodiff::Tensor::zeros({batch, 1, cfg.input_height, width});
  Rng pixels(99);
  for (double& v : images->values) v = pixels.normal();

  ctc::Vocabulary vocab("abc");
  std::vector<ctc::LabelSequence> labels = {ctc::LabelSequence::from_string("ab", vocab),
                                            ctc::LabelSequence::from_string("bc", vocab)};

  // Scenario A: plain batch. Scenario B: an active two-way plan blending at
  // depth 4 with a fixed interior weight.
  std::vector<std::vector<ctc::LossTerm>> plain_terms = {{{labels[0], 1.0}}, {{labels[1], 1.0}}};
  mixup::MixPlan plan;
  plan.enabled = true;
  plan.depth = 4;
  plan.pairing = {1, 0};
  plan.lambdas = {0.37, 0.37};
  plan.skipped = {false, false};
  std::vector<std::vector<ctc::LossTerm>> mixed_terms =
      mixup::plan_loss_terms(plan, labels, frames, /*multiply_gradients=*/true);

  auto loss_value = [&](const mixup::MixPlan* p,
                        const std::vector<std::vector<ctc::LossTerm>>& terms) {
    autodiff::Tape tape;
    autodiff::TensorPtr scores = net.forward(tape, images, p, /*training=*/true, nullptr);
    autodiff::TensorPtr loss = tape.scale(ctc::tape_loss(tape, scores, terms), 1.0 / batch);
    return loss->values[0];
  };

  const double h = 1e-6;
  // Error is measured against 1 + |reference| so near-zero gradients are held
  // to the same absolute bar instead of an exploding quotient.
  const double bound = 1e-4;
  double max_rel = 0.0;
  int64_t entries = 0;

  for (int scenario = 0; scenario < 2; ++scenario) {
    const mixup::MixPlan* p = scenario == 0 ? nullptr : &plan;
    const auto& terms = scenario == 0 ? plain_terms : mixed_terms;

    for (const auto& tensor : net.params().tensors) tensor->zero_grad();
    {
      autodiff::Tape tape;
      autodiff::TensorPtr scores = net.forward(tape, images, p, true, nullptr);
      autodiff::TensorPtr loss = tape.scale(ctc::tape_loss(tape, scores, terms), 1.0 / batch);
      tape.backward(loss);
    }

    for (const auto& tensor : net.params().tensors) {
      for (size_t i = 0; i < tensor->values.size(); ++i) {
        const double analytic = tensor->grad.empty() ? 0.0 : tensor->grad[i];
        const double original = tensor->values[i];
        tensor->values[i] = original + h;
        const double up = loss_value(p, terms);
        tensor->values[i] = original - h;
        const double down = loss_value(p, terms);
        tensor->values[i] = original;
        const double fd = (up - down) / (2.0 * h);
        max_rel = std::max(max_rel, std::abs(analytic - fd) / (1.0 + std::abs(fd)));
        ++entries;
      }
      tensor->zero_grad();
    }
  }
  double secs = sw.seconds();
  bool pass = max_rel < bound && secs < 300.0;
  return {pass, fmt("entries=%lld (plain+blended) max_rel_err=%.3e bound=1e-04 time=%.0fs "
                    "budget=300s",
                    static_cast<long long>(entries), max_rel, secs)};
}

// --- criterion 6: weight samplers --------------------------------------------

Outcome criterion_samplers() {
  selftest::SelftestOptions options;
  options.seed = 4242;
  options.sampler_draws = 100000;
  selftest::SuiteResult beta = selftest::run_sampler_beta(options);
  selftest::SuiteResult uniform = selftest::run_sampler_uniform(options);
  bool pass = beta.pass && beta.cases >= 100000 && beta.max_err < 0.01 && uniform.pass &&
              uniform.max_err < 0.01;
  return {pass, fmt("beta KS=%.4f bound=0.01; uniform[0.1,0.9] max_dev=%.4f bound=0.01",
                    beta.max_err, uniform.max_err)};
}

// --- criterion 7: shape contract ---------------------------------------------

Outcome criterion_shape_contract() {
  model::NetworkConfig cfg = model::NetworkConfig::paper_preset(10);
  Rng init(7);
  model::Network net(cfg, model::build(cfg, init));

  autodiff::TensorPtr input = autodiff::Tensor::zeros({1, 1, 128, 256});
  Rng pixels(8);
  for (double& v : input->values) v = pixels.normal();

  autodiff::Tape tape;
  autodiff::TensorPtr scores = net.forward(tape, input, nullptr, /*training=*/false, nullptr);

  const std::vector<int> want = {1, 32, cfg.classes + 1};
  bool shape_ok = scores->shape == want;
  bool frames_ok = net.output_length(256) == 32;
  bool finite = true;
  for (double v : scores->values) finite = finite && std::isfinite(v);
  bool pass = shape_ok && frames_ok && finite;
  return {pass, fmt("input [1,1,128,256] -> scores [%d,%d,%d], frames(256)=%d, finite=%s",
                    scores->shape[0], scores->shape[1], scores->shape[2], net.output_length(256),
                    finite ? "yes" : "NO")};
}

// --- criterion 8: end-to-end learning ----------------------------------------

Outcome criterion_learning() {
  const data::Dataset dataset = data::load_dataset(learn_dataset_dir());
  const double target_cer = 0.15;
  const double budget_seconds = 1800.0;

  std::string per_seed;
  int successes = 0;
  for (uint64_t seed : {1, 2, 3}) {
    model::NetworkConfig net = model::NetworkConfig::tiny_preset(
        static_cast<int>(dataset.alphabet.size()));
    net.dropout = 0.0;
    train::TrainConfig config;
    config.seed = seed;
    config.max_epochs = 300;
    config.patience = 300;  // the callback below is the only stopper
    config.mixup.enabled = false;

    Stopwatch sw;
    bool reached = false;
    int stop_epoch = 0;
    auto on_epoch = [&](const train::EpochStats& e) {
      stop_epoch = e.epoch;
      if (e.val_cer < target_cer) {
        reached = true;
        return false;
      }
      // Leave headroom to finish the epoch bookkeeping inside the budget.
      return sw.seconds() < budget_seconds - 100.0;
    };
    train::train(dataset, net, config, "", on_epoch);
    double secs = sw.seconds();
    bool ok = reached && secs < budget_seconds;
    successes += ok ? 1 : 0;
    per_seed += fmt("%ss%llu:%s ep%d %.0fs", per_seed.empty() ? "" : " ",
                    static_cast<unsigned long long>(seed), ok ? "hit" : "MISS", stop_epoch, secs);
  }
  bool pass = successes >= 2;
  return {pass, fmt("target CER<0.15 within 300 epochs/30min: %d/3 seeds (%s)", successes,
                    per_seed.c_str())};
}

// --- criterion 9: regularization trend via the CLI ---------------------------

// Parses the ablation table emitted by the frontend: a header row naming the
// columns, then one row per arm.
std::map<std::string, std::map<std::string, std::string>> parse_arm_table(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing ablation table " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty ablation table " + path);
  std::vector<std::string> columns;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, '\t')) columns.push_back(cell);
  }
  std::map<std::string, std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream r(line);
    std::string cell;
    std::map<std::string, std::string> row;
    for (size_t i = 0; std::getline(r, cell, '\t'); ++i)
      if (i < columns.size()) row[columns[i]] = cell;
    rows[row["arm"]] = row;
  }
  return rows;
}

Outcome criterion_trend() {
  const std::string& data_dir = trend_dataset_dir();
  const char* cli = std::getenv("MIXCTC_CLI");
  std::string cli_path = cli ? cli : "../tools/mixctc";
  if (!fs::exists(cli_path))
    return {false, "command-line binary not found (set MIXCTC_CLI): " + cli_path};

  const std::string out_dir = std::string(kWorkDir) + "/trend_ablation";
  fs::remove_all(out_dir);
  std::string command = cli_path + " ablate --axis datasize --data " + data_dir + " --out " +
                        out_dir + " --seeds 3 --seed 1 --preset tiny --dropout 0 --batch 8" +
                        " --train-subset 200 --max-epochs " + std::to_string(kAblateMaxEpochs) +
                        " --patience " + std::to_string(kAblatePatience) + " > " + out_dir +
                        "_stdout.txt 2> " + out_dir + "_stderr.txt";
  Stopwatch sw;
  int rc = std::system(command.c_str());
  if (rc != 0) return {false, fmt("ablation command exited %d (see %s_stderr.txt)", rc,
                                  out_dir.c_str())};

  auto rows = parse_arm_table(out_dir + "/ablate_datasize.tsv");
  if (!rows.count("all_on") || !rows.count("all_off"))
    return {false, "ablation table lacks the all_on/all_off arms"};
  auto& on = rows["all_on"];
  auto& off = rows["all_off"];
  if (on["status"] != "ok" || off["status"] != "ok")
    return {false, fmt("arm status all_on=%s all_off=%s (wanted ok)", on["status"].c_str(),
                       off["status"].c_str())};

  double cer_on = std::stod(on["cer_mean"]);
  double cer_off = std::stod(off["cer_mean"]);
  double loss_on = std::stod(on["loss_mean"]);
  double loss_off = std::stod(off["loss_mean"]);
  bool pass = cer_on <= cer_off && loss_on <= loss_off;
  return {pass, fmt("200-line subset, 3 seeds: CER %.4f (blend) vs %.4f (plain); loss %.4f vs "
                    "%.4f; time=%.0fs",
                    cer_on, cer_off, loss_on, loss_off, sw.seconds())};
}

// --- criterion 10: determinism and persistence --------------------------------

bool same_tree_bytes(const fs::path& a, const fs::path& b, std::string* why) {
  auto collect = [](const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), root));
    std::sort(files.begin(), files.end());
    return files;
  };
  std::vector<fs::path> fa = collect(a);
  std::vector<fs::path> fb = collect(b);
  if (fa.empty() || fa != fb) {
    *why = "file lists differ";
    return false;
  }
  for (const fs::path& rel : fa) {
    if (read_file_bytes(a / rel) != read_file_bytes(b / rel)) {
      *why = "bytes differ: " + rel.string();
      return false;
    }
  }
  return true;
}

Outcome criterion_determinism() {
  const data::Dataset& dataset = small_dataset();
  model::NetworkConfig net = model::NetworkConfig::tiny_preset(
      static_cast<int>(dataset.alphabet.size()));
  net.dropout = 0.25;

  train::TrainConfig config;  // blending on (the default), beta weights
  config.seed = 5;
  config.max_epochs = 4;
  config.patience = 10;

  // (a) the same seed must reproduce the log and final weights exactly.
  const std::string run_dir = std::string(kWorkDir) + "/determinism_run";
  fs::remove_all(run_dir);
  train::TrainResult first = train::train(dataset, net, config, run_dir);
  train::TrainResult second = train::train(dataset, net, config);
  bool log_equal = strip_seconds_column(first.log.to_tsv()) ==
                   strip_seconds_column(second.log.to_tsv());
  bool weights_equal = same_params_bits(first.best.params, second.best.params);

  // (b) the checkpoint written during the run reloads bit-exactly and scores
  // identically to the in-memory result.
  model::Checkpoint loaded = model::load_checkpoint(run_dir + "/best.ckpt");
  bool ckpt_bits = same_params_bits(first.best.params, loaded.params) &&
                   loaded.config.digest() == first.best.config.digest();
  metrics::EvalReport mem = train::evaluate(dataset, data::Split::kValid, first.best, 8);
  metrics::EvalReport disk = train::evaluate(dataset, data::Split::kValid, loaded, 8);
  bool eval_equal = mem.to_tsv() == disk.to_tsv() && mem.summary_line() == disk.summary_line();

  // (c) a dataset directory regenerates byte-identically from its settings.
  const std::string regen_a = std::string(kWorkDir) + "/regen_a";
  const std::string regen_b = std::string(kWorkDir) + "/regen_b";
  fs::remove_all(regen_a);
  fs::remove_all(regen_b);
  data::generate_dataset(regen_a, small_gen_config());
  data::generate_dataset(regen_b, small_gen_config());
  std::string why;
  bool regen_equal = same_tree_bytes(regen_a, regen_b, &why);

  bool pass = log_equal && weights_equal && ckpt_bits && eval_equal && regen_equal;
  return {pass, fmt("rerun log=%s weights=%s ckpt_roundtrip=%s eval_reports=%s regen=%s%s%s",
                    log_equal ? "same" : "DIFFER", weights_equal ? "same" : "DIFFER",
                    ckpt_bits ? "bitexact" : "DIFFER", eval_equal ? "same" : "DIFFER",
                    regen_equal ? "identical" : "DIFFER", why.empty() ? "" : " ", why.c_str())};
}

// --- driver -------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "alignment-loss-oracle", criterion_oracle},
    {2, "alignment-loss-gradient", criterion_loss_gradient},
    {3, "blend-linearity", criterion_linearity},
    {4, "blend-endpoint-identity", criterion_endpoint_identity},
    {5, "full-model-gradient", criterion_full_model_gradient},
    {6, "lambda-samplers", criterion_samplers},
    {7, "shape-contract", criterion_shape_contract},
    {8, "end-to-end-learning", criterion_learning},
    {9, "blend-regularization-trend", criterion_trend},
    {10, "determinism-persistence", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    int id = std::atoi(argv[i]);
    if (id < 1 || id > 10) {
      std::fprintf(stderr, "usage: %s [criterion-number ...]  (numbers 1..10)\n", argv[0]);
      return 2;
    }
    selected.insert(id);
  }

  std::filesystem::create_directories(kWorkDir);
  int failed = 0;
  int ran = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("unhandled exception: ") + e.what()};
    }
    std::printf("[%2d/10] %s  %-27s %s\n", c.id, outcome.pass ? "PASS" : "FAIL", c.name,
                outcome.detail.c_str());
    std::fflush(stdout);
    failed += outcome.pass ? 0 : 1;
    ++ran;
  }
  if (failed == 0)
    std::printf("acceptance: all %d criteria passed\n", ran);
  else
    std::printf("acceptance: %d of %d criteria FAILED\n", failed, ran);
  return failed == 0 ? 0 : 1;
}
