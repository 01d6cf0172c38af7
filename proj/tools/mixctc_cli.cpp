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
// Command-line frontend: data generation, training, evaluation, ablation
// sweeps, and the numerical self-test, all through the C boundary in
// include/mixctc.h. Settings resolve in precedence order
//   defaults < --config file < MIXCTC_* environment < flags,
// and every run writes its fully resolved settings to resolved.cfg in its
// output directory.
//
// Exit codes: 0 success; 1 validation or property failure (failing
// self-test suites, dataset/checkpoint mismatch, failed ablation arms);
// 2 usage error (bad flags, bad config keys or values); 3 runtime error
// (I/O, non-finite loss).

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixctc.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct CliError {
  int code;
  std::string message;
};

int exit_code_for(mixctc_status status) {
  switch (status) {
    case MIXCTC_OK:
      return 0;
    case MIXCTC_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    case MIXCTC_ERR_MISMATCH:
      return kExitValidation;
    case MIXCTC_ERR_IO:
    case MIXCTC_ERR_RUNTIME:
    default:
      return kExitRuntime;
  }
}

// Library-call guard; `stage` names the failing step in the error message.
void check(mixctc_status status, const std::string& stage) {
  if (status != MIXCTC_OK) {
    throw CliError{exit_code_for(status), stage + ": " + mixctc_last_error()};
  }
}

struct DatasetCloser {
  void operator()(mixctc_dataset* d) const { mixctc_dataset_close(d); }
};
using DatasetPtr = std::unique_ptr<mixctc_dataset, DatasetCloser>;

struct ModelCloser {
  void operator()(mixctc_model* m) const { mixctc_model_close(m); }
};
using ModelPtr = std::unique_ptr<mixctc_model, ModelCloser>;

DatasetPtr open_dataset(const std::string& dir) {
  mixctc_dataset* raw = nullptr;
  check(mixctc_dataset_open(dir.c_str(), &raw), "opening dataset " + dir);
  return DatasetPtr(raw);
}

ModelPtr open_model(const std::string& path) {
  mixctc_model* raw = nullptr;
  check(mixctc_model_open(path.c_str(), &raw), "opening checkpoint " + path);
  return ModelPtr(raw);
}

// ------------------------------------------------------------------
// Small key=value text utilities (the library's config format: one pair
// per line, '#' comments, last assignment wins).

std::string trim(const std::string& s) {
  size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;  // resolvers report malformed lines
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitUsage, "cannot read config file " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw CliError{kExitRuntime, "cannot write " + path};
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CliError{kExitRuntime, "cannot create directory " + dir + ": " + ec.message()};
}

// ------------------------------------------------------------------
// Option stack: assembles the key=value text handed to the library.

using Resolver = mixctc_status (*)(const char*, char*, size_t);

std::string resolve_with(Resolver resolver, const std::string& text, const std::string& stage) {
  char buf[8192];
  check(resolver(text.c_str(), buf, sizeof buf), stage);
  return buf;
}

// Settings accumulator. Entries are emitted in insertion order and the
// library's parser lets the last assignment of a key win, so appending in
// precedence order implements the override chain.
class OptionStack {
 public:
  explicit OptionStack(Resolver resolver) : resolver_(resolver) {}

  void load_config_file(const std::string& path) {
    if (!path.empty()) lines_ += read_file(path) + "\n";
  }

  // Looks up MIXCTC_<KEY> (uppercased, dots to underscores) for every key
  // the resolver knows, i.e. every key of the fully-defaulted config.
  void apply_env() {
    const std::string defaults =
        resolve_with(resolver_, "", "resolving default options");
    for (const auto& [key, value] : parse_kv(defaults)) {
      (void)value;
      std::string name = "MIXCTC_";
      for (char c : key) {
        name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      if (const char* env = std::getenv(name.c_str())) set(key, env);
    }
  }

  void set(const std::string& key, const std::string& value) {
    lines_ += key + "=" + value + "\n";
  }
  void set_if(bool condition, const std::string& key, const std::string& value) {
    if (condition) set(key, value);
  }

  const std::string& text() const { return lines_; }

  // Canonical fully-defaulted form; throws usage errors on bad keys/values.
  std::string resolved(const std::string& stage) const {
    return resolve_with(resolver_, lines_, stage);
  }

 private:
  Resolver resolver_;
  std::string lines_;
};

// resolved.cfg = provenance comments + the canonical settings text.
void write_resolved(const std::string& out_dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::string& resolved_text) {
  std::string text = "# command: " + command + "\n";
  for (const auto& [key, value] : inputs) text += "# " + key + ": " + value + "\n";
  text += resolved_text;
  write_file(out_dir + "/resolved.cfg", text);
}

// ------------------------------------------------------------------
// gen-data

struct GenArgs {
  std::string out, config;
  int lines = 0;
  double val_fraction = 0.0;
  std::string alphabet;
  int min_len = 0, max_len = 0;
  long long seed = 0;
  CLI::App* cmd = nullptr;
};

int run_gen(const GenArgs& args) {
  OptionStack stack(mixctc_resolve_gen_options);
  stack.load_config_file(args.config);
  stack.apply_env();
  stack.set_if(args.cmd->count("--lines") > 0, "lines", std::to_string(args.lines));
  stack.set_if(args.cmd->count("--val-fraction") > 0, "val_fraction",
               format_double(args.val_fraction));
  stack.set_if(args.cmd->count("--alphabet") > 0, "alphabet", args.alphabet);
  stack.set_if(args.cmd->count("--min-len") > 0, "min_len", std::to_string(args.min_len));
  stack.set_if(args.cmd->count("--max-len") > 0, "max_len", std::to_string(args.max_len));
  stack.set_if(args.cmd->count("--seed") > 0, "seed", std::to_string(args.seed));

  const std::string resolved = stack.resolved("resolving generation options");
  int train = 0, valid = 0;
  check(mixctc_dataset_generate(args.out.c_str(), resolved.c_str(), &train, &valid),
        "generating dataset");
  // No path provenance here: the same settings must regenerate the
  // directory byte-for-byte, whatever it is called.
  write_resolved(args.out, "gen-data", {}, resolved);
  std::printf("train_lines=%d valid_lines=%d\n", train, valid);
  return 0;
}

// ------------------------------------------------------------------
// train

// Flags shared by `train` and `ablate` (ablate arms override the blending
// keys themselves, so the mixup flags live only on `train`).
struct TrainBaseArgs {
  std::string data, out, config;
  std::string preset;
  double dropout = 0.0, lr = 0.0;
  int batch = 0, patience = 0, max_epochs = 0;
  long long seed = 0;
  long long train_subset = 0;
  CLI::App* cmd = nullptr;

  void add_common_flags(CLI::App* sub) {
    cmd = sub;
    sub->add_option("--data", data, "Dataset directory")->required();
    sub->add_option("--preset", preset, "Network stack: paper or tiny")
        ->check(CLI::IsMember({"paper", "tiny"}));
    sub->add_option("--dropout", dropout, "Dropout rate for the decoder stack");
    sub->add_option("--lr", lr, "Learning rate");
    sub->add_option("--batch", batch, "Batch size");
    sub->add_option("--patience", patience, "Early-stop patience in epochs");
    sub->add_option("--max-epochs", max_epochs, "Epoch limit");
    sub->add_option("--seed", seed, "Base RNG seed");
    sub->add_option("--train-subset", train_subset,
                    "Train on only N lines (seeded shuffle first; 0 = all)");
    sub->add_option("--config", config, "Config file with key=value lines");
  }

  void apply_common(OptionStack& stack) const {
    stack.set_if(cmd->count("--preset") > 0, "preset", preset);
    stack.set_if(cmd->count("--dropout") > 0, "dropout", format_double(dropout));
    stack.set_if(cmd->count("--lr") > 0, "learning_rate", format_double(lr));
    stack.set_if(cmd->count("--batch") > 0, "batch_size", std::to_string(batch));
    stack.set_if(cmd->count("--patience") > 0, "patience", std::to_string(patience));
    stack.set_if(cmd->count("--max-epochs") > 0, "max_epochs", std::to_string(max_epochs));
    stack.set_if(cmd->count("--seed") > 0, "seed", std::to_string(seed));
    stack.set_if(cmd->count("--train-subset") > 0, "train_subset",
                 std::to_string(train_subset));
  }
};

struct TrainArgs : TrainBaseArgs {
  std::string mixup, mixup_positions, mixup_dist, grad_multiply, allow_no_fusion;
  double mixup_alpha = 0.0;
  int n_way = 0;
};

void apply_mixup_flags(const TrainArgs& args, OptionStack& stack) {
  const CLI::App* cmd = args.cmd;
  // "on"/"off" is the config store's own boolean spelling, so the flag
  // values pass straight through.
  stack.set_if(cmd->count("--mixup") > 0, "mixup.enabled", args.mixup);
  stack.set_if(cmd->count("--mixup-alpha") > 0, "mixup.alpha", format_double(args.mixup_alpha));
  stack.set_if(cmd->count("--mixup-positions") > 0, "mixup.positions", args.mixup_positions);
  if (cmd->count("--mixup-dist") > 0) {
    if (args.mixup_dist == "beta") {
      stack.set("mixup.distribution", "beta");
    } else if (args.mixup_dist.rfind("uniform:", 0) == 0) {
      const std::string bounds = args.mixup_dist.substr(8);
      const size_t colon = bounds.find(':');
      if (colon == std::string::npos) {
        throw CliError{kExitUsage, "--mixup-dist uniform form is uniform:<lo>:<hi>"};
      }
      stack.set("mixup.distribution", "uniform");
      stack.set("mixup.uniform_lo", bounds.substr(0, colon));
      stack.set("mixup.uniform_hi", bounds.substr(colon + 1));
    } else {
      throw CliError{kExitUsage, "--mixup-dist must be beta or uniform:<lo>:<hi>"};
    }
  }
  stack.set_if(cmd->count("--n-way") > 0, "mixup.n_way", std::to_string(args.n_way));
  stack.set_if(cmd->count("--grad-multiply") > 0, "mixup.multiply_gradients",
               args.grad_multiply);
  stack.set_if(cmd->count("--allow-no-fusion") > 0, "mixup.allow_no_fusion",
               args.allow_no_fusion);
}

// Streams log rows to stdout as epochs finish.
int print_row(const char* tsv_row, void* user) {
  (void)user;
  std::printf("%s\n", tsv_row);
  std::fflush(stdout);
  return 1;
}

constexpr const char* kLogHeader =
    "epoch\ttrain_loss\tval_loss\tval_cer\tlambda_mean\tskipped_pairs\tseconds";

int run_train(const TrainArgs& args) {
  OptionStack stack(mixctc_resolve_train_options);
  stack.load_config_file(args.config);
  stack.apply_env();
  args.apply_common(stack);
  apply_mixup_flags(args, stack);
  const std::string resolved = stack.resolved("resolving training options");

  const DatasetPtr dataset = open_dataset(args.data);
  make_dir(args.out);
  write_resolved(args.out, "train", {{"data", args.data}, {"out", args.out}}, resolved);

  std::printf("%s\n", kLogHeader);
  mixctc_train_summary summary{};
  check(mixctc_train(dataset.get(), resolved.c_str(), args.out.c_str(), print_row, nullptr,
                     &summary),
        "training");
  std::printf("best_epoch=%d epochs=%d best_val_cer=%.17g best_val_loss=%.17g\n",
              summary.best_epoch, summary.epochs_run, summary.best_val_cer,
              summary.best_val_loss);
  return 0;
}

// ------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string data, checkpoint, split = "valid", out;
  CLI::App* cmd = nullptr;
};

int run_eval(const EvalArgs& args) {
  const DatasetPtr dataset = open_dataset(args.data);
  const ModelPtr model = open_model(args.checkpoint);

  std::string out_dir = args.out;
  if (out_dir.empty()) {
    const std::filesystem::path parent = std::filesystem::path(args.checkpoint).parent_path();
    out_dir = (parent.empty() ? std::filesystem::path(".") : parent) / ("eval_" + args.split);
  }
  make_dir(out_dir);

  const std::string report_path = out_dir + "/report.tsv";
  mixctc_eval_summary summary{};
  const int split = args.split == "train" ? MIXCTC_SPLIT_TRAIN : MIXCTC_SPLIT_VALID;
  check(mixctc_evaluate(dataset.get(), model.get(), split, report_path.c_str(), &summary),
        "evaluating " + args.split + " split");

  write_resolved(out_dir, "eval",
                 {{"data", args.data}, {"checkpoint", args.checkpoint}, {"out", out_dir}},
                 "split=" + args.split + "\n");
  std::printf("%s\n", summary.summary_line);
  std::fprintf(stderr, "report: %s\n", report_path.c_str());
  return 0;
}

// ------------------------------------------------------------------
// selftest

struct SelftestArgs {
  std::string config, out = "selftest_out";
  long long seed = 0;
  CLI::App* cmd = nullptr;
};

void print_line(const char* line, void* user) {
  auto* lines = static_cast<std::vector<std::string>*>(user);
  lines->push_back(line);
  std::printf("%s\n", line);
  std::fflush(stdout);
}

int run_selftest(const SelftestArgs& args) {
  OptionStack stack(mixctc_resolve_selftest_options);
  stack.load_config_file(args.config);
  stack.apply_env();
  stack.set_if(args.cmd->count("--seed") > 0, "seed", std::to_string(args.seed));
  const std::string resolved = stack.resolved("resolving self-test options");

  make_dir(args.out);
  write_resolved(args.out, "selftest", {{"out", args.out}}, resolved);

  std::vector<std::string> lines;
  int all_passed = 0;
  check(mixctc_selftest(resolved.c_str(), print_line, &lines, &all_passed), "running self-test");
  if (all_passed) {
    std::printf("all suites passed\n");
    return 0;
  }
  std::string failing;
  for (const std::string& line : lines) {
    if (line.find("FAIL") != std::string::npos) {
      const std::string name = line.substr(0, line.find(' '));
      failing += (failing.empty() ? "" : ", ") + name;
    }
  }
  std::fprintf(stderr, "failing suites: %s\n", failing.c_str());
  return kExitValidation;
}

// ------------------------------------------------------------------
// ablate

struct AblateArgs : TrainBaseArgs {
  std::string axis;
  int seeds = 3;
};

struct Arm {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Arm tables per axis. Every arm pins mixup.enabled itself so the sweep is
// self-contained regardless of the base settings.
std::vector<Arm> arms_for(const std::string& axis, const std::map<std::string, std::string>& base,
                          int train_lines) {
  auto get = [&base](const std::string& key) { return base.at(key); };
  if (axis == "position") {
    return {{"off", {{"mixup.enabled", "off"}}},
            {"pos0", {{"mixup.enabled", "on"}, {"mixup.positions", "0"}}},
            {"pos4", {{"mixup.enabled", "on"}, {"mixup.positions", "4"}}},
            {"pos8", {{"mixup.enabled", "on"}, {"mixup.positions", "8"}}},
            {"pos048", {{"mixup.enabled", "on"}, {"mixup.positions", "0,4,8"}}}};
  }
  if (axis == "nway") {
    return {{"off", {{"mixup.enabled", "off"}}},
            {"nway2", {{"mixup.enabled", "on"}, {"mixup.n_way", "2"}}},
            {"nway3", {{"mixup.enabled", "on"}, {"mixup.n_way", "3"}}}};
  }
  if (axis == "gradmult") {
    return {{"multon", {{"mixup.enabled", "on"}, {"mixup.multiply_gradients", "on"}}},
            {"multoff", {{"mixup.enabled", "on"}, {"mixup.multiply_gradients", "off"}}}};
  }
  if (axis == "dist") {
    return {{"beta", {{"mixup.enabled", "on"}, {"mixup.distribution", "beta"}}},
            {"uniform", {{"mixup.enabled", "on"}, {"mixup.distribution", "uniform"}}}};
  }
  if (axis == "datasize") {
    // Subset sizes relative to the base subset (or the whole train split).
    long long all = std::strtoll(get("train_subset").c_str(), nullptr, 10);
    if (all <= 0 || all > train_lines) all = train_lines;
    const auto size = [](long long n) { return std::to_string(n); };
    return {{"all_off", {{"mixup.enabled", "off"}, {"train_subset", size(all)}}},
            {"all_on", {{"mixup.enabled", "on"}, {"train_subset", size(all)}}},
            {"half_off", {{"mixup.enabled", "off"}, {"train_subset", size(all / 2)}}},
            {"half_on", {{"mixup.enabled", "on"}, {"train_subset", size(all / 2)}}},
            {"quarter_off", {{"mixup.enabled", "off"}, {"train_subset", size(all / 4)}}},
            {"quarter_on", {{"mixup.enabled", "on"}, {"train_subset", size(all / 4)}}}};
  }
  if (axis == "dropout") {
    // 2x2 grid: the base dropout rate crossed with blending on/off.
    const std::string rate = get("dropout");
    return {{"nodrop_nomix", {{"mixup.enabled", "off"}, {"dropout", "0"}}},
            {"nodrop_mix", {{"mixup.enabled", "on"}, {"dropout", "0"}}},
            {"drop_nomix", {{"mixup.enabled", "off"}, {"dropout", rate}}},
            {"drop_mix", {{"mixup.enabled", "on"}, {"dropout", rate}}}};
  }
  throw CliError{kExitUsage, "unknown ablation axis " + axis};
}

struct ArmStats {
  std::vector<double> cers, losses, epochs;
  int failures = 0;
};

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

int run_ablate(const AblateArgs& args) {
  OptionStack stack(mixctc_resolve_train_options);
  stack.load_config_file(args.config);
  stack.apply_env();
  args.apply_common(stack);
  const std::string base_resolved = stack.resolved("resolving training options");
  const std::map<std::string, std::string> base_kv = parse_kv(base_resolved);

  const DatasetPtr dataset = open_dataset(args.data);
  const int train_lines = mixctc_dataset_lines(dataset.get(), MIXCTC_SPLIT_TRAIN);
  const std::vector<Arm> arms = arms_for(args.axis, base_kv, train_lines);
  const long long base_seed = std::strtoll(base_kv.at("seed").c_str(), nullptr, 10);

  make_dir(args.out);
  write_resolved(args.out, "ablate",
                 {{"data", args.data},
                  {"out", args.out},
                  {"axis", args.axis},
                  {"seeds", std::to_string(args.seeds)}},
                 base_resolved);

  std::string table =
      "arm\tseeds_ok\tcer_mean\tcer_min\tcer_max\tcer_median\t"
      "loss_mean\tloss_min\tloss_max\tloss_median\tbest_epoch_mean\tstatus\n";
  bool any_failed = false;

  for (const Arm& arm : arms) {
    ArmStats stats;
    for (int i = 0; i < args.seeds; ++i) {
      const long long seed = base_seed + i;
      std::string options = base_resolved;
      for (const auto& [key, value] : arm.overrides) options += key + "=" + value + "\n";
      options += "seed=" + std::to_string(seed) + "\n";

      const std::string run_dir =
          args.out + "/runs/" + arm.name + "_seed" + std::to_string(seed);
      make_dir(run_dir);
      write_resolved(run_dir, "ablate arm",
                     {{"data", args.data}, {"axis", args.axis}, {"arm", arm.name}},
                     resolve_with(mixctc_resolve_train_options, options,
                                  "resolving arm " + arm.name));

      mixctc_train_summary summary{};
      const mixctc_status status = mixctc_train(dataset.get(), options.c_str(), run_dir.c_str(),
                                                nullptr, nullptr, &summary);
      if (status != MIXCTC_OK) {
        // A failing arm is reported but must not stop the other arms.
        std::fprintf(stderr, "arm %s seed %lld failed: %s\n", arm.name.c_str(), seed,
                     mixctc_last_error());
        ++stats.failures;
        any_failed = true;
        continue;
      }
      stats.cers.push_back(summary.best_val_cer);
      stats.losses.push_back(summary.best_val_loss);
      stats.epochs.push_back(static_cast<double>(summary.best_epoch));
      std::printf("arm=%s seed=%lld best_epoch=%d val_cer=%.6f val_loss=%.6g\n",
                  arm.name.c_str(), seed, summary.best_epoch, summary.best_val_cer,
                  summary.best_val_loss);
      std::fflush(stdout);
    }

    char row[512];
    if (stats.cers.empty()) {
      std::snprintf(row, sizeof row, "%s\t0\tnan\tnan\tnan\tnan\tnan\tnan\tnan\tnan\tnan\terror\n",
                    arm.name.c_str());
    } else {
      const auto [cer_min, cer_max] = std::minmax_element(stats.cers.begin(), stats.cers.end());
      const auto [loss_min, loss_max] =
          std::minmax_element(stats.losses.begin(), stats.losses.end());
      std::snprintf(row, sizeof row,
                    "%s\t%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6g\t%.6g\t%.6g\t%.6g\t%.1f\t%s\n",
                    arm.name.c_str(), static_cast<int>(stats.cers.size()), mean_of(stats.cers),
                    *cer_min, *cer_max, median_of(stats.cers), mean_of(stats.losses), *loss_min,
                    *loss_max, median_of(stats.losses), mean_of(stats.epochs),
                    stats.failures == 0 ? "ok" : "partial");
    }
    table += row;
  }

  const std::string table_path = args.out + "/ablate_" + args.axis + ".tsv";
  write_file(table_path, table);
  std::fprintf(stderr, "table: %s\n", table_path.c_str());
  return any_failed ? kExitValidation : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line-level text recognition: training with feature blending, "
               "evaluation, and numerical self-tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", []() { return std::string(mixctc_version()); });

  GenArgs gen;
  gen.cmd = app.add_subcommand("gen-data", "Render a synthetic line-image dataset");
  gen.cmd->add_option("--out", gen.out, "Dataset directory to create")->required();
  gen.cmd->add_option("--lines", gen.lines, "Total line count");
  gen.cmd->add_option("--val-fraction", gen.val_fraction, "Validation share, in (0,1)");
  gen.cmd->add_option("--alphabet", gen.alphabet, "Characters to draw from");
  gen.cmd->add_option("--min-len", gen.min_len, "Shortest transcript");
  gen.cmd->add_option("--max-len", gen.max_len, "Longest transcript");
  gen.cmd->add_option("--seed", gen.seed, "Generation seed");
  gen.cmd->add_option("--config", gen.config, "Config file with key=value lines");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a recognizer");
  train.add_common_flags(train_cmd);
  train_cmd->add_option("--out", train.out, "Run directory for checkpoint and log")->required();
  train_cmd->add_option("--mixup", train.mixup, "Feature blending on or off")
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--mixup-alpha", train.mixup_alpha, "Beta distribution parameter");
  train_cmd->add_option("--mixup-positions", train.mixup_positions,
                        "Comma-separated blend depths, e.g. 0,4,8");
  train_cmd->add_option("--mixup-dist", train.mixup_dist,
                        "Weight distribution: beta or uniform:<lo>:<hi>");
  train_cmd->add_option("--n-way", train.n_way, "Blend 2 or 3 lines")
      ->check(CLI::IsMember({2, 3}));
  train_cmd->add_option("--grad-multiply", train.grad_multiply,
                        "Weight the two loss gradients by the blend ratio")
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--allow-no-fusion", train.allow_no_fusion,
                        "Allow batches that skip blending entirely")
      ->check(CLI::IsMember({"on", "off"}));

  EvalArgs eval;
  eval.cmd = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval.cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval.cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval.cmd->add_option("--split", eval.split, "train or valid")
      ->check(CLI::IsMember({"train", "valid"}));
  eval.cmd->add_option("--out", eval.out,
                       "Report directory (default: eval_<split> beside the checkpoint)");

  SelftestArgs selftest;
  selftest.cmd = app.add_subcommand("selftest", "Run the numerical verification suites");
  selftest.cmd->add_option("--seed", selftest.seed, "Suite seed");
  selftest.cmd->add_option("--out", selftest.out, "Directory for resolved.cfg");
  selftest.cmd->add_option("--config", selftest.config, "Config file with key=value lines");

  AblateArgs ablate;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Sweep one design axis over several seeds");
  ablate.add_common_flags(ablate_cmd);
  ablate_cmd->add_option("--out", ablate.out, "Sweep output directory")->required();
  ablate_cmd
      ->add_option("--axis", ablate.axis,
                   "position, nway, gradmult, dist, datasize, or dropout")
      ->required()
      ->check(CLI::IsMember({"position", "nway", "gradmult", "dist", "datasize", "dropout"}));
  ablate_cmd->add_option("--seeds", ablate.seeds, "Seeds per arm")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen.cmd->parsed()) return run_gen(gen);
    if (train_cmd->parsed()) return run_train(train);
    if (eval.cmd->parsed()) return run_eval(eval);
    if (selftest.cmd->parsed()) return run_selftest(selftest);
    if (ablate_cmd->parsed()) return run_ablate(ablate);
  } catch (const CliError& e) {
    std::fprintf(stderr, "mixctc: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mixctc: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
