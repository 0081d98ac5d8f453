// SPDX-License-Identifier: Apache-2.0
//
// chromadist: prepare survey data, train and evaluate color-description
// distribution estimators, and query them.
//
// Exit codes: 0 success, 1 internal failure, 2 user or input error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chromadist/chromadist.hpp"

namespace fs = std::filesystem;
using namespace chromadist;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

constexpr const char* kRulesFile = "rules.tsv";

// ---------------------------------------------------------------------------
// Manifest directories: train.tsv / dev.tsv / test.tsv / vocab.txt and an
// optional rules.tsv of tokenizer replacement rules.

Tokenizer load_tokenizer(const std::optional<fs::path>& rules_path) {
  if (!rules_path) return Tokenizer{};
  std::ifstream in(*rules_path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open rules file " + rules_path->string());
  return Tokenizer(ReplacementRules::parse(in));
}

std::optional<fs::path> dir_rules(const fs::path& dir) {
  const auto p = dir / kRulesFile;
  if (fs::exists(p)) return p;
  return std::nullopt;
}

std::vector<RawRecord> read_record_file(const fs::path& path, bool header = false) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path.string());
  try {
    return read_records(in, header);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

CorpusSplit load_manifests(const fs::path& dir, Tokenizer& tokenizer) {
  tokenizer = load_tokenizer(dir_rules(dir));
  std::vector<RawRecord> records;
  for (auto label : kSplitLabels) {
    const auto path = dir / (std::string(to_string(label)) + ".tsv");
    if (!fs::exists(path)) {
      if (label == SplitLabel::train)
        throw Error(ErrorKind::invalid_input, "missing " + path.string());
      continue;
    }
    for (auto& r : read_record_file(path)) {
      if (r.split && *r.split != label)
        throw Error(ErrorKind::invalid_input,
                    path.string() + " line " + std::to_string(r.line) + ": split column says " +
                        to_string(*r.split));
      r.split = label;
      records.push_back(std::move(r));
    }
  }
  return ingest(records, tokenizer);
}

void write_manifests(const fs::path& dir, const CorpusSplit& split, const std::string& comment,
                     const std::optional<fs::path>& rules) {
  fs::create_directories(dir);
  for (auto label : kSplitLabels) {
    std::ostringstream out;
    write_manifest(out, split.part(label), label, comment);
    write_file_atomic(dir / (std::string(to_string(label)) + ".tsv"), out.str());
  }
  std::ostringstream vocab;
  split.vocabulary.write(vocab);
  write_file_atomic(dir / "vocab.txt", vocab.str());
  if (rules) write_file_atomic(dir / kRulesFile, read_file(*rules));
}

std::array<double, 3> parse_ratio(const std::string& text) {
  std::array<double, 3> out{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto slash = text.find('/', pos);
    if ((i < 2) == (slash == std::string::npos))
      throw Error(ErrorKind::invalid_input, "ratio must look like 8/1/1, got '" + text + "'");
    const auto part = text.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
    if (!parse_double(part, out[i]) || out[i] < 0.0)
      throw Error(ErrorKind::invalid_input, "bad ratio component '" + part + "'");
    pos = slash + 1;
  }
  return out;
}

void emit(const std::optional<fs::path>& path, const std::string& text) {
  if (path) write_file_atomic(*path, text);
  else std::cout << text;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  fs::path input;
  fs::path output_dir;
  bool header = false;
  std::uint64_t seed = 0;
  std::string ratio = "8/1/1";
  std::optional<fs::path> rules;
};

int cmd_prepare(const PrepareArgs& a) {
  const Tokenizer tokenizer = load_tokenizer(a.rules);
  const auto records = read_record_file(a.input, a.header);
  IngestOptions opts;
  opts.ratio = parse_ratio(a.ratio);
  opts.seed = a.seed;
  const auto split = ingest(records, tokenizer, opts);
  write_manifests(a.output_dir, split, {}, a.rules);
  std::cout << "train\t" << split.train.size() << "\ndev\t" << split.dev.size() << "\ntest\t"
            << split.test.size() << "\nvocabulary\t" << split.vocabulary.size() << '\n';
  return 0;
}

struct SplitArgs {
  fs::path data;
  fs::path output_dir;
  std::size_t count = 100;
  std::size_t min_other_uses = 8;
};

int cmd_split_extrapolation(const SplitArgs& a) {
  Tokenizer tokenizer;
  const auto full = load_manifests(a.data, tokenizer);
  const auto ex = build_extrapolation_split(full, {a.count, a.min_other_uses});
  const std::string comment = "extrapolation split: count=" + std::to_string(a.count) +
                              " min_other_uses=" + std::to_string(a.min_other_uses);
  write_manifests(a.output_dir, ex.split, comment, dir_rules(a.data));
  std::string selected = "# " + comment + "\n";
  for (const auto& d : ex.selected) selected += d + "\n";
  write_file_atomic(a.output_dir / "selected.txt", selected);
  std::cout << selected;
  return 0;
}

struct TrainArgs {
  fs::path data;
  fs::path output;
  std::optional<fs::path> log;
  std::string model = "cdest";
  std::size_t resolution = 64;
  std::optional<double> sigma;
  std::string hue_mode = "wrapped";
  cdest::CdestConfig cdest;
};

int cmd_train(TrainArgs a) {
  Tokenizer tokenizer;
  const auto split = load_manifests(a.data, tokenizer);
  const HueMode hue = a.hue_mode == "truncated" ? HueMode::truncated : HueMode::wrapped;

  if (a.model == "baseline") {
    const DiscretizerConfig dc{a.resolution, a.sigma, hue};
    const auto model = fit_baseline(split.train, dc);
    save_checkpoint(a.output, model);
    std::cout << "baseline\tdescriptions\t" << model.table().size() << '\n';
    return 0;
  }

  a.cdest.resolution = a.resolution;
  a.cdest.sigma = a.sigma;
  a.cdest.hue_mode = hue;
  const fs::path log_path = a.log ? *a.log : fs::path(a.output.string() + ".log");
  std::string log_text = "epoch\ttrain_loss\tdev_pp\tdev_pp_std\n";
  // Best-so-far weights are on disk after every improving epoch.
  auto on_epoch = [&](const cdest::EpochLog& e, const cdest::Parameters<float>& best, bool improved) {
    log_text += cdest::format_epoch_log(e) + '\n';
    write_file_atomic(log_path, log_text);
    if (improved) save_checkpoint(a.output, cdest::CdestModel{best, split.vocabulary, tokenizer});
    std::cerr << cdest::format_epoch_log(e) << (improved ? "\t*" : "") << '\n';
  };
  const auto result = cdest::train(split, a.cdest, on_epoch);
  save_checkpoint(a.output, cdest::CdestModel{result.params, split.vocabulary, tokenizer});
  const auto& last = result.log.back();
  std::cout << cdest::format_epoch_log(last) << "\tbest_epoch=" << result.best_epoch << '\n';
  return 0;
}

struct EvalArgs {
  std::optional<fs::path> checkpoint;
  bool uniform = false;
  std::size_t resolution = 64;
  fs::path test;
  bool fallback_uniform = false;
  std::optional<std::string> label;
  std::optional<fs::path> output;
};

int cmd_eval(const EvalArgs& a) {
  auto records = read_record_file(a.test);
  std::vector<Observation> test;
  test.reserve(records.size());
  for (auto& r : records) test.push_back({normalize_description(r.description), {}, r.color});

  EvalReport report;
  if (a.uniform) {
    report = perplexity(uniform_oracle(a.resolution), test, a.resolution, a.label.value_or("uniform"));
  } else {
    if (!a.checkpoint) throw Error(ErrorKind::invalid_input, "--checkpoint or --uniform is required");
    const auto ckpt = load_checkpoint(*a.checkpoint);
    const std::size_t n = ckpt.resolution();
    const std::string label = a.label.value_or(to_string(ckpt.kind));
    if (ckpt.kind == ModelKind::baseline && !a.fallback_uniform) {
      std::set<std::string> unseen;
      for (const auto& o : test)
        if (!ckpt.baseline->contains(o.description)) unseen.insert(o.description);
      if (!unseen.empty()) {
        std::string msg = std::to_string(unseen.size()) +
                          " test descriptions were never seen in training (use --fallback-uniform to "
                          "score them uniformly):";
        for (const auto& d : unseen) msg += "\n  " + d;
        throw Error(ErrorKind::unknown_description, msg);
      }
    }
    DistributionOracle oracle([&](std::string_view desc) -> ChannelDistributions {
      if (ckpt.kind == ModelKind::baseline && !ckpt.baseline->contains(desc))
        return {BinnedDistribution::uniform(n), BinnedDistribution::uniform(n),
                BinnedDistribution::uniform(n)};
      return ckpt.predict(desc);
    });
    report = perplexity(oracle, test, n, label);
  }
  std::ostringstream out;
  write_eval_tsv(out, std::span<const EvalReport>(&report, 1));
  emit(a.output, out.str());
  return 0;
}

struct QueryArgs {
  fs::path checkpoint;
  std::string description;
  std::vector<double> point;
  std::optional<fs::path> export_path;
  std::optional<std::size_t> resolution;
};

int cmd_query(const QueryArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint, a.resolution);
  const auto dists = ckpt.predict(a.description);
  const std::size_t n = ckpt.resolution();
  std::cout << "model\t" << to_string(ckpt.kind) << "\ndescription\t"
            << normalize_description(a.description) << "\nresolution\t" << n << '\n';
  for (auto c : kChannels) {
    const auto& d = dists[static_cast<std::size_t>(c)];
    const auto masses = d.masses();
    const auto peak = static_cast<std::size_t>(std::max_element(masses.begin(), masses.end()) - masses.begin());
    std::cout << channel_name(c) << "\tpeak_bin\t" << (peak + 1) << "\t("
              << format_double(static_cast<double>(peak) / static_cast<double>(n)) << ", "
              << format_double(static_cast<double>(peak + 1) / static_cast<double>(n)) << "]\tmass\t"
              << format_double(masses[peak]) << '\n';
  }
  if (!a.point.empty()) {
    const ColorPoint p{a.point[0], a.point[1], a.point[2]};
    if (!p.valid()) throw Error(ErrorKind::domain, "--point channels must lie in [0,1]");
    std::cout << "probability\t" << format_double(joint_probability(dists, p)) << '\n';
  }
  if (a.export_path) {
    std::ostringstream csv;
    write_distribution_csv(csv, dists);
    write_file_atomic(*a.export_path, csv.str());
  }
  return 0;
}

struct CorrelateArgs {
  fs::path manifest;
  std::size_t min_count = 100;
  std::string space = "hsv";
  bool header = false;
  std::optional<fs::path> output;
};

int cmd_correlate(const CorrelateArgs& a) {
  const auto records = read_record_file(a.manifest, a.header);
  DescriptionSamples groups;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& r : records) {
    const auto desc = normalize_description(r.description);
    auto [it, inserted] = where.try_emplace(desc, groups.size());
    if (inserted) groups.emplace_back(desc, std::vector<ChannelSample>{});
    ChannelSample s{r.color.h, r.color.s, r.color.v};
    if (a.space == "rgb") {
      const auto rgb = hsv_to_rgb(r.color);
      s = {rgb.r, rgb.g, rgb.b};
    }
    groups[it->second].second.push_back(s);
  }
  const auto report = spearman_independence(groups, a.min_count);
  static constexpr std::array<const char*, 3> kRgbPairs{"r-g", "r-b", "g-b"};
  std::ostringstream out;
  write_correlation_tsv(out, report, a.space == "rgb" ? std::span<const char* const, 3>(kRgbPairs)
                                                      : std::span<const char* const, 3>(kChannelPairNames));
  emit(a.output, out.str());
  return 0;
}

struct SynthArgs {
  SyntheticOptions opts;
  fs::path output_dir;
};

int cmd_synth(const SynthArgs& a) {
  const auto corpus = generate_synthetic(a.opts);
  const std::string comment = "synthetic: seed=" + std::to_string(a.opts.seed) +
                              " bases=" + std::to_string(a.opts.n_base) +
                              " modifiers=" + std::to_string(a.opts.n_modifiers) +
                              " samples=" + std::to_string(a.opts.samples_per_name);
  write_manifests(a.output_dir / "full", corpus.full, comment, std::nullopt);
  write_manifests(a.output_dir / "extrapolation", corpus.extrapolation, comment, std::nullopt);
  std::ostringstream truth;
  write_ground_truth(truth, corpus);
  write_file_atomic(a.output_dir / "ground_truth.tsv", truth.str());
  std::cout << "names\t" << corpus.truth.size() << "\nheld_out";
  for (const auto& h : corpus.held_out) std::cout << '\t' << h;
  std::cout << '\n';
  return 0;
}

void add_network_flags(CLI::App* cmd, TrainArgs& a) {
  auto& c = a.cdest;
  cmd->add_option("--embed-dim", c.embed_dim, "Embedding width")->capture_default_str();
  cmd->add_option("--hidden-dim", c.hidden_dim, "GRU and ReLU layer width")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "Drop probability on hidden layers")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--learning-rate", c.optimizer.learning_rate, "Adam step size")->capture_default_str();
  cmd->add_option("--beta1", c.optimizer.beta1, "Adam first-moment decay")->capture_default_str();
  cmd->add_option("--beta2", c.optimizer.beta2, "Adam second-moment decay")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Observations per update")->capture_default_str();
  cmd->add_option("--max-epochs", c.max_epochs, "Epoch limit")->capture_default_str();
  cmd->add_option("--patience", c.patience, "Epochs without dev improvement before stopping")
      ->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (0: CHROMADIST_THREADS or all cores)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Color-description distribution estimation over discretized HSV space"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* c_prepare = app.add_subcommand("prepare", "Tokenize a raw TSV and write split manifests");
  c_prepare->add_option("--input", prepare.input, "description<TAB>h<TAB>s<TAB>v[<TAB>split] file")
      ->required();
  c_prepare->add_option("--output-dir", prepare.output_dir, "Manifest directory")->required();
  c_prepare->add_flag("--header", prepare.header, "Input has a header row");
  c_prepare->add_option("--seed", prepare.seed, "Seed for ratio-based splitting")->capture_default_str();
  c_prepare->add_option("--ratio", prepare.ratio, "train/dev/test weights for rows without a split column")
      ->capture_default_str();
  c_prepare->add_option("--rules", prepare.rules, "Tokenizer replacement rules (word<TAB>tokens)");

  SplitArgs split;
  auto* c_split = app.add_subcommand("split-extrapolation", "Hold out rare descriptions whose tokens are covered elsewhere");
  c_split->add_option("--data", split.data, "Manifest directory")->required();
  c_split->add_option("--output-dir", split.output_dir, "Output manifest directory")->required();
  c_split->add_option("--count", split.count, "Descriptions to hold out")->capture_default_str();
  c_split->add_option("--min-other-uses", split.min_other_uses,
                      "Minimum training observations per held-out token")
      ->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Fit a baseline or train a CDEST model");
  c_train->add_option("--data", train.data, "Manifest directory")->required();
  c_train->add_option("--output", train.output, "Checkpoint path")->required();
  c_train->add_option("--log", train.log, "Training log path (default: <output>.log)");
  c_train->add_option("--model", train.model, "baseline or cdest")
      ->check(CLI::IsMember({"baseline", "cdest"}))
      ->capture_default_str();
  c_train->add_option("--resolution", train.resolution, "Bins per channel")->capture_default_str();
  c_train->add_option("--sigma", train.sigma, "Blur standard deviation (default 1/(2n))");
  c_train->add_option("--hue-mode", train.hue_mode, "wrapped or truncated hue blur")
      ->check(CLI::IsMember({"wrapped", "truncated"}))
      ->capture_default_str();
  add_network_flags(c_train, train);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Perplexity of a model on a test manifest");
  auto* o_ckpt = c_eval->add_option("--checkpoint", eval.checkpoint, "Model checkpoint");
  auto* o_uniform = c_eval->add_flag("--uniform", eval.uniform, "Score the uniform distribution instead");
  o_ckpt->excludes(o_uniform);
  c_eval->add_option("--resolution", eval.resolution, "Resolution for --uniform")->capture_default_str();
  c_eval->add_option("--test", eval.test, "Test manifest")->required();
  c_eval->add_flag("--fallback-uniform", eval.fallback_uniform,
                   "Baseline: score unseen descriptions with the uniform distribution");
  c_eval->add_option("--label", eval.label, "Model label in the report");
  c_eval->add_option("--output", eval.output, "Report path (default: stdout)");

  QueryArgs query;
  auto* c_query = app.add_subcommand("query", "Distribution for one description");
  c_query->add_option("--checkpoint", query.checkpoint, "Model checkpoint")->required();
  c_query->add_option("--description", query.description, "Color description")->required();
  c_query->add_option("--point", query.point, "h s v point to score")->expected(3);
  c_query->add_option("--export", query.export_path, "Write per-bin CSV here");
  c_query->add_option("--resolution", query.resolution, "Require this checkpoint resolution");

  CorrelateArgs corr;
  auto* c_corr = app.add_subcommand("correlate", "Per-description Spearman correlation between channels");
  c_corr->add_option("--manifest", corr.manifest, "Observation TSV")->required();
  c_corr->add_option("--min-count", corr.min_count, "Skip descriptions with fewer observations")
      ->capture_default_str();
  c_corr->add_option("--space", corr.space, "hsv or rgb")
      ->check(CLI::IsMember({"hsv", "rgb"}))
      ->capture_default_str();
  c_corr->add_flag("--header", corr.header, "Manifest has a header row");
  c_corr->add_option("--output", corr.output, "Report path (default: stdout)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic compositional corpus");
  c_synth->add_option("--seed", synth.opts.seed, "Generator seed")->capture_default_str();
  c_synth->add_option("--bases", synth.opts.n_base, "Base color tokens")->capture_default_str();
  c_synth->add_option("--modifiers", synth.opts.n_modifiers, "Modifier tokens")->capture_default_str();
  c_synth->add_option("--samples", synth.opts.samples_per_name, "Observations per name")
      ->capture_default_str();
  c_synth->add_option("--held-out-per-modifier", synth.opts.held_out_per_modifier,
                      "Modifier-base pairs per modifier held out of extrapolation training")
      ->capture_default_str();
  c_synth->add_option("--output-dir", synth.output_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUser;
  }

  try {
    if (c_prepare->parsed()) return cmd_prepare(prepare);
    if (c_split->parsed()) return cmd_split_extrapolation(split);
    if (c_train->parsed()) return cmd_train(train);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_query->parsed()) return cmd_query(query);
    if (c_corr->parsed()) return cmd_correlate(corr);
    if (c_synth->parsed()) return cmd_synth(synth);
  } catch (const Error& e) {
    std::cerr << "chromadist: " << e.what() << '\n';
    return e.is_user_error() ? kExitUser : kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "chromadist: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
