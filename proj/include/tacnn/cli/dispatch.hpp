#pragma once

// Command-line front end. Exit codes: 0 success, 1 verification failure
// (equiv-check mismatch, diverged training), 2 usage or configuration error,
// 3 data or format error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "tacnn/cli/coord_scale.hpp"
#include "tacnn/data/formats.hpp"
#include "tacnn/data/loader.hpp"
#include "tacnn/data/synth.hpp"
#include "tacnn/gconv/equivalence.hpp"
#include "tacnn/model/attention.hpp"
#include "tacnn/profile/profiler.hpp"
#include "tacnn/train/loop.hpp"

namespace tacnn {

enum ExitCode : int { exit_ok = 0, exit_verification = 1, exit_usage = 2, exit_data = 3 };

namespace cli {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string data;
  std::string val;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::size_t persons = 1;
  std::size_t trials = 0;
  std::string format = "text";
  std::optional<std::string> mix;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<std::size_t> epochs;
  bool until_fit = false;
  std::size_t classes = 60;
  std::size_t frames = 64;
  SynthSpec synth;
};

inline RunConfig run_config(const Options& o) { return o.config.empty() ? RunConfig{} : load_run_config(o.config); }

/// --mix/--lambda/--alpha on top of a policy; "none" sets alpha to 0.
inline void apply_mix_flags(const Options& o, MixPolicy& p) {
  if (o.mix) {
    if (*o.mix == "skeleton") p.kind = MixKind::skeleton;
    else if (*o.mix == "mixup") p.kind = MixKind::mixup;
    else if (*o.mix == "none") p.alpha = 0;
    else throw UsageError("--mix must be skeleton, mixup or none");
  }
  if (o.lambda) p.lambda = *o.lambda;
  if (o.alpha) p.alpha = *o.alpha;
  p.validate();
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw FormatError("cannot open " + path + " for writing");
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

inline Dataset require_data(const std::string& path) {
  if (path.empty()) throw UsageError("--data is required");
  return load_dataset(path);
}

inline LoadedModel require_checkpoint(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  return load_checkpoint(path);
}

inline int cmd_train(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  RunConfig cfg = run_config(o);
  if (o.seed) cfg.model.seed = cfg.train.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  apply_mix_flags(o, cfg.train.mix);
  cfg.validate();
  const Dataset data = require_data(o.data);
  std::optional<Dataset> val;
  if (!o.val.empty()) val = load_dataset(o.val);

  fs::create_directories(o.out);
  const fs::path dir(o.out);
  std::ofstream(dir / "config.json") << nlohmann::json(cfg).dump(2) << '\n';
  std::ofstream metrics(dir / "metrics.jsonl");
  TaCnn<float> model(cfg.model);
  TrainHooks hooks;
  hooks.metrics = &metrics;
  hooks.validation = val ? &*val : nullptr;
  hooks.checkpoint = dir / "model.ckpt";
  hooks.stop_when_fit = o.until_fit;
  const auto result = train_loop(model, data, cfg.train, cfg.body_partition(), hooks);
  const auto& last = result.history.back();
  out << "epochs " << result.history.size() << "  loss " << last.loss << "  train_acc " << last.train_acc;
  if (last.val_acc) out << "  val_acc " << *last.val_acc;
  out << "\ncheckpoint " << hooks.checkpoint->string() << '\n';
  return exit_ok;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  auto loaded = require_checkpoint(o.checkpoint);
  const auto r = evaluate(*loaded.model, require_data(o.data));
  out << "accuracy " << r.accuracy() << " (" << r.correct << "/" << r.total << ")\n";
  if (!o.out.empty()) {
    Output csv(o.out, out);
    write_per_class_csv(*csv, r);
  }
  return exit_ok;
}

inline int cmd_profile(const Options& o, std::ostream& out) {
  const RunConfig cfg = run_config(o);
  Output dst(o.out, out);
  render_report(*dst, profile(cfg.model, o.persons), parse_report_format(o.format));
  return exit_ok;
}

inline int cmd_augment(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  RunConfig cfg = run_config(o);
  MixPolicy policy = cfg.train.mix;
  apply_mix_flags(o, policy);
  Dataset data = require_data(o.data);
  if (data.empty()) throw InputError("augment: empty dataset");
  std::mt19937_64 rng(o.seed.value_or(policy.seed));
  const auto partition = o.config.empty() ? BodyPartition::default_for(data.front().num_joints()) : cfg.body_partition();
  std::size_t mixed = 0;
  for (std::size_t start = 0; start < data.size(); start += cfg.train.batch_size) {
    const std::size_t end = std::min(data.size(), start + cfg.train.batch_size);
    std::vector<SkeletonSample> batch(data.begin() + std::ptrdiff_t(start), data.begin() + std::ptrdiff_t(end));
    mixed += apply_batch_mix(batch, policy, partition, rng).size();
    std::move(batch.begin(), batch.end(), data.begin() + std::ptrdiff_t(start));
  }
  save_dataset(o.out, data);
  out << "mixed " << mixed << " of " << data.size() << " samples\n";
  return exit_ok;
}

inline int cmd_equiv(const Options& o, std::ostream& out) {
  EquivOptions opt;
  if (o.trials) opt.trials = o.trials;
  opt.seed = o.seed.value_or(0);
  const auto f = equiv_report<float>(opt);
  const auto d = equiv_report<double>(opt);
  const auto line = [&](const char* name, const EquivReport& r) {
    out << name << ": " << r.passed << "/" << r.trials << " trials, max abs error " << r.max_abs_error
        << " (tolerance " << r.tolerance << ") " << (r.ok() ? "ok" : "FAILED") << '\n';
  };
  line("float", f);
  line("double", d);
  return f.ok() && d.ok() ? exit_ok : exit_verification;
}

inline int cmd_coord_scale(const Options& o, std::ostream& out) {
  auto loaded = require_checkpoint(o.checkpoint);
  const auto rows = coord_scale_experiment(*loaded.model, require_data(o.data), o.trials ? o.trials : 18,
                                           o.seed.value_or(0));
  Output dst(o.out, out);
  write_coord_scale_csv(*dst, rows);
  return exit_ok;
}

inline int cmd_export_attention(const Options& o, std::ostream& out) {
  auto loaded = require_checkpoint(o.checkpoint);
  const auto rows = export_attention(*loaded.model, require_data(o.data));
  Output dst(o.out, out);
  write_attention_csv(*dst, rows);
  return exit_ok;
}

/// A directory of NTU .skeleton files is preprocessed; any other input is
/// read as SKB1/JSONL by extension.
inline int cmd_convert(const Options& o, std::ostream& out) {
  if (o.data.empty() || o.out.empty()) throw UsageError("--data and --out are required");
  Dataset data;
  if (fs::is_directory(o.data)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.data))
      if (e.path().extension() == ".skeleton") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no .skeleton files in " + o.data);
    PreprocessOptions pre;
    pre.frames = o.frames;
    pre.max_persons = std::max<std::size_t>(o.persons, 1);
    data = load_ntu_files(files, o.classes, pre);
  } else {
    data = load_dataset(o.data);
  }
  save_dataset(o.out, data);
  out << "wrote " << data.size() << " samples to " << o.out << '\n';
  return exit_ok;
}

inline int cmd_synth(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  SynthSpec spec = o.synth;
  spec.seed = o.seed.value_or(spec.seed);
  const auto data = synth_dataset(spec);
  save_dataset(o.out, data);
  out << "wrote " << data.size() << " samples to " << o.out << '\n';
  return exit_ok;
}

}  // namespace cli

/// Parses argv and runs one subcommand.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Ta-CNN skeleton action recognition toolkit", "tacnn"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model and write model.ckpt, metrics.jsonl, config.json");
  train->add_option("--config", o.config, "Run config JSON");
  train->add_option("--data", o.data, "Training set (.skb or .jsonl)")->required();
  train->add_option("--val", o.val, "Validation set");
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.seed, "Seed for initialisation, shuffling and mixing");
  train->add_option("--epochs", o.epochs, "Override the configured epoch count");
  train->add_option("--mix", o.mix, "skeleton | mixup | none");
  train->add_option("--lambda", o.lambda, "Mixing ratio");
  train->add_option("--alpha", o.alpha, "Fraction of each batch to mix");
  train->add_flag("--until-fit", o.until_fit, "Stop once training accuracy reaches 100%");

  auto* eval = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint)->required();
  eval->add_option("--data", o.data)->required();
  eval->add_option("--out", o.out, "Per-class accuracy CSV");
  eval->add_option("--seed", o.seed);

  auto* prof = app.add_subcommand("profile", "Per-layer parameter and FLOP table");
  prof->add_option("--config", o.config);
  prof->add_option("--persons", o.persons, "Persons per sample")->check(CLI::PositiveNumber);
  prof->add_option("--format", o.format, "text | csv");
  prof->add_option("--out", o.out);
  prof->add_option("--seed", o.seed);

  auto* aug = app.add_subcommand("augment", "Apply batch mixing to a dataset");
  aug->add_option("--config", o.config);
  aug->add_option("--data", o.data)->required();
  aug->add_option("--out", o.out)->required();
  aug->add_option("--seed", o.seed);
  aug->add_option("--mix", o.mix, "skeleton | mixup | none");
  aug->add_option("--lambda", o.lambda);
  aug->add_option("--alpha", o.alpha);

  auto* equiv = app.add_subcommand("equiv-check", "Graph convolution vs 1x1 convolution on random trials");
  equiv->add_option("--trials", o.trials, "Number of trials (default 1000)");
  equiv->add_option("--seed", o.seed);

  auto* scale = app.add_subcommand("coord-scale", "Accuracy under random per-coordinate scaling");
  scale->add_option("--checkpoint", o.checkpoint)->required();
  scale->add_option("--data", o.data)->required();
  scale->add_option("--trials", o.trials, "Number of random trials (default 18)");
  scale->add_option("--seed", o.seed);
  scale->add_option("--out", o.out, "CSV path (default stdout)");

  auto* att = app.add_subcommand("export-attention", "Per-class mean attention gates as CSV");
  att->add_option("--checkpoint", o.checkpoint)->required();
  att->add_option("--data", o.data)->required();
  att->add_option("--out", o.out);
  att->add_option("--seed", o.seed);

  auto* conv = app.add_subcommand("convert", "Convert between SKB1/JSONL, or preprocess NTU .skeleton files");
  conv->add_option("--data", o.data, "Input file or directory of .skeleton files")->required();
  conv->add_option("--out", o.out)->required();
  conv->add_option("--classes", o.classes, "Class count for NTU input");
  conv->add_option("--frames", o.frames, "Resampled length for NTU input");
  conv->add_option("--persons", o.persons, "Persons kept for NTU input");
  conv->add_option("--seed", o.seed);

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth->add_option("--out", o.out)->required();
  synth->add_option("--classes", o.synth.classes);
  synth->add_option("--per-class", o.synth.per_class);
  synth->add_option("--frames", o.synth.frames);
  synth->add_option("--joints", o.synth.joints);
  synth->add_option("--persons", o.synth.persons);
  synth->add_option("--noise", o.synth.noise);
  synth->add_option("--seed", o.seed);

  if (argc <= 1) {
    err << app.help();
    return exit_usage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*prof) return cmd_profile(o, out);
    if (*aug) return cmd_augment(o, out);
    if (*equiv) return cmd_equiv(o, out);
    if (*scale) return cmd_coord_scale(o, out);
    if (*att) return cmd_export_attention(o, out);
    if (*conv) {
      if (conv->count("--persons") == 0) o.persons = 2;
      return cmd_convert(o, out);
    }
    if (*synth) return cmd_synth(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_usage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return exit_verification;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  }
  return exit_usage;
}

}  // namespace tacnn
