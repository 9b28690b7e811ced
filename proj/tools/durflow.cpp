// durflow: corpus generation, training, sampling and evaluation of duration
// models. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "durflow/checkpoint.hpp"
#include "durflow/config.hpp"
#include "durflow/corpus.hpp"
#include "durflow/duration.hpp"
#include "durflow/eval.hpp"
#include "durflow/text.hpp"
#include "durflow/training.hpp"

namespace fs = std::filesystem;
using namespace durflow;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Flags shared by every subcommand, kept as text until the config is
/// resolved so that only flags given on the command line override the file.
struct CommonFlags {
  std::optional<std::string> config;
  std::vector<std::pair<std::string, std::optional<std::string>>> values = {
      {"style", {}}, {"model", {}}, {"seed", {}}, {"steps", {}}, {"batch", {}},
      {"lr", {}}, {"nfe", {}}, {"temperature", {}}, {"min_duration", {}},
      {"realisations", {}}, {"num_sentences", {}}, {"out", {}},
  };

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "key=value config file");
    for (auto& [key, value] : values) {
      std::string flag = "--" + key;
      for (auto& c : flag) {
        if (c == '_') c = '-';
      }
      cmd->add_option(flag, value);
    }
  }

  bool given(const std::string& key) const {
    for (const auto& [k, v] : values) {
      if (k == key) return v.has_value();
    }
    return false;
  }

  RunConfig resolve() const {
    RunConfig cfg;
    try {
      if (config) cfg.apply_file(*config);
      for (const auto& [key, value] : values) {
        if (value) cfg.set(key, *value);
      }
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

void echo_config(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.out);
  cfg.save(cfg.out / (command + ".config"));
}

fs::path require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path);
  return path;
}

int cmd_gen(const RunConfig& cfg) {
  echo_config(cfg, "gen");
  CorpusSpec spec = CorpusSpec::default_for(cfg.style, cfg.seed);
  spec.num_sentences = cfg.num_sentences;
  spec.validate();
  for (Split split : {Split::train, Split::validation}) {
    DurationCorpus corpus = generate(spec, split);
    const fs::path path = cfg.out / (std::string(to_string(cfg.style)) + "-" + to_string(split) + ".corpus");
    save_corpus(corpus, path);
    const auto s = summarize(corpus);
    std::printf("%s: sentences=%zu positions=%zu phones=%zu pauses=%zu fillers=%zu frames=%zu mean=%.4f std=%.4f\n",
                path.string().c_str(), s.sentences, s.positions, s.phones, s.pauses, s.fillers, s.total_frames,
                s.mean_duration, s.pooled_std);
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& corpus_path) {
  const DurationCorpus corpus = load_corpus(require_file(corpus_path, "corpus"));
  echo_config(cfg, "train");
  ModelConfig mc;
  mc.kind = cfg.model;
  mc.vocab_size = static_cast<std::size_t>(corpus.spec.vocab_size);
  mc.seed = cfg.seed;
  DurationModel model(mc);

  TrainOptions opts;
  opts.steps = cfg.steps;
  opts.batch = cfg.batch;
  opts.lr = cfg.lr;
  opts.seed = cfg.seed;

  const std::string stem = std::string(to_string(cfg.model)) + "-" + to_string(corpus.spec.style);
  const fs::path loss_path = cfg.out / (stem + "-loss.csv");
  std::ofstream loss_log(loss_path);
  if (!loss_log) throw std::runtime_error("cannot write " + loss_path.string());
  loss_log << "step,lr,loss\n";
  const auto start = std::chrono::steady_clock::now();
  const int report_every = std::max(1, cfg.steps / 20);
  auto result = train(model, corpus, opts, [&](int step, double loss) {
    loss_log << step << ',' << format_double(learning_rate_at(opts, step)) << ',' << format_double(loss) << '\n';
    if (step % report_every == 0 || step + 1 == cfg.steps) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("step %d loss %.5f (%.1fs)\n", step, loss, secs);
      std::fflush(stdout);
    }
  });
  if (!loss_log.flush()) throw std::runtime_error("failed writing " + loss_path.string());

  Checkpoint ck = model.to_checkpoint();
  ck.meta["corpus_style"] = to_string(corpus.spec.style);
  ck.meta["corpus_seed"] = std::to_string(corpus.spec.seed);
  const fs::path ck_path = cfg.out / (stem + ".ckpt");
  save_checkpoint(ck, ck_path);
  std::printf("model %s: %zu predictor parameters, loss %.5f -> %.5f\n", model.id().c_str(),
              param_count(std::span<const Parameter>(model.predictor_parameters())), result.losses.front(),
              result.losses.back());
  std::printf("wrote %s and %s\n", ck_path.string().c_str(), loss_path.string().c_str());
  return 0;
}

struct LoadedModel {
  DurationModel model;
  std::string style;  // training corpus style, empty when unknown
};

LoadedModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(require_file(path, "checkpoint"));
  auto it = ck.meta.find("corpus_style");
  return LoadedModel{DurationModel::from_checkpoint(ck), it == ck.meta.end() ? "" : it->second};
}

int cmd_sample(const RunConfig& cfg, bool model_given, const std::string& checkpoint_path,
               const std::string& corpus_path) {
  LoadedModel loaded = load_model(checkpoint_path);
  const DurationModel& model = loaded.model;
  if (model_given && model.kind() != cfg.model) {
    throw std::runtime_error("checkpoint " + checkpoint_path + " holds a " + to_string(model.kind()) +
                             " model, expected " + to_string(cfg.model));
  }
  const DurationCorpus corpus = load_corpus(require_file(corpus_path, "corpus"));
  echo_config(cfg, "sample");

  const SampleOptions opts = cfg.sample_options();
  const int realisations = cfg.realisations_for(model.kind());
  std::vector<std::vector<std::vector<int>>> frames(corpus.sentences.size());
  parallel_for(corpus.sentences.size(), [&](std::size_t i) {
    const auto cond = model.encode(corpus.sentences[i].phones);
    for (int r = 0; r < realisations; ++r) {
      SampleOptions o = opts;
      o.seed = derive_seed(derive_seed(opts.seed, i), static_cast<std::uint64_t>(r));
      frames[i].push_back(to_frames(predict_log_durations(model, cond, o), opts.min_duration));
    }
  });

  const fs::path path = cfg.out / "durations.txt";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "#durations nfe=" << opts.nfe << " temperature=" << format_double(opts.temperature)
      << " seed=" << opts.seed << " model=" << model.id() << " realisations=" << realisations
      << " sentences=" << corpus.sentences.size() << '\n';
  for (const auto& per_sentence : frames) {
    for (const auto& f : per_sentence) {
      for (std::size_t p = 0; p < f.size(); ++p) out << (p ? " " : "") << f[p];
      out << '\n';
    }
  }
  if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
  std::printf("wrote %d realisation(s) of %zu sentences to %s\n", realisations, corpus.sentences.size(),
              path.string().c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoint_paths,
             const std::vector<std::string>& corpus_paths, int repetitions) {
  if (checkpoint_paths.empty()) throw UsageError("eval needs at least one --checkpoint");
  if (corpus_paths.empty()) throw UsageError("eval needs at least one --corpus");
  std::vector<std::string> missing;
  for (const auto& p : checkpoint_paths) {
    if (!fs::exists(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw std::runtime_error("missing checkpoint(s): " + list);
  }
  std::vector<LoadedModel> models;
  for (const auto& p : checkpoint_paths) models.push_back(load_model(p));
  for (ModelKind kind : {ModelKind::det, ModelKind::fm}) {
    bool found = false;
    for (const auto& m : models) found = found || m.model.kind() == kind;
    if (!found) throw std::runtime_error(std::string("eval: no ") + to_string(kind) + " checkpoint given");
  }
  std::vector<DurationCorpus> corpora;
  for (const auto& p : corpus_paths) corpora.push_back(load_corpus(require_file(p, "corpus")));
  echo_config(cfg, "eval");

  const SampleOptions opts = cfg.sample_options();
  ResidualCurve curves;
  curves.nfe = kDefaultResidualNfe;
  std::vector<DistStats> stats;
  std::vector<BenchResult> bench;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& model = models[m].model;
    const std::string label = to_string(model.kind());
    bool used = false;
    for (const auto& corpus : corpora) {
      const std::string style = to_string(corpus.spec.style);
      // A checkpoint is scored on corpora of the style it was trained on.
      if (!models[m].style.empty() && models[m].style != style) continue;
      used = true;
      curves.merge(residual_vs_nfe(model, corpus, kDefaultResidualNfe, opts, label, style));
      stats.push_back(dist_stats(collect_durations(model, corpus, opts, cfg.realisations_for(model.kind())),
                                 corpus.spec, label, style));
      BenchOptions bo;
      bo.repetitions = repetitions;
      bo.temperature = opts.temperature;
      bo.seed = opts.seed;
      bench.push_back(bench_sampling(model, corpus, kDefaultBenchNfe, bo, label + "-" + style));
      std::printf("%s on %s: residual nfe=1 %.4f nfe=10 %.4f\n", label.c_str(), style.c_str(),
                  curves.series.back().residuals.front(), curves.series.back().residuals[4]);
    }
    if (!used) std::fprintf(stderr, "warning: no corpus matches checkpoint %s\n", checkpoint_paths[m].c_str());
  }
  write_report(curves, stats, bench, cfg.out);
  std::printf("wrote residual.csv, dist.csv and bench.csv to %s\n", cfg.out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Duration modelling toolkit: deterministic and flow-matching duration predictors"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, sample_flags, eval_flags;
  auto* gen = app.add_subcommand("gen", "Generate train/validation corpus files");
  gen_flags.attach(gen);

  std::string train_corpus;
  auto* train_cmd = app.add_subcommand("train", "Train a duration model");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--corpus", train_corpus, "training corpus file")->required();

  std::string sample_checkpoint, sample_corpus;
  auto* sample = app.add_subcommand("sample", "Write sampled integer durations");
  sample_flags.attach(sample);
  sample->add_option("--checkpoint", sample_checkpoint)->required();
  sample->add_option("--corpus", sample_corpus, "corpus whose sentences are sampled")->required();

  std::vector<std::string> eval_checkpoints, eval_corpora;
  int repetitions = 5;
  auto* eval = app.add_subcommand("eval", "Residual, distribution and timing report");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", eval_checkpoints, "checkpoint file (repeatable)")->required();
  eval->add_option("--corpus", eval_corpora, "validation corpus file (repeatable)")->required();
  eval->add_option("--repetitions", repetitions, "timing repetitions")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags.resolve());
    if (train_cmd->parsed()) return cmd_train(train_flags.resolve(), train_corpus);
    if (sample->parsed()) {
      return cmd_sample(sample_flags.resolve(), sample_flags.given("model"), sample_checkpoint, sample_corpus);
    }
    if (eval->parsed()) return cmd_eval(eval_flags.resolve(), eval_checkpoints, eval_corpora, repetitions);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
