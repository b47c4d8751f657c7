#include "catse_cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>

#include "catse/dataset.hpp"
#include "catse/errors.hpp"
#include "catse/runtime.hpp"
#include "catse/trainer.hpp"
#include "catse/wav.hpp"

namespace catse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_config(std::ostream& out, const std::string& command, json fields) {
  fields["command"] = command;
  out << "config " << fields.dump() << "\n";
}

ClassVocabulary resolve_vocabulary(const std::string& vocab_path, std::size_t n_classes) {
  if (vocab_path.empty()) return ClassVocabulary::numbered(n_classes);
  ClassVocabulary vocab = read_vocabulary(vocab_path);
  if (vocab.size() != n_classes) {
    throw DataError("vocabulary " + vocab_path + " has " + std::to_string(vocab.size()) +
                    " classes but the weights expect " + std::to_string(n_classes));
  }
  return vocab;
}

std::vector<std::string> hot_names(const ClassVocabulary& vocab, const MultiHot& hot) {
  std::vector<std::string> names;
  for (std::size_t i : active_indices(hot)) names.push_back(vocab.name(i));
  return names;
}

ModelWeights load_for_inference(const std::string& path) {
  return load_weights(path, LoadMode::inference);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t scenes = 0;
  std::size_t classes = 8;
  std::uint64_t seed = 0;
  std::string corpus;
};

int run_synth(const SynthArgs& a, bool classes_given, std::ostream& out) {
  SceneSpec spec;
  spec.seed = a.seed;
  std::optional<SourcePool> pool;
  ClassVocabulary vocab;
  if (!a.corpus.empty()) {
    pool = ingest_corpus(a.corpus);
    vocab = pool->vocabulary;
    if (classes_given && a.classes != vocab.size()) {
      throw UsageError("--classes " + std::to_string(a.classes) + " disagrees with the corpus (" +
                       std::to_string(vocab.size()) + " classes)");
    }
  } else {
    vocab = ClassVocabulary::numbered(a.classes);
  }
  spec.validate(vocab.size());
  if (a.scenes == 0) throw UsageError("--scenes must be positive");
  print_config(out, "synth",
               {{"out", a.out},
                {"scenes", a.scenes},
                {"classes", vocab.size()},
                {"seed", a.seed},
                {"corpus", a.corpus},
                {"fg_classes", {spec.min_fg_classes, spec.max_fg_classes}},
                {"fg_duration_s", {spec.min_fg_duration_s, spec.max_fg_duration_s}},
                {"scene_duration_s", spec.scene_duration_s},
                {"snr_db", {spec.min_snr_db, spec.max_snr_db}},
                {"sample_rate", spec.sample_rate}});
  const Dataset ds = generate_dataset(a.scenes, vocab, spec, pool ? &*pool : nullptr);
  write_dataset(ds, a.out);
  out << "wrote " << ds.scenes.size() << " scenes to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model = "pctcn";
  std::string data;
  std::string target_mode = "multi";
  double lambda = 0.5;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  std::size_t hidden = 256;
  double holdout = 0.1;
  std::string log;
  std::string init;
};

int run_train(const TrainArgs& a, bool lambda_given, std::ostream& out) {
  TrainConfig cfg;
  cfg.model.variant = parse_variant(a.model);
  if (lambda_given && cfg.model.variant != Variant::icatse) {
    throw UsageError("--lambda applies to icatse only");
  }
  const Dataset ds = load_dataset(a.data);
  cfg.model.n_classes = ds.vocabulary.size();
  cfg.model.hidden = a.hidden;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.lr;
  cfg.lambda_cls = a.lambda;
  cfg.target_mode = parse_target_mode(a.target_mode);
  cfg.seed = a.seed;
  cfg.diagnostic_path = a.out + ".diverged";
  if (!(a.holdout >= 0.0 && a.holdout < 1.0)) throw UsageError("--holdout must be in [0, 1)");
  cfg.validate();

  auto [train_set, val_set] = a.holdout > 0.0 ? split_holdout(ds.scenes, a.holdout)
                                              : std::pair{ds.scenes, std::vector<MixtureExample>{}};
  json shown = json::parse(train_config_to_json(cfg));
  shown["data"] = a.data;
  shown["out"] = a.out;
  shown["train_scenes"] = train_set.size();
  shown["validation_scenes"] = val_set.size();
  shown["init"] = a.init;
  print_config(out, "train", shown);

  std::optional<ModelWeights> initial;
  if (!a.init.empty()) initial = load_weights(a.init, LoadMode::training);

  std::unique_ptr<std::ofstream> log_file;
  if (!a.log.empty()) {
    log_file = std::make_unique<std::ofstream>(a.log);
    if (!*log_file) throw DataError("cannot open log file " + a.log);
  }
  const TrainResult result = train(
      cfg, train_set, val_set,
      [&](const EpochLog& log) {
        const std::string line = epoch_log_json(log);
        out << line << "\n" << std::flush;
        if (log_file) *log_file << line << "\n" << std::flush;
      },
      std::move(initial));
  save_weights(result.weights, a.out);
  out << "best epoch " << result.best_epoch << ", saved " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string weights;
  std::string data;
  std::string targets = "all";
  std::uint64_t seed = 2024;
  std::string oracle_source = "truth";
  bool json_rows = false;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const ModelWeights w = load_for_inference(a.weights);
  const Dataset ds = load_dataset(a.data);
  if (ds.vocabulary.size() != w.config.n_classes) {
    throw DataError("dataset has " + std::to_string(ds.vocabulary.size()) + " classes but " +
                    a.weights + " expects " + std::to_string(w.config.n_classes));
  }
  EvalOptions opts;
  opts.seed = a.seed;
  if (a.targets == "all") {
    opts.n_targets = {1, 2, 3};
  } else {
    opts.n_targets = {static_cast<std::size_t>(std::stoul(a.targets))};
  }
  if (a.oracle_source == "random") {
    if (w.config.variant != Variant::ecatse) throw UsageError("--oracle-source applies to ecatse only");
    opts.oracle = OracleSource::random;
  }
  print_config(out, "eval",
               {{"weights", a.weights},
                {"data", a.data},
                {"variant", std::string(to_string(w.config.variant))},
                {"targets", opts.n_targets},
                {"seed", a.seed},
                {"oracle_source", a.oracle_source},
                {"scenes", ds.scenes.size()}});
  const Model model(w);
  const auto rows = evaluate(model, ds.scenes, opts);
  if (a.json_rows) {
    for (const auto& r : rows) out << eval_row_json(r) << "\n";
  } else {
    out << format_eval_table(rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StreamArgs {
  std::string weights;
  std::string in;
  std::string out;
  std::string hint;
  std::string oracle;
  std::string vocab;
};

int run_stream(const StreamArgs& a, bool oracle_given, std::ostream& out) {
  auto w = load_for_inference(a.weights);
  const Variant variant = w.config.variant;
  if (oracle_given && variant != Variant::ecatse) {
    throw UsageError("--oracle is only accepted by ecatse models; " + a.weights + " is " +
                     std::string(to_string(variant)));
  }
  if (!oracle_given && variant == Variant::ecatse) throw UsageError("ecatse models require --oracle");
  const ClassVocabulary vocab = resolve_vocabulary(a.vocab, w.config.n_classes);
  const MultiHot hint = vocab.parse(a.hint);
  std::optional<MultiHot> oracle;
  if (oracle_given) oracle = vocab.parse(a.oracle);

  json shown = {{"weights", a.weights},
                {"in", a.in},
                {"out", a.out},
                {"variant", std::string(to_string(variant))},
                {"hint", hot_names(vocab, hint)},
                {"hop", Stream::kHop},
                {"latency_samples", Stream::kWindow}};
  if (oracle) shown["oracle"] = hot_names(vocab, *oracle);
  print_config(out, "stream", shown);

  const std::vector<double> input = read_wav(a.in).samples;
  auto model = std::make_shared<const Model>(std::move(w));
  Stream stream(model, hint, oracle);
  std::vector<double> streamed;
  streamed.reserve(input.size() + 2 * Stream::kWindow);
  std::vector<double> hop(Stream::kHop, 0.0);
  for (std::size_t pos = 0; pos < input.size(); pos += Stream::kHop) {
    std::fill(hop.begin(), hop.end(), 0.0);
    const std::size_t n = std::min(Stream::kHop, input.size() - pos);
    std::copy_n(input.begin() + static_cast<std::ptrdiff_t>(pos), n, hop.begin());
    const auto chunk = stream.push(hop);
    streamed.insert(streamed.end(), chunk.begin(), chunk.end());
  }
  const auto tail = stream.flush();
  streamed.insert(streamed.end(), tail.begin(), tail.end());
  // Drop the fixed warm-up delay so the file lines up with the input.
  std::vector<double> aligned(streamed.begin() + Stream::kWindow,
                              streamed.begin() + Stream::kWindow + static_cast<std::ptrdiff_t>(input.size()));
  write_wav(a.out, aligned);
  out << "wrote " << aligned.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string weights;
  double seconds = 60.0;
  std::uint64_t seed = 1;
  std::string hint = "0";
  std::string oracle;
};

int run_bench(const BenchArgs& a, std::ostream& out) {
  auto w = load_for_inference(a.weights);
  const Variant variant = w.config.variant;
  const ClassVocabulary vocab = ClassVocabulary::numbered(w.config.n_classes);
  const MultiHot hint = vocab.parse(a.hint);
  std::optional<MultiHot> oracle;
  if (variant == Variant::ecatse) {
    oracle = a.oracle.empty() ? hint : vocab.parse(a.oracle);
  } else if (!a.oracle.empty()) {
    throw UsageError("--oracle is only accepted by ecatse models");
  }
  if (!(a.seconds > 0.0)) throw UsageError("--seconds must be positive");
  print_config(out, "bench",
               {{"weights", a.weights},
                {"variant", std::string(to_string(variant))},
                {"seconds", a.seconds},
                {"seed", a.seed},
                {"hint", active_indices(hint)},
                {"hidden", w.config.hidden}});
  auto model = std::make_shared<const Model>(std::move(w));
  Stream stream(model, hint, oracle);
  const BenchmarkReport r = benchmark(stream, a.seconds, a.seed);
  json report = {{"audio_seconds", r.audio_seconds}, {"wall_seconds", r.wall_seconds},
                 {"real_time_factor", r.real_time_factor}, {"hop_p50_us", r.hop_p50_us},
                 {"hop_p99_us", r.hop_p99_us}, {"hops", r.hops},
                 {"algorithmic_latency_ms", algorithmic_latency_ms(FilterbankConfig{})}};
  out << report.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal target sound extraction: synth, train, eval, stream, bench", "catse"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--scenes", synth.scenes, "Number of scenes")->required();
  auto* classes_opt = synth_cmd->add_option("--classes", synth.classes, "Number of classes");
  synth_cmd->add_option("--seed", synth.seed, "Base seed");
  synth_cmd->add_option("--corpus", synth.corpus, "Directory-per-class WAV corpus");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--model", tr.model, "Variant")
      ->check(CLI::IsMember({"pctcn", "ecatse", "icatse"}));
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--target-mode", tr.target_mode)->check(CLI::IsMember({"multi", "single"}));
  auto* lambda_opt = train_cmd->add_option("--lambda", tr.lambda, "Classification loss weight (icatse)");
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--hidden", tr.hidden, "TCN hidden channels");
  train_cmd->add_option("--holdout", tr.holdout, "Fraction of scenes held out for model selection");
  train_cmd->add_option("--log", tr.log, "Also write epoch records to this file");
  train_cmd->add_option("--init", tr.init, "Start from this checkpoint");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--weights", ev.weights)->required();
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_option("--targets", ev.targets)->check(CLI::IsMember({"1", "2", "3", "all"}));
  eval_cmd->add_option("--seed", ev.seed);
  eval_cmd->add_option("--oracle-source", ev.oracle_source)->check(CLI::IsMember({"truth", "random"}));
  eval_cmd->add_flag("--json", ev.json_rows, "One JSON record per row instead of the table");

  StreamArgs st;
  auto* stream_cmd = app.add_subcommand("stream", "Extract from a WAV file hop by hop");
  stream_cmd->add_option("--weights", st.weights)->required();
  stream_cmd->add_option("--in", st.in)->required();
  stream_cmd->add_option("--out", st.out)->required();
  stream_cmd->add_option("--hint", st.hint, "Class indices or names, comma separated")->required();
  auto* oracle_opt = stream_cmd->add_option("--oracle", st.oracle, "Present classes (ecatse)");
  stream_cmd->add_option("--vocab", st.vocab, "vocab.txt used to resolve class names");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Measure streaming speed");
  bench_cmd->add_option("--weights", be.weights)->required();
  bench_cmd->add_option("--seconds", be.seconds);
  bench_cmd->add_option("--seed", be.seed);
  bench_cmd->add_option("--hint", be.hint);
  bench_cmd->add_option("--oracle", be.oracle);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth, classes_opt->count() > 0, out);
    if (*train_cmd) return run_train(tr, lambda_opt->count() > 0, out);
    if (*eval_cmd) return run_eval(ev, out);
    if (*stream_cmd) return run_stream(st, oracle_opt->count() > 0, out);
    if (*bench_cmd) return run_bench(be, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace catse::cli
