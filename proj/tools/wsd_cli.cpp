// wsd: train, evaluate and query word-sense disambiguation models.
//
// Exit codes: 0 success, 1 semantic/validation failure, 2 input parse failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "wsd/data.hpp"
#include "wsd/error.hpp"
#include "wsd/evaluation.hpp"
#include "wsd/io.hpp"
#include "wsd/run_config.hpp"
#include "wsd/synth.hpp"
#include "wsd/training.hpp"

namespace fs = std::filesystem;
using namespace wsd;

namespace {

std::string flag_of(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

// Registers --config plus one flag per config key on a subcommand.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    for (const auto& k : RunConfig::keys()) {
      auto* opt = cmd->add_option(flag_of(k.name), overrides[k.name], k.help);
      if (!k.default_value.empty()) opt->description(k.help + " (default " + k.default_value + ")");
    }
  }

  RunConfig resolve(CLI::App* cmd) const {
    RunConfig rc;
    if (!config_path.empty()) {
      rc.merge_text(read_file(config_path));
      // Relative paths in a config file are relative to that file.
      const fs::path base = fs::path(config_path).parent_path();
      for (const auto& k : RunConfig::keys())
        if (k.default_value.empty() && rc.has_path(k.name) && fs::path(rc.get(k.name)).is_relative())
          rc.set(k.name, (base / rc.get(k.name)).lexically_normal().string());
    }
    for (const auto& k : RunConfig::keys())
      if (cmd->count(flag_of(k.name))) rc.set(k.name, overrides.at(k.name));
    std::cerr << "# resolved config\n" << rc.resolved();
    return rc;
  }
};

const std::string& require_path(const RunConfig& rc, const std::string& key) {
  if (!rc.has_path(key))
    throw ParseError("missing required input " + flag_of(key) + " (config key '" + key + "')");
  return rc.get(key);
}

struct Bundle {
  Vocabulary vocab{{"[CLS]", "[SEP]", "[UNK]", "[PAD]"}};
  SenseInventory inventory;
};

Bundle load_bundle(const RunConfig& rc) {
  Bundle b;
  b.inventory = load_inventory(read_file(require_path(rc, "inventory")));
  b.vocab = Vocabulary::parse(read_file(require_path(rc, "vocab")));
  return b;
}

AnnotatedCorpus load_corpus(const RunConfig& rc, const std::string& key) {
  return parse_corpus(read_file(require_path(rc, key)));
}

void merge_gold(GoldKeys& into, const GoldKeys& from) {
  for (const auto& [id, keys] : from)
    if (!into.emplace(id, keys).second) throw ValidationError("instance '" + id + "' appears in two gold files");
}

void check_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab) {
  if (static_cast<std::size_t>(ckpt.encoder.vocab_size) != vocab.size() ||
      ckpt.vocab_fingerprint != vocab.fingerprint())
    throw ValidationError("checkpoint was trained with a different vocabulary (size " +
                          std::to_string(ckpt.encoder.vocab_size) + ", vocabulary file has " +
                          std::to_string(vocab.size()) + ")");
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- commands -----------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  SynthSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  const SynthBundle b = synth_corpus(a.spec);
  fs::create_directories(a.out_dir);
  auto path = [&](const char* name) { return (fs::absolute(a.out_dir) / name).lexically_normal().string(); };
  auto subset = [&](const AnnotatedCorpus& c) {
    GoldKeys g;
    for (const auto& inst : c.instances) g[inst.id] = b.gold.at(inst.id);
    return g;
  };
  write_file_atomic(path("train.xml"), serialize_corpus(b.train));
  write_file_atomic(path("train.gold.txt"), serialize_gold(subset(b.train)));
  write_file_atomic(path("dev.xml"), serialize_corpus(b.dev));
  write_file_atomic(path("dev.gold.txt"), serialize_gold(subset(b.dev)));
  write_file_atomic(path("test.xml"), serialize_corpus(b.test));
  write_file_atomic(path("test.gold.txt"), serialize_gold(subset(b.test)));
  write_file_atomic(path("inventory.tsv"), serialize_inventory(b.inventory));
  write_file_atomic(path("vocab.txt"), b.vocab.serialize());
  std::ostringstream cfg;
  cfg << "# synthetic corpus, seed " << a.spec.seed << "\n";
  cfg << "train_corpus = " << path("train.xml") << "\ntrain_gold = " << path("train.gold.txt") << "\n";
  cfg << "dev_corpus = " << path("dev.xml") << "\ndev_gold = " << path("dev.gold.txt") << "\n";
  cfg << "test_corpus = " << path("test.xml") << "\ntest_gold = " << path("test.gold.txt") << "\n";
  cfg << "inventory = " << path("inventory.tsv") << "\nvocab = " << path("vocab.txt") << "\n";
  write_file_atomic(path("run.cfg"), cfg.str());
  std::cout << "wrote " << b.train.instances.size() << " train, " << b.dev.instances.size() << " dev, "
            << b.test.instances.size() << " test instances; " << b.held_out.size()
            << " held-out lemmas; vocabulary of " << b.vocab.size() << " pieces to " << a.out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string out;
  std::string metrics;
};

int cmd_train(const RunConfig& rc, const TrainArgs& a) {
  const Bundle b = load_bundle(rc);
  const AnnotatedCorpus train_corpus = load_corpus(rc, "train_corpus");
  GoldKeys gold = parse_gold(read_file(require_path(rc, "train_gold")));
  AnnotatedCorpus dev;
  if (rc.has_path("dev_corpus")) {
    dev = load_corpus(rc, "dev_corpus");
    merge_gold(gold, parse_gold(read_file(require_path(rc, "dev_gold"))));
  } else {
    std::cerr << "note: no dev_corpus given; model selection uses the training corpus\n";
  }
  const TrainingData data{train_corpus, dev, gold, b.inventory, b.vocab};
  const TrainResult result = train(data, rc.encoder_config(), rc.train_config(), [](int epoch, const WsdModel&) {
    if (epoch > 0) std::cerr << "epoch " << epoch << " done\n";
  });
  save_checkpoint(result.best, a.out);
  const std::string metrics =
      a.metrics.empty() ? (fs::path(a.out).parent_path() / "metrics.tsv").string() : a.metrics;
  write_file_atomic(metrics, format_trace_tsv(result.trace));
  std::cout << "best epoch " << result.best.epoch << " dev F1 " << fmt("%.4f", result.best.dev_f1) << "\n"
            << "checkpoint: " << a.out << "\nmetrics: " << metrics << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string report = "report.tsv";
  bool mfs = false;
  bool buckets = false;
};

int cmd_eval(const RunConfig& rc, const EvalArgs& a) {
  const Bundle b = load_bundle(rc);
  const AnnotatedCorpus test = load_corpus(rc, "test_corpus");
  GoldKeys gold = parse_gold(read_file(require_path(rc, "test_gold")));
  validate_references(test, gold, b.inventory);

  std::optional<AnnotatedCorpus> train_corpus;
  GoldKeys train_gold;
  if (a.mfs || a.buckets) {
    train_corpus = load_corpus(rc, "train_corpus");
    train_gold = parse_gold(read_file(require_path(rc, "train_gold")));
  }

  Predictions preds;
  std::string system;
  if (a.mfs) {
    preds = mfs_baseline(count_senses(*train_corpus, train_gold), b.inventory, test);
    system = "MFS";
  } else {
    if (a.ckpt.empty()) throw ParseError("missing required input --ckpt");
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    check_checkpoint(ckpt, b.vocab);
    const WsdModel model = ckpt.model();
    preds = to_sense_keys(model.predict_corpus(test, b.inventory, b.vocab));
    system = std::string(to_string(ckpt.train.variant)) + "/" + ckpt.train.pooling.label();
  }
  const ScoreReport report = score_report(preds, gold, test);
  std::cout << format_report_table(report, system);
  std::string tsv = format_report_tsv(report);
  if (a.buckets) {
    const FrequencyBuckets fb = frequency_report(*train_corpus, test, preds, gold, b.inventory);
    std::cout << "\n" << format_buckets_table(fb);
    write_file_atomic(fs::path(a.report).replace_extension(".buckets.tsv").string(), format_buckets_tsv(fb));
  }
  write_file_atomic(a.report, tsv);
  return 0;
}

struct PredictArgs {
  std::string ckpt;
  std::string sentence;
  std::size_t target = 0;
  std::string lemma;
  std::string pos;
};

int cmd_predict(const RunConfig& rc, const PredictArgs& a) {
  const Bundle b = load_bundle(rc);
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  check_checkpoint(ckpt, b.vocab);
  const WsdModel model = ckpt.model();
  const auto words = split_words(a.sentence);
  if (words.empty()) throw ParseError("--sentence is empty");
  if (a.target >= words.size())
    throw ParseError("--target " + std::to_string(a.target) + " is outside the sentence of " +
                     std::to_string(words.size()) + " words");
  const std::string lemma = a.lemma.empty() ? lowercase(words[a.target]) : a.lemma;
  LemmaKey key;
  if (!a.pos.empty()) {
    key = {lemma, parse_pos(a.pos)};
  } else {
    const auto candidates = b.inventory.keys_for_lemma(lemma);
    if (candidates.empty()) throw UnknownLemma("lemma '" + lemma + "' is not in the sense inventory");
    if (candidates.size() > 1) throw ValidationError("lemma '" + lemma + "' has several parts of speech; pass --pos");
    key = candidates.front();
  }
  const auto& senses = b.inventory.at(key);
  const Prediction p = model.predict(words, a.target, key, b.inventory, b.vocab);
  std::vector<std::size_t> order(senses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return p.probabilities[x] > p.probabilities[y]; });
  std::cout << "target\t" << words[a.target] << "\t" << to_string(key) << (p.backoff ? "\tfirst-sense backoff" : "")
            << "\n";
  std::cout << "rank\tsense_key\tprobability\tgloss\n";
  for (std::size_t r = 0; r < order.size(); ++r)
    std::cout << r + 1 << '\t' << senses[order[r]].key << '\t' << fmt("%.9f", p.probabilities[order[r]]) << '\t'
              << senses[order[r]].gloss << '\n';
  return 0;
}

int cmd_stats(const RunConfig& rc) {
  const SenseInventory inventory = load_inventory(read_file(require_path(rc, "inventory")));
  std::optional<Vocabulary> vocab;
  if (rc.has_path("vocab")) vocab = Vocabulary::parse(read_file(rc.get("vocab")));
  struct Column {
    std::string name;
    CorpusStats stats;
    double multi_piece = -1.0;
  };
  std::vector<Column> cols;
  for (const auto& [key, name] : {std::pair{"train_corpus", "Training"}, std::pair{"dev_corpus", "Validation"},
                                  std::pair{"test_corpus", "Test"}}) {
    if (!rc.has_path(key)) continue;
    const AnnotatedCorpus c = load_corpus(rc, key);
    Column col{name, corpus_stats(c, inventory)};
    if (vocab && !c.instances.empty()) {
      std::size_t multi = 0;
      for (const auto& inst : c.instances)
        if (tokenize_word(lowercase(c.sentences[inst.sentence].tokens[inst.word].surface), *vocab).size() >= 2)
          ++multi;
      col.multi_piece = static_cast<double>(multi) / static_cast<double>(c.instances.size());
    }
    cols.push_back(col);
  }
  if (cols.empty()) throw ParseError("stats needs at least one of --train-corpus, --dev-corpus, --test-corpus");
  std::cout << "statistic";
  for (const auto& c : cols) std::cout << '\t' << c.name;
  std::cout << "\n#Sentences";
  for (const auto& c : cols) std::cout << '\t' << c.stats.sentences;
  std::cout << "\n#Tokens";
  for (const auto& c : cols) std::cout << '\t' << c.stats.tokens;
  std::cout << "\n#Annotations";
  for (const auto& c : cols) std::cout << '\t' << c.stats.annotations;
  std::cout << "\nAmbiguity";
  for (const auto& c : cols) std::cout << '\t' << fmt("%.2f", c.stats.ambiguity);
  if (vocab) {
    std::cout << "\nMultiPieceTargets";
    for (const auto& c : cols) std::cout << '\t' << (c.multi_piece < 0 ? std::string("-") : fmt("%.3f", c.multi_piece));
  }
  std::cout << "\n";
  return 0;
}

struct AblateArgs {
  std::string report = "ablation.tsv";
  bool sequential = false;
};

int cmd_ablate(const RunConfig& rc, const AblateArgs& a) {
  const Bundle b = load_bundle(rc);
  const AnnotatedCorpus train_corpus = load_corpus(rc, "train_corpus");
  const AnnotatedCorpus test = load_corpus(rc, "test_corpus");
  GoldKeys gold = parse_gold(read_file(require_path(rc, "train_gold")));
  merge_gold(gold, parse_gold(read_file(require_path(rc, "test_gold"))));
  AnnotatedCorpus dev;
  if (rc.has_path("dev_corpus")) {
    dev = load_corpus(rc, "dev_corpus");
    merge_gold(gold, parse_gold(read_file(require_path(rc, "dev_gold"))));
  }
  const TrainingData data{train_corpus, dev, gold, b.inventory, b.vocab};
  const AblationReport report = ablation_grid(data, test, rc.encoder_config(), rc.train_config(), !a.sequential);
  std::cout << format_ablation_table(report);
  write_file_atomic(a.report, format_ablation_tsv(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word sense disambiguation with a from-scratch transformer encoder"};
  app.require_subcommand(1);

  ConfigFlags train_flags, eval_flags, predict_flags, stats_flags, ablate_flags;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus bundle and run.cfg");
  synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
  synth->add_option("--num-lemmas", synth_args.spec.num_lemmas, "target lemmas");
  synth->add_option("--senses-per-lemma", synth_args.spec.senses_per_lemma, "senses per lemma");
  synth->add_option("--sentences-per-sense", synth_args.spec.sentences_per_sense,
                    "training sentences for the most frequent sense");
  synth->add_option("--lexicon-size", synth_args.spec.vocab_size, "distinct cue words");
  synth->add_option("--cues-per-sense", synth_args.spec.cues_per_sense, "cue words owned by each sense");
  synth->add_option("--seed", synth_args.spec.seed, "generator seed");
  synth->add_option("--held-out", synth_args.spec.held_out_lemmas, "lemmas kept out of training");
  synth->add_option("--zipf", synth_args.spec.zipf_exponent, "Zipf exponent over sense ranks (0 = uniform)");
  synth->add_option("--dev-per-sense", synth_args.spec.dev_sentences_per_sense, "validation sentences per sense");
  synth->add_option("--test-per-sense", synth_args.spec.test_sentences_per_sense, "test sentences per sense");
  synth->add_option("--test-datasets", synth_args.spec.test_datasets, "number of test datasets");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--out", train_args.out, "checkpoint path")->required();
  train_cmd->add_option("--metrics", train_args.metrics, "per-epoch trace (default: metrics.tsv next to --out)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint (or the MFS baseline) on the test corpus");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "checkpoint path");
  eval_cmd->add_option("--report", eval_args.report, "TSV report path (default report.tsv)");
  eval_cmd->add_flag("--mfs", eval_args.mfs, "score the most-frequent-sense baseline instead of a model");
  eval_cmd->add_flag("--buckets", eval_args.buckets, "add the training-frequency breakdown");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "disambiguate one word in a sentence");
  predict_flags.attach(predict_cmd);
  predict_cmd->add_option("--ckpt", predict_args.ckpt, "checkpoint path")->required();
  predict_cmd->add_option("--sentence", predict_args.sentence, "whitespace-tokenised sentence")->required();
  predict_cmd->add_option("--target", predict_args.target, "0-based index of the target word")->required();
  predict_cmd->add_option("--lemma", predict_args.lemma, "target lemma (default: lowercased surface)");
  predict_cmd->add_option("--pos", predict_args.pos, "NOUN, VERB, ADJ or ADV");

  auto* stats_cmd = app.add_subcommand("stats", "corpus statistics (sentences, tokens, annotations, ambiguity)");
  stats_flags.attach(stats_cmd);

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score the mean/max x concat pooling grid");
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--report", ablate_args.report, "TSV report path (default ablation.tsv)");
  ablate_cmd->add_flag("--sequential", ablate_args.sequential, "run the four trainings one after another");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train_cmd->parsed()) return cmd_train(train_flags.resolve(train_cmd), train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags.resolve(eval_cmd), eval_args);
    if (predict_cmd->parsed()) return cmd_predict(predict_flags.resolve(predict_cmd), predict_args);
    if (stats_cmd->parsed()) return cmd_stats(stats_flags.resolve(stats_cmd));
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags.resolve(ablate_cmd), ablate_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
