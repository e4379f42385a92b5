#include "wsd/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include "wsd/error.hpp"

namespace wsd {

Score score(const Predictions& predictions, const GoldKeys& gold) {
  Score s;
  s.total = gold.size();
  for (const auto& [id, key] : predictions) {
    auto g = gold.find(id);
    if (g == gold.end()) throw ContractError("prediction for unknown instance '" + id + "'");
    ++s.attempted;
    if (g->second.count(key)) ++s.correct;
  }
  if (s.attempted) s.precision = static_cast<double>(s.correct) / static_cast<double>(s.attempted);
  if (s.total) s.recall = static_cast<double>(s.correct) / static_cast<double>(s.total);
  // 2PR/(P+R) written in counts; reduces to P exactly when every instance is attempted.
  if (s.correct) s.f1 = 2.0 * static_cast<double>(s.correct) / static_cast<double>(s.attempted + s.total);
  return s;
}

namespace {

template <class Pred>
Score score_subset(const Predictions& predictions, const GoldKeys& gold, const AnnotatedCorpus& corpus,
                   Pred keep) {
  Predictions p;
  GoldKeys g;
  for (const auto& inst : corpus.instances) {
    if (!keep(inst)) continue;
    auto gi = gold.find(inst.id);
    if (gi == gold.end()) throw ValidationError("instance '" + inst.id + "' has no gold keys");
    g.insert(*gi);
    auto pi = predictions.find(inst.id);
    if (pi != predictions.end()) p.insert(*pi);
  }
  return score(p, g);
}

std::string pct(double f1) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * f1);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Left-aligned first column, right-aligned rest.
std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c == 0) {
        os << r[c] << pad;
      } else {
        os << "  " << pad << r[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

ScoreReport score_report(const Predictions& predictions, const GoldKeys& gold, const AnnotatedCorpus& corpus) {
  for (const auto& [id, key] : predictions)
    if (!gold.count(id)) throw ContractError("prediction for unknown instance '" + id + "'");
  ScoreReport r;
  for (const auto& d : corpus.datasets())
    r.datasets.emplace_back(d, score_subset(predictions, gold, corpus,
                                            [&](const Instance& i) { return i.dataset == d; }));
  for (Pos p : kAllPos)
    r.by_pos.emplace_back(p, score_subset(predictions, gold, corpus,
                                          [&](const Instance& i) { return i.pos == p; }));
  r.overall = score_subset(predictions, gold, corpus, [](const Instance&) { return true; });
  return r;
}

std::string format_report_tsv(const ScoreReport& report) {
  std::ostringstream os;
  os << "scope\tname\ttotal\tattempted\tcorrect\tprecision\trecall\tf1\n";
  auto line = [&](const char* scope, const std::string& name, const Score& s) {
    os << scope << '\t' << name << '\t' << s.total << '\t' << s.attempted << '\t' << s.correct << '\t'
       << num(s.precision) << '\t' << num(s.recall) << '\t' << num(s.f1) << '\n';
  };
  for (const auto& [d, s] : report.datasets) line("dataset", d, s);
  for (const auto& [p, s] : report.by_pos) line("pos", std::string(to_string(p)), s);
  line("all", "All", report.overall);
  return os.str();
}

std::string format_report_table(const ScoreReport& report, const std::string& system) {
  std::vector<std::string> header{"System"}, values{system};
  for (const auto& [d, s] : report.datasets) {
    header.push_back(d);
    values.push_back(pct(s.f1));
  }
  for (const auto& [p, s] : report.by_pos) {
    header.emplace_back(to_string(p));
    values.push_back(s.total ? pct(s.f1) : "-");
  }
  header.emplace_back("All");
  values.push_back(pct(report.overall.f1));
  return render({header, values});
}

Predictions to_sense_keys(const std::map<std::string, Prediction>& predictions) {
  Predictions out;
  for (const auto& [id, p] : predictions) out.emplace(id, p.sense_key);
  return out;
}

SenseCounts count_senses(const AnnotatedCorpus& train, const GoldKeys& gold) {
  SenseCounts counts;
  for (const auto& inst : train.instances) {
    auto g = gold.find(inst.id);
    if (g == gold.end()) throw ValidationError("training instance '" + inst.id + "' has no gold keys");
    for (const auto& key : g->second) ++counts[inst.key()][key];
  }
  return counts;
}

Predictions mfs_baseline(const SenseCounts& counts, const SenseInventory& inventory, const AnnotatedCorpus& test) {
  Predictions out;
  for (const auto& inst : test.instances) {
    const auto& senses = inventory.at(inst.key());
    std::size_t best = 0, best_count = 0;
    if (auto c = counts.find(inst.key()); c != counts.end())
      for (std::size_t i = 0; i < senses.size(); ++i) {
        auto n = c->second.find(senses[i].key);
        const std::size_t v = n == c->second.end() ? 0 : n->second;
        if (v > best_count) {
          best = i;
          best_count = v;
        }
      }
    out[inst.id] = senses[best].key;
  }
  return out;
}

std::size_t frequency_bucket(std::size_t training_count) {
  if (training_count == 0) return 0;
  if (training_count <= 10) return 1;
  if (training_count <= 50) return 2;
  if (training_count <= 200) return 3;
  return 4;
}

FrequencyBuckets frequency_report(const AnnotatedCorpus& train, const AnnotatedCorpus& test,
                                  const Predictions& predictions, const GoldKeys& gold,
                                  const SenseInventory& inventory) {
  static const char* kLabels[] = {"0", "1-10", "11-50", "51-200", ">200"};
  const auto counts = lemma_counts(train);
  FrequencyBuckets out;
  std::vector<std::set<LemmaKey>> words(5);
  std::vector<double> senses(5, 0.0);
  for (std::size_t b = 0; b < 5; ++b) out.rows.push_back({kLabels[b], 0, 0, 0.0, {}});
  auto bucket_of = [&](const Instance& inst) {
    auto it = counts.find(inst.key());
    return frequency_bucket(it == counts.end() ? 0 : it->second);
  };
  for (const auto& inst : test.instances) {
    const auto b = bucket_of(inst);
    words[b].insert(inst.key());
    ++out.rows[b].instances;
    senses[b] += static_cast<double>(inventory.at(inst.key()).size());
  }
  for (std::size_t b = 0; b < 5; ++b) {
    auto& row = out.rows[b];
    row.words = words[b].size();
    row.ambiguity = row.instances ? senses[b] / static_cast<double>(row.instances) : 0.0;
    row.score = score_subset(predictions, gold, test, [&](const Instance& i) { return bucket_of(i) == b; });
  }
  return out;
}

std::string format_buckets_tsv(const FrequencyBuckets& buckets) {
  std::ostringstream os;
  os << "bucket\twords\tinstances\tambiguity\tattempted\tcorrect\tf1\n";
  for (const auto& r : buckets.rows)
    os << r.label << '\t' << r.words << '\t' << r.instances << '\t' << num(r.ambiguity) << '\t'
       << r.score.attempted << '\t' << r.score.correct << '\t' << num(r.score.f1) << '\n';
  return os.str();
}

std::string format_buckets_table(const FrequencyBuckets& buckets) {
  std::vector<std::vector<std::string>> rows(5);
  rows[0] = {"Word Count"};
  rows[1] = {"F1"};
  rows[2] = {"#Words"};
  rows[3] = {"#Instances"};
  rows[4] = {"Ambiguity"};
  for (const auto& r : buckets.rows) {
    char amb[16];
    std::snprintf(amb, sizeof amb, "%.2f", r.ambiguity);
    rows[0].push_back(r.label);
    rows[1].push_back(r.instances ? pct(r.score.f1) : "-");
    rows[2].push_back(std::to_string(r.words));
    rows[3].push_back(std::to_string(r.instances));
    rows[4].push_back(amb);
  }
  return render(rows);
}

AblationReport ablation_grid(const TrainingData& data, const AnnotatedCorpus& test, const EncoderConfig& encoder,
                             const TrainConfig& base, bool parallel) {
  const PoolingSpec grid[] = {
      {Merge::Mean, false}, {Merge::Max, false}, {Merge::Mean, true}, {Merge::Max, true}};
  validate_references(test, data.gold, data.inventory);
  auto run = [&](PoolingSpec pooling) {
    TrainConfig cfg = base;
    cfg.pooling = pooling;
    TrainResult result = train(data, encoder, cfg);
    const WsdModel model = result.best.model();
    const auto preds = to_sense_keys(model.predict_corpus(test, data.inventory, data.vocab));
    const ScoreReport report = score_report(preds, data.gold, test);
    AblationRow row{pooling.label(), pooling, {}, report.overall.f1, std::move(result.best)};
    for (const auto& [d, s] : report.datasets) row.dataset_f1.emplace_back(d, s.f1);
    return row;
  };
  AblationReport out;
  out.datasets = test.datasets();
  if (parallel) {
    std::vector<std::future<AblationRow>> jobs;
    for (const auto& p : grid) jobs.push_back(std::async(std::launch::async, run, p));
    for (auto& j : jobs) out.rows.push_back(j.get());
  } else {
    for (const auto& p : grid) out.rows.push_back(run(p));
  }
  return out;
}

std::string format_ablation_tsv(const AblationReport& report) {
  std::ostringstream os;
  os << "model";
  for (const auto& d : report.datasets) os << '\t' << d;
  os << "\tAll\n";
  for (const auto& r : report.rows) {
    os << r.label;
    for (const auto& [d, f1] : r.dataset_f1) os << '\t' << num(f1);
    os << '\t' << num(r.all_f1) << '\n';
  }
  return os.str();
}

std::string format_ablation_table(const AblationReport& report) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{""};
  header.insert(header.end(), report.datasets.begin(), report.datasets.end());
  header.emplace_back("All");
  rows.push_back(header);
  for (const auto& r : report.rows) {
    std::vector<std::string> line{r.label};
    for (const auto& [d, f1] : r.dataset_f1) line.push_back(pct(f1));
    line.push_back(pct(r.all_f1));
    rows.push_back(line);
  }
  return render(rows);
}

}  // namespace wsd
