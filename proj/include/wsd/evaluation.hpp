#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wsd/data.hpp"
#include "wsd/model.hpp"
#include "wsd/training.hpp"

namespace wsd {

using Predictions = std::map<std::string, std::string>;  // instance id -> sense key

struct Score {
  std::size_t total = 0;
  std::size_t attempted = 0;
  std::size_t correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const Score&) const = default;
};

// Framework scorer: a prediction is correct when it matches any gold key.
// total = |gold|. Predictions for ids outside `gold` raise ContractError.
Score score(const Predictions& predictions, const GoldKeys& gold);

struct ScoreReport {
  std::vector<std::pair<std::string, Score>> datasets;  // corpus order
  std::vector<std::pair<Pos, Score>> by_pos;            // NOUN, VERB, ADJ, ADV
  Score overall;
};

ScoreReport score_report(const Predictions& predictions, const GoldKeys& gold,
                         const AnnotatedCorpus& corpus);

// Tab-separated "scope name total attempted correct precision recall f1".
std::string format_report_tsv(const ScoreReport& report);
// Single-row table: datasets, then per-POS, then All (F1 in percent).
std::string format_report_table(const ScoreReport& report, const std::string& system);

Predictions to_sense_keys(const std::map<std::string, Prediction>& predictions);

// Training gold-sense counts per (lemma, pos).
using SenseCounts = std::map<LemmaKey, std::map<std::string, std::size_t>>;
SenseCounts count_senses(const AnnotatedCorpus& train, const GoldKeys& gold);

// Most frequent training sense; ties and unseen lemmas fall to inventory rank 0.
Predictions mfs_baseline(const SenseCounts& counts, const SenseInventory& inventory,
                         const AnnotatedCorpus& test);

struct BucketRow {
  std::string label;           // "0", "1-10", "11-50", "51-200", ">200"
  std::size_t words = 0;       // distinct (lemma, pos)
  std::size_t instances = 0;
  double ambiguity = 0.0;      // mean inventory senses per instance
  Score score;
};

struct FrequencyBuckets {
  std::vector<BucketRow> rows;
};

std::size_t frequency_bucket(std::size_t training_count);
FrequencyBuckets frequency_report(const AnnotatedCorpus& train, const AnnotatedCorpus& test,
                                  const Predictions& predictions, const GoldKeys& gold,
                                  const SenseInventory& inventory);
std::string format_buckets_tsv(const FrequencyBuckets& buckets);
std::string format_buckets_table(const FrequencyBuckets& buckets);

struct AblationRow {
  std::string label;
  PoolingSpec pooling;
  std::vector<std::pair<std::string, double>> dataset_f1;
  double all_f1 = 0.0;
  Checkpoint checkpoint;
};

struct AblationReport {
  std::vector<std::string> datasets;
  std::vector<AblationRow> rows;  // Mean, Max, Mean_Concat, Max_Concat
};

// Trains and scores the four pooling combinations from the same seed. The
// runs are independent and may execute concurrently.
AblationReport ablation_grid(const TrainingData& data, const AnnotatedCorpus& test,
                             const EncoderConfig& encoder, const TrainConfig& base,
                             bool parallel = true);
std::string format_ablation_tsv(const AblationReport& report);
std::string format_ablation_table(const AblationReport& report);

}  // namespace wsd
