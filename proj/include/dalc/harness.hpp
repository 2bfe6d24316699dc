#pragma once

// Leave-one-domain-out evaluation of learning-curve predictors.
//
// Predictors learn from the "dev" sentences of every domain except the held-out
// one and are scored against the held-out domain's gold curve, predicting from
// its "test" sentences. Gold at an anchor is the domain's gold_curve value, or
// the mean per-sentence label over the evaluation sentences when the curve is
// absent.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dalc/dataset.hpp"
#include "dalc/gbt.hpp"
#include "dalc/net.hpp"

namespace dalc::harness {

enum class PredictorKind { kDalc, kGbtCorpus, kGbtInstance, kExp3 };

std::string predictor_name(PredictorKind kind);
PredictorKind parse_predictor(const std::string& name);

struct EvalProtocol {
  std::string held_out_domain;
  std::vector<std::uint64_t> seeds = {11, 12, 13, 14, 15};
  // Anchors scored on the held-out domain. Empty means its gold anchors that
  // have a sample (all of them with `extrapolate`), plus anchor 0.
  std::vector<AnchorSize> anchor_sizes;
  // Anchors whose labels train the predictors; empty follows the same rule.
  std::vector<AnchorSize> train_anchor_sizes;
  // Inputs zeroed in the instance-level network.
  std::vector<std::string> dropped_features;
  // Adds the held-out domain's dev sentences at anchor 0 to the training set.
  bool with_zero_anchor = false;
  // Estimate corpus features for anchors that have no source sample.
  bool extrapolate = false;
};

struct PredictorOptions {
  net::NetConfig net;
  gbt::GbtConfig gbt;
};

struct EvalRow {
  std::string domain;
  AnchorSize anchor = 0;
  std::uint64_t seed = 0;
  double gold = 0.0;
  double pred = 0.0;
  double abs_err = 0.0;
};

struct EvalReport {
  std::string predictor;
  std::vector<EvalRow> rows;
  std::map<std::pair<std::string, std::uint64_t>, double> seed_rmse;
  std::map<std::string, double> domain_rmse;  // mean over seeds
  std::map<std::string, std::size_t> training_instances;
  double average_rmse = 0.0;  // mean over domains

  // Mean absolute error over all rows at `anchor`.
  double anchor_mae(AnchorSize anchor) const;
};

EvalReport leave_one_out(const Manifest& manifest, const EvalProtocol& protocol, PredictorKind kind,
                         const PredictorOptions& options);

// Every labelled domain held out in turn; protocol.held_out_domain is ignored.
EvalReport leave_one_out_all(const Manifest& manifest, const EvalProtocol& protocol,
                             PredictorKind kind, const PredictorOptions& options);

// The network trained on the training side of `protocol` with one seed.
net::TrainingResult train_network(const Manifest& manifest, const EvalProtocol& protocol,
                                  const net::NetConfig& config, std::uint64_t seed);

// A corpus-level or instance-level boosted model trained on the training side
// of `protocol`.
gbt::GbtModel train_gbt(const Manifest& manifest, const EvalProtocol& protocol, PredictorKind kind,
                        const gbt::GbtConfig& config);

// Curve of a boosted model on `domain`; the level follows the model width.
LearningCurve predict_gbt_curve(const gbt::GbtModel& model, const Manifest& manifest, const std::string& domain,
                                std::span<const AnchorSize> sizes, bool extrapolate);

// The sentences a domain is evaluated on ("test", or all when unsplit).
std::vector<SentenceRecord> evaluation_sentences(const DomainEntry& domain);

// Appends `part` to `into` and recomputes the summaries.
void merge_report(EvalReport& into, const EvalReport& part);
void summarize(EvalReport& report);

std::string to_json(const EvalReport& report);
std::string to_tsv(const EvalReport& report);

struct AblationEntry {
  std::string label;
  std::vector<std::string> dropped;
  EvalReport report;
};

// One leave-one-out run of the network per drop set; an empty set is the
// full model.
std::vector<AblationEntry> ablation_suite(const Manifest& manifest, const EvalProtocol& protocol,
                                          const std::vector<std::vector<std::string>>& drop_sets,
                                          const PredictorOptions& options);

struct DistributionReport {
  std::vector<double> bin_left;  // 20 equal bins on [0,1]
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
  double wasserstein = 0.0;
};

// Histogram of per-sentence gold chrF over all anchors: the training domains
// pooled against the held-out domain.
DistributionReport distribution_report(const Manifest& manifest, const std::string& held_out);
std::string to_tsv(const DistributionReport& report);

// 1-Wasserstein distance between two empirical distributions.
double wasserstein1(std::vector<double> a, std::vector<double> b);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dalc::harness
