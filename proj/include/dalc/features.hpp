#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dalc/dataset.hpp"

namespace dalc::features {

struct InstanceFeatures {
  double least_confidence = 0.0;
  double margin = 0.0;
  double avg_entropy = 0.0;
  double xsim = 0.0;
  bool xsim_present = false;

  std::array<double, 4> values() const { return {least_confidence, margin, avg_entropy, xsim}; }
};

inline constexpr std::array<std::string_view, 4> kInstanceFeatureNames = {
    "least_confidence", "margin", "avg_entropy", "xsim"};

// Raw sample statistics, before log scaling.
struct CorpusStats {
  double n_instances = 0.0;
  double n_tokens = 0.0;
  double vocab_overlap = 0.0;  // |V(G) & V(S)| / |V(S)|
  double avg_len_chars = 0.0;
  double avg_len_tokens = 0.0;
  double n_unique_tokens = 0.0;
  double type_token_ratio = 0.0;
};

inline constexpr std::size_t kCorpusFeatureCount = 7;
inline constexpr std::array<std::string_view, kCorpusFeatureCount> kCorpusFeatureNames = {
    "n_instances",    "n_tokens",        "vocab_overlap",   "avg_len_chars",
    "avg_len_tokens", "n_unique_tokens", "type_token_ratio"};

// ln(1 + v) of every CorpusStats field, in kCorpusFeatureNames order.
struct CorpusFeatures {
  std::array<double, kCorpusFeatureCount> values{};

  static CorpusFeatures from_stats(const CorpusStats& s);
  friend bool operator==(const CorpusFeatures&, const CorpusFeatures&) = default;
};

double least_confidence(std::span<const DecodeStep> trace);
double margin_score(std::span<const DecodeStep> trace);
double avg_token_entropy(std::span<const DecodeStep> trace);
double xsim(std::span<const double> src, std::span<const double> hyp);

// xsim falls back to 0 (with xsim_present = false) when either embedding is absent.
InstanceFeatures instance_features(const SentenceRecord& record);

CorpusStats corpus_stats(std::span<const std::string> sample, const GeneralVocab& vocab);
CorpusFeatures corpus_features(std::span<const std::string> sample, const GeneralVocab& vocab);

// Features of a domain's sample at one anchor. Anchor 0 (no adaptation data)
// maps to the all-zero vector; other anchors need a sample (MissingSample).
CorpusFeatures anchor_features(const DomainEntry& domain, AnchorSize size,
                               const GeneralVocab& vocab);

// Sample-free estimate at `target` sentences from a smaller sample: counts
// scale with the size ratio, the unique-token count follows a Heaps-law fit
// V = K * N^beta over nested prefixes, ratios stay at the sample's values.
CorpusStats extrapolate_stats(std::span<const std::string> largest_sample, AnchorSize target,
                              const GeneralVocab& vocab);

// Column-wise minima followed by column-wise maxima (length 2d).
std::vector<double> minmax_pool(const MatrixF& encoder_rep);

}  // namespace dalc::features
