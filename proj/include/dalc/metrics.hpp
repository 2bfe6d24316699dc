#pragma once

#include <span>
#include <string_view>

namespace dalc::metrics {

struct ChrfConfig {
  int max_char_order = 6;
  double beta = 2.0;
  bool strip_whitespace = true;
};

// Sentence-level character n-gram F-score in [0,1]. Precision and recall are
// averaged over the orders for which the reference has at least one n-gram.
// Input is UTF-8; n-grams are over code points.
double chrf(std::string_view hypothesis, std::string_view reference,
            const ChrfConfig& cfg = {});

double mean_chrf(std::span<const double> scores);

double rmse(std::span<const double> pred, std::span<const double> gold);
double mae(std::span<const double> pred, std::span<const double> gold);

}  // namespace dalc::metrics
