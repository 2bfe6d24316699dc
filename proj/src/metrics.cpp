#include "dalc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dalc/error.hpp"

namespace dalc::metrics {

namespace {

// Lenient UTF-8 decoding: invalid lead or continuation bytes map to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s, bool strip_whitespace) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 >> 5) == 0x6) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 >> 4) == 0xE) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 >> 3) == 0x1E) {
      len = 4;
      cp = b0 & 0x07;
    }
    if (len > 1) {
      bool valid = i + len <= s.size();
      for (std::size_t k = 1; valid && k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        valid = (b >> 6) == 0x2;
        cp = (cp << 6) | (b & 0x3F);
      }
      if (!valid) {
        cp = 0xFFFD;
        len = 1;
      }
    }
    i += len;
    const bool space = cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' ||
                       cp == U'\v' || cp == U'\f';
    if (strip_whitespace && space) continue;
    out.push_back(cp);
  }
  return out;
}

struct GramHash {
  std::size_t operator()(const std::u32string& g) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (char32_t c : g) {
      h ^= static_cast<std::uint64_t>(c);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

using GramCounts = std::unordered_map<std::u32string, int, GramHash>;

GramCounts count_grams(const std::vector<char32_t>& chars, std::size_t n) {
  GramCounts counts;
  if (chars.size() < n) return counts;
  for (std::size_t i = 0; i + n <= chars.size(); ++i) {
    ++counts[std::u32string(chars.begin() + static_cast<std::ptrdiff_t>(i),
                            chars.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void require_paired(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(pred.size()) + " predictions vs " +
                                                std::to_string(gold.size()) + " gold values");
  }
  if (pred.empty()) throw Error(ErrorCode::kEmptyList, "no values to compare");
}

}  // namespace

double chrf(std::string_view hypothesis, std::string_view reference, const ChrfConfig& cfg) {
  if (cfg.max_char_order < 1 || !(cfg.beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "chrF needs max_char_order >= 1 and beta > 0");
  }
  const auto ref = decode_utf8(reference, cfg.strip_whitespace);
  if (ref.empty()) throw Error(ErrorCode::kEmptyReference, "chrF reference is empty");
  const auto hyp = decode_utf8(hypothesis, cfg.strip_whitespace);

  double precision_sum = 0.0;
  double recall_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= cfg.max_char_order; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (ref.size() < un) break;
    const auto ref_counts = count_grams(ref, un);
    const auto hyp_counts = count_grams(hyp, un);
    long matches = 0;
    for (const auto& [gram, c] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(c, it->second);
    }
    const double ref_total = static_cast<double>(ref.size() - un + 1);
    const double hyp_total = hyp.size() >= un ? static_cast<double>(hyp.size() - un + 1) : 0.0;
    precision_sum += hyp_total > 0.0 ? static_cast<double>(matches) / hyp_total : 0.0;
    recall_sum += static_cast<double>(matches) / ref_total;
    ++orders;
  }
  const double p = precision_sum / orders;
  const double r = recall_sum / orders;
  if (p == 0.0 && r == 0.0) return 0.0;
  const double b2 = cfg.beta * cfg.beta;
  return (1.0 + b2) * p * r / (b2 * p + r);
}

double mean_chrf(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyList, "mean chrF of no scores");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "chrF score outside [0,1]");
    sum += s;
  }
  return sum / static_cast<double>(scores.size());
}

double rmse(std::span<const double> pred, std::span<const double> gold) {
  require_paired(pred, gold);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> gold) {
  require_paired(pred, gold);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gold[i]);
  return sum / static_cast<double>(pred.size());
}

}  // namespace dalc::metrics
