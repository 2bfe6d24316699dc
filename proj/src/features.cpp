#include "dalc/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "dalc/simd/kernels.hpp"

namespace dalc::features {

namespace {

void require_trace(std::span<const DecodeStep> trace) {
  if (trace.empty()) throw Error(ErrorCode::kEmptyTrace, "decode trace has no steps");
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace

CorpusFeatures CorpusFeatures::from_stats(const CorpusStats& s) {
  return {{std::log1p(s.n_instances), std::log1p(s.n_tokens), std::log1p(s.vocab_overlap),
           std::log1p(s.avg_len_chars), std::log1p(s.avg_len_tokens),
           std::log1p(s.n_unique_tokens), std::log1p(s.type_token_ratio)}};
}

double least_confidence(std::span<const DecodeStep> trace) {
  require_trace(trace);
  double log_sum = 0.0;
  for (const auto& s : trace) {
    if (!(s.p1 > 0.0)) {
      throw Error(ErrorCode::kNonPositiveProbability, "greedy token probability must be positive");
    }
    log_sum += std::log(s.p1);
  }
  return 1.0 - std::exp(log_sum / static_cast<double>(trace.size()));
}

double margin_score(std::span<const DecodeStep> trace) {
  require_trace(trace);
  double sum = 0.0;
  for (const auto& s : trace) sum += s.p1 - s.p2;
  return sum / static_cast<double>(trace.size());
}

double avg_token_entropy(std::span<const DecodeStep> trace) {
  require_trace(trace);
  double sum = 0.0;
  for (const auto& s : trace) sum += s.entropy;
  return sum / static_cast<double>(trace.size());
}

double xsim(std::span<const double> src, std::span<const double> hyp) {
  if (src.size() != hyp.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding dimensions differ: " +
                                                   std::to_string(src.size()) + " vs " +
                                                   std::to_string(hyp.size()));
  }
  const double nn = simd::dot(src, src) * simd::dot(hyp, hyp);
  if (!(nn > 0.0)) throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  return std::clamp(simd::dot(src, hyp) / std::sqrt(nn), -1.0, 1.0);
}

InstanceFeatures instance_features(const SentenceRecord& record) {
  InstanceFeatures f;
  try {
    f.least_confidence = least_confidence(record.decode_trace);
    f.margin = margin_score(record.decode_trace);
    f.avg_entropy = avg_token_entropy(record.decode_trace);
    if (record.labse_src && record.labse_hyp) {
      f.xsim = xsim(*record.labse_src, *record.labse_hyp);
      f.xsim_present = true;
    }
  } catch (const Error& e) {
    throw Error(e.code(), record.id + ": " + e.what());
  }
  return f;
}

CorpusStats corpus_stats(std::span<const std::string> sample, const GeneralVocab& vocab) {
  if (sample.empty()) throw Error(ErrorCode::kEmptySample, "corpus features of an empty sample");
  CorpusStats s;
  std::unordered_set<std::string> types;
  double chars = 0.0;
  double tokens = 0.0;
  for (const auto& line : sample) {
    chars += static_cast<double>(utf8_length(line));
    for (auto& t : split_tokens(line)) {
      tokens += 1.0;
      types.insert(std::move(t));
    }
  }
  std::size_t known = 0;
  for (const auto& t : types) known += vocab.contains(t) ? 1 : 0;

  const double n = static_cast<double>(sample.size());
  s.n_instances = n;
  s.n_tokens = tokens;
  s.n_unique_tokens = static_cast<double>(types.size());
  s.avg_len_chars = chars / n;
  s.avg_len_tokens = tokens / n;
  s.vocab_overlap = types.empty() ? 0.0 : static_cast<double>(known) / s.n_unique_tokens;
  s.type_token_ratio = tokens > 0.0 ? s.n_unique_tokens / tokens : 0.0;
  return s;
}

CorpusFeatures corpus_features(std::span<const std::string> sample, const GeneralVocab& vocab) {
  return CorpusFeatures::from_stats(corpus_stats(sample, vocab));
}

CorpusFeatures anchor_features(const DomainEntry& domain, AnchorSize size,
                               const GeneralVocab& vocab) {
  if (size == 0) return {};
  auto it = domain.samples.find(size);
  if (it == domain.samples.end()) {
    throw Error(ErrorCode::kMissingSample,
                domain.name + ": no source sample at anchor " + std::to_string(size));
  }
  return corpus_features(it->second.view(), vocab);
}

CorpusStats extrapolate_stats(std::span<const std::string> largest_sample, AnchorSize target,
                              const GeneralVocab& vocab) {
  CorpusStats base = corpus_stats(largest_sample, vocab);
  const double ratio = static_cast<double>(target) / base.n_instances;

  // Heaps fit over nested prefixes: 1/16, 1/8, 1/4, 1/2 and the full sample.
  std::vector<double> log_n;
  std::vector<double> log_v;
  std::unordered_set<std::string> types;
  double tokens = 0.0;
  std::size_t next_cut = std::max<std::size_t>(1, largest_sample.size() / 16);
  for (std::size_t i = 0; i < largest_sample.size(); ++i) {
    for (auto& t : split_tokens(largest_sample[i])) {
      tokens += 1.0;
      types.insert(std::move(t));
    }
    if (i + 1 == next_cut || i + 1 == largest_sample.size()) {
      if (tokens > 0.0 && !types.empty()) {
        log_n.push_back(std::log(tokens));
        log_v.push_back(std::log(static_cast<double>(types.size())));
      }
      next_cut = std::min(largest_sample.size(), next_cut * 2);
    }
  }

  double beta = 1.0;
  double log_k = 0.0;
  bool fitted = false;
  if (log_n.size() >= 2) {
    const double k = static_cast<double>(log_n.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      sx += log_n[i];
      sy += log_v[i];
      sxx += log_n[i] * log_n[i];
      sxy += log_n[i] * log_v[i];
    }
    const double denom = k * sxx - sx * sx;
    if (denom > 1e-12) {
      beta = std::clamp((k * sxy - sx * sy) / denom, 0.0, 1.0);
      log_k = (sy - beta * sx) / k;
      fitted = true;
    }
  }

  CorpusStats out = base;
  out.n_instances = static_cast<double>(target);
  out.n_tokens = base.n_tokens * ratio;
  if (fitted && out.n_tokens > 0.0) {
    out.n_unique_tokens = std::exp(log_k + beta * std::log(out.n_tokens));
  } else {
    out.n_unique_tokens = base.n_unique_tokens * ratio;
  }
  return out;
}

std::vector<double> minmax_pool(const MatrixF& encoder_rep) {
  if (encoder_rep.rows() == 0 || encoder_rep.cols() == 0) {
    throw Error(ErrorCode::kEmptyMatrix, "min-max pooling of an empty matrix");
  }
  const std::size_t d = encoder_rep.cols();
  std::vector<float> mins(encoder_rep.row(0).begin(), encoder_rep.row(0).end());
  std::vector<float> maxs = mins;
  const auto& k = simd::active_kernels();
  for (std::size_t r = 1; r < encoder_rep.rows(); ++r) {
    k.min_max_accumulate(encoder_rep.row(r).data(), mins.data(), maxs.data(), d);
  }
  std::vector<double> out(2 * d);
  std::copy(mins.begin(), mins.end(), out.begin());
  std::copy(maxs.begin(), maxs.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
  return out;
}

}  // namespace dalc::features
