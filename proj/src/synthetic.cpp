#include "dalc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "dalc/error.hpp"

namespace dalc::synthetic {
namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = nd(rng);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += 1.0 / std::pow(static_cast<double>(k + 1), s);
      cdf_[k] = acc;
    }
    for (auto& v : cdf_) v /= acc;
  }

  std::size_t operator()(std::mt19937_64& rng) const {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return cdf_.size() - 1;
    return static_cast<std::size_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

struct DomainVocab {
  std::vector<std::string> words;
  ZipfSampler sampler;
};

DomainVocab make_vocab(const SyntheticDomainSpec& d, std::size_t general_size, std::mt19937_64& rng) {
  DomainVocab v{{}, ZipfSampler(d.vocab_size, d.zipf_exponent)};
  v.words.reserve(d.vocab_size);
  std::bernoulli_distribution shared(d.general_share);
  std::uniform_int_distribution<std::size_t> pick(0, general_size - 1);
  std::set<std::size_t> used;
  for (std::size_t k = 0; k < d.vocab_size; ++k) {
    if (shared(rng) && used.size() < general_size) {
      std::size_t g = pick(rng);
      while (used.contains(g)) g = (g + 1) % general_size;
      used.insert(g);
      v.words.push_back("g" + std::to_string(g));
    } else {
      v.words.push_back(d.name + "_" + std::to_string(k));
    }
  }
  return v;
}

std::size_t draw_length(std::mt19937_64& rng, double mean) {
  std::normal_distribution<double> nd(mean, mean / 3.0);
  double len = std::round(nd(rng));
  return static_cast<std::size_t>(std::clamp(len, 1.0, 3.0 * mean));
}

std::vector<std::string> draw_tokens(const DomainVocab& v, std::mt19937_64& rng, double mean_length) {
  std::size_t len = draw_length(rng, mean_length);
  std::vector<std::string> out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(v.words[v.sampler(rng)]);
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

std::vector<DecodeStep> make_trace(std::size_t steps, double confidence, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.1);
  std::uniform_real_distribution<double> share(0.3, 0.9);
  std::vector<double> e(steps);
  double mean = 0.0;
  for (auto& x : e) {
    x = jitter(rng);
    mean += x;
  }
  mean /= static_cast<double>(steps);
  constexpr double kRestTokens = 50.0;
  std::vector<DecodeStep> trace(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double p1 = std::min(1.0, std::exp(std::log(confidence) + e[i] - mean));
    double p2 = std::min((1.0 - p1) * share(rng), p1);
    double rest = std::max(0.0, 1.0 - p1 - p2);
    double h = -p1 * std::log(p1);
    if (p2 > 0.0) h -= p2 * std::log(p2);
    if (rest > 0.0) h -= rest * std::log(rest / kRestTokens);
    trace[i] = DecodeStep{p1, p2, std::max(0.0, h)};
  }
  return trace;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (domains.empty()) throw Error(ErrorCode::kInvalidSpec, "at least one domain is required");
  if (sentences_per_domain == 0) throw Error(ErrorCode::kInvalidSpec, "sentences_per_domain must be positive");
  if (encoder_dim == 0) throw Error(ErrorCode::kInvalidSpec, "encoder_dim must be positive");
  if (general_vocab_size == 0) throw Error(ErrorCode::kInvalidSpec, "general_vocab_size must be positive");
  if (!(dev_fraction >= 0.0 && dev_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "dev_fraction must lie in [0,1]");
  if (!(instance_noise >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "instance_noise must be non-negative");
  if (!(mean_length >= 1.0)) throw Error(ErrorCode::kInvalidSpec, "mean_length must be at least 1");
  if (with_labse && labse_dim < 2) throw Error(ErrorCode::kInvalidSpec, "labse_dim must be at least 2");
  std::set<std::string> names;
  for (const auto& d : domains) {
    if (d.name.empty()) throw Error(ErrorCode::kInvalidSpec, "domain name is empty");
    if (!names.insert(d.name).second) throw Error(ErrorCode::kInvalidSpec, "duplicate domain " + d.name);
    if (d.vocab_size == 0) throw Error(ErrorCode::kInvalidSpec, d.name + ": vocab_size must be positive");
    if (!(d.zipf_exponent > 0.0)) throw Error(ErrorCode::kInvalidSpec, d.name + ": zipf exponent must be positive");
    if (!(d.general_share >= 0.0 && d.general_share <= 1.0))
      throw Error(ErrorCode::kInvalidSpec, d.name + ": general_share must lie in [0,1]");
    if (!(d.difficulty_spread >= 0.0))
      throw Error(ErrorCode::kInvalidSpec, d.name + ": difficulty_spread must be non-negative");
    if (!std::isfinite(d.a) || !std::isfinite(d.b) || !std::isfinite(d.c))
      throw Error(ErrorCode::kInvalidSpec, d.name + ": curve parameters must be finite");
  }
}

Manifest generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.encoder_dim;

  Manifest m;
  m.tensor_dim = dim;
  for (std::size_t g = 0; g < spec.general_vocab_size; ++g) m.general_vocab.tokens.insert("g" + std::to_string(g));

  std::mt19937_64 dir_rng(spec.seed ^ 0x5DEECE66DULL);
  const auto u_q = unit_vector(dir_rng, dim);
  const auto u_g = unit_vector(dir_rng, dim);
  const auto u_delta = unit_vector(dir_rng, dim);

  std::unordered_map<std::string, std::vector<float>> embedding_cache;
  auto embedding = [&](const std::string& token) -> const std::vector<float>& {
    auto it = embedding_cache.find(token);
    if (it != embedding_cache.end()) return it->second;
    std::mt19937_64 rng(fnv1a(token, spec.seed));
    std::normal_distribution<double> nd(0.0, 0.5);
    std::vector<float> e(dim);
    for (auto& x : e) x = static_cast<float>(nd(rng));
    return embedding_cache.emplace(token, std::move(e)).first->second;
  };

  std::set<AnchorSize> label_anchors(spec.anchors.begin(), spec.anchors.end());
  label_anchors.insert(spec.unsampled_anchors.begin(), spec.unsampled_anchors.end());
  AnchorSize largest_sample = 0;
  for (AnchorSize n : spec.anchors) largest_sample = std::max(largest_sample, n);

  const std::size_t n_dev =
      static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(spec.sentences_per_domain)));

  for (std::size_t di = 0; di < spec.domains.size(); ++di) {
    const auto& d = spec.domains[di];
    std::mt19937_64 rng(spec.seed + 0x9E3779B97F4A7C15ULL * (di + 1));
    const DomainVocab vocab = make_vocab(d, spec.general_vocab_size, rng);

    const double gain = std::exp(d.b);
    const double q0 = d.c - gain;
    std::vector<double> signature(dim);
    for (std::size_t j = 0; j < dim; ++j) signature[j] = spec.encoder_signal * (q0 * u_q[j] + gain * u_g[j]);

    DomainEntry entry;
    entry.name = d.name;
    entry.sentences.reserve(spec.sentences_per_domain);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, spec.instance_noise);
    for (std::size_t i = 0; i < spec.sentences_per_domain; ++i) {
      SentenceRecord r;
      char id[32];
      std::snprintf(id, sizeof id, "%05zu", i);
      r.id = d.name + "-" + id;
      r.split = i < n_dev ? "dev" : "test";
      r.tokens = draw_tokens(vocab, rng, spec.mean_length);

      const double z = std::clamp(nd(rng), -2.5, 2.5);
      const double delta = d.difficulty_spread * z;

      r.encoder_rep = MatrixF(r.tokens.size(), dim);
      for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        const auto& e = embedding(r.tokens[t]);
        auto row = r.encoder_rep.row(t);
        for (std::size_t j = 0; j < dim; ++j)
          row[j] = static_cast<float>(e[j] + signature[j] + spec.encoder_signal * delta * u_delta[j]);
      }

      const double confidence = std::clamp(0.35 + 0.6 * (q0 + spec.trace_signal * delta), 0.02, 0.98);
      r.decode_trace = make_trace(r.tokens.size(), confidence, rng);

      if (spec.with_labse) {
        auto src = unit_vector(rng, spec.labse_dim);
        auto other = unit_vector(rng, spec.labse_dim);
        double proj = 0.0;
        for (std::size_t j = 0; j < src.size(); ++j) proj += src[j] * other[j];
        double norm = 0.0;
        for (std::size_t j = 0; j < src.size(); ++j) {
          other[j] -= proj * src[j];
          norm += other[j] * other[j];
        }
        norm = std::sqrt(std::max(norm, 1e-24));
        const double cos_t = std::clamp(0.3 + 0.6 * confidence, -1.0, 1.0);
        const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
        std::vector<double> hyp(src.size());
        for (std::size_t j = 0; j < src.size(); ++j) hyp[j] = cos_t * src[j] + sin_t * other[j] / norm;
        r.labse_src = std::move(src);
        r.labse_hyp = std::move(hyp);
      }

      for (AnchorSize n : label_anchors) {
        const double base = d.c - std::exp(-d.a * std::log1p(static_cast<double>(n)) + d.b);
        r.gold_chrf[n] = std::clamp(base + delta + noise(rng), 0.0, 1.0);
      }
      entry.sentences.push_back(std::move(r));
    }

    if (largest_sample > 0) {
      std::mt19937_64 sample_rng(spec.seed ^ (0xA5A5A5A5ULL + di * 0x1000193ULL));
      auto lines = std::make_shared<std::vector<std::string>>();
      lines->reserve(largest_sample);
      for (AnchorSize k = 0; k < largest_sample; ++k) lines->push_back(join(draw_tokens(vocab, sample_rng, spec.mean_length)));
      std::shared_ptr<const std::vector<std::string>> shared = lines;
      for (AnchorSize n : spec.anchors) {
        if (n == 0) continue;
        entry.samples[n] = SourceSample{shared, static_cast<std::size_t>(n), {}};
      }
    }

    LearningCurve curve;
    for (AnchorSize n : label_anchors) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : entry.sentences) {
        if (r.split != "test" && n_dev < entry.sentences.size()) continue;
        sum += r.gold_chrf.at(n);
        ++count;
      }
      curve[n] = sum / static_cast<double>(count);
    }
    entry.gold_curve = std::move(curve);
    m.domains.push_back(std::move(entry));
  }
  return m;
}

SyntheticDomainSpec domain_at(const std::string& name, double latent) {
  SyntheticDomainSpec d;
  d.name = name;
  d.c = 0.50 + 0.25 * latent;
  d.b = std::log(std::max(0.05, 0.30 - 0.10 * latent));
  d.a = std::max(0.05, 0.22 + 0.06 * latent);
  d.vocab_size = static_cast<std::size_t>(std::clamp(3000.0 - 1500.0 * latent, 300.0, 6000.0));
  d.zipf_exponent = std::clamp(1.0 + 0.2 * latent, 0.6, 1.6);
  d.general_share = std::clamp(0.5 + 0.35 * latent, 0.05, 0.95);
  d.difficulty_spread = 0.08;
  return d;
}

SyntheticSpec benchmark_spec(std::uint64_t seed) {
  SyntheticSpec s;
  const char* names[] = {"law", "medical", "it", "koran", "subtitles"};
  const double latents[] = {0.25, 0.75, 0.0, 1.0, 0.5};
  for (int i = 0; i < 5; ++i) s.domains.push_back(domain_at(names[i], latents[i]));
  s.sentences_per_domain = 2000;
  s.dev_fraction = 0.5;
  s.encoder_dim = 8;
  s.instance_noise = 0.02;
  s.anchors = {0, 1000, 3000, 10000, 20000, 100000};
  s.unsampled_anchors = {160000};
  s.seed = seed;
  return s;
}

}  // namespace dalc::synthetic
