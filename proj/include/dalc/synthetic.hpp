#pragma once

// Synthetic domains with a known ground-truth learning curve.
//
// Each domain draws Zipf-distributed token streams from its own vocabulary,
// part of which is shared with the general vocabulary. Every sentence gets a
// difficulty offset delta = spread * z with z ~ N(0,1) clipped to [-2.5,2.5],
// so delta has mean zero. Its gold chrF at anchor n is
//     clamp(c - exp(-a * ln(1 + n) + b) + delta + noise, 0, 1).
// Observable signals are tied to that model:
//   * decode traces: geometric-mean greedy confidence is
//     0.35 + 0.6 * (q0 + trace_signal * delta) (clamped), where
//     q0 = c - exp(b) is the domain's unadapted quality, so least confidence
//     falls linearly as delta grows;
//   * encoder rows: hashed token embedding + encoder_signal * (q0 * u_q +
//     exp(b) * u_g + delta * u_delta) for fixed unit directions u_*;
//   * cross-lingual similarity grows with the same confidence.

#include <cstdint>
#include <string>
#include <vector>

#include "dalc/dataset.hpp"

namespace dalc::synthetic {

struct SyntheticDomainSpec {
  std::string name;
  double a = 0.3;
  double b = -1.2;
  double c = 0.6;
  std::size_t vocab_size = 2000;
  double zipf_exponent = 1.1;
  double general_share = 0.7;  // probability a vocabulary rank maps to a general token
  double difficulty_spread = 0.08;
};

struct SyntheticSpec {
  std::vector<SyntheticDomainSpec> domains;
  std::size_t sentences_per_domain = 2000;
  double dev_fraction = 0.5;  // leading share of each domain's sentences marked "dev"
  std::size_t encoder_dim = 8;
  double instance_noise = 0.02;
  // Anchors with gold labels and a source sample (0 never has a sample).
  std::vector<AnchorSize> anchors = {0, 1000, 10000, 20000, 100000};
  // Anchors with gold labels but no source sample.
  std::vector<AnchorSize> unsampled_anchors;
  std::size_t general_vocab_size = 4000;
  double mean_length = 10.0;
  double trace_signal = 1.0;
  double encoder_signal = 1.0;
  bool with_labse = true;
  std::size_t labse_dim = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

Manifest generate_synthetic(const SyntheticSpec& spec);

// Five domains spread evenly along one latent "familiarity" axis: higher
// familiarity means higher unadapted quality, a higher ceiling, more general
// vocabulary and a more repetitive token distribution.
SyntheticSpec benchmark_spec(std::uint64_t seed = 2024);

// Domain whose latent position is `latent` on the same axis benchmark_spec
// uses (0..1 lies inside the benchmark range).
SyntheticDomainSpec domain_at(const std::string& name, double latent);

}  // namespace dalc::synthetic
