#pragma once

// On-disk data model and its in-memory form.
//
// Manifest layout (JSONL, one object per line):
//   line 1   {"format":"dalc-manifest","version":1,"tensor_dim":d,
//             "general_vocab":"general.vocab"}
//   line 2.. {"name":"law","sentences":"law.sentences.jsonl",
//             "tensors":"law.tensors.dlc","traces":"law.traces.jsonl",
//             "samples":{"1000":{"path":"law.sample.txt","lines":1000},...},
//             "gold_curve":{"0":0.41,"1000":0.47,...}}
// Paths are relative to the manifest. The sentences file holds one object per
// sentence ({"id","split","tokens","labse_src","labse_hyp","gold_chrf"}), the
// tensors file the matching "DLC1" encoder records back to back, and the
// traces file one JSON array of [p1, p2, entropy] triples per line, all in the
// same order. Sample files are raw source text, one sentence per line;
// "lines" takes a prefix of the file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dalc/tensor.hpp"

namespace dalc {

using AnchorSize = std::uint64_t;

// Ordered anchor size -> mean chrF.
using LearningCurve = std::map<AnchorSize, double>;

struct DecodeStep {
  double p1 = 1.0;       // probability of the greedy token
  double p2 = 0.0;       // second-highest probability
  double entropy = 0.0;  // full-distribution entropy, nats
};

struct SentenceRecord {
  std::string id;
  std::string split = "test";  // "dev" rows train predictors, "test" rows evaluate them
  std::vector<std::string> tokens;
  MatrixF encoder_rep;  // tokens.size() x d
  std::vector<DecodeStep> decode_trace;
  std::optional<std::vector<double>> labse_src;
  std::optional<std::vector<double>> labse_hyp;
  std::map<AnchorSize, double> gold_chrf;
};

// A prefix of a shared list of source sentences.
struct SourceSample {
  std::shared_ptr<const std::vector<std::string>> lines;
  std::size_t count = 0;
  std::filesystem::path path;  // origin file, empty for in-memory samples

  std::span<const std::string> view() const {
    return lines ? std::span<const std::string>(lines->data(), count)
                 : std::span<const std::string>();
  }
};

struct DomainEntry {
  std::string name;
  std::vector<SentenceRecord> sentences;
  std::map<AnchorSize, SourceSample> samples;
  std::optional<LearningCurve> gold_curve;
};

struct GeneralVocab {
  std::unordered_set<std::string> tokens;

  bool contains(const std::string& token) const { return tokens.contains(token); }
};

struct Manifest {
  std::size_t tensor_dim = 0;
  GeneralVocab general_vocab;
  std::vector<DomainEntry> domains;

  const DomainEntry& domain(const std::string& name) const;
};

Manifest load_manifest(const std::filesystem::path& path);

// Writes every file of `m` into `dir` (created if needed) and returns the
// manifest path.
std::filesystem::path write_manifest(const Manifest& m, const std::filesystem::path& dir);

struct Violation {
  std::string record_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(const Manifest& m);

// Whitespace tokenization used for raw sample lines.
std::vector<std::string> split_tokens(const std::string& line);

}  // namespace dalc
