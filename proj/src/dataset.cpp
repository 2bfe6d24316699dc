#include "dalc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "json.hpp"

#include "dalc/io.hpp"

namespace dalc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifestFormat = "dalc-manifest";

json parse_json_line(const std::string& line, const std::string& record) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedHeader, record + ": " + e.what());
  }
}

template <class T>
T required_field(const json& obj, const char* key, const std::string& record) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kMalformedHeader, record + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, record + ": field '" + key + "': " + e.what());
  }
}

AnchorSize parse_anchor(const std::string& key, const std::string& record) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(key, &pos);
    if (pos != key.size() || key.front() == '-') throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kMalformedHeader, record + ": anchor '" + key + "' is not a size");
  }
}

fs::path existing(const fs::path& base, const std::string& rel, const std::string& record) {
  fs::path p = base / rel;
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kMissingFile, record + ": " + p.string());
  }
  return p;
}

std::optional<std::vector<double>> optional_vector(const json& obj, const char* key,
                                                   const std::string& record) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return required_field<std::vector<double>>(obj, key, record);
}

class SampleCache {
 public:
  std::shared_ptr<const std::vector<std::string>> get(const fs::path& p) {
    auto key = fs::weakly_canonical(p).string();
    auto it = files_.find(key);
    if (it != files_.end()) return it->second;
    auto lines = std::make_shared<const std::vector<std::string>>(io::read_lines(p));
    files_.emplace(key, lines);
    return lines;
  }

 private:
  std::unordered_map<std::string, std::shared_ptr<const std::vector<std::string>>> files_;
};

DomainEntry load_domain(const json& obj, const fs::path& base, std::size_t tensor_dim,
                        SampleCache& cache, std::size_t line_no) {
  DomainEntry dom;
  dom.name = required_field<std::string>(obj, "name", "manifest line " + std::to_string(line_no));
  const std::string& rec = dom.name;

  const fs::path sentences_path =
      existing(base, required_field<std::string>(obj, "sentences", rec), rec);
  const fs::path tensors_path =
      existing(base, required_field<std::string>(obj, "tensors", rec), rec);
  const fs::path traces_path = existing(base, required_field<std::string>(obj, "traces", rec), rec);

  for (const auto& line : io::read_lines(sentences_path)) {
    if (line.empty()) continue;
    const json s = parse_json_line(line, rec + " sentence");
    SentenceRecord r;
    r.id = required_field<std::string>(s, "id", rec + " sentence");
    r.split = s.value("split", std::string("test"));
    r.tokens = required_field<std::vector<std::string>>(s, "tokens", r.id);
    r.labse_src = optional_vector(s, "labse_src", r.id);
    r.labse_hyp = optional_vector(s, "labse_hyp", r.id);
    if (s.contains("gold_chrf")) {
      for (const auto& [k, v] : s.at("gold_chrf").items()) {
        if (!v.is_number()) throw Error(ErrorCode::kMalformedHeader, r.id + ": gold_chrf value");
        r.gold_chrf[parse_anchor(k, r.id)] = v.get<double>();
      }
    }
    dom.sentences.push_back(std::move(r));
  }

  const auto bytes = io::read_binary_file(tensors_path);
  std::span<const std::uint8_t> rest(bytes);
  for (auto& r : dom.sentences) {
    if (rest.empty()) {
      throw Error(ErrorCode::kMalformedHeader, r.id + ": no encoder record in " + tensors_path.string());
    }
    std::size_t used = 0;
    try {
      r.encoder_rep = read_tensor_record(rest, &used);
    } catch (const Error& e) {
      throw Error(e.code(), r.id + ": " + e.what());
    }
    rest = rest.subspan(used);
    if (r.encoder_rep.cols() != tensor_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  r.id + ": encoder has " + std::to_string(r.encoder_rep.cols()) +
                      " columns, manifest tensor_dim is " + std::to_string(tensor_dim));
    }
    if (r.encoder_rep.rows() != r.tokens.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  r.id + ": encoder has " + std::to_string(r.encoder_rep.rows()) + " rows for " +
                      std::to_string(r.tokens.size()) + " tokens");
    }
  }
  if (!rest.empty()) {
    throw Error(ErrorCode::kMalformedHeader, rec + ": extra encoder records in " + tensors_path.string());
  }

  std::vector<std::string> trace_lines;
  for (auto& line : io::read_lines(traces_path)) {
    if (!line.empty()) trace_lines.push_back(std::move(line));
  }
  if (trace_lines.size() != dom.sentences.size()) {
    throw Error(ErrorCode::kMalformedHeader,
                rec + ": " + std::to_string(trace_lines.size()) + " decode traces for " +
                    std::to_string(dom.sentences.size()) + " sentences");
  }
  for (std::size_t i = 0; i < trace_lines.size(); ++i) {
    auto& r = dom.sentences[i];
    const json t = parse_json_line(trace_lines[i], r.id + " trace");
    if (!t.is_array()) throw Error(ErrorCode::kMalformedHeader, r.id + ": trace is not an array");
    for (const auto& step : t) {
      if (!step.is_array() || step.size() != 3) {
        throw Error(ErrorCode::kMalformedHeader, r.id + ": trace step is not a [p1,p2,entropy] triple");
      }
      r.decode_trace.push_back({step[0].get<double>(), step[1].get<double>(), step[2].get<double>()});
    }
  }

  if (obj.contains("samples")) {
    for (const auto& [k, v] : obj.at("samples").items()) {
      const AnchorSize size = parse_anchor(k, rec);
      const fs::path p = existing(base, required_field<std::string>(v, "path", rec), rec);
      SourceSample sample;
      sample.lines = cache.get(p);
      sample.path = p;
      sample.count = v.contains("lines") ? v.at("lines").get<std::size_t>() : sample.lines->size();
      if (sample.count > sample.lines->size()) {
        throw Error(ErrorCode::kMalformedHeader,
                    rec + ": sample " + k + " wants " + std::to_string(sample.count) +
                        " lines, file has " + std::to_string(sample.lines->size()));
      }
      dom.samples.emplace(size, std::move(sample));
    }
  }
  if (obj.contains("gold_curve") && !obj.at("gold_curve").is_null()) {
    LearningCurve curve;
    for (const auto& [k, v] : obj.at("gold_curve").items()) curve[parse_anchor(k, rec)] = v.get<double>();
    dom.gold_curve = std::move(curve);
  }
  return dom;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return out;
}

}  // namespace

const DomainEntry& Manifest::domain(const std::string& name) const {
  for (const auto& d : domains) {
    if (d.name == name) return d;
  }
  throw Error(ErrorCode::kInvalidArgument, "no domain named '" + name + "'");
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(std::move(tok));
  return out;
}

Manifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  const auto lines = io::read_lines(path);
  const fs::path base = path.parent_path();

  std::size_t first = 0;
  while (first < lines.size() && lines[first].empty()) ++first;
  if (first == lines.size()) throw Error(ErrorCode::kMalformedHeader, path.string() + ": empty manifest");
  const json header = parse_json_line(lines[first], "manifest header");
  if (!header.is_object() || header.value("format", std::string()) != kManifestFormat) {
    throw Error(ErrorCode::kMalformedHeader, "manifest header: format must be \"dalc-manifest\"");
  }

  Manifest m;
  const auto dim = required_field<long long>(header, "tensor_dim", "manifest header");
  if (dim <= 0) throw Error(ErrorCode::kMalformedHeader, "manifest header: tensor_dim must be positive");
  m.tensor_dim = static_cast<std::size_t>(dim);
  if (header.contains("general_vocab")) {
    const fs::path vp =
        existing(base, required_field<std::string>(header, "general_vocab", "manifest header"),
                 "manifest header");
    for (const auto& line : io::read_lines(vp)) {
      for (auto& t : split_tokens(line)) m.general_vocab.tokens.insert(std::move(t));
    }
  }

  SampleCache cache;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const json obj = parse_json_line(lines[i], "manifest line " + std::to_string(i + 1));
    try {
      m.domains.push_back(load_domain(obj, base, m.tensor_dim, cache, i + 1));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedHeader, "manifest line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return m;
}

fs::path write_manifest(const Manifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::string manifest;

  std::vector<std::string> vocab(m.general_vocab.tokens.begin(), m.general_vocab.tokens.end());
  std::sort(vocab.begin(), vocab.end());
  std::string vocab_text;
  for (const auto& t : vocab) vocab_text += t + "\n";
  io::write_file_atomic(dir / "general.vocab", vocab_text);

  json header = {{"format", kManifestFormat},
                 {"version", 1},
                 {"tensor_dim", m.tensor_dim},
                 {"general_vocab", "general.vocab"}};
  manifest += header.dump() + "\n";

  for (const auto& dom : m.domains) {
    const std::string stem = sanitize(dom.name);
    std::string sentences;
    std::string traces;
    std::vector<std::uint8_t> tensors;
    for (const auto& r : dom.sentences) {
      json s = {{"id", r.id}, {"split", r.split}, {"tokens", r.tokens}};
      if (r.labse_src) s["labse_src"] = *r.labse_src;
      if (r.labse_hyp) s["labse_hyp"] = *r.labse_hyp;
      json gold = json::object();
      for (const auto& [k, v] : r.gold_chrf) gold[std::to_string(k)] = v;
      s["gold_chrf"] = gold;
      sentences += s.dump() + "\n";
      json t = json::array();
      for (const auto& st : r.decode_trace) t.push_back({st.p1, st.p2, st.entropy});
      traces += t.dump() + "\n";
      append_tensor_record(r.encoder_rep, tensors);
    }
    io::write_file_atomic(dir / (stem + ".sentences.jsonl"), sentences);
    io::write_file_atomic(dir / (stem + ".traces.jsonl"), traces);
    io::write_file_atomic(dir / (stem + ".tensors.dlc"), tensors);

    json samples = json::object();
    std::map<const void*, std::string> written;
    for (const auto& [size, sample] : dom.samples) {
      const void* key = sample.lines.get();
      auto it = written.find(key);
      if (it == written.end()) {
        const std::string file = stem + ".sample" + std::to_string(written.size()) + ".txt";
        std::string text;
        if (sample.lines) {
          for (const auto& line : *sample.lines) text += line + "\n";
        }
        io::write_file_atomic(dir / file, text);
        it = written.emplace(key, file).first;
      }
      samples[std::to_string(size)] = {{"path", it->second}, {"lines", sample.count}};
    }

    json entry = {{"name", dom.name},
                  {"sentences", stem + ".sentences.jsonl"},
                  {"tensors", stem + ".tensors.dlc"},
                  {"traces", stem + ".traces.jsonl"},
                  {"samples", samples}};
    if (dom.gold_curve) {
      json gold = json::object();
      for (const auto& [k, v] : *dom.gold_curve) gold[std::to_string(k)] = v;
      entry["gold_curve"] = gold;
    }
    manifest += entry.dump() + "\n";
  }
  const fs::path out = dir / "manifest.jsonl";
  io::write_file_atomic(out, manifest);
  return out;
}

ValidationReport validate_dataset(const Manifest& m) {
  ValidationReport report;
  auto add = [&](const std::string& id, std::string msg) {
    report.violations.push_back({id, std::move(msg)});
  };

  if (m.tensor_dim == 0) add("manifest", "tensor_dim must be positive");
  std::set<std::string> names;
  std::set<std::string> ids;
  for (const auto& dom : m.domains) {
    if (!names.insert(dom.name).second) add(dom.name, "duplicate domain name");
    for (const auto& r : dom.sentences) {
      if (!ids.insert(r.id).second) add(r.id, "duplicate sentence id");
      if (r.split != "dev" && r.split != "test") add(r.id, "split must be dev or test");
      if (r.tokens.empty()) add(r.id, "sentence has no tokens");
      if (r.encoder_rep.rows() != r.tokens.size()) add(r.id, "encoder rows differ from token count");
      if (r.encoder_rep.cols() != m.tensor_dim) add(r.id, "encoder columns differ from tensor_dim");
      if (std::any_of(r.encoder_rep.data().begin(), r.encoder_rep.data().end(),
                      [](float v) { return !std::isfinite(v); })) {
        add(r.id, "non-finite encoder value");
      }
      if (r.decode_trace.empty()) add(r.id, "empty decode trace");
      for (std::size_t i = 0; i < r.decode_trace.size(); ++i) {
        const auto& s = r.decode_trace[i];
        const std::string where = r.id + " step " + std::to_string(i);
        if (!(s.p1 > 0.0 && s.p1 <= 1.0)) {
          add(where, "p1 out of (0,1]");
        } else if (!(s.p2 >= 0.0)) {
          add(where, "p2 negative");
        } else if (s.p2 > s.p1) {
          add(where, "p2 exceeds p1");
        } else if (s.p1 + s.p2 > 1.0 + 1e-9) {
          add(where, "p1 + p2 exceeds 1");
        } else if (!(s.entropy >= 0.0) || !std::isfinite(s.entropy)) {
          add(where, "negative entropy");
        }
      }
      if (r.labse_src && r.labse_hyp && r.labse_src->size() != r.labse_hyp->size()) {
        add(r.id, "labse vectors differ in dimension");
      }
      if (r.labse_src.has_value() != r.labse_hyp.has_value()) {
        add(r.id, "only one labse vector present");
      }
      for (const auto& [anchor, v] : r.gold_chrf) {
        if (!(v >= 0.0 && v <= 1.0)) add(r.id, "chrf out of range at anchor " + std::to_string(anchor));
      }
    }
    if (dom.gold_curve) {
      for (const auto& [anchor, v] : *dom.gold_curve) {
        if (!(v >= 0.0 && v <= 1.0)) add(dom.name, "gold curve chrf out of range at anchor " + std::to_string(anchor));
        const bool labelled =
            !dom.sentences.empty() &&
            std::all_of(dom.sentences.begin(), dom.sentences.end(),
                        [&](const SentenceRecord& r) { return r.gold_chrf.contains(anchor); });
        if (!labelled) add(dom.name, "gold anchor " + std::to_string(anchor) + " lacks per-sentence labels");
      }
    }
    for (const auto& [anchor, sample] : dom.samples) {
      if (anchor == 0 && sample.count != 0) add(dom.name, "anchor 0 sample must be empty");
      if (anchor > 0 && sample.count == 0) add(dom.name, "empty sample at anchor " + std::to_string(anchor));
    }
  }
  return report;
}

}  // namespace dalc
