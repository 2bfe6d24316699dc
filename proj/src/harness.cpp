#include "dalc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "dalc/curvefit.hpp"
#include "dalc/error.hpp"
#include "dalc/features.hpp"
#include "json.hpp"

namespace dalc::harness {
namespace {

using nlohmann::json;

bool has_labels(const DomainEntry& d) {
  if (d.gold_curve && !d.gold_curve->empty()) return true;
  return std::any_of(d.sentences.begin(), d.sentences.end(),
                     [](const SentenceRecord& r) { return !r.gold_chrf.empty(); });
}

std::set<AnchorSize> labelled_anchors(const DomainEntry& d) {
  std::set<AnchorSize> out;
  if (d.gold_curve)
    for (const auto& [n, v] : *d.gold_curve) out.insert(n);
  for (const auto& r : d.sentences)
    for (const auto& [n, v] : r.gold_chrf) out.insert(n);
  return out;
}

// Sentences of one split; a domain that does not use the split contributes
// all of its sentences.
std::vector<const SentenceRecord*> split_of(const DomainEntry& d, const std::string& split) {
  std::vector<const SentenceRecord*> out;
  for (const auto& r : d.sentences)
    if (r.split == split) out.push_back(&r);
  if (out.empty())
    for (const auto& r : d.sentences) out.push_back(&r);
  return out;
}

std::optional<double> mean_label(const std::vector<const SentenceRecord*>& rs, AnchorSize n) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto* r : rs) {
    auto it = r->gold_chrf.find(n);
    if (it == r->gold_chrf.end()) continue;
    sum += it->second;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> domain_gold(const DomainEntry& d, AnchorSize n,
                                  const std::vector<const SentenceRecord*>& fallback) {
  if (d.gold_curve) {
    auto it = d.gold_curve->find(n);
    if (it != d.gold_curve->end()) return it->second;
  }
  return mean_label(fallback, n);
}

std::string qualified(const DomainEntry& d, const SentenceRecord& r) { return d.name + "/" + r.id; }

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max<unsigned>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DALC_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// One labelled example: a sentence (or a whole domain) at one anchor.
struct Example {
  const DomainEntry* domain = nullptr;
  const SentenceRecord* sentence = nullptr;  // null for domain-level examples
  AnchorSize anchor = 0;
  double target = 0.0;
};

struct Setup {
  const DomainEntry* held = nullptr;
  std::vector<const DomainEntry*> train_domains;
  std::vector<AnchorSize> eval_anchors;
  LearningCurve gold;
  std::vector<const SentenceRecord*> eval_sentences;
  std::vector<Example> instance_examples;
  std::vector<Example> domain_examples;
};

std::vector<AnchorSize> default_anchors(const DomainEntry& d, const EvalProtocol& p) {
  std::vector<AnchorSize> out;
  for (AnchorSize n : labelled_anchors(d))
    if (n == 0 || d.samples.contains(n) || p.extrapolate) out.push_back(n);
  return out;
}

std::vector<AnchorSize> train_anchors_for(const DomainEntry& d, const EvalProtocol& p) {
  const auto labelled = labelled_anchors(d);
  std::vector<AnchorSize> out;
  if (p.train_anchor_sizes.empty()) {
    out = default_anchors(d, p);
  } else {
    for (AnchorSize n : p.train_anchor_sizes)
      if (labelled.contains(n)) out.push_back(n);
  }
  return out;
}

Setup build_setup(const Manifest& m, const EvalProtocol& p, bool for_eval = true) {
  std::size_t with_labels = 0;
  for (const auto& d : m.domains) with_labels += has_labels(d) ? 1 : 0;
  if (with_labels < 2) {
    throw Error(ErrorCode::kInsufficientDomains,
                "leave-one-out needs at least 2 labelled domains, found " + std::to_string(with_labels));
  }

  Setup s;
  s.held = &m.domain(p.held_out_domain);
  if (for_eval && !has_labels(*s.held)) throw Error(ErrorCode::kNoGoldLabels, p.held_out_domain + ": no gold labels");
  for (const auto& d : m.domains)
    if (&d != s.held && has_labels(d)) s.train_domains.push_back(&d);
  if (s.train_domains.empty()) {
    throw Error(ErrorCode::kInsufficientDomains, "no labelled domain left after holding out " + p.held_out_domain);
  }

  s.eval_sentences = split_of(*s.held, "test");
  if (p.anchor_sizes.empty()) {
    s.eval_anchors = default_anchors(*s.held, p);
  } else {
    s.eval_anchors = p.anchor_sizes;
    std::sort(s.eval_anchors.begin(), s.eval_anchors.end());
    s.eval_anchors.erase(std::unique(s.eval_anchors.begin(), s.eval_anchors.end()), s.eval_anchors.end());
  }
  for (AnchorSize n : s.eval_anchors) {
    if (!for_eval) break;
    auto g = domain_gold(*s.held, n, s.eval_sentences);
    if (!g) {
      throw Error(ErrorCode::kNoGoldLabels,
                  p.held_out_domain + ": no gold label at anchor " + std::to_string(n));
    }
    s.gold[n] = *g;
  }

  for (const auto* d : s.train_domains) {
    const auto dev = split_of(*d, "dev");
    for (AnchorSize n : train_anchors_for(*d, p)) {
      for (const auto* r : dev) {
        auto it = r->gold_chrf.find(n);
        if (it != r->gold_chrf.end()) s.instance_examples.push_back({d, r, n, it->second});
      }
      if (auto g = domain_gold(*d, n, split_of(*d, "test"))) s.domain_examples.push_back({d, nullptr, n, *g});
    }
  }

  if (p.with_zero_anchor) {
    std::vector<const SentenceRecord*> dev;
    for (const auto& r : s.held->sentences)
      if (r.split == "dev") dev.push_back(&r);
    std::size_t added = 0;
    for (const auto* r : dev) {
      auto it = r->gold_chrf.find(0);
      if (it == r->gold_chrf.end()) continue;
      s.instance_examples.push_back({s.held, r, 0, it->second});
      ++added;
    }
    if (added == 0) {
      throw Error(ErrorCode::kNoGoldLabels,
                  p.held_out_domain + ": zero-anchor augmentation needs dev sentences labelled at anchor 0");
    }
    if (auto g = mean_label(dev, 0)) s.domain_examples.push_back({s.held, nullptr, 0, *g});
  }

  std::unordered_set<std::string> train_ids;
  for (const auto& e : s.instance_examples) train_ids.insert(qualified(*e.domain, *e.sentence));
  for (const auto* r : s.eval_sentences) {
    if (train_ids.contains(qualified(*s.held, *r))) {
      throw std::logic_error("evaluation sentence " + r->id + " also appears in the training set");
    }
  }
  return s;
}

// Corpus features per (domain, anchor), computed once per run.
class CorpusCache {
 public:
  CorpusCache(const Manifest& m, bool extrapolate) : m_(m), extrapolate_(extrapolate) {}

  const features::CorpusFeatures& get(const DomainEntry& d, AnchorSize n) {
    auto key = std::make_pair(&d, n);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const AnchorSize sizes[] = {n};
    auto f = net::corpus_features_for_sizes(d, sizes, m_.general_vocab, extrapolate_);
    return cache_.emplace(key, f.at(n)).first->second;
  }

 private:
  const Manifest& m_;
  bool extrapolate_;
  std::map<std::pair<const DomainEntry*, AnchorSize>, features::CorpusFeatures> cache_;
};

void add_rows(EvalReport& report, const Setup& s, std::uint64_t seed, const LearningCurve& pred) {
  for (AnchorSize n : s.eval_anchors) {
    EvalRow row;
    row.domain = s.held->name;
    row.anchor = n;
    row.seed = seed;
    row.gold = s.gold.at(n);
    row.pred = pred.at(n);
    row.abs_err = std::abs(row.pred - row.gold);
    report.rows.push_back(row);
  }
}

LearningCurve run_exp3(const Setup& s) {
  std::vector<curvefit::AnchorObservation> obs;
  for (const auto& e : s.domain_examples) obs.push_back({e.anchor, e.target});
  const auto fit = curvefit::exp3_fit(obs);
  return curvefit::exp3_curve(fit.params, s.eval_anchors);
}

gbt::GbtModel fit_gbt_corpus(const Setup& s, CorpusCache& cache, const gbt::GbtConfig& cfg) {
  if (s.domain_examples.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no labelled training anchors");
  MatrixD rows(s.domain_examples.size(), features::kCorpusFeatureCount);
  std::vector<double> targets;
  for (std::size_t i = 0; i < s.domain_examples.size(); ++i) {
    const auto& e = s.domain_examples[i];
    const auto& f = cache.get(*e.domain, e.anchor);
    std::copy(f.values.begin(), f.values.end(), rows.row(i).begin());
    targets.push_back(e.target);
  }
  return gbt::gbt_fit(rows, targets, cfg, 0);
}

// Cached [minmax pool, instance features] prefix of the instance-level row.
class InstanceRows {
 public:
  const std::vector<double>& base(const SentenceRecord& r) {
    auto it = base_.find(&r);
    if (it != base_.end()) return it->second;
    auto row = features::minmax_pool(r.encoder_rep);
    const auto inst = features::instance_features(r).values();
    row.insert(row.end(), inst.begin(), inst.end());
    return base_.emplace(&r, std::move(row)).first->second;
  }

  void fill(const SentenceRecord& r, const features::CorpusFeatures& f, std::span<double> out) {
    const auto& b = base(r);
    std::copy(b.begin(), b.end(), out.begin());
    std::copy(f.values.begin(), f.values.end(), out.begin() + static_cast<std::ptrdiff_t>(b.size()));
  }

 private:
  std::unordered_map<const SentenceRecord*, std::vector<double>> base_;
};

gbt::GbtModel fit_gbt_instance(const Setup& s, CorpusCache& cache, InstanceRows& rows_cache,
                               const gbt::GbtConfig& cfg) {
  if (s.instance_examples.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no labelled training sentences");
  const std::size_t width =
      rows_cache.base(*s.instance_examples.front().sentence).size() + features::kCorpusFeatureCount;
  MatrixD rows(s.instance_examples.size(), width);
  std::vector<double> targets;
  for (std::size_t i = 0; i < s.instance_examples.size(); ++i) {
    const auto& e = s.instance_examples[i];
    rows_cache.fill(*e.sentence, cache.get(*e.domain, e.anchor), rows.row(i));
    targets.push_back(e.target);
  }
  return gbt::gbt_fit(rows, targets, cfg, 0);
}

LearningCurve predict_gbt(const gbt::GbtModel& model, PredictorKind kind, const DomainEntry& domain,
                          const std::vector<const SentenceRecord*>& sentences,
                          std::span<const AnchorSize> sizes, CorpusCache& cache, InstanceRows& rows_cache) {
  LearningCurve out;
  for (AnchorSize n : sizes) {
    const auto& f = cache.get(domain, n);
    if (kind == PredictorKind::kGbtCorpus) {
      out[n] = gbt::gbt_predict(model, f.values);
      continue;
    }
    if (sentences.empty()) throw Error(ErrorCode::kEmptyList, domain.name + ": no sentences to predict");
    std::vector<double> row(model.n_features);
    double sum = 0.0;
    for (const auto* r : sentences) {
      rows_cache.fill(*r, f, row);
      sum += gbt::gbt_predict(model, row);
    }
    out[n] = sum / static_cast<double>(sentences.size());
  }
  return out;
}

net::NetConfig effective_config(const Manifest& m, const EvalProtocol& p, const net::NetConfig& base) {
  net::NetConfig cfg = base;
  cfg.encoder_dim = m.tensor_dim;
  cfg.dropped_features.insert(cfg.dropped_features.end(), p.dropped_features.begin(), p.dropped_features.end());
  cfg.validate();
  return cfg;
}

std::vector<net::TrainingInstance> make_instances(const Setup& s, CorpusCache& cache, const net::NetConfig& cfg) {
  std::unordered_map<const SentenceRecord*, std::shared_ptr<const MatrixD>> encoders;
  std::unordered_map<const SentenceRecord*, features::InstanceFeatures> dfs;
  std::vector<net::TrainingInstance> instances;
  instances.reserve(s.instance_examples.size());
  for (const auto& e : s.instance_examples) {
    auto it = encoders.find(e.sentence);
    if (it == encoders.end()) {
      it = encoders.emplace(e.sentence, net::prepare_encoder(e.sentence->encoder_rep, cfg.max_window())).first;
      dfs.emplace(e.sentence, features::instance_features(*e.sentence));
    }
    instances.push_back({it->second, dfs.at(e.sentence), cache.get(*e.domain, e.anchor), e.target,
                         qualified(*e.domain, *e.sentence)});
  }
  return instances;
}

std::vector<LearningCurve> run_dalc(const Manifest& m, const Setup& s, CorpusCache& cache,
                                    const EvalProtocol& p, const net::NetConfig& base_cfg) {
  const net::NetConfig cfg = effective_config(m, p, base_cfg);
  const auto instances = make_instances(s, cache, cfg);

  std::map<AnchorSize, features::CorpusFeatures> eval_corpus;
  for (AnchorSize n : s.eval_anchors) eval_corpus[n] = cache.get(*s.held, n);
  std::vector<SentenceRecord> eval_records;
  eval_records.reserve(s.eval_sentences.size());
  for (const auto* r : s.eval_sentences) eval_records.push_back(*r);

  std::vector<LearningCurve> curves(p.seeds.size());
  std::vector<std::exception_ptr> errors(p.seeds.size());
  auto job = [&](std::size_t i) {
    try {
      net::NetConfig c = cfg;
      c.seed = p.seeds[i];
      const auto result = net::train(instances, c);
      curves[i] = net::predict_curve(result.model, eval_records, eval_corpus);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = worker_count(p.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < p.seeds.size(); ++i) job(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < p.seeds.size(); i = next++) job(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return curves;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string predictor_name(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kDalc: return "dalc";
    case PredictorKind::kGbtCorpus: return "gbt-corpus";
    case PredictorKind::kGbtInstance: return "gbt-instance";
    case PredictorKind::kExp3: return "exp3";
  }
  return "unknown";
}

PredictorKind parse_predictor(const std::string& name) {
  for (auto k : {PredictorKind::kDalc, PredictorKind::kGbtCorpus, PredictorKind::kGbtInstance, PredictorKind::kExp3})
    if (predictor_name(k) == name) return k;
  throw Error(ErrorCode::kInvalidArgument, "unknown predictor " + name);
}

double EvalReport::anchor_mae(AnchorSize anchor) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.anchor != anchor) continue;
    sum += r.abs_err;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kEmptyList, "no rows at anchor " + std::to_string(anchor));
  return sum / static_cast<double>(n);
}

void summarize(EvalReport& report) {
  std::map<std::pair<std::string, std::uint64_t>, std::pair<double, std::size_t>> acc;
  for (const auto& r : report.rows) {
    auto& a = acc[{r.domain, r.seed}];
    a.first += (r.pred - r.gold) * (r.pred - r.gold);
    ++a.second;
  }
  report.seed_rmse.clear();
  report.domain_rmse.clear();
  std::map<std::string, std::pair<double, std::size_t>> per_domain;
  for (const auto& [key, a] : acc) {
    const double v = std::sqrt(a.first / static_cast<double>(a.second));
    report.seed_rmse[key] = v;
    auto& d = per_domain[key.first];
    d.first += v;
    ++d.second;
  }
  double total = 0.0;
  for (const auto& [name, d] : per_domain) {
    report.domain_rmse[name] = d.first / static_cast<double>(d.second);
    total += report.domain_rmse[name];
  }
  report.average_rmse = per_domain.empty() ? 0.0 : total / static_cast<double>(per_domain.size());
}

void merge_report(EvalReport& into, const EvalReport& part) {
  if (into.predictor.empty()) into.predictor = part.predictor;
  into.rows.insert(into.rows.end(), part.rows.begin(), part.rows.end());
  for (const auto& [k, v] : part.training_instances) into.training_instances[k] = v;
  summarize(into);
}

EvalReport leave_one_out(const Manifest& manifest, const EvalProtocol& protocol, PredictorKind kind,
                         const PredictorOptions& options) {
  if (protocol.seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one seed is required");
  const Setup s = build_setup(manifest, protocol);
  CorpusCache cache(manifest, protocol.extrapolate);

  EvalReport report;
  report.predictor = predictor_name(kind);
  const bool instance_level = kind == PredictorKind::kDalc || kind == PredictorKind::kGbtInstance;
  report.training_instances[s.held->name] =
      instance_level ? s.instance_examples.size() : s.domain_examples.size();

  if (kind == PredictorKind::kDalc) {
    const auto curves = run_dalc(manifest, s, cache, protocol, options.net);
    for (std::size_t i = 0; i < protocol.seeds.size(); ++i) add_rows(report, s, protocol.seeds[i], curves[i]);
  } else {
    // The remaining predictors are deterministic, so one fit serves every seed.
    LearningCurve curve;
    if (kind == PredictorKind::kExp3) {
      curve = run_exp3(s);
    } else {
      InstanceRows rows;
      const auto model = kind == PredictorKind::kGbtCorpus ? fit_gbt_corpus(s, cache, options.gbt)
                                                           : fit_gbt_instance(s, cache, rows, options.gbt);
      curve = predict_gbt(model, kind, *s.held, s.eval_sentences, s.eval_anchors, cache, rows);
    }
    for (auto seed : protocol.seeds) add_rows(report, s, seed, curve);
  }
  summarize(report);
  return report;
}

EvalReport leave_one_out_all(const Manifest& manifest, const EvalProtocol& protocol,
                             PredictorKind kind, const PredictorOptions& options) {
  EvalReport all;
  all.predictor = predictor_name(kind);
  std::size_t labelled = 0;
  for (const auto& d : manifest.domains) labelled += has_labels(d) ? 1 : 0;
  if (labelled < 2) {
    throw Error(ErrorCode::kInsufficientDomains,
                "leave-one-out needs at least 2 labelled domains, found " + std::to_string(labelled));
  }
  for (const auto& d : manifest.domains) {
    if (!has_labels(d)) continue;
    EvalProtocol p = protocol;
    p.held_out_domain = d.name;
    merge_report(all, leave_one_out(manifest, p, kind, options));
  }
  return all;
}

net::TrainingResult train_network(const Manifest& manifest, const EvalProtocol& protocol,
                                  const net::NetConfig& config, std::uint64_t seed) {
  const Setup s = build_setup(manifest, protocol, false);
  CorpusCache cache(manifest, protocol.extrapolate);
  net::NetConfig cfg = effective_config(manifest, protocol, config);
  cfg.seed = seed;
  return net::train(make_instances(s, cache, cfg), cfg);
}

gbt::GbtModel train_gbt(const Manifest& manifest, const EvalProtocol& protocol, PredictorKind kind,
                        const gbt::GbtConfig& config) {
  if (kind != PredictorKind::kGbtCorpus && kind != PredictorKind::kGbtInstance)
    throw Error(ErrorCode::kInvalidArgument, "train_gbt needs a gbt predictor kind");
  const Setup s = build_setup(manifest, protocol, false);
  CorpusCache cache(manifest, protocol.extrapolate);
  InstanceRows rows;
  return kind == PredictorKind::kGbtCorpus ? fit_gbt_corpus(s, cache, config)
                                           : fit_gbt_instance(s, cache, rows, config);
}

LearningCurve predict_gbt_curve(const gbt::GbtModel& model, const Manifest& manifest, const std::string& domain,
                                std::span<const AnchorSize> sizes, bool extrapolate) {
  const DomainEntry& d = manifest.domain(domain);
  if (sizes.empty()) throw Error(ErrorCode::kEmptyList, "no anchor sizes requested");
  const PredictorKind kind =
      model.n_features == features::kCorpusFeatureCount ? PredictorKind::kGbtCorpus : PredictorKind::kGbtInstance;
  CorpusCache cache(manifest, extrapolate);
  InstanceRows rows;
  return predict_gbt(model, kind, d, split_of(d, "test"), sizes, cache, rows);
}

std::vector<SentenceRecord> evaluation_sentences(const DomainEntry& domain) {
  std::vector<SentenceRecord> out;
  for (const auto* r : split_of(domain, "test")) out.push_back(*r);
  return out;
}

std::string to_json(const EvalReport& report) {
  json j;
  j["predictor"] = report.predictor;
  j["average_rmse"] = report.average_rmse;
  json domains = json::object();
  for (const auto& [name, v] : report.domain_rmse) {
    json d;
    d["rmse"] = v;
    json seeds = json::object();
    for (const auto& [key, r] : report.seed_rmse)
      if (key.first == name) seeds[std::to_string(key.second)] = r;
    d["seed_rmse"] = seeds;
    auto it = report.training_instances.find(name);
    if (it != report.training_instances.end()) d["training_instances"] = it->second;
    domains[name] = d;
  }
  j["domains"] = domains;
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"domain", r.domain}, {"anchor", r.anchor}, {"seed", r.seed},
                    {"gold", r.gold}, {"pred", r.pred}, {"abs_err", r.abs_err}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string to_tsv(const EvalReport& report) {
  std::string out = "domain\tanchor\tseed\tgold\tpred\tabs_err\n";
  for (const auto& r : report.rows) {
    out += r.domain + "\t" + std::to_string(r.anchor) + "\t" + std::to_string(r.seed) + "\t" + fmt(r.gold) +
           "\t" + fmt(r.pred) + "\t" + fmt(r.abs_err) + "\n";
  }
  return out;
}

std::vector<AblationEntry> ablation_suite(const Manifest& manifest, const EvalProtocol& protocol,
                                          const std::vector<std::vector<std::string>>& drop_sets,
                                          const PredictorOptions& options) {
  std::vector<AblationEntry> out;
  for (const auto& drop : drop_sets) {
    AblationEntry e;
    e.dropped = drop;
    if (drop.empty()) {
      e.label = "full";
    } else {
      for (std::size_t i = 0; i < drop.size(); ++i) e.label += (i ? "+" : "-") + drop[i];
    }
    EvalProtocol p = protocol;
    p.dropped_features.insert(p.dropped_features.end(), drop.begin(), drop.end());
    e.report = protocol.held_out_domain.empty()
                   ? leave_one_out_all(manifest, p, PredictorKind::kDalc, options)
                   : leave_one_out(manifest, p, PredictorKind::kDalc, options);
    out.push_back(std::move(e));
  }
  return out;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptyList, "wasserstein distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  std::sort(points.begin(), points.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double t = points[k];
    while (ia < a.size() && a[ia] <= t) ++ia;
    while (ib < b.size() && b[ib] <= t) ++ib;
    total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (points[k + 1] - t);
  }
  return total;
}

DistributionReport distribution_report(const Manifest& manifest, const std::string& held_out) {
  const DomainEntry& held = manifest.domain(held_out);
  std::vector<double> train, test;
  for (const auto& d : manifest.domains) {
    auto& dst = (&d == &held) ? test : train;
    for (const auto& r : d.sentences)
      for (const auto& [n, v] : r.gold_chrf) dst.push_back(v);
  }
  if (train.empty()) throw Error(ErrorCode::kNoGoldLabels, "training domains have no per-sentence labels");
  if (test.empty()) throw Error(ErrorCode::kNoGoldLabels, held_out + ": no per-sentence labels");

  constexpr std::size_t kBins = 20;
  DistributionReport rep;
  rep.train_counts.assign(kBins, 0);
  rep.test_counts.assign(kBins, 0);
  for (std::size_t i = 0; i < kBins; ++i) rep.bin_left.push_back(static_cast<double>(i) / kBins);
  auto bin = [](double v) {
    auto b = static_cast<std::size_t>(std::floor(std::clamp(v, 0.0, 1.0) * kBins));
    return std::min(b, kBins - 1);
  };
  for (double v : train) ++rep.train_counts[bin(v)];
  for (double v : test) ++rep.test_counts[bin(v)];
  rep.wasserstein = wasserstein1(std::move(train), std::move(test));
  return rep;
}

std::string to_tsv(const DistributionReport& report) {
  std::string out = "bin_left\ttrain_count\ttest_count\n";
  for (std::size_t i = 0; i < report.bin_left.size(); ++i) {
    out += fmt(report.bin_left[i]) + "\t" + std::to_string(report.train_counts[i]) + "\t" +
           std::to_string(report.test_counts[i]) + "\n";
  }
  out += "# wasserstein\t" + fmt(report.wasserstein) + "\n";
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "spearman inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::kEmptyList, "spearman needs at least two points");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dalc::harness
