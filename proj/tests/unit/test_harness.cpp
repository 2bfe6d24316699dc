#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "dalc/curvefit.hpp"
#include "dalc/harness.hpp"
#include "dalc/metrics.hpp"
#include "dalc/synthetic.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dalc;
using namespace dalc::harness;

namespace {

PredictorOptions quick_options() {
  PredictorOptions o;
  o.net.window_sizes = {1, 2};
  o.net.channels_per_window = 4;
  o.net.fusion_hidden = 8;
  o.net.fusion_layers = 2;
  o.net.batch_size = 16;
  o.net.lr = 3e-3;
  o.net.max_epochs = 8;
  o.net.patience = 3;
  o.gbt.n_trees = 10;
  o.gbt.max_depth = 3;
  return o;
}

}  // namespace

TEST_CASE("synthetic datasets satisfy every invariant") {
  auto spec = support::small_spec(3, 30, 4);
  spec.unsampled_anchors = {2000};
  const auto m = synthetic::generate_synthetic(spec);
  CHECK(validate_dataset(m).ok());
  REQUIRE(m.domains.size() == 3);
  for (const auto& d : m.domains) {
    CHECK(d.sentences.size() == 30);
    CHECK(std::count_if(d.sentences.begin(), d.sentences.end(), [](const SentenceRecord& r) { return r.split == "dev"; }) == 15);
    CHECK(d.samples.size() == 2);
    CHECK_FALSE(d.samples.contains(2000));
    CHECK(d.gold_curve->contains(2000));
    CHECK(d.gold_curve->at(400) >= d.gold_curve->at(0));
  }
}

TEST_CASE("synthetic generation is seeded") {
  const auto spec = support::small_spec(2, 10, 4);
  const auto a = synthetic::generate_synthetic(spec);
  const auto b = synthetic::generate_synthetic(spec);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(a.domains[d].sentences[i].encoder_rep == b.domains[d].sentences[i].encoder_rep);
      CHECK(a.domains[d].sentences[i].gold_chrf == b.domains[d].sentences[i].gold_chrf);
    }
  auto other = spec;
  other.seed = 8;
  CHECK(synthetic::generate_synthetic(other).domains[0].sentences[0].gold_chrf !=
        a.domains[0].sentences[0].gold_chrf);
}

TEST_CASE("sentence difficulty offsets average out within a domain") {
  auto spec = support::small_spec(1, 3000, 2);
  spec.instance_noise = 0.0;
  spec.domains[0].c = 0.6;
  spec.domains[0].b = std::log(0.2);
  const auto m = synthetic::generate_synthetic(spec);
  double sum = 0.0;
  for (const auto& r : m.domains[0].sentences) sum += r.gold_chrf.at(400);
  const double truth = 0.6 - std::exp(-spec.domains[0].a * std::log1p(400.0) + spec.domains[0].b);
  CHECK(sum / 3000.0 == doctest::Approx(truth).epsilon(0.01));
}

TEST_CASE("random valid specs always produce valid datasets") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    auto spec = support::small_spec(2 + trial % 3, 10 + 3 * trial, 2 + trial % 4);
    for (auto& d : spec.domains) {
      d.zipf_exponent = 0.6 + u(rng);
      d.general_share = u(rng);
      d.c = 0.3 + 0.6 * u(rng);
      d.vocab_size = 20 + static_cast<std::size_t>(200 * u(rng));
    }
    spec.instance_noise = 0.1 * u(rng);
    spec.with_labse = trial % 2 == 0;
    spec.seed = static_cast<std::uint64_t>(trial);
    const auto report = validate_dataset(synthetic::generate_synthetic(spec));
    CAPTURE(trial);
    CHECK(report.ok());
  }
}

TEST_CASE("exp3 recovers the generating curve of a noiseless domain") {
  auto spec = support::small_spec(1, 50, 2);
  spec.instance_noise = 0.0;
  spec.domains[0].difficulty_spread = 0.0;
  spec.anchors = {0, 100, 400, 1000};
  spec.unsampled_anchors = {3000, 10000};
  const auto m = synthetic::generate_synthetic(spec);
  std::vector<curvefit::AnchorObservation> obs;
  for (const auto& [n, y] : *m.domains[0].gold_curve) obs.push_back({n, y});
  const auto fit = curvefit::exp3_fit(obs);
  const auto& d = spec.domains[0];
  double se = 0.0;
  for (const auto& o : obs) {
    const double truth = d.c - std::exp(-d.a * std::log1p(static_cast<double>(o.size)) + d.b);
    se += std::pow(curvefit::exp3_eval(fit.params, o.size) - truth, 2);
  }
  CHECK(std::sqrt(se / static_cast<double>(obs.size())) < 1e-3);
}

TEST_CASE("invalid synthetic specs are refused") {
  synthetic::SyntheticSpec empty;
  CHECK(support::error_of([&] { synthetic::generate_synthetic(empty); }) == ErrorCode::kInvalidSpec);
  auto dup = support::small_spec(2);
  dup.domains[1].name = dup.domains[0].name;
  CHECK(support::error_of([&] { synthetic::generate_synthetic(dup); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("leave-one-out reports one row per anchor and seed") {
  const auto m = synthetic::generate_synthetic(support::small_spec(2, 40, 4));
  EvalProtocol p;
  p.held_out_domain = "law";
  p.seeds = {1, 2};
  const auto rep = leave_one_out(m, p, PredictorKind::kDalc, quick_options());
  CHECK(rep.predictor == "dalc");
  CHECK(rep.rows.size() == 3 * 2);
  std::set<std::pair<AnchorSize, std::uint64_t>> keys;
  for (const auto& r : rep.rows) {
    CHECK(r.domain == "law");
    CHECK(r.abs_err == doctest::Approx(std::abs(r.pred - r.gold)));
    CHECK(r.gold == m.domains[0].gold_curve->at(r.anchor));
    keys.insert({r.anchor, r.seed});
  }
  CHECK(keys.size() == 6);
  for (std::uint64_t seed : {1, 2}) {
    std::vector<double> pred, gold;
    for (const auto& r : rep.rows)
      if (r.seed == seed) {
        pred.push_back(r.pred);
        gold.push_back(r.gold);
      }
    CHECK(std::abs(metrics::rmse(pred, gold) - rep.seed_rmse.at({"law", seed})) <= 1e-12);
  }
  CHECK(rep.seed_rmse.size() == 2);
  CHECK(rep.domain_rmse.at("law") ==
        doctest::Approx((rep.seed_rmse.at({"law", 1}) + rep.seed_rmse.at({"law", 2})) / 2.0));
  // 20 dev sentences of the other domain at 3 anchors.
  CHECK(rep.training_instances.at("law") == 60);
}

TEST_CASE("every predictor runs under leave-one-out") {
  const auto m = synthetic::generate_synthetic(support::small_spec(3, 30, 4));
  EvalProtocol p;
  p.seeds = {5};
  for (auto kind : {PredictorKind::kExp3, PredictorKind::kGbtCorpus, PredictorKind::kGbtInstance, PredictorKind::kDalc}) {
    const auto rep = leave_one_out_all(m, p, kind, quick_options());
    CHECK(rep.domain_rmse.size() == 3);
    CHECK(rep.rows.size() == 3 * 3);
    CHECK(std::isfinite(rep.average_rmse));
    CHECK(parse_predictor(predictor_name(kind)) == kind);
  }
  CHECK(support::error_of([] { parse_predictor("knn"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("exp3 ignores the held-out domain's features") {
  auto spec = support::small_spec(3, 30, 4);
  const auto m = synthetic::generate_synthetic(spec);
  EvalProtocol p;
  p.seeds = {1};
  const auto rep = leave_one_out_all(m, p, PredictorKind::kExp3, {});
  // Each fold fits the mean curve of the other domains, so the predictions
  // differ by fold but never depend on the held-out domain's own features.
  std::map<std::string, std::map<AnchorSize, double>> pred;
  for (const auto& r : rep.rows) pred[r.domain][r.anchor] = r.pred;
  auto swapped = m;
  for (auto& r : swapped.domains[0].sentences) r.decode_trace[0].p1 = 0.99;
  p.held_out_domain = "law";
  const auto again = leave_one_out(swapped, p, PredictorKind::kExp3, {});
  for (const auto& r : again.rows) CHECK(r.pred == pred["law"][r.anchor]);
}

TEST_CASE("dropping an informative encoder hurts") {
  // Domains share vocabulary statistics and unadapted quality; only the
  // adaptation gain differs, and only the encoder rows carry it.
  synthetic::SyntheticSpec spec;
  for (int i = 0; i < 5; ++i) {
    synthetic::SyntheticDomainSpec d;
    d.name = "d" + std::to_string(i);
    const double gain = 0.1 + 0.05 * i;
    d.b = std::log(gain);
    d.c = 0.3 + gain;
    d.vocab_size = 300;
    spec.domains.push_back(d);
  }
  spec.sentences_per_domain = 200;
  spec.encoder_dim = 4;
  spec.anchors = {0, 100, 400, 1000};
  spec.general_vocab_size = 300;
  spec.trace_signal = 0.0;
  spec.encoder_signal = 10.0;
  spec.seed = 3;
  const auto m = synthetic::generate_synthetic(spec);
  EvalProtocol p;
  p.seeds = {1, 2};
  auto opts = quick_options();
  opts.net.fusion_hidden = 16;
  opts.net.batch_size = 32;
  opts.net.max_epochs = 40;
  opts.net.patience = 5;
  double full = 0.0, dropped = 0.0;
  for (const char* held : {"d1", "d2", "d3"}) {
    p.held_out_domain = held;
    const auto suite = ablation_suite(m, p, {{}, {"encoder"}}, opts);
    full += suite[0].report.average_rmse;
    dropped += suite[1].report.average_rmse;
  }
  CHECK(dropped > full);
}

TEST_CASE("zero-anchor augmentation adds the held-out dev sentences") {
  const auto m = synthetic::generate_synthetic(support::small_spec(2, 40, 4));
  EvalProtocol p;
  p.held_out_domain = "law";
  p.seeds = {1};
  const auto plain = leave_one_out(m, p, PredictorKind::kGbtInstance, quick_options());
  p.with_zero_anchor = true;
  const auto aug = leave_one_out(m, p, PredictorKind::kGbtInstance, quick_options());
  CHECK(aug.training_instances.at("law") == plain.training_instances.at("law") + 20);
}

TEST_CASE("evaluation sentences never reach the training set") {
  auto m = synthetic::generate_synthetic(support::small_spec(2, 20, 4));
  for (auto& r : m.domains[0].sentences) r.split = "dev";  // no test split left
  EvalProtocol p;
  p.held_out_domain = "law";
  p.seeds = {1};
  p.with_zero_anchor = true;
  CHECK_THROWS_AS(leave_one_out(m, p, PredictorKind::kExp3, quick_options()), std::logic_error);
}

TEST_CASE("leave-one-out input errors") {
  const auto one = synthetic::generate_synthetic(support::small_spec(1, 20, 4));
  EvalProtocol p;
  p.held_out_domain = "law";
  CHECK(support::error_of([&] { leave_one_out(one, p, PredictorKind::kExp3, {}); }) ==
        ErrorCode::kInsufficientDomains);

  auto m = synthetic::generate_synthetic(support::small_spec(2, 20, 4));
  p.anchor_sizes = {5000};
  CHECK(support::error_of([&] { leave_one_out(m, p, PredictorKind::kExp3, {}); }) == ErrorCode::kNoGoldLabels);
  p.anchor_sizes = {};
  m.domains[0].gold_curve.reset();
  for (auto& r : m.domains[0].sentences) r.gold_chrf.clear();
  CHECK(support::error_of([&] { leave_one_out(m, p, PredictorKind::kExp3, {}); }) ==
        ErrorCode::kInsufficientDomains);
}

TEST_CASE("extrapolated anchors need the extrapolate switch") {
  auto spec = support::small_spec(2, 30, 4);
  spec.unsampled_anchors = {2000};
  const auto m = synthetic::generate_synthetic(spec);
  EvalProtocol p;
  p.held_out_domain = "law";
  p.seeds = {1};
  auto defaults = leave_one_out(m, p, PredictorKind::kExp3, quick_options());
  CHECK(defaults.rows.size() == 3);
  CHECK(support::error_of([&] { defaults.anchor_mae(2000); }) == ErrorCode::kEmptyList);
  p.extrapolate = true;
  defaults = leave_one_out(m, p, PredictorKind::kExp3, quick_options());
  CHECK(defaults.rows.size() == 4);
  p.extrapolate = false;

  p.train_anchor_sizes = {0, 100, 400};
  p.anchor_sizes = {400, 2000};
  CHECK(support::error_of([&] { leave_one_out(m, p, PredictorKind::kGbtCorpus, quick_options()); }) ==
        ErrorCode::kMissingSample);
  p.extrapolate = true;
  const auto rep = leave_one_out(m, p, PredictorKind::kGbtCorpus, quick_options());
  CHECK(rep.rows.size() == 2);
  CHECK(rep.anchor_mae(2000) >= 0.0);
}

TEST_CASE("reports serialize deterministically") {
  const auto m = synthetic::generate_synthetic(support::small_spec(2, 30, 4));
  EvalProtocol p;
  p.seeds = {3};
  const auto a = leave_one_out_all(m, p, PredictorKind::kDalc, quick_options());
  const auto b = leave_one_out_all(m, p, PredictorKind::kDalc, quick_options());
  CHECK(to_json(a) == to_json(b));
  CHECK(to_tsv(a) == to_tsv(b));
  const auto tsv = to_tsv(a);
  CHECK(tsv.rfind("domain\tanchor\tseed\tgold\tpred\tabs_err\n", 0) == 0);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 1 + 6);
}

TEST_CASE("ablations zero the named inputs") {
  const auto m = synthetic::generate_synthetic(support::small_spec(2, 30, 4));
  EvalProtocol p;
  p.held_out_domain = "law";
  p.seeds = {1};
  const auto suite = ablation_suite(m, p, {{}, {"encoder"}, {"df", "corpus"}}, quick_options());
  REQUIRE(suite.size() == 3);
  CHECK(suite[0].label == "full");
  CHECK(suite[1].label == "-encoder");
  CHECK(suite[2].label == "-df+corpus");
  CHECK(to_json(suite[0].report) != to_json(suite[1].report));
}

TEST_CASE("score distribution report") {
  const auto m = synthetic::generate_synthetic(support::small_spec(3, 20, 4));
  const auto rep = distribution_report(m, "medical");
  REQUIRE(rep.bin_left.size() == 20);
  CHECK(rep.bin_left[1] == doctest::Approx(0.05));
  std::size_t train = 0, test = 0;
  for (auto c : rep.train_counts) train += c;
  for (auto c : rep.test_counts) test += c;
  CHECK(train == 2 * 20 * 3);
  CHECK(test == 20 * 3);
  CHECK(rep.wasserstein > 0.0);
  const auto tsv = to_tsv(rep);
  CHECK(tsv.rfind("bin_left\ttrain_count\ttest_count\n", 0) == 0);

  auto bare = m;
  for (auto& r : bare.domains[1].sentences) r.gold_chrf.clear();
  CHECK(support::error_of([&] { distribution_report(bare, "medical"); }) == ErrorCode::kNoGoldLabels);
}

TEST_CASE("wasserstein distance and rank correlation") {
  CHECK(wasserstein1({0.0}, {1.0}) == doctest::Approx(1.0));
  CHECK(wasserstein1({0.2, 0.2, 0.2}, {0.8, 0.8}) == doctest::Approx(0.6));
  CHECK(wasserstein1({0.3, 0.7}, {0.7, 0.3}) == 0.0);
  CHECK(wasserstein1({0.0, 1.0}, {0.5, 0.5}) == doctest::Approx(0.5));
  CHECK(wasserstein1({0.1, 0.2, 0.3}, {0.3, 0.1, 0.2}) == 0.0);
  CHECK(wasserstein1({0.0, 0.0, 1.0}, {0.0, 1.0}) == doctest::Approx(1.0 / 6.0));
  CHECK(support::error_of([] { wasserstein1({}, {1.0}); }) == ErrorCode::kEmptyList);

  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {1, 1, 2}) == doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK(support::error_of([] { spearman({1, 2}, {1}); }) == ErrorCode::kLengthMismatch);
}
