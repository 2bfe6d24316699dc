#include "dalc/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dalc/curvefit.hpp"
#include "dalc/dataset.hpp"
#include "dalc/error.hpp"
#include "dalc/features.hpp"
#include "dalc/gbt.hpp"
#include "dalc/harness.hpp"
#include "dalc/io.hpp"
#include "dalc/net.hpp"
#include "dalc/synthetic.hpp"
#include "json.hpp"

namespace dalc::cli {
namespace {

using nlohmann::json;

struct NetFlags {
  std::size_t channels = 0;
  std::vector<std::size_t> windows = {2, 3, 4};
  std::string pooling = "concat";
  std::size_t hidden = 512;
  std::size_t layers = 4;
  double lr = 1e-3;
  double lr_decay = 0.97;
  std::size_t batch = 256;
  std::size_t patience = 10;
  std::size_t max_epochs = 500;
  double val_fraction = 0.2;

  void add(CLI::App* app) {
    app->add_option("--channels", channels, "Convolution channels per window (0: encoder width)");
    app->add_option("--windows", windows, "Convolution window sizes")->delimiter(',');
    app->add_option("--pooling", pooling, "How window outputs combine")->check(CLI::IsMember({"concat", "sum"}));
    app->add_option("--hidden", hidden, "Fusion hidden width");
    app->add_option("--layers", layers, "Fusion hidden layers");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--lr-decay", lr_decay, "Learning-rate factor per epoch");
    app->add_option("--batch", batch, "Minibatch size");
    app->add_option("--patience", patience, "Epochs without improvement before stopping");
    app->add_option("--max-epochs", max_epochs, "Epoch limit");
    app->add_option("--val-fraction", val_fraction, "Share of instances used for early stopping");
  }

  net::NetConfig config() const {
    net::NetConfig c;
    c.channels_per_window = channels;
    c.window_sizes = windows;
    c.pooling = pooling == "sum" ? net::PoolingMode::kSum : net::PoolingMode::kConcat;
    c.fusion_hidden = hidden;
    c.fusion_layers = layers;
    c.lr = lr;
    c.lr_decay_per_epoch = lr_decay;
    c.batch_size = batch;
    c.patience = patience;
    c.max_epochs = max_epochs;
    c.validation_fraction = val_fraction;
    return c;
  }
};

struct GbtFlags {
  gbt::GbtConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--trees", cfg.n_trees, "Boosting rounds");
    app->add_option("--max-depth", cfg.max_depth, "Tree depth limit");
    app->add_option("--learning-rate", cfg.learning_rate, "Shrinkage per tree");
    app->add_option("--lambda", cfg.lambda_l2, "L2 penalty on leaf weights");
    app->add_option("--min-leaf", cfg.min_samples_leaf, "Minimum rows per leaf");
  }
};

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_file_atomic(path, text);
  }
}

json curve_json(const LearningCurve& c) {
  json j = json::object();
  for (const auto& [n, v] : c) j[std::to_string(n)] = v;
  return j;
}

// Gold anchors that can be featurized: anchor 0, sampled anchors, and every
// other anchor when extrapolating.
std::vector<AnchorSize> sizes_or_gold(const std::vector<AnchorSize>& sizes, const DomainEntry& d, bool extrapolate) {
  if (!sizes.empty()) return sizes;
  std::vector<AnchorSize> out;
  if (d.gold_curve)
    for (const auto& [n, v] : *d.gold_curve)
      if (n == 0 || extrapolate || d.samples.contains(n)) out.push_back(n);
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, d.name + ": no --sizes given and no gold curve");
  return out;
}

std::vector<curvefit::AnchorObservation> read_observations(const std::string& path) {
  std::vector<curvefit::AnchorObservation> obs;
  std::size_t line_no = 0;
  for (const auto& line : io::read_lines(path)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kMalformedHeader, path + ":" + std::to_string(line_no) + ": expected size,score");
    }
    const std::string size_text = line.substr(0, comma);
    const std::string score_text = line.substr(comma + 1);
    char* end = nullptr;
    const double size = std::strtod(size_text.c_str(), &end);
    if (end == size_text.c_str()) {
      if (obs.empty() && line_no == 1) continue;  // header row
      throw Error(ErrorCode::kMalformedHeader, path + ":" + std::to_string(line_no) + ": bad size");
    }
    const double score = std::strtod(score_text.c_str(), &end);
    if (end == score_text.c_str() || size < 0.0) {
      throw Error(ErrorCode::kMalformedHeader, path + ":" + std::to_string(line_no) + ": bad row");
    }
    obs.push_back({static_cast<AnchorSize>(size), score});
  }
  return obs;
}

std::vector<std::uint64_t> seed_list(std::size_t count, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(base + i);
  return seeds;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning-curve prediction for domain adaptation"};
  app.name("dalc");
  app.require_subcommand(1);

  std::string manifest_path, out_path, tsv_path, domain, holdout, model_path, input_path, level = "corpus";
  std::string predictor = "dalc", protocol = "loo";
  std::vector<AnchorSize> sizes, train_sizes;
  std::vector<std::string> drop;
  std::uint64_t seed = 11;
  std::size_t n_seeds = 5;
  bool extrapolate = false, zero_anchor = false;
  NetFlags net_flags;
  GbtFlags gbt_flags;
  std::size_t synth_sentences = 2000, synth_dim = 8;

  auto add_manifest = [&](CLI::App* c) {
    c->add_option("--manifest", manifest_path, "Manifest JSONL file")->required()->check(CLI::ExistingFile);
  };
  auto add_protocol = [&](CLI::App* c) {
    c->add_option("--train-sizes", train_sizes, "Anchors whose labels are used for training")->delimiter(',');
    c->add_option("--drop-features", drop, "Inputs zeroed in the network (encoder, df, corpus or a feature name)")
        ->delimiter(',');
    c->add_flag("--with-zero-anchor", zero_anchor, "Train on the held-out domain's dev sentences at anchor 0");
    c->add_flag("--extrapolate", extrapolate, "Estimate corpus features for anchors without a sample");
  };

  auto* validate = app.add_subcommand("validate", "Check a dataset against its invariants");
  add_manifest(validate);

  auto* featurize = app.add_subcommand("featurize", "Instance and corpus features of one domain");
  add_manifest(featurize);
  featurize->add_option("--domain", domain, "Domain name")->required();
  featurize->add_option("--sizes", sizes, "Anchor sizes for corpus features")->delimiter(',');
  featurize->add_flag("--extrapolate", extrapolate, "Estimate corpus features for anchors without a sample");
  featurize->add_option("--out", out_path, "Output JSON (default stdout)");

  auto* fit = app.add_subcommand("fit-exp3", "Fit c - exp(-a ln(1+n) + b) to size,score rows");
  fit->add_option("--input", input_path, "CSV with size,score rows")->required()->check(CLI::ExistingFile);
  fit->add_option("--sizes", sizes, "Sizes to evaluate the fitted curve at")->delimiter(',');
  fit->add_option("--out", out_path, "Output JSON (default stdout)");

  auto* train = app.add_subcommand("train", "Train the instance-level network with one domain held out");
  add_manifest(train);
  train->add_option("--holdout", holdout, "Held-out domain")->required();
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--out", out_path, "Model file")->required();
  add_protocol(train);
  net_flags.add(train);

  auto* train_gbt = app.add_subcommand("train-gbt", "Train a boosted-tree baseline with one domain held out");
  add_manifest(train_gbt);
  train_gbt->add_option("--holdout", holdout, "Held-out domain")->required();
  train_gbt->add_option("--level", level, "Feature level")->check(CLI::IsMember({"corpus", "instance"}));
  train_gbt->add_option("--seed", seed, "Random seed (recorded; the fit is deterministic)");
  train_gbt->add_option("--out", out_path, "Model JSON")->required();
  add_protocol(train_gbt);
  gbt_flags.add(train_gbt);

  auto* predict = app.add_subcommand("predict-curve", "Predict a domain's learning curve with a saved model");
  add_manifest(predict);
  predict->add_option("--model", model_path, "Model from train or train-gbt")->required()->check(CLI::ExistingFile);
  predict->add_option("--domain", domain, "Domain name")->required();
  predict->add_option("--sizes", sizes, "Anchor sizes (default: gold anchors that have a sample)")->delimiter(',');
  predict->add_flag("--extrapolate", extrapolate, "Estimate corpus features for anchors without a sample");
  predict->add_option("--out", out_path, "Output JSON (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-domain-out evaluation");
  add_manifest(evaluate);
  evaluate->add_option("--protocol", protocol, "Evaluation protocol")->check(CLI::IsMember({"loo"}));
  evaluate->add_option("--predictor", predictor, "Predictor")
      ->check(CLI::IsMember({"dalc", "exp3", "gbt-corpus", "gbt-instance"}));
  evaluate->add_option("--holdout", holdout, "Only hold out this domain (default: each in turn)");
  evaluate->add_option("--seeds", n_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", seed, "First seed");
  evaluate->add_option("--sizes", sizes, "Evaluation anchors (default: held-out gold anchors)")->delimiter(',');
  evaluate->add_option("--out", out_path, "Report JSON (default stdout)");
  evaluate->add_option("--tsv", tsv_path, "Per-anchor table");
  add_protocol(evaluate);
  net_flags.add(evaluate);
  gbt_flags.add(evaluate);

  auto* report = app.add_subcommand("report-dist", "Histogram of gold chrF, training domains against the held-out one");
  add_manifest(report);
  report->add_option("--holdout", holdout, "Held-out domain")->required();
  report->add_option("--out", out_path, "Output TSV (default stdout)");

  auto* synth = app.add_subcommand("synth", "Write the synthetic five-domain benchmark");
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--sentences", synth_sentences, "Sentences per domain")->check(CLI::PositiveNumber);
  synth->add_option("--dim", synth_dim, "Encoder width")->check(CLI::PositiveNumber);

  std::vector<std::string> argv_store;
  argv_store.push_back("dalc");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*validate) {
      const auto m = load_manifest(manifest_path);
      const auto rep = validate_dataset(m);
      for (const auto& v : rep.violations) out << v.record_id << "\t" << v.message << "\n";
      std::size_t n_sentences = 0;
      for (const auto& d : m.domains) n_sentences += d.sentences.size();
      err << m.domains.size() << " domains, " << n_sentences << " sentences, " << rep.violations.size()
          << " violations\n";
      return rep.ok() ? kOk : kInputError;
    }

    if (*featurize) {
      const auto m = load_manifest(manifest_path);
      const auto& d = m.domain(domain);
      json j;
      j["domain"] = d.name;
      json rows = json::array();
      for (const auto& r : d.sentences) {
        const auto f = features::instance_features(r);
        rows.push_back({{"id", r.id},
                        {"least_confidence", f.least_confidence},
                        {"margin", f.margin},
                        {"avg_entropy", f.avg_entropy},
                        {"xsim", f.xsim},
                        {"xsim_present", f.xsim_present}});
      }
      j["sentences"] = rows;
      json corpus = json::object();
      for (const auto& [n, f] : net::corpus_features_for_sizes(d, sizes, m.general_vocab, extrapolate)) {
        corpus[std::to_string(n)] = f.values;
      }
      j["corpus"] = corpus;
      j["corpus_feature_names"] = features::kCorpusFeatureNames;
      emit(out_path, j.dump(2) + "\n", out);
      return kOk;
    }

    if (*fit) {
      const auto obs = read_observations(input_path);
      const auto result = curvefit::exp3_fit(obs);
      std::vector<AnchorSize> at = sizes;
      if (at.empty())
        for (const auto& o : obs) at.push_back(o.size);
      json j = {{"a", result.params.a}, {"b", result.params.b}, {"c", result.params.c},
                {"residual", result.residual}, {"curve", curve_json(curvefit::exp3_curve(result.params, at))}};
      emit(out_path, j.dump(2) + "\n", out);
      return kOk;
    }

    harness::EvalProtocol p;
    p.held_out_domain = holdout;
    p.anchor_sizes = sizes;
    p.train_anchor_sizes = train_sizes;
    p.dropped_features = drop;
    p.with_zero_anchor = zero_anchor;
    p.extrapolate = extrapolate;

    if (*train) {
      const auto m = load_manifest(manifest_path);
      err << "seed: " << seed << "\n";
      const auto result = harness::train_network(m, p, net_flags.config(), seed);
      net::save_model(result.model, out_path);
      err << "epochs: " << result.log.epochs.size() << ", best: " << result.log.best_epoch
          << ", train instances: " << result.log.n_train << ", validation instances: " << result.log.n_val << "\n";
      return kOk;
    }

    if (*train_gbt) {
      const auto m = load_manifest(manifest_path);
      err << "seed: " << seed << "\n";
      const auto kind = level == "corpus" ? harness::PredictorKind::kGbtCorpus : harness::PredictorKind::kGbtInstance;
      const auto model = harness::train_gbt(m, p, kind, gbt_flags.cfg);
      io::write_file_atomic(out_path, gbt::to_json(model));
      return kOk;
    }

    if (*predict) {
      const auto m = load_manifest(manifest_path);
      const auto& d = m.domain(domain);
      const auto at = sizes_or_gold(sizes, d, extrapolate);
      const auto bytes = io::read_binary_file(model_path);
      LearningCurve curve;
      if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "DLCM")) {
        const auto model = net::deserialize_model(bytes);
        const auto corpus = net::corpus_features_for_sizes(d, at, m.general_vocab, extrapolate);
        curve = net::predict_curve(model, harness::evaluation_sentences(d), corpus);
      } else {
        const auto model = gbt::from_json(std::string(bytes.begin(), bytes.end()));
        curve = harness::predict_gbt_curve(model, m, domain, at, extrapolate);
      }
      json j = {{"domain", d.name}, {"curve", curve_json(curve)}};
      emit(out_path, j.dump(2) + "\n", out);
      return kOk;
    }

    if (*evaluate) {
      const auto m = load_manifest(manifest_path);
      p.seeds = seed_list(n_seeds, seed);
      for (auto s : p.seeds) err << "seed: " << s << "\n";
      harness::PredictorOptions opts;
      opts.net = net_flags.config();
      opts.gbt = gbt_flags.cfg;
      const auto kind = harness::parse_predictor(predictor);
      const auto rep = holdout.empty() ? harness::leave_one_out_all(m, p, kind, opts)
                                       : harness::leave_one_out(m, p, kind, opts);
      if (!tsv_path.empty()) io::write_file_atomic(tsv_path, harness::to_tsv(rep));
      emit(out_path, harness::to_json(rep), out);
      err << predictor << " average RMSE " << rep.average_rmse << "\n";
      return kOk;
    }

    if (*report) {
      const auto m = load_manifest(manifest_path);
      emit(out_path, harness::to_tsv(harness::distribution_report(m, holdout)), out);
      return kOk;
    }

    if (*synth) {
      err << "seed: " << seed << "\n";
      auto spec = synthetic::benchmark_spec(seed);
      spec.sentences_per_domain = synth_sentences;
      spec.encoder_dim = synth_dim;
      const auto path = write_manifest(synthetic::generate_synthetic(spec), out_path);
      out << path.string() << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace dalc::cli
