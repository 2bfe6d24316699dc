#include "dalc/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "json.hpp"

namespace dalc::gbt {

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  int count = 0;
};

// Running left-side state while scanning one feature.
struct ScanState {
  double g = 0.0;
  double h = 0.0;
  int count = 0;
  double last_value = 0.0;
};

double leaf_value(double g, double h, double lambda) { return -g / (h + lambda); }

double score(double g, double h, double lambda) { return g * g / (h + lambda); }

void check_config(const GbtConfig& cfg) {
  if (cfg.n_trees < 0 || cfg.max_depth < 0 || !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) ||
      !(cfg.lambda_l2 >= 0.0) || cfg.min_samples_leaf < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid boosting configuration");
  }
}

double mse(std::span<const double> pred, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

double Tree::leaf_weight(std::span<const double> row) const {
  int n = 0;
  while (!nodes[n].is_leaf()) {
    const auto& node = nodes[n];
    n = row[node.feature] < node.threshold ? node.left : node.right;
  }
  return nodes[n].weight;
}

int Tree::depth() const {
  std::function<int(int)> rec = [&](int n) -> int {
    if (nodes[n].is_leaf()) return 0;
    return 1 + std::max(rec(nodes[n].left), rec(nodes[n].right));
  };
  return nodes.empty() ? 0 : rec(0);
}

GbtModel gbt_fit(const MatrixD& rows, std::span<const double> targets, const GbtConfig& cfg,
                 std::uint64_t /*seed*/) {
  check_config(cfg);
  const std::size_t n = rows.rows();
  const std::size_t f = rows.cols();
  if (n == 0) throw Error(ErrorCode::kEmptyTrainingSet, "no training rows");
  if (targets.size() != n) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(targets.size()) + " targets for " +
                                                std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : rows.row(i)) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteFeature, "row " + std::to_string(i));
    }
    if (!std::isfinite(targets[i])) throw Error(ErrorCode::kNonFiniteFeature, "target " + std::to_string(i));
  }

  // Per-feature row order, ties broken by row index.
  std::vector<std::vector<int>> order(f);
  for (std::size_t k = 0; k < f; ++k) {
    order[k].resize(n);
    std::iota(order[k].begin(), order[k].end(), 0);
    std::stable_sort(order[k].begin(), order[k].end(),
                     [&](int a, int b) { return rows(a, k) < rows(b, k); });
  }

  GbtModel model;
  model.base_score = cfg.base_score;
  model.learning_rate = cfg.learning_rate;
  model.n_features = f;
  std::vector<double> pred(n, cfg.base_score);
  model.training_mse.push_back(mse(pred, targets));

  std::vector<double> grad(n);
  std::vector<int> node_of(n);
  const double lambda = cfg.lambda_l2;

  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - targets[i];
    std::fill(node_of.begin(), node_of.end(), 0);

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> frontier = {0};

    for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
      const std::size_t node_count = tree.nodes.size();
      std::vector<NodeStats> stats(node_count);
      for (std::size_t i = 0; i < n; ++i) {
        auto& s = stats[node_of[i]];
        s.g += grad[i];
        s.h += 1.0;
        ++s.count;
      }
      std::vector<char> open(node_count, 0);
      for (int id : frontier) open[id] = 1;

      std::vector<SplitCandidate> best(node_count);
      for (std::size_t k = 0; k < f; ++k) {
        std::vector<ScanState> scan(node_count);
        for (int i : order[k]) {
          const int id = node_of[i];
          if (!open[id]) continue;
          auto& st = scan[id];
          const double x = rows(i, k);
          if (st.count > 0 && x > st.last_value) {
            const auto& total = stats[id];
            const int right_count = total.count - st.count;
            if (st.count >= cfg.min_samples_leaf && right_count >= cfg.min_samples_leaf) {
              const double gl = st.g, hl = st.h;
              const double gr = total.g - gl, hr = total.h - hl;
              const double gain =
                  0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(total.g, total.h, lambda));
              if (gain > best[id].gain) {
                double threshold = 0.5 * (st.last_value + x);
                if (!(threshold > st.last_value)) threshold = x;
                best[id] = {gain, static_cast<int>(k), threshold};
              }
            }
          }
          st.g += grad[i];
          st.h += 1.0;
          ++st.count;
          st.last_value = x;
        }
      }

      std::vector<int> next;
      for (int id : frontier) {
        if (best[id].feature < 0) {
          tree.nodes[id].weight = leaf_value(stats[id].g, stats[id].h, lambda);
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[id];
        node.feature = best[id].feature;
        node.threshold = best[id].threshold;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree.nodes[node_of[i]];
        if (!node.is_leaf()) {
          node_of[i] = rows(i, node.feature) < node.threshold ? node.left : node.right;
        }
      }
      frontier = std::move(next);
    }

    if (!frontier.empty()) {
      std::vector<NodeStats> stats(tree.nodes.size());
      for (std::size_t i = 0; i < n; ++i) {
        stats[node_of[i]].g += grad[i];
        stats[node_of[i]].h += 1.0;
      }
      for (int id : frontier) tree.nodes[id].weight = leaf_value(stats[id].g, stats[id].h, lambda);
    }

    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += cfg.learning_rate * tree.nodes[node_of[i]].weight;
    }
    model.trees.push_back(std::move(tree));
    model.training_mse.push_back(mse(pred, targets));
  }
  return model;
}

double gbt_predict(const GbtModel& m, std::span<const double> row) {
  if (row.size() != m.n_features) {
    throw Error(ErrorCode::kDimensionMismatch, "row has " + std::to_string(row.size()) +
                                                   " features, model expects " +
                                                   std::to_string(m.n_features));
  }
  double sum = 0.0;
  for (const auto& t : m.trees) sum += t.leaf_weight(row);
  return m.base_score + m.learning_rate * sum;
}

std::string to_json(const GbtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.weight});
    }
    trees.push_back(nodes);
  }
  nlohmann::json j = {{"format", "dalc-gbt"},
                      {"base_score", m.base_score},
                      {"learning_rate", m.learning_rate},
                      {"n_features", m.n_features},
                      {"training_mse", m.training_mse},
                      {"trees", trees}};
  return j.dump();
}

GbtModel from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", std::string()) != "dalc-gbt") {
      throw Error(ErrorCode::kMalformedHeader, "not a boosting model");
    }
    GbtModel m;
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.training_mse = j.value("training_mse", std::vector<double>{});
    for (const auto& t : j.at("trees")) {
      Tree tree;
      for (const auto& nd : t) {
        tree.nodes.push_back({nd.at(0).get<int>(), nd.at(1).get<double>(), nd.at(2).get<int>(),
                              nd.at(3).get<int>(), nd.at(4).get<double>()});
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("boosting model: ") + e.what());
  }
}

std::vector<double> gbt_instance_row(const SentenceRecord& record,
                                     const features::CorpusFeatures& corpus) {
  auto row = features::minmax_pool(record.encoder_rep);
  const auto inst = features::instance_features(record).values();
  row.insert(row.end(), inst.begin(), inst.end());
  row.insert(row.end(), corpus.values.begin(), corpus.values.end());
  return row;
}

}  // namespace dalc::gbt
