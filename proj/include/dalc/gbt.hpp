#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dalc/features.hpp"
#include "dalc/tensor.hpp"

namespace dalc::gbt {

struct GbtConfig {
  int n_trees = 100;
  int max_depth = 10;
  double learning_rate = 0.1;
  double lambda_l2 = 1.0;
  int min_samples_leaf = 1;
  double base_score = 0.5;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with value < threshold go left
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf weight before shrinkage

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double leaf_weight(std::span<const double> row) const;
  int depth() const;
};

struct GbtModel {
  double base_score = 0.5;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  // Training MSE before any tree, then after each boosting round.
  std::vector<double> training_mse;
};

// Squared-error boosting with exact greedy splits. The procedure has no
// sampling, so `seed` does not change the result; it is accepted so every
// fitting entry point shares one signature.
GbtModel gbt_fit(const MatrixD& rows, std::span<const double> targets, const GbtConfig& cfg,
                 std::uint64_t seed = 0);

double gbt_predict(const GbtModel& m, std::span<const double> row);

std::string to_json(const GbtModel& m);
GbtModel from_json(const std::string& text);

// [minmax_pool (2d), instance features (4), corpus features (7)].
std::vector<double> gbt_instance_row(const SentenceRecord& record,
                                     const features::CorpusFeatures& corpus);

}  // namespace dalc::gbt
