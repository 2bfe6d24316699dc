#pragma once

// Instance-level learning-curve predictor.
//
// An encoder-pooling stage runs one 1-D convolution per window size over the
// token representations (zero-padded on the right to the widest window),
// max-pools each channel over time and concatenates the results. The pooled
// vector, the z-normalized difficulty features and the corpus features feed
// a ReLU MLP whose single output goes through a sigmoid.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dalc/features.hpp"
#include "dalc/tensor.hpp"

namespace dalc::net {

enum class PoolingMode {
  kConcat,  // one block of channels per window size
  kSum,     // window outputs summed elementwise
};

struct NetConfig {
  std::size_t encoder_dim = 512;
  std::vector<std::size_t> window_sizes = {2, 3, 4};
  std::size_t channels_per_window = 0;  // 0 means encoder_dim
  PoolingMode pooling = PoolingMode::kConcat;
  std::size_t fusion_hidden = 512;
  std::size_t fusion_layers = 4;  // hidden layers; one output layer follows
  double lr = 1e-3;
  double lr_decay_per_epoch = 0.97;
  std::size_t batch_size = 256;
  std::size_t patience = 10;
  std::size_t max_epochs = 500;
  // Share of instances held out for early stopping. 0 monitors the training
  // set itself and keeps the best-training-loss weights.
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  // Input groups or single features zeroed at the fusion input: "encoder",
  // "df", "corpus", or any instance/corpus feature name.
  std::vector<std::string> dropped_features;

  std::size_t channels() const { return channels_per_window == 0 ? encoder_dim : channels_per_window; }
  std::size_t max_window() const;
  std::size_t pooled_width() const;
  std::size_t fusion_input_width() const { return pooled_width() + 4 + features::kCorpusFeatureCount; }
  void validate() const;
};

struct TensorSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

// Fixed parameter order: per window size the kernel (channels x window*d) and
// bias (1 x channels), then per fusion layer the weight (out x in) and bias
// (1 x out).
std::vector<TensorSlot> parameter_layout(const NetConfig& cfg);

struct PredictorModel {
  NetConfig config;
  std::vector<double> params;
  std::array<double, 4> df_mean{};
  std::array<double, 4> df_std{1.0, 1.0, 1.0, 1.0};

  std::span<const double> tensor(const TensorSlot& slot) const {
    return std::span<const double>(params).subspan(slot.offset, slot.rows * slot.cols);
  }
};

// Zero-initialized model (all weights and biases 0).
PredictorModel make_zero_model(const NetConfig& cfg);
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases from cfg.seed.
PredictorModel make_initialized_model(const NetConfig& cfg);

// Encoder rows converted to double and right-padded with zero rows to `min_rows`.
std::shared_ptr<const MatrixD> prepare_encoder(const MatrixF& rep, std::size_t min_rows);

struct TrainingInstance {
  std::shared_ptr<const MatrixD> encoder;  // from prepare_encoder
  features::InstanceFeatures df;
  features::CorpusFeatures corpus;
  double target = 0.0;
  std::string sentence_id;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_mse = 0.0;  // mean of minibatch losses over the epoch
  double val_mse = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

struct TrainingResult {
  PredictorModel model;
  TrainingLog log;
};

// Adam on mean squared error with early stopping. Returns the weights of the
// best monitored epoch, rounded to float32 so a saved model reloads exactly.
TrainingResult train(std::span<const TrainingInstance> instances, const NetConfig& cfg);

// Pooled encoder vector (pooled_width values).
std::vector<double> encoder_pool(const PredictorModel& m, const MatrixD& padded_encoder);

// Sigmoid output for an already pooled encoder vector; `df_normalized` is
// the z-normalized difficulty vector. Dropped slots are zeroed here.
double fusion_forward(const PredictorModel& m, std::span<const double> pooled,
                      std::span<const double> df_normalized, std::span<const double> corpus);

std::array<double, 4> normalize_df(const PredictorModel& m, const features::InstanceFeatures& df);

double predict_instance(const PredictorModel& m, const MatrixF& encoder_rep,
                        const features::InstanceFeatures& df,
                        const features::CorpusFeatures& corpus);

// Mean squared error over `batch` and its gradient (same layout as params).
double loss_and_gradient(const PredictorModel& m, std::span<const TrainingInstance> batch,
                         std::vector<double>& gradient);

// Mean prediction over `sentences` per requested size.
LearningCurve predict_curve(const PredictorModel& m, std::span<const SentenceRecord> sentences,
                            const std::map<AnchorSize, features::CorpusFeatures>& corpus_by_size);

// Corpus features for each size from the domain's samples. Anchor 0 is the
// zero vector. Sizes without a sample raise MissingSample unless
// `extrapolate` is set, in which case they are estimated from the largest
// available sample.
std::map<AnchorSize, features::CorpusFeatures> corpus_features_for_sizes(
    const DomainEntry& domain, std::span<const AnchorSize> sizes, const GeneralVocab& vocab,
    bool extrapolate);

// "DLCM" file: magic, u32 little-endian JSON length, JSON (config and
// normalization statistics), then every parameter tensor as a "DLC1" record in
// parameter_layout order.
std::vector<std::uint8_t> serialize_model(const PredictorModel& m);
PredictorModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const PredictorModel& m, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);

}  // namespace dalc::net
