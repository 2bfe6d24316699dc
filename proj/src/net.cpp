#include "dalc/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "dalc/io.hpp"
#include "dalc/simd/kernels.hpp"

namespace dalc::net {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::size_t kDfCount = 4;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t window_count(const NetConfig& cfg) { return cfg.window_sizes.size(); }

std::vector<double> input_mask(const NetConfig& cfg) {
  const std::size_t pooled = cfg.pooled_width();
  std::vector<double> mask(cfg.fusion_input_width(), 1.0);
  auto zero = [&](std::size_t from, std::size_t to) {
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(from),
              mask.begin() + static_cast<std::ptrdiff_t>(to), 0.0);
  };
  for (const auto& name : cfg.dropped_features) {
    if (name == "encoder" || name == "enc") {
      zero(0, pooled);
    } else if (name == "df") {
      zero(pooled, pooled + kDfCount);
    } else if (name == "corpus") {
      zero(pooled + kDfCount, mask.size());
    } else {
      bool found = false;
      for (std::size_t i = 0; i < kDfCount; ++i) {
        if (features::kInstanceFeatureNames[i] == name) {
          mask[pooled + i] = 0.0;
          found = true;
        }
      }
      for (std::size_t i = 0; i < features::kCorpusFeatureCount; ++i) {
        if (features::kCorpusFeatureNames[i] == name) {
          mask[pooled + kDfCount + i] = 0.0;
          found = true;
        }
      }
      if (!found) throw Error(ErrorCode::kInvalidArgument, "unknown feature to drop: " + name);
    }
  }
  return mask;
}

// Activations of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<double> pooled;
  std::vector<std::size_t> argmax;  // per window per channel: best start row
  std::vector<std::vector<double>> acts;  // acts[0] = masked fusion input, acts[l] = layer l output
  double output = 0.0;
};

class Network {
 public:
  explicit Network(const PredictorModel& m)
      : model_(m),
        layout_(parameter_layout(m.config)),
        mask_(input_mask(m.config)),
        kernels_(simd::active_kernels()) {}

  const std::vector<TensorSlot>& layout() const { return layout_; }

  void pool(const MatrixD& x, ForwardCache& cache) const {
    const auto& cfg = model_.config;
    const std::size_t d = cfg.encoder_dim;
    const std::size_t channels = cfg.channels();
    cache.pooled.assign(cfg.pooled_width(), 0.0);
    cache.argmax.assign(window_count(cfg) * channels, 0);
    for (std::size_t w = 0; w < window_count(cfg); ++w) {
      const std::size_t width = cfg.window_sizes[w];
      const std::size_t span_len = width * d;
      const std::size_t positions = x.rows() - width + 1;
      const double* kernel = model_.params.data() + layout_[2 * w].offset;
      const double* bias = model_.params.data() + layout_[2 * w + 1].offset;
      const std::size_t out_base = cfg.pooling == PoolingMode::kConcat ? w * channels : 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* krow = kernel + c * span_len;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_t = 0;
        for (std::size_t t = 0; t < positions; ++t) {
          const double v = kernels_.dot(krow, x.data().data() + t * d, span_len);
          if (v > best) {
            best = v;
            best_t = t;
          }
        }
        cache.pooled[out_base + c] += best + bias[c];
        cache.argmax[w * channels + c] = best_t;
      }
    }
  }

  double fuse(std::span<const double> pooled, std::span<const double> df,
              std::span<const double> corpus, ForwardCache& cache) const {
    const auto& cfg = model_.config;
    const std::size_t layers = cfg.fusion_layers + 1;
    cache.acts.resize(layers + 1);
    auto& z = cache.acts[0];
    z.resize(cfg.fusion_input_width());
    std::copy(pooled.begin(), pooled.end(), z.begin());
    std::copy(df.begin(), df.end(), z.begin() + static_cast<std::ptrdiff_t>(pooled.size()));
    std::copy(corpus.begin(), corpus.end(),
              z.begin() + static_cast<std::ptrdiff_t>(pooled.size() + df.size()));
    for (std::size_t i = 0; i < z.size(); ++i) z[i] *= mask_[i];

    const std::size_t first = 2 * window_count(cfg);
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& ws = layout_[first + 2 * l];
      const auto& bs = layout_[first + 2 * l + 1];
      const double* weight = model_.params.data() + ws.offset;
      const double* bias = model_.params.data() + bs.offset;
      const auto& in = cache.acts[l];
      auto& out = cache.acts[l + 1];
      out.resize(ws.rows);
      for (std::size_t j = 0; j < ws.rows; ++j) {
        const double a = bias[j] + kernels_.dot(weight + j * ws.cols, in.data(), ws.cols);
        out[j] = l + 1 < layers ? std::max(a, 0.0) : a;
      }
    }
    cache.output = sigmoid(cache.acts[layers][0]);
    return cache.output;
  }

  // Adds d(loss)/d(params) for one instance given d(loss)/d(output).
  void backward(const MatrixD& x, const ForwardCache& cache, double dloss_dout,
                std::vector<double>& grad, std::vector<double>& delta,
                std::vector<double>& delta_prev) const {
    const auto& cfg = model_.config;
    const std::size_t layers = cfg.fusion_layers + 1;
    const std::size_t first = 2 * window_count(cfg);

    delta.assign(1, dloss_dout * cache.output * (1.0 - cache.output));
    for (std::size_t l = layers; l-- > 0;) {
      const auto& ws = layout_[first + 2 * l];
      const auto& bs = layout_[first + 2 * l + 1];
      const double* weight = model_.params.data() + ws.offset;
      double* gw = grad.data() + ws.offset;
      double* gb = grad.data() + bs.offset;
      const auto& in = cache.acts[l];
      delta_prev.assign(ws.cols, 0.0);
      for (std::size_t j = 0; j < ws.rows; ++j) {
        const double g = delta[j];
        if (g == 0.0) continue;
        gb[j] += g;
        kernels_.axpy(g, in.data(), gw + j * ws.cols, ws.cols);
        kernels_.axpy(g, weight + j * ws.cols, delta_prev.data(), ws.cols);
      }
      if (l > 0) {
        for (std::size_t i = 0; i < ws.cols; ++i) {
          if (!(in[i] > 0.0)) delta_prev[i] = 0.0;
        }
      }
      std::swap(delta, delta_prev);
    }
    // delta now holds d(loss)/d(fusion input)
    const std::size_t d = cfg.encoder_dim;
    const std::size_t channels = cfg.channels();
    for (std::size_t w = 0; w < window_count(cfg); ++w) {
      const std::size_t span_len = cfg.window_sizes[w] * d;
      double* gk = grad.data() + layout_[2 * w].offset;
      double* gb = grad.data() + layout_[2 * w + 1].offset;
      const std::size_t out_base = cfg.pooling == PoolingMode::kConcat ? w * channels : 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double g = delta[out_base + c] * mask_[out_base + c];
        if (g == 0.0) continue;
        gb[c] += g;
        const std::size_t t = cache.argmax[w * channels + c];
        kernels_.axpy(g, x.data().data() + t * d, gk + c * span_len, span_len);
      }
    }
  }

 private:
  const PredictorModel& model_;
  std::vector<TensorSlot> layout_;
  std::vector<double> mask_;
  const simd::KernelTable& kernels_;
};

double batch_loss_and_gradient(const PredictorModel& m, const Network& net,
                               std::span<const TrainingInstance> all,
                               std::span<const std::size_t> batch, std::vector<double>& grad) {
  grad.assign(m.params.size(), 0.0);
  ForwardCache cache;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch) {
    const auto& inst = all[idx];
    net.pool(*inst.encoder, cache);
    const auto df = normalize_df(m, inst.df);
    const double y = net.fuse(cache.pooled, df, inst.corpus.values, cache);
    const double err = y - inst.target;
    loss += err * err;
    net.backward(*inst.encoder, cache, 2.0 * err * scale, grad, delta, delta_prev);
  }
  return loss * scale;
}

double mean_squared_error(const PredictorModel& m, const Network& net,
                          std::span<const TrainingInstance> all, std::span<const std::size_t> which) {
  ForwardCache cache;
  double sum = 0.0;
  for (std::size_t idx : which) {
    const auto& inst = all[idx];
    net.pool(*inst.encoder, cache);
    const double err = net.fuse(cache.pooled, normalize_df(m, inst.df), inst.corpus.values, cache) -
                       inst.target;
    sum += err * err;
  }
  return sum / static_cast<double>(which.size());
}

template <class Rng>
void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

nlohmann::json config_to_json(const NetConfig& c) {
  return {{"encoder_dim", c.encoder_dim},
          {"window_sizes", c.window_sizes},
          {"channels_per_window", c.channels_per_window},
          {"pooling", c.pooling == PoolingMode::kConcat ? "concat" : "sum"},
          {"fusion_hidden", c.fusion_hidden},
          {"fusion_layers", c.fusion_layers},
          {"lr", c.lr},
          {"lr_decay_per_epoch", c.lr_decay_per_epoch},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"max_epochs", c.max_epochs},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"dropped_features", c.dropped_features}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.encoder_dim = j.at("encoder_dim").get<std::size_t>();
  c.window_sizes = j.at("window_sizes").get<std::vector<std::size_t>>();
  c.channels_per_window = j.at("channels_per_window").get<std::size_t>();
  c.pooling = j.at("pooling").get<std::string>() == "sum" ? PoolingMode::kSum : PoolingMode::kConcat;
  c.fusion_hidden = j.at("fusion_hidden").get<std::size_t>();
  c.fusion_layers = j.at("fusion_layers").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.lr_decay_per_epoch = j.at("lr_decay_per_epoch").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropped_features = j.at("dropped_features").get<std::vector<std::string>>();
  return c;
}

}  // namespace

std::size_t NetConfig::max_window() const {
  return window_sizes.empty() ? 1 : *std::max_element(window_sizes.begin(), window_sizes.end());
}

std::size_t NetConfig::pooled_width() const {
  return pooling == PoolingMode::kConcat ? channels() * window_sizes.size() : channels();
}

void NetConfig::validate() const {
  const bool ok = encoder_dim > 0 && !window_sizes.empty() &&
                  std::all_of(window_sizes.begin(), window_sizes.end(),
                              [](std::size_t w) { return w >= 1; }) &&
                  fusion_hidden > 0 && fusion_layers > 0 && lr > 0.0 && lr_decay_per_epoch > 0.0 &&
                  batch_size > 0 && patience > 0 && max_epochs > 0 &&
                  validation_fraction >= 0.0 && validation_fraction < 1.0;
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "invalid network configuration");
  (void)input_mask(*this);
}

std::vector<TensorSlot> parameter_layout(const NetConfig& cfg) {
  std::vector<TensorSlot> slots;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    slots.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  const std::size_t channels = cfg.channels();
  for (std::size_t w : cfg.window_sizes) {
    add("conv" + std::to_string(w) + ".kernel", channels, w * cfg.encoder_dim);
    add("conv" + std::to_string(w) + ".bias", 1, channels);
  }
  std::size_t in = cfg.fusion_input_width();
  for (std::size_t l = 0; l <= cfg.fusion_layers; ++l) {
    const std::size_t out = l < cfg.fusion_layers ? cfg.fusion_hidden : 1;
    add("fusion" + std::to_string(l) + ".weight", out, in);
    add("fusion" + std::to_string(l) + ".bias", 1, out);
    in = out;
  }
  return slots;
}

PredictorModel make_zero_model(const NetConfig& cfg) {
  cfg.validate();
  PredictorModel m;
  m.config = cfg;
  const auto layout = parameter_layout(cfg);
  m.params.assign(layout.back().offset + layout.back().rows * layout.back().cols, 0.0);
  return m;
}

PredictorModel make_initialized_model(const NetConfig& cfg) {
  PredictorModel m = make_zero_model(cfg);
  std::mt19937_64 rng(cfg.seed);
  const auto layout = parameter_layout(cfg);
  for (std::size_t s = 0; s < layout.size(); s += 2) {
    const auto& w = layout[s];
    const auto& b = layout[s + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < w.rows * w.cols; ++i) m.params[w.offset + i] = dist(rng);
    for (std::size_t i = 0; i < b.cols; ++i) m.params[b.offset + i] = dist(rng);
  }
  return m;
}

std::shared_ptr<const MatrixD> prepare_encoder(const MatrixF& rep, std::size_t min_rows) {
  if (rep.rows() == 0) throw Error(ErrorCode::kEmptyMatrix, "encoder representation has no rows");
  auto out = std::make_shared<MatrixD>(std::max(rep.rows(), min_rows), rep.cols(), 0.0);
  std::copy(rep.data().begin(), rep.data().end(), out->data().begin());
  return out;
}

std::array<double, 4> normalize_df(const PredictorModel& m, const features::InstanceFeatures& df) {
  const auto v = df.values();
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < kDfCount; ++i) out[i] = (v[i] - m.df_mean[i]) / m.df_std[i];
  return out;
}

std::vector<double> encoder_pool(const PredictorModel& m, const MatrixD& padded_encoder) {
  if (padded_encoder.cols() != m.config.encoder_dim || padded_encoder.rows() < m.config.max_window()) {
    throw Error(ErrorCode::kDimensionMismatch, "encoder input does not match the model");
  }
  Network net(m);
  ForwardCache cache;
  net.pool(padded_encoder, cache);
  return cache.pooled;
}

double fusion_forward(const PredictorModel& m, std::span<const double> pooled,
                      std::span<const double> df_normalized, std::span<const double> corpus) {
  if (pooled.size() != m.config.pooled_width() || df_normalized.size() != kDfCount ||
      corpus.size() != features::kCorpusFeatureCount) {
    throw Error(ErrorCode::kDimensionMismatch, "fusion input does not match the model");
  }
  Network net(m);
  ForwardCache cache;
  return net.fuse(pooled, df_normalized, corpus, cache);
}

double predict_instance(const PredictorModel& m, const MatrixF& encoder_rep,
                        const features::InstanceFeatures& df,
                        const features::CorpusFeatures& corpus) {
  if (encoder_rep.cols() != m.config.encoder_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "encoder has " + std::to_string(encoder_rep.cols()) + " columns, model expects " +
                    std::to_string(m.config.encoder_dim));
  }
  const auto x = prepare_encoder(encoder_rep, m.config.max_window());
  Network net(m);
  ForwardCache cache;
  net.pool(*x, cache);
  return net.fuse(cache.pooled, normalize_df(m, df), corpus.values, cache);
}

double loss_and_gradient(const PredictorModel& m, std::span<const TrainingInstance> batch,
                         std::vector<double>& gradient) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "empty batch");
  Network net(m);
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  return batch_loss_and_gradient(m, net, batch, idx, gradient);
}

TrainingResult train(std::span<const TrainingInstance> instances, const NetConfig& cfg) {
  cfg.validate();
  if (instances.size() < 10) {
    throw Error(ErrorCode::kTooFewInstances,
                "training needs at least 10 instances, got " + std::to_string(instances.size()));
  }
  for (const auto& inst : instances) {
    if (!inst.encoder || inst.encoder->cols() != cfg.encoder_dim ||
        inst.encoder->rows() < cfg.max_window()) {
      throw Error(ErrorCode::kDimensionMismatch, inst.sentence_id + ": encoder input does not match config");
    }
    if (!(inst.target >= 0.0 && inst.target <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, inst.sentence_id + ": target outside [0,1]");
    }
  }

  TrainingResult result;
  PredictorModel& model = result.model;
  model = make_initialized_model(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_indices(order, rng);
  std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(order.size()));
  if (cfg.validation_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  const std::vector<std::size_t>& monitor = n_val > 0 ? val_idx : train_idx;
  result.log.n_train = train_idx.size();
  result.log.n_val = val_idx.size();

  for (std::size_t k = 0; k < kDfCount; ++k) {
    double mean = 0.0;
    for (std::size_t i : train_idx) mean += instances[i].df.values()[k];
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
      const double d = instances[i].df.values()[k] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(train_idx.size()));
    model.df_mean[k] = mean;
    model.df_std[k] = sd > 1e-12 ? sd : 1.0;
  }

  Network net(model);
  std::vector<double> grad;
  std::vector<double> adam_m(model.params.size(), 0.0);
  std::vector<double> adam_v(model.params.size(), 0.0);
  std::uint64_t step = 0;

  std::vector<double> best_params = model.params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay_per_epoch, static_cast<double>(epoch));
    shuffle_indices(train_idx, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, train_idx.size() - start);
      const std::span<const std::size_t> batch(train_idx.data() + start, len);
      loss_sum += batch_loss_and_gradient(model, net, instances, batch, grad);
      ++batches;
      ++step;
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t p = 0; p < model.params.size(); ++p) {
        const double g = grad[p];
        adam_m[p] = kAdamBeta1 * adam_m[p] + (1.0 - kAdamBeta1) * g;
        adam_v[p] = kAdamBeta2 * adam_v[p] + (1.0 - kAdamBeta2) * g * g;
        model.params[p] -= lr * (adam_m[p] / c1) / (std::sqrt(adam_v[p] / c2) + kAdamEps);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_mse = loss_sum / static_cast<double>(batches);
    rec.val_mse = mean_squared_error(model, net, instances, monitor);
    result.log.epochs.push_back(rec);

    if (rec.val_mse < best_loss) {
      best_loss = rec.val_mse;
      best_params = model.params;
      result.log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  for (auto& p : best_params) p = static_cast<double>(static_cast<float>(p));
  model.params = std::move(best_params);
  return result;
}

LearningCurve predict_curve(const PredictorModel& m, std::span<const SentenceRecord> sentences,
                            const std::map<AnchorSize, features::CorpusFeatures>& corpus_by_size) {
  if (sentences.empty()) throw Error(ErrorCode::kEmptyList, "no sentences to predict");
  if (corpus_by_size.empty()) throw Error(ErrorCode::kEmptyList, "no anchor sizes requested");
  Network net(m);
  ForwardCache cache;
  std::map<AnchorSize, double> sums;
  for (const auto& r : sentences) {
    if (r.encoder_rep.cols() != m.config.encoder_dim) {
      throw Error(ErrorCode::kDimensionMismatch, r.id + ": encoder width does not match the model");
    }
    const auto x = prepare_encoder(r.encoder_rep, m.config.max_window());
    net.pool(*x, cache);
    const std::vector<double> pooled = cache.pooled;
    const auto df = normalize_df(m, features::instance_features(r));
    for (const auto& [size, corpus] : corpus_by_size) {
      sums[size] += net.fuse(pooled, df, corpus.values, cache);
    }
  }
  LearningCurve curve;
  for (const auto& [size, s] : sums) curve[size] = s / static_cast<double>(sentences.size());
  return curve;
}

std::map<AnchorSize, features::CorpusFeatures> corpus_features_for_sizes(
    const DomainEntry& domain, std::span<const AnchorSize> sizes, const GeneralVocab& vocab,
    bool extrapolate) {
  std::map<AnchorSize, features::CorpusFeatures> out;
  for (AnchorSize size : sizes) {
    if (size == 0 || domain.samples.contains(size)) {
      out[size] = features::anchor_features(domain, size, vocab);
      continue;
    }
    if (!extrapolate || domain.samples.empty()) {
      throw Error(ErrorCode::kMissingSample,
                  domain.name + ": no source sample at anchor " + std::to_string(size));
    }
    const auto& largest = std::prev(domain.samples.end())->second;
    out[size] = features::CorpusFeatures::from_stats(
        features::extrapolate_stats(largest.view(), size, vocab));
  }
  return out;
}

std::vector<std::uint8_t> serialize_model(const PredictorModel& m) {
  nlohmann::json header = {{"format", "dalc-model"},
                           {"config", config_to_json(m.config)},
                           {"df_mean", m.df_mean},
                           {"df_std", m.df_std}};
  nlohmann::json shapes = nlohmann::json::array();
  const auto layout = parameter_layout(m.config);
  for (const auto& s : layout) shapes.push_back({s.name, s.rows, s.cols});
  header["tensors"] = shapes;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out = {'D', 'L', 'C', 'M'};
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& s : layout) {
    MatrixF t(s.rows, s.cols);
    const auto src = m.tensor(s);
    std::transform(src.begin(), src.end(), t.data().begin(),
                   [](double v) { return static_cast<float>(v); });
    append_tensor_record(t, out);
  }
  return out;
}

PredictorModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || bytes[0] != 'D' || bytes[1] != 'L' || bytes[2] != 'C' || bytes[3] != 'M') {
    throw Error(ErrorCode::kMalformedHeader, "not a DLCM model file");
  }
  const std::uint32_t len = static_cast<std::uint32_t>(bytes[4]) | (static_cast<std::uint32_t>(bytes[5]) << 8) |
                            (static_cast<std::uint32_t>(bytes[6]) << 16) |
                            (static_cast<std::uint32_t>(bytes[7]) << 24);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) {
    throw Error(ErrorCode::kMalformedHeader, "model header truncated");
  }
  PredictorModel m;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    m.config = config_from_json(header.at("config"));
    m.df_mean = header.at("df_mean").get<std::array<double, 4>>();
    m.df_std = header.at("df_std").get<std::array<double, 4>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("model header: ") + e.what());
  }
  m.config.validate();
  const auto layout = parameter_layout(m.config);
  m.params.assign(layout.back().offset + layout.back().rows * layout.back().cols, 0.0);
  auto rest = bytes.subspan(8 + len);
  for (const auto& s : layout) {
    std::size_t used = 0;
    const MatrixF t = read_tensor_record(rest, &used);
    if (t.rows() != s.rows || t.cols() != s.cols) {
      throw Error(ErrorCode::kDimensionMismatch, "model tensor " + s.name + " has the wrong shape");
    }
    std::copy(t.data().begin(), t.data().end(),
              m.params.begin() + static_cast<std::ptrdiff_t>(s.offset));
    rest = rest.subspan(used);
  }
  if (!rest.empty()) throw Error(ErrorCode::kMalformedHeader, "trailing bytes after model tensors");
  return m;
}

void save_model(const PredictorModel& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_model(m));
}

PredictorModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_binary_file(path));
}

}  // namespace dalc::net
