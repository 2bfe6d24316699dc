#include "dalc/curvefit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

namespace dalc::curvefit {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kGradientTolerance = 1e-10;
constexpr double kMaxExponent = 50.0;

double term(const Exp3Params& p, double x) {
  return std::exp(std::min(-p.a * x + p.b, kMaxExponent));
}

// Solves the 3x3 system m * out = rhs; false when (near) singular.
bool solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> rhs,
            std::array<double, 3>& out) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    if (std::abs(m[pivot][col]) < 1e-300) return false;
    std::swap(m[pivot], m[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = rhs[r];
    for (int k = r + 1; k < 3; ++k) s -= m[r][k] * out[k];
    out[r] = s / m[r][r];
  }
  return std::isfinite(out[0]) && std::isfinite(out[1]) && std::isfinite(out[2]);
}

void validate(std::span<const AnchorObservation> obs) {
  if (obs.size() < 3) {
    throw Error(ErrorCode::kTooFewObservations,
                "exp3 needs at least 3 observations, got " + std::to_string(obs.size()));
  }
  std::set<AnchorSize> sizes;
  for (const auto& o : obs) {
    if (!std::isfinite(o.score)) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
    sizes.insert(o.size);
  }
  if (sizes.size() < 3) {
    throw Error(ErrorCode::kDegenerateSizes,
                "exp3 needs at least 3 distinct sizes, got " + std::to_string(sizes.size()));
  }
}

}  // namespace

double log_size(AnchorSize size) { return std::log1p(static_cast<double>(size)); }

double exp3_eval_at(const Exp3Params& p, double x) { return p.c - term(p, x); }

double exp3_eval(const Exp3Params& p, AnchorSize size) { return exp3_eval_at(p, log_size(size)); }

double exp3_residual(const Exp3Params& p, std::span<const AnchorObservation> obs) {
  double sse = 0.0;
  for (const auto& o : obs) {
    const double r = exp3_eval(p, o.size) - o.score;
    sse += r * r;
  }
  return sse;
}

Exp3Fit exp3_refine(std::span<const AnchorObservation> obs, const Exp3Params& start) {
  validate(obs);
  std::vector<double> xs;
  xs.reserve(obs.size());
  for (const auto& o : obs) xs.push_back(log_size(o.size));

  Exp3Params p = start;
  p.c = std::clamp(p.c, kMinC, kMaxC);
  double sse = exp3_residual(p, obs);
  double damping = 1e-3;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double e = term(p, xs[i]);
      const double r = (p.c - e) - obs[i].score;
      const std::array<double, 3> j = {xs[i] * e, -e, 1.0};
      for (int u = 0; u < 3; ++u) {
        jtr[u] += j[u] * r;
        for (int v = 0; v < 3; ++v) jtj[u][v] += j[u] * j[v];
      }
    }
    const double grad_norm = std::sqrt(jtr[0] * jtr[0] + jtr[1] * jtr[1] + jtr[2] * jtr[2]);
    if (grad_norm < kGradientTolerance) break;

    bool improved = false;
    while (damping < 1e12) {
      auto m = jtj;
      for (int u = 0; u < 3; ++u) m[u][u] += damping * std::max(jtj[u][u], 1e-12);
      std::array<double, 3> step{};
      if (solve3(m, {-jtr[0], -jtr[1], -jtr[2]}, step)) {
        Exp3Params trial{p.a + step[0], p.b + step[1], std::clamp(p.c + step[2], kMinC, kMaxC)};
        const double trial_sse = exp3_residual(trial, obs);
        if (std::isfinite(trial_sse) && trial_sse < sse) {
          p = trial;
          sse = trial_sse;
          damping = std::max(damping * 0.3, 1e-15);
          improved = true;
          break;
        }
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  return {p, sse, 0};
}

std::vector<Exp3Params> exp3_starts(std::span<const AnchorObservation> obs) {
  double max_y = -std::numeric_limits<double>::infinity();
  for (const auto& o : obs) max_y = std::max(max_y, o.score);
  std::vector<Exp3Params> starts;
  constexpr int kAs = 10;
  for (int ia = 0; ia < kAs; ++ia) {
    const double a = 0.05 * std::pow(2.0 / 0.05, static_cast<double>(ia) / (kAs - 1));
    for (int b = -2; b <= 3; ++b) {
      for (double c : {max_y, max_y + 0.1, 1.0}) {
        starts.push_back({a, static_cast<double>(b), std::clamp(c, kMinC, kMaxC)});
      }
    }
  }
  return starts;
}

Exp3Fit exp3_fit(std::span<const AnchorObservation> obs) {
  validate(obs);
  const auto starts = exp3_starts(obs);
  Exp3Fit best;
  best.residual = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    Exp3Fit f = exp3_refine(obs, starts[i]);
    if (f.residual < best.residual) {
      best = f;
      best.start_index = static_cast<int>(i);
    }
  }
  return best;
}

LearningCurve exp3_curve(const Exp3Params& p, std::span<const AnchorSize> sizes) {
  if (sizes.empty()) throw Error(ErrorCode::kEmptyList, "exp3 curve needs at least one size");
  LearningCurve curve;
  for (AnchorSize s : sizes) curve[s] = std::clamp(exp3_eval(p, s), 0.0, 1.0);
  return curve;
}

}  // namespace dalc::curvefit
