#pragma once

#include <span>
#include <vector>

#include "dalc/dataset.hpp"

namespace dalc::curvefit {

// y = c - exp(-a * x + b) with x = ln(1 + anchor size).
struct Exp3Params {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct AnchorObservation {
  AnchorSize size = 0;
  double score = 0.0;
};

struct Exp3Fit {
  Exp3Params params;
  double residual = 0.0;  // sum of squared errors on the fitted observations
  int start_index = 0;    // winning multi-start initialization
};

inline constexpr double kMinC = 0.0;
inline constexpr double kMaxC = 1.5;

double log_size(AnchorSize size);
double exp3_eval_at(const Exp3Params& p, double x);
double exp3_eval(const Exp3Params& p, AnchorSize size);

double exp3_residual(const Exp3Params& p, std::span<const AnchorObservation> obs);

// Multi-start Levenberg-Marquardt. Starts are a ∈ 10 log-spaced values in
// [0.05, 2], b ∈ {-2,-1,0,1,2,3}, c ∈ {max y, max y + 0.1, 1}; the lowest
// residual wins, ties go to the earliest start.
Exp3Fit exp3_fit(std::span<const AnchorObservation> obs);

// Least-squares refinement from a single starting point.
Exp3Fit exp3_refine(std::span<const AnchorObservation> obs, const Exp3Params& start);

std::vector<Exp3Params> exp3_starts(std::span<const AnchorObservation> obs);

// Curve clamped to [0,1].
LearningCurve exp3_curve(const Exp3Params& p, std::span<const AnchorSize> sizes);

}  // namespace dalc::curvefit
