#pragma once

#include <span>
#include <vector>

#include "pmv/layers.hpp"

namespace pmv {

enum class LossKind { kSoftmax, kASoftmax, kFocal };

struct LossConfig {
  int margin_m = 1;     // angular margin multiplier, integer >= 1
  double gamma = 0.0;   // focusing factor, >= 0
  double alpha = 0.5;   // class balance factor in [0, 1]
  LossKind kind = LossKind::kSoftmax;

  void validate() const;
};

// One weight row per class. A-Softmax requires unit-norm rows and no bias.
struct ClassHead {
  Matrix weights;
  bool normalize_rows = false;

  static ClassHead xavier_normalized(Index classes, Index dim, RngStream& rng);
  void renormalize();

  Index classes() const { return weights.rows(); }
  Index dim() const { return weights.cols(); }
};

struct ScalarLoss {
  double loss = 0.0;
  Matrix grad;  // w.r.t. the first tensor argument
};

struct ASoftmaxLoss {
  double loss = 0.0;
  Matrix grad_features;
  Matrix grad_weights;
};

struct FocalLoss {
  double loss = 0.0;
  Vector grad;  // w.r.t. prob_true
};

// Mean negative log-likelihood of the labeled class; grad = (softmax - onehot)/B.
ScalarLoss softmax_cross_entropy(const Matrix& logits, std::span<const Index> labels);

// Two-class exponential-ratio posteriors of a pair of affine scores.
std::pair<double, double> binary_posteriors(const Vector& x, const LinearParams& p1,
                                            const LinearParams& p2);

// Piecewise monotone margin surrogate: (-1)^k cos(m theta) - 2k on
// [k pi/m, (k+1) pi/m]; exact boundaries resolve to the lower k.
double angular_phi(double theta, int m);
// d phi / d theta on the same branch; zero at every branch boundary.
double angular_phi_derivative(double theta, int m);

// Angular-margin softmax: true-class logit |x| phi(theta_y), others |x| cos(theta_j).
ASoftmaxLoss a_softmax_loss(const Matrix& features, const ClassHead& head,
                            std::span<const Index> labels, int m);

// Mean of -alpha_t (1 - p_t)^gamma log(p_t) over per-sample true-class probabilities.
FocalLoss focal_loss(const Vector& prob_true, const Vector& alpha_t, double gamma);

// Maps a predicted probability for the positive class to p_t: p when the
// label is positive, 1 - p otherwise.
double focal_pt(double p, bool positive);
double focal_alpha_t(double alpha, bool positive);

}  // namespace pmv
