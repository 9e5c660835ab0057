#include "pmv/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pmv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// sin(m t)/sin(t), switching to the l'Hopital form m cos(m t)/cos(t) where
// sin(t) underflows (t near 0 or pi, where cos(t) = +/-1).
double sine_ratio(double theta, int m) {
  const double s = std::sin(theta);
  if (std::abs(s) < 1e-9) {
    return static_cast<double>(m) * std::cos(m * theta) / std::cos(theta);
  }
  return std::sin(m * theta) / s;
}

}  // namespace

void LossConfig::validate() const {
  if (margin_m < 1) throw ConfigError("loss: margin_m must be >= 1, got " + std::to_string(margin_m));
  if (gamma < 0.0) throw ConfigError("loss: gamma must be >= 0, got " + std::to_string(gamma));
  if (alpha < 0.0 || alpha > 1.0) {
    throw ConfigError("loss: alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

ClassHead ClassHead::xavier_normalized(Index classes, Index dim, RngStream& rng) {
  ClassHead head;
  head.weights = Matrix::Zero(classes, dim);
  for (Index c = 0; c < classes; ++c)
    for (Index d = 0; d < dim; ++d) head.weights(c, d) = rng.xavier(dim, classes);
  head.normalize_rows = true;
  head.renormalize();
  return head;
}

void ClassHead::renormalize() {
  for (Index c = 0; c < weights.rows(); ++c) {
    const double n = weights.row(c).norm();
    if (n == 0.0) throw DegenerateInputError("class head: zero-norm weight row " + std::to_string(c));
    weights.row(c) /= n;
  }
}

ScalarLoss softmax_cross_entropy(const Matrix& logits, std::span<const Index> labels) {
  const Index batch = logits.rows(), classes = logits.cols();
  if (static_cast<Index>(labels.size()) != batch) {
    throw DimensionError("cross entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
  }
  for (Index i = 0; i < batch; ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw LabelError("cross entropy: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
  ScalarLoss r;
  r.grad = softmax_probs(logits);
  double total = 0.0;
  for (Index i = 0; i < batch; ++i) {
    // log-sum-exp form keeps the loss exact when the true-class prob underflows
    const double shift = logits.row(i).maxCoeff();
    const double lse = shift + std::log((logits.row(i).array() - shift).exp().sum());
    total += lse - logits(i, labels[i]);
    r.grad(i, labels[i]) -= 1.0;
  }
  r.loss = total / static_cast<double>(batch);
  r.grad /= static_cast<double>(batch);
  return r;
}

std::pair<double, double> binary_posteriors(const Vector& x, const LinearParams& p1,
                                            const LinearParams& p2) {
  for (const LinearParams* p : {&p1, &p2}) {
    if (p->out() != 1 || p->in() != x.size()) {
      throw DimensionError("binary posteriors: params " + shape_string(p->in(), p->out()) +
                           " must map " + std::to_string(x.size()) + " -> 1");
    }
  }
  const double s1 = p1.weights.col(0).dot(x) + p1.bias[0];
  const double s2 = p2.weights.col(0).dot(x) + p2.bias[0];
  const double shift = std::max(s1, s2);
  const double e1 = std::exp(s1 - shift), e2 = std::exp(s2 - shift);
  return {e1 / (e1 + e2), e2 / (e1 + e2)};
}

namespace {

// Branch index of theta; exact boundaries k pi/m take the lower branch.
int phi_branch(double theta, int m) {
  const int k = static_cast<int>(std::ceil(theta * m / kPi)) - 1;
  return std::clamp(k, 0, m - 1);
}

}  // namespace

double angular_phi(double theta, int m) {
  if (m < 1) throw ConfigError("angular_phi: m must be >= 1, got " + std::to_string(m));
  if (!(theta >= 0.0 && theta <= kPi)) {
    throw DomainError("angular_phi: theta " + std::to_string(theta) + " outside [0, pi]");
  }
  const int k = phi_branch(theta, m);
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return sign * std::cos(m * theta) - 2.0 * k;
}

double angular_phi_derivative(double theta, int m) {
  if (m < 1) throw ConfigError("angular_phi: m must be >= 1, got " + std::to_string(m));
  if (!(theta >= 0.0 && theta <= kPi)) {
    throw DomainError("angular_phi: theta " + std::to_string(theta) + " outside [0, pi]");
  }
  const int k = phi_branch(theta, m);
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return -sign * m * std::sin(m * theta);
}

ASoftmaxLoss a_softmax_loss(const Matrix& features, const ClassHead& head,
                            std::span<const Index> labels, int m) {
  if (m < 1) throw ConfigError("a_softmax: m must be >= 1, got " + std::to_string(m));
  if (!head.normalize_rows) {
    throw PreconditionError("a_softmax: head must declare normalize_rows");
  }
  const Index batch = features.rows(), dim = features.cols(), classes = head.classes();
  if (head.dim() != dim) {
    throw DimensionError("a_softmax: features " + shape_string(batch, dim) + " vs head " +
                         shape_string(classes, head.dim()));
  }
  if (static_cast<Index>(labels.size()) != batch) {
    throw DimensionError("a_softmax: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
  }
  for (Index c = 0; c < classes; ++c) {
    if (std::abs(head.weights.row(c).norm() - 1.0) > 1e-6) {
      throw PreconditionError("a_softmax: head row " + std::to_string(c) +
                              " is not unit norm");
    }
  }
  for (Index i = 0; i < batch; ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw LabelError("a_softmax: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }

  ASoftmaxLoss r;
  r.grad_features = Matrix::Zero(batch, dim);
  r.grad_weights = Matrix::Zero(classes, dim);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  Matrix logits(batch, classes);
  std::vector<double> norms(static_cast<std::size_t>(batch));
  std::vector<double> cos_true(static_cast<std::size_t>(batch));
  std::vector<double> theta_true(static_cast<std::size_t>(batch));

  for (Index i = 0; i < batch; ++i) {
    const double n = features.row(i).norm();
    if (n == 0.0) {
      throw DegenerateInputError("a_softmax: zero-norm feature at row " + std::to_string(i));
    }
    norms[static_cast<std::size_t>(i)] = n;
    for (Index j = 0; j < classes; ++j) {
      const double wn = head.weights.row(j).norm();
      const double c = std::clamp(features.row(i).dot(head.weights.row(j)) / (n * wn), -1.0, 1.0);
      if (j == labels[i]) {
        const double theta = std::acos(c);
        cos_true[static_cast<std::size_t>(i)] = c;
        theta_true[static_cast<std::size_t>(i)] = theta;
        logits(i, j) = n * angular_phi(theta, m);
      } else {
        logits(i, j) = n * c;
      }
    }
  }

  const Matrix probs = softmax_probs(logits);
  for (Index i = 0; i < batch; ++i) {
    const Index y = labels[i];
    const double n = norms[static_cast<std::size_t>(i)];
    const double shift = logits.row(i).maxCoeff();
    const double lse = shift + std::log((logits.row(i).array() - shift).exp().sum());
    r.loss += (lse - logits(i, y)) * inv_batch;

    const double theta = theta_true[static_cast<std::size_t>(i)];
    const double c = cos_true[static_cast<std::size_t>(i)];
    const int k = phi_branch(theta, m);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    // d(|x| phi)/d cos collapses to sign * m sin(m theta)/sin(theta), finite
    // at the interval endpoints.
    const double ratio = sign * m * sine_ratio(theta, m);
    const double phi = angular_phi(theta, m);

    for (Index j = 0; j < classes; ++j) {
      const double g = (probs(i, j) - (j == y ? 1.0 : 0.0)) * inv_batch;
      const double wn = head.weights.row(j).norm();
      if (j == y) {
        // s_y = |x| phi(theta): split into the norm term and the angle term.
        r.grad_features.row(i) +=
            g * (phi * features.row(i) / n +
                 ratio * (head.weights.row(j) / wn - c * features.row(i) / n));
        r.grad_weights.row(j) +=
            g * ratio * (features.row(i) / wn - c * n * head.weights.row(j) / (wn * wn));
      } else {
        // s_j = x . w_j / |w_j|
        r.grad_features.row(i) += g * head.weights.row(j) / wn;
        r.grad_weights.row(j) +=
            g * (features.row(i) / wn -
                 features.row(i).dot(head.weights.row(j)) * head.weights.row(j) / (wn * wn * wn));
      }
    }
  }
  return r;
}

FocalLoss focal_loss(const Vector& prob_true, const Vector& alpha_t, double gamma) {
  if (gamma < 0.0) throw ConfigError("focal: gamma must be >= 0, got " + std::to_string(gamma));
  if (prob_true.size() != alpha_t.size()) {
    throw DimensionError("focal: " + std::to_string(prob_true.size()) + " probabilities vs " +
                         std::to_string(alpha_t.size()) + " alpha weights");
  }
  const Index batch = prob_true.size();
  FocalLoss r;
  r.grad = Vector::Zero(batch);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (Index i = 0; i < batch; ++i) {
    const double pt = prob_true[i];
    if (!(pt > 0.0 && pt <= 1.0)) {
      throw DomainError("focal: p_t must lie in (0, 1], got " + std::to_string(pt) + " at " +
                        std::to_string(i));
    }
    const double at = alpha_t[i];
    const double one_minus = 1.0 - pt;
    const double focus = std::pow(one_minus, gamma);
    r.loss += -at * focus * std::log(pt) * inv_batch;
    double d;
    if (one_minus == 0.0) {
      // limit of the derivative as p_t -> 1: -alpha_t for gamma = 0, else 0
      d = (gamma == 0.0) ? -at : 0.0;
    } else {
      d = -at * (focus / pt - gamma * std::pow(one_minus, gamma - 1.0) * std::log(pt));
    }
    r.grad[i] = d * inv_batch;
  }
  return r;
}

double focal_pt(double p, bool positive) { return positive ? p : 1.0 - p; }

double focal_alpha_t(double alpha, bool positive) { return positive ? alpha : 1.0 - alpha; }

}  // namespace pmv
