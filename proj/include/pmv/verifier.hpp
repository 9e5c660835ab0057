#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pmv/losses.hpp"
#include "pmv/sampling.hpp"

namespace pmv {

enum class FirstLayer { kConv1x1, kFullyConnected };
enum class Regularizer { kDropout, kBatchNorm };

struct VerifierConfig {
  Index depth = 7;  // total trainable layer count, decision layer included
  FirstLayer first_layer = FirstLayer::kConv1x1;
  Index kernel_count = 128;
  Index hidden_width = 1024;
  Regularizer regularizer = Regularizer::kDropout;
  double dropout_rate = 0.5;
  Index input_dim = 0;  // per-channel feature length
  bool pair_order_augment = false;

  void validate() const;
  Index hidden_fc_count() const {
    return first_layer == FirstLayer::kConv1x1 ? depth - 2 : depth - 1;
  }
};

// Two features stacked as the channels of one composite input.
struct PairedFeature {
  Tensor channels;  // 2 x D
};

PairedFeature stack_pair(const Vector& a, const Vector& b);

struct VerifierModel {
  VerifierConfig config;
  std::optional<Conv1x1Params> conv;
  std::vector<LinearParams> fc;          // hidden layers, then the 2-output decision layer
  std::vector<BatchNormParams> norms;    // one per hidden activation when regularizer = batchnorm
};

// Conv variant: conv1x1(2->K) + ReLU + regularizer, (depth-2) hidden FC
// blocks, 2-output decision layer. FC variant: flattened channels through
// (depth-1) hidden FC blocks and the decision layer. Xavier-uniform weights,
// zero biases.
VerifierModel build_verifier(const VerifierConfig& config, RngStream& rng);

struct VerifierTrace {
  Tensor input;                     // B x 2 x D
  Tensor conv_pre;                  // conv variant only
  std::vector<Tensor> fc_in;        // input to every fc layer
  std::vector<Tensor> fc_pre;       // pre-activation of each hidden fc
  std::vector<Tensor> masks;        // dropout masks per regularizer site
  std::vector<Tensor> reg_in;       // input to each regularizer site
  std::vector<BatchNormCache> bn;
  Matrix logits;                    // B x 2
  Matrix probs;                     // B x 2, column 0 = match
};

// Batched forward over B stacked pairs. Training mode draws dropout masks
// from `rng` and advances batchnorm running statistics.
Matrix verifier_forward_batch(VerifierModel& model, const Tensor& pairs, bool training,
                              RngStream* rng, VerifierTrace* trace);

// Deterministic evaluation-mode forward; the model is never mutated.
Matrix verifier_eval_batch(const VerifierModel& model, const Tensor& pairs);

struct VerifierGrads {
  std::optional<Conv1x1Grads> conv;
  std::vector<LinearGrads> fc;
  std::vector<BatchNormGrads> norms;
  Tensor input;  // B x 2 x D; feeds the backbone in joint training
};

VerifierGrads verifier_backward(const VerifierModel& model, const VerifierTrace& trace,
                                const Matrix& grad_logits);

void verifier_sgd_step(VerifierModel& model, const VerifierGrads& grads, double lr);

// (p_match, p_nonmatch); deterministic in evaluation mode.
std::pair<double, double> verify_forward(const VerifierModel& model, const PairedFeature& pair);

// Match iff p_match strictly exceeds p_nonmatch; ties resolve to non-match.
bool verify_decision(const std::pair<double, double>& probs);

// One SGD step on the mean batch loss (softmax or focal); returns the loss.
double verifier_train_step(VerifierModel& model, const PairBatch& batch, const LossConfig& loss,
                           double lr, RngStream& dropout_rng);

// Stacks a batch of pairs into a B x 2 x D tensor.
Tensor stack_batch(const PairBatch& batch, Index dim);

}  // namespace pmv
