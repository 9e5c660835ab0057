#pragma once

#include "pmv/rng.hpp"
#include "pmv/tensor.hpp"

namespace pmv {

// W^T x + b over a batch; weights are In x Out, bias length Out.
struct LinearParams {
  Matrix weights;
  Vector bias;

  static LinearParams zeros(Index in, Index out) {
    return {Matrix::Zero(in, out), Vector::Zero(out)};
  }
  static LinearParams xavier(Index in, Index out, RngStream& rng);

  Index in() const { return weights.rows(); }
  Index out() const { return weights.cols(); }
};

struct LinearGrads {
  Tensor input;
  Matrix weights;
  Vector bias;
};

// Per-position channel mixing: kernels are K x C_in, bias length K.
struct Conv1x1Params {
  Matrix kernels;
  Vector bias;

  static Conv1x1Params zeros(Index c_in, Index k) {
    return {Matrix::Zero(k, c_in), Vector::Zero(k)};
  }
  static Conv1x1Params xavier(Index c_in, Index k, RngStream& rng);

  Index in_channels() const { return kernels.cols(); }
  Index out_channels() const { return kernels.rows(); }
};

struct Conv1x1Grads {
  Tensor input;
  Matrix kernels;
  Vector bias;
};

struct BatchNormParams {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double epsilon = 1e-5;
  double momentum = 0.9;

  static BatchNormParams init(Index features) {
    return {Vector::Ones(features), Vector::Zero(features), Vector::Zero(features),
            Vector::Ones(features), 1e-5, 0.9};
  }

  Index features() const { return gamma.size(); }
};

// Training-mode state needed by the batch-coupled backward pass.
struct BatchNormCache {
  Matrix x_hat;
  Vector inv_std;
};

struct BatchNormGrads {
  Tensor input;
  Vector gamma;
  Vector beta;
};

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per-element scale: 0 for dropped, 1/(1-rate) for kept
};

Tensor linear_forward(const Tensor& x, const LinearParams& p);
LinearGrads linear_backward(const Tensor& x, const LinearParams& p, const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor conv1x1_forward(const Tensor& x, const Conv1x1Params& p);
Conv1x1Grads conv1x1_backward(const Tensor& x, const Conv1x1Params& p, const Tensor& grad_out);

DropoutResult dropout_forward(const Tensor& x, double rate, RngStream& rng, bool training);
Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out);

// Training mode normalizes by batch statistics and updates the running ones;
// evaluation mode normalizes by the running statistics and leaves p untouched.
Tensor batchnorm_forward(const Tensor& x, BatchNormParams& p, bool training,
                         BatchNormCache* cache = nullptr);
BatchNormGrads batchnorm_backward(const Tensor& x, const BatchNormParams& p,
                                  const BatchNormCache& cache, const Tensor& grad_out);

// Row-wise softmax, shift-invariant via max subtraction.
Tensor softmax_probs(const Tensor& logits);
Matrix softmax_probs(const Matrix& logits);

}  // namespace pmv
