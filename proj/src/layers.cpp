#include "pmv/layers.hpp"

#include <cmath>

namespace pmv {

namespace {

void require_rank(const Tensor& x, Index rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " input, got shape " + x.shape_str());
  }
}

}  // namespace

LinearParams LinearParams::xavier(Index in, Index out, RngStream& rng) {
  LinearParams p = zeros(in, out);
  for (Index i = 0; i < in; ++i)
    for (Index j = 0; j < out; ++j) p.weights(i, j) = rng.xavier(in, out);
  return p;
}

Conv1x1Params Conv1x1Params::xavier(Index c_in, Index k, RngStream& rng) {
  Conv1x1Params p = zeros(c_in, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < c_in; ++j) p.kernels(i, j) = rng.xavier(c_in, k);
  return p;
}

Tensor linear_forward(const Tensor& x, const LinearParams& p) {
  require_rank(x, 2, "linear");
  if (x.extent(1) != p.in()) {
    throw DimensionError("linear: input " + x.shape_str() + " vs weights " +
                         shape_string(p.in(), p.out()));
  }
  Tensor out({x.extent(0), p.out()});
  out.mat() = (x.mat() * p.weights).rowwise() + p.bias.transpose();
  return out;
}

LinearGrads linear_backward(const Tensor& x, const LinearParams& p, const Tensor& grad_out) {
  require_rank(x, 2, "linear");
  if (grad_out.rank() != 2 || grad_out.extent(0) != x.extent(0) || grad_out.extent(1) != p.out()) {
    throw DimensionError("linear backward: gradient " + grad_out.shape_str() + " vs output " +
                         shape_string(x.extent(0), p.out()));
  }
  LinearGrads g;
  g.input = Tensor({x.extent(0), p.in()});
  g.input.mat() = grad_out.mat() * p.weights.transpose();
  g.weights = x.mat().transpose() * grad_out.mat();
  g.bias = grad_out.mat().colwise().sum().transpose();
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  out.array() = out.array().max(0.0);
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu backward");
  Tensor g = grad_out;
  g.array() = (x.array() > 0.0).select(g.array(), 0.0);
  return g;
}

Tensor conv1x1_forward(const Tensor& x, const Conv1x1Params& p) {
  require_rank(x, 3, "conv1x1");
  if (x.extent(1) != p.in_channels()) {
    throw DimensionError("conv1x1: input channels " + std::to_string(x.extent(1)) +
                         " vs kernel channels " + std::to_string(p.in_channels()));
  }
  const Index batch = x.extent(0), positions = x.extent(2), k = p.out_channels();
  Tensor out({batch, k, positions});
  for (Index b = 0; b < batch; ++b) {
    out.slab(b) = (p.kernels * x.slab(b)).colwise() + p.bias;
  }
  return out;
}

Conv1x1Grads conv1x1_backward(const Tensor& x, const Conv1x1Params& p, const Tensor& grad_out) {
  require_rank(x, 3, "conv1x1");
  const Index batch = x.extent(0), positions = x.extent(2), k = p.out_channels();
  if (grad_out.rank() != 3 || grad_out.extent(0) != batch || grad_out.extent(1) != k ||
      grad_out.extent(2) != positions) {
    throw DimensionError("conv1x1 backward: gradient " + grad_out.shape_str() + " vs output " +
                         std::to_string(batch) + "x" + std::to_string(k) + "x" +
                         std::to_string(positions));
  }
  Conv1x1Grads g;
  g.input = Tensor({batch, x.extent(1), positions});
  g.kernels = Matrix::Zero(k, p.in_channels());
  g.bias = Vector::Zero(k);
  for (Index b = 0; b < batch; ++b) {
    auto go = grad_out.slab(b);
    g.input.slab(b) = p.kernels.transpose() * go;
    g.kernels += go * x.slab(b).transpose();
    g.bias += go.rowwise().sum();
  }
  return g;
}

DropoutResult dropout_forward(const Tensor& x, double rate, RngStream& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult r;
  if (!training || rate == 0.0) {
    r.output = x;
    r.mask = x;
    r.mask.array().setConstant(1.0);
    return r;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  r.mask = x;
  for (Index i = 0; i < r.mask.size(); ++i) {
    r.mask.array()[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  r.output = x;
  r.output.array() *= r.mask.array();
  return r;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
  require_same_shape(mask, grad_out, "dropout backward");
  Tensor g = grad_out;
  g.array() *= mask.array();
  return g;
}

Tensor batchnorm_forward(const Tensor& x, BatchNormParams& p, bool training,
                         BatchNormCache* cache) {
  require_rank(x, 2, "batchnorm");
  if (x.extent(1) != p.features()) {
    throw DimensionError("batchnorm: input width " + std::to_string(x.extent(1)) +
                         " vs parameter width " + std::to_string(p.features()));
  }
  const Index batch = x.extent(0);
  Tensor out({batch, p.features()});
  if (training) {
    if (batch < 2) {
      throw PreconditionError("batchnorm: training requires batch size >= 2, got " +
                              std::to_string(batch));
    }
    const Vector mean = x.mat().colwise().mean().transpose();
    const Matrix centered = x.mat().rowwise() - mean.transpose();
    const Vector var = centered.array().square().colwise().mean().transpose();
    const Vector inv_std = (var.array() + p.epsilon).rsqrt();
    const Matrix x_hat = centered.array().rowwise() * inv_std.transpose().array();
    out.mat() = (x_hat.array().rowwise() * p.gamma.transpose().array()).rowwise() +
                p.beta.transpose().array();
    p.running_mean = p.momentum * p.running_mean + (1.0 - p.momentum) * mean;
    p.running_var = p.momentum * p.running_var + (1.0 - p.momentum) * var;
    if (cache != nullptr) {
      cache->x_hat = x_hat;
      cache->inv_std = inv_std;
    }
  } else {
    const Vector inv_std = (p.running_var.array() + p.epsilon).rsqrt();
    const Matrix x_hat =
        (x.mat().rowwise() - p.running_mean.transpose()).array().rowwise() *
        inv_std.transpose().array();
    out.mat() = (x_hat.array().rowwise() * p.gamma.transpose().array()).rowwise() +
                p.beta.transpose().array();
  }
  return out;
}

BatchNormGrads batchnorm_backward(const Tensor& x, const BatchNormParams& p,
                                  const BatchNormCache& cache, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "batchnorm backward");
  const Index batch = x.extent(0);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  BatchNormGrads g;
  g.beta = grad_out.mat().colwise().sum().transpose();
  g.gamma = (grad_out.mat().array() * cache.x_hat.array()).colwise().sum().transpose();

  const Matrix d_xhat = grad_out.mat().array().rowwise() * p.gamma.transpose().array();
  const Vector sum_d = d_xhat.colwise().sum().transpose();
  const Vector sum_dx = (d_xhat.array() * cache.x_hat.array()).colwise().sum().transpose();

  g.input = Tensor({batch, x.extent(1)});
  g.input.mat() =
      ((d_xhat * static_cast<double>(batch)).rowwise() - sum_d.transpose()).array() -
      (cache.x_hat.array().rowwise() * sum_dx.transpose().array());
  g.input.mat() = g.input.mat().array().rowwise() *
                  (inv_batch * cache.inv_std.transpose().array());
  return g;
}

Matrix softmax_probs(const Matrix& logits) {
  if (logits.cols() < 1) throw DimensionError("softmax: at least one class required");
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double shift = logits.row(r).maxCoeff();
    ArrayX e = (logits.row(r).array() - shift).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

Tensor softmax_probs(const Tensor& logits) {
  Tensor t = logits;
  t.mat() = softmax_probs(Matrix(logits.mat()));
  return t;
}

}  // namespace pmv
