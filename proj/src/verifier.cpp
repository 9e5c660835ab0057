#include "pmv/verifier.hpp"

#include <cmath>

namespace pmv {

void VerifierConfig::validate() const {
  if (depth < 2) throw ConfigError("verifier: depth must be >= 2, got " + std::to_string(depth));
  if (input_dim < 1) {
    throw ConfigError("verifier: input_dim must be positive, got " + std::to_string(input_dim));
  }
  if (first_layer == FirstLayer::kConv1x1 && kernel_count < 1) {
    throw ConfigError("verifier: kernel_count must be positive, got " +
                      std::to_string(kernel_count));
  }
  if (hidden_width < 1) {
    throw ConfigError("verifier: hidden_width must be positive, got " +
                      std::to_string(hidden_width));
  }
  if (regularizer == Regularizer::kDropout && !(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("verifier: dropout_rate must lie in [0, 1), got " +
                      std::to_string(dropout_rate));
  }
}

PairedFeature stack_pair(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("stack_pair: lengths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  PairedFeature pf;
  pf.channels = Tensor({2, a.size()});
  pf.channels.mat().row(0) = a.transpose();
  pf.channels.mat().row(1) = b.transpose();
  return pf;
}

Tensor stack_batch(const PairBatch& batch, Index dim) {
  const Index n = batch.size();
  Tensor t({n, 2, dim});
  for (Index i = 0; i < n; ++i) {
    const auto& p = batch.pairs[static_cast<std::size_t>(i)];
    if (p.a.size() != dim || p.b.size() != dim) {
      throw DimensionError("stack_batch: pair " + std::to_string(i) + " has lengths " +
                           std::to_string(p.a.size()) + "/" + std::to_string(p.b.size()) +
                           ", expected " + std::to_string(dim));
    }
    t.slab(i).row(0) = p.a.transpose();
    t.slab(i).row(1) = p.b.transpose();
  }
  return t;
}

namespace {

// Width of each regularizer site, in forward order.
std::vector<Index> site_widths(const VerifierConfig& c) {
  std::vector<Index> w;
  if (c.first_layer == FirstLayer::kConv1x1) w.push_back(c.kernel_count * c.input_dim);
  for (Index i = 0; i < c.hidden_fc_count(); ++i) w.push_back(c.hidden_width);
  return w;
}

}  // namespace

VerifierModel build_verifier(const VerifierConfig& config, RngStream& rng) {
  config.validate();
  VerifierModel m;
  m.config = config;

  Index cur = 0;
  if (config.first_layer == FirstLayer::kConv1x1) {
    m.conv = Conv1x1Params::xavier(2, config.kernel_count, rng);
    cur = config.kernel_count * config.input_dim;
  } else {
    cur = 2 * config.input_dim;
  }
  for (Index i = 0; i < config.hidden_fc_count(); ++i) {
    m.fc.push_back(LinearParams::xavier(cur, config.hidden_width, rng));
    cur = config.hidden_width;
  }
  m.fc.push_back(LinearParams::xavier(cur, 2, rng));

  if (config.regularizer == Regularizer::kBatchNorm) {
    for (Index w : site_widths(config)) m.norms.push_back(BatchNormParams::init(w));
  }
  return m;
}

namespace {

Tensor apply_regularizer(VerifierModel& model, const Tensor& x, Index site, bool training,
                         RngStream* rng, VerifierTrace* trace) {
  if (model.config.regularizer == Regularizer::kDropout) {
    if (!training || model.config.dropout_rate == 0.0) {
      if (trace != nullptr) {
        Tensor mask = x;
        mask.array().setConstant(1.0);
        trace->masks[static_cast<std::size_t>(site)] = std::move(mask);
      }
      return x;
    }
    DropoutResult r = dropout_forward(x, model.config.dropout_rate, *rng, true);
    if (trace != nullptr) trace->masks[static_cast<std::size_t>(site)] = std::move(r.mask);
    return std::move(r.output);
  }
  auto& p = model.norms[static_cast<std::size_t>(site)];
  if (training) {
    BatchNormCache cache;
    Tensor out = batchnorm_forward(x, p, true, &cache);
    if (trace != nullptr) {
      trace->reg_in[static_cast<std::size_t>(site)] = x;
      trace->bn[static_cast<std::size_t>(site)] = std::move(cache);
    }
    return out;
  }
  return batchnorm_forward(x, p, false, nullptr);
}

}  // namespace

Matrix verifier_forward_batch(VerifierModel& model, const Tensor& pairs, bool training,
                              RngStream* rng, VerifierTrace* trace) {
  const VerifierConfig& c = model.config;
  if (pairs.rank() != 3 || pairs.extent(1) != 2 || pairs.extent(2) != c.input_dim) {
    throw DimensionError("verifier: input " + pairs.shape_str() + " vs expected Bx2x" +
                         std::to_string(c.input_dim));
  }
  const Index batch = pairs.extent(0);
  const Index sites = static_cast<Index>(site_widths(c).size());
  if (trace != nullptr) {
    trace->input = pairs;
    trace->fc_in.clear();
    trace->fc_pre.clear();
    trace->masks.resize(static_cast<std::size_t>(sites));
    trace->reg_in.resize(static_cast<std::size_t>(sites));
    trace->bn.resize(static_cast<std::size_t>(sites));
  }

  Tensor cur;
  Index site = 0;
  if (c.first_layer == FirstLayer::kConv1x1) {
    Tensor pre = conv1x1_forward(pairs, *model.conv);
    if (trace != nullptr) trace->conv_pre = pre;
    Tensor act = relu_forward(pre);
    cur = reshaped(act, {batch, c.kernel_count * c.input_dim});
    cur = apply_regularizer(model, cur, site++, training, rng, trace);
  } else {
    cur = reshaped(pairs, {batch, 2 * c.input_dim});
  }

  for (Index i = 0; i < c.hidden_fc_count(); ++i) {
    if (trace != nullptr) trace->fc_in.push_back(cur);
    Tensor pre = linear_forward(cur, model.fc[static_cast<std::size_t>(i)]);
    if (trace != nullptr) trace->fc_pre.push_back(pre);
    cur = relu_forward(pre);
    cur = apply_regularizer(model, cur, site++, training, rng, trace);
  }

  if (trace != nullptr) trace->fc_in.push_back(cur);
  Tensor logits = linear_forward(cur, model.fc.back());
  Matrix probs = softmax_probs(Matrix(logits.mat()));
  if (trace != nullptr) {
    trace->logits = logits.mat();
    trace->probs = probs;
  }
  return probs;
}

Matrix verifier_eval_batch(const VerifierModel& model, const Tensor& pairs) {
  // Evaluation never mutates the model: dropout is identity and batchnorm
  // reads only the running statistics.
  return verifier_forward_batch(const_cast<VerifierModel&>(model), pairs, false, nullptr, nullptr);
}

VerifierGrads verifier_backward(const VerifierModel& model, const VerifierTrace& trace,
                                const Matrix& grad_logits) {
  const VerifierConfig& c = model.config;
  VerifierGrads g;
  g.fc.resize(model.fc.size());
  if (c.regularizer == Regularizer::kBatchNorm) g.norms.resize(model.norms.size());

  auto reg_backward = [&](Index site, const Tensor& grad) -> Tensor {
    if (c.regularizer == Regularizer::kDropout) {
      return dropout_backward(trace.masks[static_cast<std::size_t>(site)], grad);
    }
    BatchNormGrads bg = batchnorm_backward(trace.reg_in[static_cast<std::size_t>(site)],
                                           model.norms[static_cast<std::size_t>(site)],
                                           trace.bn[static_cast<std::size_t>(site)], grad);
    g.norms[static_cast<std::size_t>(site)] = {Tensor(), bg.gamma, bg.beta};
    return std::move(bg.input);
  };

  LinearGrads last = linear_backward(trace.fc_in.back(), model.fc.back(),
                                     Tensor::from_matrix(grad_logits));
  Tensor cur = std::move(last.input);
  g.fc.back() = {Tensor(), std::move(last.weights), std::move(last.bias)};

  const Index hidden = c.hidden_fc_count();
  for (Index i = hidden - 1; i >= 0; --i) {
    const Index site = (c.first_layer == FirstLayer::kConv1x1) ? i + 1 : i;
    cur = reg_backward(site, cur);
    cur = relu_backward(trace.fc_pre[static_cast<std::size_t>(i)], cur);
    LinearGrads lg = linear_backward(trace.fc_in[static_cast<std::size_t>(i)],
                                     model.fc[static_cast<std::size_t>(i)], cur);
    cur = std::move(lg.input);
    g.fc[static_cast<std::size_t>(i)] = {Tensor(), std::move(lg.weights), std::move(lg.bias)};
  }

  if (c.first_layer == FirstLayer::kConv1x1) {
    cur = reg_backward(0, cur);
    const Index batch = trace.input.extent(0);
    Tensor grad3 = reshaped(cur, {batch, c.kernel_count, c.input_dim});
    grad3 = relu_backward(trace.conv_pre, grad3);
    Conv1x1Grads cg = conv1x1_backward(trace.input, *model.conv, grad3);
    g.input = std::move(cg.input);
    g.conv = Conv1x1Grads{Tensor(), std::move(cg.kernels), std::move(cg.bias)};
  } else {
    g.input = reshaped(cur, {trace.input.extent(0), 2, c.input_dim});
  }
  return g;
}

void verifier_sgd_step(VerifierModel& model, const VerifierGrads& grads, double lr) {
  if (model.conv.has_value()) {
    model.conv->kernels -= lr * grads.conv->kernels;
    model.conv->bias -= lr * grads.conv->bias;
  }
  for (std::size_t i = 0; i < model.fc.size(); ++i) {
    model.fc[i].weights -= lr * grads.fc[i].weights;
    model.fc[i].bias -= lr * grads.fc[i].bias;
  }
  for (std::size_t i = 0; i < model.norms.size(); ++i) {
    model.norms[i].gamma -= lr * grads.norms[i].gamma;
    model.norms[i].beta -= lr * grads.norms[i].beta;
  }
}

std::pair<double, double> verify_forward(const VerifierModel& model, const PairedFeature& pair) {
  if (pair.channels.rank() != 2 || pair.channels.extent(0) != 2 ||
      pair.channels.extent(1) != model.config.input_dim) {
    throw DimensionError("verify_forward: pair " + pair.channels.shape_str() +
                         " vs expected 2x" + std::to_string(model.config.input_dim));
  }
  Tensor batch({1, 2, pair.channels.extent(1)}, pair.channels.array());
  const Matrix probs = verifier_eval_batch(model, batch);
  return {probs(0, 0), probs(0, 1)};
}

bool verify_decision(const std::pair<double, double>& probs) {
  return probs.first > probs.second;
}

double verifier_train_step(VerifierModel& model, const PairBatch& batch, const LossConfig& loss,
                           double lr, RngStream& dropout_rng) {
  loss.validate();
  if (loss.kind == LossKind::kASoftmax) {
    throw ConfigError("verifier train: loss kind must be softmax or focal");
  }
  if (batch.pairs.empty()) throw TrainingError("verifier train: empty batch");
  if (lr < 0.0) throw ConfigError("verifier train: negative learning rate");

  const PairBatch* effective = &batch;
  PairBatch augmented;
  if (model.config.pair_order_augment) {
    augmented = batch;
    for (const auto& p : batch.pairs) augmented.pairs.push_back({p.b, p.a, p.same});
    effective = &augmented;
  }

  const Index n = effective->size();
  Tensor input = stack_batch(*effective, model.config.input_dim);
  VerifierTrace trace;
  verifier_forward_batch(model, input, true, &dropout_rng, &trace);

  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = effective->pairs[static_cast<std::size_t>(i)].same ? 0 : 1;
  }

  double loss_value = 0.0;
  Matrix grad_logits;
  if (loss.kind == LossKind::kSoftmax) {
    ScalarLoss ce = softmax_cross_entropy(trace.logits, labels);
    loss_value = ce.loss;
    grad_logits = std::move(ce.grad);
  } else {
    Vector pt(n), at(n);
    for (Index i = 0; i < n; ++i) {
      const bool same = effective->pairs[static_cast<std::size_t>(i)].same;
      // p_t <= 0 is a caller-side clamp per the loss contract
      pt[i] = std::max(focal_pt(trace.probs(i, 0), same), 1e-12);
      at[i] = focal_alpha_t(loss.alpha, same);
    }
    FocalLoss fl = focal_loss(pt, at, loss.gamma);
    loss_value = fl.loss;
    grad_logits = Matrix::Zero(n, 2);
    for (Index i = 0; i < n; ++i) {
      const bool same = effective->pairs[static_cast<std::size_t>(i)].same;
      const double p = trace.probs(i, 0);
      const double q = p * (1.0 - p);
      const double s = same ? 1.0 : -1.0;
      grad_logits(i, 0) = fl.grad[i] * s * q;
      grad_logits(i, 1) = -fl.grad[i] * s * q;
    }
  }

  if (!std::isfinite(loss_value)) {
    throw NumericError("verifier train: non-finite batch loss, step aborted");
  }
  VerifierGrads grads = verifier_backward(model, trace, grad_logits);
  verifier_sgd_step(model, grads, lr);
  return loss_value;
}

}  // namespace pmv
