#pragma once

#include <cmath>

#include "pmv/tensor.hpp"

namespace pmv {

// Central-difference check of an analytic gradient. Returns the maximum over
// coordinates of |numeric - analytic| / max(|numeric|, |analytic|, 1e-8).
// `fn` is any scalar-valued callable over the flat coordinates of `point`.
template <typename Fn>
double finite_difference_check(Fn&& fn, const Tensor& point, const Tensor& analytic_grad,
                               double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_difference_check: eps must be positive");
  require_same_shape(point, analytic_grad, "finite_difference_check");

  Tensor probe = point;
  double worst = 0.0;
  for (Index i = 0; i < point.size(); ++i) {
    const double original = probe.array()[i];
    probe.array()[i] = original + eps;
    const double above = fn(static_cast<const Tensor&>(probe));
    probe.array()[i] = original - eps;
    const double below = fn(static_cast<const Tensor&>(probe));
    probe.array()[i] = original;
    if (!std::isfinite(above) || !std::isfinite(below)) {
      throw NumericError("finite_difference_check: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    const double numeric = (above - below) / (2.0 * eps);
    const double analytic = analytic_grad.array()[i];
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  }
  return worst;
}

template <typename Fn>
double finite_difference_check(Fn&& fn, const ArrayX& point, const ArrayX& grad, double eps) {
  auto wrap = [&fn](const Tensor& t) { return fn(t.array()); };
  return finite_difference_check(wrap, Tensor({point.size()}, point), Tensor({grad.size()}, grad),
                                 eps);
}

}  // namespace pmv
