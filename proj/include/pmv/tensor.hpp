#pragma once

#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmv/types.hpp"

namespace pmv {

// Dense row-major value carrier with explicit shape metadata. Rank-2 and
// rank-3 views map onto Eigen matrices without copying; the leading extent is
// always the batch dimension.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(ArrayX::Zero(volume(shape_))) {}

  Tensor(std::vector<Index> shape, ArrayX data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != volume(shape_)) {
      throw DimensionError("tensor: shape volume " + std::to_string(volume(shape_)) +
                           " does not match data length " + std::to_string(data_.size()));
    }
  }

  static Tensor from_matrix(const Matrix& m) {
    Tensor t;
    t.shape_ = {m.rows(), m.cols()};
    t.data_ = Eigen::Map<const ArrayX>(m.data(), m.size());
    return t;
  }

  static Tensor from_vector(const Vector& v) {
    Tensor t;
    t.shape_ = {v.size()};
    t.data_ = v.array();
    return t;
  }

  std::span<const Index> shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  Index size() const { return data_.size(); }

  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }

  bool all_finite() const { return data_.isFinite().all(); }

  // Rows = leading extent, columns = product of the remaining extents.
  Eigen::Map<Matrix> mat() {
    return Eigen::Map<Matrix>(data_.data(), leading(), trailing());
  }
  Eigen::Map<const Matrix> mat() const {
    return Eigen::Map<const Matrix>(data_.data(), leading(), trailing());
  }

  // Rank-3 sample slice: channels x positions view of sample b.
  Eigen::Map<Matrix> slab(Index b) {
    const Index c = extent(1), d = extent(2);
    return Eigen::Map<Matrix>(data_.data() + b * c * d, c, d);
  }
  Eigen::Map<const Matrix> slab(Index b) const {
    const Index c = extent(1), d = extent(2);
    return Eigen::Map<const Matrix>(data_.data() + b * c * d, c, d);
  }

  std::string shape_str() const {
    std::string s;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s.empty() ? "scalar" : s;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Index leading() const { return shape_.empty() ? 0 : shape_.front(); }
  Index trailing() const {
    Index t = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) t *= shape_[i];
    return t;
  }

  static Index volume(const std::vector<Index>& shape) {
    Index v = 1;
    for (Index e : shape) v *= e;
    return shape.empty() ? 0 : v;
  }

  std::vector<Index> shape_;
  ArrayX data_;
};

// Same flat data under a new shape of equal volume.
inline Tensor reshaped(const Tensor& t, std::vector<Index> shape) {
  return Tensor(std::move(shape), t.array());
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace pmv
