#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sinceeg {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;

// Dense N-d array, row-major, contiguous. Storage is an Eigen vector so
// whole-tensor arithmetic goes through Eigen expressions.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  BasicTensor() = default;

  explicit BasicTensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Vector::Zero(count(shape_));
  }

  BasicTensor(std::initializer_list<Index> shape) : BasicTensor(std::vector<Index>(shape)) {}

  BasicTensor(std::vector<Index> shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != count(shape_)) {
      throw std::invalid_argument("tensor data length does not match shape " + shape_string());
    }
  }

  static BasicTensor zeros(std::vector<Index> shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(std::vector<Index> shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index i, Index j) { return data_[i * shape_[1] + j]; }
  Scalar operator()(Index i, Index j) const { return data_[i * shape_[1] + j]; }
  Scalar& operator()(Index i, Index j, Index k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  Scalar operator()(Index i, Index j, Index k) const { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  Scalar& operator()(Index i, Index j, Index k, Index l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  Scalar operator()(Index i, Index j, Index k, Index l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // View as a rows x cols row-major matrix; rows*cols must equal size().
  MatrixMap matrix(Index rows, Index cols) {
    if (rows * cols != size()) throw std::invalid_argument("matrix view does not cover tensor " + shape_string());
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    if (rows * cols != size()) throw std::invalid_argument("matrix view does not cover tensor " + shape_string());
    return ConstMatrixMap(data_.data(), rows, cols);
  }
  // Leading axis as rows, everything else flattened into columns.
  MatrixMap matrix() { return matrix(shape_.at(0), size() / shape_.at(0)); }
  ConstMatrixMap matrix() const { return matrix(shape_.at(0), size() / shape_.at(0)); }

  BasicTensor reshaped(std::vector<Index> shape) const {
    if (count(shape) != size()) {
      throw std::invalid_argument("cannot reshape " + shape_string() + " to " + shape_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  std::string shape_string() const { return shape_string(shape_); }

  static std::string shape_string(const std::vector<Index>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  static Index count(const std::vector<Index>& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const std::vector<Index>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
    for (Index d : shape) {
      if (d < 1) throw std::invalid_argument("tensor shape entries must be >= 1, got " + shape_string(shape));
    }
  }

  std::vector<Index> shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;

inline void require_shape(const Tensor& t, const std::vector<Index>& shape, const char* what) {
  if (t.shape() != shape) {
    throw std::invalid_argument(std::string(what) + ": expected shape " + Tensor::shape_string(shape) + ", got " +
                                t.shape_string());
  }
}

}  // namespace sinceeg
