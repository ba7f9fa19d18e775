#ifndef TIDE_TENSOR_HPP
#define TIDE_TENSOR_HPP

#include <Eigen/Core>
#include <initializer_list>
#include <string>
#include <vector>

namespace tide {

using Index = Eigen::Index;
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// Dense double tensor: a shape plus flat row-major storage.
///
/// Rank 1 and rank 2 cover the whole pipeline; higher ranks only carry data
/// between reshapes (per-window covariate stacks). Math runs through Eigen
/// views over the flat buffer, so no arithmetic is reimplemented here.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-initialised tensor of the given shape.
  explicit Tensor(std::vector<Index> shape);

  Tensor(std::vector<Index> shape, std::vector<double> values);

  static Tensor zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<Index> shape, double value);
  static Tensor scalar(double value);

  /// Rank-2 tensor from row literals; rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  /// Rank-1 tensor from a literal.
  static Tensor vector(std::initializer_list<double> values);
  static Tensor from_vector(const Eigen::VectorXd& v);

  /// Rank-2 tensor copying any Eigen matrix expression.
  static Tensor from_matrix(const Eigen::Ref<const MatrixRM>& m);

  const std::vector<Index>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int i) const;
  Index numel() const { return data_.size(); }

  /// Leading/trailing dimension of a rank-2 tensor.
  Index rows() const;
  Index cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  /// Bounds-checked rank-2 element access.
  double& at(Index r, Index c);
  double at(Index r, Index c) const;

  /// Whole storage viewed as a column vector.
  VecMap flat() { return VecMap(data_.data(), data_.size()); }
  ConstVecMap flat() const { return ConstVecMap(data_.data(), data_.size()); }

  /// Rank-2 view; requires rank() == 2.
  MatMap mat();
  ConstMatMap mat() const;

  /// Reinterpret the flat buffer as an r-by-c matrix (r*c == numel()).
  MatMap as_mat(Index r, Index c);
  ConstMatMap as_mat(Index r, Index c) const;

  /// Copy with a new shape over the same element order.
  Tensor reshaped(std::vector<Index> new_shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void set_zero() { data_.setZero(); }

  /// "[r, c]" rendering for error messages.
  std::string shape_str() const;
  static std::string shape_str(const std::vector<Index>& shape);

 private:
  std::vector<Index> shape_;
  Eigen::VectorXd data_;
};

/// Throws ShapeError naming both shapes when they differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace tide

#endif  // TIDE_TENSOR_HPP
