#include "tide/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tide/errors.hpp"

namespace tide {

namespace {

Index shape_numel(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + Tensor::shape_str(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
  data_ = Eigen::VectorXd::Zero(shape_numel(shape_));
}

Tensor::Tensor(std::vector<Index> shape, std::vector<double> values)
    : shape_(std::move(shape)) {
  const Index n = shape_numel(shape_);
  if (static_cast<Index>(values.size()) != n) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not fill shape " + shape_str(shape_));
  }
  data_ = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
}

Tensor Tensor::full(std::vector<Index> shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t({1});
  t.data_[0] = value;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
  Tensor t({r, c});
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c) {
      throw ShapeError("ragged row literal: expected " + std::to_string(c) +
                       " columns, got " + std::to_string(row.size()));
    }
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  Tensor t({static_cast<Index>(values.size())});
  Index i = 0;
  for (double v : values) t.data_[i++] = v;
  return t;
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) {
  Tensor t({v.size()});
  t.data_ = v;
  return t;
}

Tensor Tensor::from_matrix(const Eigen::Ref<const MatrixRM>& m) {
  Tensor t({m.rows(), m.cols()});
  t.as_mat(m.rows(), m.cols()) = m;
  return t;
}

Index Tensor::dim(int i) const {
  if (i < 0 || i >= rank()) {
    throw ShapeError("dim " + std::to_string(i) + " out of range for shape " + shape_str());
  }
  return shape_[static_cast<std::size_t>(i)];
}

Index Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() requires rank 2, shape is " + shape_str());
  return shape_[0];
}

Index Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() requires rank 2, shape is " + shape_str());
  return shape_[1];
}

double& Tensor::at(Index r, Index c) {
  if (rank() != 2 || r < 0 || r >= shape_[0] || c < 0 || c >= shape_[1]) {
    throw ShapeError("at(" + std::to_string(r) + ", " + std::to_string(c) +
                     ") out of range for shape " + shape_str());
  }
  return data_[r * shape_[1] + c];
}

double Tensor::at(Index r, Index c) const {
  return const_cast<Tensor*>(this)->at(r, c);
}

MatMap Tensor::mat() {
  if (rank() != 2) throw ShapeError("mat() requires rank 2, shape is " + shape_str());
  return MatMap(data_.data(), shape_[0], shape_[1]);
}

ConstMatMap Tensor::mat() const {
  if (rank() != 2) throw ShapeError("mat() requires rank 2, shape is " + shape_str());
  return ConstMatMap(data_.data(), shape_[0], shape_[1]);
}

MatMap Tensor::as_mat(Index r, Index c) {
  if (r * c != numel()) {
    throw ShapeError("as_mat(" + std::to_string(r) + ", " + std::to_string(c) +
                     ") does not cover shape " + shape_str());
  }
  return MatMap(data_.data(), r, c);
}

ConstMatMap Tensor::as_mat(Index r, Index c) const {
  if (r * c != numel()) {
    throw ShapeError("as_mat(" + std::to_string(r) + ", " + std::to_string(c) +
                     ") does not cover shape " + shape_str());
  }
  return ConstMatMap(data_.data(), r, c);
}

Tensor Tensor::reshaped(std::vector<Index> new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("reshape from " + shape_str() + " to " + shape_str(new_shape) +
                     " changes element count");
  }
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

bool Tensor::all_finite() const { return data_.allFinite(); }

std::string Tensor::shape_str() const { return shape_str(shape_); }

std::string Tensor::shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + a.shape_str() +
                     " does not match shape " + b.shape_str());
  }
}

}  // namespace tide
