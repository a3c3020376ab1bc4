// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_TENSOR_H_
#define AVFS_TENSOR_H_

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "avfs/common.h"

namespace avfs {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

// One dense node in the computation graph. Data is double, row-major.
// grad stays empty until backward touches the node.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;  // not produced by a recorded op
};

// Value-semantic handle to a shared node. Copies alias the same storage;
// ops always allocate fresh output nodes, so aliasing never mutates inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  std::vector<double>& vec() { return node_->data; }
  const std::vector<double>& vec() const { return node_->data; }

  // Scalar access for 1-element tensors.
  double item() const;

  // (row, col) accessor for 2-D tensors; test/debug convenience.
  double at(int r, int c) const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  bool all_finite() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<TensorNode> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<TensorNode> node_;
};

}  // namespace avfs

#endif  // AVFS_TENSOR_H_
