// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/tensor.h"

#include <cmath>

namespace avfs {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  for (int d : shape)
    AVFS_CHECK(d > 0, "tensor dims must be positive, got ", shape_str(shape));
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data.assign(static_cast<size_t>(shape_numel(node_->shape)), fill);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  AVFS_CHECK(shape_numel(shape) == static_cast<int64_t>(data.size()),
             "data size ", data.size(), " does not match shape ",
             shape_str(shape));
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor({1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.normal() * stddev;
  return t;
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  AVFS_CHECK(numel() == 1, "item() on tensor of shape ", shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(int r, int c) const {
  AVFS_CHECK(ndim() == 2, "at(r,c) needs a 2-D tensor, got ",
             shape_str(shape()));
  return node_->data[static_cast<size_t>(r) * dim(1) + c];
}

Tensor& Tensor::set_requires_grad(bool v) {
  node_->requires_grad = v;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  AVFS_CHECK(!node_->grad.empty(), "grad not populated; run backward first");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

bool Tensor::all_finite() const {
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace avfs
