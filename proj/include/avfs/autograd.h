// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_AUTOGRAD_H_
#define AVFS_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "avfs/tensor.h"

namespace avfs {

// Gradient sink for leaf parameters. When a backward pass is given a
// GradMap, leaf gradients accumulate here instead of in the shared nodes,
// which lets several worker threads run backward against the same
// parameters concurrently.
class GradMap {
 public:
  void add(const std::shared_ptr<TensorNode>& node, const double* g, int64_t n);
  void merge(const GradMap& other);    // element-wise add, other's keys
  void scale_all(double c);
  const std::vector<double>* find(const TensorNode* node) const;
  std::unordered_map<const TensorNode*, std::vector<double>>& entries() {
    return entries_;
  }

 private:
  std::unordered_map<const TensorNode*, std::vector<double>> entries_;
};

// Ordered record of executed primitive ops. Ops append entries in execution
// order, so the record is topologically sorted by construction; the reverse
// sweep in backward() visits each entry at most once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Active tape for this thread; nullptr when none is open.
  static Tape* current();
  // True when ops should record (a tape is open and not suppressed).
  static bool recording();

  void record(const char* op, std::shared_ptr<TensorNode> out,
              std::function<void(GradMap*)> backward);

  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Reverse-mode sweep from a scalar loss. Gradients of intermediate nodes
  // are released as soon as they are consumed; leaf gradients go to `sink`
  // when given, else accumulate in node->grad.
  void backward(const Tensor& loss, GradMap* sink = nullptr);

 private:
  struct Entry {
    const char* op;
    std::shared_ptr<TensorNode> out;
    std::function<void(GradMap*)> backward;
  };
  std::vector<Entry> entries_;
  Tape* prev_ = nullptr;
};

// Suppress recording within a scope (inference, frozen sub-networks).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
};

// Accumulate `g` into the gradient of `node`, routing leaf parameter
// gradients to the sink when one is active for the running backward pass.
void accumulate_grad(const std::shared_ptr<TensorNode>& node, const double* g,
                     int64_t n, GradMap* sink);

}  // namespace avfs

#endif  // AVFS_AUTOGRAD_H_
