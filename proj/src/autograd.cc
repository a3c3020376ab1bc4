// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/autograd.h"

#include <algorithm>

namespace avfs {

namespace {
thread_local Tape* g_current_tape = nullptr;
thread_local int g_no_grad_depth = 0;
}  // namespace

void GradMap::add(const std::shared_ptr<TensorNode>& node, const double* g,
                  int64_t n) {
  auto& buf = entries_[node.get()];
  if (buf.empty()) buf.assign(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] += g[i];
}

void GradMap::merge(const GradMap& other) {
  for (const auto& [node, g] : other.entries_) {
    auto& buf = entries_[node];
    if (buf.empty()) {
      buf = g;
    } else {
      for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
  }
}

void GradMap::scale_all(double c) {
  for (auto& [node, g] : entries_)
    for (auto& v : g) v *= c;
}

const std::vector<double>* GradMap::find(const TensorNode* node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? nullptr : &it->second;
}

Tape::Tape() {
  prev_ = g_current_tape;
  g_current_tape = this;
}

Tape::~Tape() { g_current_tape = prev_; }

Tape* Tape::current() { return g_current_tape; }

bool Tape::recording() {
  return g_current_tape != nullptr && g_no_grad_depth == 0;
}

void Tape::record(const char* op, std::shared_ptr<TensorNode> out,
                  std::function<void(GradMap*)> backward) {
  entries_.push_back({op, std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss, GradMap* sink) {
  AVFS_CHECK(loss.defined() && loss.numel() == 1,
             "backward needs a scalar loss, got ",
             loss.defined() ? shape_str(loss.shape()) : "undefined");
  const TensorNode* loss_node = loss.node().get();
  // Find the entry that produced the loss; a leaf loss has no producer and
  // the sweep is a no-op.
  int64_t start = -1;
  for (int64_t i = static_cast<int64_t>(entries_.size()) - 1; i >= 0; --i) {
    if (entries_[static_cast<size_t>(i)].out.get() == loss_node) {
      start = i;
      break;
    }
  }
  loss.node()->grad.assign(1, 1.0);
  for (int64_t i = start; i >= 0; --i) {
    auto& e = entries_[static_cast<size_t>(i)];
    if (e.out->grad.empty()) continue;  // not reachable from the loss
    e.backward(sink);
    // The producer has consumed this gradient; nothing upstream reads it.
    e.out->grad.clear();
    e.out->grad.shrink_to_fit();
  }
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void accumulate_grad(const std::shared_ptr<TensorNode>& node, const double* g,
                     int64_t n, GradMap* sink) {
  if (!node->requires_grad) return;
  if (sink != nullptr && node->leaf) {
    sink->add(node, g, n);
    return;
  }
  auto& buf = node->grad;
  if (buf.empty()) buf.assign(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] += g[i];
}

}  // namespace avfs
