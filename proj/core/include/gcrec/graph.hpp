#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcrec/param_store.hpp"
#include "gcrec/rng.hpp"
#include "gcrec/tensor.hpp"

namespace gcrec {

using NodeId = std::int32_t;

/// Reverse-mode tape over a fixed op set. Node creation order is a
/// topological order; backward sweeps it once in reverse. One graph per
/// training step per thread; graphs are not shared.
class Graph {
 public:
  explicit Graph(bool recording = true, DType dtype = DType::F64);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  DType dtype() const { return dtype_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  NodeId constant(Tensor v);
  NodeId leaf(Tensor v);  // grad-tracked leaf not backed by a store
  NodeId param(ParamStore& ps, const std::string& name);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward; zeros-shaped if the node is off the loss path.
  Tensor grad_of(NodeId id) const;

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId shift(NodeId a, double s);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId linear(NodeId x, NodeId w, NodeId b);  // y = x Wᵀ + b with W stored [out, in]
  NodeId concat(const std::vector<NodeId>& xs, int axis);
  NodeId slice(NodeId a, int axis, std::int64_t lo, std::int64_t hi);
  NodeId reshape(NodeId a, Shape shape);
  NodeId reduce_sum(NodeId a);
  NodeId reduce_mean(NodeId a);
  NodeId leaky_relu(NodeId a, double slope);
  NodeId sigmoid(NodeId a);
  NodeId exp(NodeId a);
  NodeId group_norm(NodeId a, int groups, double eps);
  NodeId softmax(NodeId a, int axis);
  NodeId gather(NodeId a, std::vector<std::int64_t> rows);
  /// out[m, :] = sum_j w[m*k + j] * a[idx[m*k + j], :]
  NodeId interp_rows(NodeId a, std::vector<std::int64_t> idx, std::vector<double> w, int k);
  NodeId max_pool(NodeId a, int axis);
  NodeId broadcast_rows(NodeId a, std::int64_t rows);  // [C] -> [rows, C]
  NodeId sinusoidal_embed(int dim, double t);
  NodeId dropout(NodeId a, double p, RngStream& rng, bool training);

  /// Mean squared error over all elements (batch-mean reduction).
  NodeId mse(NodeId a, NodeId b);

  void backward(NodeId loss);
  void reset();

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;  // allocated lazily during backward
    std::function<void()> backward;
    bool needs_grad = false;
    const Tensor& value() const { return external ? *external : owned; }
  };

  const Tensor& val(NodeId id) const;
  bool wants(NodeId id) const;
  Tensor& gbuf(NodeId id);
  bool has_grad(NodeId id) const;
  NodeId push(Tensor out, bool needs_grad, std::function<void()> bw);
  void check(NodeId id) const;
  void check_finite(const Tensor& t, const char* op) const;

  std::deque<Node> nodes_;
  std::vector<std::pair<NodeId, ParamStore::Entry*>> param_links_;
  std::unordered_map<const void*, NodeId> param_cache_;
  bool recording_;
  bool backward_done_ = false;
  DType dtype_;
};

}  // namespace gcrec
