#include "gcrec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace gcrec {

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

// dst += s * src, elementwise
template <typename S>
void axpy(std::span<S> dst, std::span<const S> src, double s) {
  const S f = static_cast<S>(s);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += f * src[i];
}

// c += op(a) * op(b); supports nn, nt, tn
template <typename S>
void matmul_acc(std::span<S> c, std::span<const S> a, std::span<const S> b, std::int64_t m,
                std::int64_t k, std::int64_t n, bool ta, bool tb, double s = 1.0) {
  const S f = static_cast<S>(s);
  if (!ta && !tb) {
    for (std::int64_t i = 0; i < m; ++i) {
      S* crow = c.data() + i * n;
      const S* arow = a.data() + i * k;
      for (std::int64_t p = 0; p < k; ++p) {
        const S av = f * arow[p];
        const S* brow = b.data() + p * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (std::int64_t i = 0; i < m; ++i) {
      S* crow = c.data() + i * n;
      const S* arow = a.data() + i * k;
      for (std::int64_t j = 0; j < n; ++j) {
        const S* brow = b.data() + j * k;
        S acc = 0;
        for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += f * acc;
      }
    }
  } else if (ta && !tb) {
    for (std::int64_t p = 0; p < k; ++p) {
      const S* arow = a.data() + p * m;
      const S* brow = b.data() + p * n;
      for (std::int64_t i = 0; i < m; ++i) {
        const S av = f * arow[i];
        S* crow = c.data() + i * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    throw ShapeError("matmul: double-transpose form not supported");
  }
}

struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_shape(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (i < axis)
      r.outer *= s[static_cast<std::size_t>(i)];
    else if (i == axis)
      r.extent = s[static_cast<std::size_t>(i)];
    else
      r.inner *= s[static_cast<std::size_t>(i)];
  }
  return r;
}

int normalize_axis(const Shape& s, int axis, const char* op) {
  int r = static_cast<int>(s.size());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, op, "axis out of range for " + shape_str(s));
  return axis;
}

}  // namespace

Graph::Graph(bool recording, DType dtype) : recording_(recording), dtype_(dtype) {}

const Tensor& Graph::val(NodeId id) const {
  check(id);
  return nodes_[static_cast<std::size_t>(id)].value();
}

void Graph::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw Error("bad node id " + std::to_string(id));
}

void Graph::check_finite(const Tensor& t, const char* op) const {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite output");
}

bool Graph::wants(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

bool Graph::has_grad(NodeId id) const {
  return !nodes_[static_cast<std::size_t>(id)].grad.empty();
}

Tensor& Graph::gbuf(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value().shape(), n.value().dtype());
  return n.grad;
}

NodeId Graph::push(Tensor out, bool needs_grad, std::function<void()> bw) {
  Node n;
  n.owned = std::move(out);
  n.needs_grad = needs_grad && recording_;
  if (n.needs_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor v) { return push(std::move(v), false, nullptr); }

NodeId Graph::leaf(Tensor v) { return push(std::move(v), true, nullptr); }

NodeId Graph::param(ParamStore& ps, const std::string& name) {
  ParamStore::Entry& e = ps.entry(name);
  auto it = param_cache_.find(&e);
  if (it != param_cache_.end()) return it->second;
  Node n;
  n.external = &e.value;
  n.needs_grad = recording_;
  nodes_.push_back(std::move(n));
  NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  param_links_.emplace_back(id, &e);
  param_cache_.emplace(&e, id);
  return id;
}

const Tensor& Graph::value(NodeId id) const { return val(id); }

Tensor Graph::grad_of(NodeId id) const {
  check(id);
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) return Tensor::zeros(n.value().shape(), n.value().dtype());
  return n.grad;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor &A = val(a), &B = val(b);
  require(A.same_shape(B), "add", shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  require(A.dtype() == B.dtype(), "add", "dtype mismatch");
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto pb = B.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + pb[i];
  });
  check_finite(out, "add");
  return push(std::move(out), wants(a) || wants(b), [this, a, b, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      if (wants(a)) axpy<S>(gbuf(a).data<S>(), g.data<S>(), 1.0);
      if (wants(b)) axpy<S>(gbuf(b).data<S>(), g.data<S>(), 1.0);
    });
  });
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor &A = val(a), &B = val(b);
  require(A.same_shape(B), "sub", shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  require(A.dtype() == B.dtype(), "sub", "dtype mismatch");
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto pb = B.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] - pb[i];
  });
  check_finite(out, "sub");
  return push(std::move(out), wants(a) || wants(b), [this, a, b, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      if (wants(a)) axpy<S>(gbuf(a).data<S>(), g.data<S>(), 1.0);
      if (wants(b)) axpy<S>(gbuf(b).data<S>(), g.data<S>(), -1.0);
    });
  });
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor &A = val(a), &B = val(b);
  require(A.same_shape(B), "mul", shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  require(A.dtype() == B.dtype(), "mul", "dtype mismatch");
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto pb = B.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pb[i];
  });
  check_finite(out, "mul");
  return push(std::move(out), wants(a) || wants(b), [this, a, b, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      if (wants(a)) {
        auto pb = val(b).data<S>();
        auto ga = gbuf(a).data<S>();
        for (std::size_t i = 0; i < pg.size(); ++i) ga[i] += pg[i] * pb[i];
      }
      if (wants(b)) {
        auto pa = val(a).data<S>();
        auto gb = gbuf(b).data<S>();
        for (std::size_t i = 0; i < pg.size(); ++i) gb[i] += pg[i] * pa[i];
      }
    });
  });
}

NodeId Graph::scale(NodeId a, double s) {
  const Tensor& A = val(a);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    const S f = static_cast<S>(s);
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = f * pa[i];
  });
  check_finite(out, "scale");
  return push(std::move(out), wants(a), [this, a, s, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      if (wants(a)) axpy<S>(gbuf(a).data<S>(), g.data<S>(), s);
    });
  });
}

NodeId Graph::shift(NodeId a, double s) {
  const Tensor& A = val(a);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    const S f = static_cast<S>(s);
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + f;
  });
  check_finite(out, "shift");
  return push(std::move(out), wants(a), [this, a, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      if (wants(a)) axpy<S>(gbuf(a).data<S>(), g.data<S>(), 1.0);
    });
  });
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  const Tensor &A = val(a), &B = val(b);
  require(A.rank() == 2 && B.rank() == 2, "matmul", "expects rank-2 inputs");
  require(A.dtype() == B.dtype(), "matmul", "dtype mismatch");
  const std::int64_t m = trans_a ? A.dim(1) : A.dim(0);
  const std::int64_t k = trans_a ? A.dim(0) : A.dim(1);
  const std::int64_t kb = trans_b ? B.dim(1) : B.dim(0);
  const std::int64_t n = trans_b ? B.dim(0) : B.dim(1);
  require(k == kb, "matmul",
          "inner dims " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  Tensor out = Tensor::zeros({m, n}, A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    matmul_acc<S>(out.data<S>(), A.data<S>(), B.data<S>(), m, k, n, trans_a, trans_b);
  });
  check_finite(out, "matmul");
  return push(std::move(out), wants(a) || wants(b),
              [this, a, b, trans_a, trans_b, m, k, n, id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  if (wants(a)) {
                    auto ga = gbuf(a).data<S>();
                    auto pb = val(b).data<S>();
                    if (!trans_a) {
                      // gA += g · op(B)ᵀ
                      if (!trans_b)
                        matmul_acc<S>(ga, pg, pb, m, n, k, false, true);
                      else
                        matmul_acc<S>(ga, pg, pb, m, n, k, false, false);
                    } else {
                      // A is [k, m]: gA += op(B) · gᵀ, computed as (B, g) forms
                      if (!trans_b)
                        matmul_acc<S>(ga, pb, pg, k, n, m, false, true);
                      else
                        throw ShapeError("matmul backward: tt unsupported");
                    }
                  }
                  if (wants(b)) {
                    auto gb = gbuf(b).data<S>();
                    auto pa = val(a).data<S>();
                    if (!trans_b) {
                      // gB += op(A)ᵀ · g
                      if (!trans_a)
                        matmul_acc<S>(gb, pa, pg, k, m, n, true, false);
                      else
                        matmul_acc<S>(gb, pa, pg, k, m, n, false, false);
                    } else {
                      // B is [n, k]: gB += gᵀ · op(A)
                      if (!trans_a)
                        matmul_acc<S>(gb, pg, pa, n, m, k, true, false);
                      else
                        throw ShapeError("matmul backward: tt unsupported");
                    }
                  }
                });
              });
}

NodeId Graph::linear(NodeId x, NodeId w, NodeId b) {
  const Tensor &X = val(x), &W = val(w), &B = val(b);
  require(X.rank() == 2 && W.rank() == 2 && B.rank() == 1, "linear", "x[M,K], w[N,K], b[N]");
  require(X.dim(1) == W.dim(1), "linear",
          "in-features " + shape_str(X.shape()) + " vs " + shape_str(W.shape()));
  require(B.dim(0) == W.dim(0), "linear", "bias length vs out-features");
  require(X.dtype() == W.dtype() && X.dtype() == B.dtype(), "linear", "dtype mismatch");
  const std::int64_t m = X.dim(0), k = X.dim(1), n = W.dim(0);
  Tensor out = Tensor::zeros({m, n}, X.dtype());
  GCREC_DISPATCH(X.dtype(), {
    auto po = out.data<S>();
    auto pb = B.data<S>();
    for (std::int64_t i = 0; i < m; ++i)
      std::memcpy(po.data() + i * n, pb.data(), static_cast<std::size_t>(n) * sizeof(S));
    matmul_acc<S>(po, X.data<S>(), W.data<S>(), m, k, n, false, true);
  });
  check_finite(out, "linear");
  return push(std::move(out), wants(x) || wants(w) || wants(b),
              [this, x, w, b, m, k, n, id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  if (wants(x))
                    matmul_acc<S>(gbuf(x).data<S>(), pg, val(w).data<S>(), m, n, k, false, false);
                  if (wants(w))
                    matmul_acc<S>(gbuf(w).data<S>(), pg, val(x).data<S>(), n, m, k, true, false);
                  if (wants(b)) {
                    auto gb = gbuf(b).data<S>();
                    for (std::int64_t i = 0; i < m; ++i) {
                      const S* row = pg.data() + i * n;
                      for (std::int64_t j = 0; j < n; ++j) gb[static_cast<std::size_t>(j)] += row[j];
                    }
                  }
                });
              });
}

NodeId Graph::concat(const std::vector<NodeId>& xs, int axis) {
  require(!xs.empty(), "concat", "no inputs");
  const Tensor& first = val(xs[0]);
  int ax = normalize_axis(first.shape(), axis, "concat");
  Shape out_shape = first.shape();
  std::int64_t total = 0;
  bool any_grad = false;
  for (NodeId id : xs) {
    const Tensor& t = val(id);
    require(t.rank() == first.rank(), "concat", "rank mismatch");
    require(t.dtype() == first.dtype(), "concat", "dtype mismatch");
    for (int i = 0; i < t.rank(); ++i)
      if (i != ax)
        require(t.dim(i) == first.dim(i), "concat", "extent mismatch off the concat axis");
    total += t.dim(ax);
    any_grad = any_grad || wants(id);
  }
  out_shape[static_cast<std::size_t>(ax)] = total;
  Tensor out = Tensor::zeros(out_shape, first.dtype());
  AxisSplit os = split_shape(out_shape, ax);
  GCREC_DISPATCH(first.dtype(), {
    auto po = out.data<S>();
    std::int64_t offset = 0;
    for (NodeId id : xs) {
      const Tensor& t = val(id);
      AxisSplit ts = split_shape(t.shape(), ax);
      auto pt = t.data<S>();
      for (std::int64_t o = 0; o < ts.outer; ++o) {
        const S* src = pt.data() + o * ts.extent * ts.inner;
        S* dst = po.data() + (o * os.extent + offset) * os.inner;
        std::memcpy(dst, src, static_cast<std::size_t>(ts.extent * ts.inner) * sizeof(S));
      }
      offset += ts.extent;
    }
  });
  check_finite(out, "concat");
  std::vector<NodeId> inputs = xs;
  return push(std::move(out), any_grad, [this, inputs, ax, os, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      std::int64_t offset = 0;
      for (NodeId in : inputs) {
        AxisSplit ts = split_shape(val(in).shape(), ax);
        if (wants(in)) {
          auto gi = gbuf(in).data<S>();
          for (std::int64_t o = 0; o < ts.outer; ++o) {
            const S* src = pg.data() + (o * os.extent + offset) * os.inner;
            S* dst = gi.data() + o * ts.extent * ts.inner;
            for (std::int64_t i = 0; i < ts.extent * ts.inner; ++i) dst[i] += src[i];
          }
        }
        offset += ts.extent;
      }
    });
  });
}

NodeId Graph::slice(NodeId a, int axis, std::int64_t lo, std::int64_t hi) {
  const Tensor& A = val(a);
  int ax = normalize_axis(A.shape(), axis, "slice");
  require(lo >= 0 && hi > lo && hi <= A.dim(ax), "slice",
          "range [" + std::to_string(lo) + "," + std::to_string(hi) + ") of extent " +
              std::to_string(A.dim(ax)));
  Shape out_shape = A.shape();
  out_shape[static_cast<std::size_t>(ax)] = hi - lo;
  Tensor out = Tensor::zeros(out_shape, A.dtype());
  AxisSplit as = split_shape(A.shape(), ax);
  AxisSplit os = split_shape(out_shape, ax);
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t o = 0; o < as.outer; ++o) {
      const S* src = pa.data() + (o * as.extent + lo) * as.inner;
      S* dst = po.data() + o * os.extent * os.inner;
      std::memcpy(dst, src, static_cast<std::size_t>(os.extent * os.inner) * sizeof(S));
    }
  });
  return push(std::move(out), wants(a), [this, a, ax, lo, as, os, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto ga = gbuf(a).data<S>();
      for (std::int64_t o = 0; o < as.outer; ++o) {
        const S* src = pg.data() + o * os.extent * os.inner;
        S* dst = ga.data() + (o * as.extent + lo) * as.inner;
        for (std::int64_t i = 0; i < os.extent * os.inner; ++i) dst[i] += src[i];
      }
    });
  });
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  const Tensor& A = val(a);
  Tensor out = A.reshaped(std::move(shape));
  return push(std::move(out), wants(a), [this, a, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    GCREC_DISPATCH(g.dtype(), {
      if (wants(a)) axpy<S>(gbuf(a).data<S>(), g.data<S>(), 1.0);
    });
  });
}

NodeId Graph::reduce_sum(NodeId a) {
  const Tensor& A = val(a);
  double acc = 0.0;
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    for (std::size_t i = 0; i < pa.size(); ++i) acc += static_cast<double>(pa[i]);
  });
  Tensor out = Tensor::scalar(acc, A.dtype());
  check_finite(out, "reduce_sum");
  return push(std::move(out), wants(a), [this, a, id = nodes_.size()] {
    const double gs = nodes_[id].grad.at(0);
    if (!wants(a)) return;
    Tensor& ga = gbuf(a);
    GCREC_DISPATCH(ga.dtype(), {
      auto p = ga.data<S>();
      const S f = static_cast<S>(gs);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += f;
    });
  });
}

NodeId Graph::reduce_mean(NodeId a) {
  const Tensor& A = val(a);
  require(A.numel() > 0, "reduce_mean", "empty tensor");
  const double inv_n = 1.0 / static_cast<double>(A.numel());
  double acc = 0.0;
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    for (std::size_t i = 0; i < pa.size(); ++i) acc += static_cast<double>(pa[i]);
  });
  Tensor out = Tensor::scalar(acc * inv_n, A.dtype());
  check_finite(out, "reduce_mean");
  return push(std::move(out), wants(a), [this, a, inv_n, id = nodes_.size()] {
    const double gs = nodes_[id].grad.at(0) * inv_n;
    if (!wants(a)) return;
    Tensor& ga = gbuf(a);
    GCREC_DISPATCH(ga.dtype(), {
      auto p = ga.data<S>();
      const S f = static_cast<S>(gs);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += f;
    });
  });
}

NodeId Graph::leaky_relu(NodeId a, double slope) {
  const Tensor& A = val(a);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    const S sl = static_cast<S>(slope);
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] >= 0 ? pa[i] : sl * pa[i];
  });
  check_finite(out, "leaky_relu");
  return push(std::move(out), wants(a), [this, a, slope, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto pa = val(a).data<S>();
      auto ga = gbuf(a).data<S>();
      const S sl = static_cast<S>(slope);
      for (std::size_t i = 0; i < pg.size(); ++i) ga[i] += pa[i] >= 0 ? pg[i] : sl * pg[i];
    });
  });
}

NodeId Graph::sigmoid(NodeId a) {
  const Tensor& A = val(a);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < po.size(); ++i)
      po[i] = static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(pa[i]))));
  });
  check_finite(out, "sigmoid");
  return push(std::move(out), wants(a), [this, a, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto py = nodes_[id].value().data<S>();
      auto ga = gbuf(a).data<S>();
      for (std::size_t i = 0; i < pg.size(); ++i) ga[i] += pg[i] * py[i] * (S(1) - py[i]);
    });
  });
}

NodeId Graph::exp(NodeId a) {
  const Tensor& A = val(a);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = static_cast<S>(std::exp(static_cast<double>(pa[i])));
  });
  check_finite(out, "exp");
  return push(std::move(out), wants(a), [this, a, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto py = nodes_[id].value().data<S>();
      auto ga = gbuf(a).data<S>();
      for (std::size_t i = 0; i < pg.size(); ++i) ga[i] += pg[i] * py[i];
    });
  });
}

NodeId Graph::group_norm(NodeId a, int groups, double eps) {
  const Tensor& A = val(a);
  require(A.rank() >= 1, "group_norm", "needs at least one axis");
  const std::int64_t channels = A.dim(A.rank() - 1);
  require(groups >= 1 && channels % groups == 0, "group_norm",
          std::to_string(channels) + " channels not divisible into " + std::to_string(groups) +
              " groups");
  require(eps > 0, "group_norm", "eps must be positive");
  const std::int64_t spatial = A.numel() / channels;
  const std::int64_t cg = channels / groups;
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  std::vector<double> inv_std(static_cast<std::size_t>(groups));
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t gidx = 0; gidx < groups; ++gidx) {
      const std::int64_t c0 = gidx * cg;
      double mean = 0.0;
      for (std::int64_t s = 0; s < spatial; ++s)
        for (std::int64_t c = 0; c < cg; ++c) mean += static_cast<double>(pa[s * channels + c0 + c]);
      const double n = static_cast<double>(spatial * cg);
      mean /= n;
      double var = 0.0;
      for (std::int64_t s = 0; s < spatial; ++s)
        for (std::int64_t c = 0; c < cg; ++c) {
          const double d = static_cast<double>(pa[s * channels + c0 + c]) - mean;
          var += d * d;
        }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(gidx)] = inv;
      for (std::int64_t s = 0; s < spatial; ++s)
        for (std::int64_t c = 0; c < cg; ++c) {
          const std::int64_t i = s * channels + c0 + c;
          po[i] = static_cast<S>((static_cast<double>(pa[i]) - mean) * inv);
        }
    }
  });
  check_finite(out, "group_norm");
  return push(std::move(out), wants(a),
              [this, a, groups, spatial, channels, cg, inv_std, id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                if (!wants(a)) return;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  auto py = nodes_[id].value().data<S>();  // normalized values
                  auto ga = gbuf(a).data<S>();
                  const double n = static_cast<double>(spatial * cg);
                  for (std::int64_t gidx = 0; gidx < groups; ++gidx) {
                    const std::int64_t c0 = gidx * cg;
                    double sum_g = 0.0, sum_gy = 0.0;
                    for (std::int64_t s = 0; s < spatial; ++s)
                      for (std::int64_t c = 0; c < cg; ++c) {
                        const std::int64_t i = s * channels + c0 + c;
                        sum_g += static_cast<double>(pg[i]);
                        sum_gy += static_cast<double>(pg[i]) * static_cast<double>(py[i]);
                      }
                    const double mg = sum_g / n, mgy = sum_gy / n;
                    const double inv = inv_std[static_cast<std::size_t>(gidx)];
                    for (std::int64_t s = 0; s < spatial; ++s)
                      for (std::int64_t c = 0; c < cg; ++c) {
                        const std::int64_t i = s * channels + c0 + c;
                        ga[i] += static_cast<S>(
                            inv * (static_cast<double>(pg[i]) - mg -
                                   static_cast<double>(py[i]) * mgy));
                      }
                  }
                });
              });
}

NodeId Graph::softmax(NodeId a, int axis) {
  const Tensor& A = val(a);
  int ax = normalize_axis(A.shape(), axis, "softmax");
  AxisSplit sp = split_shape(A.shape(), ax);
  Tensor out = Tensor::zeros(A.shape(), A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t o = 0; o < sp.outer; ++o)
      for (std::int64_t in = 0; in < sp.inner; ++in) {
        const std::int64_t base = o * sp.extent * sp.inner + in;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t e = 0; e < sp.extent; ++e)
          mx = std::max(mx, static_cast<double>(pa[base + e * sp.inner]));
        double z = 0.0;
        for (std::int64_t e = 0; e < sp.extent; ++e)
          z += std::exp(static_cast<double>(pa[base + e * sp.inner]) - mx);
        for (std::int64_t e = 0; e < sp.extent; ++e)
          po[base + e * sp.inner] =
              static_cast<S>(std::exp(static_cast<double>(pa[base + e * sp.inner]) - mx) / z);
      }
  });
  check_finite(out, "softmax");
  return push(std::move(out), wants(a), [this, a, sp, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto py = nodes_[id].value().data<S>();
      auto ga = gbuf(a).data<S>();
      for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t in = 0; in < sp.inner; ++in) {
          const std::int64_t base = o * sp.extent * sp.inner + in;
          double dot = 0.0;
          for (std::int64_t e = 0; e < sp.extent; ++e) {
            const std::int64_t i = base + e * sp.inner;
            dot += static_cast<double>(pg[i]) * static_cast<double>(py[i]);
          }
          for (std::int64_t e = 0; e < sp.extent; ++e) {
            const std::int64_t i = base + e * sp.inner;
            ga[i] += static_cast<S>(static_cast<double>(py[i]) *
                                    (static_cast<double>(pg[i]) - dot));
          }
        }
    });
  });
}

NodeId Graph::gather(NodeId a, std::vector<std::int64_t> rows) {
  const Tensor& A = val(a);
  require(A.rank() >= 1, "gather", "needs at least one axis");
  const std::int64_t r = A.dim(0);
  const std::int64_t inner = A.numel() / std::max<std::int64_t>(r, 1);
  for (auto i : rows) require(i >= 0 && i < r, "gather", "index out of range");
  Shape out_shape = A.shape();
  out_shape[0] = static_cast<std::int64_t>(rows.size());
  Tensor out = Tensor::zeros(out_shape, A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::memcpy(po.data() + static_cast<std::int64_t>(i) * inner, pa.data() + rows[i] * inner,
                  static_cast<std::size_t>(inner) * sizeof(S));
  });
  return push(std::move(out), wants(a),
              [this, a, rows = std::move(rows), inner, id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                if (!wants(a)) return;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  auto ga = gbuf(a).data<S>();
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                    const S* src = pg.data() + static_cast<std::int64_t>(i) * inner;
                    S* dst = ga.data() + rows[i] * inner;
                    for (std::int64_t j = 0; j < inner; ++j) dst[j] += src[j];
                  }
                });
              });
}

NodeId Graph::interp_rows(NodeId a, std::vector<std::int64_t> idx, std::vector<double> w, int k) {
  const Tensor& A = val(a);
  require(A.rank() == 2, "interp_rows", "expects [rows, channels]");
  require(k >= 1 && idx.size() == w.size() && idx.size() % static_cast<std::size_t>(k) == 0,
          "interp_rows", "index/weight layout");
  const std::int64_t r = A.dim(0), c = A.dim(1);
  const std::int64_t m = static_cast<std::int64_t>(idx.size()) / k;
  for (auto i : idx) require(i >= 0 && i < r, "interp_rows", "index out of range");
  Tensor out = Tensor::zeros({m, c}, A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t i = 0; i < m; ++i) {
      S* dst = po.data() + i * c;
      for (int j = 0; j < k; ++j) {
        const std::size_t slot = static_cast<std::size_t>(i * k + j);
        const S* src = pa.data() + idx[slot] * c;
        const S wv = static_cast<S>(w[slot]);
        for (std::int64_t q = 0; q < c; ++q) dst[q] += wv * src[q];
      }
    }
  });
  check_finite(out, "interp_rows");
  return push(std::move(out), wants(a),
              [this, a, idx = std::move(idx), w = std::move(w), k, c, id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                if (!wants(a)) return;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  auto ga = gbuf(a).data<S>();
                  const std::int64_t m = static_cast<std::int64_t>(idx.size()) / k;
                  for (std::int64_t i = 0; i < m; ++i) {
                    const S* src = pg.data() + i * c;
                    for (int j = 0; j < k; ++j) {
                      const std::size_t slot = static_cast<std::size_t>(i * k + j);
                      S* dst = ga.data() + idx[slot] * c;
                      const S wv = static_cast<S>(w[slot]);
                      for (std::int64_t q = 0; q < c; ++q) dst[q] += wv * src[q];
                    }
                  }
                });
              });
}

NodeId Graph::max_pool(NodeId a, int axis) {
  const Tensor& A = val(a);
  int ax = normalize_axis(A.shape(), axis, "max_pool");
  AxisSplit sp = split_shape(A.shape(), ax);
  require(sp.extent >= 1, "max_pool", "empty pooling axis");
  Shape out_shape;
  for (int i = 0; i < A.rank(); ++i)
    if (i != ax) out_shape.push_back(A.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape, A.dtype());
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(sp.outer * sp.inner));
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t o = 0; o < sp.outer; ++o)
      for (std::int64_t in = 0; in < sp.inner; ++in) {
        const std::int64_t base = o * sp.extent * sp.inner + in;
        std::int64_t best = 0;
        S bv = pa[base];
        for (std::int64_t e = 1; e < sp.extent; ++e) {
          const S v = pa[base + e * sp.inner];
          if (v > bv) {
            bv = v;
            best = e;
          }
        }
        po[o * sp.inner + in] = bv;
        argmax[static_cast<std::size_t>(o * sp.inner + in)] = base + best * sp.inner;
      }
  });
  return push(std::move(out), wants(a),
              [this, a, argmax = std::move(argmax), id = nodes_.size()] {
                const Tensor& g = nodes_[id].grad;
                if (!wants(a)) return;
                GCREC_DISPATCH(g.dtype(), {
                  auto pg = g.data<S>();
                  auto ga = gbuf(a).data<S>();
                  for (std::size_t i = 0; i < argmax.size(); ++i)
                    ga[static_cast<std::size_t>(argmax[i])] += pg[i];
                });
              });
}

NodeId Graph::broadcast_rows(NodeId a, std::int64_t rows) {
  const Tensor& A = val(a);
  require(A.rank() == 1, "broadcast_rows", "expects a vector");
  require(rows >= 1, "broadcast_rows", "row count must be positive");
  const std::int64_t c = A.dim(0);
  Tensor out = Tensor::zeros({rows, c}, A.dtype());
  GCREC_DISPATCH(A.dtype(), {
    auto pa = A.data<S>();
    auto po = out.data<S>();
    for (std::int64_t i = 0; i < rows; ++i)
      std::memcpy(po.data() + i * c, pa.data(), static_cast<std::size_t>(c) * sizeof(S));
  });
  return push(std::move(out), wants(a), [this, a, rows, c, id = nodes_.size()] {
    const Tensor& g = nodes_[id].grad;
    if (!wants(a)) return;
    GCREC_DISPATCH(g.dtype(), {
      auto pg = g.data<S>();
      auto ga = gbuf(a).data<S>();
      for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < c; ++j) ga[static_cast<std::size_t>(j)] += pg[i * c + j];
    });
  });
}

NodeId Graph::sinusoidal_embed(int dim, double t) {
  require(dim >= 2 && dim % 2 == 0, "sinusoidal_embed", "dim must be even and >= 2");
  const int half = dim / 2;
  Tensor out = Tensor::zeros({dim}, dtype_);
  for (int i = 0; i < half; ++i) {
    const double freq =
        half > 1 ? std::exp(-std::log(10000.0) * static_cast<double>(i) / (half - 1)) : 1.0;
    out.set(i, std::sin(t * freq));
    out.set(half + i, std::cos(t * freq));
  }
  return constant(std::move(out));
}

NodeId Graph::dropout(NodeId a, double p, RngStream& rng, bool training) {
  require(p >= 0.0 && p < 1.0, "dropout", "p must be in [0, 1)");
  if (!training || p == 0.0) return a;
  const Tensor& A = val(a);
  Tensor mask = Tensor::zeros(A.shape(), A.dtype());
  const double keep = 1.0 - p;
  for (std::int64_t i = 0; i < mask.numel(); ++i)
    mask.set(i, rng.uniform() < p ? 0.0 : 1.0 / keep);
  NodeId m = constant(std::move(mask));
  return mul(a, m);
}

NodeId Graph::mse(NodeId a, NodeId b) {
  NodeId d = sub(a, b);
  return reduce_mean(mul(d, d));
}

void Graph::backward(NodeId loss) {
  if (!recording_) throw Error("backward: graph is not recording");
  if (backward_done_) throw Error("backward: called twice without reset");
  check(loss);
  const Tensor& lv = val(loss);
  if (lv.numel() != 1) throw ShapeError("backward: loss must be scalar");
  backward_done_ = true;
  gbuf(loss).fill(1.0);
  for (std::int64_t i = loss; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && !n.grad.empty()) n.backward();
  }
  for (auto& [id, entry] : param_links_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    GCREC_DISPATCH(n.grad.dtype(), {
      axpy<S>(entry->grad.data<S>(), n.grad.data<S>(), 1.0);
    });
  }
}

void Graph::reset() {
  nodes_.clear();
  param_links_.clear();
  param_cache_.clear();
  backward_done_ = false;
}

}  // namespace gcrec
