#include "gcrec/blocks.hpp"

#include <cmath>

namespace gcrec {

int NetConfig::scaled(int dim) const {
  return std::max(1, static_cast<int>(std::lround(dim * width)));
}

int pick_groups(int channels, int want) {
  for (int g = std::min(channels, want); g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

namespace {

Tensor kaiming_uniform(int out, int in, double scale, RngStream& rng, const NetConfig& cfg) {
  const double gain = std::sqrt(2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope));
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(in)) * scale;
  return rng.uniform_tensor({out, in}, -bound, bound, cfg.dtype);
}

}  // namespace

LinearLayer::LinearLayer(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                         RngStream& rng, const NetConfig& cfg, bool zero_init,
                         double weight_scale)
    : w(prefix + ".w"), b(prefix + ".b"), in(in_dim), out(out_dim) {
  ps.add(w, zero_init ? Tensor::zeros({out_dim, in_dim}, cfg.dtype)
                      : kaiming_uniform(out_dim, in_dim, weight_scale, rng, cfg));
  ps.add(b, Tensor::zeros({out_dim}, cfg.dtype));
}

NodeId LinearLayer::forward(Graph& g, ParamStore& ps, NodeId x) const {
  return g.linear(x, g.param(ps, w), g.param(ps, b));
}

AdaGnLayer::AdaGnLayer(ParamStore& ps, const std::string& prefix, int channels_, int cond_dim,
                       RngStream& rng, const NetConfig& cfg)
    : proj(ps, prefix + ".proj", cond_dim, 2 * channels_, rng, cfg, false, cfg.adagn_init_scale),
      channels(channels_),
      groups(pick_groups(channels_, cfg.gn_groups)) {}

NodeId AdaGnLayer::forward(Graph& g, ParamStore& ps, NodeId x, NodeId cond) const {
  NodeId gn = g.group_norm(x, groups, eps);
  NodeId fb = proj.forward(g, ps, g.reshape(cond, {1, g.value(cond).numel()}));
  NodeId factor = g.reshape(g.slice(fb, 1, 0, channels), {channels});
  NodeId bias = g.reshape(g.slice(fb, 1, channels, 2 * channels), {channels});
  const std::int64_t rows = g.value(x).dim(0);
  NodeId scaled = g.mul(gn, g.broadcast_rows(g.shift(factor, 1.0), rows));
  return g.add(scaled, g.broadcast_rows(bias, rows));
}

AttentionLayer::AttentionLayer(ParamStore& ps, const std::string& prefix, int channels,
                               int attn_dim, RngStream& rng, const NetConfig& cfg)
    : wq(ps, prefix + ".wq", channels, attn_dim, rng, cfg),
      wk(ps, prefix + ".wk", channels, attn_dim, rng, cfg),
      wv(ps, prefix + ".wv", channels, attn_dim, rng, cfg),
      wo(ps, prefix + ".wo", attn_dim, channels, rng, cfg),
      dim(attn_dim) {}

NodeId AttentionLayer::forward(Graph& g, ParamStore& ps, NodeId x) const {
  NodeId q = wq.forward(g, ps, x);
  NodeId k = wk.forward(g, ps, x);
  NodeId v = wv.forward(g, ps, x);
  NodeId scores = g.scale(g.matmul(q, k, false, true), 1.0 / std::sqrt(static_cast<double>(dim)));
  NodeId attn = g.softmax(scores, 1);
  return g.add(x, wo.forward(g, ps, g.matmul(attn, v)));
}

ResSeBlock::ResSeBlock(ParamStore& ps, const std::string& prefix, int channels, RngStream& rng,
                       const NetConfig& cfg)
    : fc1(ps, prefix + ".fc1", channels, channels, rng, cfg),
      fc2(ps, prefix + ".fc2", channels, channels, rng, cfg),
      se1(ps, prefix + ".se1", channels, std::max(4, channels / 8), rng, cfg),
      se2(ps, prefix + ".se2", std::max(4, channels / 8), channels, rng, cfg),
      slope(cfg.leaky_slope),
      dropout_p(cfg.dropout_p) {}

NodeId ResSeBlock::forward(Graph& g, ParamStore& ps, NodeId x, bool training,
                           RngStream* drop_rng) const {
  NodeId h = g.leaky_relu(fc1.forward(g, ps, x), slope);
  if (training && drop_rng) h = g.dropout(h, dropout_p, *drop_rng, true);
  h = fc2.forward(g, ps, h);
  NodeId gate = g.sigmoid(se2.forward(g, ps, g.leaky_relu(se1.forward(g, ps, h), slope)));
  return g.add(x, g.mul(h, gate));
}

SaBlock::SaBlock(ParamStore& ps, const std::string& prefix, const SaSpec& s, int in_channels_,
                 int cond_dim, RngStream& rng, const NetConfig& cfg)
    : spec(s), in_channels(in_channels_) {
  int c = in_channels_ + 3;  // relative coordinates prepended
  for (std::size_t i = 0; i < s.mlp.size(); ++i) {
    mlp.emplace_back(ps, prefix + ".mlp" + std::to_string(i), c, s.mlp[i], rng, cfg);
    if (cond_dim > 0)
      norms.emplace_back(ps, prefix + ".ada" + std::to_string(i), s.mlp[i], cond_dim, rng, cfg);
    c = s.mlp[i];
  }
  out_channels = c;
  if (s.attention > 0)
    attn = AttentionLayer(ps, prefix + ".attn", out_channels, s.attention, rng, cfg);
}

SaBlock::Result SaBlock::forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& positions,
                                 NodeId features, NodeId cond, const NetConfig& cfg) const {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  const std::int64_t m = std::min<std::int64_t>(spec.centers, n);
  const int k = spec.neighbors;

  auto center_idx = fps(positions, m);
  KdIndex index(positions);
  std::vector<Vec3> centers(static_cast<std::size_t>(m));
  std::vector<std::int64_t> group(static_cast<std::size_t>(m * k));
  Tensor rel = Tensor::zeros({m * k, 3}, cfg.dtype);
  for (std::int64_t i = 0; i < m; ++i) {
    const Vec3& c = positions[static_cast<std::size_t>(center_idx[static_cast<std::size_t>(i)])];
    centers[static_cast<std::size_t>(i)] = c;
    BallQueryResult bq = index.ball_query(c, spec.radius, k);
    for (int j = 0; j < k; ++j) {
      const std::int64_t src = bq.indices[static_cast<std::size_t>(j)];
      group[static_cast<std::size_t>(i * k + j)] = src;
      const Vec3 d = positions[static_cast<std::size_t>(src)] - c;
      rel.set((i * k + j) * 3 + 0, d.x);
      rel.set((i * k + j) * 3 + 1, d.y);
      rel.set((i * k + j) * 3 + 2, d.z);
    }
  }

  NodeId gathered = g.gather(features, group);              // [m*k, C]
  NodeId h = g.concat({g.constant(std::move(rel)), gathered}, 1);  // [m*k, 3+C]
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    h = mlp[i].forward(g, ps, h);
    if (!norms.empty()) h = norms[i].forward(g, ps, h, cond);
    h = g.leaky_relu(h, cfg.leaky_slope);
  }
  h = g.reshape(h, {m, k, out_channels});
  h = g.max_pool(h, 1);  // [m, C_out]
  if (spec.attention > 0) h = attn.forward(g, ps, h);

  Result res;
  res.positions = std::move(centers);
  res.features = h;
  return res;
}

FpBlock::FpBlock(ParamStore& ps, const std::string& prefix, const FpSpec& s, int coarse_channels,
                 int skip_channels, int cond_dim, RngStream& rng, const NetConfig& cfg)
    : spec(s) {
  int c = coarse_channels + skip_channels;
  for (std::size_t i = 0; i < s.mlp.size(); ++i) {
    mlp.emplace_back(ps, prefix + ".mlp" + std::to_string(i), c, s.mlp[i], rng, cfg);
    if (cond_dim > 0)
      norms.emplace_back(ps, prefix + ".ada" + std::to_string(i), s.mlp[i], cond_dim, rng, cfg);
    c = s.mlp[i];
  }
  out_channels = c;
  if (s.attention > 0)
    attn = AttentionLayer(ps, prefix + ".attn", out_channels, s.attention, rng, cfg);
}

NodeId FpBlock::forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& fine_positions,
                        NodeId skip_features, const std::vector<Vec3>& coarse_positions,
                        NodeId coarse_features, NodeId cond, const NetConfig& cfg) const {
  const std::int64_t m = static_cast<std::int64_t>(fine_positions.size());
  const int k = static_cast<int>(std::min<std::size_t>(3, coarse_positions.size()));
  KdIndex index(coarse_positions);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(m * k));
  std::vector<double> w(static_cast<std::size_t>(m * k));
  for (std::int64_t i = 0; i < m; ++i) {
    auto nn = index.knn(fine_positions[static_cast<std::size_t>(i)], k);
    double wsum = 0;
    for (int j = 0; j < k; ++j) {
      const double d2 =
          dist2(fine_positions[static_cast<std::size_t>(i)],
                coarse_positions[static_cast<std::size_t>(nn[static_cast<std::size_t>(j)])]);
      const double wj = 1.0 / (d2 + 1e-8);
      idx[static_cast<std::size_t>(i * k + j)] = nn[static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i * k + j)] = wj;
      wsum += wj;
    }
    for (int j = 0; j < k; ++j) w[static_cast<std::size_t>(i * k + j)] /= wsum;
  }
  NodeId up = g.interp_rows(coarse_features, std::move(idx), std::move(w), k);  // [m, Cc]
  NodeId h = g.concat({up, skip_features}, 1);
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    h = mlp[i].forward(g, ps, h);
    if (!norms.empty()) h = norms[i].forward(g, ps, h, cond);
    h = g.leaky_relu(h, cfg.leaky_slope);
  }
  if (spec.attention > 0) h = attn.forward(g, ps, h);
  return h;
}

}  // namespace gcrec
