#include "gcrec/nets.hpp"

#include <cmath>

#include "gcrec/shapes.hpp"

namespace gcrec {

namespace {

std::vector<int> scaled_dims(const NetConfig& cfg, std::initializer_list<int> dims) {
  std::vector<int> out;
  for (int d : dims) out.push_back(cfg.scaled(d));
  return out;
}

}  // namespace

PointUNet::PointUNet(const std::string& prefix, Spec spec, int in_channels, const NetConfig& cfg,
                     ParamStore& ps, RngStream& rng)
    : spec_(std::move(spec)), cfg_(cfg) {
  const int cond_dim = spec_.latent_conditioned ? cfg.dz : 0;
  const int tc = spec_.time_conditioned ? spec_.time_out : 0;
  if (spec_.time_conditioned) {
    time1_ = LinearLayer(ps, prefix + ".time1", spec_.time_sinusoidal, spec_.time_out, rng, cfg);
    time2_ = LinearLayer(ps, prefix + ".time2", spec_.time_out, spec_.time_out, rng, cfg);
  }
  std::vector<int> level_channels{in_channels};
  for (std::size_t i = 0; i < spec_.sa.size(); ++i) {
    sa_.emplace_back(ps, prefix + ".sa" + std::to_string(i), spec_.sa[i],
                     level_channels.back() + tc, cond_dim, rng, cfg);
    level_channels.push_back(sa_.back().out_channels);
  }
  if (spec_.global_attention > 0)
    global_attn_ = AttentionLayer(ps, prefix + ".gattn", level_channels.back(),
                                  spec_.global_attention, rng, cfg);
  int current = level_channels.back();
  for (std::size_t i = 0; i < spec_.fp.size(); ++i) {
    const std::size_t fine_level = spec_.sa.size() - 1 - i;
    fp_.emplace_back(ps, prefix + ".fp" + std::to_string(i), spec_.fp[i], current,
                     level_channels[fine_level] + tc, cond_dim, rng, cfg);
    current = fp_.back().out_channels;
  }
  for (std::size_t i = 0; i < spec_.head_mlp.size(); ++i) {
    head_.emplace_back(ps, prefix + ".head" + std::to_string(i), current, spec_.head_mlp[i], rng,
                       cfg);
    if (cond_dim > 0)
      head_norms_.emplace_back(ps, prefix + ".headada" + std::to_string(i), spec_.head_mlp[i],
                               cond_dim, rng, cfg);
    current = spec_.head_mlp[i];
  }
  head_in_ = current;
  out_ = LinearLayer(ps, prefix + ".out", current, spec_.out_channels, rng, cfg,
                     /*zero_init=*/true);
}

NodeId PointUNet::forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& positions,
                          NodeId features, NodeId cond, double t, bool training,
                          RngStream* drop_rng) const {
  NodeId temb = -1;
  if (spec_.time_conditioned) {
    NodeId e = g.reshape(g.sinusoidal_embed(spec_.time_sinusoidal, t), {1, spec_.time_sinusoidal});
    e = g.leaky_relu(time1_.forward(g, ps, e), cfg_.leaky_slope);
    e = time2_.forward(g, ps, e);
    temb = g.reshape(e, {spec_.time_out});
  }
  auto with_time = [&](NodeId f, std::int64_t rows) {
    if (temb < 0) return f;
    return g.concat({f, g.broadcast_rows(temb, rows)}, 1);
  };

  std::vector<std::vector<Vec3>> level_pos{positions};
  std::vector<NodeId> level_feat{features};
  for (const SaBlock& block : sa_) {
    SaBlock::Result r =
        block.forward(g, ps, level_pos.back(),
                      with_time(level_feat.back(), static_cast<std::int64_t>(level_pos.back().size())),
                      cond, cfg_);
    level_pos.push_back(std::move(r.positions));
    level_feat.push_back(r.features);
  }
  NodeId h = level_feat.back();
  if (spec_.global_attention > 0) h = global_attn_.forward(g, ps, h);

  const std::vector<Vec3>* coarse_pos = &level_pos.back();
  for (std::size_t i = 0; i < fp_.size(); ++i) {
    const std::size_t fine_level = sa_.size() - 1 - i;
    const std::vector<Vec3>& fine = level_pos[fine_level];
    NodeId skip = with_time(level_feat[fine_level], static_cast<std::int64_t>(fine.size()));
    h = fp_[i].forward(g, ps, fine, skip, *coarse_pos, h, cond, cfg_);
    coarse_pos = &level_pos[fine_level];
  }
  for (std::size_t i = 0; i < head_.size(); ++i) {
    h = head_[i].forward(g, ps, h);
    if (!head_norms_.empty()) h = head_norms_[i].forward(g, ps, h, cond);
    h = g.leaky_relu(h, cfg_.leaky_slope);
  }
  if (training && drop_rng) h = g.dropout(h, cfg_.dropout_p, *drop_rng, true);
  return out_.forward(g, ps, h);
}

namespace {

PointUNet::Spec base_point_spec(const NetConfig& cfg, bool lpgdm_sa3) {
  PointUNet::Spec s;
  const int k = 32;
  s.sa.push_back({1024, 0.1, k, scaled_dims(cfg, {32, 32}), 0});
  s.sa.push_back({256, 0.2, k, scaled_dims(cfg, {64, 128}), cfg.scaled(128)});
  s.sa.push_back(
      {64, 0.4, k, lpgdm_sa3 ? scaled_dims(cfg, {128, 128}) : scaled_dims(cfg, {128, 256}), 0});
  s.sa.push_back({16, 0.8, k, scaled_dims(cfg, {128, 128, 128}), 0});
  s.global_attention = cfg.scaled(256);
  s.fp.push_back({scaled_dims(cfg, {128, 128}), 0});
  s.fp.push_back({scaled_dims(cfg, {128, 128}), 0});
  s.fp.push_back({scaled_dims(cfg, {128, 128}), 0});
  s.fp.push_back({scaled_dims(cfg, {128, 128, 64}), 0});
  s.head_mlp = scaled_dims(cfg, {128});
  return s;
}

}  // namespace

PointUNet::Spec lpgdm_unet_spec(const NetConfig& cfg) {
  PointUNet::Spec s = base_point_spec(cfg, /*lpgdm_sa3=*/true);
  s.out_channels = cfg.latent_point_channels();
  s.time_conditioned = true;
  s.time_sinusoidal = cfg.lpgdm_time_dim;
  s.time_out = cfg.scaled(cfg.lpgdm_time_dim);
  s.latent_conditioned = true;
  return s;
}

PointUNet::Spec lpg_unet_spec(const NetConfig& cfg) {
  PointUNet::Spec s = base_point_spec(cfg, /*lpgdm_sa3=*/false);
  s.fp[1].attention = cfg.scaled(128);
  s.out_channels = 2 * cfg.latent_point_channels();
  s.latent_conditioned = true;
  return s;
}

PointUNet::Spec rd_unet_spec(const NetConfig& cfg) {
  PointUNet::Spec s = base_point_spec(cfg, /*lpgdm_sa3=*/false);
  s.out_channels = cfg.point_channels();
  s.latent_conditioned = true;
  return s;
}

NodeId gaussian_kl_mean(Graph& g, NodeId mu, NodeId logvar) {
  NodeId term = g.sub(g.add(g.mul(mu, mu), g.exp(logvar)), g.shift(logvar, 1.0));
  return g.scale(g.reduce_mean(term), 0.5);
}

SldmNet::Plan SldmNet::plan(const NetConfig& cfg) {
  Plan p;
  p.input = cfg.dz;
  p.hidden = cfg.scaled(2048);
  p.time_sinusoidal = cfg.sldm_time_dim;
  p.time_hidden = cfg.scaled(512);
  p.res_blocks = 8;
  return p;
}

SldmNet::SldmNet(const NetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  const Plan p = plan(cfg);
  in_ = LinearLayer(ps_, "sldm.in", p.input, p.hidden, rng, cfg);
  t1_ = LinearLayer(ps_, "sldm.time1", p.time_sinusoidal, p.time_hidden, rng, cfg);
  t2_ = LinearLayer(ps_, "sldm.time2", p.time_hidden, p.hidden, rng, cfg);
  for (int i = 0; i < p.res_blocks; ++i)
    blocks_.emplace_back(ps_, "sldm.res" + std::to_string(i), p.hidden, rng, cfg);
  out_ = LinearLayer(ps_, "sldm.out", p.hidden, p.input, rng, cfg, /*zero_init=*/true);
}

NodeId SldmNet::predict(Graph& g, NodeId z_t, double t, bool training, RngStream* drop_rng) {
  const Tensor& z = g.value(z_t);
  if (z.rank() != 2 || z.dim(1) != cfg_.dz) throw ShapeError("sldm: expects [B, Dz]");
  const std::int64_t batch = z.dim(0);
  NodeId h = in_.forward(g, ps_, z_t);
  NodeId e = g.reshape(g.sinusoidal_embed(plan(cfg_).time_sinusoidal, t),
                       {1, plan(cfg_).time_sinusoidal});
  e = g.leaky_relu(t1_.forward(g, ps_, e), cfg_.leaky_slope);
  e = t2_.forward(g, ps_, e);
  h = g.add(h, g.broadcast_rows(g.reshape(e, {plan(cfg_).hidden}), batch));
  for (const ResSeBlock& b : blocks_) h = b.forward(g, ps_, h, training, drop_rng);
  return out_.forward(g, ps_, h);
}

Tensor SldmNet::predict_value(const Tensor& z_t, double t) const {
  Graph g(false, cfg_.dtype);
  const bool vec = z_t.rank() == 1;
  Tensor in = vec ? z_t.reshaped({1, z_t.numel()}) : z_t;
  NodeId out = const_cast<SldmNet*>(this)->predict(g, g.constant(in), t, false, nullptr);
  Tensor v = g.value(out);
  return vec ? v.reshaped({v.numel()}) : v;
}

LpgdmNet::LpgdmNet(const NetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  unet_ = PointUNet("lpgdm", lpgdm_unet_spec(cfg), cfg.latent_point_channels(), cfg, ps_, rng);
}

NodeId LpgdmNet::predict(Graph& g, NodeId h_t, NodeId cond, double t, bool training,
                         RngStream* drop_rng) {
  const Tensor& h = g.value(h_t);
  if (h.rank() != 2 || h.dim(1) != cfg_.latent_point_channels())
    throw ShapeError("lpgdm: expects [N, 3+c+Dh]");
  if (g.value(cond).numel() != cfg_.dz) throw ShapeError("lpgdm: conditioning dim mismatch");
  return unet_.forward(g, ps_, positions_from_tensor(h), h_t, cond, t, training, drop_rng);
}

Tensor LpgdmNet::predict_value(const Tensor& h_t, const Tensor& cond, double t) const {
  Graph g(false, cfg_.dtype);
  NodeId out = const_cast<LpgdmNet*>(this)->predict(g, g.constant(h_t), g.constant(cond), t,
                                                    false, nullptr);
  return g.value(out);
}

LpgNet::LpgNet(const NetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  unet_ = PointUNet("lpg", lpg_unet_spec(cfg), cfg.point_channels(), cfg, ps_, rng);
  ps_.add("lpg.embed.scale", Tensor::full({cfg.dz}, 1.0, cfg.dtype));
  ps_.add("lpg.embed.shift", Tensor::zeros({cfg.dz}, cfg.dtype));
  ps_.add("lpg.embed.logvar", Tensor::full({cfg.dz}, -4.0, cfg.dtype));
}

NodeId LpgNet::embed_mean(Graph& g, NodeId z0) {
  return g.add(g.mul(z0, g.param(ps_, "lpg.embed.scale")), g.param(ps_, "lpg.embed.shift"));
}

NodeId LpgNet::embed_logvar(Graph& g) { return g.param(ps_, "lpg.embed.logvar"); }

NodeId LpgNet::embed_sample(Graph& g, NodeId z0, RngStream& rng) {
  NodeId mean = embed_mean(g, z0);
  NodeId sigma = g.exp(g.scale(embed_logvar(g), 0.5));
  NodeId eps = g.constant(rng.gaussian_tensor({cfg_.dz}, cfg_.dtype));
  return g.add(mean, g.mul(sigma, eps));
}

Tensor LpgNet::embed_mean_value(const Tensor& z0) const {
  Graph g(false, cfg_.dtype);
  NodeId out = const_cast<LpgNet*>(this)->embed_mean(g, g.constant(z0));
  return g.value(out);
}

LpgNet::Output LpgNet::encode(Graph& g, const PointCloud& anchor, NodeId cond, bool training,
                              RngStream* drop_rng) {
  if (anchor.channels() != cfg_.point_channels())
    throw ShapeError("lpg: anchor channel count mismatch");
  const int pc = cfg_.point_channels();
  const int lc = cfg_.latent_point_channels();
  Tensor anchor_t = anchor.to_tensor().cast(cfg_.dtype);
  NodeId anchor_node = g.constant(anchor_t);
  NodeId raw = unet_.forward(g, ps_, anchor.positions, anchor_node, cond, 0.0, training, drop_rng);
  NodeId raw_mu = g.slice(raw, 1, 0, lc);
  NodeId raw_logvar = g.slice(raw, 1, lc, 2 * lc);
  // anchored mean: geometry/color channels ride on the raw input cloud
  NodeId mu_anchored = g.add(anchor_node, g.scale(g.slice(raw_mu, 1, 0, pc), cfg_.residual_scale));
  Output out;
  out.mu = lc > pc ? g.concat({mu_anchored, g.slice(raw_mu, 1, pc, lc)}, 1) : mu_anchored;
  out.logvar = raw_logvar;
  return out;
}

NodeId LpgNet::sample_latent(Graph& g, const Output& out, RngStream& rng) {
  NodeId sigma = g.exp(g.scale(out.logvar, 0.5));
  NodeId eps = g.constant(rng.gaussian_tensor(g.value(out.mu).shape(), cfg_.dtype));
  return g.add(out.mu, g.mul(sigma, eps));
}

PointCloud LpgNet::template_anchor(std::int64_t n, int colors) {
  return sphere_template(n, colors);
}

Tensor LpgNet::generate(const Tensor& cond, std::int64_t n, bool sample, RngStream* rng) const {
  PointCloud anchor = template_anchor(n, cfg_.colors);
  Graph g(false, cfg_.dtype);
  LpgNet* self = const_cast<LpgNet*>(this);
  Output out = self->encode(g, anchor, g.constant(cond.cast(cfg_.dtype)), false, nullptr);
  if (sample) {
    if (!rng) throw Error("lpg: sampling requires an rng");
    return g.value(self->sample_latent(g, out, *rng));
  }
  return g.value(out.mu);
}

RdNet::RdNet(const NetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  unet_ = PointUNet("rd", rd_unet_spec(cfg), cfg.latent_point_channels(), cfg, ps_, rng);
}

NodeId RdNet::decode(Graph& g, NodeId h0, NodeId cond, bool training, RngStream* drop_rng) {
  const Tensor& h = g.value(h0);
  if (h.rank() != 2 || h.dim(1) != cfg_.latent_point_channels())
    throw ShapeError("rd: expects [N, 3+c+Dh]");
  NodeId raw =
      unet_.forward(g, ps_, positions_from_tensor(h), h0, cond, 0.0, training, drop_rng);
  NodeId anchor = g.slice(h0, 1, 0, cfg_.point_channels());
  return g.add(anchor, g.scale(raw, cfg_.residual_scale));
}

Tensor RdNet::decode_value(const Tensor& h0, const Tensor& cond) const {
  Graph g(false, cfg_.dtype);
  NodeId out = const_cast<RdNet*>(this)->decode(g, g.constant(h0), g.constant(cond), false,
                                                nullptr);
  return g.value(out);
}

}  // namespace gcrec
