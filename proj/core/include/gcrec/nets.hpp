#pragma once

#include <optional>

#include "gcrec/blocks.hpp"
#include "gcrec/point_cloud.hpp"

namespace gcrec {

/// Point U-Net: SA pyramid, global attention bottleneck, FP pyramid, head.
class PointUNet {
 public:
  struct Spec {
    std::vector<SaSpec> sa;
    int global_attention = 0;  // scaled dim
    std::vector<FpSpec> fp;
    std::vector<int> head_mlp;
    int out_channels = 0;
    bool time_conditioned = false;
    int time_sinusoidal = 64;
    int time_out = 0;  // scaled
    bool latent_conditioned = true;
  };

  PointUNet() = default;
  PointUNet(const std::string& prefix, Spec spec, int in_channels, const NetConfig& cfg,
            ParamStore& ps, RngStream& rng);

  NodeId forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& positions, NodeId features,
                 NodeId cond, double t, bool training, RngStream* drop_rng) const;

  const Spec& spec() const { return spec_; }
  int head_in_channels() const { return head_in_; }

 private:
  Spec spec_;
  NetConfig cfg_;
  std::vector<SaBlock> sa_;
  AttentionLayer global_attn_;
  std::vector<FpBlock> fp_;
  LinearLayer time1_, time2_;
  std::vector<LinearLayer> head_;
  std::vector<AdaGnLayer> head_norms_;
  LinearLayer out_;
  int head_in_ = 0;
};

/// Reference U-Net layouts. Width scaling is applied inside.
PointUNet::Spec lpgdm_unet_spec(const NetConfig& cfg);
PointUNet::Spec lpg_unet_spec(const NetConfig& cfg);
PointUNet::Spec rd_unet_spec(const NetConfig& cfg);

/// Mean per-element Gaussian KL against the standard normal:
/// 0.5 * mean(mu^2 + exp(logvar) - 1 - logvar).
NodeId gaussian_kl_mean(Graph& g, NodeId mu, NodeId logvar);

/// Shape-latent denoiser: residual SE stack over the latent vector with an
/// additive time embedding.
class SldmNet {
 public:
  struct Plan {
    int input = 0, hidden = 0, time_sinusoidal = 0, time_hidden = 0, res_blocks = 0;
  };
  static Plan plan(const NetConfig& cfg);

  SldmNet(const NetConfig& cfg, std::uint64_t init_seed);
  NodeId predict(Graph& g, NodeId z_t, double t, bool training = false,
                 RngStream* drop_rng = nullptr);
  Tensor predict_value(const Tensor& z_t, double t) const;
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  mutable ParamStore ps_;
  LinearLayer in_, t1_, t2_, out_;
  std::vector<ResSeBlock> blocks_;
};

/// Latent-point denoiser conditioned on the shape latent (AdaGN) and the
/// step (time embeddings concatenated to point features).
class LpgdmNet {
 public:
  LpgdmNet(const NetConfig& cfg, std::uint64_t init_seed);
  NodeId predict(Graph& g, NodeId h_t, NodeId cond, double t, bool training = false,
                 RngStream* drop_rng = nullptr);
  Tensor predict_value(const Tensor& h_t, const Tensor& cond, double t) const;
  ParamStore& params() { return ps_; }
  const NetConfig& config() const { return cfg_; }
  const PointUNet::Spec& spec() const { return unet_.spec(); }

 private:
  NetConfig cfg_;
  mutable ParamStore ps_;
  PointUNet unet_;
};

/// Latent point generator: a conditioned VAE encoder over an anchor cloud.
/// The anchor is the raw input cloud while training and a fixed template at
/// attack time.
class LpgNet {
 public:
  struct Output {
    NodeId mu = -1;
    NodeId logvar = -1;
  };

  LpgNet(const NetConfig& cfg, std::uint64_t init_seed);

  /// Attacker-side re-embedding of the victim latent (affine + learned
  /// variance); this is what conditions every downstream network.
  NodeId embed_mean(Graph& g, NodeId z0);
  NodeId embed_logvar(Graph& g);
  NodeId embed_sample(Graph& g, NodeId z0, RngStream& rng);
  Tensor embed_mean_value(const Tensor& z0) const;

  Output encode(Graph& g, const PointCloud& anchor, NodeId cond, bool training = false,
                RngStream* drop_rng = nullptr);
  NodeId sample_latent(Graph& g, const Output& out, RngStream& rng);

  /// Inference path: no raw cloud; the residual anchor is a deterministic
  /// template. Returns the posterior mean unless `sample` is set.
  Tensor generate(const Tensor& cond, std::int64_t n, bool sample = false,
                  RngStream* rng = nullptr) const;

  static PointCloud template_anchor(std::int64_t n, int colors);

  ParamStore& params() { return ps_; }
  const NetConfig& config() const { return cfg_; }
  const PointUNet::Spec& spec() const { return unet_.spec(); }

 private:
  NetConfig cfg_;
  mutable ParamStore ps_;
  PointUNet unet_;
};

/// Reconstruction decoder: maps latent points (+ shape latent) to the
/// reconstructed cloud; output folds back onto the latent point geometry.
class RdNet {
 public:
  RdNet(const NetConfig& cfg, std::uint64_t init_seed);
  NodeId decode(Graph& g, NodeId h0, NodeId cond, bool training = false,
                RngStream* drop_rng = nullptr);
  Tensor decode_value(const Tensor& h0, const Tensor& cond) const;
  ParamStore& params() { return ps_; }
  const NetConfig& config() const { return cfg_; }
  const PointUNet::Spec& spec() const { return unet_.spec(); }

 private:
  NetConfig cfg_;
  mutable ParamStore ps_;
  PointUNet unet_;
};

}  // namespace gcrec
