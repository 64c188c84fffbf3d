#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crossmodal/common.hpp"
#include "crossmodal/nn.hpp"

namespace crossmodal::generative {

using nn::Matrix;
using nn::Phase;

/// Posterior/prior parameters over the latent space; one column per sample.
struct DiagonalGaussian {
  Matrix mean;
  Matrix log_var;

  Eigen::Index dim() const { return mean.rows(); }
  Eigen::Index batch() const { return mean.cols(); }
  void validate() const;
};

/// KL(q || N(0, I)) = 0.5 sum_d (mu^2 + sigma^2 - 1 - log sigma^2),
/// summed over dimensions, averaged over the batch.
double kl_to_standard_prior(const DiagonalGaussian& q);

/// KL*(a || b) = KL(a || b) + KL(b || a), closed form for diagonal
/// Gaussians; summed over dimensions, averaged over the batch.
double symmetric_kl(const DiagonalGaussian& a, const DiagonalGaussian& b);

/// z = mean + exp(0.5 log_var) (.) noise.
Matrix reparameterized_sample(const DiagonalGaussian& q, const Matrix& noise);

enum class ReconKind { bce, mse };

/// Reconstruction loss, summed over elements per sample and averaged over
/// the batch (weights lambda are applied by the caller).
double reconstruction_loss(const Matrix& reconstruction, const Matrix& target,
                           ReconKind kind);

/// lambda * recon + beta * KL(q || prior); the negated ELBO up to constants.
double vae_loss(const Matrix& target, const Matrix& reconstruction,
                const DiagonalGaussian& q, double lambda, double beta,
                ReconKind kind);

struct LossWeights {
  double lambda_image{1.0};
  double lambda_sound{1.0};
  double beta{1.0};
  double alpha{1.0};
  void validate() const;
};

/// Unweighted loss-term breakdown; `total` carries the weights.
struct AvaeLossTerms {
  double recon_image{0.0};
  double recon_sound{0.0};
  double kl_image{0.0};
  double kl_sound{0.0};
  double sym_kl{0.0};
  double total{0.0};
};

struct ConvSpec {
  int out_channels{0};
  int kernel{0};
  int stride{0};
  int pad{0};
};

enum class Activation { relu, swish };

struct ModalityArch {
  std::vector<int> input_shape;  // {stack, H, W} with convs, {dim} without
  std::vector<ConvSpec> conv;    // encoder order; decoder mirrors it
  std::vector<int> fc;           // hidden widths, encoder order
  bool batch_norm_between_fc{false};
  Activation activation{Activation::relu};

  int flat_input_dim() const;
  void validate() const;
};

struct AvaeArchitecture {
  ModalityArch image;
  ModalityArch sound;
  int latent_dim{0};
  void validate() const;
};

/// Per-dimension min/max of the raw sound payload over a dataset; sounds are
/// mapped to [0,1] before entering the sound encoder.
struct NormalizationStats {
  std::vector<double> sound_min;
  std::vector<double> sound_max;
  bool defined{false};

  void normalize_sound(std::span<const double> raw, double* out) const;
  std::vector<double> normalize_sound(std::span<const double> raw) const;
};

/// Encoder trunk with diagonal-Gaussian heads.
class GaussianEncoder {
 public:
  GaussianEncoder() = default;
  GaussianEncoder(nn::Sequential trunk, nn::Sequential mean_head,
                  nn::Sequential log_var_head);

  DiagonalGaussian forward(const Matrix& x, Phase phase);
  /// Backward through both heads and the trunk; call right after forward.
  Matrix backward(const Matrix& d_mean, const Matrix& d_log_var);

  std::vector<nn::ParamRef> params(const std::string& prefix);
  std::vector<nn::ParamRef> buffers(const std::string& prefix);
  std::string describe() const;

 private:
  nn::Sequential trunk_, mean_head_, log_var_head_;
};

GaussianEncoder build_encoder(const ModalityArch& arch, int latent_dim,
                              Rng& rng);
nn::Sequential build_decoder(const ModalityArch& arch, int latent_dim,
                             Rng& rng);

/// Two encoder/decoder pairs over a shared latent space, aligned by a
/// symmetric-KL penalty. Forward passes cache layer state, so clone the
/// model per thread for concurrent use.
class AvaeModel {
 public:
  AvaeModel(AvaeArchitecture arch, LossWeights weights,
            std::uint64_t init_seed);

  DiagonalGaussian encode(Modality m, const Matrix& payload,
                          Phase phase = Phase::eval);
  Matrix decode(Modality m, const Matrix& z, Phase phase = Phase::eval);
  /// decode(target, mean of encode(source, payload)); posterior mean, no
  /// sampling.
  Matrix cross_modal_infer(Modality source, const Matrix& payload,
                           Modality target);

  /// Forward + backward for one paired batch; gradients are accumulated into
  /// the model parameters (the caller owns the optimizer step).
  AvaeLossTerms loss_and_gradients(const Matrix& x_image,
                                   const Matrix& x_sound, Rng& noise_rng);
  /// Loss terms only (no gradient accumulation).
  AvaeLossTerms loss(const Matrix& x_image, const Matrix& x_sound,
                     Rng& noise_rng, Phase phase);

  std::vector<nn::ParamRef> params();
  std::vector<nn::ParamRef> buffers();
  /// SHA-256 over parameters and buffers; the frozen-model invariance key.
  std::string parameter_digest();

  const AvaeArchitecture& arch() const { return arch_; }
  const LossWeights& weights() const { return weights_; }
  int latent_dim() const { return arch_.latent_dim; }
  int payload_dim(Modality m) const;

  NormalizationStats& stats() { return stats_; }
  const NormalizationStats& stats() const { return stats_; }

  // Call-routing instrumentation.
  std::uint64_t encode_calls(Modality m) const;
  void reset_encode_counters();

  AvaeModel clone() const;

 private:
  AvaeArchitecture arch_;
  LossWeights weights_;
  GaussianEncoder image_encoder_, sound_encoder_;
  nn::Sequential image_decoder_, sound_decoder_;
  NormalizationStats stats_;
  std::uint64_t encode_calls_image_{0};
  std::uint64_t encode_calls_sound_{0};
};

/// Index-aligned provider of normalized training pairs; implemented by the
/// pipeline over its dataset container.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::int64_t size() const = 0;
  virtual int image_dim() const = 0;
  virtual int sound_dim() const = 0;
  /// Fills (image_dim x n) and (sound_dim x n) matrices for the given rows.
  virtual void fill(std::span<const std::int64_t> indices, Matrix& images,
                    Matrix& sounds) const = 0;
};

struct AvaeTrainConfig {
  int epochs{0};
  int batch_size{128};
  double learning_rate{1e-3};
  std::uint64_t seed{0};
};

/// Minibatch Adam training; returns one averaged loss-term record per epoch.
std::vector<AvaeLossTerms> train_avae(AvaeModel& model,
                                      const BatchSource& data,
                                      const AvaeTrainConfig& cfg);

// Checkpoint file: versioned header (architecture, loss weights,
// normalization statistics), raw parameters, content digest.
void save_avae_checkpoint(const std::filesystem::path& path, AvaeModel& model);
AvaeModel load_avae_checkpoint(const std::filesystem::path& path);

void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const AvaeLossTerms> history);

}  // namespace crossmodal::generative
