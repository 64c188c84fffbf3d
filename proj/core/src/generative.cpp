#include "crossmodal/generative.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "crossmodal/digest.hpp"

namespace crossmodal::generative {

using json = nlohmann::json;

namespace {

constexpr double kBceClamp = 1e-12;

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(what) + ": shape mismatch");
}

}  // namespace

void DiagonalGaussian::validate() const {
  if (mean.rows() != log_var.rows() || mean.cols() != log_var.cols())
    throw DimensionMismatch("DiagonalGaussian: mean/log_var shape mismatch");
  if (!mean.allFinite() || !log_var.allFinite())
    throw RangeError("DiagonalGaussian: non-finite parameters");
}

double kl_to_standard_prior(const DiagonalGaussian& q) {
  q.validate();
  const auto mu2 = q.mean.array().square();
  const auto var = q.log_var.array().exp();
  const double total = 0.5 * (mu2 + var - 1.0 - q.log_var.array()).sum();
  return total / static_cast<double>(q.batch());
}

double symmetric_kl(const DiagonalGaussian& a, const DiagonalGaussian& b) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim() || a.batch() != b.batch())
    throw DimensionMismatch("symmetric_kl: dimension mismatch");
  const auto va = a.log_var.array().exp();
  const auto vb = b.log_var.array().exp();
  const auto dmu2 = (a.mean - b.mean).array().square();
  // KL(a||b) + KL(b||a); the log-ratio terms cancel.
  const double total =
      0.5 * (va / vb + vb / va + dmu2 / va + dmu2 / vb - 2.0).sum();
  return total / static_cast<double>(a.batch());
}

Matrix reparameterized_sample(const DiagonalGaussian& q, const Matrix& noise) {
  if (noise.rows() != q.dim() || noise.cols() != q.batch())
    throw DimensionMismatch("reparameterized_sample: noise shape mismatch");
  return q.mean.array() + (0.5 * q.log_var.array()).exp() * noise.array();
}

double reconstruction_loss(const Matrix& reconstruction, const Matrix& target,
                           ReconKind kind) {
  check_same_shape(reconstruction, target, "reconstruction_loss");
  const double batch = static_cast<double>(target.cols());
  if (kind == ReconKind::mse)
    return (reconstruction - target).array().square().sum() / batch;
  const auto p = reconstruction.array().max(kBceClamp).min(1.0 - kBceClamp);
  const auto t = target.array();
  const double total = -(t * p.log() + (1.0 - t) * (1.0 - p).log()).sum();
  return total / batch;
}

double vae_loss(const Matrix& target, const Matrix& reconstruction,
                const DiagonalGaussian& q, double lambda, double beta,
                ReconKind kind) {
  return lambda * reconstruction_loss(reconstruction, target, kind) +
         beta * kl_to_standard_prior(q);
}

void LossWeights::validate() const {
  if (lambda_image < 0.0 || lambda_sound < 0.0 || beta < 0.0 || alpha < 0.0)
    throw ConfigError("loss weights must be >= 0");
}

int ModalityArch::flat_input_dim() const {
  int d = 1;
  for (int s : input_shape) d *= s;
  return d;
}

void ModalityArch::validate() const {
  if (input_shape.empty()) throw ConfigError("modality arch: empty input shape");
  for (int s : input_shape)
    if (s <= 0) throw ConfigError("modality arch: non-positive input extent");
  if (!conv.empty() && input_shape.size() != 3)
    throw ConfigError("modality arch: conv input must be (stack, H, W)");
  if (fc.empty()) throw ConfigError("modality arch: at least one fc layer");
  for (int w : fc)
    if (w <= 0) throw ConfigError("modality arch: non-positive fc width");
}

void AvaeArchitecture::validate() const {
  image.validate();
  sound.validate();
  if (latent_dim <= 0) throw ConfigError("avae: latent_dim must be positive");
}

void NormalizationStats::normalize_sound(std::span<const double> raw,
                                         double* out) const {
  if (!defined) throw ConfigError("normalization statistics undefined");
  if (raw.size() % sound_min.size() != 0)
    throw ShapeMismatch("normalize_sound: payload not a multiple of stats dim");
  // A payload may carry several stacked frames of the per-dimension layout.
  const std::size_t dims = sound_min.size();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t d = i % dims;
    const double lo = sound_min[d], hi = sound_max[d];
    out[i] = hi > lo ? (raw[i] - lo) / (hi - lo) : 0.0;
  }
}

std::vector<double> NormalizationStats::normalize_sound(
    std::span<const double> raw) const {
  std::vector<double> out(raw.size());
  normalize_sound(raw, out.data());
  return out;
}

// -------------------------------------------------------- encoder/decoder

GaussianEncoder::GaussianEncoder(nn::Sequential trunk,
                                 nn::Sequential mean_head,
                                 nn::Sequential log_var_head)
    : trunk_(std::move(trunk)), mean_head_(std::move(mean_head)),
      log_var_head_(std::move(log_var_head)) {}

DiagonalGaussian GaussianEncoder::forward(const Matrix& x, Phase phase) {
  const Matrix h = trunk_.forward(x, phase);
  DiagonalGaussian q;
  q.mean = mean_head_.forward(h, phase);
  q.log_var = log_var_head_.forward(h, phase);
  return q;
}

Matrix GaussianEncoder::backward(const Matrix& d_mean,
                                 const Matrix& d_log_var) {
  Matrix dh = mean_head_.backward(d_mean);
  dh += log_var_head_.backward(d_log_var);
  return trunk_.backward(dh);
}

std::vector<nn::ParamRef> GaussianEncoder::params(const std::string& prefix) {
  auto out = trunk_.params(prefix + ".trunk");
  auto mu = mean_head_.params(prefix + ".mean");
  auto lv = log_var_head_.params(prefix + ".log_var");
  out.insert(out.end(), mu.begin(), mu.end());
  out.insert(out.end(), lv.begin(), lv.end());
  return out;
}

std::vector<nn::ParamRef> GaussianEncoder::buffers(const std::string& prefix) {
  auto out = trunk_.buffers(prefix + ".trunk");
  auto mu = mean_head_.buffers(prefix + ".mean");
  auto lv = log_var_head_.buffers(prefix + ".log_var");
  out.insert(out.end(), mu.begin(), mu.end());
  out.insert(out.end(), lv.begin(), lv.end());
  return out;
}

std::string GaussianEncoder::describe() const {
  return trunk_.describe() + "|heads(" + mean_head_.describe() + ")";
}

namespace {

void add_activation(nn::Sequential& net, Activation act) {
  if (act == Activation::swish)
    net.emplace<nn::Swish>();
  else
    net.emplace<nn::ReLU>();
}

}  // namespace

GaussianEncoder build_encoder(const ModalityArch& arch, int latent_dim,
                              Rng& rng) {
  arch.validate();
  nn::Sequential trunk;
  int features = arch.flat_input_dim();
  if (!arch.conv.empty()) {
    int ch = arch.input_shape[0];
    int h = arch.input_shape[1], w = arch.input_shape[2];
    for (const ConvSpec& c : arch.conv) {
      auto& layer = trunk.emplace<nn::Conv2d>(ch, h, w, c.out_channels,
                                              c.kernel, c.stride, c.pad, rng);
      add_activation(trunk, arch.activation);
      ch = c.out_channels;
      h = layer.out_h();
      w = layer.out_w();
    }
    features = ch * h * w;
  }
  for (std::size_t i = 0; i < arch.fc.size(); ++i) {
    trunk.emplace<nn::Dense>(features, arch.fc[i], rng);
    add_activation(trunk, arch.activation);
    features = arch.fc[i];
    if (arch.batch_norm_between_fc && i + 1 < arch.fc.size())
      trunk.emplace<nn::BatchNorm1d>(features);
  }
  nn::Sequential mean_head, log_var_head;
  mean_head.emplace<nn::Dense>(features, latent_dim, rng);
  log_var_head.emplace<nn::Dense>(features, latent_dim, rng);
  return GaussianEncoder(std::move(trunk), std::move(mean_head),
                         std::move(log_var_head));
}

nn::Sequential build_decoder(const ModalityArch& arch, int latent_dim,
                             Rng& rng) {
  arch.validate();
  nn::Sequential net;
  int features = latent_dim;

  // Mirror of the encoder: fc widths reversed, then transposed convs (or a
  // final projection for flat payloads), sigmoid output.
  std::vector<int> widths(arch.fc.rbegin(), arch.fc.rend());

  if (arch.conv.empty()) {
    for (std::size_t i = 0; i < widths.size(); ++i) {
      net.emplace<nn::Dense>(features, widths[i], rng);
      add_activation(net, arch.activation);
      features = widths[i];
      if (arch.batch_norm_between_fc && i + 1 < widths.size())
        net.emplace<nn::BatchNorm1d>(features);
    }
    net.emplace<nn::Dense>(features, arch.flat_input_dim(), rng);
    net.emplace<nn::Sigmoid>();
    return net;
  }

  // Spatial chain of the encoder convs, to be walked backwards.
  struct Stage { int ch, h, w; };
  std::vector<Stage> stages;
  stages.push_back({arch.input_shape[0], arch.input_shape[1],
                    arch.input_shape[2]});
  for (const ConvSpec& c : arch.conv) {
    const Stage& prev = stages.back();
    stages.push_back({c.out_channels,
                      (prev.h + 2 * c.pad - c.kernel) / c.stride + 1,
                      (prev.w + 2 * c.pad - c.kernel) / c.stride + 1});
  }
  const Stage& bottom = stages.back();

  for (int width : widths) {
    net.emplace<nn::Dense>(features, width, rng);
    add_activation(net, arch.activation);
    features = width;
  }
  net.emplace<nn::Dense>(features, bottom.ch * bottom.h * bottom.w, rng);
  add_activation(net, arch.activation);

  for (std::size_t i = arch.conv.size(); i-- > 0;) {
    const ConvSpec& c = arch.conv[i];
    const Stage& in = stages[i + 1];
    const Stage& out = stages[i];
    net.emplace<nn::ConvTranspose2d>(in.ch, in.h, in.w, out.ch, c.kernel,
                                     c.stride, c.pad, rng);
    const bool last = i == 0;
    if (last)
      net.emplace<nn::Sigmoid>();
    else
      add_activation(net, arch.activation);
  }
  return net;
}

// ------------------------------------------------------------- AvaeModel

AvaeModel::AvaeModel(AvaeArchitecture arch, LossWeights weights,
                     std::uint64_t init_seed)
    : arch_(std::move(arch)), weights_(weights) {
  arch_.validate();
  weights_.validate();
  Rng rng(init_seed);
  image_encoder_ = build_encoder(arch_.image, arch_.latent_dim, rng);
  image_decoder_ = build_decoder(arch_.image, arch_.latent_dim, rng);
  sound_encoder_ = build_encoder(arch_.sound, arch_.latent_dim, rng);
  sound_decoder_ = build_decoder(arch_.sound, arch_.latent_dim, rng);
}

int AvaeModel::payload_dim(Modality m) const {
  return m == Modality::image ? arch_.image.flat_input_dim()
                              : arch_.sound.flat_input_dim();
}

DiagonalGaussian AvaeModel::encode(Modality m, const Matrix& payload,
                                   Phase phase) {
  if (payload.rows() != payload_dim(m))
    throw ShapeMismatch("avae encode: payload dim " +
                        std::to_string(payload.rows()) + " != expected " +
                        std::to_string(payload_dim(m)) + " for " +
                        to_string(m));
  if (m == Modality::image) {
    ++encode_calls_image_;
    return image_encoder_.forward(payload, phase);
  }
  ++encode_calls_sound_;
  return sound_encoder_.forward(payload, phase);
}

Matrix AvaeModel::decode(Modality m, const Matrix& z, Phase phase) {
  if (z.rows() != arch_.latent_dim)
    throw ShapeMismatch("avae decode: latent dim mismatch");
  return m == Modality::image ? image_decoder_.forward(z, phase)
                              : sound_decoder_.forward(z, phase);
}

Matrix AvaeModel::cross_modal_infer(Modality source, const Matrix& payload,
                                    Modality target) {
  const DiagonalGaussian q = encode(source, payload, Phase::eval);
  return decode(target, q.mean, Phase::eval);
}

std::uint64_t AvaeModel::encode_calls(Modality m) const {
  return m == Modality::image ? encode_calls_image_ : encode_calls_sound_;
}

void AvaeModel::reset_encode_counters() {
  encode_calls_image_ = 0;
  encode_calls_sound_ = 0;
}

namespace {

struct SymKlGrads {
  Matrix d_mean_a, d_log_var_a, d_mean_b, d_log_var_b;
};

SymKlGrads symmetric_kl_gradients(const DiagonalGaussian& a,
                                  const DiagonalGaussian& b) {
  const auto va = a.log_var.array().exp();
  const auto vb = b.log_var.array().exp();
  const auto dmu = (a.mean - b.mean).array();
  SymKlGrads g;
  g.d_mean_a = (dmu * (1.0 / va + 1.0 / vb)).matrix();
  g.d_mean_b = -g.d_mean_a;
  g.d_log_var_a =
      (0.5 * (va / vb - vb / va - dmu.square() / va)).matrix();
  g.d_log_var_b =
      (0.5 * (vb / va - va / vb - dmu.square() / vb)).matrix();
  return g;
}

Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
  return m;
}

}  // namespace

AvaeLossTerms AvaeModel::loss_and_gradients(const Matrix& x_image,
                                            const Matrix& x_sound,
                                            Rng& noise_rng) {
  if (x_image.cols() != x_sound.cols())
    throw ShapeMismatch("avae loss: image/sound batch mismatch");
  const double batch = static_cast<double>(x_image.cols());

  DiagonalGaussian q_img = encode(Modality::image, x_image, Phase::train);
  DiagonalGaussian q_snd = encode(Modality::sound, x_sound, Phase::train);
  const Matrix n_img =
      standard_normal_matrix(q_img.dim(), q_img.batch(), noise_rng);
  const Matrix n_snd =
      standard_normal_matrix(q_snd.dim(), q_snd.batch(), noise_rng);
  const Matrix z_img = reparameterized_sample(q_img, n_img);
  const Matrix z_snd = reparameterized_sample(q_snd, n_snd);
  const Matrix p_img = image_decoder_.forward(z_img, Phase::train);
  const Matrix p_snd = sound_decoder_.forward(z_snd, Phase::train);

  AvaeLossTerms terms;
  terms.recon_image = reconstruction_loss(p_img, x_image, ReconKind::bce);
  terms.recon_sound = reconstruction_loss(p_snd, x_sound, ReconKind::mse);
  terms.kl_image = kl_to_standard_prior(q_img);
  terms.kl_sound = kl_to_standard_prior(q_snd);
  terms.sym_kl = symmetric_kl(q_img, q_snd);
  const LossWeights& w = weights_;
  terms.total = w.lambda_image * terms.recon_image + w.beta * terms.kl_image +
                w.lambda_sound * terms.recon_sound + w.beta * terms.kl_sound +
                w.alpha * terms.sym_kl;

  // Reconstruction gradients (per-sample sums averaged over the batch).
  const auto p_clamped =
      p_img.array().max(kBceClamp).min(1.0 - kBceClamp);
  const Matrix dp_img =
      (w.lambda_image / batch) *
      ((p_clamped - x_image.array()) / (p_clamped * (1.0 - p_clamped)))
          .matrix();
  const Matrix dp_snd =
      (2.0 * w.lambda_sound / batch) * (p_snd - x_sound);

  const Matrix dz_img = image_decoder_.backward(dp_img);
  const Matrix dz_snd = sound_decoder_.backward(dp_snd);

  const SymKlGrads sym = symmetric_kl_gradients(q_img, q_snd);

  // d total / d mean, d log_var for each posterior.
  const Matrix d_mu_img = dz_img + (w.beta / batch) * q_img.mean +
                          (w.alpha / batch) * sym.d_mean_a;
  const Matrix d_lv_img =
      (dz_img.array() * (0.5 * (0.5 * q_img.log_var.array()).exp() *
                         n_img.array()) * 2.0 * 0.5 +
       (w.beta / batch) * 0.5 * (q_img.log_var.array().exp() - 1.0) +
       (w.alpha / batch) * sym.d_log_var_a.array())
          .matrix();
  const Matrix d_mu_snd = dz_snd + (w.beta / batch) * q_snd.mean +
                          (w.alpha / batch) * sym.d_mean_b;
  const Matrix d_lv_snd =
      (dz_snd.array() * (0.5 * (0.5 * q_snd.log_var.array()).exp() *
                         n_snd.array()) * 2.0 * 0.5 +
       (w.beta / batch) * 0.5 * (q_snd.log_var.array().exp() - 1.0) +
       (w.alpha / batch) * sym.d_log_var_b.array())
          .matrix();

  image_encoder_.backward(d_mu_img, d_lv_img);
  sound_encoder_.backward(d_mu_snd, d_lv_snd);
  return terms;
}

AvaeLossTerms AvaeModel::loss(const Matrix& x_image, const Matrix& x_sound,
                              Rng& noise_rng, Phase phase) {
  DiagonalGaussian q_img = encode(Modality::image, x_image, phase);
  DiagonalGaussian q_snd = encode(Modality::sound, x_sound, phase);
  const Matrix n_img =
      standard_normal_matrix(q_img.dim(), q_img.batch(), noise_rng);
  const Matrix n_snd =
      standard_normal_matrix(q_snd.dim(), q_snd.batch(), noise_rng);
  const Matrix p_img =
      image_decoder_.forward(reparameterized_sample(q_img, n_img), phase);
  const Matrix p_snd =
      sound_decoder_.forward(reparameterized_sample(q_snd, n_snd), phase);

  AvaeLossTerms terms;
  terms.recon_image = reconstruction_loss(p_img, x_image, ReconKind::bce);
  terms.recon_sound = reconstruction_loss(p_snd, x_sound, ReconKind::mse);
  terms.kl_image = kl_to_standard_prior(q_img);
  terms.kl_sound = kl_to_standard_prior(q_snd);
  terms.sym_kl = symmetric_kl(q_img, q_snd);
  terms.total =
      weights_.lambda_image * terms.recon_image + weights_.beta * terms.kl_image +
      weights_.lambda_sound * terms.recon_sound + weights_.beta * terms.kl_sound +
      weights_.alpha * terms.sym_kl;
  return terms;
}

std::vector<nn::ParamRef> AvaeModel::params() {
  auto out = image_encoder_.params("image_encoder");
  auto id = image_decoder_.params("image_decoder");
  auto se = sound_encoder_.params("sound_encoder");
  auto sd = sound_decoder_.params("sound_decoder");
  out.insert(out.end(), id.begin(), id.end());
  out.insert(out.end(), se.begin(), se.end());
  out.insert(out.end(), sd.begin(), sd.end());
  return out;
}

std::vector<nn::ParamRef> AvaeModel::buffers() {
  auto out = image_encoder_.buffers("image_encoder");
  auto id = image_decoder_.buffers("image_decoder");
  auto se = sound_encoder_.buffers("sound_encoder");
  auto sd = sound_decoder_.buffers("sound_decoder");
  out.insert(out.end(), id.begin(), id.end());
  out.insert(out.end(), se.begin(), se.end());
  out.insert(out.end(), sd.begin(), sd.end());
  return out;
}

std::string AvaeModel::parameter_digest() {
  auto tensors = params();
  auto bufs = buffers();
  tensors.insert(tensors.end(), bufs.begin(), bufs.end());
  return nn::digest_tensors(tensors);
}

AvaeModel AvaeModel::clone() const { return AvaeModel(*this); }

// -------------------------------------------------------------- training

std::vector<AvaeLossTerms> train_avae(AvaeModel& model,
                                      const BatchSource& data,
                                      const AvaeTrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("train_avae: negative epoch count");
  if (cfg.batch_size < 2) throw ConfigError("train_avae: batch_size must be >= 2");
  if (data.image_dim() != model.payload_dim(Modality::image) ||
      data.sound_dim() != model.payload_dim(Modality::sound))
    throw ConfigError("train_avae: dataset dims inconsistent with model");

  std::vector<AvaeLossTerms> history;
  if (cfg.epochs == 0) return history;
  if (data.size() < 2) throw ConfigError("train_avae: dataset too small");

  Rng rng(cfg.seed);
  nn::Adam adam(model.params(), cfg.learning_rate);

  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);

  Matrix images, sounds;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the run's own stream.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(
                    static_cast<int>(i)))]);

    AvaeLossTerms epoch_sum;
    std::int64_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n =
          std::min<std::size_t>(cfg.batch_size, order.size() - start);
      if (n < 2) break;  // batch statistics need at least two samples
      images.resize(data.image_dim(), static_cast<Eigen::Index>(n));
      sounds.resize(data.sound_dim(), static_cast<Eigen::Index>(n));
      data.fill({order.data() + start, n}, images, sounds);

      const AvaeLossTerms terms = model.loss_and_gradients(images, sounds, rng);
      adam.step();

      const double w = static_cast<double>(n);
      epoch_sum.recon_image += terms.recon_image * w;
      epoch_sum.recon_sound += terms.recon_sound * w;
      epoch_sum.kl_image += terms.kl_image * w;
      epoch_sum.kl_sound += terms.kl_sound * w;
      epoch_sum.sym_kl += terms.sym_kl * w;
      epoch_sum.total += terms.total * w;
      seen += static_cast<std::int64_t>(n);
    }
    const double denom = static_cast<double>(std::max<std::int64_t>(seen, 1));
    history.push_back({epoch_sum.recon_image / denom,
                       epoch_sum.recon_sound / denom,
                       epoch_sum.kl_image / denom, epoch_sum.kl_sound / denom,
                       epoch_sum.sym_kl / denom, epoch_sum.total / denom});
  }
  return history;
}

// ---------------------------------------------------------- checkpointing

namespace {

constexpr char kCheckpointMagic[8] = {'X', 'M', 'C', 'K', 'P', 'T', '0', '1'};

json arch_to_json(const ModalityArch& a) {
  json j;
  j["input_shape"] = a.input_shape;
  j["fc"] = a.fc;
  j["batch_norm_between_fc"] = a.batch_norm_between_fc;
  j["activation"] = a.activation == Activation::swish ? "swish" : "relu";
  j["conv"] = json::array();
  for (const ConvSpec& c : a.conv)
    j["conv"].push_back({{"out_channels", c.out_channels},
                         {"kernel", c.kernel},
                         {"stride", c.stride},
                         {"pad", c.pad}});
  return j;
}

ModalityArch arch_from_json(const json& j) {
  ModalityArch a;
  a.input_shape = j.at("input_shape").get<std::vector<int>>();
  a.fc = j.at("fc").get<std::vector<int>>();
  a.batch_norm_between_fc = j.at("batch_norm_between_fc").get<bool>();
  a.activation = j.at("activation").get<std::string>() == "swish"
                     ? Activation::swish
                     : Activation::relu;
  for (const auto& c : j.at("conv"))
    a.conv.push_back({c.at("out_channels").get<int>(),
                      c.at("kernel").get<int>(), c.at("stride").get<int>(),
                      c.at("pad").get<int>()});
  return a;
}

void write_tensors(std::ofstream& out, const std::vector<nn::ParamRef>& refs,
                   Sha256& digest) {
  for (const auto& r : refs) {
    const auto bytes =
        static_cast<std::size_t>(r.value->size()) * sizeof(double);
    out.write(reinterpret_cast<const char*>(r.value->data()),
              static_cast<std::streamsize>(bytes));
    digest.update(r.value->data(), bytes);
  }
}

void read_tensors(std::ifstream& in, const std::vector<nn::ParamRef>& refs,
                  Sha256& digest) {
  for (const auto& r : refs) {
    const auto bytes =
        static_cast<std::size_t>(r.value->size()) * sizeof(double);
    in.read(reinterpret_cast<char*>(r.value->data()),
            static_cast<std::streamsize>(bytes));
    if (!in) throw ParseError("checkpoint: truncated tensor payload");
    digest.update(r.value->data(), bytes);
  }
}

}  // namespace

void save_avae_checkpoint(const std::filesystem::path& path,
                          AvaeModel& model) {
  json header;
  header["format_version"] = 1;
  header["kind"] = "avae";
  header["latent_dim"] = model.latent_dim();
  header["arch"]["image"] = arch_to_json(model.arch().image);
  header["arch"]["sound"] = arch_to_json(model.arch().sound);
  header["loss_weights"] = {{"lambda_image", model.weights().lambda_image},
                            {"lambda_sound", model.weights().lambda_sound},
                            {"beta", model.weights().beta},
                            {"alpha", model.weights().alpha}};
  header["norm_stats"] = {{"defined", model.stats().defined},
                          {"sound_min", model.stats().sound_min},
                          {"sound_max", model.stats().sound_max}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("save_avae_checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_text.data(), static_cast<std::streamsize>(len));

  Sha256 digest;
  write_tensors(out, model.params(), digest);
  write_tensors(out, model.buffers(), digest);
  const std::string hex = digest.hex_digest();
  out.write(hex.data(), static_cast<std::streamsize>(hex.size()));
  if (!out)
    throw Error("save_avae_checkpoint: write failed for " + path.string());
}

AvaeModel load_avae_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingArtifact("load_avae_checkpoint: cannot open " +
                          path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw ParseError("load_avae_checkpoint: bad magic in " + path.string());
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("load_avae_checkpoint: truncated header");

  const json header = json::parse(header_text);
  if (header.at("kind").get<std::string>() != "avae")
    throw ParseError("load_avae_checkpoint: not an avae checkpoint");

  AvaeArchitecture arch;
  arch.latent_dim = header.at("latent_dim").get<int>();
  arch.image = arch_from_json(header.at("arch").at("image"));
  arch.sound = arch_from_json(header.at("arch").at("sound"));
  LossWeights weights;
  weights.lambda_image = header.at("loss_weights").at("lambda_image");
  weights.lambda_sound = header.at("loss_weights").at("lambda_sound");
  weights.beta = header.at("loss_weights").at("beta");
  weights.alpha = header.at("loss_weights").at("alpha");

  AvaeModel model(arch, weights, /*init_seed=*/0);
  model.stats().defined = header.at("norm_stats").at("defined").get<bool>();
  model.stats().sound_min =
      header.at("norm_stats").at("sound_min").get<std::vector<double>>();
  model.stats().sound_max =
      header.at("norm_stats").at("sound_max").get<std::vector<double>>();

  Sha256 digest;
  read_tensors(in, model.params(), digest);
  read_tensors(in, model.buffers(), digest);
  std::string stored(64, '\0');
  in.read(stored.data(), 64);
  if (!in) throw ParseError("load_avae_checkpoint: truncated digest");
  if (stored != digest.hex_digest())
    throw ParseError("load_avae_checkpoint: content digest mismatch in " +
                     path.string());
  return model;
}

void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const AvaeLossTerms> history) {
  std::ofstream out(path);
  if (!out)
    throw Error("write_loss_history_csv: cannot open " + path.string());
  out << "epoch,recon_img,recon_snd,kl_img,kl_snd,sym_kl,total\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const AvaeLossTerms& t = history[i];
    std::snprintf(line, sizeof(line),
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  t.recon_image, t.recon_sound, t.kl_image, t.kl_sound,
                  t.sym_kl, t.total);
    out << line;
  }
}

}  // namespace crossmodal::generative
