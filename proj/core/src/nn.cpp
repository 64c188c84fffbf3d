#include "crossmodal/nn.hpp"

#include <cmath>
#include <sstream>

#include "crossmodal/digest.hpp"

namespace crossmodal::nn {

std::atomic<std::uint64_t>& parameter_update_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

namespace {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void fan_in_uniform(Matrix& m, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m(r, c) = rng.uniform(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out, Rng& rng)
    : w_(out, in), b_(out, 1), dw_(Matrix::Zero(out, in)),
      db_(Matrix::Zero(out, 1)) {
  fan_in_uniform(w_, in, rng);
  fan_in_uniform(b_, in, rng);
}

Matrix Dense::forward(const Matrix& x, Phase) {
  if (x.rows() != w_.cols())
    throw ShapeMismatch("dense: input features " + std::to_string(x.rows()) +
                        " != " + std::to_string(w_.cols()));
  x_ = x;
  Matrix y = w_ * x;
  y.colwise() += Eigen::VectorXd(b_.col(0));
  return y;
}

Matrix Dense::backward(const Matrix& grad_out) {
  dw_.noalias() += grad_out * x_.transpose();
  db_.col(0).noalias() += grad_out.rowwise().sum();
  return w_.transpose() * grad_out;
}

void Dense::collect_params(const std::string& prefix,
                           std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &dw_});
  out.push_back({prefix + ".b", &b_, &db_});
}

std::unique_ptr<Layer> Dense::clone() const {
  return std::make_unique<Dense>(*this);
}

std::string Dense::describe() const {
  return "dense(" + std::to_string(w_.cols()) + "->" +
         std::to_string(w_.rows()) + ")";
}

// ----------------------------------------------------------- activations

Matrix ReLU::forward(const Matrix& x, Phase) {
  x_ = x;
  return x.cwiseMax(0.0);
}

Matrix ReLU::backward(const Matrix& grad_out) {
  return (x_.array() > 0.0).cast<double>() * grad_out.array();
}

std::unique_ptr<Layer> ReLU::clone() const {
  return std::make_unique<ReLU>(*this);
}

Matrix Swish::forward(const Matrix& x, Phase) {
  x_ = x;
  return x.array() / (1.0 + (-x.array()).exp());
}

Matrix Swish::backward(const Matrix& grad_out) {
  const auto sig = 1.0 / (1.0 + (-x_.array()).exp());
  // d/dx [x*sig(x)] = sig(x) * (1 + x * (1 - sig(x)))
  return grad_out.array() * sig * (1.0 + x_.array() * (1.0 - sig));
}

std::unique_ptr<Layer> Swish::clone() const {
  return std::make_unique<Swish>(*this);
}

Matrix Sigmoid::forward(const Matrix& x, Phase) {
  y_ = (1.0 / (1.0 + (-x.array()).exp())).matrix();
  return y_;
}

Matrix Sigmoid::backward(const Matrix& grad_out) {
  return grad_out.array() * y_.array() * (1.0 - y_.array());
}

std::unique_ptr<Layer> Sigmoid::clone() const {
  return std::make_unique<Sigmoid>(*this);
}

Matrix Tanh::forward(const Matrix& x, Phase) {
  y_ = x.array().tanh().matrix();
  return y_;
}

Matrix Tanh::backward(const Matrix& grad_out) {
  return grad_out.array() * (1.0 - y_.array().square());
}

std::unique_ptr<Layer> Tanh::clone() const {
  return std::make_unique<Tanh>(*this);
}

std::string Scale::describe() const {
  std::ostringstream out;
  out << "scale(" << s_ << ")";
  return out.str();
}

// ------------------------------------------------------------ batch norm

BatchNorm1d::BatchNorm1d(int features, double momentum, double eps)
    : features_(features), momentum_(momentum), eps_(eps),
      gamma_(Matrix::Ones(features, 1)), beta_(Matrix::Zero(features, 1)),
      dgamma_(Matrix::Zero(features, 1)), dbeta_(Matrix::Zero(features, 1)),
      running_mean_(Matrix::Zero(features, 1)),
      running_var_(Matrix::Ones(features, 1)) {}

Matrix BatchNorm1d::forward(const Matrix& x, Phase phase) {
  if (x.rows() != features_)
    throw ShapeMismatch("batch_norm: feature count mismatch");
  last_phase_ = phase;
  const auto b = static_cast<double>(x.cols());
  if (phase == Phase::train) {
    const Vector mu = x.rowwise().mean();
    const Matrix centered = x.colwise() - mu;
    const Vector var = centered.array().square().rowwise().mean();
    inv_std_ = (var.array() + eps_).rsqrt();
    xhat_ = centered.array().colwise() * inv_std_.array();
    if (x.cols() > 1) {
      // Normalization uses the biased variance; the running estimate keeps
      // the unbiased one.
      running_mean_.col(0) = (1.0 - momentum_) * running_mean_.col(0) +
                             momentum_ * mu;
      running_var_.col(0) = (1.0 - momentum_) * running_var_.col(0) +
                            momentum_ * (var * (b / (b - 1.0)));
    }
  } else {
    inv_std_ = (running_var_.col(0).array() + eps_).rsqrt();
    xhat_ = (x.colwise() - Eigen::VectorXd(running_mean_.col(0)))
                .array()
                .colwise() *
            inv_std_.array();
  }
  return (xhat_.array().colwise() * gamma_.col(0).array()).colwise() +
         beta_.col(0).array();
}

Matrix BatchNorm1d::backward(const Matrix& grad_out) {
  dgamma_.col(0).noalias() +=
      (grad_out.array() * xhat_.array()).rowwise().sum().matrix();
  dbeta_.col(0).noalias() += grad_out.rowwise().sum();

  const Matrix dxhat = grad_out.array().colwise() * gamma_.col(0).array();
  if (last_phase_ == Phase::eval)
    return dxhat.array().colwise() * inv_std_.array();

  const double b = static_cast<double>(grad_out.cols());
  const Vector sum_dxhat = dxhat.rowwise().sum();
  const Vector sum_dxhat_xhat = (dxhat.array() * xhat_.array()).rowwise().sum();
  Matrix dx = b * dxhat;
  dx.colwise() -= sum_dxhat;
  dx.array() -= xhat_.array().colwise() * sum_dxhat_xhat.array();
  dx.array() = dx.array().colwise() * (inv_std_.array() / b);
  return dx;
}

void BatchNorm1d::collect_params(const std::string& prefix,
                                 std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma_, &dgamma_});
  out.push_back({prefix + ".beta", &beta_, &dbeta_});
}

void BatchNorm1d::collect_buffers(const std::string& prefix,
                                  std::vector<ParamRef>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
  out.push_back({prefix + ".running_var", &running_var_, nullptr});
}

std::unique_ptr<Layer> BatchNorm1d::clone() const {
  return std::make_unique<BatchNorm1d>(*this);
}

std::string BatchNorm1d::describe() const {
  return "batch_norm(" + std::to_string(features_) + ")";
}

// ----------------------------------------------------------------- conv

namespace {

// Scatters one sample (CHW) into an im2col block: col(row, oy*ow+ox) with
// row = (c*k+ky)*k+kx. Out-of-bounds taps are zero.
void im2col_sample(const double* x, int channels, int in_h, int in_w,
                   int kernel, int stride, int pad, int out_h, int out_w,
                   Matrix& col, Eigen::Index col_offset) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const int row = (c * kernel + ky) * kernel + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          const bool y_ok = iy >= 0 && iy < in_h;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            double v = 0.0;
            if (y_ok && ix >= 0 && ix < in_w)
              v = x[(static_cast<std::size_t>(c) * in_h + iy) * in_w + ix];
            col(row, col_offset + static_cast<Eigen::Index>(oy) * out_w + ox) =
                v;
          }
        }
      }
    }
  }
}

// Adjoint of im2col_sample: accumulates the col block back into CHW.
void col2im_sample(const Matrix& col, Eigen::Index col_offset, int channels,
                   int in_h, int in_w, int kernel, int stride, int pad,
                   int out_h, int out_w, double* x) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const int row = (c * kernel + ky) * kernel + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in_w) continue;
            x[(static_cast<std::size_t>(c) * in_h + iy) * in_w + ix] +=
                col(row, col_offset + static_cast<Eigen::Index>(oy) * out_w +
                             ox);
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(int in_channels, int in_h, int in_w, int out_channels,
               int kernel, int stride, int pad, Rng& rng)
    : in_channels_(in_channels), in_h_(in_h), in_w_(in_w),
      out_channels_(out_channels), kernel_(kernel), stride_(stride), pad_(pad),
      w_(out_channels, in_channels * kernel * kernel), b_(out_channels, 1),
      dw_(Matrix::Zero(out_channels, in_channels * kernel * kernel)),
      db_(Matrix::Zero(out_channels, 1)) {
  if (out_h() <= 0 || out_w() <= 0)
    throw ConfigError("conv2d: non-positive output size");
  const int fan_in = in_channels * kernel * kernel;
  fan_in_uniform(w_, fan_in, rng);
  fan_in_uniform(b_, fan_in, rng);
}

Matrix Conv2d::forward(const Matrix& x, Phase) {
  const Eigen::Index batch = x.cols();
  const int oh = out_h(), ow = out_w();
  const Eigen::Index ohow = static_cast<Eigen::Index>(oh) * ow;
  if (x.rows() != static_cast<Eigen::Index>(in_channels_) * in_h_ * in_w_)
    throw ShapeMismatch("conv2d: input dim mismatch");

  col_.resize(static_cast<Eigen::Index>(in_channels_) * kernel_ * kernel_,
              batch * ohow);
  for (Eigen::Index s = 0; s < batch; ++s)
    im2col_sample(x.col(s).data(), in_channels_, in_h_, in_w_, kernel_,
                  stride_, pad_, oh, ow, col_, s * ohow);

  Matrix y_mat = w_ * col_;  // (out_ch, batch*ohow)
  y_mat.colwise() += Eigen::VectorXd(b_.col(0));

  Matrix y(static_cast<Eigen::Index>(out_channels_) * ohow, batch);
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int oc = 0; oc < out_channels_; ++oc)
      y.block(static_cast<Eigen::Index>(oc) * ohow, s, ohow, 1) =
          y_mat.block(oc, s * ohow, 1, ohow).transpose();
  return y;
}

Matrix Conv2d::backward(const Matrix& grad_out) {
  const Eigen::Index batch = grad_out.cols();
  const int oh = out_h(), ow = out_w();
  const Eigen::Index ohow = static_cast<Eigen::Index>(oh) * ow;

  Matrix dy_mat(out_channels_, batch * ohow);
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int oc = 0; oc < out_channels_; ++oc)
      dy_mat.block(oc, s * ohow, 1, ohow) =
          grad_out.block(static_cast<Eigen::Index>(oc) * ohow, s, ohow, 1)
              .transpose();

  dw_.noalias() += dy_mat * col_.transpose();
  db_.col(0).noalias() += dy_mat.rowwise().sum();

  const Matrix dcol = w_.transpose() * dy_mat;
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(in_channels_) * in_h_ *
                               in_w_,
                           batch);
  for (Eigen::Index s = 0; s < batch; ++s)
    col2im_sample(dcol, s * ohow, in_channels_, in_h_, in_w_, kernel_, stride_,
                  pad_, oh, ow, dx.col(s).data());
  return dx;
}

void Conv2d::collect_params(const std::string& prefix,
                            std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &dw_});
  out.push_back({prefix + ".b", &b_, &db_});
}

std::unique_ptr<Layer> Conv2d::clone() const {
  return std::make_unique<Conv2d>(*this);
}

std::string Conv2d::describe() const {
  std::ostringstream out;
  out << "conv2d(" << in_channels_ << "x" << in_h_ << "x" << in_w_ << "->"
      << out_channels_ << ",k" << kernel_ << ",s" << stride_ << ",p" << pad_
      << ")";
  return out.str();
}

// ------------------------------------------------------- transposed conv

ConvTranspose2d::ConvTranspose2d(int in_channels, int in_h, int in_w,
                                 int out_channels, int kernel, int stride,
                                 int pad, Rng& rng)
    : in_channels_(in_channels), in_h_(in_h), in_w_(in_w),
      out_channels_(out_channels), kernel_(kernel), stride_(stride), pad_(pad),
      w_(in_channels, out_channels * kernel * kernel), b_(out_channels, 1),
      dw_(Matrix::Zero(in_channels, out_channels * kernel * kernel)),
      db_(Matrix::Zero(out_channels, 1)) {
  if (out_h() <= 0 || out_w() <= 0)
    throw ConfigError("conv_transpose2d: non-positive output size");
  const int fan_in = out_channels * kernel * kernel;
  fan_in_uniform(w_, fan_in, rng);
  fan_in_uniform(b_, fan_in, rng);
}

Matrix ConvTranspose2d::forward(const Matrix& x, Phase) {
  const Eigen::Index batch = x.cols();
  const Eigen::Index ihiw = static_cast<Eigen::Index>(in_h_) * in_w_;
  if (x.rows() != static_cast<Eigen::Index>(in_channels_) * ihiw)
    throw ShapeMismatch("conv_transpose2d: input dim mismatch");
  x_ = x;

  const int oh = out_h(), ow = out_w();
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(out_channels_) * oh * ow,
                          batch);
  Matrix x_mat(in_channels_, ihiw);
  for (Eigen::Index s = 0; s < batch; ++s) {
    for (int c = 0; c < in_channels_; ++c)
      x_mat.row(c) = x.block(static_cast<Eigen::Index>(c) * ihiw, s, ihiw, 1)
                         .transpose();
    // cols(row=(oc*k+ky)*k+kx, p=(iy*in_w+ix)); scatter is the col2im of the
    // matching forward convolution.
    const Matrix cols = w_.transpose() * x_mat;
    col2im_sample(cols, 0, out_channels_, oh, ow, kernel_, stride_, pad_,
                  in_h_, in_w_, y.col(s).data());
    for (int oc = 0; oc < out_channels_; ++oc)
      y.block(static_cast<Eigen::Index>(oc) * oh * ow, s, oh * ow, 1)
          .array() += b_(oc, 0);
  }
  return y;
}

Matrix ConvTranspose2d::backward(const Matrix& grad_out) {
  const Eigen::Index batch = grad_out.cols();
  const Eigen::Index ihiw = static_cast<Eigen::Index>(in_h_) * in_w_;
  const int oh = out_h(), ow = out_w();

  Matrix dx(static_cast<Eigen::Index>(in_channels_) * ihiw, batch);
  Matrix dcols(static_cast<Eigen::Index>(out_channels_) * kernel_ * kernel_,
               ihiw);
  Matrix x_mat(in_channels_, ihiw);
  for (Eigen::Index s = 0; s < batch; ++s) {
    im2col_sample(grad_out.col(s).data(), out_channels_, oh, ow, kernel_,
                  stride_, pad_, in_h_, in_w_, dcols, 0);
    const Matrix dx_mat = w_ * dcols;  // (in_ch, ihiw)
    for (int c = 0; c < in_channels_; ++c)
      dx.block(static_cast<Eigen::Index>(c) * ihiw, s, ihiw, 1) =
          dx_mat.row(c).transpose();

    for (int c = 0; c < in_channels_; ++c)
      x_mat.row(c) = x_.block(static_cast<Eigen::Index>(c) * ihiw, s, ihiw, 1)
                         .transpose();
    dw_.noalias() += x_mat * dcols.transpose();
    for (int oc = 0; oc < out_channels_; ++oc)
      db_(oc, 0) += grad_out
                        .block(static_cast<Eigen::Index>(oc) * oh * ow, s,
                               oh * ow, 1)
                        .sum();
  }
  return dx;
}

void ConvTranspose2d::collect_params(const std::string& prefix,
                                     std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &dw_});
  out.push_back({prefix + ".b", &b_, &db_});
}

std::unique_ptr<Layer> ConvTranspose2d::clone() const {
  return std::make_unique<ConvTranspose2d>(*this);
}

std::string ConvTranspose2d::describe() const {
  std::ostringstream out;
  out << "conv_transpose2d(" << in_channels_ << "x" << in_h_ << "x" << in_w_
      << "->" << out_channels_ << ",k" << kernel_ << ",s" << stride_ << ",p"
      << pad_ << ")";
  return out.str();
}

// ------------------------------------------------------------ sequential

Matrix Sequential::forward(const Matrix& x, Phase phase) {
  Matrix h = x;
  for (auto& layer : layers_) h = layer->forward(h, phase);
  return h;
}

Matrix Sequential::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return g;
}

std::vector<ParamRef> Sequential::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params(prefix + "[" + std::to_string(i) + "]", out);
  return out;
}

std::vector<ParamRef> Sequential::buffers(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_buffers(prefix + "[" + std::to_string(i) + "]", out);
  return out;
}

void Sequential::zero_grads() { nn::zero_grads(params()); }

Sequential Sequential::clone() const {
  Sequential copy;
  for (const auto& layer : layers_) copy.add(layer->clone());
  return copy;
}

std::string Sequential::describe() const {
  std::string out;
  for (const auto& layer : layers_) {
    if (!out.empty()) out += "|";
    out += layer->describe();
  }
  return out;
}

// ------------------------------------------------------------- utilities

void soft_update(Sequential& target, Sequential& source, double tau) {
  auto tp = target.params();
  auto sp = source.params();
  auto tb = target.buffers();
  auto sb = source.buffers();
  if (tp.size() != sp.size() || tb.size() != sb.size())
    throw ShapeMismatch("soft_update: network structure mismatch");
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i].value->rows() != sp[i].value->rows() ||
        tp[i].value->cols() != sp[i].value->cols())
      throw ShapeMismatch("soft_update: parameter shape mismatch at " +
                          tp[i].name);
    *tp[i].value = tau * *sp[i].value + (1.0 - tau) * *tp[i].value;
  }
  for (std::size_t i = 0; i < tb.size(); ++i)
    *tb[i].value = tau * *sb[i].value + (1.0 - tau) * *tb[i].value;
  parameter_update_counter().fetch_add(1, std::memory_order_relaxed);
}

void hard_update(Sequential& target, Sequential& source) {
  soft_update(target, source, 1.0);
}

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params)
    if (p.grad) p.grad->setZero();
}

void clip_grad_norm(const std::vector<ParamRef>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double total = 0.0;
  for (const auto& p : params)
    if (p.grad) total += p.grad->squaredNorm();
  total = std::sqrt(total);
  if (total <= max_norm) return;
  const double scale = max_norm / total;
  for (const auto& p : params)
    if (p.grad) *p.grad *= scale;
}

// ------------------------------------------------------------------ adam

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Matrix& g = *params_[i].grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i].array().matrix() +
            (1.0 - beta2_) * g.array().square().matrix();
    const auto m_hat = m_[i].array() / bias1;
    const auto v_hat = v_[i].array() / bias2;
    params_[i].value->array() -= lr_ * m_hat / (v_hat.sqrt() + eps_);
    g.setZero();
  }
  parameter_update_counter().fetch_add(1, std::memory_order_relaxed);
}

std::string digest_tensors(const std::vector<ParamRef>& tensors) {
  Sha256 h;
  for (const auto& t : tensors)
    h.update(t.value->data(), static_cast<std::size_t>(t.value->size()) *
                                  sizeof(double));
  return h.hex_digest();
}

}  // namespace crossmodal::nn
