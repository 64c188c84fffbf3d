#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crossmodal/common.hpp"
#include "crossmodal/rng.hpp"

namespace crossmodal::nn {

// Activations are (features, batch) matrices; one column per sample.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Phase { train, eval };

/// Global count of parameter-mutation events (optimizer steps, hard/soft
/// target copies). Used to assert zero-shot evaluation performs no updates.
std::atomic<std::uint64_t>& parameter_update_counter();

struct ParamRef {
  std::string name;
  Matrix* value{nullptr};
  Matrix* grad{nullptr};  // null for buffers (e.g. batch-norm running stats)
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x, Phase phase) = 0;
  /// Accumulates parameter gradients; must be called right after the forward
  /// pass whose caches it consumes. Returns the input gradient.
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamRef>& out) {}
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<ParamRef>& out) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string describe() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(int in, int out, Rng& rng);
  Matrix forward(const Matrix& x, Phase phase) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override;

  int in_features() const { return static_cast<int>(w_.cols()); }
  int out_features() const { return static_cast<int>(w_.rows()); }

 private:
  Matrix w_, b_, dw_, db_;
  Matrix x_;
};

class ReLU final : public Layer {
 public:
  Matrix forward(const Matrix& x, Phase) override;
  Matrix backward(const Matrix& grad_out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override { return "relu"; }

 private:
  Matrix x_;
};

/// x * sigmoid(x).
class Swish final : public Layer {
 public:
  Matrix forward(const Matrix& x, Phase) override;
  Matrix backward(const Matrix& grad_out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override { return "swish"; }

 private:
  Matrix x_;
};

class Sigmoid final : public Layer {
 public:
  Matrix forward(const Matrix& x, Phase) override;
  Matrix backward(const Matrix& grad_out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override { return "sigmoid"; }

 private:
  Matrix y_;
};

class Tanh final : public Layer {
 public:
  Matrix forward(const Matrix& x, Phase) override;
  Matrix backward(const Matrix& grad_out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override { return "tanh"; }

 private:
  Matrix y_;
};

/// y = s * x; used to map a tanh head onto a symmetric action range.
class Scale final : public Layer {
 public:
  explicit Scale(double s) : s_(s) {}
  Matrix forward(const Matrix& x, Phase) override { return s_ * x; }
  Matrix backward(const Matrix& g) override { return s_ * g; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Scale>(s_);
  }
  std::string describe() const override;

 private:
  double s_;
};

class BatchNorm1d final : public Layer {
 public:
  explicit BatchNorm1d(int features, double momentum = 0.1,
                       double eps = 1e-5);
  Matrix forward(const Matrix& x, Phase phase) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix,
                       std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override;

 private:
  int features_;
  double momentum_, eps_;
  Matrix gamma_, beta_, dgamma_, dbeta_;
  Matrix running_mean_, running_var_;
  // caches
  Matrix xhat_;
  Vector inv_std_;
  Phase last_phase_{Phase::train};
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int in_h, int in_w, int out_channels, int kernel,
         int stride, int pad, Rng& rng);
  Matrix forward(const Matrix& x, Phase phase) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override;

  int out_h() const { return (in_h_ + 2 * pad_ - kernel_) / stride_ + 1; }
  int out_w() const { return (in_w_ + 2 * pad_ - kernel_) / stride_ + 1; }
  int out_dim() const { return out_channels_ * out_h() * out_w(); }

 private:
  int in_channels_, in_h_, in_w_, out_channels_, kernel_, stride_, pad_;
  Matrix w_, b_, dw_, db_;  // w: (out_ch, in_ch*k*k)
  Matrix col_;              // (in_ch*k*k, B*out_h*out_w)
};

class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(int in_channels, int in_h, int in_w, int out_channels,
                  int kernel, int stride, int pad, Rng& rng);
  Matrix forward(const Matrix& x, Phase phase) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  std::string describe() const override;

  int out_h() const { return (in_h_ - 1) * stride_ - 2 * pad_ + kernel_; }
  int out_w() const { return (in_w_ - 1) * stride_ - 2 * pad_ + kernel_; }
  int out_dim() const { return out_channels_ * out_h() * out_w(); }

 private:
  int in_channels_, in_h_, in_w_, out_channels_, kernel_, stride_, pad_;
  Matrix w_, b_, dw_, db_;  // w: (in_ch, out_ch*k*k)
  Matrix x_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;
  Sequential(const Sequential& o) { *this = o.clone(); }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) *this = o.clone();
    return *this;
  }

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix forward(const Matrix& x, Phase phase);
  Matrix backward(const Matrix& grad_out);

  std::vector<ParamRef> params(const std::string& prefix = "");
  std::vector<ParamRef> buffers(const std::string& prefix = "");
  void zero_grads();
  Sequential clone() const;
  std::string describe() const;
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// theta_target <- tau * theta_source + (1 - tau) * theta_target, elementwise
/// over all parameters and buffers. Counts as one parameter-update event.
void soft_update(Sequential& target, Sequential& source, double tau);

/// theta_target <- theta_source. Counts as one parameter-update event.
void hard_update(Sequential& target, Sequential& source);

void zero_grads(const std::vector<ParamRef>& params);

/// Scales gradients so their global L2 norm is at most `max_norm`.
void clip_grad_norm(const std::vector<ParamRef>& params, double max_norm);

class Adam {
 public:
  explicit Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  /// One update from the accumulated gradients; zeroes them afterwards.
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t step_count() const { return t_; }

  // Optimizer-state serialization (see agents checkpointing).
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  const std::vector<ParamRef>& params() const { return params_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_{0};
};

/// SHA-256 over the raw bytes of the given tensors, in order.
std::string digest_tensors(const std::vector<ParamRef>& tensors);

}  // namespace crossmodal::nn
