#include "crossmodal/pendulum_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crossmodal::envs {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  // Wrap to [-pi, pi].
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// Signed distance from pixel center to segment, for crisp rasterization.
double dist_to_segment(double px, double py, double ax, double ay, double bx,
                       double by) {
  const double vx = bx - ax, vy = by - ay;
  const double wx = px - ax, wy = py - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

void PendulumConfig::validate() const {
  if (dt <= 0.0) throw ConfigError("pendulum: dt must be positive");
  if (frame_stack < 1) throw ConfigError("pendulum: frame_stack must be >= 1");
  if (image_height <= 0 || image_width <= 0)
    throw ConfigError("pendulum: image size must be positive");
  if (emitter_frequency_hz <= 0.0)
    throw ConfigError("pendulum: emitter frequency must be positive");
  if (speed_of_sound <= 0.0)
    throw ConfigError("pendulum: speed of sound must be positive");
  if (receivers.empty()) throw ConfigError("pendulum: receivers required");
  if (max_episode_frames < 1)
    throw ConfigError("pendulum: max_episode_frames must be >= 1");
}

PendulumEnv::PendulumEnv(PendulumConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::array<int, 3> PendulumEnv::image_shape() const {
  return {cfg_.frame_stack, cfg_.image_height, cfg_.image_width};
}

std::vector<int> PendulumEnv::sound_shape() const {
  return {cfg_.frame_stack, static_cast<int>(cfg_.receivers.size()), 2};
}

MultimodalObservation PendulumEnv::reset(std::uint64_t seed) {
  rng_.emplace(seed);
  state_.theta = rng_->uniform(-kPi, kPi);
  state_.theta_dot = rng_->uniform(-1.0, 1.0);
  elapsed_frames_ = 0;
  episode_active_ = true;
  image_stack_.clear();
  sound_stack_.clear();
  // Both stack slots filled with the initial frame.
  for (int i = 0; i < cfg_.frame_stack; ++i) push_observation();
  return observe();
}

void PendulumEnv::set_state(const PendulumState& s) {
  state_.theta = wrap_angle(s.theta);
  state_.theta_dot = std::clamp(s.theta_dot, -cfg_.max_speed, cfg_.max_speed);
  if (!episode_active_) {
    episode_active_ = true;
    elapsed_frames_ = 0;
    rng_.emplace(0);
  }
  image_stack_.clear();
  sound_stack_.clear();
  for (int i = 0; i < cfg_.frame_stack; ++i) push_observation();
}

StepResult PendulumEnv::step(const Action& action) {
  if (!episode_active_)
    throw EpisodeFinished("pendulum: step after terminal; call reset");
  const double* torque_in = std::get_if<double>(&action);
  if (!torque_in)
    throw RangeError("pendulum: continuous torque action required");
  const double u = std::clamp(*torque_in, -cfg_.max_torque, cfg_.max_torque);

  const double g = cfg_.gravity, m = cfg_.mass, l = cfg_.length;
  const double th = state_.theta, thdot = state_.theta_dot;

  const double reward =
      -(th * th + 0.1 * thdot * thdot + 0.001 * u * u);

  double new_thdot =
      thdot + (3.0 * g / (2.0 * l) * std::sin(th) + 3.0 / (m * l * l) * u) *
                  cfg_.dt;
  new_thdot = std::clamp(new_thdot, -cfg_.max_speed, cfg_.max_speed);
  state_.theta = wrap_angle(th + new_thdot * cfg_.dt);
  state_.theta_dot = new_thdot;

  ++elapsed_frames_;
  const bool terminal = elapsed_frames_ >= cfg_.max_episode_frames;
  if (terminal) episode_active_ = false;

  push_observation();
  StepResult result;
  result.observation = observe();
  result.reward = reward;
  result.terminal = terminal;
  if (terminal) result.info["cause"] = "frame_limit";
  return result;
}

std::vector<double> PendulumEnv::render_frame() const {
  const int h = cfg_.image_height, w = cfg_.image_width;
  std::vector<double> frame(static_cast<std::size_t>(h) * w, 0.0);

  // Tip in world units; theta = 0 points up.
  const double tip_x = std::sin(state_.theta);
  const double tip_y = std::cos(state_.theta);

  // World [-1.2, 1.2]^2 onto the pixel grid, y up.
  const double scale = std::min(h, w) / 2.4;
  const double cx = w / 2.0, cy = h / 2.0;
  const double ax = cx, ay = cy;
  const double bx = cx + tip_x * scale;
  const double by = cy - tip_y * scale;

  const double rod_half_width = 1.5;
  const double tip_radius = 3.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double rod_d = dist_to_segment(px, py, ax, ay, bx, by);
      const double tip_d = std::hypot(px - bx, py - by);
      if (rod_d <= rod_half_width || tip_d <= tip_radius)
        frame[static_cast<std::size_t>(y) * w + x] = 1.0;
    }
  }
  return frame;
}

std::vector<std::array<double, 2>> PendulumEnv::sound_frame() const {
  const double l = cfg_.length;
  acoustics::SoundEmitter emitter;
  emitter.id = "tip";
  emitter.position = {l * std::sin(state_.theta), l * std::cos(state_.theta)};
  emitter.velocity = {state_.theta_dot * l * std::cos(state_.theta),
                      -state_.theta_dot * l * std::sin(state_.theta)};
  emitter.base_frequency_hz = cfg_.emitter_frequency_hz;
  emitter.base_amplitude = 1.0;

  std::vector<std::array<double, 2>> out;
  out.reserve(cfg_.receivers.size());
  for (const auto& r : cfg_.receivers) {
    const double f = acoustics::doppler_frequency(
        emitter, r, cfg_.speed_of_sound, cfg_.doppler_normalize_displacement);
    const double a = acoustics::inverse_square_amplitude(
        emitter.position, r.position, cfg_.inverse_square_k);
    out.push_back({f, a});
  }
  return out;
}

void PendulumEnv::push_observation() {
  if (image_active_) {
    image_stack_.push_back(render_frame());
    while (static_cast<int>(image_stack_.size()) > cfg_.frame_stack)
      image_stack_.pop_front();
  }
  if (sound_active_) {
    auto fa = sound_frame();
    std::vector<double> flat;
    flat.reserve(fa.size() * 2);
    for (const auto& p : fa) {
      flat.push_back(p[0]);
      flat.push_back(p[1]);
    }
    sound_stack_.push_back(std::move(flat));
    while (static_cast<int>(sound_stack_.size()) > cfg_.frame_stack)
      sound_stack_.pop_front();
  }
}

MultimodalObservation PendulumEnv::observe() const {
  MultimodalObservation obs;
  obs.image_shape = image_shape();
  obs.sound_shape = sound_shape();
  if (image_active_) {
    obs.has_image = true;
    obs.image.reserve(image_stack_.size() * image_stack_.front().size());
    for (const auto& f : image_stack_)
      obs.image.insert(obs.image.end(), f.begin(), f.end());
  }
  if (sound_active_) {
    obs.has_sound = true;
    obs.sound.reserve(sound_stack_.size() * sound_stack_.front().size());
    for (const auto& f : sound_stack_)
      obs.sound.insert(obs.sound.end(), f.begin(), f.end());
  }
  return obs;
}

}  // namespace crossmodal::envs
