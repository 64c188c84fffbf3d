#pragma once

#include <array>
#include <deque>
#include <optional>

#include "crossmodal/acoustics.hpp"
#include "crossmodal/environment.hpp"
#include "crossmodal/rng.hpp"

namespace crossmodal::envs {

struct PendulumState {
  double theta{0.0};      // radians, wrapped to [-pi, pi]; 0 = upright
  double theta_dot{0.0};  // radians/s, clipped to [-8, 8]
};

struct PendulumConfig {
  // Classic-control reference dynamics.
  double gravity{10.0};
  double mass{1.0};
  double length{1.0};
  double dt{0.05};
  double max_torque{2.0};
  double max_speed{8.0};
  int max_episode_frames{300};

  // Observation.
  int frame_stack{2};
  int image_height{60};
  int image_width{60};

  // Sound model: a tone at the tip, heard through Doppler shift and
  // inverse-square decay.
  double emitter_frequency_hz{440.0};
  double inverse_square_k{1.0};
  double speed_of_sound{20.0};
  bool doppler_normalize_displacement{false};
  // Receiver order fixed: bottom-left, bottom-right, middle-top. The top
  // receiver sits just above the tip's reach so the inverse-square law stays
  // finite when the pendulum is upright.
  std::vector<acoustics::SoundReceiver> receivers{
      {"bl", {-1.0, -1.0}, {0.0, 0.0}},
      {"br", {1.0, -1.0}, {0.0, 0.0}},
      {"mt", {0.0, 1.15}, {0.0, 0.0}},
  };

  void validate() const;
};

/// Sound-augmented swing-up pendulum. Reward is
/// -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2); episodes end only at the frame
/// limit.
class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(PendulumConfig cfg = {});

  MultimodalObservation reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  MultimodalObservation observe() const override;

  std::string name() const override { return "pendulum"; }
  int action_count() const override { return 0; }
  double action_bound() const override { return cfg_.max_torque; }
  int max_episode_frames() const override { return cfg_.max_episode_frames; }
  std::array<int, 3> image_shape() const override;
  std::vector<int> sound_shape() const override;

  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s);  // test hook
  int elapsed_frames() const { return elapsed_frames_; }

  /// Single unstacked frame for the current state (for debug dumps).
  std::vector<double> render_frame() const;
  /// (frequency, amplitude) per receiver for the current state.
  std::vector<std::array<double, 2>> sound_frame() const;

 private:
  void push_observation();

  PendulumConfig cfg_;
  PendulumState state_;
  std::optional<Rng> rng_;
  int elapsed_frames_{0};
  bool episode_active_{false};
  std::deque<std::vector<double>> image_stack_;
  std::deque<std::vector<double>> sound_stack_;
};

}  // namespace crossmodal::envs
