#pragma once

#include <array>
#include <deque>
#include <optional>

#include "crossmodal/acoustics.hpp"
#include "crossmodal/environment.hpp"
#include "crossmodal/rng.hpp"

namespace crossmodal::envs {

enum class EnemySide { left, right };

struct Enemy {
  Vec2 position;
  EnemySide side{EnemySide::left};
  bool alive{true};
};

struct Bullet {
  Vec2 position;
  Vec2 velocity;
};

struct HyperHotState {
  double player_x{0.0};
  int player_cooldown{0};
  std::vector<Enemy> enemies;
  std::vector<Bullet> player_bullets;
  std::vector<Bullet> enemy_bullets;
  int elapsed_frames{0};
  int march_direction{1};
  int enemy_fire_countdown{0};
};

struct HyperHotConfig {
  // Entity tone frequencies: left enemies, right enemies, enemy bullets,
  // player bullets.
  std::array<double, 4> emitter_frequencies_hz{261.0, 329.0, 392.0, 466.0};
  double base_amplitude{1.0};
  double max_amplitude{1.0};
  double decay_delta{0.025};
  double speed_of_sound{20.0};
  int sample_rate_hz{31400};
  int samples_per_frame{1047};

  int frame_stack{2};
  int image_height{80};
  int image_width{80};
  int max_episode_frames{450};
  int fps{30};

  // Mechanics, in playfield units ([-1,1]^2) and frames.
  int enemies_per_side{4};
  double enemy_y{0.7};
  double enemy_half_width{0.06};
  double enemy_half_height{0.04};
  double enemy_march_speed{0.25};       // units/s
  double enemy_bullet_speed{1.5};       // units/s, downwards
  double player_bullet_speed{3.0};      // units/s, upwards
  double player_speed{1.5};             // units/s
  int fire_cooldown_frames{10};
  int enemy_fire_period_frames{30};
  int enemy_fire_jitter_frames{10};     // period +- uniform jitter
  double player_y{-0.85};
  double player_half_width{0.1};
  double player_half_height{0.025};
  double bullet_half_width{0.012};
  double bullet_half_height{0.03};
  double wall_x{0.95};

  void validate() const;
};

enum class HyperHotAction : int { noop = 0, left = 1, right = 2, fire = 3 };

/// Top-down shooter where every live entity emits a tone. Reward is +10 when
/// the last enemy dies, -1 when the player is hit or time runs out, else 0;
/// an episode terminates exactly on non-zero reward.
class HyperHotEnv final : public Environment {
 public:
  explicit HyperHotEnv(HyperHotConfig cfg = {});

  MultimodalObservation reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  MultimodalObservation observe() const override;

  std::string name() const override { return "hyperhot"; }
  int action_count() const override { return 4; }
  double action_bound() const override { return 0.0; }
  int max_episode_frames() const override { return cfg_.max_episode_frames; }
  std::array<int, 3> image_shape() const override;
  std::vector<int> sound_shape() const override;

  const HyperHotState& state() const { return state_; }
  HyperHotState& mutable_state() { return state_; }  // test hook

  std::vector<double> render_frame() const;
  /// Live-entity emitters with per-receiver amplitudes for the current state.
  std::vector<acoustics::EmitterWave> frame_emitters() const;
  std::vector<acoustics::SoundReceiver> receivers() const;
  std::vector<acoustics::PcmBlock> synthesize_sound() const;
  acoustics::AcousticsConfig acoustics_config() const;

 private:
  void push_observation();
  double frame_dt() const { return 1.0 / cfg_.fps; }

  HyperHotConfig cfg_;
  HyperHotState state_;
  std::optional<Rng> rng_;
  bool episode_active_{false};
  std::deque<std::vector<double>> image_stack_;
  std::deque<std::vector<double>> sound_stack_;
};

}  // namespace crossmodal::envs
