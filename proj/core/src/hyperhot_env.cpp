#include "crossmodal/hyperhot_env.hpp"

#include <algorithm>
#include <cmath>

namespace crossmodal::envs {

namespace {

bool overlap(const Vec2& ca, double ha_w, double ha_h, const Vec2& cb,
             double hb_w, double hb_h) {
  return std::abs(ca.x - cb.x) <= ha_w + hb_w &&
         std::abs(ca.y - cb.y) <= ha_h + hb_h;
}

}  // namespace

void HyperHotConfig::validate() const {
  for (double f : emitter_frequencies_hz)
    if (f <= 0.0) throw ConfigError("hyperhot: emitter frequencies must be > 0");
  if (base_amplitude < 0.0)
    throw ConfigError("hyperhot: base amplitude must be >= 0");
  if (max_amplitude <= 0.0)
    throw ConfigError("hyperhot: max amplitude must be > 0");
  if (decay_delta < 0.0) throw ConfigError("hyperhot: decay delta must be >= 0");
  if (sample_rate_hz <= 0 || samples_per_frame < 1)
    throw ConfigError("hyperhot: invalid audio sampling constants");
  if (frame_stack < 1) throw ConfigError("hyperhot: frame_stack must be >= 1");
  if (image_height <= 0 || image_width <= 0)
    throw ConfigError("hyperhot: image size must be positive");
  if (max_episode_frames < 1 || fps < 1)
    throw ConfigError("hyperhot: timing constants must be positive");
  if (enemies_per_side < 1)
    throw ConfigError("hyperhot: at least one enemy per side");
}

HyperHotEnv::HyperHotEnv(HyperHotConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::array<int, 3> HyperHotEnv::image_shape() const {
  return {cfg_.frame_stack, cfg_.image_height, cfg_.image_width};
}

std::vector<int> HyperHotEnv::sound_shape() const {
  return {cfg_.frame_stack, 4, cfg_.samples_per_frame};
}

acoustics::AcousticsConfig HyperHotEnv::acoustics_config() const {
  acoustics::AcousticsConfig a;
  a.speed_of_sound = cfg_.speed_of_sound;
  a.decay_delta = cfg_.decay_delta;
  a.sample_rate_hz = cfg_.sample_rate_hz;
  a.samples_per_frame = cfg_.samples_per_frame;
  a.max_amplitude = cfg_.max_amplitude;
  return a;
}

MultimodalObservation HyperHotEnv::reset(std::uint64_t seed) {
  rng_.emplace(seed);
  state_ = HyperHotState{};
  const int n = cfg_.enemies_per_side;
  // Two groups of n, mirrored about the center line.
  for (int side = 0; side < 2; ++side) {
    for (int i = 0; i < n; ++i) {
      Enemy e;
      e.side = side == 0 ? EnemySide::left : EnemySide::right;
      const double offset = 0.15 + 0.2 * (n - 1 - i);
      e.position = {side == 0 ? -offset : offset, cfg_.enemy_y};
      e.alive = true;
      state_.enemies.push_back(e);
    }
  }
  state_.march_direction = 1;
  state_.enemy_fire_countdown =
      cfg_.enemy_fire_period_frames +
      rng_->uniform_int(2 * cfg_.enemy_fire_jitter_frames + 1) -
      cfg_.enemy_fire_jitter_frames;
  episode_active_ = true;
  image_stack_.clear();
  sound_stack_.clear();
  for (int i = 0; i < cfg_.frame_stack; ++i) push_observation();
  return observe();
}

StepResult HyperHotEnv::step(const Action& action) {
  if (!episode_active_)
    throw EpisodeFinished("hyperhot: step after terminal; call reset");
  const int* a = std::get_if<int>(&action);
  if (!a || *a < 0 || *a >= action_count())
    throw RangeError("hyperhot: action must be in {noop,left,right,fire}");

  const double dt = frame_dt();

  // Player movement and fire.
  const auto act = static_cast<HyperHotAction>(*a);
  if (act == HyperHotAction::left)
    state_.player_x -= cfg_.player_speed * dt;
  else if (act == HyperHotAction::right)
    state_.player_x += cfg_.player_speed * dt;
  const double x_limit = cfg_.wall_x - cfg_.player_half_width;
  state_.player_x = std::clamp(state_.player_x, -x_limit, x_limit);
  if (state_.player_cooldown > 0) --state_.player_cooldown;
  if (act == HyperHotAction::fire && state_.player_cooldown == 0) {
    Bullet b;
    b.position = {state_.player_x, cfg_.player_y + cfg_.player_half_height};
    b.velocity = {0.0, cfg_.player_bullet_speed};
    state_.player_bullets.push_back(b);
    state_.player_cooldown = cfg_.fire_cooldown_frames;
  }

  // Bullets advance.
  for (auto& b : state_.player_bullets) b.position.y += b.velocity.y * dt;
  for (auto& b : state_.enemy_bullets) b.position.y += b.velocity.y * dt;
  std::erase_if(state_.player_bullets,
                [](const Bullet& b) { return b.position.y > 1.0; });
  std::erase_if(state_.enemy_bullets,
                [](const Bullet& b) { return b.position.y < -1.0; });

  // Enemy march with deterministic wall reversal based on the live edge.
  double live_min = 1.0, live_max = -1.0;
  bool any_alive = false;
  for (const auto& e : state_.enemies) {
    if (!e.alive) continue;
    any_alive = true;
    live_min = std::min(live_min, e.position.x - cfg_.enemy_half_width);
    live_max = std::max(live_max, e.position.x + cfg_.enemy_half_width);
  }
  if (any_alive) {
    const double dx = state_.march_direction * cfg_.enemy_march_speed * dt;
    if ((state_.march_direction > 0 && live_max + dx >= cfg_.wall_x) ||
        (state_.march_direction < 0 && live_min + dx <= -cfg_.wall_x))
      state_.march_direction = -state_.march_direction;
    const double step_dx = state_.march_direction * cfg_.enemy_march_speed * dt;
    for (auto& e : state_.enemies)
      if (e.alive) e.position.x += step_dx;
  }

  // Enemy fire from a random live enemy.
  if (any_alive && --state_.enemy_fire_countdown <= 0) {
    std::vector<int> live;
    for (int i = 0; i < static_cast<int>(state_.enemies.size()); ++i)
      if (state_.enemies[i].alive) live.push_back(i);
    const Enemy& shooter = state_.enemies[live[rng_->uniform_int(
        static_cast<int>(live.size()))]];
    Bullet b;
    b.position = {shooter.position.x,
                  shooter.position.y - cfg_.enemy_half_height};
    b.velocity = {0.0, -cfg_.enemy_bullet_speed};
    state_.enemy_bullets.push_back(b);
    state_.enemy_fire_countdown =
        cfg_.enemy_fire_period_frames +
        rng_->uniform_int(2 * cfg_.enemy_fire_jitter_frames + 1) -
        cfg_.enemy_fire_jitter_frames;
  }

  // Player bullets vs enemies; one bullet kills one enemy.
  std::erase_if(state_.player_bullets, [&](const Bullet& b) {
    for (auto& e : state_.enemies) {
      if (!e.alive) continue;
      if (overlap(b.position, cfg_.bullet_half_width, cfg_.bullet_half_height,
                  e.position, cfg_.enemy_half_width, cfg_.enemy_half_height)) {
        e.alive = false;
        return true;
      }
    }
    return false;
  });

  // Enemy bullets vs player.
  bool player_hit = false;
  const Vec2 player_pos{state_.player_x, cfg_.player_y};
  std::erase_if(state_.enemy_bullets, [&](const Bullet& b) {
    if (overlap(b.position, cfg_.bullet_half_width, cfg_.bullet_half_height,
                player_pos, cfg_.player_half_width, cfg_.player_half_height)) {
      player_hit = true;
      return true;
    }
    return false;
  });

  ++state_.elapsed_frames;

  const bool all_dead = std::none_of(state_.enemies.begin(),
                                     state_.enemies.end(),
                                     [](const Enemy& e) { return e.alive; });
  const bool timeout = state_.elapsed_frames >= cfg_.max_episode_frames;

  StepResult result;
  if (all_dead) {
    result.reward = 10.0;
    result.info["cause"] = "win";
  } else if (player_hit) {
    result.reward = -1.0;
    result.info["cause"] = "player_hit";
  } else if (timeout) {
    result.reward = -1.0;
    result.info["cause"] = "timeout";
  }
  result.terminal = result.reward != 0.0;
  if (result.terminal) episode_active_ = false;

  push_observation();
  result.observation = observe();
  return result;
}

std::vector<acoustics::SoundReceiver> HyperHotEnv::receivers() const {
  const double pw = cfg_.player_half_width;
  return {
      {"lb", {-1.0, -1.0}, {0.0, 0.0}},
      {"rb", {1.0, -1.0}, {0.0, 0.0}},
      {"pl", {state_.player_x - pw, cfg_.player_y}, {0.0, 0.0}},
      {"pr", {state_.player_x + pw, cfg_.player_y}, {0.0, 0.0}},
  };
}

std::vector<acoustics::EmitterWave> HyperHotEnv::frame_emitters() const {
  const auto recv = receivers();
  std::vector<acoustics::EmitterWave> waves;
  auto add = [&](const Vec2& pos, double frequency) {
    acoustics::SoundEmitter em;
    em.position = pos;
    em.base_frequency_hz = frequency;
    em.base_amplitude = cfg_.base_amplitude;
    acoustics::EmitterWave w;
    w.frequency_hz = frequency;
    w.amplitude_per_receiver.reserve(recv.size());
    for (const auto& r : recv)
      w.amplitude_per_receiver.push_back(acoustics::gaussian_decay_amplitude(
          em, r.position, cfg_.decay_delta));
    waves.push_back(std::move(w));
  };
  for (const auto& e : state_.enemies) {
    if (!e.alive) continue;  // dead enemies emit no sound
    add(e.position, e.side == EnemySide::left ? cfg_.emitter_frequencies_hz[0]
                                              : cfg_.emitter_frequencies_hz[1]);
  }
  for (const auto& b : state_.enemy_bullets)
    add(b.position, cfg_.emitter_frequencies_hz[2]);
  for (const auto& b : state_.player_bullets)
    add(b.position, cfg_.emitter_frequencies_hz[3]);
  return waves;
}

std::vector<acoustics::PcmBlock> HyperHotEnv::synthesize_sound() const {
  return acoustics::synthesize_frame_audio(frame_emitters(), 4,
                                           acoustics_config());
}

std::vector<double> HyperHotEnv::render_frame() const {
  const int h = cfg_.image_height, w = cfg_.image_width;
  std::vector<double> frame(static_cast<std::size_t>(h) * w, 0.0);

  auto fill_rect = [&](const Vec2& center, double half_w, double half_h,
                       double intensity) {
    // Playfield [-1,1]^2 to pixels, +y at the top row.
    const int x0 = static_cast<int>(std::floor((center.x - half_w + 1.0) / 2.0 * w));
    const int x1 = static_cast<int>(std::ceil((center.x + half_w + 1.0) / 2.0 * w));
    const int y0 = static_cast<int>(std::floor((1.0 - (center.y + half_h)) / 2.0 * h));
    const int y1 = static_cast<int>(std::ceil((1.0 - (center.y - half_h)) / 2.0 * h));
    for (int y = std::max(0, y0); y < std::min(h, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(w, x1); ++x) {
        double& px = frame[static_cast<std::size_t>(y) * w + x];
        px = std::max(px, intensity);
      }
  };

  for (const auto& e : state_.enemies)
    if (e.alive)
      fill_rect(e.position, cfg_.enemy_half_width, cfg_.enemy_half_height, 0.8);
  for (const auto& b : state_.enemy_bullets)
    fill_rect(b.position, cfg_.bullet_half_width, cfg_.bullet_half_height, 0.4);
  for (const auto& b : state_.player_bullets)
    fill_rect(b.position, cfg_.bullet_half_width, cfg_.bullet_half_height, 0.6);
  fill_rect({state_.player_x, cfg_.player_y}, cfg_.player_half_width,
            cfg_.player_half_height, 1.0);
  return frame;
}

void HyperHotEnv::push_observation() {
  if (image_active_) {
    image_stack_.push_back(render_frame());
    while (static_cast<int>(image_stack_.size()) > cfg_.frame_stack)
      image_stack_.pop_front();
  }
  if (sound_active_) {
    const auto blocks = synthesize_sound();
    std::vector<double> flat;
    flat.reserve(blocks.size() * cfg_.samples_per_frame);
    for (const auto& block : blocks)
      for (std::int16_t s : block) flat.push_back(static_cast<double>(s));
    sound_stack_.push_back(std::move(flat));
    while (static_cast<int>(sound_stack_.size()) > cfg_.frame_stack)
      sound_stack_.pop_front();
  }
}

MultimodalObservation HyperHotEnv::observe() const {
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
