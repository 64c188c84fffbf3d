#include "crossmodal/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crossmodal::acoustics {

void AcousticsConfig::validate() const {
  if (!(speed_of_sound > 0.0))
    throw ConfigError("acoustics: speed_of_sound must be positive");
  if (sample_rate_hz <= 0)
    throw ConfigError("acoustics: sample_rate_hz must be positive");
  if (samples_per_frame < 1)
    throw ConfigError("acoustics: samples_per_frame must be >= 1");
  if (!(max_amplitude > 0.0))
    throw ConfigError("acoustics: max_amplitude must be positive");
  if (pcm_bit_depth != 16)
    throw ConfigError("acoustics: only 16-bit PCM is supported");
}

double doppler_frequency(const SoundEmitter& emitter,
                         const SoundReceiver& receiver, double speed_of_sound,
                         bool normalize_displacement) {
  Vec2 to_emitter = emitter.position - receiver.position;   // e - rho
  Vec2 to_receiver = receiver.position - emitter.position;  // rho - e
  if (normalize_displacement) {
    const double d = to_emitter.norm();
    if (d <= kGeometryGuard)
      throw DegenerateGeometry(
          "doppler_frequency: emitter and receiver coincide");
    to_emitter = to_emitter * (1.0 / d);
    to_receiver = to_receiver * (1.0 / d);
  }
  const double denominator = speed_of_sound - emitter.velocity.dot(to_receiver);
  if (denominator <= kGeometryGuard)
    throw DegenerateGeometry(
        "doppler_frequency: non-positive denominator (supersonic or "
        "overlapping configuration)");
  const double numerator = speed_of_sound + receiver.velocity.dot(to_emitter);
  return emitter.base_frequency_hz * numerator / denominator;
}

double inverse_square_amplitude(const Vec2& emitter_pos,
                                const Vec2& receiver_pos, double k) {
  const double d2 = (emitter_pos - receiver_pos).squared_norm();
  if (d2 <= kGeometryGuard)
    throw DegenerateGeometry(
        "inverse_square_amplitude: emitter on top of receiver");
  return k / d2;
}

double gaussian_decay_amplitude(const SoundEmitter& emitter,
                                const Vec2& receiver_pos, double delta) {
  if (delta < 0.0)
    throw RangeError("gaussian_decay_amplitude: delta must be >= 0");
  const double d2 = (emitter.position - receiver_pos).squared_norm();
  return emitter.base_amplitude * std::exp(-delta * d2);
}

std::vector<std::vector<double>> mix_frame_waves(
    std::span<const EmitterWave> emitters, std::size_t receiver_count,
    const AcousticsConfig& cfg) {
  cfg.validate();
  const int n = cfg.samples_per_frame;
  std::vector<std::vector<double>> waves(receiver_count,
                                         std::vector<double>(n, 0.0));
  const double step = 2.0 * std::numbers::pi / cfg.sample_rate_hz;
  for (const EmitterWave& em : emitters) {
    if (em.amplitude_per_receiver.size() != receiver_count)
      throw DimensionMismatch(
          "mix_frame_waves: one amplitude per receiver required");
    for (int k = 0; k < n; ++k) {
      const double s = std::sin(em.frequency_hz * k * step);
      for (std::size_t j = 0; j < receiver_count; ++j)
        waves[j][k] += em.amplitude_per_receiver[j] * s;
    }
  }
  return waves;
}

std::int16_t encode_pcm16_sample(double x, double max_amplitude) {
  if (!(std::abs(x) <= max_amplitude))
    throw RangeError("encode_pcm16: sample outside [-a_M, a_M]");
  // Symmetric quantization; -32768 is never produced.
  return static_cast<std::int16_t>(std::lround(x / max_amplitude * 32767.0));
}

PcmBlock encode_pcm16(std::span<const double> wave, double max_amplitude) {
  PcmBlock out(wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i)
    out[i] = encode_pcm16_sample(wave[i], max_amplitude);
  return out;
}

std::vector<PcmBlock> synthesize_frame_audio(
    std::span<const EmitterWave> emitters, std::size_t receiver_count,
    const AcousticsConfig& cfg) {
  auto waves = mix_frame_waves(emitters, receiver_count, cfg);
  std::vector<PcmBlock> blocks;
  blocks.reserve(receiver_count);
  for (auto& w : waves) {
    for (double& x : w) x = std::clamp(x, -cfg.max_amplitude, cfg.max_amplitude);
    blocks.push_back(encode_pcm16(w, cfg.max_amplitude));
  }
  return blocks;
}

}  // namespace crossmodal::acoustics
