#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crossmodal/common.hpp"

namespace crossmodal::acoustics {

// Denominator / squared-distance guard below which a geometry is treated as
// degenerate (overlapping or supersonic configuration).
inline constexpr double kGeometryGuard = 1e-6;

struct SoundReceiver {
  std::string id;
  Vec2 position;
  Vec2 velocity;  // zero in every shipped scenario
};

struct SoundEmitter {
  std::string id;
  Vec2 position;
  Vec2 velocity;
  double base_frequency_hz{0.0};
  double base_amplitude{0.0};
};

struct AcousticsConfig {
  double speed_of_sound{20.0};
  double inverse_square_k{1.0};
  double decay_delta{0.025};
  int sample_rate_hz{31400};
  int samples_per_frame{1047};
  double max_amplitude{1.0};
  int pcm_bit_depth{16};
  // The propagation model is written with raw displacement vectors; this flag
  // switches to unit vectors for physically consistent units at any distance.
  bool doppler_normalize_displacement{false};

  void validate() const;
};

/// Frequency heard by `receiver` for a tone emitted at `emitter.base_frequency_hz`,
/// shifted by the relative motion of the pair:
///   f' = f0 * (c + rho_dot . (e - rho)) / (c - e_dot . (rho - e))
/// Displacements are unnormalized unless `normalize_displacement` is set.
/// Throws DegenerateGeometry when the denominator falls to the guard.
double doppler_frequency(const SoundEmitter& emitter,
                         const SoundReceiver& receiver, double speed_of_sound,
                         bool normalize_displacement = false);

/// K / ||e - rho||^2. Throws DegenerateGeometry when the squared distance
/// falls to the guard (emitter on top of the receiver).
double inverse_square_amplitude(const Vec2& emitter_pos,
                                const Vec2& receiver_pos, double k);

/// a0 * exp(-delta * ||e - rho||^2). Well defined everywhere.
double gaussian_decay_amplitude(const SoundEmitter& emitter,
                                const Vec2& receiver_pos, double delta);

/// One emitter's contribution to a synthesized frame: its tone frequency and
/// the amplitude it reaches each receiver with.
struct EmitterWave {
  double frequency_hz{0.0};
  std::vector<double> amplitude_per_receiver;
};

using PcmBlock = std::vector<std::int16_t>;

/// Unclipped float mix per receiver: w[k] = sum_i a_ij sin(2 pi f_i k / rate),
/// phase restarting at zero each frame.
std::vector<std::vector<double>> mix_frame_waves(
    std::span<const EmitterWave> emitters, std::size_t receiver_count,
    const AcousticsConfig& cfg);

/// Quantizes one already-clipped sample: round(x / a_m * 32767).
std::int16_t encode_pcm16_sample(double x, double max_amplitude);

/// Quantizes a clipped wave. Throws RangeError on any sample outside
/// [-max_amplitude, max_amplitude]; clipping is the caller's contract.
PcmBlock encode_pcm16(std::span<const double> wave, double max_amplitude);

/// Full per-frame synthesis: mix, clip to [-a_M, a_M], quantize.
std::vector<PcmBlock> synthesize_frame_audio(
    std::span<const EmitterWave> emitters, std::size_t receiver_count,
    const AcousticsConfig& cfg);

}  // namespace crossmodal::acoustics
