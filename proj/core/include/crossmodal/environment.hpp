#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "crossmodal/common.hpp"

namespace crossmodal::envs {

/// One timestep's paired perceptual data. The image payload is a stack of
/// grayscale frames in [0,1]; the sound payload layout is environment
/// specific (see `sound_shape`).
struct MultimodalObservation {
  std::vector<double> image;        // flattened (stack, H, W), row-major
  std::array<int, 3> image_shape{}; // {stack, H, W}
  std::vector<double> sound;        // flattened per sound_shape
  std::vector<int> sound_shape;
  bool has_image{false};
  bool has_sound{false};
};

struct StepResult {
  MultimodalObservation observation;
  double reward{0.0};
  bool terminal{false};
  std::map<std::string, std::string> info;  // e.g. cause = win|lose|timeout
};

/// Discrete action index or continuous control value.
using Action = std::variant<int, double>;

/// Common step/reset/observe contract for the multimodal environments.
/// Instances are single-threaded; run independently seeded copies for
/// parallel data collection.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual MultimodalObservation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  virtual MultimodalObservation observe() const = 0;

  virtual std::string name() const = 0;
  /// Number of discrete actions; 0 for continuous-control environments.
  virtual int action_count() const = 0;
  /// Symmetric bound of the continuous action range; 0 for discrete.
  virtual double action_bound() const = 0;
  virtual int max_episode_frames() const = 0;
  virtual std::array<int, 3> image_shape() const = 0;
  virtual std::vector<int> sound_shape() const = 0;

  /// Restricts which payloads observations carry; both enabled by default.
  /// Synthesis of an unrequested payload is skipped (it never affects the
  /// state trajectory).
  void set_active_modalities(bool image, bool sound) {
    if (!image && !sound)
      throw ModalityUnavailable("environment: at least one modality required");
    image_active_ = image;
    sound_active_ = sound;
  }
  bool image_active() const { return image_active_; }
  bool sound_active() const { return sound_active_; }

 protected:
  bool image_active_{true};
  bool sound_active_{true};
};

}  // namespace crossmodal::envs
