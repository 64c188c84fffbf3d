#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace crossmodal {

/// One sensory input channel available to an agent.
enum class Modality { image, sound };

inline const char* to_string(Modality m) {
  return m == Modality::image ? "image" : "sound";
}

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(squared_norm()); }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry where an acoustic quantity is undefined (overlapping or
// supersonic emitter/receiver configuration).
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class EpisodeFinished : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FrozenModelViolation : public Error {
 public:
  using Error::Error;
};

class ModalityUnavailable : public Error {
 public:
  using Error::Error;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyBuffer : public Error {
 public:
  using Error::Error;
};

}  // namespace crossmodal
