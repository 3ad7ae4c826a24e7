#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "armcast/kinematics.hpp"
#include "armcast/matrix.hpp"
#include "armcast/rng.hpp"

namespace armcast {

/// One scripted motion segment. Each primitive starts and ends with zero
/// joint velocity, so concatenation stays C¹-smooth.
struct MotionPrimitive {
  enum class Kind { kReach, kOscillate, kIdle };
  Kind kind = Kind::kReach;
  double duration_s = 5.0;
  double amplitude = 0.3;  // oscillation swing or idle jitter, radians

  static MotionPrimitive parse(const std::string& name, double duration_s, double amplitude) {
    MotionPrimitive p;
    p.duration_s = duration_s;
    p.amplitude = amplitude;
    if (name == "reach")
      p.kind = Kind::kReach;
    else if (name == "oscillate")
      p.kind = Kind::kOscillate;
    else if (name == "idle")
      p.kind = Kind::kIdle;
    else
      throw std::invalid_argument("MotionPrimitive: unknown kind '" + name + "'");
    return p;
  }
};

struct SynthConfig {
  std::uint64_t seed = 1;
  double fps = 20.0;
  double duration_s = 60.0;
  std::vector<MotionPrimitive> script;  // cycled until duration is filled
  double noise_sigma = 1.0;             // annotation noise, pixels
  int render_size = 96;
  double annotation_subsample_hz = 1.0;  // annotated frames per second
  bool render_full = false;              // also render every frame, not just annotated ones

  void validate() const {
    if (!(fps > 0.0)) throw std::invalid_argument("SynthConfig: fps must be > 0");
    if (noise_sigma < 0.0) throw std::invalid_argument("SynthConfig: noise_sigma must be >= 0");
    if (render_size < 32) throw std::invalid_argument("SynthConfig: render size must be >= 32");
    if (!(duration_s > 0.0)) throw std::invalid_argument("SynthConfig: duration must be > 0");
  }
};

/// reach-to-rack / cable-exchange oscillation / idle-with-jitter cycle.
inline std::vector<MotionPrimitive> default_script() {
  return {MotionPrimitive{MotionPrimitive::Kind::kReach, 6.0, 0.0},
          MotionPrimitive{MotionPrimitive::Kind::kOscillate, 5.0, 0.35},
          MotionPrimitive{MotionPrimitive::Kind::kIdle, 4.0, 0.02}};
}

namespace detail {

// Cosine ease: 0→1 with zero slope at both ends.
inline double ease(double s) { return 0.5 * (1.0 - std::cos(std::numbers::pi * s)); }

// sin² window: 0 at both ends, zero slope at both ends.
inline double window(double s) {
  const double w = std::sin(std::numbers::pi * s);
  return w * w;
}

}  // namespace detail

/// Scripted joint-angle time series, frames × 7, C¹-smooth across primitive
/// boundaries. Frame count = round(duration_s × fps).
inline Matrix gen_trajectory(const SynthConfig& config, const ArmModel& arm) {
  config.validate();
  arm.validate();
  const std::vector<MotionPrimitive>& script =
      config.script.empty() ? default_script() : config.script;
  if (script.empty()) throw std::invalid_argument("gen_trajectory: empty script");

  const auto n_frames = static_cast<std::size_t>(std::llround(config.duration_s * config.fps));
  Matrix angles(n_frames, kNumLinks);

  Rng rng(config.seed);
  std::array<double, kNumLinks> pose{};  // current anchor pose
  for (int j = 0; j < kNumLinks; ++j) pose[static_cast<std::size_t>(j)] = rng.uniform(-0.3, 0.3);

  std::size_t frame = 0;
  std::size_t prim_idx = 0;
  while (frame < n_frames) {
    const MotionPrimitive& prim = script[prim_idx % script.size()];
    ++prim_idx;
    auto prim_frames = static_cast<std::size_t>(std::llround(prim.duration_s * config.fps));
    if (prim_frames == 0) prim_frames = 1;

    std::array<double, kNumLinks> target = pose;
    std::array<double, kNumLinks> osc_phase{};
    std::array<double, kNumLinks> osc_freq{};
    if (prim.kind == MotionPrimitive::Kind::kReach) {
      for (int j = 0; j < kNumLinks; ++j)
        target[static_cast<std::size_t>(j)] = rng.uniform(-0.9, 0.9);
    } else {
      for (int j = 0; j < kNumLinks; ++j) {
        osc_phase[static_cast<std::size_t>(j)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        osc_freq[static_cast<std::size_t>(j)] = rng.uniform(0.5, 2.0);
      }
    }

    for (std::size_t i = 0; i < prim_frames && frame < n_frames; ++i, ++frame) {
      const double s = prim_frames == 1
                           ? 1.0
                           : static_cast<double>(i) / static_cast<double>(prim_frames - 1);
      for (int j = 0; j < kNumLinks; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        double a = pose[ju];
        switch (prim.kind) {
          case MotionPrimitive::Kind::kReach:
            a += (target[ju] - pose[ju]) * detail::ease(s);
            break;
          case MotionPrimitive::Kind::kOscillate:
            a += prim.amplitude * detail::window(s) *
                 std::sin(2.0 * std::numbers::pi * osc_freq[ju] * s + osc_phase[ju]);
            break;
          case MotionPrimitive::Kind::kIdle:
            a += prim.amplitude * detail::window(s) *
                 std::sin(2.0 * std::numbers::pi * 0.3 * s * prim.duration_s + osc_phase[ju]);
            break;
        }
        angles(frame, ju) = a;
      }
    }
    pose = target;  // reach moves the anchor; oscillate/idle return to it
  }
  return angles;
}

}  // namespace armcast
