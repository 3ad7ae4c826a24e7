#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "armcast/pose.hpp"
#include "armcast/rng.hpp"

namespace armcast {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major grayscale

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

// Distance from point to segment [a, b].
inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
  const double cx = ax + t * dx, cy = ay + t * dy;
  return std::hypot(px - cx, py - cy);
}

}  // namespace detail

/// Skeleton render: anti-aliased segments between consecutive keypoints plus
/// filled discs at joints over a seeded low-frequency clutter background.
/// Deterministic per (pose, size, seed); off-frame keypoints clip naturally.
inline Image render_frame(const PoseFrame& pose, int size, std::uint64_t seed) {
  if (size < 32) throw std::invalid_argument("render_frame: size must be >= 32");
  pose.validate();

  Image img(size, size);

  // Background: a few seeded low-frequency plane waves, mapped to [16, 88].
  Rng rng(seed);
  constexpr int kWaves = 4;
  double wx[kWaves], wy[kWaves], ph[kWaves];
  for (int w = 0; w < kWaves; ++w) {
    wx[w] = rng.uniform(0.5, 2.5) / size;
    wy[w] = rng.uniform(0.5, 2.5) / size;
    ph[w] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  const double line_half_width = 1.2;
  const double disc_radius = 2.2;

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double bg = 0.0;
      for (int w = 0; w < kWaves; ++w)
        bg += std::sin(2.0 * std::numbers::pi * (wx[w] * x + wy[w] * y) + ph[w]);
      double value = 52.0 + 9.0 * bg;  // in [16, 88]

      const double px = x + 0.5, py = y + 0.5;

      // Limbs at 200, soft 1 px edge.
      for (int k = 0; k + 1 < kNumKeypoints; ++k) {
        const double d = detail::segment_distance(px, py, pose.x(k), pose.y(k), pose.x(k + 1),
                                                  pose.y(k + 1));
        const double cover = std::clamp(line_half_width + 0.5 - d, 0.0, 1.0);
        value = std::max(value, 200.0 * cover);
      }
      // Joint discs at 255, brightest at the keypoint center.
      for (int k = 0; k < kNumKeypoints; ++k) {
        const double d = std::hypot(px - pose.x(k), py - pose.y(k));
        const double cover = std::clamp(disc_radius + 0.5 - d, 0.0, 1.0);
        value = std::max(value, 255.0 * cover * (1.0 - 0.02 * d));
      }

      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(value, 0.0, 255.0));
    }
  }
  return img;
}

/// Binary PGM (P5), 8-bit.
inline void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("read_pgm: unsupported format in " + path);
  in.get();  // single whitespace after header
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error("read_pgm: truncated file " + path);
  return img;
}

}  // namespace armcast
