#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hawkdove/agents.hpp"
#include "hawkdove/analysis.hpp"
#include "hawkdove/gridworld.hpp"

namespace hawkdove::raster {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Color&) const = default;
};

// Plain RGB image with integer drawing primitives; everything renders
// deterministically so image bytes are comparable across runs.
class Image {
 public:
  Image(int width, int height, Color fill);

  int width() const { return width_; }
  int height() const { return height_; }
  Color get(int x, int y) const;
  void set(int x, int y, Color c);
  void fill_rect(int x0, int y0, int x1, int y1, Color c);
  void line(int x0, int y0, int x1, int y1, Color c);  // Bresenham

  const std::vector<std::uint8_t>& bytes() const { return rgb_; }

 private:
  int width_, height_;
  std::vector<std::uint8_t> rgb_;
};

// Binary PPM (P6); byte-stable output.
void write_ppm(const Image& img, const std::string& path);

// Fixed palette, exposed so tests can pick pixels apart.
inline constexpr Color kAgentAColor{204, 51, 51};
inline constexpr Color kAgentBColor{51, 102, 204};
inline constexpr Color kAgentAEdgeTint{244, 214, 214};
inline constexpr Color kAgentBEdgeTint{214, 224, 244};

// Grid, spawn markers, target-edge bands and both trajectories with
// direction arrows; collisions get a cross marker.
Image render_trajectory(const agents::Trajectory& traj, const gridworld::ScenarioConfig& cfg);

// Per-episode return curves for both agents.
Image render_learning_curve(const std::vector<double>& returns_a,
                            const std::vector<double>& returns_b);

// 2x2 payoff figure: per-player value shading, best-response arrows, pure
// equilibria outlined.
Image render_payoff(const analysis::PayoffMatrix& matrix, const analysis::NashResult& nash);

}  // namespace hawkdove::raster
