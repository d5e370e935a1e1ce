#include "hawkdove/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hawkdove::raster {

using gridworld::Action;
using gridworld::AgentStatus;
using gridworld::Cell;
using gridworld::ConfigError;
using gridworld::Edge;
using gridworld::ScenarioConfig;

namespace {

constexpr Color kWhite{255, 255, 255};
constexpr Color kGridLine{210, 210, 210};
constexpr Color kAxis{90, 90, 90};
constexpr Color kBlack{16, 16, 16};

constexpr int kCellPx = 24;
constexpr int kMarginPx = 18;

}  // namespace

Image::Image(int width, int height, Color fill) : width_(width), height_(height) {
  rgb_.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) set(x, y, fill);
}

Color Image::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

void Image::set(int x, int y, Color c) {
  if (x < 0 || x >= width_ || y < 0 || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  rgb_[i] = c.r;
  rgb_[i + 1] = c.g;
  rgb_[i + 2] = c.b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Color c) {
  for (int y = std::max(0, y0); y <= std::min(height_ - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(width_ - 1, x1); ++x) set(x, y, c);
}

void Image::line(int x0, int y0, int x1, int y1, Color c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write image '" + path + "'");
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.bytes().data()),
            static_cast<std::streamsize>(img.bytes().size()));
  if (!out) throw ConfigError("short write to image '" + path + "'");
}

namespace {

struct GridGeometry {
  int cols, rows;

  int px(double grid_x) const { return kMarginPx + static_cast<int>(grid_x * kCellPx); }
  int py(double grid_y) const { return kMarginPx + static_cast<int>(grid_y * kCellPx); }
  int center_x(int cell_x) const { return px(cell_x) + kCellPx / 2; }
  int center_y(int cell_y) const { return py(cell_y) + kCellPx / 2; }
};

void draw_edge_band(Image& img, const GridGeometry& g, Edge e, Color tint) {
  const int x0 = g.px(0), x1 = g.px(g.cols) - 1;
  const int y0 = g.py(0), y1 = g.py(g.rows) - 1;
  const int band = kCellPx / 3;
  switch (e) {
    case Edge::kNorth: img.fill_rect(x0, y0 - band, x1, y0 - 1, tint); break;
    case Edge::kSouth: img.fill_rect(x0, y1 + 1, x1, y1 + band, tint); break;
    case Edge::kWest: img.fill_rect(x0 - band, y0, x0 - 1, y1, tint); break;
    case Edge::kEast: img.fill_rect(x1 + 1, y0, x1 + band, y1, tint); break;
  }
}

void draw_arrow(Image& img, int x0, int y0, int x1, int y1, Color c) {
  img.line(x0, y0, x1, y1, c);
  const int dx = (x1 > x0) - (x1 < x0);
  const int dy = (y1 > y0) - (y1 < y0);
  const int head = 4;
  // Two barbs perpendicular to the travel direction.
  img.line(x1, y1, x1 - dx * head - dy * head, y1 - dy * head - dx * head, c);
  img.line(x1, y1, x1 - dx * head + dy * head, y1 - dy * head + dx * head, c);
}

void draw_stay_marker(Image& img, int cx, int cy, Color c) {
  const int r = 3;
  img.line(cx - r, cy - r, cx + r, cy - r, c);
  img.line(cx + r, cy - r, cx + r, cy + r, c);
  img.line(cx + r, cy + r, cx - r, cy + r, c);
  img.line(cx - r, cy + r, cx - r, cy - r, c);
}

Cell shifted_cell(Cell c, Action a) {
  switch (a) {
    case Action::kUp: return {c.x, c.y - 1};
    case Action::kDown: return {c.x, c.y + 1};
    case Action::kLeft: return {c.x - 1, c.y};
    case Action::kRight: return {c.x + 1, c.y};
    case Action::kStay: return c;
  }
  return c;
}

}  // namespace

Image render_trajectory(const agents::Trajectory& traj, const ScenarioConfig& cfg) {
  const GridGeometry g{cfg.width, cfg.height};
  Image img(2 * kMarginPx + cfg.width * kCellPx, 2 * kMarginPx + cfg.height * kCellPx, kWhite);

  draw_edge_band(img, g, cfg.target_edge[0], kAgentAEdgeTint);
  draw_edge_band(img, g, cfg.target_edge[1], kAgentBEdgeTint);
  for (int x = 0; x <= cfg.width; ++x)
    img.line(g.px(x), g.py(0), g.px(x), g.py(cfg.height), kGridLine);
  for (int y = 0; y <= cfg.height; ++y)
    img.line(g.px(0), g.py(y), g.px(cfg.width), g.py(y), kGridLine);

  const std::array<Color, 2> palette{kAgentAColor, kAgentBColor};
  for (int agent = 0; agent < 2; ++agent) {
    const Cell spawn = cfg.spawn[agent];
    img.fill_rect(g.center_x(spawn.x) - 4, g.center_y(spawn.y) - 4, g.center_x(spawn.x) + 4,
                  g.center_y(spawn.y) + 4, palette[agent]);
  }

  for (const auto& step : traj.steps) {
    for (int agent = 0; agent < 2; ++agent) {
      if (!step.state.active(agent)) continue;
      const Cell from = step.state.pos[agent];
      const Action a = step.actions[agent];
      if (a == Action::kStay) {
        draw_stay_marker(img, g.center_x(from.x), g.center_y(from.y), palette[agent]);
        continue;
      }
      const Cell to = shifted_cell(from, a);
      draw_arrow(img, g.center_x(from.x), g.center_y(from.y), g.center_x(to.x), g.center_y(to.y),
                 palette[agent]);
    }
  }

  for (int agent = 0; agent < 2; ++agent) {
    if (traj.final_state.status[agent] != AgentStatus::kCollided) continue;
    const Cell c = traj.final_state.pos[agent];
    img.line(g.center_x(c.x) - 6, g.center_y(c.y) - 6, g.center_x(c.x) + 6, g.center_y(c.y) + 6,
             kBlack);
    img.line(g.center_x(c.x) - 6, g.center_y(c.y) + 6, g.center_x(c.x) + 6, g.center_y(c.y) - 6,
             kBlack);
  }
  return img;
}

Image render_learning_curve(const std::vector<double>& returns_a,
                            const std::vector<double>& returns_b) {
  if (returns_a.empty() || returns_a.size() != returns_b.size())
    throw ConfigError("learning-curve input needs matching non-empty return columns");
  const int w = 640, h = 360, m = 32;
  Image img(w, h, kWhite);
  img.line(m, h - m, w - m, h - m, kAxis);
  img.line(m, m, m, h - m, kAxis);

  double lo = returns_a[0], hi = returns_a[0];
  for (const double v : returns_a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const double v : returns_b) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;

  const std::size_t n = returns_a.size();
  auto x_of = [&](std::size_t i) {
    return m + static_cast<int>((static_cast<double>(i) / std::max<std::size_t>(n - 1, 1)) *
                                (w - 2 * m));
  };
  auto y_of = [&](double v) {
    return (h - m) - static_cast<int>(((v - lo) / (hi - lo)) * (h - 2 * m));
  };
  auto polyline = [&](const std::vector<double>& series, Color c) {
    if (n == 1) {
      img.set(x_of(0), y_of(series[0]), c);
      return;
    }
    for (std::size_t i = 1; i < n; ++i)
      img.line(x_of(i - 1), y_of(series[i - 1]), x_of(i), y_of(series[i]), c);
  };
  polyline(returns_a, kAgentAColor);
  polyline(returns_b, kAgentBColor);
  return img;
}

Image render_payoff(const analysis::PayoffMatrix& matrix, const analysis::NashResult& nash) {
  const int cell = 96, m = 24;
  Image img(2 * m + 2 * cell, 2 * m + 2 * cell, kWhite);

  double lo = matrix.payoff[0][0][0], hi = lo;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < 2; ++p) {
        lo = std::min(lo, matrix.payoff[i][j][p]);
        hi = std::max(hi, matrix.payoff[i][j][p]);
      }
  if (hi == lo) hi = lo + 1.0;
  auto shade = [&](double v) -> std::uint8_t {
    return static_cast<std::uint8_t>(90 + 150 * (v - lo) / (hi - lo));
  };

  for (int i = 0; i < 2; ++i) {    // row: agent 0's strategy
    for (int j = 0; j < 2; ++j) {  // col: agent 1's strategy
      const int x0 = m + j * cell, y0 = m + i * cell;
      // Upper-left triangle shades player 0's payoff, lower-right player 1's.
      for (int dy = 0; dy < cell; ++dy)
        for (int dx = 0; dx < cell; ++dx) {
          const bool upper = dx + dy < cell;
          const double v = matrix.payoff[i][j][upper ? 0 : 1];
          img.set(x0 + dx, y0 + dy, upper ? Color{shade(v), 190, 150} : Color{150, 170, shade(v)});
        }
      img.line(x0, y0 + cell - 1, x0 + cell - 1, y0, kGridLine);

      const int cx = x0 + cell / 2, cy = y0 + cell / 2;
      if (nash.improvement[0][i][j] > 0)  // row player prefers the other row
        draw_arrow(img, cx - 18, cy, cx - 18, cy + (i == 0 ? 30 : -30), kBlack);
      if (nash.improvement[1][i][j] > 0)  // column player prefers the other column
        draw_arrow(img, cx, cy + 18, cx + (j == 0 ? 30 : -30), cy + 18, kBlack);
    }
  }

  for (const auto& [row, col] : nash.pure_equilibria) {
    const int i = row == analysis::Strategy::kStraight ? 0 : 1;
    const int j = col == analysis::Strategy::kStraight ? 0 : 1;
    const int x0 = m + j * cell, y0 = m + i * cell;
    for (int t = 0; t < 3; ++t) {
      img.line(x0 + t, y0 + t, x0 + cell - 1 - t, y0 + t, kBlack);
      img.line(x0 + cell - 1 - t, y0 + t, x0 + cell - 1 - t, y0 + cell - 1 - t, kBlack);
      img.line(x0 + cell - 1 - t, y0 + cell - 1 - t, x0 + t, y0 + cell - 1 - t, kBlack);
      img.line(x0 + t, y0 + cell - 1 - t, x0 + t, y0 + t, kBlack);
    }
  }
  return img;
}

}  // namespace hawkdove::raster
