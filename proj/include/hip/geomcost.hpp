#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hip/common.hpp"

namespace hip {

inline constexpr std::uint8_t kLethalCost = 254;
inline constexpr std::uint8_t kInscribedCost = 253;

struct GridSpec {
  double resolution = 0.1;  // m/cell
  int width = 100;          // cells along world x
  int height = 100;         // cells along world y
  double inflation_radius = 1.0;
  double cost_scaling = 3.0;  // w in 253 * exp(-w * (d - r_inscribed))
  double inscribed_radius = 0.3;
};

/// Egocentric ROS-style cost grid. Axes are world-aligned; the robot sits at
/// the grid center. Cell (ix, iy) covers
/// [origin + (ix, iy) * res, origin + (ix + 1, iy + 1) * res).
struct RawCostGrid {
  std::vector<std::uint8_t> cells;
  double resolution = 0.1;
  Vec2 origin = Vec2::Zero();
  int width = 0;
  int height = 0;

  std::uint8_t at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix]; }
  std::uint8_t& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * width + ix]; }
  Vec2 cell_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * resolution, (iy + 0.5) * resolution);
  }
};

enum class NormalizeMode { cellwise, global_softmax };
std::string to_string(NormalizeMode mode);
NormalizeMode normalize_mode_from_string(const std::string& s);

struct Costmap {
  std::vector<double> cells;
  double alpha = 6.4;
  NormalizeMode mode = NormalizeMode::cellwise;
  double resolution = 0.1;
  Vec2 origin = Vec2::Zero();
  int width = 0;
  int height = 0;

  double at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix]; }
};

RawCostGrid build_raw(std::span<const Vec2> pointcloud, const Pose& pose, const GridSpec& spec = {});

Costmap normalize(const RawCostGrid& raw, double alpha, NormalizeMode mode = NormalizeMode::cellwise);

/// Nearest-cell lookup; anything outside the grid costs alpha.
double query(const Costmap& costmap, const Vec2& world_position);

/// Sum of query over the trajectory's points (world frame).
double traj_cost(const Costmap& costmap, std::span<const Vec2> trajectory_world);

/// Plain-text PGM (P2) with '#' header lines describing the grid. Row 0 of
/// the image is the grid's top (largest y).
void write_pgm(std::ostream& out, const RawCostGrid& raw, const std::string& extra_header = {});
RawCostGrid read_pgm(std::istream& in);

}  // namespace hip
