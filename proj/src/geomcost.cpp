#include "hip/geomcost.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace hip {

std::string to_string(NormalizeMode mode) {
  return mode == NormalizeMode::cellwise ? "cellwise" : "global_softmax";
}

NormalizeMode normalize_mode_from_string(const std::string& s) {
  if (s == "cellwise") return NormalizeMode::cellwise;
  if (s == "global_softmax") return NormalizeMode::global_softmax;
  throw Error("unknown normalization mode: " + s);
}

RawCostGrid build_raw(std::span<const Vec2> pointcloud, const Pose& pose, const GridSpec& spec) {
  if (!(spec.resolution > 0.0)) throw Error("grid resolution must be positive");
  RawCostGrid grid;
  grid.resolution = spec.resolution;
  grid.width = spec.width;
  grid.height = spec.height;
  grid.origin = pose.position() - 0.5 * Vec2(spec.width * spec.resolution, spec.height * spec.resolution);
  grid.cells.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

  std::vector<std::pair<int, int>> lethal;
  for (const auto& p : pointcloud) {
    const Vec2 w = pose.to_world(p);
    const int ix = static_cast<int>(std::floor((w.x() - grid.origin.x()) / spec.resolution));
    const int iy = static_cast<int>(std::floor((w.y() - grid.origin.y()) / spec.resolution));
    if (ix < 0 || iy < 0 || ix >= grid.width || iy >= grid.height) continue;
    if (grid.at(ix, iy) != kLethalCost) {
      grid.at(ix, iy) = kLethalCost;
      lethal.emplace_back(ix, iy);
    }
  }

  // Inflation kernel: offsets within the inflation radius and their costs.
  struct Tap {
    int dx, dy;
    std::uint8_t cost;
  };
  std::vector<Tap> kernel;
  const int reach = static_cast<int>(std::ceil(spec.inflation_radius / spec.resolution));
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const double d = spec.resolution * std::hypot(dx, dy);
      if (d > spec.inflation_radius + 1e-12) continue;
      const double c = 253.0 * std::exp(-spec.cost_scaling * std::max(0.0, d - spec.inscribed_radius));
      kernel.push_back({dx, dy, static_cast<std::uint8_t>(std::lround(c))});
    }
  }
  for (const auto& [lx, ly] : lethal) {
    for (const auto& tap : kernel) {
      const int ix = lx + tap.dx, iy = ly + tap.dy;
      if (ix < 0 || iy < 0 || ix >= grid.width || iy >= grid.height) continue;
      auto& cell = grid.at(ix, iy);
      if (cell != kLethalCost && tap.cost > cell) cell = tap.cost;
    }
  }
  return grid;
}

Costmap normalize(const RawCostGrid& raw, double alpha, NormalizeMode mode) {
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  Costmap map;
  map.alpha = alpha;
  map.mode = mode;
  map.resolution = raw.resolution;
  map.origin = raw.origin;
  map.width = raw.width;
  map.height = raw.height;
  map.cells.resize(raw.cells.size());
  if (mode == NormalizeMode::cellwise) {
    for (std::size_t k = 0; k < raw.cells.size(); ++k) {
      map.cells[k] = alpha * std::exp(static_cast<double>(raw.cells[k]) - kLethalCost);
    }
    return map;
  }
  double peak = 0.0;
  for (auto c : raw.cells) peak = std::max(peak, static_cast<double>(c));
  double total = 0.0;
  for (std::size_t k = 0; k < raw.cells.size(); ++k) {
    map.cells[k] = std::exp(static_cast<double>(raw.cells[k]) - peak);
    total += map.cells[k];
  }
  for (auto& c : map.cells) c = alpha * c / total;
  return map;
}

double query(const Costmap& costmap, const Vec2& p) {
  const double fx = std::floor((p.x() - costmap.origin.x()) / costmap.resolution);
  const double fy = std::floor((p.y() - costmap.origin.y()) / costmap.resolution);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < costmap.width && fy < costmap.height)) return costmap.alpha;
  return costmap.at(static_cast<int>(fx), static_cast<int>(fy));
}

double traj_cost(const Costmap& costmap, std::span<const Vec2> trajectory_world) {
  double total = 0.0;
  for (const auto& p : trajectory_world) total += query(costmap, p);
  return total;
}

void write_pgm(std::ostream& out, const RawCostGrid& raw, const std::string& extra_header) {
  out << "P2\n";
  out << "# hip-costmap 1\n";
  out << "# resolution " << raw.resolution << "\n";
  out.precision(17);
  out << "# origin " << raw.origin.x() << " " << raw.origin.y() << "\n";
  if (!extra_header.empty()) {
    std::istringstream lines(extra_header);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << "\n";
  }
  out << raw.width << " " << raw.height << "\n" << static_cast<int>(kLethalCost) << "\n";
  for (int iy = raw.height - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < raw.width; ++ix) {
      out << static_cast<int>(raw.at(ix, iy)) << (ix + 1 < raw.width ? " " : "\n");
    }
  }
}

RawCostGrid read_pgm(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "P2") throw Error("not a plain PGM file");
  RawCostGrid raw;
  bool versioned = false;
  std::vector<int> header;
  std::string token;
  while (header.size() < 3 && in >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      std::istringstream fields(rest);
      std::string key;
      fields >> key;
      if (token == "#" && key == "hip-costmap") {
        int version = 0;
        fields >> version;
        if (version != 1) throw Error("costmap schema version mismatch");
        versioned = true;
      } else if (token == "#" && key == "resolution") {
        fields >> raw.resolution;
      } else if (token == "#" && key == "origin") {
        double x = 0, y = 0;
        fields >> x >> y;
        raw.origin = Vec2(x, y);
      }
      continue;
    }
    header.push_back(std::stoi(token));
  }
  if (!versioned) throw Error("costmap header missing schema version");
  if (header.size() < 3) throw Error("truncated PGM header");
  raw.width = header[0];
  raw.height = header[1];
  raw.cells.assign(static_cast<std::size_t>(raw.width) * raw.height, 0);
  for (int iy = raw.height - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < raw.width; ++ix) {
      int v = 0;
      if (!(in >> v)) throw Error("truncated PGM body");
      raw.at(ix, iy) = static_cast<std::uint8_t>(v);
    }
  }
  return raw;
}

}  // namespace hip
