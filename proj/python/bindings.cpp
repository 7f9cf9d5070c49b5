#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hip/config.hpp"
#include "hip/geomcost.hpp"
#include "hip/imitative.hpp"
#include "hip/io.hpp"
#include "hip/planner.hpp"
#include "hip/worldsim.hpp"

namespace py = pybind11;
using namespace hip;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<Vec2> points_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an (n, 2) array");
  std::vector<Vec2> out;
  out.reserve(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1));
  return out;
}

Pose pose_from(const std::tuple<double, double, double>& p) { return Pose{std::get<0>(p), std::get<1>(p), std::get<2>(p)}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<Error>(m, "HipError", PyExc_RuntimeError);

  m.def(
      "default_settings", [](const std::vector<std::string>& overrides) { return to_py(to_json(load_settings("", overrides))); },
      py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "generate_world",
      [](std::uint64_t seed, double width, double height, const std::string& profile) {
        return to_py(world_to_json(generate_world(seed, Vec2(width, height), profile_from_string(profile))));
      },
      py::arg("seed"), py::arg("width") = 40.0, py::arg("height") = 40.0, py::arg("profile") = "in_distribution");

  m.def(
      "lidar",
      [](std::uint64_t seed, const std::string& profile, std::tuple<double, double, double> pose) {
        const auto w = generate_world(seed, Vec2(40, 40), profile_from_string(profile));
        const auto pts = raycast_lidar(w, pose_from(pose));
        py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
        auto r = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < pts.size(); ++i) {
          r(i, 0) = pts[i].x();
          r(i, 1) = pts[i].y();
        }
        return out;
      },
      py::arg("seed"), py::arg("profile") = "in_distribution", py::arg("pose") = std::tuple{0.0, 0.0, 0.0});

  m.def(
      "costmap",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
         std::tuple<double, double, double> pose, double alpha, const std::string& mode) {
        const auto cm = normalize(build_raw(points_from(points), pose_from(pose)), alpha, normalize_mode_from_string(mode));
        py::array_t<double> out({static_cast<py::ssize_t>(cm.height), static_cast<py::ssize_t>(cm.width)});
        auto r = out.mutable_unchecked<2>();
        for (int y = 0; y < cm.height; ++y)
          for (int x = 0; x < cm.width; ++x) r(y, x) = cm.at(x, y);
        return out;
      },
      py::arg("points"), py::arg("pose") = std::tuple{0.0, 0.0, 0.0}, py::arg("alpha") = 6.4,
      py::arg("mode") = "cellwise");

  m.def(
      "traj_cost",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
         std::tuple<double, double, double> pose, const py::array_t<double, py::array::c_style | py::array::forcecast>& traj,
         double alpha, const std::string& mode) {
        const auto cm = normalize(build_raw(points_from(points), pose_from(pose)), alpha, normalize_mode_from_string(mode));
        return traj_cost(cm, points_from(traj));
      },
      py::arg("points"), py::arg("pose"), py::arg("trajectory"), py::arg("alpha") = 6.4, py::arg("mode") = "cellwise");

  m.def(
      "directive_cost",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& traj, std::tuple<double, double, double> pose,
         std::pair<double, double> goal, double near, double length, double width, double delta) {
        DirectiveRegion region;
        region.near = near;
        region.length = length;
        region.width = width;
        return directive_cost(points_from(traj), pose_from(pose), Vec2(goal.first, goal.second), region, delta);
      },
      py::arg("trajectory"), py::arg("pose"), py::arg("goal"), py::arg("near") = 1.0, py::arg("length") = 4.0,
      py::arg("width") = 2.0, py::arg("delta") = 129.0);

  m.def("sigma_floor", &sigma_floor_for, py::arg("eta") = 64.0, py::arg("horizon") = 10);

  m.def(
      "grad_check",
      [](std::uint64_t seed) {
        ModelConfig c;
        c.patch_rows = 4;
        c.patch_cols = 4;
        c.pool_factor = 1;
        c.encoder_hidden = {8};
        c.step_hidden = {8};
        const auto model = make_model(c, seed);
        Rng rng(seed + 1);
        Example e;
        e.patch = Patch(c.patch_rows, c.patch_cols);
        for (auto& v : e.patch.data) v = static_cast<float>(rng.uniform());
        for (int j = 0; j < c.past; ++j) e.past.emplace_back(-0.2 * (c.past - 1 - j), 0.0);
        Vec2 p = Vec2::Zero();
        for (int i = 0; i < c.horizon; ++i) {
          p += Vec2(0.2 + 0.05 * rng.normal(), 0.05 * rng.normal());
          e.future.push_back(p);
        }
        return grad_check(model, e);
      },
      py::arg("seed") = 0);
}
