#include <cmath>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hip/evalbench.hpp"

using namespace hip;
using testing::empty_world;

namespace {

BcConfig small_bc() {
  BcConfig c;
  c.patch_rows = 4;
  c.patch_cols = 4;
  c.pool_factor = 1;
  c.encoder_hidden = {8};
  c.head_hidden = {16};
  return c;
}

EpisodeSpec spec_at(Pose start, Vec2 goal, double radius = 2.0, double timeout = 120.0) {
  EpisodeSpec s;
  s.start = start;
  s.goal = goal;
  s.goal_radius = radius;
  s.timeout = timeout;
  return s;
}

// Shared small assets for closed-loop tests: a library from collected data
// and an untrained full-resolution model.
struct Assets {
  TrajectoryLibrary library;
  ImitativeModel model;
  EvalAssets eval;
  Assets() {
    const auto w = generate_world(1, Vec2(40, 40), Profile::in_distribution);
    const Dataset d = make_dataset(collect(w, 3000, 2));
    library = build_library(d, 16, 3);
    model = make_model(ModelConfig{}, 4);
    model.channels = fit_channel_stats(d.examples);
    eval.library = &library;
    eval.model = &model;
  }
};

const Assets& assets() {
  static const Assets a;
  return a;
}

}  // namespace

TEST_CASE("straight policy reaches a goal straight ahead") {
  const auto w = empty_world();
  StraightPolicy policy;
  const auto r = run_episode(w, policy, spec_at(Pose{-6, 0, 0}, Vec2(6, 0), 0.05));
  CHECK(r.outcome == Outcome::success);
  CHECK(r.path_length == doctest::Approx(12.0).epsilon(0.01));
}

TEST_CASE("straight policy runs into a tree") {
  auto w = empty_world();
  w.obstacles.push_back(testing::circle(ObstacleKind::tree, Vec2(0, 0), 0.5, 2.0));
  StraightPolicy policy;
  const auto r = run_episode(w, policy, spec_at(Pose{-6, 0, 0}, Vec2(6, 0)));
  CHECK(r.outcome == Outcome::stuck);
  CHECK(r.final_pose.x < -0.5);
}

TEST_CASE("timeouts are reported") {
  StraightPolicy policy;
  const auto r = run_episode(empty_world(), policy, spec_at(Pose{-15, 0, 0}, Vec2(15, 0), 1.0, 5.0));
  CHECK(r.outcome == Outcome::timeout);
  CHECK(r.elapsed == doctest::Approx(5.0));
}

TEST_CASE("episode specs keep start and goal apart and free") {
  std::vector<WorldSpec> worlds{generate_world(1, Vec2(40, 40), Profile::in_distribution),
                                generate_world(2, Vec2(40, 40), Profile::out_of_distribution)};
  const EvalConfig cfg;
  const auto specs = make_specs(worlds, 20, 5, cfg);
  const auto again = make_specs(worlds, 20, 5, cfg);
  REQUIRE(specs.size() == 20);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    CHECK(s.world == i % 2);
    CHECK(worlds[s.world].is_free(s.start.position()));
    CHECK(worlds[s.world].is_free(s.goal));
    CHECK((s.goal - s.start.position()).norm() >= 10.0);
    CHECK(s.start.x == again[i].start.x);
    CHECK(s.goal == again[i].goal);
  }
}

TEST_CASE("A* goes around a wall") {
  auto w = empty_world(30.0);
  w.obstacles.push_back(testing::wall(Vec2(0, 0), Vec2(0.15, 5.0)));
  const Vec2 a(-5.25, 0.25), b(5.25, 0.25);  // cell centers
  const auto path = astar(w, a, b, 0.5);
  REQUIRE(path);
  CHECK(path_length(*path) > 10.0 + 1.0);
  for (const auto& p : *path) CHECK(w.is_free(p));

  const auto open = astar(empty_world(30.0), a, b, 0.5);
  REQUIRE(open);
  CHECK(path_length(*open) == doctest::Approx(10.5).epsilon(1e-12));
}

TEST_CASE("A* reports a sealed goal as unreachable") {
  auto w = empty_world(20.0);
  w.obstacles.push_back(testing::wall(Vec2(0, 5), Vec2(0.15, 5.0)));
  w.obstacles.push_back(testing::wall(Vec2(0, -5), Vec2(0.15, 5.0)));
  CHECK_FALSE(astar(w, Vec2(-5, 0), Vec2(5, 0), 0.5));
  OraclePolicy oracle;
  const auto r = run_episode(w, oracle, spec_at(Pose{-5, 0, 0}, Vec2(5, 0)));
  CHECK(r.outcome == Outcome::no_path);
}

namespace {

template <class F>
void for_each_fine_coarse_pair(F&& f) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto w = generate_world(seed, Vec2(40, 40), Profile::out_of_distribution);
    for (const auto& s : make_specs({w}, 3, seed)) {
      const auto coarse = astar(w, s.start.position(), s.goal, 0.5);
      const auto fine = astar(w, s.start.position(), s.goal, 0.1);
      REQUIRE(coarse);
      REQUIRE(fine);
      f(path_length(*fine), path_length(*coarse));
    }
  }
}

}  // namespace

// Known failure: endpoint snapping and 8-connected ties let the coarse path
// come out a few centimetres shorter on some instances.
TEST_CASE("a finer A* grid never finds a longer path" * doctest::may_fail()) {
  for_each_fine_coarse_pair([](double fine, double coarse) { CHECK(fine <= coarse); });
}

TEST_CASE("a finer A* grid is no longer than coarse plus endpoint snapping") {
  // Each endpoint snap on the coarse grid can save at most half a cell diagonal.
  const double slack = 2.0 * 0.5 * std::sqrt(0.5);
  for_each_fine_coarse_pair([&](double fine, double coarse) { CHECK(fine <= coarse + slack); });
}

TEST_CASE("oracle succeeds in an empty world") {
  OraclePolicy oracle;
  const auto r = run_episode(empty_world(), oracle, spec_at(Pose{-8, 3, 1.0}, Vec2(8, -3)));
  CHECK(r.outcome == Outcome::success);
}

TEST_CASE("episodes are deterministic") {
  const auto w = generate_world(3, Vec2(40, 40), Profile::in_distribution);
  const auto specs = make_specs({w}, 4, 9);
  for (Method m : {Method::random, Method::straight, Method::oracle, Method::hybrid}) {
    const auto a = run_episodes(m, 0.75, {w}, specs, assets().eval);
    const auto b = run_episodes(m, 0.75, {w}, specs, assets().eval);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].outcome == b[i].outcome);
      CHECK(a[i].path_length == b[i].path_length);
      CHECK(a[i].final_pose.x == b[i].final_pose.x);
    }
  }
}

TEST_CASE("hybrid endpoints equal the single-component planners") {
  std::vector<WorldSpec> worlds{generate_world(5, Vec2(40, 40), Profile::in_distribution)};
  EvalConfig cfg;
  cfg.timeout = 40.0;
  const auto specs = make_specs(worlds, 4, 11, cfg);
  auto same = [](const std::vector<EpisodeResult>& a, const std::vector<EpisodeResult>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].outcome != b[i].outcome || a[i].path_length != b[i].path_length) return false;
    }
    return true;
  };
  CHECK(same(run_episodes(Method::hybrid, 0.0, worlds, specs, assets().eval, cfg),
             run_episodes(Method::learner_only, 0.0, worlds, specs, assets().eval, cfg)));
  CHECK(same(run_episodes(Method::hybrid, 1.0, worlds, specs, assets().eval, cfg),
             run_episodes(Method::costmap_only, 0.0, worlds, specs, assets().eval, cfg)));
}

TEST_CASE("oracle normalizes to one and straight is perfect in empty worlds") {
  std::vector<WorldSpec> worlds{empty_world(), empty_world(30.0)};
  EvalAssets a;
  const auto oracle = evaluate(Method::oracle, 0.0, worlds, 10, 3, a, "empty", 0.0);
  CHECK(oracle.raw_rate == 1.0);
  const auto self = evaluate(Method::oracle, 0.0, worlds, 10, 3, a, "empty", oracle.raw_rate);
  CHECK(self.normalized_rate == 1.0);
  const auto straight = evaluate(Method::straight, 0.0, worlds, 10, 3, a, "empty", oracle.raw_rate);
  CHECK(straight.raw_rate == 1.0);
  CHECK(straight.normalized_rate == 1.0);
}

TEST_CASE("summarize counts outcomes and the binomial interval") {
  std::vector<EpisodeResult> r(10);
  for (int i = 0; i < 6; ++i) r[i].outcome = Outcome::success;
  r[6].outcome = Outcome::stuck;
  r[7].outcome = Outcome::trapped;
  r[8].outcome = Outcome::no_path;
  const auto m = summarize("x", 0.5, "env", r, 0.8);
  CHECK(m.success == 6);
  CHECK(m.stuck == 1);
  CHECK(m.trapped == 1);
  CHECK(m.timeout == 1);
  CHECK(m.no_path == 1);
  CHECK(m.raw_rate == doctest::Approx(0.6));
  CHECK(m.normalized_rate == doctest::Approx(0.75));
  CHECK(m.ci == doctest::Approx(1.96 * std::sqrt(0.6 * 0.4 / 10)));
  CHECK(summarize("x", 0, "env", r, 0.0).normalized_rate == 0.0);
}

TEST_CASE("BC overfits a single example") {
  const auto bc = small_bc();
  Rng rng(1);
  auto mc = testing::small_model_config();
  Dataset d;
  d.examples.push_back(testing::random_example(mc, rng));
  TrainConfig tc;
  tc.epochs = 1500;
  tc.batch_size = 1;
  const auto r = train_bc(d, tc, bc);
  const auto& ex = d.examples.front();
  const Vec2 pred = bc_predict(r.model, ex.patch, ex.past, ex.future.back());
  CHECK((pred - ex.future.front()).norm() < 0.01);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("BC with zero weights predicts no motion and training is seeded") {
  auto m = make_bc(small_bc(), 3);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  Rng rng(2);
  const auto ex = testing::random_example(testing::small_model_config(), rng);
  CHECK(bc_predict(m, ex.patch, ex.past, Vec2(2, 0)).norm() == 0.0);

  Dataset d;
  for (int i = 0; i < 40; ++i) d.examples.push_back(testing::random_example(testing::small_model_config(), rng));
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 8;
  CHECK(train_bc(d, tc, small_bc()).model.params == train_bc(d, tc, small_bc()).model.params);
  CHECK_THROWS_AS(train_bc(Dataset{}, tc, small_bc()), Error);
}

TEST_CASE("report CSV round trip and SVG values") {
  std::vector<MetricsReport> reports;
  for (double phi : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    MetricsReport r;
    r.method = "hybrid";
    r.phi = phi;
    r.environment = "in_distribution";
    r.episodes = 100;
    r.success = static_cast<std::size_t>(40 + 40 * phi * (1 - phi));
    r.raw_rate = r.success / 100.0;
    r.normalized_rate = r.raw_rate / 0.9;
    reports.push_back(r);
  }
  std::stringstream csv;
  write_report_csv(csv, reports);
  const auto back = read_report_csv(csv);
  REQUIRE(back.size() == reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].phi == reports[i].phi);
    CHECK(back[i].success == reports[i].success);
    CHECK(back[i].normalized_rate == doctest::Approx(reports[i].normalized_rate).epsilon(1e-6));  // CSV keeps 6 digits
  }
  std::ostringstream svg;
  write_report_svg(svg, reports, "sweep");
  const std::string s = svg.str();
  CHECK(s.find("<svg") != std::string::npos);
  const std::regex attr("data-rate=\"([^\"]+)\"");
  std::vector<double> drawn;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), attr); it != std::sregex_iterator(); ++it) {
    drawn.push_back(std::stod((*it)[1].str()));
  }
  REQUIRE(drawn.size() == back.size());
  for (std::size_t i = 0; i < drawn.size(); ++i) CHECK(drawn[i] == doctest::Approx(back[i].normalized_rate).epsilon(1e-6));
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::hybrid, Method::learner_only, Method::costmap_only, Method::bc, Method::straight,
                   Method::random, Method::oracle}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("teleport"), Error);
}
