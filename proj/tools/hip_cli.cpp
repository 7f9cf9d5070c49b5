#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hip/config.hpp"
#include "hip/datakit.hpp"
#include "hip/evalbench.hpp"
#include "hip/geomcost.hpp"
#include "hip/imitative.hpp"
#include "hip/io.hpp"
#include "hip/pipeline.hpp"
#include "hip/planner.hpp"
#include "hip/worldsim.hpp"

namespace fs = std::filesystem;
using namespace hip;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string run_dir = "run";
};

// Flag values that map onto configuration keys; applied after --set.
struct FlagOverrides {
  std::vector<std::string> items;
  template <class T>
  void add(const std::string& key, const std::optional<T>& v) {
    if (!v) return;
    std::ostringstream s;
    if constexpr (std::is_same_v<T, std::string>) {
      s << json(*v).dump();
    } else {
      s << json(*v).dump();
    }
    items.push_back(key + "=" + s.str());
  }
};

Settings settings(const Common& c, const FlagOverrides& f) {
  std::vector<std::string> all = c.overrides;
  all.insert(all.end(), f.items.begin(), f.items.end());
  return load_settings(c.config_file, all);
}

fs::path out_path(const Common& c, const std::string& given, const std::string& fallback) {
  const fs::path p = given.empty() ? fs::path(fallback) : fs::path(given);
  return p.is_absolute() ? p : fs::path(c.run_dir) / p;
}

void record(const Common& c, const std::string& command, const fs::path& artifact, const Settings& s) {
  const fs::path mpath = fs::path(c.run_dir) / "manifest.json";
  json m = fs::exists(mpath) ? load_json(mpath) : json{{"artifacts", json::array()}};
  json entry = {{"command", command}, {"path", fs::relative(artifact, c.run_dir).generic_string()}};
  auto& list = m["artifacts"];
  list.erase(std::remove_if(list.begin(), list.end(), [&](const json& e) { return e.at("path") == entry["path"]; }),
             list.end());
  list.push_back(entry);
  m["config"] = to_json(s);
  save_json(mpath, m);
}

Pose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stod(part));
  if (v.size() < 2 || v.size() > 3) throw Error("pose must be x,y[,heading]");
  return {v[0], v[1], v.size() == 3 ? v[2] : 0.0};
}

std::vector<WorldSpec> load_worlds(const std::vector<std::string>& files) {
  std::vector<WorldSpec> w;
  for (const auto& f : files) w.push_back(world_from_json(load_json(f)));
  return w;
}

Observation observe_at(const WorldSpec& world, const Pose& pose, std::uint64_t seed, const Settings& s) {
  Observation obs;
  obs.pose = pose;
  obs.pointcloud = raycast_lidar(world, pose, s.dataset.sensor);
  obs.patch = render_patch(world, pose, seed, s.dataset.sensor);
  for (int j = 0; j < s.dataset.past; ++j) obs.past_positions.push_back(Vec2::Zero());
  return obs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid imitative planning toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "JSON configuration file");
  app.add_option("--set", common.overrides, "override a configuration key, e.g. train.epochs=5");
  app.add_option("--run-dir", common.run_dir, "directory for outputs and the manifest");

  FlagOverrides flags;
  std::string command;
  std::function<void()> action;

  // gen-world
  auto* gw = app.add_subcommand("gen-world", "generate a world");
  std::optional<std::uint64_t> gw_seed;
  std::string gw_profile = "in_distribution", gw_out;
  std::optional<std::vector<double>> gw_extent;
  gw->add_option("--seed", gw_seed);
  gw->add_option("--extent", gw_extent, "width height")->expected(2);
  gw->add_option("--profile", gw_profile)->check(CLI::IsMember({"in_distribution", "out_of_distribution"}));
  gw->add_option("--out", gw_out);
  gw->callback([&] {
    action = [&] {
      flags.add("seed", gw_seed);
      flags.add("world.extent", gw_extent);
      const Settings s = settings(common, flags);
      const WorldSpec w = generate_world(s.seed, s.extent, profile_from_string(gw_profile), s.world);
      const fs::path out = out_path(common, gw_out, "world.json");
      json j = world_to_json(w);
      j["config"] = to_json(s);
      save_json(out, j);
      record(common, "gen-world", out, s);
    };
  });

  // collect
  auto* co = app.add_subcommand("collect", "collect a random-exploration log in a world");
  std::string co_world, co_out;
  std::optional<long> co_steps;
  std::optional<std::uint64_t> co_seed;
  co->add_option("--world", co_world)->required();
  co->add_option("--steps", co_steps);
  co->add_option("--seed", co_seed);
  co->add_option("--out", co_out);
  co->callback([&] {
    action = [&] {
      flags.add("collect.steps_per_world", co_steps);
      flags.add("seed", co_seed);
      const Settings s = settings(common, flags);
      const WorldSpec w = world_from_json(load_json(co_world));
      const RawLog log = collect(w, s.steps_per_world, derive_seed(s.seed, "collect"), s.collect);
      const fs::path out = out_path(common, co_out, "log.bin");
      save_with(out, [&](std::ostream& o) { write_log(o, log, to_json(s)); });
      record(common, "collect", out, s);
      std::cout << log.records.size() << " records, " << log.events.size() << " collision events\n";
    };
  });

  // make-dataset
  auto* md = app.add_subcommand("make-dataset", "cut logs into training examples");
  std::vector<std::string> md_logs;
  std::string md_out;
  md->add_option("--log", md_logs)->required();
  md->add_option("--out", md_out);
  md->callback([&] {
    action = [&] {
      const Settings s = settings(common, flags);
      Dataset all;
      for (const auto& f : md_logs) {
        merge(all, make_dataset(load_with(f, [](std::istream& i) { return read_log(i); }), s.dataset));
      }
      const fs::path out = out_path(common, md_out, "dataset.bin");
      save_with(out, [&](std::ostream& o) { write_dataset(o, all, to_json(s)); });
      record(common, "make-dataset", out, s);
      std::cout << all.examples.size() << " examples (" << all.meta.windows_dropped << " windows dropped)\n";
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "fit the trajectory density model");
  std::string tr_data, tr_out, tr_kind = "imitative";
  std::optional<int> tr_epochs;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::vector<float>> tr_mask;
  tr->add_option("--dataset", tr_data)->required();
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--seed", tr_seed);
  tr->add_option("--mask", tr_mask, "channel mask r g b height")->expected(4);
  tr->add_option("--kind", tr_kind)->check(CLI::IsMember({"imitative", "bc"}));
  tr->add_option("--out", tr_out);
  tr->callback([&] {
    action = [&] {
      flags.add("train.epochs", tr_epochs);
      flags.add("seed", tr_seed);
      flags.add("model.channel_mask", tr_mask);
      const Settings s = settings(common, flags);
      const Dataset d = load_with(tr_data, [](std::istream& i) { return read_dataset(i); });
      if (tr_kind == "bc") {
        const BcTrainResult r = train_bc(d, s.train, s.bc);
        const fs::path out = out_path(common, tr_out, "bc.bin");
        save_with(out, [&](std::ostream& o) { write_bc(o, r.model, to_json(s)); });
        record(common, "train", out, s);
        std::cout << "final mse " << r.epoch_loss.back() << '\n';
        return;
      }
      const TrainResult r = train(d, s.train, s.model);
      const fs::path out = out_path(common, tr_out, "model.bin");
      save_with(out, [&](std::ostream& o) { write_model(o, r.model, to_json(s)); });
      record(common, "train", out, s);
      std::cout << "held-in nll " << r.held_in_before << " -> " << r.held_in_after << '\n';
    };
  });

  // build-library
  auto* bl = app.add_subcommand("build-library", "cluster dataset futures into a trajectory library");
  std::string bl_data, bl_out;
  std::optional<int> bl_k;
  std::optional<std::uint64_t> bl_seed;
  bl->add_option("--dataset", bl_data)->required();
  bl->add_option("--k", bl_k);
  bl->add_option("--seed", bl_seed);
  bl->add_option("--out", bl_out);
  bl->callback([&] {
    action = [&] {
      flags.add("library.k", bl_k);
      flags.add("seed", bl_seed);
      const Settings s = settings(common, flags);
      const Dataset d = load_with(bl_data, [](std::istream& i) { return read_dataset(i); });
      const TrajectoryLibrary lib = build_library(d, s.library_k, derive_seed(s.seed, "library"), s.library_iterations);
      const fs::path out = out_path(common, bl_out, "library.json");
      save_json(out, library_to_json(lib));
      record(common, "build-library", out, s);
    };
  });

  // costmap
  auto* cm = app.add_subcommand("costmap", "build the raw costmap seen from a pose");
  std::string cm_world, cm_pose = "0,0,0", cm_out;
  cm->add_option("--world", cm_world)->required();
  cm->add_option("--pose", cm_pose, "x,y[,heading]");
  cm->add_option("--out", cm_out);
  cm->callback([&] {
    action = [&] {
      const Settings s = settings(common, flags);
      const WorldSpec w = world_from_json(load_json(cm_world));
      const Pose pose = parse_pose(cm_pose);
      const RawCostGrid raw = build_raw(raycast_lidar(w, pose, s.dataset.sensor), pose, s.planner.grid);
      const fs::path out = out_path(common, cm_out, "costmap.pgm");
      save_with(out, [&](std::ostream& o) { write_pgm(o, raw); });
      record(common, "costmap", out, s);
    };
  });

  // plan
  auto* pl = app.add_subcommand("plan", "plan once from a pose and export the cost breakdown");
  std::string pl_world, pl_model, pl_library, pl_pose = "0,0,0", pl_goal, pl_out;
  std::optional<double> pl_phi;
  pl->add_option("--world", pl_world)->required();
  pl->add_option("--model", pl_model);
  pl->add_option("--library", pl_library)->required();
  pl->add_option("--pose", pl_pose, "x,y[,heading]");
  pl->add_option("--goal", pl_goal, "x,y")->required();
  pl->add_option("--phi", pl_phi);
  pl->add_option("--out", pl_out);
  pl->callback([&] {
    action = [&] {
      flags.add("planner.phi", pl_phi);
      const Settings s = settings(common, flags);
      const WorldSpec w = world_from_json(load_json(pl_world));
      const TrajectoryLibrary lib = library_from_json(load_json(pl_library));
      std::optional<ImitativeModel> model;
      if (!pl_model.empty()) model = load_with(pl_model, [](std::istream& i) { return read_model(i); });
      const Pose pose = parse_pose(pl_pose);
      const Pose goal = parse_pose(pl_goal);
      const Observation obs = observe_at(w, pose, derive_seed(s.seed, "plan"), s);
      const Plan p = plan(lib, model ? &*model : nullptr, observation_costmap(obs, s.planner), obs, goal.position(),
                          s.planner);
      const fs::path out = out_path(common, pl_out, "plan.csv");
      save_with(out, [&](std::ostream& o) { write_breakdown_csv(o, p); });
      record(common, "plan", out, s);
      std::cout << "chosen candidate " << p.index << '\n';
    };
  });

  // eval / sweep / ablate share the evaluation inputs
  struct EvalInputs {
    std::vector<std::string> worlds;
    std::string profile = "in_distribution";
    std::string model, library, bc;
    std::optional<int> episodes;
    std::optional<std::uint64_t> seed;
  };
  auto add_eval_inputs = [](CLI::App* sub, EvalInputs& in) {
    sub->add_option("--world", in.worlds, "world files; generated from the seed when omitted");
    sub->add_option("--profile", in.profile)->check(CLI::IsMember({"in_distribution", "out_of_distribution"}));
    sub->add_option("--model", in.model);
    sub->add_option("--library", in.library);
    sub->add_option("--bc", in.bc);
    sub->add_option("--episodes", in.episodes);
    sub->add_option("--seed", in.seed);
  };
  struct Loaded {
    std::vector<WorldSpec> worlds;
    std::optional<ImitativeModel> model;
    std::optional<TrajectoryLibrary> library;
    std::optional<BcModel> bc;
    EvalAssets assets;
  };
  auto load_inputs = [&](const EvalInputs& in, const Settings& s) {
    Loaded l;
    const Profile prof = profile_from_string(in.profile);
    l.worlds = in.worlds.empty() ? make_worlds(s, prof == Profile::in_distribution ? "eval" : "ood", s.eval_worlds, prof)
                                 : load_worlds(in.worlds);
    if (!in.model.empty()) l.model = load_with(in.model, [](std::istream& i) { return read_model(i); });
    if (!in.library.empty()) l.library = library_from_json(load_json(in.library));
    if (!in.bc.empty()) l.bc = load_with(in.bc, [](std::istream& i) { return read_bc(i); });
    l.assets.planner = s.planner;
    l.assets.gains = s.gains;
    l.assets.random = s.collect;
    l.assets.oracle_resolution = s.oracle_resolution;
    return l;
  };
  auto bind = [](Loaded& l) {
    l.assets.model = l.model ? &*l.model : nullptr;
    l.assets.library = l.library ? &*l.library : nullptr;
    l.assets.bc = l.bc ? &*l.bc : nullptr;
  };
  auto eval_seed = [](const Settings& s, const std::string& profile) {
    return derive_seed(s.seed, profile == "in_distribution" ? "eval" : "eval_ood");
  };
  auto write_reports = [&](const std::string& cmd, const std::string& name, const std::vector<MetricsReport>& r,
                           const Settings& s) {
    const fs::path out = out_path(common, name, cmd + ".csv");
    save_with(out, [&](std::ostream& o) { write_report_csv(o, r); });
    record(common, cmd, out, s);
    write_report_csv(std::cout, r);
  };

  auto* ev = app.add_subcommand("eval", "evaluate one method");
  EvalInputs ev_in;
  std::string ev_method = "hybrid", ev_out;
  std::optional<double> ev_phi;
  add_eval_inputs(ev, ev_in);
  ev->add_option("--method", ev_method)
      ->check(CLI::IsMember({"hybrid", "learner_only", "costmap_only", "bc", "straight", "random", "oracle"}));
  ev->add_option("--phi", ev_phi);
  ev->add_option("--out", ev_out);
  ev->callback([&] {
    action = [&] {
      flags.add("eval.episodes", ev_in.episodes);
      flags.add("seed", ev_in.seed);
      flags.add("planner.phi", ev_phi);
      const Settings s = settings(common, flags);
      Loaded l = load_inputs(ev_in, s);
      bind(l);
      const auto specs = make_specs(l.worlds, s.episodes, eval_seed(s, ev_in.profile), s.eval);
      const double oracle =
          summarize("oracle", 0, ev_in.profile,
                    run_episodes(Method::oracle, 0, l.worlds, specs, l.assets, s.eval), 0)
              .raw_rate;
      const Method m = method_from_string(ev_method);
      const double phi = m == Method::learner_only ? 0.0 : m == Method::costmap_only ? 1.0 : s.planner.phi;
      auto r = summarize(ev_method, phi, ev_in.profile, run_episodes(m, phi, l.worlds, specs, l.assets, s.eval), oracle);
      write_reports("eval", ev_out, {r}, s);
    };
  });

  auto* sw = app.add_subcommand("sweep", "evaluate the hybrid planner over phi");
  EvalInputs sw_in;
  std::optional<std::vector<double>> sw_values;
  std::string sw_out;
  add_eval_inputs(sw, sw_in);
  sw->add_option("--values", sw_values);
  sw->add_option("--out", sw_out);
  sw->callback([&] {
    action = [&] {
      flags.add("eval.episodes", sw_in.episodes);
      flags.add("seed", sw_in.seed);
      flags.add("eval.sweep", sw_values);
      const Settings s = settings(common, flags);
      Loaded l = load_inputs(sw_in, s);
      bind(l);
      const auto specs = make_specs(l.worlds, s.episodes, eval_seed(s, sw_in.profile), s.eval);
      const double oracle =
          summarize("oracle", 0, sw_in.profile, run_episodes(Method::oracle, 0, l.worlds, specs, l.assets, s.eval), 0)
              .raw_rate;
      std::vector<MetricsReport> reports;
      for (double phi : s.sweep) {
        reports.push_back(summarize("hybrid", phi, sw_in.profile,
                                    run_episodes(Method::hybrid, phi, l.worlds, specs, l.assets, s.eval), oracle));
      }
      write_reports("sweep", sw_out, reports, s);
    };
  });

  auto* ab = app.add_subcommand("ablate", "retrain with masked input channels and evaluate learner_only");
  EvalInputs ab_in;
  std::string ab_data, ab_out;
  add_eval_inputs(ab, ab_in);
  ab->add_option("--dataset", ab_data)->required();
  ab->add_option("--out", ab_out);
  ab->callback([&] {
    action = [&] {
      flags.add("eval.episodes", ab_in.episodes);
      flags.add("seed", ab_in.seed);
      const Settings s = settings(common, flags);
      Loaded l = load_inputs(ab_in, s);
      bind(l);
      const Dataset d = load_with(ab_data, [](std::istream& i) { return read_dataset(i); });
      const auto specs = make_specs(l.worlds, s.episodes, eval_seed(s, ab_in.profile), s.eval);
      const double oracle =
          summarize("oracle", 0, ab_in.profile, run_episodes(Method::oracle, 0, l.worlds, specs, l.assets, s.eval), 0)
              .raw_rate;
      std::vector<MetricsReport> reports;
      for (const auto& [name, mask] : ablation_modes()) {
        ModelConfig mc = s.model;
        mc.channel_mask = mask;
        const TrainResult t = train(d, s.train, mc);
        EvalAssets a = l.assets;
        a.model = &t.model;
        auto r = summarize("learner_only", 0.0, ab_in.profile + ":" + name,
                           run_episodes(Method::learner_only, 0.0, l.worlds, specs, a, s.eval), oracle);
        reports.push_back(r);
      }
      write_reports("ablate", ab_out, reports, s);
    };
  });

  auto* pt = app.add_subcommand("plot", "render a report CSV as SVG");
  std::string pt_csv, pt_out, pt_title = "success rate";
  pt->add_option("--csv", pt_csv)->required();
  pt->add_option("--title", pt_title);
  pt->add_option("--out", pt_out);
  pt->callback([&] {
    action = [&] {
      const Settings s = settings(common, flags);
      const auto reports = load_with(pt_csv, [](std::istream& i) { return read_report_csv(i); });
      const fs::path out = out_path(common, pt_out, fs::path(pt_csv).stem().string() + ".svg");
      save_with(out, [&](std::ostream& o) { write_report_svg(o, reports, pt_title); });
      record(common, "plot", out, s);
    };
  });

  auto* gc = app.add_subcommand("grad-check", "compare analytic and numeric gradients on small random models");
  int gc_trials = 10;
  std::optional<std::uint64_t> gc_seed;
  gc->add_option("--trials", gc_trials);
  gc->add_option("--seed", gc_seed);
  gc->callback([&] {
    action = [&] {
      flags.add("seed", gc_seed);
      const Settings s = settings(common, flags);
      double worst = 0.0;
      for (int t = 0; t < gc_trials; ++t) {
        Rng rng(derive_seed(s.seed, "grad_check", static_cast<std::uint64_t>(t)));
        ModelConfig mc;
        mc.patch_rows = mc.patch_cols = 4;
        mc.encoder_hidden = {6, 8};
        mc.step_hidden = {8};
        mc.past = 3;
        mc.horizon = 4;
        ImitativeModel m = make_model(mc, rng.next());
        for (auto& p : m.params) p += 0.3 * rng.normal();
        Example ex;
        ex.patch = Patch(4, 4);
        for (auto& v : ex.patch.data) v = static_cast<float>(rng.uniform());
        for (int j = 0; j < mc.past; ++j) ex.past.push_back(Vec2(0.2 * (j - mc.past + 1), 0.05 * rng.normal()));
        for (int j = 0; j < mc.horizon; ++j) ex.future.push_back(Vec2(0.2 * (j + 1), 0.1 * rng.normal()));
        worst = std::max(worst, grad_check(m, ex));
      }
      std::cout << json{{"trials", gc_trials}, {"max_relative_error", worst}}.dump() << '\n';
      if (worst >= 1e-4) throw Error("gradient check failed: max relative error " + std::to_string(worst));
    };
  });

  auto* pp = app.add_subcommand("pipeline", "run every stage from the master seed");
  std::optional<std::uint64_t> pp_seed;
  pp->add_option("--seed", pp_seed);
  pp->callback([&] {
    action = [&] {
      flags.add("seed", pp_seed);
      const Settings s = settings(common, flags);
      const auto r = run_pipeline(s, common.run_dir, &std::cerr);
      write_report_csv(std::cout, r.main);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    action();
  } catch (const FormatError& e) {
    std::cerr << json{{"error", "format"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "failed"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
