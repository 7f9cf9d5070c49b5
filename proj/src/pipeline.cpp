#include "hip/pipeline.hpp"

#include <chrono>
#include <map>
#include <ostream>
#include <sstream>

#include "hip/io.hpp"

namespace hip {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void note(std::ostream* log, const std::string& stage, const Stopwatch& clock, const std::string& detail = {}) {
  if (!log) return;
  *log << "[" << clock.seconds() << " s] " << stage;
  if (!detail.empty()) *log << ": " << detail;
  *log << std::endl;
}

std::string csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  write_report_csv(out, reports);
  return out.str();
}

std::string svg(const std::vector<MetricsReport>& reports, const std::string& title) {
  std::ostringstream out;
  write_report_svg(out, reports, title);
  return out.str();
}

}  // namespace

std::vector<std::pair<std::string, std::array<float, 4>>> ablation_modes() {
  return {{"appearance+height", {1, 1, 1, 1}}, {"appearance", {1, 1, 1, 0}}, {"height", {0, 0, 0, 1}}};
}

std::vector<WorldSpec> make_worlds(const Settings& s, const std::string& role, int count, Profile profile) {
  std::vector<WorldSpec> worlds;
  for (int i = 0; i < count; ++i) {
    worlds.push_back(generate_world(derive_seed(s.seed, role + "_world", static_cast<std::uint64_t>(i)), s.extent,
                                    profile, s.world));
  }
  return worlds;
}

Dataset build_dataset(const Settings& s, const std::vector<WorldSpec>& worlds, std::ostream* log) {
  Dataset all;
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    const RawLog raw = collect(worlds[i], s.steps_per_world, derive_seed(s.seed, "collect", i), s.collect);
    Dataset d = make_dataset(raw, s.dataset);
    if (log) {
      *log << "  world " << i << ": " << raw.events.size() << " collision events, " << d.examples.size()
           << " examples" << std::endl;
    }
    merge(all, std::move(d));
  }
  all.meta.collection_seed = s.seed;
  return all;
}

PipelineResult run_pipeline(const Settings& s, const std::filesystem::path& dir, std::ostream* log) {
  Stopwatch clock;
  PipelineResult result;
  const json config = to_json(s);
  std::filesystem::create_directories(dir);
  json manifest = {{"seed", s.seed}, {"config", config}, {"artifacts", json::array()}};
  auto record = [&](const std::string& name) { manifest["artifacts"].push_back(name); };

  const auto train_worlds = make_worlds(s, "train", s.train_worlds, Profile::in_distribution);
  const auto eval_worlds = make_worlds(s, "eval", s.eval_worlds, Profile::in_distribution);
  const auto ood_worlds = make_worlds(s, "ood", s.eval_worlds, Profile::out_of_distribution);
  for (std::size_t i = 0; i < train_worlds.size(); ++i) {
    const std::string name = "worlds/train_" + std::to_string(i) + ".json";
    save_json(dir / name, world_to_json(train_worlds[i]));
    record(name);
  }
  note(log, "worlds", clock);

  const Dataset data = build_dataset(s, train_worlds, log);
  result.dataset_size = data.examples.size();
  save_with(dir / "dataset.bin", [&](std::ostream& o) { write_dataset(o, data, config); });
  record("dataset.bin");
  note(log, "dataset", clock, std::to_string(data.examples.size()) + " examples");

  auto train_masked = [&](const std::array<float, 4>& mask) {
    ModelConfig mc = s.model;
    mc.channel_mask = mask;
    return train(data, s.train, mc);
  };
  const TrainResult trained = train_masked({1, 1, 1, 1});
  save_with(dir / "model.bin", [&](std::ostream& o) { write_model(o, trained.model, config); });
  record("model.bin");
  note(log, "train", clock,
       "held-in nll " + std::to_string(trained.held_in_before) + " -> " + std::to_string(trained.held_in_after));

  BcTrainResult bc = train_bc(data, s.train, s.bc);
  save_with(dir / "bc.bin", [&](std::ostream& o) { write_bc(o, bc.model, config); });
  record("bc.bin");
  note(log, "train_bc", clock, "final mse " + std::to_string(bc.epoch_loss.back()));

  const TrajectoryLibrary library = build_library(data, s.library_k, derive_seed(s.seed, "library"),
                                                  s.library_iterations);
  save_json(dir / "library.json", library_to_json(library));
  record("library.json");
  note(log, "library", clock);

  EvalAssets assets;
  assets.library = &library;
  assets.model = &trained.model;
  assets.bc = &bc.model;
  assets.planner = s.planner;
  assets.gains = s.gains;
  assets.random = s.collect;
  assets.oracle_resolution = s.oracle_resolution;

  struct Env {
    std::string name;
    const std::vector<WorldSpec>* worlds;
    std::vector<EpisodeSpec> specs;
    double oracle_rate = 0.0;
  };
  std::vector<Env> envs{{"in_distribution", &eval_worlds, make_specs(eval_worlds, s.episodes, derive_seed(s.seed, "eval"), s.eval)},
                        {"out_of_distribution", &ood_worlds, make_specs(ood_worlds, s.episodes, derive_seed(s.seed, "eval_ood"), s.eval)}};

  // Results cached by (environment, method, phi, model) so shared cells run once.
  std::map<std::string, MetricsReport> cache;
  auto cell = [&](Env& env, Method m, double phi, const EvalAssets& a, const std::string& tag) {
    const bool planner = m == Method::hybrid || m == Method::learner_only || m == Method::costmap_only;
    const double key_phi = m == Method::learner_only ? 0.0 : m == Method::costmap_only ? 1.0 : planner ? phi : 0.0;
    std::ostringstream key;
    key << env.name << '|' << (planner ? "planner" : to_string(m)) << '|' << key_phi << '|'
        << (planner && key_phi < 1.0 ? tag : "");
    auto it = cache.find(key.str());
    if (it == cache.end()) {
      const auto results = run_episodes(m, phi, *env.worlds, env.specs, a, s.eval);
      MetricsReport r = summarize(to_string(m), phi, env.name, results, 0.0);
      it = cache.emplace(key.str(), r).first;
      note(log, "eval " + key.str(), clock, std::to_string(r.success) + "/" + std::to_string(r.episodes));
    }
    MetricsReport r = it->second;
    r.method = to_string(m);
    r.phi = key_phi;
    r.normalized_rate = env.oracle_rate > 0.0 ? r.raw_rate / env.oracle_rate : 0.0;
    return r;
  };

  for (auto& env : envs) {
    env.oracle_rate = cell(env, Method::oracle, 0.0, assets, "").raw_rate;
    for (Method m : {Method::oracle, Method::hybrid, Method::learner_only, Method::costmap_only, Method::bc,
                     Method::straight, Method::random}) {
      result.main.push_back(cell(env, m, s.planner.phi, assets, "full"));
    }
  }
  for (double phi : s.sweep) result.sweep.push_back(cell(envs[0], Method::hybrid, phi, assets, "full"));

  for (const auto& [name, mask] : ablation_modes()) {
    MetricsReport r;
    if (mask == std::array<float, 4>{1, 1, 1, 1}) {
      r = cell(envs[0], Method::learner_only, 0.0, assets, "full");
    } else {
      const TrainResult t = train_masked(mask);
      note(log, "train " + name, clock);
      EvalAssets a = assets;
      a.model = &t.model;
      r = cell(envs[0], Method::learner_only, 0.0, a, name);
    }
    r.environment = "in_distribution:" + name;
    result.ablation.push_back(r);
  }

  save_text(dir / "reports.csv", csv(result.main));
  save_text(dir / "sweep.csv", csv(result.sweep));
  save_text(dir / "ablation.csv", csv(result.ablation));
  save_text(dir / "reports.svg", svg(result.main, "success rate by method"));
  save_text(dir / "sweep.svg", svg(result.sweep, "success rate over phi"));
  save_text(dir / "ablation.svg", svg(result.ablation, "learned cost by input channels"));
  for (const char* f : {"reports.csv", "sweep.csv", "ablation.csv", "reports.svg", "sweep.svg", "ablation.svg"}) {
    record(f);
  }
  save_json(dir / "manifest.json", manifest);
  result.seconds = clock.seconds();
  note(log, "done", clock);
  return result;
}

}  // namespace hip
