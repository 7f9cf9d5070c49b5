#include "hip/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace hip {

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated payload");
  return v;
}

void write_header(std::ostream& out, const std::string& magic, json header, const json& extra) {
  if (!extra.is_null()) header["config"] = extra;
  out << magic << ' ' << kFormatVersion << '\n' << header.dump() << '\n';
}

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

json read_header(std::istream& in, const std::string& magic) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty file");
  std::istringstream first(line);
  std::string m;
  int version = -1;
  first >> m >> version;
  if (m != magic) throw FormatError("expected a " + magic + " file, found '" + m + "'");
  if (version != kFormatVersion) {
    throw FormatError(magic + ": unsupported schema version " + std::to_string(version));
  }
  if (!std::getline(in, line)) throw FormatError(magic + ": missing header");
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(magic + ": malformed header");
  }
}

json world_to_json(const WorldSpec& w) {
  json obstacles = json::array();
  for (const auto& o : w.obstacles) {
    obstacles.push_back({{"kind", to_string(o.kind)},
                         {"center", to_json(o.center)},
                         {"half_extents", to_json(o.half_extents)},
                         {"height", o.height},
                         {"appearance", o.appearance},
                         {"traversable", o.traversable}});
  }
  return {{"schema", "hip-world"},
          {"version", kFormatVersion},
          {"seed", w.seed},
          {"extent", to_json(w.extent)},
          {"profile", to_string(w.profile)},
          {"grass_slowdown", w.grass_slowdown},
          {"robot_radius", w.robot_radius},
          {"ground", w.ground},
          {"max_height", w.max_height},
          {"obstacles", obstacles}};
}

WorldSpec world_from_json(const json& j) {
  try {
    if (j.at("schema") != "hip-world") throw FormatError("not a world file");
    if (j.at("version").get<int>() != kFormatVersion) throw FormatError("world: unsupported schema version");
    WorldSpec w;
    w.seed = j.at("seed").get<std::uint64_t>();
    w.extent = vec2(j.at("extent"));
    w.profile = profile_from_string(j.at("profile").get<std::string>());
    w.grass_slowdown = j.at("grass_slowdown").get<double>();
    w.robot_radius = j.at("robot_radius").get<double>();
    w.ground = j.at("ground").get<Rgb>();
    w.max_height = j.at("max_height").get<double>();
    for (const auto& o : j.at("obstacles")) {
      Obstacle ob;
      ob.kind = obstacle_kind_from_string(o.at("kind").get<std::string>());
      ob.center = vec2(o.at("center"));
      ob.half_extents = vec2(o.at("half_extents"));
      ob.height = o.at("height").get<double>();
      ob.appearance = o.at("appearance").get<Rgb>();
      ob.traversable = o.at("traversable").get<bool>();
      w.obstacles.push_back(ob);
    }
    return w;
  } catch (const json::exception& e) {
    throw FormatError(std::string("world: ") + e.what());
  }
}

json library_to_json(const TrajectoryLibrary& lib) {
  json c = json::array();
  for (const auto& t : lib.centroids) {
    json pts = json::array();
    for (const auto& p : t) pts.push_back(to_json(p));
    c.push_back(pts);
  }
  return {{"schema", "hip-library"}, {"version", kFormatVersion}, {"k", lib.size()}, {"centroids", c}};
}

TrajectoryLibrary library_from_json(const json& j) {
  try {
    if (j.at("schema") != "hip-library") throw FormatError("not a library file");
    if (j.at("version").get<int>() != kFormatVersion) throw FormatError("library: unsupported schema version");
    TrajectoryLibrary lib;
    for (const auto& t : j.at("centroids")) {
      Trajectory tr;
      for (const auto& p : t) tr.push_back(vec2(p));
      lib.centroids.push_back(std::move(tr));
    }
    return lib;
  } catch (const json::exception& e) {
    throw FormatError(std::string("library: ") + e.what());
  }
}

void write_log(std::ostream& out, const RawLog& log, const json& extra) {
  json events = json::array();
  for (const auto& e : log.events) events.push_back({{"kind", to_string(e.kind)}, {"time", e.time}});
  write_header(out, "HIPLOG",
               {{"seed", log.seed},
                {"dt", log.dt},
                {"records", log.records.size()},
                {"events", events},
                {"world", world_to_json(log.world)}},
               extra);
  for (const auto& r : log.records) {
    put(out, r.time);
    put(out, r.pose.x);
    put(out, r.pose.y);
    put(out, r.pose.heading);
    put(out, r.action.linear);
    put(out, r.action.angular);
    put(out, static_cast<std::uint8_t>(r.respawn));
  }
}

RawLog read_log(std::istream& in) {
  const json h = read_header(in, "HIPLOG");
  RawLog log;
  try {
    log.seed = h.at("seed").get<std::uint64_t>();
    log.dt = h.at("dt").get<double>();
    log.world = world_from_json(h.at("world"));
    for (const auto& e : h.at("events")) {
      log.events.push_back({e.at("kind") == "stuck" ? CollisionKind::stuck : CollisionKind::trapped,
                            e.at("time").get<double>()});
    }
    const auto n = h.at("records").get<std::size_t>();
    log.records.resize(n);
    for (auto& r : log.records) {
      r.time = get<double>(in);
      r.pose.x = get<double>(in);
      r.pose.y = get<double>(in);
      r.pose.heading = get<double>(in);
      r.action.linear = get<double>(in);
      r.action.angular = get<double>(in);
      r.respawn = get<std::uint8_t>(in) != 0;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("log: ") + e.what());
  }
  return log;
}

void write_dataset(std::ostream& out, const Dataset& d, const json& extra) {
  const auto& m = d.meta;
  write_header(out, "HIPDATA",
               {{"examples", d.examples.size()},
                {"collection_seed", m.collection_seed},
                {"world_seeds", m.world_seeds},
                {"f_tau", m.f_tau},
                {"horizon", m.horizon},
                {"past", m.past},
                {"patch_rows", m.patch_rows},
                {"patch_cols", m.patch_cols},
                {"windows_total", m.windows_total},
                {"windows_dropped", m.windows_dropped}},
               extra);
  for (const auto& e : d.examples) {
    if (static_cast<int>(e.past.size()) != m.past || static_cast<int>(e.future.size()) != m.horizon ||
        e.patch.rows != m.patch_rows || e.patch.cols != m.patch_cols) {
      throw Error("write_dataset: example shape disagrees with metadata");
    }
    for (const auto& p : e.past) put(out, p.x()), put(out, p.y());
    for (const auto& p : e.future) put(out, p.x()), put(out, p.y());
    out.write(reinterpret_cast<const char*>(e.patch.data.data()),
              static_cast<std::streamsize>(e.patch.data.size() * sizeof(float)));
  }
}

Dataset read_dataset(std::istream& in) {
  const json h = read_header(in, "HIPDATA");
  Dataset d;
  try {
    auto& m = d.meta;
    m.collection_seed = h.at("collection_seed").get<std::uint64_t>();
    m.world_seeds = h.at("world_seeds").get<std::vector<std::uint64_t>>();
    m.f_tau = h.at("f_tau").get<double>();
    m.horizon = h.at("horizon").get<int>();
    m.past = h.at("past").get<int>();
    m.patch_rows = h.at("patch_rows").get<int>();
    m.patch_cols = h.at("patch_cols").get<int>();
    m.windows_total = h.at("windows_total").get<std::size_t>();
    m.windows_dropped = h.at("windows_dropped").get<std::size_t>();
    d.examples.resize(h.at("examples").get<std::size_t>());
    for (auto& e : d.examples) {
      e.past.resize(m.past);
      e.future.resize(m.horizon);
      for (auto* seq : {&e.past, &e.future}) {
        for (auto& p : *seq) {
          const double x = get<double>(in);
          p = Vec2(x, get<double>(in));
        }
      }
      e.patch = Patch(m.patch_rows, m.patch_cols);
      in.read(reinterpret_cast<char*>(e.patch.data.data()),
              static_cast<std::streamsize>(e.patch.data.size() * sizeof(float)));
      if (!in) throw FormatError("dataset: truncated payload");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  return d;
}

namespace {

json model_config_json(const ModelConfig& c) {
  return {{"patch_rows", c.patch_rows},         {"patch_cols", c.patch_cols},
          {"patch_extent", c.patch_extent},     {"pool_factor", c.pool_factor},
          {"horizon", c.horizon},               {"past", c.past},
          {"encoder_hidden", c.encoder_hidden}, {"step_hidden", c.step_hidden},
          {"local_features", c.local_features}, {"local_offsets", c.local_offsets},
          {"channel_mask", c.channel_mask},
          {"eta", c.eta},                       {"init_scale", c.init_scale}};
}

ModelConfig model_config_from(const json& j) {
  ModelConfig c;
  c.patch_rows = j.at("patch_rows").get<int>();
  c.patch_cols = j.at("patch_cols").get<int>();
  c.patch_extent = j.at("patch_extent").get<double>();
  c.pool_factor = j.at("pool_factor").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.past = j.at("past").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  c.step_hidden = j.at("step_hidden").get<std::vector<int>>();
  c.local_features = j.at("local_features").get<bool>();
  c.local_offsets = j.at("local_offsets").get<std::vector<std::array<double, 2>>>();
  c.channel_mask = j.at("channel_mask").get<std::array<float, 4>>();
  c.eta = j.at("eta").get<double>();
  c.init_scale = j.at("init_scale").get<double>();
  return c;
}

void write_params(std::ostream& out, const nn::ParamVector& p) {
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
}

nn::ParamVector read_params(std::istream& in, std::size_t n) {
  nn::ParamVector p(n);
  in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("truncated parameters");
  return p;
}

}  // namespace

void write_model(std::ostream& out, const ImitativeModel& m, const json& extra) {
  write_header(out, "HIPMODEL",
               {{"model", model_config_json(m.config)},
                {"sigma_floor", m.sigma_floor},
                {"eta", m.eta},
                {"train_seed", m.train_seed},
                {"channel_offset", m.channels.offset},
                {"channel_scale", m.channels.scale},
                {"params", m.params.size()}},
               extra);
  write_params(out, m.params);
}

ImitativeModel read_model(std::istream& in) {
  const json h = read_header(in, "HIPMODEL");
  ImitativeModel m;
  try {
    m.config = model_config_from(h.at("model"));
    m.train_seed = h.at("train_seed").get<std::uint64_t>();
    m.channels.offset = h.at("channel_offset").get<std::array<double, 4>>();
    m.channels.scale = h.at("channel_scale").get<std::array<double, 4>>();
    m.params = read_params(in, h.at("params").get<std::size_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  rebuild(m);
  return m;
}

void write_bc(std::ostream& out, const BcModel& m, const json& extra) {
  const auto& c = m.config;
  write_header(out, "HIPBC",
               {{"bc",
                 {{"patch_rows", c.patch_rows},
                  {"patch_cols", c.patch_cols},
                  {"pool_factor", c.pool_factor},
                  {"past", c.past},
                  {"encoder_hidden", c.encoder_hidden},
                  {"head_hidden", c.head_hidden},
                  {"channel_mask", c.channel_mask},
                  {"patch_extent", c.patch_extent},
                  {"local_offsets", c.local_offsets},
                  {"goal_reach", c.goal_reach},
                  {"replan_hz", c.replan_hz}}},
                {"train_seed", m.train_seed},
                {"channel_offset", m.channels.offset},
                {"channel_scale", m.channels.scale},
                {"params", m.params.size()}},
               extra);
  write_params(out, m.params);
}

BcModel read_bc(std::istream& in) {
  const json h = read_header(in, "HIPBC");
  BcModel m;
  try {
    const json& c = h.at("bc");
    m.config.patch_rows = c.at("patch_rows").get<int>();
    m.config.patch_cols = c.at("patch_cols").get<int>();
    m.config.pool_factor = c.at("pool_factor").get<int>();
    m.config.past = c.at("past").get<int>();
    m.config.encoder_hidden = c.at("encoder_hidden").get<std::vector<int>>();
    m.config.head_hidden = c.at("head_hidden").get<std::vector<int>>();
    m.config.channel_mask = c.at("channel_mask").get<std::array<float, 4>>();
    m.config.patch_extent = c.at("patch_extent").get<double>();
    m.config.local_offsets = c.at("local_offsets").get<std::vector<std::array<double, 2>>>();
    m.config.goal_reach = c.at("goal_reach").get<double>();
    m.config.replan_hz = c.at("replan_hz").get<double>();
    m.train_seed = h.at("train_seed").get<std::uint64_t>();
    m.channels.offset = h.at("channel_offset").get<std::array<double, 4>>();
    m.channels.scale = h.at("channel_scale").get<std::array<double, 4>>();
    m.params = read_params(in, h.at("params").get<std::size_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bc model: ") + e.what());
  }
  rebuild(m);
  return m;
}

void save_json(const std::filesystem::path& path, const json& j) {
  save_with(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

json load_json(const std::filesystem::path& path) {
  return load_with(path, [&](std::istream& in) {
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + " is not valid JSON");
    }
  });
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  save_with(path, [&](std::ostream& out) { out << text; });
}

std::string load_text(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in) {
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  });
}

}  // namespace hip
