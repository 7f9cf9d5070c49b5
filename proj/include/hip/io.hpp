#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "hip/datakit.hpp"
#include "hip/evalbench.hpp"
#include "hip/imitative.hpp"
#include "hip/worldsim.hpp"

namespace hip {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Raised when a file carries the wrong magic or an unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

json world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const json& j);

json library_to_json(const TrajectoryLibrary& library);
TrajectoryLibrary library_from_json(const json& j);

// Binary artifacts: "<MAGIC> <version>\n", one JSON header line, payload.
// extra is merged into the header under "config" when non-null.
void write_log(std::ostream& out, const RawLog& log, const json& extra = nullptr);
RawLog read_log(std::istream& in);

void write_dataset(std::ostream& out, const Dataset& data, const json& extra = nullptr);
Dataset read_dataset(std::istream& in);

void write_model(std::ostream& out, const ImitativeModel& model, const json& extra = nullptr);
ImitativeModel read_model(std::istream& in);

void write_bc(std::ostream& out, const BcModel& model, const json& extra = nullptr);
BcModel read_bc(std::istream& in);

/// Header of a binary artifact without reading its payload.
json read_header(std::istream& in, const std::string& magic);

// File helpers.
void save_json(const std::filesystem::path& path, const json& j);
json load_json(const std::filesystem::path& path);
void save_text(const std::filesystem::path& path, const std::string& text);
std::string load_text(const std::filesystem::path& path);

template <class F>
void save_with(const std::filesystem::path& path, F&& writer);
template <class F>
auto load_with(const std::filesystem::path& path, F&& reader);

}  // namespace hip

#include <fstream>

namespace hip {

template <class F>
void save_with(const std::filesystem::path& path, F&& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  writer(out);
  if (!out) throw Error("write failed: " + path.string());
}

template <class F>
auto load_with(const std::filesystem::path& path, F&& reader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return reader(in);
}

}  // namespace hip
