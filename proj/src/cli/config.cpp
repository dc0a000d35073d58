#include "butterfly/cli/config.hpp"

#include "butterfly/errors.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace butterfly::cli {

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("invalid number '" + std::string(text) + "' in " + std::string(what));
  }
  return value;
}

}  // namespace

SchemeKind parse_scheme(std::string_view name) {
  if (name == "no_cache") return SchemeKind::kNoCache;
  if (name == "cache") return SchemeKind::kCache;
  if (name == "cache_partial") return SchemeKind::kCachePartial;
  if (name == "mimo") return SchemeKind::kMimo;
  if (name == "mimo_no_side") return SchemeKind::kMimoNoSide;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

std::string to_string(SchemeKind scheme) {
  switch (scheme) {
    case SchemeKind::kNoCache: return "no_cache";
    case SchemeKind::kCache: return "cache";
    case SchemeKind::kCachePartial: return "cache_partial";
    case SchemeKind::kMimo: return "mimo";
    case SchemeKind::kMimoNoSide: return "mimo_no_side";
  }
  return {};
}

PowerGrid parse_power_grid(std::string_view text) {
  const auto first = text.find(':');
  const auto second = first == std::string_view::npos ? first : text.find(':', first + 1);
  if (second == std::string_view::npos) {
    throw ConfigError("power grid must be start:stop:step, got '" + std::string(text) + "'");
  }
  PowerGrid g;
  g.start_db = parse_double(text.substr(0, first), "power grid");
  g.stop_db = parse_double(text.substr(first + 1, second - first - 1), "power grid");
  g.step_db = parse_double(text.substr(second + 1), "power grid");
  return g;
}

Topology SimulationConfig::resolved_topology() const {
  if (topology) return *topology;
  switch (scheme) {
    case SchemeKind::kMimo: return Topology::multi_antenna(3);
    case SchemeKind::kMimoNoSide: return Topology::multi_antenna_only(3);
    default: return Topology::single_antenna();
  }
}

void SimulationConfig::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("--p must lie in [0, 1]");
  if (!(grid.step_db > 0.0) || !(grid.stop_db >= grid.start_db)) {
    throw ConfigError("power grid needs step > 0 and stop >= start");
  }
  if (grid.stop_db - grid.start_db < 40.0) throw ConfigError("power grid must span at least 40 dB");
  if (trials && *trials < 1) throw ConfigError("--trials must be positive");
  if (!(tol_residual > 0.0) || !(tol_rank > 0.0) || !(tol_slope > 0.0)) {
    throw ConfigError("tolerances must be positive");
  }
  if (max_resamples < 1) throw ConfigError("max_resamples must be positive");
  const Topology topo = resolved_topology();
  switch (scheme) {
    case SchemeKind::kNoCache:
    case SchemeKind::kCache:
    case SchemeKind::kCachePartial:
      if (!topo.is_single_antenna()) {
        throw ConfigError(to_string(scheme) + " runs on the single-antenna topology, not " + topo.name());
      }
      break;
    case SchemeKind::kMimo:
      if (topo.kind() != Topology::Kind::kMultiAntennaRelay) {
        throw ConfigError("mimo needs a MultiAntennaRelay topology, not " + topo.name());
      }
      break;
    case SchemeKind::kMimoNoSide:
      if (topo.is_single_antenna()) throw ConfigError("mimo_no_side needs a multi-antenna relay");
      break;
  }
}

SimulationConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"scheme", "p",   "topology",   "pdb",          "seed",
                                           "trials", "out", "tolerances", "max_resamples", "description"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  SimulationConfig c;
  try {
    if (j.contains("scheme")) c.scheme = parse_scheme(j["scheme"].get<std::string>());
    if (j.contains("p")) c.fraction = j["p"].get<double>();
    if (j.contains("topology")) c.topology = Topology::parse(j["topology"].get<std::string>());
    if (j.contains("pdb")) c.grid = parse_power_grid(j["pdb"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("max_resamples")) c.max_resamples = j["max_resamples"].get<int>();
    if (j.contains("tolerances")) {
      const auto& t = j["tolerances"];
      if (t.contains("residual")) c.tol_residual = t["residual"].get<double>();
      if (t.contains("rank")) c.tol_rank = t["rank"].get<double>();
      if (t.contains("slope")) c.tol_slope = t["slope"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace butterfly::cli
