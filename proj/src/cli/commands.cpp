#include "butterfly/cli/commands.hpp"

#include "butterfly/beamform.hpp"
#include "butterfly/channel_json.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/genie.hpp"
#include "butterfly/keyed_stream.hpp"
#include "butterfly/monte_carlo.hpp"
#include "butterfly/schemes.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace butterfly::cli {

namespace {

namespace fs = std::filesystem;
using analysis::Terminal;

/// Raw command-line values; anything set here overrides the config file.
struct Flags {
  std::string config_path;
  std::optional<std::string> scheme;
  std::optional<std::string> topology;
  std::optional<std::string> pdb;
  std::optional<double> p;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::optional<double> tol_residual;
  std::optional<double> tol_rank;
  std::optional<double> tol_slope;
  // verify
  bool feasibility = false;
  std::string channels_file;
  // bound
  std::optional<std::string> left;
  std::optional<std::string> right;
  std::optional<std::string> bridge;
};

void add_common_options(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON experiment file (flags override it)");
  sub->add_option("--scheme", f.scheme, "no_cache | cache | cache_partial | mimo | mimo_no_side");
  sub->add_option("--topology", f.topology, "single | mimo:N | mimo_only:N");
  sub->add_option("--pdb", f.pdb, "power grid start:stop:step in dB");
  sub->add_option("--p", f.p, "cached fraction for cache_partial");
  sub->add_option("--seed", f.seed, "channel seed");
  sub->add_option("--trials", f.trials, "realizations (simulate) or Monte Carlo trials (verify)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--tol-residual", f.tol_residual, "relative nulling residual tolerance");
  sub->add_option("--tol-rank", f.tol_rank, "relative singular value threshold for rank");
  sub->add_option("--tol-slope", f.tol_slope, "allowed DoF slope deviation");
}

SchemeKind scheme_for(const Topology& topo) {
  if (topo.is_single_antenna()) return SchemeKind::kNoCache;
  return topo.kind() == Topology::Kind::kMultiAntennaRelay ? SchemeKind::kMimo : SchemeKind::kMimoNoSide;
}

SimulationConfig resolve_config(const Flags& f, bool scheme_follows_topology = false) {
  SimulationConfig c = f.config_path.empty() ? SimulationConfig{} : load_config(f.config_path);
  if (f.scheme) c.scheme = parse_scheme(*f.scheme);
  if (f.topology) c.topology = Topology::parse(*f.topology);
  if (f.pdb) c.grid = parse_power_grid(*f.pdb);
  if (f.p) c.fraction = *f.p;
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  if (f.out) c.out_dir = *f.out;
  if (f.tol_residual) c.tol_residual = *f.tol_residual;
  if (f.tol_rank) c.tol_rank = *f.tol_rank;
  if (f.tol_slope) c.tol_slope = *f.tol_slope;
  if (scheme_follows_topology && !f.scheme && c.topology) c.scheme = scheme_for(*c.topology);
  c.validate();
  return c;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::vector<Terminal> parse_terminal_list(const std::string& text);

}  // namespace

// ---------------------------------------------------------------------------
// simulate

namespace {

struct PointRun {
  analysis::RatePoint rates;
  nlohmann::json report;
};

PointRun run_point(const SimulationConfig& config, const ChannelRealization& ch, double db,
                   bool with_beamformers) {
  PointRun out;
  switch (config.scheme) {
    case SchemeKind::kNoCache: {
      const auto run = schemes::run_no_cache_scheme(ch, db);
      out.rates = run.rates;
      out.report = schemes::report_to_json(run.report, run.rates);
      break;
    }
    case SchemeKind::kCache: {
      const auto run = schemes::run_cache_scheme(ch, db);
      out.rates = run.rates;
      out.report = schemes::report_to_json(run.report, run.rates);
      break;
    }
    case SchemeKind::kCachePartial: {
      const auto nc = schemes::run_no_cache_scheme(ch, db);
      const auto c = schemes::run_cache_scheme(ch, db);
      out.rates = schemes::time_share(config.fraction, nc.rates, c.rates);
      out.report = {{"p", config.fraction},
                    {"rates", out.rates.rates},
                    {"schemes", {schemes::report_to_json(nc.report, nc.rates),
                                 schemes::report_to_json(c.report, c.rates)}}};
      break;
    }
    case SchemeKind::kMimo:
    case SchemeKind::kMimoNoSide: {
      const bool side = config.scheme == SchemeKind::kMimo;
      const auto run = beamform::run_mimo_scheme(ch, db, side);
      out.rates = run.rates;
      out.report = schemes::report_to_json(run.report, run.rates);
      if (with_beamformers) {
        const auto& working = (!side && ch.topology().kind() == Topology::Kind::kMultiAntennaRelay)
                                  ? ch.without_side_relays()
                                  : ch;
        out.report["beamformers"] = beamform::solution_to_json(beamform::solve_v2(working, run.report.power));
      }
      break;
    }
  }
  return out;
}

}  // namespace

SweepResult sweep_realization(const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const Topology topo = config.resolved_topology();
  const auto grid = analysis::power_grid_db(config.grid.start_db, config.grid.stop_db, config.grid.step_db);
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t channel_seed = attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
    auto ch = sample_channels(topo, channel_seed);
    try {
      std::vector<analysis::RatePoint> points;
      nlohmann::json report;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool last = i + 1 == grid.size();
        auto run = run_point(config, ch, grid[i], last);
        points.push_back(run.rates);
        if (last) report = std::move(run.report);
      }
      auto dof = analysis::dof_slope(points);
      return SweepResult{seed, std::move(ch), std::move(points), std::move(dof), std::move(report)};
    } catch (const DegenerateChannelError& e) {
      if (attempt + 1 >= config.max_resamples) {
        throw DegenerateChannelError("seed " + std::to_string(seed) + " still degenerate after " +
                                     std::to_string(config.max_resamples) + " draws: " + e.what());
      }
      std::fprintf(stderr, "warning: seed %llu draw %d degenerate (%s), resampling\n",
                   static_cast<unsigned long long>(seed), attempt, e.what());
    }
  }
}

namespace {

int cmd_simulate(const SimulationConfig& config, std::ostream& out) {
  const int trials = config.trials.value_or(1);
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);

  nlohmann::json summary = nlohmann::json::array();
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
    const SweepResult res = sweep_realization(config, seed);
    const std::string tag = "seed" + std::to_string(seed);

    std::ostringstream csv;
    analysis::write_rate_csv(csv, res.points);
    write_file(dir / ("rates_" + tag + ".csv"), csv.str());
    write_file(dir / ("channels_" + tag + ".json"), dump(channels_to_json(res.channels)));
    write_file(dir / ("report_" + tag + ".json"), dump(res.report));

    nlohmann::json entry = analysis::dof_to_json(res.dof);
    entry["seed"] = seed;
    entry["channel_seed"] = res.channels.seed();
    entry["scheme"] = to_string(config.scheme);
    summary.push_back(std::move(entry));

    out << "seed " << seed << ": total slope " << fmt(res.dof.total_slope, "%.4f") << " (users";
    for (double s : res.dof.user_slopes) out << ' ' << fmt(s, "%.4f");
    out << "), R^2 " << fmt(res.dof.r_squared, "%.6f") << '\n';
  }
  write_file(dir / "dof.json", dump(summary));
  out << "wrote " << trials << " sweep(s) to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

void print_feasibility(std::ostream& out) {
  out << "n  side_scalars  parameters  constraints  feasible\n";
  for (int n = 1; n <= 3; ++n) {
    for (bool side : {true, false}) {
      const auto c = beamform::feasibility_count(n, side);
      char line[96];
      std::snprintf(line, sizeof line, "%d  %-12s  %10d  %11d  %s\n", n, side ? "yes" : "no", c.parameters,
                    c.constraints, c.counting_feasible ? "yes" : "no");
      out << line;
    }
  }
}

int verify_channel_file(const SimulationConfig& config, const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open channel file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("channel file " + path + " is not valid JSON: " + e.what());
  }
  const auto ch = channels_from_json(j);
  out << "channels: " << ch.topology().name() << " (seed " << ch.seed() << ")\n";

  if (ch.topology().is_single_antenna()) {
    const auto gains = schemes::cache_delivery_gains(ch);
    const double threshold = schemes::cache_gain_threshold(ch);
    bool degenerate = false;
    for (Dest d : kDests) {
      const double g = std::abs(gains.desired_gain[index(d)]);
      const bool bad = g <= threshold;
      degenerate |= bad;
      out << "cache gain " << butterfly::to_string(d) << ": |g|=" << fmt(g) << (bad ? "  DEGENERATE" : "") << '\n';
    }
    const double residual = gains.residual_max() / ch.h_max();
    out << "cache residual <= " << fmt(config.tol_residual) << ": "
        << (residual <= config.tol_residual ? "PASS" : "FAIL") << " (" << fmt(residual) << ")\n";
    if (degenerate) {
      out << "cache-gain degeneracy: realization is on the measure-zero failure set\n";
      return kExitDegenerate;
    }
    return residual <= config.tol_residual ? kExitOk : kExitVerification;
  }

  try {
    const auto sol = beamform::solve_v2(ch, analysis::db_to_linear(config.grid.stop_db), config.tol_rank);
    out << "nulling solution found; max residual "
        << fmt(*std::max_element(sol.residuals.begin(), sol.residuals.end())) << '\n';
    return kExitOk;
  } catch (const DegenerateChannelError& e) {
    out << "nulling degeneracy: " << e.what() << '\n';
    return kExitDegenerate;
  }
}

int cmd_verify(const SimulationConfig& config, const Flags& flags, std::ostream& out) {
  if (flags.feasibility) {
    print_feasibility(out);
    return kExitOk;
  }
  if (!flags.channels_file.empty()) return verify_channel_file(config, flags.channels_file, out);

  const int trials = config.trials.value_or(1000);
  bool all_pass = true;
  auto report = [&](const std::string& label, bool pass, const std::string& detail) {
    all_pass &= pass;
    out << label << ": " << (pass ? "PASS" : "FAIL") << " (" << detail << ")\n";
  };

  const double cache = analysis::monte_carlo_residual(analysis::SchemeId::kCache, trials, config.seed);
  report("cache residual <= " + fmt(config.tol_residual), cache <= config.tol_residual, "max " + fmt(cache));
  const double mimo = analysis::monte_carlo_residual(analysis::SchemeId::kMimo, trials, config.seed);
  report("mimo residual <= " + fmt(config.tol_residual), mimo <= config.tol_residual, "max " + fmt(mimo));
  const double nc = analysis::monte_carlo_residual(analysis::SchemeId::kNoCache, trials, config.seed);
  report("no-cache residual == 0", nc == 0.0, "max " + fmt(nc));

  const int cross = std::min(trials, 100);
  const auto census = beamform::nullspace_census(trials, config.seed, cross, config.tol_rank);
  std::string counts = std::to_string(census.expected_nullity) + "/" + std::to_string(trials) + "; observed";
  for (const auto& [dim, count] : census.nullity_counts)
    counts += " dim " + std::to_string(dim) + " x" + std::to_string(count);
  report("nullspace dim=1", census.rank_full == trials && census.expected_nullity == trials, counts);
  report("solver cross-check", census.routes_agree == trials && census.worst_angle <= 1e-8,
         "max angle " + fmt(census.worst_angle) + " over " + std::to_string(census.cross_checked));

  const auto ch = sample_channels(Topology::single_antenna(), config.seed);
  const auto bound = analysis::genie_cutset_bound(analysis::GenieCut::butterfly_preset(), ch, config.tol_rank);
  report("genie bound=2", bound.total == 2, "total " + std::to_string(bound.total));

  return all_pass ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------
// bound

std::vector<Terminal> parse_terminal_list(const std::string& text) {
  std::vector<Terminal> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(analysis::parse_terminal(item));
  }
  return out;
}

int cmd_bound(const SimulationConfig& config, const Flags& flags, std::ostream& out) {
  const Topology topo = config.topology.value_or(Topology::single_antenna());
  analysis::GenieCut cut = analysis::GenieCut::butterfly_preset();
  if (flags.left || flags.right || flags.bridge) {
    cut.left = parse_terminal_list(flags.left.value_or(""));
    cut.right = parse_terminal_list(flags.right.value_or(""));
    cut.bridge.clear();
    for (const auto& t : parse_terminal_list(flags.bridge.value_or(""))) {
      if (!std::holds_alternative<Relay>(t)) throw InvalidCutError("bridge may only contain relays");
      cut.bridge.push_back(std::get<Relay>(t));
    }
  } else {
    // The preset names the side relays; drop them where the topology has none.
    auto absent = [&](const Terminal& t) {
      return std::holds_alternative<Relay>(t) && !topo.has_relay(std::get<Relay>(t));
    };
    std::erase_if(cut.left, absent);
    std::erase_if(cut.right, absent);
  }
  const auto ch = sample_channels(topo, config.seed);
  const auto bound = analysis::genie_cutset_bound(cut, ch, config.tol_rank);

  auto names = [](const auto& list) {
    std::string s;
    for (const auto& t : list) s += (s.empty() ? "" : ",") + analysis::to_string(Terminal{t});
    return s;
  };
  out << "topology " << topo.name() << "\n";
  out << "left {" << names(cut.left) << "} " << bound.left_antennas << " antennas, right {" << names(cut.right)
      << "} " << bound.right_antennas << " antennas, bridge {" << names(cut.bridge) << "} "
      << bound.bridge_antennas << " antennas\n";
  out << "forward bound " << bound.forward << ", reverse bound " << bound.reverse << ", total " << bound.total
      << '\n';

  SimulationConfig matching = config;
  matching.topology = topo;
  matching.scheme = scheme_for(topo);
  try {
    const auto res = sweep_realization(matching, config.seed);
    out << "measured " << to_string(matching.scheme) << " slope " << fmt(res.dof.total_slope, "%.4f") << '\n';
  } catch (const Error& e) {
    out << "measured " << to_string(matching.scheme) << " slope n/a (" << e.what() << ")\n";
  }
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Degrees-of-freedom experiments for the two-way butterfly network", "butterfly"};
  app.require_subcommand(1);
  Flags flags;

  auto* simulate = app.add_subcommand("simulate", "sweep a scheme over the power grid and fit DoF slopes");
  add_common_options(simulate, flags);
  auto* verify = app.add_subcommand("verify", "nulling residuals, nullspace census and genie bound checks");
  add_common_options(verify, flags);
  verify->add_flag("--feasibility", flags.feasibility, "print the parameter-counting table and exit");
  verify->add_option("--channels", flags.channels_file, "check a serialized channel realization");
  auto* bound = app.add_subcommand("bound", "genie-aided cut bound");
  add_common_options(bound, flags);
  bound->add_option("--left", flags.left, "comma-separated terminals, e.g. S1,R1,S4");
  bound->add_option("--right", flags.right, "comma-separated terminals");
  bound->add_option("--bridge", flags.bridge, "comma-separated bridge relays");
  auto* feasibility = app.add_subcommand("feasibility", "parameter-counting table for n = 1..3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (feasibility->parsed()) {
      print_feasibility(out);
      return kExitOk;
    }
    const SimulationConfig config = resolve_config(flags, bound->parsed());
    if (simulate->parsed()) return cmd_simulate(config, out);
    if (verify->parsed()) return cmd_verify(config, flags, out);
    if (bound->parsed()) return cmd_bound(config, flags, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidCutError& e) {
    err << "invalid cut: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DegenerateChannelError& e) {
    err << "degenerate channel: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const fs::filesystem_error& e) {
    err << "filesystem error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitInternal;
}

}  // namespace butterfly::cli
