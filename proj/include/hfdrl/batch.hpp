#pragma once

// Seeded batch runs and their on-disk outputs.
//
// A batch is the cross product modes x sweep values x seeds; each element is a
// cell and yields one ExperimentResult. Files written under the output directory:
//
//   config.ini           the effective configuration
//   rounds.csv           mode,sweep_value,seed,round,agent,return,loss,selected,W,ul_delay,dl_delay,deadline_met
//   summary.csv          mode,sweep_value,seed,target,rounds,final_mean_return
//   wireless.csv         mode,sweep_value,seed,round,agent,dir,rbs,rate_bps,delay_s,deadline_met
//   kg/<cell>/kg_<r>.csv src,dst,C,S_raw,S_norm,mu,selected (src = target, dst = source)
//   return_curves.dat    per (mode, sweep value): round and seed-mean target return
//   sweep_<name>.dat     per sweep value: seed-mean final return of each mode
//
// sweep_value is empty when no sweep is active. final_mean_return is the mean of
// the target's `return` over the last final_window rows of the cell in rounds.csv.
// Cells are independent and may run on several workers; files are always written
// in (mode, sweep value, seed) order, so outputs do not depend on scheduling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfdrl/config.hpp"
#include "hfdrl/errors.hpp"
#include "hfdrl/orchestrator.hpp"
#include "hfdrl/parallel.hpp"

namespace hfdrl {

struct SweepSpec {
  std::string name;  // rb_count | alpha | lambda
  std::vector<double> values;
  std::size_t repetitions = 1;  // runs per (value, seed); extra runs use derived seeds

  bool operator==(const SweepSpec&) const = default;
};

inline void apply_sweep_value(SimulationConfig& sim, std::string_view name, double v) {
  if (name == "rb_count") {
    if (!(v >= 1.0) || v != std::floor(v)) throw ParseError("rb_count sweep values must be integers >= 1");
    sim.wireless.uplink_rbs = sim.wireless.downlink_rbs = static_cast<std::size_t>(v);
  } else if (name == "alpha") {
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError("out of range: alpha ∈ [0,1]");
    sim.similarity.alpha = v;
  } else if (name == "lambda") {
    if (!(v >= 0.0)) throw ParseError("out of range: lambda >= 0");
    sim.similarity.lambda = v;
  } else {
    throw ParseError("unknown sweep parameter '" + std::string(name) + "' (expected rb_count, alpha or lambda)");
  }
}

/// "NAME=V1,V2,..."
inline SweepSpec parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ParseError("sweep must look like NAME=V1,V2,...");
  SweepSpec s;
  s.name = config_detail::trim(text.substr(0, eq));
  for (const auto& item : config_detail::split_list(text.substr(eq + 1)))
    s.values.push_back(config_detail::to_double("sweep", item));
  if (s.values.empty()) throw ParseError("sweep needs at least one value");
  SimulationConfig probe;
  for (double v : s.values) apply_sweep_value(probe, s.name, v);
  return s;
}

struct BatchCell {
  Mode mode = Mode::Hfdrl;
  std::optional<double> sweep_value;
  std::uint64_t seed = 0;
  ExperimentResult result;
};

/// Effective seeds of a batch: every configured seed, repeated `repetitions` times.
inline std::vector<std::uint64_t> batch_seeds(const ExperimentConfig& cfg, const std::optional<SweepSpec>& sweep) {
  const std::size_t reps = sweep ? sweep->repetitions : 1;
  if (reps == 0) throw ParseError("sweep repetitions must be >= 1");
  std::vector<std::uint64_t> out;
  for (auto s : cfg.seeds)
    for (std::size_t r = 0; r < reps; ++r) out.push_back(r == 0 ? s : derive_seed(s, {0xBA7C4, r}));
  return out;
}

/// Runs every cell. `workers` > 1 spreads cells over threads; each simulation
/// then runs single-threaded.
inline std::vector<BatchCell> run_cells(const ExperimentConfig& cfg, const std::optional<SweepSpec>& sweep,
                                        std::size_t workers) {
  validate_config(cfg);
  std::vector<BatchCell> cells;
  const auto seeds = batch_seeds(cfg, sweep);
  std::vector<std::optional<double>> values;
  if (sweep)
    for (double v : sweep->values) values.emplace_back(v);
  else
    values.emplace_back(std::nullopt);
  for (auto m : cfg.modes)
    for (const auto& v : values)
      for (auto s : seeds) cells.push_back({m, v, s, {}});

  parallel_for(cells.size(), workers, [&](std::size_t i) {
    SimulationConfig sim = cfg.sim;
    sim.mode = cells[i].mode;
    if (workers > 1) sim.threads = 1;
    if (cells[i].sweep_value) apply_sweep_value(sim, sweep->name, *cells[i].sweep_value);
    cells[i].result = run_experiment(sim, cells[i].seed);
  });
  return cells;
}

namespace batch_detail {

using config_detail::format_double;

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

inline void close_out(std::ofstream& f, const std::filesystem::path& p) {
  f.close();
  if (!f) throw IoError("error while writing " + p.string());
}

inline std::string sweep_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string cell_dir_name(const BatchCell& c, const std::optional<SweepSpec>& sweep) {
  std::string name(mode_name(c.mode));
  if (c.sweep_value) name += "_" + sweep->name + "=" + format_double(*c.sweep_value);
  name += "_s" + std::to_string(c.seed);
  return name;
}

}  // namespace batch_detail

/// Writes all batch outputs for already computed cells.
inline void write_batch_outputs(const ExperimentConfig& cfg, const std::optional<SweepSpec>& sweep,
                                const std::vector<BatchCell>& cells) {
  namespace fs = std::filesystem;
  using namespace batch_detail;
  const fs::path root(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());

  {
    const auto p = root / "config.ini";
    auto f = open_out(p);
    f << emit_config(cfg);
    if (sweep) {
      f << "\n# sweep " << sweep->name << " =";
      for (double v : sweep->values) f << ' ' << format_double(v);
      f << " (repetitions " << sweep->repetitions << ")\n";
    }
    close_out(f, p);
  }

  const std::size_t target = cfg.sim.population.target;
  {
    const auto p = root / "rounds.csv";
    auto f = open_out(p);
    f << "mode,sweep_value,seed,round,agent,return,loss,selected,W,ul_delay,dl_delay,deadline_met\n";
    for (const auto& c : cells) {
      const std::string prefix = std::string(mode_name(c.mode)) + "," + sweep_cell(c.sweep_value) + "," +
                                 std::to_string(c.seed) + ",";
      for (const auto& r : c.result.rounds)
        for (const auto& a : r.agents)
          f << prefix << r.round << ',' << a.agent << ',' << format_double(a.episode_return) << ','
            << format_double(a.loss) << ',' << int(a.selected) << ',' << format_double(a.weight) << ','
            << format_double(a.ul_delay) << ',' << format_double(a.dl_delay) << ',' << int(a.deadline_met()) << '\n';
    }
    close_out(f, p);
  }
  {
    const auto p = root / "summary.csv";
    auto f = open_out(p);
    f << "mode,sweep_value,seed,target,rounds,final_mean_return\n";
    for (const auto& c : cells)
      f << mode_name(c.mode) << ',' << sweep_cell(c.sweep_value) << ',' << c.seed << ',' << target << ','
        << c.result.rounds.size() << ',' << format_double(c.result.final_mean_return[target]) << '\n';
    close_out(f, p);
  }
  {
    const auto p = root / "wireless.csv";
    auto f = open_out(p);
    f << "mode,sweep_value,seed,round,agent,dir,rbs,rate_bps,delay_s,deadline_met\n";
    for (const auto& c : cells) {
      const std::string prefix = std::string(mode_name(c.mode)) + "," + sweep_cell(c.sweep_value) + "," +
                                 std::to_string(c.seed) + ",";
      for (const auto& r : c.result.rounds)
        for (const auto& a : r.agents) {
          if (!a.selected) continue;
          f << prefix << r.round << ',' << a.agent << ",ul," << a.ul_rbs << ',' << format_double(a.ul_rate) << ','
            << format_double(a.ul_delay) << ',' << int(a.ul_met) << '\n';
          f << prefix << r.round << ',' << a.agent << ",dl," << a.dl_rbs << ',' << format_double(a.dl_rate) << ','
            << format_double(a.dl_delay) << ',' << int(a.dl_met) << '\n';
        }
    }
    close_out(f, p);
  }
  if (cfg.kg_every > 0) {
    for (const auto& c : cells) {
      bool any = false;
      for (const auto& r : c.result.rounds) any = any || !r.kg.empty();
      if (!any) continue;
      const fs::path dir = root / "kg" / cell_dir_name(c, sweep);
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
      for (const auto& r : c.result.rounds) {
        if (r.kg.empty() || (r.round - 1) % cfg.kg_every != 0) continue;
        const auto p = dir / ("kg_" + std::to_string(r.round) + ".csv");
        auto f = open_out(p);
        f << "src,dst,C,S_raw,S_norm,mu,selected\n";
        for (const auto& k : r.kg)
          f << k.src << ',' << k.dst << ',' << format_double(k.edge.structural) << ','
            << format_double(k.edge.semantic_raw) << ',' << format_double(k.edge.semantic_norm) << ','
            << format_double(k.edge.mu) << ',' << int(k.edge.selected) << '\n';
        close_out(f, p);
      }
    }
  }

  // plot data: seed means per (mode, sweep value)
  std::vector<std::optional<double>> values;
  if (sweep)
    for (double v : sweep->values) values.emplace_back(v);
  else
    values.emplace_back(std::nullopt);
  auto cells_of = [&](Mode m, const std::optional<double>& v) {
    std::vector<const BatchCell*> out;
    for (const auto& c : cells)
      if (c.mode == m && c.sweep_value == v) out.push_back(&c);
    return out;
  };
  {
    const auto p = root / "return_curves.dat";
    auto f = open_out(p);
    bool first = true;
    for (auto m : cfg.modes)
      for (const auto& v : values) {
        const auto group = cells_of(m, v);
        std::size_t longest = 0;
        for (auto* c : group) longest = std::max(longest, c->result.rounds.size());
        if (!first) f << "\n\n";
        first = false;
        f << "# mode=" << mode_name(m);
        if (v) f << ' ' << sweep->name << '=' << format_double(*v);
        f << "\n# round mean_target_return runs\n";
        for (std::size_t r = 0; r < longest; ++r) {
          double s = 0.0;
          std::size_t n = 0;
          for (auto* c : group)
            if (r < c->result.rounds.size()) {
              s += c->result.rounds[r].agents[target].episode_return;
              ++n;
            }
          f << r + 1 << ' ' << format_double(s / static_cast<double>(n)) << ' ' << n << '\n';
        }
      }
    close_out(f, p);
  }
  if (sweep) {
    const auto p = root / ("sweep_" + sweep->name + ".dat");
    auto f = open_out(p);
    f << "# " << sweep->name;
    for (auto m : cfg.modes) f << ' ' << mode_name(m);
    f << '\n';
    for (const auto& v : values) {
      f << format_double(*v);
      for (auto m : cfg.modes) {
        const auto group = cells_of(m, v);
        double s = 0.0;
        for (auto* c : group) s += c->result.final_mean_return[target];
        f << ' ' << format_double(s / static_cast<double>(group.size()));
      }
      f << '\n';
    }
    close_out(f, p);
  }
}

/// Runs the batch and writes its outputs; returns the process exit code.
inline int run_batch(const ExperimentConfig& cfg, const std::optional<SweepSpec>& sweep = std::nullopt) {
  const std::size_t workers = cfg.sim.threads;
  const auto cells = run_cells(cfg, sweep, workers);
  write_batch_outputs(cfg, sweep, cells);
  return 0;
}

}  // namespace hfdrl
