#pragma once

// Experiment configuration and its text format.
//
//   # comment            ; also a comment
//   [section]
//   key = value
//
// Every key belongs to exactly one section; unknown sections or keys, repeated
// keys and out-of-range values are rejected with a ParseError that names the
// key. Keys that are absent keep their defaults, so an empty file is the
// default configuration. emit_config writes every key and parse_config(emit_config(c))
// reproduces c exactly (doubles use shortest round-trip formatting).

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/orchestrator.hpp"

namespace hfdrl {

struct ExperimentConfig {
  SimulationConfig sim;
  std::vector<Mode> modes = {Mode::Hfdrl};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "out";
  std::size_t kg_every = 1;  // write kg_<round>.csv every k-th round; 0 disables

  bool operator==(const ExperimentConfig&) const = default;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

inline double to_double(std::string_view key, const std::string& text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || text.empty())
    throw ParseError(std::string(key) + ": expected a number, got '" + text + "'");
  if (!std::isfinite(v)) throw ParseError(std::string(key) + ": value must be finite");
  return v;
}

inline std::uint64_t to_u64(std::string_view key, const std::string& text) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || text.empty())
    throw ParseError(std::string(key) + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

inline void require(bool ok, std::string_view constraint) {
  if (!ok) throw ParseError("out of range: " + std::string(constraint));
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

/// Double-valued key with a closed/open range check described by `constraint`.
inline Field real_field(std::string section, std::string key, std::function<double&(ExperimentConfig&)> ref,
                        std::function<bool(double)> ok, std::string constraint) {
  Field f;
  f.section = std::move(section);
  f.key = key;
  f.set = [key, ref, ok, constraint](ExperimentConfig& c, const std::string& text) {
    const double v = to_double(key, text);
    require(ok(v), constraint);
    ref(c) = v;
  };
  f.get = [ref](const ExperimentConfig& c) { return format_double(ref(const_cast<ExperimentConfig&>(c))); };
  return f;
}

inline Field count_field(std::string section, std::string key, std::function<std::size_t&(ExperimentConfig&)> ref,
                         std::size_t min, std::string constraint) {
  Field f;
  f.section = std::move(section);
  f.key = key;
  f.set = [key, ref, min, constraint](ExperimentConfig& c, const std::string& text) {
    const auto v = to_u64(key, text);
    require(v >= min, constraint);
    ref(c) = static_cast<std::size_t>(v);
  };
  f.get = [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); };
  return f;
}

template <typename E>
Field enum_field(std::string section, std::string key, std::function<E&(ExperimentConfig&)> ref,
                 std::vector<std::pair<std::string, E>> names) {
  std::string allowed;
  for (const auto& [n, _] : names) allowed += (allowed.empty() ? "" : "|") + n;
  Field f;
  f.section = std::move(section);
  f.key = key;
  f.set = [key, ref, names, allowed](ExperimentConfig& c, const std::string& text) {
    for (const auto& [n, e] : names)
      if (n == text) {
        ref(c) = e;
        return;
      }
    throw ParseError(key + ": expected one of {" + allowed + "}, got '" + text + "'");
  };
  f.get = [ref, names](const ExperimentConfig& c) {
    const E v = ref(const_cast<ExperimentConfig&>(c));
    for (const auto& [n, e] : names)
      if (e == v) return n;
    return std::string("?");
  };
  return f;
}

}  // namespace config_detail

inline const std::vector<std::pair<std::string, Mode>>& mode_names() {
  static const std::vector<std::pair<std::string, Mode>> names = {{"hfdrl", Mode::Hfdrl},
                                                                  {"homogeneous", Mode::Homogeneous},
                                                                  {"random-select", Mode::RandomSelect},
                                                                  {"noncoop", Mode::NonCoop}};
  return names;
}

inline const std::vector<std::pair<std::string, RbPolicy>>& rb_policy_names() {
  static const std::vector<std::pair<std::string, RbPolicy>> names = {
      {"greedy", RbPolicy::Greedy}, {"uniform", RbPolicy::Uniform}, {"random", RbPolicy::Random}};
  return names;
}

inline Mode parse_mode(const std::string& text) {
  for (const auto& [n, m] : mode_names())
    if (n == text) return m;
  throw ParseError("mode: expected one of {hfdrl|homogeneous|random-select|noncoop}, got '" + text + "'");
}

inline RbPolicy parse_rb_policy(const std::string& text) {
  for (const auto& [n, p] : rb_policy_names())
    if (n == text) return p;
  throw ParseError("rb_policy: expected one of {greedy|uniform|random}, got '" + text + "'");
}

inline std::string_view rb_policy_name(RbPolicy p) {
  for (const auto& [n, q] : rb_policy_names())
    if (q == p) return n;
  return "?";
}

/// The full key table, in emission order.
inline const std::vector<config_detail::Field>& config_fields() {
  using namespace config_detail;
  using C = ExperimentConfig;
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  auto pos = [](double v) { return v > 0.0; };
  auto nonneg = [](double v) { return v >= 0.0; };
  auto any = [](double) { return true; };

  static const std::vector<Field> fields = [&] {
    std::vector<Field> f;
    // population
    f.push_back(count_field("population", "cartpole_agents", [](C& c) -> auto& { return c.sim.population.cartpole_agents; }, 0,
                            "cartpole_agents >= 0"));
    f.push_back(count_field("population", "acrobot_agents", [](C& c) -> auto& { return c.sim.population.acrobot_agents; }, 0,
                            "acrobot_agents >= 0"));
    f.push_back(count_field("population", "target", [](C& c) -> auto& { return c.sim.population.target; }, 0,
                            "target >= 0"));
    f.push_back(enum_field<TargetMode>("population", "target_mode",
                                       [](C& c) -> auto& { return c.sim.population.target_mode; },
                                       {{"fixed", TargetMode::Fixed}, {"round-robin", TargetMode::RoundRobin}}));
    {
      Field h;
      h.section = "population";
      h.key = "hidden";
      h.set = [](C& c, const std::string& text) {
        std::vector<std::size_t> widths;
        for (const auto& item : split_list(text)) {
          const auto w = to_u64("hidden", item);
          require(w >= 1, "hidden widths >= 1");
          widths.push_back(static_cast<std::size_t>(w));
        }
        c.sim.population.hidden = widths;
      };
      h.get = [](const C& c) {
        return format_list<std::size_t>(c.sim.population.hidden, [](const std::size_t& w) { return std::to_string(w); });
      };
      f.push_back(h);
    }
    // similarity
    f.push_back(real_field("similarity", "alpha", [](C& c) -> auto& { return c.sim.similarity.alpha; }, in01,
                           "alpha ∈ [0,1]"));
    f.push_back(real_field("similarity", "lambda", [](C& c) -> auto& { return c.sim.similarity.lambda; }, nonneg,
                           "lambda >= 0"));
    f.push_back(count_field("similarity", "eval_episodes", [](C& c) -> auto& { return c.sim.similarity.eval_episodes; }, 1,
                            "eval_episodes >= 1"));
    f.push_back(enum_field<StructuralMode>(
        "similarity", "structural", [](C& c) -> auto& { return c.sim.similarity.structural; },
        {{"cosine", StructuralMode::Cosine}, {"cosine-distance", StructuralMode::CosineDistance}}));
    f.push_back(enum_field<SelectionMode>(
        "similarity", "selection", [](C& c) -> auto& { return c.sim.similarity.selection; },
        {{"renormalized", SelectionMode::Renormalized}, {"all-sources", SelectionMode::AllSources}}));
    // hetero
    {
      Field lv;
      lv.section = "hetero";
      lv.key = "levels";
      lv.set = [](C& c, const std::string& text) {
        const auto v = to_u64("levels", text);
        require(v >= 1 && v <= 16, "levels ∈ [1,16]");
        c.sim.hetero.levels = static_cast<int>(v);
      };
      lv.get = [](const C& c) { return std::to_string(c.sim.hetero.levels); };
      f.push_back(lv);
    }
    f.push_back(real_field("hetero", "shrinkage", [](C& c) -> auto& { return c.sim.hetero.shrinkage; },
                           [](double v) { return v > 0.0 && v <= 1.0; }, "shrinkage ∈ (0,1]"));
    // agent
    f.push_back(real_field("agent", "gamma", [](C& c) -> auto& { return c.sim.agent.gamma; },
                           [](double v) { return v > 0.0 && v < 1.0; }, "gamma ∈ (0,1)"));
    f.push_back(count_field("agent", "rollout_length", [](C& c) -> auto& { return c.sim.agent.rollout_length; }, 1,
                            "rollout_length >= 1"));
    f.push_back(real_field("agent", "entropy_coef", [](C& c) -> auto& { return c.sim.agent.entropy_coef; }, nonneg,
                           "entropy_coef >= 0"));
    f.push_back(real_field("agent", "value_coef", [](C& c) -> auto& { return c.sim.agent.value_coef; }, nonneg,
                           "value_coef >= 0"));
    f.push_back(count_field("agent", "episodes_per_round", [](C& c) -> auto& { return c.sim.agent.episodes_per_round; }, 1,
                            "episodes_per_round >= 1"));
    f.push_back(real_field("agent", "learning_rate", [](C& c) -> auto& { return c.sim.agent.learning_rate; }, nonneg,
                           "learning_rate >= 0"));
    f.push_back(real_field("agent", "max_grad_norm", [](C& c) -> auto& { return c.sim.agent.max_grad_norm; }, nonneg,
                           "max_grad_norm >= 0"));
    // wireless
    f.push_back(real_field("wireless", "rb_bandwidth_hz", [](C& c) -> auto& { return c.sim.wireless.rb_bandwidth_hz; }, pos,
                           "rb_bandwidth_hz > 0"));
    f.push_back(count_field("wireless", "uplink_rbs", [](C& c) -> auto& { return c.sim.wireless.uplink_rbs; }, 1,
                            "uplink_rbs >= 1"));
    f.push_back(count_field("wireless", "downlink_rbs", [](C& c) -> auto& { return c.sim.wireless.downlink_rbs; }, 1,
                            "downlink_rbs >= 1"));
    f.push_back(real_field("wireless", "bs_power_dbm", [](C& c) -> auto& { return c.sim.wireless.bs_power_dbm; }, any,
                           "bs_power_dbm finite"));
    f.push_back(real_field("wireless", "agent_power_dbm", [](C& c) -> auto& { return c.sim.wireless.agent_power_dbm; }, any,
                           "agent_power_dbm finite"));
    f.push_back(real_field("wireless", "pathloss_exponent",
                           [](C& c) -> auto& { return c.sim.wireless.pathloss_exponent; }, pos, "pathloss_exponent > 0"));
    f.push_back(real_field("wireless", "noise_variance", [](C& c) -> auto& { return c.sim.wireless.noise_variance; }, pos,
                           "noise_variance > 0"));
    f.push_back(real_field("wireless", "payload_bytes", [](C& c) -> auto& { return c.sim.wireless.payload_bytes; }, pos,
                           "payload_bytes > 0"));
    f.push_back(real_field("wireless", "deadline_s", [](C& c) -> auto& { return c.sim.wireless.deadline_s; }, pos,
                           "deadline_s > 0"));
    f.push_back(real_field("wireless", "cell_radius_m", [](C& c) -> auto& { return c.sim.wireless.cell_radius_m; }, pos,
                           "cell_radius_m > 0"));
    f.push_back(real_field("wireless", "distance_ref_m", [](C& c) -> auto& { return c.sim.wireless.distance_ref_m; }, pos,
                           "distance_ref_m > 0"));
    f.push_back(enum_field<LogBase>("wireless", "log_base", [](C& c) -> auto& { return c.sim.wireless.log_base; },
                                    {{"2", LogBase::Two}, {"e", LogBase::Natural}}));
    f.push_back(count_field("wireless", "channel_taps", [](C& c) -> auto& { return c.sim.wireless.channel_taps; }, 1,
                            "channel_taps >= 1"));
    // run
    {
      Field m;
      m.section = "run";
      m.key = "mode";
      m.set = [](C& c, const std::string& text) {
        std::vector<Mode> modes;
        for (const auto& item : split_list(text)) modes.push_back(parse_mode(item));
        c.modes = modes;
      };
      m.get = [](const C& c) {
        return format_list<Mode>(c.modes, [](const Mode& x) { return std::string(mode_name(x)); });
      };
      f.push_back(m);
    }
    f.push_back(enum_field<RbPolicy>("run", "rb_policy", [](C& c) -> auto& { return c.sim.rb_policy; },
                                     rb_policy_names()));
    f.push_back(enum_field<SelfWeight>("run", "self_weight", [](C& c) -> auto& { return c.sim.self_weight; },
                                       {{"max-source", SelfWeight::MaxSource}, {"mean-source", SelfWeight::MeanSource}}));
    f.push_back(real_field("run", "loss_tolerance", [](C& c) -> auto& { return c.sim.termination.loss_tolerance; }, pos,
                           "loss_tolerance > 0"));
    f.push_back(count_field("run", "max_rounds", [](C& c) -> auto& { return c.sim.termination.max_rounds; }, 1,
                            "max_rounds >= 1"));
    f.push_back(count_field("run", "final_window", [](C& c) -> auto& { return c.sim.final_window; }, 1,
                            "final_window >= 1"));
    f.push_back(count_field("run", "threads", [](C& c) -> auto& { return c.sim.threads; }, 1, "threads >= 1"));
    {
      Field s;
      s.section = "run";
      s.key = "seeds";
      s.set = [](C& c, const std::string& text) {
        std::vector<std::uint64_t> seeds;
        for (const auto& item : split_list(text)) seeds.push_back(to_u64("seeds", item));
        c.seeds = seeds;
      };
      s.get = [](const C& c) {
        return format_list<std::uint64_t>(c.seeds, [](const std::uint64_t& x) { return std::to_string(x); });
      };
      f.push_back(s);
    }
    {
      Field o;
      o.section = "run";
      o.key = "output_dir";
      o.set = [](C& c, const std::string& text) {
        require(!text.empty(), "output_dir non-empty");
        c.output_dir = text;
      };
      o.get = [](const C& c) { return c.output_dir; };
      f.push_back(o);
    }
    f.push_back(count_field("run", "kg_every", [](C& c) -> auto& { return c.kg_every; }, 0, "kg_every >= 0"));
    return f;
  }();
  return fields;
}

/// Sets one key through its validated setter; ParseError on unknown keys or bad values.
inline void set_config_key(ExperimentConfig& cfg, std::string_view section, std::string_view key,
                           const std::string& value) {
  for (const auto& f : config_fields())
    if (f.section == section && f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw ParseError("unknown key '" + std::string(key) + "' in [" + std::string(section) + "]");
}

/// Cross-field checks that a single key cannot express.
inline void validate_config(const ExperimentConfig& c) {
  if (c.sim.population.size() == 0) throw ParseError("out of range: cartpole_agents + acrobot_agents >= 1");
  if (c.sim.population.target >= c.sim.population.size())
    throw ParseError("out of range: target < cartpole_agents + acrobot_agents");
  if (c.modes.empty()) throw ParseError("mode: at least one mode required");
  if (c.seeds.empty()) throw ParseError("seeds: at least one seed required");
  try {
    c.sim.validate();
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  const auto& fields = config_fields();
  std::set<std::string> sections;
  for (const auto& f : fields) sections.insert(f.section);

  std::string section;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = config_detail::trim(raw);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + "malformed section header '" + line + "'");
      section = config_detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(section)) throw ParseError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected key = value, got '" + line + "'");
    const std::string key = config_detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = config_detail::trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ParseError(where + "key '" + key + "' appears before any [section]");
    const config_detail::Field* field = nullptr;
    for (const auto& f : fields)
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw ParseError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) throw ParseError(where + "duplicate key '" + key + "'");
    try {
      field->set(cfg, value);
    } catch (const ParseError& e) {
      throw ParseError(where + key + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

inline std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : config_fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace hfdrl
