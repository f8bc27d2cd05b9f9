#pragma once

// Base-station coordination loop. One communication round:
//   1. every agent trains locally for one round and uploads its parameters
//   2. sources are aligned to the target's dimensions and C is computed
//   3. the target evaluates every aligned source for S
//   4. mu, the knowledge graph and the selection weights are refreshed
//   5. RBs are allocated to the target and the selected sources; anyone who
//      misses the deadline in either direction drops out of this round
//   6. the survivors are aggregated into the target's global model and the
//      target receives the sub-model of its level
// The baselines replace steps 2-4 (homogeneous, random-select) or skip all
// communication (noncoop).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfdrl/envs.hpp"
#include "hfdrl/errors.hpp"
#include "hfdrl/heterofl.hpp"
#include "hfdrl/nn_core.hpp"
#include "hfdrl/parallel.hpp"
#include "hfdrl/random.hpp"
#include "hfdrl/rl_agent.hpp"
#include "hfdrl/similarity.hpp"
#include "hfdrl/wireless.hpp"

namespace hfdrl {

enum class Mode { Hfdrl, Homogeneous, RandomSelect, NonCoop };
enum class TargetMode { Fixed, RoundRobin };
enum class SelfWeight { MaxSource, MeanSource };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Hfdrl: return "hfdrl";
    case Mode::Homogeneous: return "homogeneous";
    case Mode::RandomSelect: return "random-select";
    case Mode::NonCoop: return "noncoop";
  }
  return "?";
}

struct PopulationConfig {
  std::size_t cartpole_agents = 5;
  std::size_t acrobot_agents = 5;
  std::size_t target = 5;  // agent ids: CartPole agents first, then Acrobot agents
  TargetMode target_mode = TargetMode::Fixed;
  std::vector<std::size_t> hidden = {128, 128};

  std::size_t size() const { return cartpole_agents + acrobot_agents; }

  bool operator==(const PopulationConfig&) const = default;
};

struct TerminationCriterion {
  double loss_tolerance = 1e-3;
  std::size_t max_rounds = 500;

  bool operator==(const TerminationCriterion&) const = default;
};

struct SimulationConfig {
  PopulationConfig population;
  SimilarityConfig similarity;
  HeteroConfig hetero;
  AgentConfig agent;
  WirelessConfig wireless;
  TerminationCriterion termination;
  Mode mode = Mode::Hfdrl;
  RbPolicy rb_policy = RbPolicy::Greedy;
  SelfWeight self_weight = SelfWeight::MaxSource;
  std::size_t final_window = 20;
  std::size_t threads = 1;  // 1 = deterministic single-threaded reference

  bool operator==(const SimulationConfig&) const = default;

  void validate() const {
    if (population.size() == 0) throw DomainError("population must contain at least one agent");
    if (population.target >= population.size()) throw DomainError("target id outside the population");
    if (population.hidden.empty()) throw DomainError("network needs at least one hidden layer");
    for (auto h : population.hidden)
      if (h == 0) throw DomainError("hidden widths must be >= 1");
    if (!(termination.loss_tolerance > 0.0)) throw DomainError("loss_tolerance must be > 0");
    if (termination.max_rounds == 0) throw DomainError("max_rounds must be >= 1");
    if (final_window == 0) throw DomainError("final_window must be >= 1");
    similarity.validate();
    hetero.validate();
    agent.validate();
    wireless.validate();
  }
};

struct AgentRoundRecord {
  std::size_t agent = 0;
  EnvKind env = EnvKind::CartPole;
  int level = 1;
  double episode_return = 0.0;
  double loss = 0.0;
  bool selected = false;    // target or chosen source this round
  double weight = 0.0;      // normalized aggregation weight (target: self-weight)
  bool aggregated = false;  // actually entered the aggregation
  std::size_t ul_rbs = 0;
  std::size_t dl_rbs = 0;
  double ul_rate = 0.0;
  double dl_rate = 0.0;
  double ul_delay = 0.0;
  double dl_delay = 0.0;
  bool ul_met = false;
  bool dl_met = false;

  bool deadline_met() const { return ul_met && dl_met; }
};

struct KgRow {
  std::size_t src = 0;
  std::size_t dst = 0;
  KgEdge edge;
};

struct RoundLog {
  std::size_t round = 0;  // 1-based
  std::size_t target = 0;
  bool solo = true;  // the target kept its locally trained parameters
  double global_loss = 0.0;
  std::vector<AgentRoundRecord> agents;
  std::vector<KgRow> kg;  // target's outgoing edges, when computed this round
};

struct ExperimentResult {
  Mode mode = Mode::Hfdrl;
  std::uint64_t seed = 0;
  std::vector<RoundLog> rounds;
  std::vector<double> final_mean_return;  // per agent, over the last final_window rounds

  /// Per-round episode return of one agent.
  std::vector<double> return_curve(std::size_t agent) const {
    std::vector<double> out;
    out.reserve(rounds.size());
    for (const auto& r : rounds) out.push_back(r.agents[agent].episode_return);
    return out;
  }
};

enum class Termination { Continue, Stop };

/// Stop once |F_m - F_{m-1}| < tolerance or m >= max_rounds (m = history length).
inline Termination check_termination(const std::vector<double>& loss_history, const TerminationCriterion& term) {
  const std::size_t m = loss_history.size();
  if (m >= term.max_rounds) return Termination::Stop;
  if (m >= 2 && std::abs(loss_history[m - 1] - loss_history[m - 2]) < term.loss_tolerance) return Termination::Stop;
  return Termination::Continue;
}

/// sum_i weights[i] * losses[i]
inline double global_loss(const std::vector<double>& losses, const std::vector<double>& weights) {
  if (losses.size() != weights.size()) throw ShapeError("one weight per contributing agent required");
  double f = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) f += weights[i] * losses[i];
  return f;
}

namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTrain = 2;
inline constexpr std::uint64_t kPositions = 3;
inline constexpr std::uint64_t kChannel = 4;
inline constexpr std::uint64_t kAllocation = 5;
inline constexpr std::uint64_t kEvaluation = 6;
inline constexpr std::uint64_t kSelection = 7;
}  // namespace streams

/// State of one experiment: agents, agent positions, the BS-side global models and the KG.
class Simulation {
 public:
  Simulation(SimulationConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
    const auto& pop = cfg_.population;
    const std::size_t n = pop.size();

    // Every agent starts from a block of one shared initialization, so the
    // coordinates of aligned and aggregated models refer to the same units.
    // Blocks are rescaled to the Glorot range of their own shape; a narrow
    // block cut from the wide matrix otherwise starts too small to learn.
    const std::size_t max_state = std::max(pop.cartpole_agents ? 4u : 0u, pop.acrobot_agents ? 6u : 0u);
    const std::size_t max_actions = std::max(pop.cartpole_agents ? 2u : 0u, pop.acrobot_agents ? 3u : 0u);
    master_ = GlobalModel{init_params(network_shapes(max_state, pop.hidden, max_actions),
                                      derive_seed(seed_, {streams::kInit})),
                          cfg_.hetero};

    agents_.reserve(n);
    for (std::size_t id = 0; id < n; ++id) {
      AgentProfile a;
      a.id = id;
      const bool cart = id < pop.cartpole_agents;
      a.env = env_spec(cart ? EnvKind::CartPole : EnvKind::Acrobot);
      const std::size_t index_in_env = cart ? id : id - pop.cartpole_agents;
      a.level = 1 + static_cast<int>(index_in_env % static_cast<std::size_t>(cfg_.hetero.levels));
      a.seed = derive_seed(seed_, {streams::kTrain, id});
      a.rng = Rng(a.seed);
      a.params = init_block(level_shapes(env_shapes(a.env), a.level, cfg_.hetero.shrinkage));
      a.optimizer = AdamState::for_params(a.params, cfg_.agent.learning_rate);
      agents_.push_back(std::move(a));
    }
    Rng pos_rng = make_rng(seed_, {streams::kPositions});
    distances_ = sample_distances(cfg_.wireless, n, pos_rng);
    kg_ = KnowledgeGraph(n);
  }

  const SimulationConfig& config() const { return cfg_; }
  const std::vector<AgentProfile>& agents() const { return agents_; }
  std::vector<AgentProfile>& agents() { return agents_; }
  const KnowledgeGraph& knowledge_graph() const { return kg_; }
  const std::vector<double>& distances() const { return distances_; }
  std::size_t rounds_done() const { return round_; }

  std::vector<LayerShape> env_shapes(const EnvSpec& env) const {
    return network_shapes(env.state_dim, cfg_.population.hidden, env.action_count);
  }

  std::size_t target_for_round(std::size_t round) const {
    if (cfg_.population.target_mode == TargetMode::Fixed) return cfg_.population.target;
    return (cfg_.population.target + round - 1) % agents_.size();
  }

  /// Executes one communication round for the scheduled target.
  RoundLog run_round() {
    ++round_;
    const std::size_t n = agents_.size();
    const std::size_t target = target_for_round(round_);

    RoundLog log;
    log.round = round_;
    log.target = target;
    log.agents.resize(n);

    // step 1
    std::vector<LocalRoundResult> local(n);
    parallel_for(n, cfg_.threads, [&](std::size_t i) { local[i] = local_train_round(agents_[i], cfg_.agent); });
    for (std::size_t i = 0; i < n; ++i) {
      auto& rec = log.agents[i];
      rec.agent = i;
      rec.env = agents_[i].env.kind;
      rec.level = agents_[i].level;
      rec.episode_return = local[i].episode_return;
      rec.loss = local[i].final_loss;
      rec.ul_delay = rec.dl_delay = tx_delay(cfg_.wireless, 0.0);
    }
    log.global_loss = local[target].final_loss;
    if (cfg_.mode == Mode::NonCoop || n == 1) return log;

    // steps 2-4
    std::vector<std::size_t> chosen;
    std::vector<double> source_weight;
    switch (cfg_.mode) {
      case Mode::Hfdrl: {
        const SelectionWeights sw = refresh_similarity(target, log);
        chosen = sw.selected;
        for (auto s : chosen) source_weight.push_back(sw.weight_of(s));
        break;
      }
      case Mode::RandomSelect: {
        const SelectionWeights sw = refresh_similarity(target, log);
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < n; ++i)
          if (i != target) pool.push_back(i);
        Rng rng = make_rng(seed_, {streams::kSelection, round_});
        std::shuffle(pool.begin(), pool.end(), rng);
        chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sw.selected.size()));
        std::sort(chosen.begin(), chosen.end());
        source_weight.assign(chosen.size(), 1.0);
        break;
      }
      case Mode::Homogeneous:
        for (std::size_t i = 0; i < n; ++i)
          if (i != target && agents_[i].env.kind == agents_[target].env.kind) chosen.push_back(i);
        source_weight.assign(chosen.size(), 1.0);
        break;
      case Mode::NonCoop: break;
    }
    if (chosen.empty()) return log;

    double self_w = 1.0;
    if (cfg_.mode == Mode::Hfdrl) {
      self_w = cfg_.self_weight == SelfWeight::MaxSource
                   ? *std::max_element(source_weight.begin(), source_weight.end())
                   : std::accumulate(source_weight.begin(), source_weight.end(), 0.0) /
                         static_cast<double>(source_weight.size());
    }

    // step 5
    std::vector<std::size_t> participants{target};
    participants.insert(participants.end(), chosen.begin(), chosen.end());
    std::sort(participants.begin(), participants.end());
    Rng ch_rng = make_rng(seed_, {streams::kChannel, round_});
    const ChannelRealization channel = sample_channel(cfg_.wireless, distances_, ch_rng);
    Rng alloc_rng = make_rng(seed_, {streams::kAllocation, round_});
    const RBAllocation alloc = allocate_rbs(cfg_.wireless, channel, participants, cfg_.rb_policy, alloc_rng);
    for (auto p : participants) {
      auto& rec = log.agents[p];
      rec.selected = true;
      rec.ul_rbs = alloc.rb_count(p, Direction::Uplink);
      rec.dl_rbs = alloc.rb_count(p, Direction::Downlink);
      rec.ul_rate = link_rate(cfg_.wireless, channel, alloc, p, Direction::Uplink);
      rec.dl_rate = link_rate(cfg_.wireless, channel, alloc, p, Direction::Downlink);
      rec.ul_delay = tx_delay(cfg_.wireless, rec.ul_rate);
      rec.dl_delay = tx_delay(cfg_.wireless, rec.dl_rate);
      rec.ul_met = deadline_met(cfg_.wireless, rec.ul_delay);
      rec.dl_met = deadline_met(cfg_.wireless, rec.dl_delay);
    }

    // step 6
    std::vector<std::size_t> members;
    std::vector<double> raw_w;
    if (log.agents[target].deadline_met()) {
      members.push_back(target);
      raw_w.push_back(self_w);
      for (std::size_t j = 0; j < chosen.size(); ++j)
        if (log.agents[chosen[j]].deadline_met()) {
          members.push_back(chosen[j]);
          raw_w.push_back(source_weight[j]);
        }
    }
    const double w_sum = std::accumulate(raw_w.begin(), raw_w.end(), 0.0);
    // normalized weights are logged for every selected participant
    const double sel_sum = self_w + std::accumulate(source_weight.begin(), source_weight.end(), 0.0);
    log.agents[target].weight = self_w / sel_sum;
    for (std::size_t j = 0; j < chosen.size(); ++j) log.agents[chosen[j]].weight = source_weight[j] / sel_sum;

    if (members.size() < 2 || !(w_sum > 0.0)) return log;

    GlobalModel& global = global_for(target);
    std::vector<Contribution> contributions;
    std::vector<double> losses, weights;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& a = agents_[members[j]];
      ParamSet aligned = members[j] == target ? a.params : align_params(a.params, global.shapes_at(a.level));
      contributions.push_back({std::move(aligned), a.level, raw_w[j] / w_sum});
      losses.push_back(local[members[j]].final_loss);
      weights.push_back(raw_w[j] / w_sum);
      log.agents[members[j]].aggregated = true;
    }
    global = aggregate(contributions, global);
    agents_[target].params = extract_submodel(global, agents_[target].level);
    log.solo = false;
    log.global_loss = global_loss(losses, weights);
    return log;
  }

  /// Runs rounds until check_termination says stop.
  ExperimentResult run() {
    ExperimentResult res;
    res.mode = cfg_.mode;
    res.seed = seed_;
    std::vector<double> history;
    do {
      res.rounds.push_back(run_round());
      history.push_back(res.rounds.back().global_loss);
    } while (check_termination(history, cfg_.termination) == Termination::Continue);

    const std::size_t window = std::min(cfg_.final_window, res.rounds.size());
    res.final_mean_return.assign(agents_.size(), 0.0);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      double s = 0.0;
      for (std::size_t r = res.rounds.size() - window; r < res.rounds.size(); ++r)
        s += res.rounds[r].agents[i].episode_return;
      res.final_mean_return[i] = s / static_cast<double>(window);
    }
    return res;
  }

 private:
  ParamSet init_block(const std::vector<LayerShape>& shapes) const {
    ParamSet p = block_of(master_.params, shapes);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const auto& full = master_.params.layers[k].weights;
      p.layers[k].weights *= std::sqrt(static_cast<double>(full.rows() + full.cols()) /
                                       static_cast<double>(shapes[k].in_dim + shapes[k].out_dim));
    }
    return p;
  }

  static ParamSet block_of(const ParamSet& src, const std::vector<LayerShape>& shapes) {
    ParamSet p;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const auto rows = static_cast<Eigen::Index>(shapes[k].out_dim);
      const auto cols = static_cast<Eigen::Index>(shapes[k].in_dim);
      const auto& s = src.layers[k];
      DenseLayer l;
      l.weights = s.weights.topLeftCorner(rows, cols);
      l.biases = s.biases.head(rows);
      if (k + 1 == shapes.size()) {
        // the value row stays the value row
        l.weights.row(rows - 1) = s.weights.row(s.weights.rows() - 1).head(cols);
        l.biases[rows - 1] = s.biases[s.biases.size() - 1];
      }
      l.activation = s.activation;
      p.layers.push_back(std::move(l));
    }
    return p;
  }

  GlobalModel& global_for(std::size_t target) {
    if (globals_.size() != agents_.size()) globals_.resize(agents_.size());
    auto& g = globals_[target];
    if (!g) g = GlobalModel{init_block(env_shapes(agents_[target].env)), cfg_.hetero};
    return *g;
  }

  SelectionWeights refresh_similarity(std::size_t target, RoundLog& log) {
    update_target_edges(kg_, agents_, target, cfg_.similarity,
                        derive_seed(seed_, {streams::kEvaluation, round_}), cfg_.threads);
    SelectionWeights sw = selection_weights(kg_, target, cfg_.similarity.lambda, cfg_.similarity.selection);
    for (auto s : sw.sources) {
      auto& e = kg_.edge(target, s);
      e->selected = std::find(sw.selected.begin(), sw.selected.end(), s) != sw.selected.end();
      log.kg.push_back({target, s, *e});
    }
    return sw;
  }

  SimulationConfig cfg_;
  std::uint64_t seed_;
  GlobalModel master_;
  std::vector<AgentProfile> agents_;
  std::vector<double> distances_;
  std::vector<std::optional<GlobalModel>> globals_;
  KnowledgeGraph kg_;
  std::size_t round_ = 0;
};

inline ExperimentResult run_experiment(const SimulationConfig& cfg, std::uint64_t seed) {
  Simulation sim(cfg, seed);
  return sim.run();
}

}  // namespace hfdrl
