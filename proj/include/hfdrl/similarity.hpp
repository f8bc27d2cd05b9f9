#pragma once

// Task similarity between agents and the knowledge graph built from it.
//
//   C      structural score from the cosine of aligned, flattened parameters
//   S      mean return of the source policy run in the target environment
//   mu     alpha * C + (1 - alpha) * S_norm, S min-max normalized over the sources
//   W      mu / sum(mu) for sources with mu >= lambda, zero otherwise

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/heterofl.hpp"
#include "hfdrl/nn_core.hpp"
#include "hfdrl/parallel.hpp"
#include "hfdrl/random.hpp"
#include "hfdrl/rl_agent.hpp"

namespace hfdrl {

enum class StructuralMode {
  Cosine,          // cos(a, b); enters mu as (cos + 1) / 2 so larger means closer
  CosineDistance,  // 1 - cos(a, b), used verbatim
};

enum class SelectionMode {
  Renormalized,  // denominator sums mu over the selected sources only
  AllSources,    // denominator sums mu over every source
};

struct SimilarityConfig {
  double alpha = 0.5;
  double lambda = 0.85;
  std::size_t eval_episodes = 5;
  StructuralMode structural = StructuralMode::Cosine;
  SelectionMode selection = SelectionMode::Renormalized;

  bool operator==(const SimilarityConfig&) const = default;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be >= 0");
    if (eval_episodes == 0) throw DomainError("eval_episodes must be >= 1");
  }
};

inline double structural_similarity(const ParamSet& a, const ParamSet& b, StructuralMode mode) {
  const Vector fa = a.flatten();
  const Vector fb = b.flatten();
  if (fa.size() != fb.size())
    throw ShapeError("structural similarity needs aligned parameters (" + std::to_string(fa.size()) + " vs " +
                     std::to_string(fb.size()) + " entries)");
  const double na = fa.norm();
  const double nb = fb.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("structural similarity of a zero-norm parameter vector");
  const double cos = fa.dot(fb) / (na * nb);
  return mode == StructuralMode::Cosine ? cos : 1.0 - cos;
}

/// The structural term as it enters the combined metric.
inline double structural_score(double c, StructuralMode mode) {
  return mode == StructuralMode::Cosine ? (c + 1.0) / 2.0 : c;
}

/// Mean return of `episodes` target-environment episodes under the (aligned) source policy.
inline double semantic_relatedness(const EnvSpec& target_env, const ParamSet& source_aligned, std::size_t episodes,
                                   Rng& rng) {
  if (source_aligned.input_dim() != target_env.state_dim || source_aligned.action_count() != target_env.action_count)
    throw ShapeError("source policy is not aligned to the target environment");
  return evaluate_policy(source_aligned, target_env, episodes, rng);
}

/// Min-max scaling to [0, 1]; a zero range maps every entry to 0.5.
inline std::vector<double> normalize_min_max(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  std::vector<double> out(values.size(), 0.5);
  if (range > 0.0)
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

inline double combined_similarity(double structural, double semantic_normalized, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  return alpha * structural + (1.0 - alpha) * semantic_normalized;
}

struct KgEdge {
  double structural = 0.0;     // C as returned by structural_similarity
  double semantic_raw = 0.0;   // S
  double semantic_norm = 0.0;  // S after min-max scaling over the source set
  double mu = 0.0;
  bool selected = false;
};

/// Weighted directed graph over agents; the edge n -> n' carries mu(n, n').
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(std::size_t vertices = 0) : n_(vertices), edges_(vertices * vertices) {}

  std::size_t vertex_count() const { return n_; }

  std::size_t edge_count() const {
    return static_cast<std::size_t>(std::count_if(edges_.begin(), edges_.end(), [](const auto& e) { return e.has_value(); }));
  }

  void set_edge(std::size_t src, std::size_t dst, const KgEdge& e) {
    check(src, dst);
    edges_[src * n_ + dst] = e;
  }

  const std::optional<KgEdge>& edge(std::size_t src, std::size_t dst) const {
    check(src, dst);
    return edges_[src * n_ + dst];
  }

  std::optional<KgEdge>& edge(std::size_t src, std::size_t dst) {
    check(src, dst);
    return edges_[src * n_ + dst];
  }

 private:
  void check(std::size_t src, std::size_t dst) const {
    if (src >= n_ || dst >= n_) throw DomainError("vertex outside the knowledge graph");
    if (src == dst) throw DomainError("knowledge graph has no self-edges");
  }

  std::size_t n_;
  std::vector<std::optional<KgEdge>> edges_;
};

/// Recomputes every outgoing edge of `target`. Each source is evaluated on its
/// own RNG stream derived from `eval_seed`, so the result does not depend on `threads`.
inline void update_target_edges(KnowledgeGraph& kg, const std::vector<AgentProfile>& agents, std::size_t target,
                                const SimilarityConfig& cfg, std::uint64_t eval_seed, std::size_t threads = 1) {
  cfg.validate();
  if (target >= agents.size()) throw DomainError("target outside the agent set");
  const auto& tgt = agents[target];
  const auto target_shapes = tgt.params.shapes();

  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (i != target) sources.push_back(i);

  std::vector<double> c(sources.size()), s(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t j) {
    const auto& src = agents[sources[j]];
    const ParamSet aligned = align_params(src.params, target_shapes);
    c[j] = structural_similarity(tgt.params, aligned, cfg.structural);
    Rng rng = make_rng(eval_seed, {target, sources[j]});
    s[j] = semantic_relatedness(tgt.env, aligned, cfg.eval_episodes, rng);
  });

  const std::vector<double> s_norm = normalize_min_max(s);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    KgEdge e;
    e.structural = c[j];
    e.semantic_raw = s[j];
    e.semantic_norm = s_norm[j];
    e.mu = combined_similarity(structural_score(c[j], cfg.structural), s_norm[j], cfg.alpha);
    kg.set_edge(target, sources[j], e);
  }
}

/// Every ordered pair of agents.
inline KnowledgeGraph build_knowledge_graph(const std::vector<AgentProfile>& agents, const SimilarityConfig& cfg,
                                            std::uint64_t eval_seed, std::size_t threads = 1) {
  if (agents.size() < 2) throw DomainError("knowledge graph needs at least two agents");
  KnowledgeGraph kg(agents.size());
  for (std::size_t t = 0; t < agents.size(); ++t) update_target_edges(kg, agents, t, cfg, eval_seed, threads);
  return kg;
}

struct SelectionWeights {
  std::size_t target = 0;
  std::vector<std::size_t> sources;   // every other vertex with an edge from target, ascending
  std::vector<double> weights;        // W per entry of `sources`
  std::vector<std::size_t> selected;  // sources with mu >= lambda

  bool no_collaborators() const { return selected.empty(); }

  double weight_of(std::size_t source) const {
    for (std::size_t i = 0; i < sources.size(); ++i)
      if (sources[i] == source) return weights[i];
    return 0.0;
  }
};

inline SelectionWeights selection_weights(const KnowledgeGraph& kg, std::size_t target, double lambda,
                                          SelectionMode mode) {
  if (target >= kg.vertex_count()) throw DomainError("target outside the knowledge graph");
  SelectionWeights sw;
  sw.target = target;
  std::vector<double> mu;
  for (std::size_t n = 0; n < kg.vertex_count(); ++n) {
    if (n == target || !kg.edge(target, n)) continue;
    sw.sources.push_back(n);
    mu.push_back(kg.edge(target, n)->mu);
  }
  double sum_all = 0.0;
  double sum_selected = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    sum_all += mu[i];
    if (mu[i] >= lambda) {
      sw.selected.push_back(sw.sources[i]);
      sum_selected += mu[i];
    }
  }
  const double denom = mode == SelectionMode::Renormalized ? sum_selected : sum_all;
  sw.weights.assign(mu.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] < lambda) continue;
    // all selected mu are zero (lambda = 0): fall back to equal shares
    sw.weights[i] = denom > 0.0 ? mu[i] / denom : 1.0 / static_cast<double>(sw.selected.size());
  }
  return sw;
}

}  // namespace hfdrl
