#pragma once

// Advantage actor-critic on top of nn_core. An episode is cut into rollouts of
// `rollout_length` steps; every rollout produces one Adam step.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hfdrl/envs.hpp"
#include "hfdrl/errors.hpp"
#include "hfdrl/nn_core.hpp"
#include "hfdrl/random.hpp"

namespace hfdrl {

struct AgentConfig {
  double gamma = 0.95;
  std::size_t rollout_length = 20;
  double entropy_coef = 0.01;
  double value_coef = 0.1;
  std::size_t episodes_per_round = 1;
  double learning_rate = 7e-4;
  double max_grad_norm = 4.0;  // global L2 clip before each Adam step; 0 disables

  bool operator==(const AgentConfig&) const = default;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    if (rollout_length == 0) throw DomainError("rollout_length must be >= 1");
    if (episodes_per_round == 0) throw DomainError("episodes_per_round must be >= 1");
    if (learning_rate < 0.0) throw DomainError("learning_rate must be >= 0");
    if (entropy_coef < 0.0 || value_coef < 0.0) throw DomainError("loss coefficients must be >= 0");
    if (!(max_grad_norm >= 0.0)) throw DomainError("max_grad_norm must be >= 0");
  }
};

struct Transition {
  Vector state;
  std::size_t action = 0;
  double reward = 0.0;
  double value = 0.0;  // critic estimate recorded while acting
};

struct Trajectory {
  std::vector<Transition> steps;
  double bootstrap_value = 0.0;  // V(s_T) when cut before a terminal state
  bool terminal = false;

  double total_reward() const {
    double s = 0.0;
    for (const auto& t : steps) s += t.reward;
    return s;
  }
};

/// A learner bound to one environment at one complexity level.
struct AgentProfile {
  std::size_t id = 0;
  EnvSpec env;
  int level = 1;
  std::uint64_t seed = 0;
  ParamSet params;
  AdamState optimizer;
  Rng rng;
};

/// Runs the policy from `episode` until a terminal state or `horizon` steps;
/// `episode` is advanced in place so consecutive calls continue the episode.
inline Trajectory collect_rollout(const ParamSet& params, const EnvSpec& env, EnvState& episode,
                                  std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw DomainError("rollout horizon must be >= 1");
  Trajectory traj;
  traj.steps.reserve(horizon);
  Vector obs = observe(episode);
  for (std::size_t t = 0; t < horizon; ++t) {
    const PolicyValue out = forward(params, obs);
    const std::size_t action = softmax_sample(out.logits, rng);
    StepResult next = step(episode, action, env);
    traj.steps.push_back({std::move(obs), action, next.reward, out.value});
    episode = next.state;
    obs = std::move(next.observation);
    if (next.terminal) {
      traj.terminal = true;
      return traj;
    }
  }
  traj.bootstrap_value = forward(params, obs).value;
  return traj;
}

/// R_t = r_t + gamma * R_{t+1}, seeded by the bootstrap value unless terminal.
inline std::vector<double> discounted_returns(const Trajectory& traj, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
  std::vector<double> out(traj.steps.size());
  double running = traj.terminal ? 0.0 : traj.bootstrap_value;
  for (std::size_t t = traj.steps.size(); t-- > 0;) {
    running = traj.steps[t].reward + gamma * running;
    out[t] = running;
  }
  return out;
}

inline std::vector<double> advantages(const Trajectory& traj, const std::vector<double>& returns) {
  if (returns.size() != traj.steps.size())
    throw ShapeError("returns length " + std::to_string(returns.size()) + " != trajectory length " +
                     std::to_string(traj.steps.size()));
  std::vector<double> out(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) out[t] = returns[t] - traj.steps[t].value;
  return out;
}

struct LossAndGradient {
  double loss = 0.0;
  Gradient grad;
};

/// Mean over steps of
///   -A_t log pi(a_t|s_t) + value_coef (R_t - V(s_t))^2 - entropy_coef H(pi(.|s_t)),
/// with A_t computed from the recorded critic values and held constant.
inline LossAndGradient pg_loss_and_grad(const ParamSet& params, const Trajectory& traj, const AgentConfig& cfg) {
  if (traj.steps.empty()) throw DomainError("empty trajectory");
  const std::vector<double> returns = discounted_returns(traj, cfg.gamma);
  const std::vector<double> adv = advantages(traj, returns);
  const double inv_t = 1.0 / static_cast<double>(traj.steps.size());

  LossAndGradient out{0.0, Gradient::zeros_like(params)};
  ForwardCache cache;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& tr = traj.steps[t];
    const PolicyValue pv = forward(params, tr.state, &cache);
    const Vector logp = log_softmax(pv.logits);
    const Vector p = logp.array().exp();
    const double entropy = -(p.array() * logp.array()).sum();
    const double value_err = returns[t] - pv.value;
    const auto a = static_cast<Eigen::Index>(tr.action);

    out.loss += inv_t * (-adv[t] * logp[a] + cfg.value_coef * value_err * value_err - cfg.entropy_coef * entropy);

    HeadGradient head;
    head.logits = adv[t] * p;
    head.logits[a] -= adv[t];
    head.logits.array() += cfg.entropy_coef * p.array() * (logp.array() + entropy);
    head.logits *= inv_t;
    head.value = -2.0 * cfg.value_coef * value_err * inv_t;
    accumulate_backward(params, cache, head, out.grad);
  }
  if (!std::isfinite(out.loss) || !out.grad.all_finite()) throw NumericError("non-finite policy-gradient loss");
  return out;
}

struct LocalRoundResult {
  double episode_return = 0.0;  // mean undiscounted return over the round's episodes
  double final_loss = 0.0;      // loss of the last rollout
};

/// Trains `agent` in place for cfg.episodes_per_round full episodes.
inline LocalRoundResult local_train_round(AgentProfile& agent, const AgentConfig& cfg) {
  cfg.validate();
  agent.optimizer.learning_rate = cfg.learning_rate;
  LocalRoundResult res;
  double total = 0.0;
  for (std::size_t e = 0; e < cfg.episodes_per_round; ++e) {
    EnvState episode = reset(agent.env, agent.rng);
    double ep_return = 0.0;
    bool done = false;
    while (!done) {
      const Trajectory traj = collect_rollout(agent.params, agent.env, episode, cfg.rollout_length, agent.rng);
      ep_return += traj.total_reward();
      done = traj.terminal;
      LossAndGradient lg = pg_loss_and_grad(agent.params, traj, cfg);
      if (cfg.max_grad_norm > 0.0) {
        const double norm = lg.grad.flatten().norm();
        if (norm > cfg.max_grad_norm) lg.grad *= cfg.max_grad_norm / norm;
      }
      adam_update(agent.params, lg.grad, agent.optimizer);
      res.final_loss = lg.loss;
    }
    total += ep_return;
  }
  res.episode_return = total / static_cast<double>(cfg.episodes_per_round);
  return res;
}

/// Mean undiscounted return of `episodes` full episodes under `params`.
inline double evaluate_policy(const ParamSet& params, const EnvSpec& env, std::size_t episodes, Rng& rng) {
  if (episodes == 0) throw DomainError("need at least one evaluation episode");
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EnvState s = reset(env, rng);
    Vector obs = observe(s);
    bool done = false;
    while (!done) {
      const std::size_t a = softmax_sample(forward(params, obs).logits, rng);
      StepResult r = step(s, a, env);
      total += r.reward;
      s = r.state;
      obs = std::move(r.observation);
      done = r.terminal;
    }
  }
  return total / static_cast<double>(episodes);
}

}  // namespace hfdrl
