#pragma once

// Classic-control tasks re-implemented with the usual Gym constants:
// CartPole (Euler, dt 0.02, 200-step cap) and Acrobot (RK4, dt 0.2, 500-step cap).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>

#include "hfdrl/errors.hpp"
#include "hfdrl/nn_core.hpp"
#include "hfdrl/random.hpp"

namespace hfdrl {

enum class EnvKind { CartPole, Acrobot };

enum class RewardConvention {
  PlusOnePerStep,   // CartPole: +1 for every step survived
  MinusOnePerStep,  // Acrobot: -1 for every step until the goal
};

struct EnvSpec {
  EnvKind kind = EnvKind::CartPole;
  std::size_t state_dim = 4;
  std::size_t action_count = 2;
  std::size_t max_steps_per_episode = 200;
  RewardConvention reward = RewardConvention::PlusOnePerStep;

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

inline EnvSpec cartpole_spec() { return {EnvKind::CartPole, 4, 2, 200, RewardConvention::PlusOnePerStep}; }
inline EnvSpec acrobot_spec() { return {EnvKind::Acrobot, 6, 3, 500, RewardConvention::MinusOnePerStep}; }

inline EnvSpec env_spec(EnvKind kind) { return kind == EnvKind::CartPole ? cartpole_spec() : acrobot_spec(); }

inline std::string_view env_name(EnvKind kind) { return kind == EnvKind::CartPole ? "cartpole" : "acrobot"; }

/// CartPole: (x, x_dot, theta, theta_dot). Acrobot: (psi1, psi2, psi1_dot, psi2_dot).
struct EnvState {
  EnvKind kind = EnvKind::CartPole;
  std::array<double, 4> coords{};
  std::size_t steps = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState state;
  Vector observation;
  double reward = 0.0;
  bool terminal = false;
};

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfLength;
inline constexpr double kForce = 10.0;
inline constexpr double kDt = 0.02;
inline constexpr double kThetaLimit = 12.0 * 2.0 * std::numbers::pi / 360.0;
inline constexpr double kXLimit = 2.4;
}  // namespace cartpole

namespace acrobot {
inline constexpr double kDt = 0.2;
inline constexpr double kLinkLength1 = 1.0;
inline constexpr double kLinkMass1 = 1.0;
inline constexpr double kLinkMass2 = 1.0;
inline constexpr double kCom1 = 0.5;
inline constexpr double kCom2 = 0.5;
inline constexpr double kInertia = 1.0;
inline constexpr double kGravity = 9.8;
inline constexpr double kMaxVel1 = 4.0 * std::numbers::pi;
inline constexpr double kMaxVel2 = 9.0 * std::numbers::pi;

using State = std::array<double, 4>;

// Equations of motion of the underactuated double pendulum (torque on joint 2).
inline State derivatives(const State& s, double torque) {
  const double psi1 = s[0], psi2 = s[1], dpsi1 = s[2], dpsi2 = s[3];
  const double m1 = kLinkMass1, m2 = kLinkMass2, l1 = kLinkLength1, lc1 = kCom1, lc2 = kCom2;
  const double i1 = kInertia, i2 = kInertia, g = kGravity;
  const double pi = std::numbers::pi;
  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(psi2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(psi2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(psi1 + psi2 - pi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * dpsi2 * dpsi2 * std::sin(psi2) -
                      2 * m2 * l1 * lc2 * dpsi2 * dpsi1 * std::sin(psi2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(psi1 - pi / 2.0) + phi2;
  const double ddpsi2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dpsi1 * dpsi1 * std::sin(psi2) - phi2) /
                        (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddpsi1 = -(d2 * ddpsi2 + phi1) / d1;
  return {dpsi1, dpsi2, ddpsi1, ddpsi2};
}

inline State rk4(const State& s, double torque, double dt) {
  auto axpy = [](const State& a, double h, const State& k) {
    return State{a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]};
  };
  const State k1 = derivatives(s, torque);
  const State k2 = derivatives(axpy(s, dt / 2.0, k1), torque);
  const State k3 = derivatives(axpy(s, dt / 2.0, k2), torque);
  const State k4 = derivatives(axpy(s, dt, k3), torque);
  State out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  while (a > std::numbers::pi) a -= two_pi;
  while (a < -std::numbers::pi) a += two_pi;
  return a;
}

/// End-effector height above the base in link lengths; the goal is > 1.
inline double tip_height(const State& s) { return -std::cos(s[0]) - std::cos(s[0] + s[1]); }
}  // namespace acrobot

inline Vector observe(const EnvState& s) {
  if (s.kind == EnvKind::CartPole) {
    Vector o(4);
    o << s.coords[0], s.coords[1], s.coords[2], s.coords[3];
    return o;
  }
  Vector o(6);
  o << std::cos(s.coords[0]), std::sin(s.coords[0]), std::cos(s.coords[1]), std::sin(s.coords[1]), s.coords[2],
      s.coords[3];
  return o;
}

inline EnvState reset(const EnvSpec& spec, Rng& rng) {
  EnvState s;
  s.kind = spec.kind;
  const double half = spec.kind == EnvKind::CartPole ? 0.05 : 0.1;
  for (auto& c : s.coords) c = uniform(rng, -half, half);
  return s;
}

inline StepResult step(const EnvState& state, std::size_t action, const EnvSpec& spec) {
  if (action >= spec.action_count)
    throw DomainError("action " + std::to_string(action) + " outside [0, " + std::to_string(spec.action_count) +
                      ")");
  if (state.kind != spec.kind) throw DomainError("environment state does not belong to this spec");

  StepResult r;
  r.state = state;
  r.state.steps = state.steps + 1;

  if (spec.kind == EnvKind::CartPole) {
    using namespace cartpole;
    auto& [x, x_dot, theta, theta_dot] = r.state.coords;
    const double force = action == 1 ? kForce : -kForce;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
    x += kDt * x_dot;
    x_dot += kDt * x_acc;
    theta += kDt * theta_dot;
    theta_dot += kDt * theta_acc;
    r.reward = 1.0;
    r.terminal = x < -kXLimit || x > kXLimit || theta < -kThetaLimit || theta > kThetaLimit;
  } else {
    using namespace acrobot;
    const double torque = static_cast<double>(action) - 1.0;
    State next = rk4(r.state.coords, torque, kDt);
    next[0] = wrap_angle(next[0]);
    next[1] = wrap_angle(next[1]);
    next[2] = std::clamp(next[2], -kMaxVel1, kMaxVel1);
    next[3] = std::clamp(next[3], -kMaxVel2, kMaxVel2);
    r.state.coords = next;
    r.reward = -1.0;
    r.terminal = tip_height(next) > 1.0;
  }
  if (r.state.steps >= spec.max_steps_per_episode) r.terminal = true;
  r.observation = observe(r.state);
  return r;
}

}  // namespace hfdrl
