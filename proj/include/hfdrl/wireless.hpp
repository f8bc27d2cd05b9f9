#pragma once

// OFDMA uplink/downlink model.
//
//   rate  = B * sum_k e_k * log2(1 + p * (d / d_ref)^-eta * h_k / sigma^2)
//   delay = 8 * payload_bytes / rate      (infinite when rate == 0)
//   a direction meets its deadline iff delay < deadline (strict)
//
// Powers are configured in dBm and used in milliwatts. d_ref = 1 m gives the
// plain d^-eta path loss. The default of 50 m keeps the stock power, noise and
// deadline values in a regime where some links miss the deadline and some don't.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/random.hpp"

namespace hfdrl {

enum class Direction { Uplink, Downlink };
enum class LogBase { Two, Natural };
enum class RbPolicy { Greedy, Uniform, Random };

struct WirelessConfig {
  double rb_bandwidth_hz = 720e3;
  std::size_t uplink_rbs = 135;
  std::size_t downlink_rbs = 135;
  double bs_power_dbm = 56.0;
  double agent_power_dbm = 12.0;
  double pathloss_exponent = 2.0;
  double noise_variance = 1.0;
  double payload_bytes = 2000.0;
  double deadline_s = 0.8e-3;
  double cell_radius_m = 250.0;
  double distance_ref_m = 50.0;
  LogBase log_base = LogBase::Two;
  std::size_t channel_taps = 10;

  bool operator==(const WirelessConfig&) const = default;

  std::size_t rbs(Direction d) const { return d == Direction::Uplink ? uplink_rbs : downlink_rbs; }
  double power_dbm(Direction d) const { return d == Direction::Uplink ? agent_power_dbm : bs_power_dbm; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be > 0");
    };
    positive(rb_bandwidth_hz, "rb_bandwidth_hz");
    positive(pathloss_exponent, "pathloss_exponent");
    positive(noise_variance, "noise_variance");
    positive(payload_bytes, "payload_bytes");
    positive(deadline_s, "deadline_s");
    positive(cell_radius_m, "cell_radius_m");
    positive(distance_ref_m, "distance_ref_m");
    if (uplink_rbs == 0 || downlink_rbs == 0) throw DomainError("RB counts must be >= 1");
    if (channel_taps == 0) throw DomainError("channel_taps must be >= 1");
    if (!std::isfinite(bs_power_dbm) || !std::isfinite(agent_power_dbm)) throw DomainError("powers must be finite");
  }
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

/// Agent distances drawn uniformly over the cell disk, in (0, radius].
inline std::vector<double> sample_distances(const WirelessConfig& cfg, std::size_t agents, Rng& rng) {
  std::vector<double> d(agents);
  for (auto& x : d) x = cfg.cell_radius_m * std::sqrt(1.0 - uniform(rng, 0.0, 1.0));
  return d;
}

struct ChannelRealization {
  std::vector<double> distances;  // metres, per agent
  Eigen::MatrixXd uplink;         // power gain, agents x uplink RBs
  Eigen::MatrixXd downlink;       // power gain, agents x downlink RBs

  const Eigen::MatrixXd& gains(Direction d) const { return d == Direction::Uplink ? uplink : downlink; }
};

namespace detail {
// |sum_t g_t exp(-j 2 pi t k / K)|^2 with g_t ~ CN(0, 1/taps): unit mean power per RB.
inline Eigen::RowVectorXd rayleigh_row(std::size_t taps, std::size_t rbs, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / static_cast<double>(taps)));
  std::vector<std::complex<double>> g(taps);
  for (auto& tap : g) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    tap = {re, im};
  }
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(rbs));
  for (std::size_t k = 0; k < rbs; ++k) {
    std::complex<double> h{0.0, 0.0};
    for (std::size_t t = 0; t < taps; ++t) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(t * k) / static_cast<double>(rbs);
      h += g[t] * std::polar(1.0, phase);
    }
    row[static_cast<Eigen::Index>(k)] = std::norm(h);
  }
  return row;
}
}  // namespace detail

inline ChannelRealization sample_channel(const WirelessConfig& cfg, const std::vector<double>& distances, Rng& rng) {
  for (double d : distances)
    if (!(d > 0.0 && d <= cfg.cell_radius_m)) throw DomainError("agent distance outside (0, cell radius]");
  ChannelRealization ch;
  ch.distances = distances;
  const auto n = static_cast<Eigen::Index>(distances.size());
  ch.uplink.resize(n, static_cast<Eigen::Index>(cfg.uplink_rbs));
  ch.downlink.resize(n, static_cast<Eigen::Index>(cfg.downlink_rbs));
  for (Eigen::Index a = 0; a < n; ++a) {
    ch.uplink.row(a) = detail::rayleigh_row(cfg.channel_taps, cfg.uplink_rbs, rng);
    ch.downlink.row(a) = detail::rayleigh_row(cfg.channel_taps, cfg.downlink_rbs, rng);
  }
  return ch;
}

/// Binary assignment matrices e[agent, rb] per direction.
struct RBAllocation {
  Eigen::MatrixXi uplink;
  Eigen::MatrixXi downlink;

  static RBAllocation empty(const WirelessConfig& cfg, std::size_t agents) {
    const auto n = static_cast<Eigen::Index>(agents);
    return {Eigen::MatrixXi::Zero(n, static_cast<Eigen::Index>(cfg.uplink_rbs)),
            Eigen::MatrixXi::Zero(n, static_cast<Eigen::Index>(cfg.downlink_rbs))};
  }

  const Eigen::MatrixXi& matrix(Direction d) const { return d == Direction::Uplink ? uplink : downlink; }
  Eigen::MatrixXi& matrix(Direction d) { return d == Direction::Uplink ? uplink : downlink; }

  std::size_t rb_count(std::size_t agent, Direction d) const {
    return static_cast<std::size_t>(matrix(d).row(static_cast<Eigen::Index>(agent)).sum());
  }
};

/// Binary entries, at most one agent per RB, at most K RBs in total.
inline bool satisfies_rb_constraints(const WirelessConfig& cfg, const RBAllocation& alloc) {
  for (Direction d : {Direction::Uplink, Direction::Downlink}) {
    const auto& e = alloc.matrix(d);
    if (static_cast<std::size_t>(e.cols()) != cfg.rbs(d)) return false;
    if ((e.array() != 0 && e.array() != 1).any()) return false;
    if ((e.colwise().sum().array() > 1).any()) return false;
    if (static_cast<std::size_t>(e.sum()) > cfg.rbs(d)) return false;
  }
  return true;
}

inline double snr(const WirelessConfig& cfg, const ChannelRealization& ch, std::size_t agent, std::size_t rb,
                  Direction d) {
  const double dist = ch.distances[agent] / cfg.distance_ref_m;
  return dbm_to_mw(cfg.power_dbm(d)) * std::pow(dist, -cfg.pathloss_exponent) *
         ch.gains(d)(static_cast<Eigen::Index>(agent), static_cast<Eigen::Index>(rb)) / cfg.noise_variance;
}

inline double rb_rate(const WirelessConfig& cfg, double snr_value) {
  const double bits = cfg.log_base == LogBase::Two ? std::log2(1.0 + snr_value) : std::log(1.0 + snr_value);
  return cfg.rb_bandwidth_hz * bits;
}

inline double link_rate(const WirelessConfig& cfg, const ChannelRealization& ch, const RBAllocation& alloc,
                        std::size_t agent, Direction d) {
  const auto& e = alloc.matrix(d);
  double rate = 0.0;
  for (Eigen::Index k = 0; k < e.cols(); ++k)
    if (e(static_cast<Eigen::Index>(agent), k) != 0) rate += rb_rate(cfg, snr(cfg, ch, agent, static_cast<std::size_t>(k), d));
  return rate;
}

inline double tx_delay(const WirelessConfig& cfg, double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return 8.0 * cfg.payload_bytes / rate;
}

inline bool deadline_met(const WirelessConfig& cfg, double delay) { return delay < cfg.deadline_s; }

struct DeadlineFlags {
  bool uplink = false;
  bool downlink = false;

  bool both() const { return uplink && downlink; }
};

inline DeadlineFlags feasibility_check(const WirelessConfig& cfg, const ChannelRealization& ch,
                                       const RBAllocation& alloc, std::size_t agent) {
  return {deadline_met(cfg, tx_delay(cfg, link_rate(cfg, ch, alloc, agent, Direction::Uplink))),
          deadline_met(cfg, tx_delay(cfg, link_rate(cfg, ch, alloc, agent, Direction::Downlink)))};
}

namespace detail {

// Greedy: the unsatisfied participant with the largest delay deficit takes its
// best free RB. A participant that cannot reach the deadline even with every
// free RB, or that is still short once the pool is empty, is dropped and its
// RBs are returned to the pool.
inline void allocate_greedy(const WirelessConfig& cfg, const ChannelRealization& ch,
                            const std::vector<std::size_t>& participants, Direction d, Eigen::MatrixXi& e) {
  const std::size_t k_total = cfg.rbs(d);
  std::vector<bool> free_rb(k_total, true);
  std::vector<double> rate(participants.size(), 0.0);
  std::vector<bool> dropped(participants.size(), false);
  const double required = 8.0 * cfg.payload_bytes / cfg.deadline_s;  // rate must exceed this

  auto rb_gain = [&](std::size_t p, std::size_t k) { return rb_rate(cfg, snr(cfg, ch, participants[p], k, d)); };
  auto satisfied = [&](std::size_t p) { return deadline_met(cfg, tx_delay(cfg, rate[p])); };
  auto release = [&](std::size_t p) {
    const auto row = static_cast<Eigen::Index>(participants[p]);
    for (std::size_t k = 0; k < k_total; ++k)
      if (e(row, static_cast<Eigen::Index>(k)) != 0) {
        e(row, static_cast<Eigen::Index>(k)) = 0;
        free_rb[k] = true;
      }
    rate[p] = 0.0;
    dropped[p] = true;
  };

  while (true) {
    std::size_t pick = participants.size();
    double worst = -1.0;
    for (std::size_t p = 0; p < participants.size(); ++p) {
      if (dropped[p] || satisfied(p)) continue;
      const double deficit = tx_delay(cfg, rate[p]) - cfg.deadline_s;
      if (deficit > worst) {
        worst = deficit;
        pick = p;
      }
    }
    if (pick == participants.size()) break;

    double potential = rate[pick];
    std::size_t best = k_total;
    double best_rate = -1.0;
    for (std::size_t k = 0; k < k_total; ++k) {
      if (!free_rb[k]) continue;
      const double r = rb_gain(pick, k);
      potential += r;
      if (r > best_rate) {
        best_rate = r;
        best = k;
      }
    }
    if (best == k_total || !(potential > required)) {
      release(pick);
      continue;
    }
    free_rb[best] = false;
    e(static_cast<Eigen::Index>(participants[pick]), static_cast<Eigen::Index>(best)) = 1;
    rate[pick] += best_rate;
  }
}

inline void allocate_uniform(const WirelessConfig& cfg, const std::vector<std::size_t>& participants, Direction d,
                             Eigen::MatrixXi& e) {
  const std::size_t share = cfg.rbs(d) / participants.size();
  for (std::size_t p = 0; p < participants.size(); ++p)
    for (std::size_t j = 0; j < share; ++j)
      e(static_cast<Eigen::Index>(participants[p]), static_cast<Eigen::Index>(p * share + j)) = 1;
}

inline void allocate_random(const WirelessConfig& cfg, const std::vector<std::size_t>& participants, Direction d,
                            Eigen::MatrixXi& e, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, participants.size() - 1);
  for (std::size_t k = 0; k < cfg.rbs(d); ++k)
    e(static_cast<Eigen::Index>(participants[pick(rng)]), static_cast<Eigen::Index>(k)) = 1;
}

}  // namespace detail

inline RBAllocation allocate_rbs(const WirelessConfig& cfg, const ChannelRealization& ch,
                                 const std::vector<std::size_t>& participants, RbPolicy policy, Rng& rng) {
  const std::size_t n_agents = ch.distances.size();
  for (auto p : participants)
    if (p >= n_agents) throw DomainError("participant outside the channel realization");
  RBAllocation alloc = RBAllocation::empty(cfg, n_agents);
  if (participants.empty()) return alloc;
  for (Direction d : {Direction::Uplink, Direction::Downlink}) {
    auto& e = alloc.matrix(d);
    switch (policy) {
      case RbPolicy::Greedy: detail::allocate_greedy(cfg, ch, participants, d, e); break;
      case RbPolicy::Uniform: detail::allocate_uniform(cfg, participants, d, e); break;
      case RbPolicy::Random: detail::allocate_random(cfg, participants, d, e, rng); break;
    }
  }
  return alloc;
}

}  // namespace hfdrl
