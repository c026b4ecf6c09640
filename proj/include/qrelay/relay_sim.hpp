#pragma once

// Event-level Monte Carlo of an n-section relay pulse train.
//
// Each pulse walks through sifting, the terminal stations, the Bell stations
// and the channel's optical noise as independent Bernoulli draws.  The
// per-station probabilities are chosen so that the expected acceptance and
// agreement rates equal the closed-form P(total) and V_AB, which makes this an
// independent check on core_model.
//
// Random streams: trials are cut into chunks of chunk_size pulses.  Chunk i
// draws from a std::mt19937_64 seeded with splitmix64(seed ^ splitmix64(i)),
// so the estimate depends only on (seed, trials, chunk_size) and never on the
// number of worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qrelay/core_model.hpp"
#include "qrelay/errors.hpp"
#include "qrelay/params.hpp"

namespace qrelay {

inline constexpr const char* kGeneratorName = "mt19937_64/splitmix64-chunk-substreams";
inline constexpr std::uint64_t kMaxTrials = std::uint64_t{1} << 53;

struct TrialConfig {
  RelayConfig relay{};
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 0;
  std::uint64_t chunk_size = 1u << 16;

  void validate() const {
    relay.validate();
    if (trials < 1) throw invalid_parameter("trials must be >= 1");
    if (trials > kMaxTrials) throw invalid_parameter("trials exceeds 2^53");
    if (chunk_size < 1) throw invalid_parameter("chunk_size must be >= 1");
  }
};

struct McEstimate {
  std::uint64_t trials = 0;
  std::uint64_t accepted = 0;
  std::uint64_t correct = 0;
  std::uint64_t signal = 0;  ///< accepted events that were noiseless signal
  double p_total_hat = 0.0;
  double v_ab_hat = 0.0;
  double se_p_total = 0.0;
  double se_v_ab = 0.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t chunk) {
  return splitmix64(seed ^ splitmix64(chunk));
}

namespace detail {

struct Counts {
  std::uint64_t accepted = 0;
  std::uint64_t correct = 0;
  std::uint64_t signal = 0;
};

// Per-station event probabilities shared by all pulses of one run.
struct EventModel {
  double genuine;  // photon detected, no dark count in the wrong detector
  double rescue;   // photon lost, one dark count in either detector, none in the other
  double bell_merge_rescue;  // merged Bell click completed by a dark count
  double v_nopt;
  int terminals;
  int bells;

  explicit EventModel(const RelayConfig& cfg) {
    const double d = cfg.detector.dark_prob;
    const double x =
        std::pow(transmittance(cfg.channel.alpha_db_per_km, cfg.distance_km), 1.0 / cfg.n_sections) *
        cfg.detector.eta;
    genuine = x * (1.0 - d);
    rescue = (1.0 - x) * 2.0 * d * (1.0 - d);
    bell_merge_rescue = 2.0 * d;
    v_nopt = std::pow(cfg.channel.v_opt, cfg.n_sections);
    terminals = terminal_station_count(cfg.n_sections);
    bells = bell_station_count(cfg.n_sections);
  }
};

enum class Side { genuine, rescued, lost };

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  // 53-bit uniform in [0, 1); fixed across standard libraries.
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

inline Side draw_side(const EventModel& m, Uniform& u) {
  const double r = u();
  if (r < m.genuine) return Side::genuine;
  if (r < m.genuine + m.rescue) return Side::rescued;
  return Side::lost;
}

inline Counts run_chunk(const EventModel& m, std::uint64_t pulses, std::uint64_t seed) {
  Uniform u(seed);
  Counts c;
  for (std::uint64_t i = 0; i < pulses; ++i) {
    if (u() >= 0.5) continue;  // bases differ
    bool noiseless = true;
    bool ok = true;
    for (int s = 0; ok && s < m.terminals; ++s) {
      const Side side = draw_side(m, u);
      ok = side != Side::lost;
      noiseless = noiseless && side == Side::genuine;
    }
    for (int b = 0; ok && b < m.bells; ++b) {
      const Side left = draw_side(m, u);
      const Side right = draw_side(m, u);
      if (left == Side::genuine && right == Side::genuine) {
        if (u() >= 0.5) {
          // both photons in one detector slot: one visible click
          noiseless = false;
          ok = u() < m.bell_merge_rescue;
        }
      } else {
        ok = left != Side::lost && right != Side::lost;
        noiseless = false;
      }
    }
    if (!ok) continue;
    ++c.accepted;
    const bool signal = noiseless && u() < m.v_nopt;
    if (signal) {
      ++c.signal;
      ++c.correct;
    } else if (u() < 0.5) {
      ++c.correct;
    }
  }
  return c;
}

}  // namespace detail

inline McEstimate make_estimate(std::uint64_t trials, std::uint64_t accepted, std::uint64_t correct,
                                std::uint64_t signal = 0) {
  McEstimate e;
  e.trials = trials;
  e.accepted = accepted;
  e.correct = correct;
  e.signal = signal;
  const double n = static_cast<double>(trials);
  e.p_total_hat = static_cast<double>(accepted) / n;
  e.se_p_total = std::sqrt(e.p_total_hat * (1.0 - e.p_total_hat) / n);
  if (accepted > 0) {
    const double a = static_cast<double>(accepted);
    const double f = static_cast<double>(correct) / a;
    e.v_ab_hat = 2.0 * f - 1.0;
    e.se_v_ab = 2.0 * std::sqrt(f * (1.0 - f) / a);
  }
  return e;
}

/// Runs the pulse train.  workers = 0 uses the hardware concurrency; the
/// result is identical for every worker count.
inline McEstimate simulate(const TrialConfig& cfg, unsigned workers = 0) {
  cfg.validate();
  const detail::EventModel model(cfg.relay);
  const std::uint64_t chunks = (cfg.trials + cfg.chunk_size - 1) / cfg.chunk_size;
  std::vector<detail::Counts> per_chunk(chunks);

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, chunks));

  std::atomic<std::uint64_t> next{0};
  auto work = [&] {
    for (std::uint64_t i = next++; i < chunks; i = next++) {
      const std::uint64_t begin = i * cfg.chunk_size;
      const std::uint64_t pulses = std::min(cfg.chunk_size, cfg.trials - begin);
      per_chunk[i] = detail::run_chunk(model, pulses, chunk_seed(cfg.seed, i));
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  detail::Counts total;
  for (const auto& c : per_chunk) {
    total.accepted += c.accepted;
    total.correct += c.correct;
    total.signal += c.signal;
  }
  return make_estimate(cfg.trials, total.accepted, total.correct, total.signal);
}

namespace detail {

// (estimate - expected)/se.  A zero plug-in se (all-or-nothing sample) falls
// back to the binomial se under the expected value.
inline double binomial_z(double estimate, double expected, double se, double null_se) {
  const double diff = estimate - expected;
  if (se <= 0.0) se = null_se;
  if (se <= 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / se;
}

}  // namespace detail

inline double zscore_p_total(const McEstimate& est, double analytic_p_total) {
  const double p0 = std::clamp(analytic_p_total, 0.0, 1.0);
  const double null_se = std::sqrt(p0 * (1.0 - p0) / static_cast<double>(est.trials));
  return detail::binomial_z(est.p_total_hat, analytic_p_total, est.se_p_total, null_se);
}

inline double zscore_v_ab(const McEstimate& est, double analytic_v_ab) {
  if (est.accepted == 0) throw degenerate_sample("no accepted events; visibility undefined");
  const double f0 = std::clamp(0.5 * (1.0 + analytic_v_ab), 0.0, 1.0);
  const double null_se = 2.0 * std::sqrt(f0 * (1.0 - f0) / static_cast<double>(est.accepted));
  return detail::binomial_z(est.v_ab_hat, analytic_v_ab, est.se_v_ab, null_se);
}

inline std::pair<double, double> zscore(const McEstimate& est, double analytic_p_total,
                                        double analytic_v_ab) {
  return {zscore_p_total(est, analytic_p_total), zscore_v_ab(est, analytic_v_ab)};
}

}  // namespace qrelay
