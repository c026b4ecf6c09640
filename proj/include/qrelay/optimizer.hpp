#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qrelay/core_model.hpp"
#include "qrelay/errors.hpp"
#include "qrelay/params.hpp"

namespace qrelay {

/// Practical-rate guide line: one secret bit per minute at a 10 GHz pulse rate.
inline constexpr double kOneBitPerMinuteAt10GHz = 1.0 / (60.0 * 1e10);

inline constexpr double kDistanceTolerance = 0.1;     // km
inline constexpr double kInitialBracket = 10.0;       // km
inline constexpr double kMaxSearchDistance = 1.0e5;   // km

enum class DistanceMethod { exact, approx };

inline std::string to_string(DistanceMethod m) {
  return m == DistanceMethod::exact ? "exact" : "approx";
}

struct MaxDistanceResult {
  int n_sections = 1;
  double d_max_km = 0.0;
  DistanceMethod method = DistanceMethod::exact;
  Reconciliation reconciliation = Reconciliation::forward;
};

/// Dark-count probability along a detector family: dark(eta) = A * exp(B * eta).
struct DetectorLine {
  double a_coeff = 6.1e-7;
  double b_coeff = 17.0;
  std::string name = "good";

  static DetectorLine normal() { return {2.3e-6, 17.0, "normal"}; }
  static DetectorLine good() { return {6.1e-7, 17.0, "good"}; }
  static DetectorLine best() { return {1.2e-7, 16.0, "best"}; }
  static DetectorLine custom(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw invalid_parameter("detector line coefficients must be positive");
    return {a, b, "custom"};
  }
};

struct SourcePenalty {
  double rate_factor = 1.0;
  double distance_loss_km = 0.0;
};

struct OptimalSections {
  int n_star = 1;
  double d_max_km = 0.0;
};

namespace detail {

inline RelayConfig relay_at(int n, double distance_km, const ChannelParams& ch, const DetectorParams& det) {
  return RelayConfig{n, distance_km, ch, det};
}

// Largest d at which keep(d) holds, assuming keep is true on [0, d*) and false
// beyond.  Brackets by doubling from kInitialBracket, then bisects.  Returns
// +inf if keep still holds at kMaxSearchDistance.
inline double last_true_distance(const std::function<bool(double)>& keep) {
  if (!keep(0.0)) return 0.0;
  double lo = 0.0;
  double hi = kInitialBracket;
  while (keep(hi)) {
    lo = hi;
    if (hi >= kMaxSearchDistance) return std::numeric_limits<double>::infinity();
    hi = std::min(2.0 * hi, kMaxSearchDistance);
  }
  while (hi - lo > kDistanceTolerance) {
    const double mid = 0.5 * (lo + hi);
    (keep(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

/// sup{d : key rate > 0}, to kDistanceTolerance.
inline MaxDistanceResult max_distance_exact(int n, const ChannelParams& channel,
                                            const DetectorParams& detector,
                                            Reconciliation recon = Reconciliation::forward) {
  if (n < 1) throw invalid_parameter("n must be >= 1");
  if (recon == Reconciliation::reverse && n != 1)
    throw unsupported_reconciliation("reverse reconciliation requires a single section");
  detail::relay_at(n, 0.0, channel, detector).validate();

  MaxDistanceResult r{n, 0.0, DistanceMethod::exact, recon};
  r.d_max_km = detail::last_true_distance([&](double d) {
    return rate_margin(detail::relay_at(n, d, channel, detector), recon) > 0.0;
  });
  return r;
}

/// Closed-form estimate (10n/alpha) log10((eta/4D)(2^(1/2n) V_opt - 1)), from
/// requiring V_AB > 1/sqrt(2) with Bell measurements doubling the effective
/// dark counts.
inline MaxDistanceResult max_distance_approx(int n, const ChannelParams& channel,
                                             const DetectorParams& detector) {
  if (n < 1) throw invalid_parameter("n must be >= 1");
  channel.validate();
  detector.validate();
  const double arg = detector.eta / (4.0 * detector.dark_prob) *
                     (std::pow(2.0, 1.0 / (2.0 * n)) * channel.v_opt - 1.0);
  if (!(arg > 1.0)) throw no_key_possible("approximate maximum distance is not positive");
  const double d = 10.0 * n / channel.alpha_db_per_km * std::log10(arg);
  return {n, d, DistanceMethod::approx, Reconciliation::forward};
}

/// Approximate distance, or 0 where the estimate says no key is possible.
inline double max_distance_approx_or_zero(int n, const ChannelParams& channel,
                                          const DetectorParams& detector) {
  try {
    return max_distance_approx(n, channel, detector).d_max_km;
  } catch (const no_key_possible&) {
    return 0.0;
  }
}

/// argmax over n in 1..n_max of the maximum distance; ties go to the smaller n.
inline OptimalSections optimal_sections(const ChannelParams& channel, const DetectorParams& detector,
                                        int n_max, DistanceMethod method = DistanceMethod::exact) {
  if (n_max < 1) throw invalid_parameter("n_max must be >= 1");
  OptimalSections best{1, -1.0};
  for (int n = 1; n <= n_max; ++n) {
    const double d = method == DistanceMethod::exact
                         ? max_distance_exact(n, channel, detector).d_max_km
                         : max_distance_approx_or_zero(n, channel, detector);
    if (d > best.d_max_km) best = {n, d};
  }
  return best;
}

/// Largest d with forward rate >= rate_threshold (0 when unreachable).
inline double threshold_distance(int n, const ChannelParams& channel, const DetectorParams& detector,
                                 double rate_threshold = kOneBitPerMinuteAt10GHz) {
  if (!(rate_threshold > 0.0)) throw invalid_parameter("rate threshold must be positive");
  if (n < 1) throw invalid_parameter("n must be >= 1");
  detail::relay_at(n, 0.0, channel, detector).validate();
  return detail::last_true_distance([&](double d) {
    return key_rates(detail::relay_at(n, d, channel, detector)).rate_forward >= rate_threshold;
  });
}

inline double detector_dark(double eta, const DetectorLine& line) {
  if (!(eta > 0.0 && eta <= 1.0)) throw invalid_parameter("eta must lie in (0, 1]");
  const double dark = line.a_coeff * std::exp(line.b_coeff * eta);
  if (!(dark < 0.5)) throw out_of_model("dark-count probability reaches 0.5 on this detector line");
  return dark;
}

/// Largest eta for which the line stays below a dark-count probability of 0.5.
inline double detector_eta_limit(const DetectorLine& line) {
  return std::log(0.5 / line.a_coeff) / line.b_coeff;
}

struct SweepRow {
  int n_sections;
  double eta;
  double dark_prob;
  double rate;
};

using SweepBest = SweepRow;

struct DetectorSweep {
  std::vector<SweepRow> rows;
  std::vector<SweepBest> best;  ///< one entry per requested n, in request order
};

/// Forward key rate at fixed distance over (n, eta), with D taken from the
/// detector line.  Grid points where the line leaves the model are skipped.
inline DetectorSweep detector_sweep(double distance_km, const std::vector<int>& sections,
                                    const DetectorLine& line, const std::vector<double>& eta_grid,
                                    double alpha_db_per_km = 0.25, double v_opt = 0.99) {
  if (sections.empty() || eta_grid.empty()) throw invalid_parameter("sweep grids must be nonempty");
  const ChannelParams channel{alpha_db_per_km, v_opt};
  DetectorSweep out;
  for (int n : sections) {
    SweepBest best{n, 0.0, 0.0, -1.0};
    for (double eta : eta_grid) {
      double dark = 0.0;
      try {
        dark = detector_dark(eta, line);
      } catch (const out_of_model&) {
        continue;
      }
      const double rate = key_rates(RelayConfig{n, distance_km, channel, {eta, dark}}).rate_forward;
      out.rows.push_back({n, eta, dark, rate});
      if (rate > best.rate) best = {n, eta, dark, rate};
    }
    if (best.rate >= 0.0) out.best.push_back(best);
  }
  return out;
}

inline SourcePenalty source_penalty(int m_sources, double emission_prob, double alpha_db_per_km) {
  if (m_sources < 0) throw invalid_parameter("source count must be >= 0");
  if (!(emission_prob > 0.0 && emission_prob <= 1.0))
    throw invalid_parameter("emission probability must lie in (0, 1]");
  if (!(alpha_db_per_km > 0.0)) throw invalid_parameter("alpha must be positive");
  if (m_sources == 0) return {};
  return {std::pow(emission_prob, m_sources),
          10.0 * m_sources / alpha_db_per_km * std::log10(1.0 / emission_prob)};
}

}  // namespace qrelay
