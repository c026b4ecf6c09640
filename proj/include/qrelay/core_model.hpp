#pragma once

// Closed-form link model for an n-section quantum relay.
//
// Layout of an n-section relay: entangled-pair sources and linear-optics Bell
// measurements alternate along the fiber.  There are floor((n-1)/2) Bell
// stations, each detecting two photons, and n - 2*floor((n-1)/2) terminal
// stations (Bob always, Alice too when n is even), each detecting one.  Every
// photon crosses exactly one section of transmission t^(1/n).

#include <algorithm>
#include <cmath>
#include <optional>

#include "qrelay/errors.hpp"
#include "qrelay/params.hpp"

namespace qrelay {

struct LinkMetrics {
  double t = 0.0;          ///< full-channel transmission
  double t_section = 0.0;  ///< t^(1/n)
  double p_click = 0.0;    ///< accepted-click probability of one terminal station
  double p_signal = 0.0;
  double p_total = 0.0;
  double v_ab = 0.0;
  bool degenerate = false;  ///< p_total == 0; v_ab reported as 0
};

struct InfoMetrics {
  double i_ab = 0.0;
  double i_ae = 0.0;
  double i_be = 0.0;
  double v_ab_e = 0.0;  ///< Alice-Bob visibility of the errors Eve can exploit
  double p_photonpass = 0.0;
  double v_ae_n = 0.0;
  bool degenerate = false;
};

struct KeyRates {
  double rate_forward = 0.0;           ///< secret bits per pulse
  std::optional<double> rate_reverse;  ///< single-section links only
};

inline int bell_station_count(int n_sections) { return (n_sections - 1) / 2; }

inline int terminal_station_count(int n_sections) {
  return n_sections - 2 * bell_station_count(n_sections);
}

/// 10^(-alpha*d/10)
inline double transmittance(double alpha_db_per_km, double distance_km) {
  if (!(alpha_db_per_km > 0.0)) throw invalid_parameter("alpha must be positive");
  if (!(distance_km >= 0.0)) throw invalid_parameter("distance must be non-negative");
  return std::pow(10.0, -alpha_db_per_km * distance_km / 10.0);
}

/// Shannon entropy of a binary variable, in bits; H(0) = H(1) = 0.
inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_parameter("probability outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

namespace detail {

struct SectionTerms {
  double t;
  double t_section;
  double x;       // t^(1/n) * eta, photon arrives and is detected
  double p_n;     // terminal accepted-click probability
  double bell;    // Bell-station acceptance, merge correction included
  double bell_e;  // Bell denominator without the (1-D)^2 factor
};

inline SectionTerms section_terms(const RelayConfig& cfg) {
  cfg.validate();
  const double d = cfg.detector.dark_prob;
  const double eta = cfg.detector.eta;
  SectionTerms s{};
  s.t = transmittance(cfg.channel.alpha_db_per_km, cfg.distance_km);
  s.t_section = std::pow(s.t, 1.0 / cfg.n_sections);
  s.x = s.t_section * eta;
  s.p_n = (s.x + (1.0 - s.x) * 2.0 * d) * (1.0 - d);
  const double merged = (1.0 - 2.0 * d) * 0.5 * s.x * s.x;
  s.bell = s.p_n * s.p_n - merged * (1.0 - d) * (1.0 - d);
  s.bell_e = s.p_n * s.p_n - merged;
  return s;
}

// 1/2 + v/2 can round past 1 for v within an ulp of 1.
inline double entropy_of_visibility(double v) {
  return binary_entropy(std::clamp(0.5 + 0.5 * v, 0.0, 1.0));
}

}  // namespace detail

/// p_n = (t^(1/n) eta + (1 - t^(1/n) eta) 2D)(1 - D)
inline double section_click_prob(const RelayConfig& cfg) {
  return detail::section_terms(cfg).p_n;
}

inline LinkMetrics link_metrics(const RelayConfig& cfg) {
  const auto s = detail::section_terms(cfg);
  const int n = cfg.n_sections;
  const int bells = bell_station_count(n);
  const double d = cfg.detector.dark_prob;
  const double v_nopt = std::pow(cfg.channel.v_opt, n);

  LinkMetrics m;
  m.t = s.t;
  m.t_section = s.t_section;
  m.p_click = s.p_n;
  m.p_signal = std::pow(0.5, (n + 1) / 2) * v_nopt * std::pow(s.x * (1.0 - d), n);
  m.p_total = 0.5 * std::pow(s.p_n, terminal_station_count(n)) * std::pow(s.bell, bells);
  if (m.p_total > 0.0) {
    m.v_ab = std::min(1.0, m.p_signal / m.p_total);
  } else {
    m.p_signal = 0.0;
    m.v_ab = 0.0;
    m.degenerate = true;
  }
  return m;
}

/// sqrt(1 - v^2): Eve's visibility when she replaces a channel of visibility v.
inline double eve_base_visibility(double v_channel) {
  if (!(v_channel >= 0.0 && v_channel <= 1.0))
    throw invalid_parameter("visibility outside [0, 1]");
  return std::sqrt(std::max(0.0, 1.0 - v_channel * v_channel));
}

/// V_nopt * (x^2/2 / (p_n^2 - (1-2D) x^2/2))^floor((n-1)/2).  The Bell term
/// here carries no (1-D)^2 factor, unlike the one inside P(total).
inline double eve_usable_visibility(const RelayConfig& cfg) {
  const auto s = detail::section_terms(cfg);
  const int bells = bell_station_count(cfg.n_sections);
  const double v_nopt = std::pow(cfg.channel.v_opt, cfg.n_sections);
  if (bells == 0) return v_nopt;
  if (!(s.bell_e > 0.0))
    throw degenerate_link("Bell-station acceptance is zero; V_AB^E undefined");
  return v_nopt * std::pow(0.5 * s.x * s.x / s.bell_e, bells);
}

inline InfoMetrics info_metrics(const RelayConfig& cfg) {
  const auto link = link_metrics(cfg);
  InfoMetrics info;
  if (link.degenerate) {
    info.degenerate = true;
    return info;
  }
  const double eta = cfg.detector.eta;
  const double d = cfg.detector.dark_prob;
  const double x = link.t_section * eta;

  info.i_ab = 1.0 - detail::entropy_of_visibility(link.v_ab);
  info.v_ab_e = eve_usable_visibility(cfg);
  const double eve_v = eve_base_visibility(info.v_ab_e);

  // Eve's view of a terminal's bit is diluted by that terminal's own dark
  // counts, which she cannot control.
  info.p_photonpass = link.t_section * (eta + (1.0 - eta) * 2.0 * d) / (x + (1.0 - x) * 2.0 * d);
  info.v_ae_n = eta * eve_v / (eta + (1.0 - eta) * 2.0 * d);
  info.i_be = info.p_photonpass * (1.0 - detail::entropy_of_visibility(info.v_ae_n));

  if (cfg.n_sections % 2 == 1) {
    // Upper bound: Eve is credited as if she suffered no dark counts.
    info.i_ae = 1.0 - detail::entropy_of_visibility(eve_v);
  } else {
    info.i_ae = info.i_be;
  }
  return info;
}

/// p_total * (I_AB - I_E) without clamping; the sign decides whether a key exists.
inline double rate_margin(const RelayConfig& cfg, Reconciliation recon = Reconciliation::forward) {
  if (recon == Reconciliation::reverse && cfg.n_sections != 1)
    throw unsupported_reconciliation("reverse reconciliation is modeled for one section only");
  const auto link = link_metrics(cfg);
  if (link.degenerate) return 0.0;
  const auto info = info_metrics(cfg);
  const double eve = recon == Reconciliation::forward ? info.i_ae : info.i_be;
  return link.p_total * (info.i_ab - eve);
}

inline KeyRates key_rates(const RelayConfig& cfg) {
  KeyRates rates;
  rates.rate_forward = std::max(0.0, rate_margin(cfg, Reconciliation::forward));
  if (cfg.n_sections == 1)
    rates.rate_reverse = std::max(0.0, rate_margin(cfg, Reconciliation::reverse));
  return rates;
}

}  // namespace qrelay
