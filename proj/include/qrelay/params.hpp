#pragma once

#include <cmath>
#include <string>

#include "qrelay/errors.hpp"

namespace qrelay {

/// Fiber loss and single-section optical visibility.
struct ChannelParams {
  double alpha_db_per_km = 0.25;
  double v_opt = 0.99;

  void validate() const {
    if (!(alpha_db_per_km > 0.0) || !std::isfinite(alpha_db_per_km))
      throw invalid_parameter("alpha_db_per_km must be positive and finite");
    if (!(v_opt > 0.0 && v_opt <= 1.0))
      throw invalid_parameter("v_opt must lie in (0, 1]");
  }
};

/// Per-detector efficiency and dark-count probability per gate.
struct DetectorParams {
  double eta = 0.3;
  double dark_prob = 1e-4;

  void validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw invalid_parameter("eta must lie in (0, 1]");
    if (!(dark_prob >= 0.0 && dark_prob < 0.5))
      throw invalid_parameter("dark_prob must lie in [0, 0.5)");
  }
};

/// A relay of n_sections equal-length sections spanning distance_km.
struct RelayConfig {
  int n_sections = 1;
  double distance_km = 0.0;
  ChannelParams channel{};
  DetectorParams detector{};

  void validate() const {
    if (n_sections < 1) throw invalid_parameter("n_sections must be >= 1");
    if (!(distance_km >= 0.0) || !std::isfinite(distance_km))
      throw invalid_parameter("distance_km must be finite and >= 0");
    channel.validate();
    detector.validate();
  }

  double section_length_km() const { return distance_km / n_sections; }
};

enum class Reconciliation { forward, reverse };

inline std::string to_string(Reconciliation r) {
  return r == Reconciliation::forward ? "forward" : "reverse";
}

}  // namespace qrelay
