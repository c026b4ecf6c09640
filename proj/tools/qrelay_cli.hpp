#pragma once

// Command-line front end: figure data as CSV/JSON, Monte Carlo validation
// reports and optimizer summaries.  run() is the whole program; main() only
// forwards argv so tests can drive the CLI in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "qrelay/qrelay.hpp"

namespace qrelay::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr double kZLimit = 4.0;

/// 10 significant digits, '.' decimal point regardless of locale.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, res.ptr);
}

/// The value as it appears in CSV, so JSON and CSV carry the same digits.
inline json json_real(double v) {
  if (!std::isfinite(v)) return nullptr;
  const std::string s = format_real(v);
  double r = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), r);
  return r;
}

struct Blank {};
using Cell = std::variant<std::int64_t, double, std::string, Blank>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parameters

struct RunConfig {
  ChannelParams channel{};
  DetectorParams detector{};
  std::string format = "csv";
  std::string out_path;
};

/// key=value lines (alpha, eta, dark, vopt); '#' starts a comment.
inline std::map<std::string, double> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::map<std::string, double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string text = trim(line.substr(eq + 1));
    if (key != "alpha" && key != "eta" && key != "dark" && key != "vopt")
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      throw UsageError(path + ":" + std::to_string(lineno) + ": bad number '" + text + "'");
    values[key] = v;
  }
  return values;
}

inline json params_json(const RunConfig& rc) {
  return json{{"alpha", json_real(rc.channel.alpha_db_per_km)},
              {"eta", json_real(rc.detector.eta)},
              {"dark", json_real(rc.detector.dark_prob)},
              {"vopt", json_real(rc.channel.v_opt)}};
}

// ---------------------------------------------------------------------------
// Grids

/// "a..b" or "a" (inclusive), or a comma list of either.
inline std::vector<int> parse_sections(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  auto to_int = [&](const std::string& s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw UsageError("bad section spec '" + text + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    const int lo = to_int(dots == std::string::npos ? item : item.substr(0, dots));
    const int hi = dots == std::string::npos ? lo : to_int(item.substr(dots + 2));
    if (lo < 1 || hi < lo) throw UsageError("bad section range '" + item + "'");
    for (int n = lo; n <= hi; ++n) out.push_back(n);
  }
  if (out.empty()) throw UsageError("empty section spec");
  return out;
}

/// "start:stop:step", stop inclusive; stop < start gives an empty grid.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size())
      throw UsageError("bad grid spec '" + text + "'");
    parts.push_back(v);
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw UsageError("grid spec must be start:stop:step or a single value");
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0.0)) throw UsageError("grid step must be positive");
  std::vector<double> grid;
  const double slack = 1e-9 * step;
  for (std::int64_t i = 0;; ++i) {
    const double v = start + static_cast<double>(i) * step;
    if (v > stop + slack) break;
    grid.push_back(v);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Output

inline void write_csv(std::ostream& os, const std::string& command, const RunConfig& rc,
                      const Table& table, const std::vector<std::string>& trailer) {
  json header = params_json(rc);
  os << "# " << json{{"command", command}, {"params", header}}.dump() << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) os << format_real(v);
            else if constexpr (std::is_same_v<T, Blank>) {}
            else os << v;
          },
          row[i]);
    }
    os << '\n';
  }
  for (const auto& line : trailer) os << "# " << line << '\n';
}

inline json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) obj[table.columns[i]] = json_real(v);
            else if constexpr (std::is_same_v<T, Blank>) obj[table.columns[i]] = nullptr;
            else obj[table.columns[i]] = v;
          },
          row[i]);
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

inline void emit(std::ostream& os, const std::string& command, const RunConfig& rc, const Table& table,
                 const std::optional<json>& summary = std::nullopt) {
  if (rc.format == "json") {
    json doc{{"command", command}, {"params", params_json(rc)}, {"columns", table.columns},
             {"rows", table_json(table)}};
    if (summary) doc["summary"] = *summary;
    os << doc.dump(2) << '\n';
  } else {
    std::vector<std::string> trailer;
    if (summary) trailer.push_back("summary " + summary->dump());
    write_csv(os, command, rc, table, trailer);
  }
}

// ---------------------------------------------------------------------------
// Commands

inline RelayConfig relay(const RunConfig& rc, int n, double d) {
  return RelayConfig{n, d, rc.channel, rc.detector};
}

inline void cmd_visibility(std::ostream& os, const RunConfig& rc, const std::vector<int>& sections,
                           const std::vector<double>& distances) {
  Table t{{"n", "distance_km", "v_ab"}, {}};
  for (int n : sections)
    for (double d : distances)
      t.rows.push_back({std::int64_t{n}, d, link_metrics(relay(rc, n, d)).v_ab});
  emit(os, "visibility", rc, t);
}

inline void cmd_keyrate(std::ostream& os, const RunConfig& rc, const std::vector<int>& sections,
                        const std::vector<double>& distances, Reconciliation recon) {
  if (recon == Reconciliation::reverse) {
    for (int n : sections)
      if (n != 1) throw UsageError("reverse reconciliation is only defined for --sections 1");
  }
  Table t{{"n", "distance_km", "rate_bits_per_pulse", "i_ab", "i_ae", "i_be", "p_total"}, {}};
  for (int n : sections) {
    for (double d : distances) {
      const auto cfg = relay(rc, n, d);
      const auto link = link_metrics(cfg);
      const auto info = info_metrics(cfg);
      const auto rates = key_rates(cfg);
      const double rate = recon == Reconciliation::forward ? rates.rate_forward : *rates.rate_reverse;
      t.rows.push_back({std::int64_t{n}, d, rate, info.i_ab, info.i_ae, info.i_be, link.p_total});
    }
  }
  emit(os, "keyrate", rc, t);
}

inline void cmd_maxdist(std::ostream& os, const RunConfig& rc, const std::vector<int>& sections,
                        const std::string& method) {
  const bool exact = method == "exact" || method == "both";
  const bool approx = method == "approx" || method == "both";
  Table t{{"n", "d_max_exact_km", "d_max_approx_km"}, {}};
  int n_star = 0;
  double best = -1.0;
  for (int n : sections) {
    std::vector<Cell> row{std::int64_t{n}, Blank{}, Blank{}};
    double headline = 0.0;
    if (approx) {
      headline = max_distance_approx_or_zero(n, rc.channel, rc.detector);
      row[2] = headline;
    }
    if (exact) {
      headline = max_distance_exact(n, rc.channel, rc.detector).d_max_km;
      row[1] = headline;
    }
    if (headline > best) {
      best = headline;
      n_star = n;
    }
    t.rows.push_back(std::move(row));
  }
  const json summary{{"method", exact ? "exact" : "approx"}, {"n_star", n_star}, {"d_max_km", json_real(best)}};
  emit(os, "maxdist", rc, t, summary);
}

inline DetectorLine parse_line(const std::string& name, std::optional<double> a, std::optional<double> b) {
  if (name == "normal") return DetectorLine::normal();
  if (name == "good") return DetectorLine::good();
  if (name == "best") return DetectorLine::best();
  if (name == "custom") {
    if (!a || !b) throw UsageError("--line custom needs --a and --b");
    return DetectorLine::custom(*a, *b);
  }
  throw UsageError("unknown detector line '" + name + "'");
}

inline void cmd_detector_sweep(std::ostream& os, const RunConfig& rc, double distance,
                               const std::vector<int>& sections, const DetectorLine& line,
                               const std::vector<double>& etas) {
  if (etas.empty()) throw UsageError("empty efficiency grid");
  for (double eta : etas) {
    try {
      detector_dark(eta, line);
    } catch (const out_of_model&) {
      throw UsageError("dark-count probability reaches 0.5 at eta=" + format_real(eta));
    }
  }
  const auto sweep =
      detector_sweep(distance, sections, line, etas, rc.channel.alpha_db_per_km, rc.channel.v_opt);
  Table t{{"n", "eta", "dark_prob", "rate"}, {}};
  for (const auto& r : sweep.rows) t.rows.push_back({std::int64_t{r.n_sections}, r.eta, r.dark_prob, r.rate});
  json best = json::array();
  for (const auto& b : sweep.best)
    best.push_back({{"n", b.n_sections}, {"eta", json_real(b.eta)}, {"dark_prob", json_real(b.dark_prob)},
                    {"rate", json_real(b.rate)}});
  json summary{{"distance_km", json_real(distance)},
               {"line", {{"name", line.name}, {"a", json_real(line.a_coeff)}, {"b", json_real(line.b_coeff)}}},
               {"best", best}};
  emit(os, "detector-sweep", rc, t, summary);
}

struct McReport {
  json doc;
  bool pass;
};

/// Validation report for an estimate against the closed-form link metrics.
inline McReport mc_report(const RunConfig& rc, const TrialConfig& tc, const McEstimate& est,
                          const LinkMetrics& link) {
  const double z_p = zscore_p_total(est, link.p_total);
  json z{{"p_total", json_real(z_p)}};
  bool pass = std::abs(z_p) <= kZLimit;
  if (est.accepted > 0) {
    const double z_v = zscore_v_ab(est, link.v_ab);
    z["v_ab"] = json_real(z_v);
    pass = pass && std::abs(z_v) <= kZLimit;
  } else {
    z["v_ab"] = "degenerate-sample";
  }

  json doc{
      {"command", "mc"},
      {"params", params_json(rc)},
      {"config", {{"n", tc.relay.n_sections}, {"distance_km", json_real(tc.relay.distance_km)},
                  {"trials", tc.trials}, {"seed", tc.seed}, {"chunk_size", tc.chunk_size}}},
      {"generator", kGeneratorName},
      {"analytic", {{"p_total", json_real(link.p_total)}, {"v_ab", json_real(link.v_ab)}}},
      {"estimated",
       {{"accepted", est.accepted},
        {"correct", est.correct},
        {"p_total_hat", json_real(est.p_total_hat)},
        {"v_ab_hat", est.accepted > 0 ? json_real(est.v_ab_hat) : json(nullptr)},
        {"se_p_total", json_real(est.se_p_total)},
        {"se_v_ab", est.accepted > 0 ? json_real(est.se_v_ab) : json(nullptr)}}},
      {"z", z},
      {"z_limit", kZLimit},
      {"pass", pass}};
  return {std::move(doc), pass};
}

inline int cmd_mc(std::ostream& os, const RunConfig& rc, int n, double distance, std::uint64_t trials,
                  std::uint64_t seed, std::uint64_t chunk_size, unsigned threads) {
  const TrialConfig tc{relay(rc, n, distance), trials, seed, chunk_size};
  const auto est = simulate(tc, threads);
  const auto report = mc_report(rc, tc, est, link_metrics(tc.relay));
  os << report.doc.dump(2) << '\n';
  return report.pass ? kExitOk : kExitValidationFailed;
}

inline void cmd_source_penalty(std::ostream& os, const RunConfig& rc, int m, double emission) {
  const auto p = source_penalty(m, emission, rc.channel.alpha_db_per_km);
  Table t{{"m_sources", "emission_prob", "rate_factor", "distance_loss_km"},
          {{std::int64_t{m}, emission, p.rate_factor, p.distance_loss_km}}};
  emit(os, "source-penalty", rc, t);
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Secret-key rates, Monte Carlo checks and optimization for quantum-relay QKD links", "qrelay"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<double> alpha, eta, dark, vopt;
  std::string config_path;
  RunConfig rc;
  app.add_option("--alpha", alpha, "fiber loss, dB/km (default 0.25)");
  app.add_option("--eta", eta, "detector efficiency (default 0.3)");
  app.add_option("--dark", dark, "dark-count probability per gate (default 1e-4)");
  app.add_option("--vopt", vopt, "single-section optical visibility (default 0.99)");
  app.add_option("--config", config_path, "key=value file with alpha, eta, dark, vopt");
  app.add_option("--format", rc.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", rc.out_path, "output file (default stdout)");

  std::string sections_spec = "1..10";
  std::string distances_spec = "0:800:1";

  auto* vis = app.add_subcommand("visibility", "V_AB over sections x distance");
  vis->add_option("--sections", sections_spec, "e.g. 1..10 or 1,2,5")->capture_default_str();
  vis->add_option("--distances", distances_spec, "start:stop:step km")->capture_default_str();

  std::string recon_name = "forward";
  auto* key = app.add_subcommand("keyrate", "secret-key rate and mutual informations");
  key->add_option("--sections", sections_spec)->capture_default_str();
  key->add_option("--distances", distances_spec)->capture_default_str();
  key->add_option("--reconciliation", recon_name)->check(CLI::IsMember({"forward", "reverse"}));

  std::string method = "both";
  auto* maxd = app.add_subcommand("maxdist", "maximum key distance per section count");
  maxd->add_option("--sections", sections_spec)->capture_default_str();
  maxd->add_option("--method", method)->check(CLI::IsMember({"exact", "approx", "both"}))->capture_default_str();

  double sweep_distance = 400.0;
  std::string sweep_sections = "4,5,6";
  std::string line_name = "good";
  std::optional<double> line_a, line_b;
  std::string eta_spec = "0.02:0.30:0.01";
  auto* sweep = app.add_subcommand("detector-sweep", "key rate vs detector operating point");
  sweep->add_option("--distance", sweep_distance, "km")->capture_default_str();
  sweep->add_option("--sections", sweep_sections)->capture_default_str();
  sweep->add_option("--line", line_name, "normal|good|best|custom")->capture_default_str();
  sweep->add_option("--a", line_a, "custom line: dark probability at eta=0");
  sweep->add_option("--b", line_b, "custom line: exponential slope");
  sweep->add_option("--etas", eta_spec, "start:stop:step")->capture_default_str();

  int mc_n = 1;
  double mc_distance = 50.0;
  std::uint64_t trials = 1'000'000, seed = 1, chunk = 1u << 16;
  unsigned threads = 0;
  auto* mc = app.add_subcommand("mc", "Monte Carlo check of P(total) and V_AB");
  mc->add_option("--sections", mc_n)->capture_default_str();
  mc->add_option("--distance", mc_distance, "km")->capture_default_str();
  mc->add_option("--trials", trials)->capture_default_str();
  mc->add_option("--seed", seed)->capture_default_str();
  mc->add_option("--chunk-size", chunk)->capture_default_str();
  mc->add_option("--threads", threads, "0 = hardware concurrency; does not affect results");

  int m_sources = 1;
  double emission = 0.1;
  auto* pen = app.add_subcommand("source-penalty", "rate and distance cost of imperfect sources");
  pen->add_option("--sources", m_sources)->capture_default_str();
  pen->add_option("--emission", emission)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      const auto file = read_config_file(config_path);
      if (auto it = file.find("alpha"); it != file.end()) rc.channel.alpha_db_per_km = it->second;
      if (auto it = file.find("eta"); it != file.end()) rc.detector.eta = it->second;
      if (auto it = file.find("dark"); it != file.end()) rc.detector.dark_prob = it->second;
      if (auto it = file.find("vopt"); it != file.end()) rc.channel.v_opt = it->second;
    }
    if (alpha) rc.channel.alpha_db_per_km = *alpha;
    if (eta) rc.detector.eta = *eta;
    if (dark) rc.detector.dark_prob = *dark;
    if (vopt) rc.channel.v_opt = *vopt;
    rc.channel.validate();
    rc.detector.validate();

    std::ofstream file;
    if (!rc.out_path.empty()) {
      file.open(rc.out_path, std::ios::binary);
      if (!file) throw UsageError("cannot open " + rc.out_path + " for writing");
    }
    std::ostream& os = rc.out_path.empty() ? out : file;

    if (*vis) {
      cmd_visibility(os, rc, parse_sections(sections_spec), parse_grid(distances_spec));
    } else if (*key) {
      cmd_keyrate(os, rc, parse_sections(sections_spec), parse_grid(distances_spec),
                  recon_name == "reverse" ? Reconciliation::reverse : Reconciliation::forward);
    } else if (*maxd) {
      cmd_maxdist(os, rc, parse_sections(sections_spec), method);
    } else if (*sweep) {
      cmd_detector_sweep(os, rc, sweep_distance, parse_sections(sweep_sections),
                         parse_line(line_name, line_a, line_b), parse_grid(eta_spec));
    } else if (*mc) {
      return cmd_mc(os, rc, mc_n, mc_distance, trials, seed, chunk, threads);
    } else if (*pen) {
      cmd_source_penalty(os, rc, m_sources, emission);
    }
  } catch (const UsageError& e) {
    err << "qrelay: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {  // invalid_parameter, unsupported_reconciliation
    err << "qrelay: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "qrelay: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace qrelay::cli
