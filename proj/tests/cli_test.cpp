#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qrelay_cli.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = qrelay::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  bool header_seen = false;
  for (const auto& l : lines(csv)) {
    if (l.empty() || l[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string header_row(const std::string& csv) {
  for (const auto& l : lines(csv))
    if (!l.empty() && l[0] != '#') return l;
  return {};
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qrelay_cli_test_" + name);
}

}  // namespace

TEST(FormatReal, TenSignificantDigits) {
  using qrelay::cli::format_real;
  EXPECT_EQ(format_real(0.150054993), "0.150054993");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(format_real(1e-12 / 6), "1.666666667e-13");
  EXPECT_EQ(format_real(40.0), "40");
}

TEST(Grid, Parsing) {
  using qrelay::cli::parse_grid;
  using qrelay::cli::parse_sections;
  EXPECT_EQ(parse_sections("1..3"), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(parse_sections("4,5,6"), (std::vector<int>{4, 5, 6}));
  EXPECT_EQ(parse_sections("1..2,7"), (std::vector<int>{1, 2, 7}));
  EXPECT_THROW(parse_sections("0..3"), qrelay::cli::UsageError);
  EXPECT_THROW(parse_sections("x"), qrelay::cli::UsageError);
  EXPECT_EQ(parse_grid("0:800:1").size(), 801u);
  EXPECT_EQ(parse_grid("0.02:0.30:0.01").size(), 29u);
  EXPECT_TRUE(parse_grid("10:0:1").empty());
  EXPECT_EQ(parse_grid("5"), (std::vector<double>{5.0}));
  EXPECT_THROW(parse_grid("0:10:0"), qrelay::cli::UsageError);
}

TEST(Visibility, InterceptsAreOpticalVisibility) {
  const auto r = run({"visibility", "--sections", "1..10", "--distances", "0:800:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(header_row(r.out), "n,distance_km,v_ab");
  const auto rows = data_rows(r.out);
  ASSERT_EQ(rows.size(), 10u * 801u);
  for (const auto& row : rows) {
    if (row[1] != "0") continue;
    const int n = std::stoi(row[0]);
    EXPECT_NEAR(std::stod(row[2]), std::pow(0.99, n), 0.02) << n;
  }
}

TEST(Visibility, PerfectParametersSinglePoint) {
  const auto r = run({"visibility", "--sections", "1", "--distances", "0", "--eta", "1", "--dark", "0", "--vopt", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"1", "0", "1"}));
}

TEST(Visibility, NeverAboveNinetyPercentBeyond300Km) {
  const auto r = run({"visibility", "--sections", "1..30", "--distances", "301:800:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : data_rows(r.out)) ASSERT_LT(std::stod(row[2]), 0.9);
}

TEST(Visibility, HeaderCarriesEffectiveParameters) {
  const auto r = run({"--alpha", "0.2", "visibility", "--sections", "1", "--distances", "0", "--vopt", "0.95"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto first = lines(r.out).at(0);
  ASSERT_EQ(first.rfind("# ", 0), 0u);
  const auto meta = nlohmann::json::parse(first.substr(2));
  EXPECT_EQ(meta["command"], "visibility");
  EXPECT_EQ(meta["params"]["alpha"], 0.2);
  EXPECT_EQ(meta["params"]["vopt"], 0.95);
  EXPECT_EQ(meta["params"]["eta"], 0.3);
  EXPECT_EQ(meta["params"]["dark"], 1e-4);
}

TEST(KeyRate, ColumnsAndReverseDominance) {
  const auto fwd = run({"keyrate", "--sections", "1", "--distances", "0:200:5"});
  const auto rev = run({"keyrate", "--sections", "1", "--distances", "0:200:5", "--reconciliation", "reverse"});
  ASSERT_EQ(fwd.code, 0) << fwd.err;
  ASSERT_EQ(rev.code, 0) << rev.err;
  EXPECT_EQ(header_row(fwd.out), "n,distance_km,rate_bits_per_pulse,i_ab,i_ae,i_be,p_total");
  const auto f = data_rows(fwd.out), b = data_rows(rev.out);
  ASSERT_EQ(f.size(), b.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_GE(std::stod(b[i][2]), std::stod(f[i][2]));
}

TEST(KeyRate, ReverseNeedsOneSection) {
  const auto r = run({"keyrate", "--sections", "1..2", "--reconciliation", "reverse"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(KeyRate, EmptyDistanceRangeIsHeaderOnly) {
  const auto r = run({"keyrate", "--sections", "1..3", "--distances", "100:0:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(header_row(r.out), "n,distance_km,rate_bits_per_pulse,i_ab,i_ae,i_be,p_total");
  EXPECT_TRUE(data_rows(r.out).empty());
}

TEST(KeyRate, JsonMatchesCsvDigits) {
  const auto csv = run({"keyrate", "--sections", "2", "--distances", "50"});
  const auto js = run({"--format", "json", "keyrate", "--sections", "2", "--distances", "50"});
  ASSERT_EQ(js.code, 0) << js.err;
  const auto doc = nlohmann::json::parse(js.out);
  const auto row = data_rows(csv.out).at(0);
  EXPECT_EQ(doc["rows"][0]["rate_bits_per_pulse"].get<double>(), std::stod(row[2]));
  EXPECT_EQ(doc["columns"].size(), 7u);
  EXPECT_EQ(doc["params"]["alpha"], 0.25);
}

TEST(MaxDist, OptimumNearEighteenSections) {
  const auto r = run({"--format", "json", "maxdist", "--sections", "1..30", "--method", "both"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  const int n_star = doc["summary"]["n_star"];
  const double d_max = doc["summary"]["d_max_km"];
  EXPECT_GE(n_star, 16);
  EXPECT_LE(n_star, 20);
  EXPECT_GE(d_max, 600.0);
  EXPECT_LE(d_max, 700.0);
  EXPECT_EQ(doc["rows"].size(), 30u);
}

TEST(MaxDist, ApproxOnlyLeavesExactBlank) {
  const auto r = run({"maxdist", "--sections", "1", "--method", "approx"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][1], "");
  EXPECT_NEAR(std::stod(rows[0][2]), 99.09, 0.01);
}

TEST(MaxDist, NoKeyChannel) {
  const auto r = run({"--vopt", "0.5", "maxdist", "--sections", "1..2", "--method", "exact"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : data_rows(r.out)) EXPECT_EQ(row[1], "0");
}

TEST(DetectorSweep, FourSectionsPeakNearEighteenPercent) {
  const auto r = run({"--format", "json", "detector-sweep", "--distance", "400", "--sections", "4,5,6", "--line",
                      "good", "--etas", "0.02:0.30:0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  const auto& best = doc["summary"]["best"];
  ASSERT_EQ(best.size(), 3u);
  EXPECT_EQ(best[0]["n"], 4);
  EXPECT_NEAR(best[0]["eta"].get<double>(), 0.18, 0.04);
  EXPECT_GT(best[0]["rate"].get<double>(), best[1]["rate"].get<double>());
  EXPECT_GT(best[0]["rate"].get<double>(), best[2]["rate"].get<double>());
}

TEST(DetectorSweep, SingleSectionIsZeroAt400Km) {
  const auto r = run({"detector-sweep", "--distance", "400", "--sections", "1", "--etas", "0.02:0.30:0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(header_row(r.out), "n,eta,dark_prob,rate");
  for (const auto& row : data_rows(r.out)) EXPECT_EQ(row[3], "0");
}

TEST(DetectorSweep, CustomLineEqualToPreset) {
  const auto preset = run({"detector-sweep", "--line", "good"});
  const auto custom = run({"detector-sweep", "--line", "custom", "--a", "6.1e-7", "--b", "17"});
  ASSERT_EQ(custom.code, 0) << custom.err;
  EXPECT_EQ(data_rows(preset.out), data_rows(custom.out));
}

TEST(DetectorSweep, GridLeavingTheModelIsAUsageError) {
  EXPECT_EQ(run({"detector-sweep", "--etas", "0.5:0.9:0.1"}).code, 2);
  EXPECT_EQ(run({"detector-sweep", "--line", "custom", "--a", "1e-6"}).code, 2);
  EXPECT_EQ(run({"detector-sweep", "--line", "bogus"}).code, 2);
}

TEST(Mc, SingleSectionPasses) {
  const auto r = run({"mc", "--sections", "1", "--distance", "50", "--trials", "1000000", "--seed", "17"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_TRUE(doc["pass"].get<bool>());
  EXPECT_EQ(doc["generator"], qrelay::kGeneratorName);
  EXPECT_EQ(doc["config"]["seed"], 17);
  EXPECT_LE(std::abs(doc["z"]["p_total"].get<double>()), 4.0);
  EXPECT_LE(std::abs(doc["z"]["v_ab"].get<double>()), 4.0);
}

TEST(Mc, SingleTrialReportsDegenerateVisibility) {
  // Pick a seed whose single pulse is rejected at sifting.
  for (int seed = 0; seed < 50; ++seed) {
    const auto r = run({"mc", "--sections", "1", "--distance", "0", "--trials", "1", "--seed", std::to_string(seed)});
    const auto doc = nlohmann::json::parse(r.out);
    const auto accepted = doc["estimated"]["accepted"].get<int>();
    ASSERT_LE(accepted, 1);
    if (accepted == 0) {
      EXPECT_EQ(doc["z"]["v_ab"], "degenerate-sample");
      return;
    }
  }
  FAIL() << "no rejected single-pulse run among 50 seeds";
}

TEST(Mc, ReportFailsBeyondFourSigma) {
  const qrelay::cli::RunConfig rc;
  const qrelay::TrialConfig tc{qrelay::RelayConfig{1, 0.0, {}, {}}, 1'000'000, 1, 1024};
  const qrelay::LinkMetrics link{.p_total = 0.15, .v_ab = 0.5};

  // Every accepted pulse agrees where V_AB = 0.5 predicts 75% agreement.
  const auto bad = qrelay::cli::mc_report(rc, tc, qrelay::make_estimate(1'000'000, 150'000, 150'000), link);
  EXPECT_FALSE(bad.pass);
  EXPECT_GT(bad.doc["z"]["v_ab"].get<double>(), 4.0);

  const auto good = qrelay::cli::mc_report(rc, tc, qrelay::make_estimate(1'000'000, 150'000, 112'500), link);
  EXPECT_TRUE(good.pass);
  EXPECT_EQ(good.doc["z"]["p_total"].get<double>(), 0.0);
  EXPECT_EQ(good.doc["z"]["v_ab"].get<double>(), 0.0);
}

TEST(Mc, BadFlagsExitTwo) {
  EXPECT_EQ(run({"mc", "--trials", "0"}).code, 2);
  EXPECT_EQ(run({"mc", "--sections", "0"}).code, 2);
  EXPECT_EQ(run({"mc", "--nonsense"}).code, 2);
}

TEST(SourcePenalty, OneSource) {
  const auto r = run({"source-penalty", "--sources", "1", "--emission", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"1", "0.1", "0.1", "40"}));
}

TEST(GlobalFlags, InvalidParametersExitTwo) {
  EXPECT_EQ(run({"--eta", "1.5", "visibility"}).code, 2);
  EXPECT_EQ(run({"--dark", "0.7", "keyrate"}).code, 2);
  EXPECT_EQ(run({"--format", "xml", "visibility"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(GlobalFlags, ConfigFileThenFlags) {
  const auto path = temp_file("config.txt");
  {
    std::ofstream f(path);
    f << "# detector\neta = 0.2\ndark=2e-5\nalpha=0.2\n";
  }
  const auto r = run({"--config", path.string(), "--eta", "0.25", "visibility", "--sections", "1", "--distances", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto meta = nlohmann::json::parse(lines(r.out).at(0).substr(2));
  EXPECT_EQ(meta["params"]["eta"], 0.25);
  EXPECT_EQ(meta["params"]["dark"], 2e-5);
  EXPECT_EQ(meta["params"]["alpha"], 0.2);
  EXPECT_EQ(meta["params"]["vopt"], 0.99);

  {
    std::ofstream f(path);
    f << "gamma=3\n";
  }
  EXPECT_EQ(run({"--config", path.string(), "visibility"}).code, 2);
  EXPECT_EQ(run({"--config", temp_file("missing.txt").string(), "visibility"}).code, 2);
  std::filesystem::remove(path);
}

TEST(GlobalFlags, ByteIdenticalOutputFiles) {
  const auto a = temp_file("a.csv"), b = temp_file("b.csv");
  const std::vector<std::string> base{"mc", "--sections", "2", "--distance", "30", "--trials", "200000", "--seed", "5"};
  auto with_out = [&](const std::filesystem::path& p, const std::string& threads) {
    auto args = base;
    args.insert(args.begin(), {"--out", p.string()});
    args.insert(args.end(), {"--threads", threads});
    return run(args).code;
  };
  ASSERT_EQ(with_out(a, "1"), 0);
  ASSERT_EQ(with_out(b, "4"), 0);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a), slurp(b));

  const auto c = run({"keyrate", "--sections", "1..4", "--distances", "0:300:10"});
  const auto d = run({"keyrate", "--sections", "1..4", "--distances", "0:300:10"});
  EXPECT_EQ(c.out, d.out);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}
