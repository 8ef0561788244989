#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "isocrit/cli.hpp"

using namespace isocrit;
using namespace isocrit::cli;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "isocrit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / ("isocrit-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto path = scratch() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

int exit_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const CliError& e) {
    return e.exit_code();
  }
  return 0;
}

/// Synthetic adult sample: ages 21..60, outcome rising with age.
std::string age_csv(std::uint64_t seed, int rows) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> age(21, 60);
  std::uniform_real_distribution<double> weight(1.0, 6.0);
  std::normal_distribution<double> noise(0.0, 0.6);
  std::ostringstream csv;
  csv << "age,chol,wt\n";
  for (int i = 0; i < rows; ++i) {
    const int a = age(rng);
    csv << a << "," << 4.2 + 0.03 * a + noise(rng) << "," << weight(rng) << "\n";
  }
  return csv.str();
}

EstimateOptions age_options() {
  EstimateOptions opt;
  opt.value_col = "chol";
  opt.weight_col = "wt";
  opt.bin_col = "age";
  for (int e = 21; e <= 61; e += 4) opt.bin_edges.push_back(e);
  opt.conditional_draws = 2000;
  return opt;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("CSV reading") {
    const auto t = parse("\xEF\xBB\xBFname,value\r\n\"a, b\",1\r\n\"say \"\"hi\"\"\",2\r\n\"two\nlines\",3\n");
    REQUIRE(t.header.size() == 2);
    CHECK(t.header[0] == "name");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][0] == "a, b");
    CHECK(t.rows[1][0] == "say \"hi\"");
    CHECK(t.rows[2][0] == "two\nlines");
    CHECK(t.rows[2][1] == "3");
    CHECK(t.column("value") == 1);
    CHECK(exit_code_of([&] { t.column("missing"); }) == kExitBadInput);
    CHECK(exit_code_of([] { parse("a,b\n1,2,3\n"); }) == kExitBadInput);
    CHECK(exit_code_of([] { parse(""); }) == kExitBadInput);
    CHECK(exit_code_of([] { parse("a,b\n\"open,1\n"); }) == kExitBadInput);
  }

  TEST_CASE("two rows in one domain give the weighted mean") {
    const auto t = parse("y,w,d\n2,1,x\n4,3,x\n");
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    const auto r = analyze(t, opt);
    REQUIRE(r.unconstrained.size() == 1);
    CHECK(r.unconstrained[0] == doctest::Approx(3.5));
    CHECK(r.constrained[0] == r.unconstrained[0]);
    CHECK(r.n_hat[0] == doctest::Approx(4.0));
    CHECK(r.covariance_mode == "independent-approx");

    const auto census = analyze(parse("y,w,d\n2,1,x\n4,1,x\n"), opt);
    CHECK(census.unconstrained[0] == doctest::Approx(3.0));
    CHECK(census.ci_unconstrained[0].lower == census.ci_unconstrained[0].upper);
    bool flagged = false;
    for (const auto& f : census.flags) flagged |= f.find("degenerate interval") != std::string::npos;
    CHECK(flagged);
  }

  TEST_CASE("monotone toy data leaves the estimates alone") {
    const auto t = parse("y,w,d\n1,2,a\n1.5,3,a\n2,2,b\n2.6,4,b\n3,2,c\n3.2,5,c\n");
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    const auto r = analyze(t, opt);
    CHECK(r.constrained == r.unconstrained);
    CHECK(r.cic.cic_constrained == r.cic.cic_unconstrained);
    CHECK(r.cic.chosen == Choice::Constrained);
    CHECK(r.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(*r.wald.p_value == 1.0);
  }

  TEST_CASE("ten age bins") {
    const auto r = analyze(parse(age_csv(8, 600)), age_options());
    REQUIRE(r.labels.size() == 10);
    CHECK(r.labels.front() == "[21,25)");
    CHECK(r.labels.back() == "[57,61]");
    CHECK(r.rows_used == 600);
    for (std::size_t d = 0; d < 10; ++d) {
      CHECK(r.ci_unconstrained[d].upper >= r.ci_unconstrained[d].lower);
      CHECK(r.ci_constrained[d].upper >= r.ci_constrained[d].lower);
      CHECK(r.ci_constrained[d].upper - r.constrained[d] ==
            doctest::Approx(kNormalQuantile975 * r.se_constrained[d]));
      if (d > 0) CHECK(r.constrained[d] >= r.constrained[d - 1]);
    }
    const bool pooled = r.block.back() < 9;
    CHECK(pooled == (r.cic.sse_term > 0.0));
    CHECK(r.cic.cic_constrained ==
          doctest::Approx(r.cic.sse_term + 2.0 * r.cic.trace_constrained));
    CHECK(r.cic.cic_unconstrained == doctest::Approx(2.0 * r.cic.trace_unconstrained));
  }

  TEST_CASE("rows outside the bin edges are dropped and reported") {
    auto opt = age_options();
    opt.bin_edges = {30, 40, 50};
    const auto r = analyze(parse(age_csv(2, 400)), opt);
    CHECK(r.labels.size() == 2);
    CHECK(r.rows_used < r.rows_read);
    bool flagged = false;
    for (const auto& f : r.flags) flagged |= f.find("dropped") != std::string::npos;
    CHECK(flagged);
  }

  TEST_CASE("estimates CSV round-trips exactly") {
    const auto r = analyze(parse(age_csv(3, 500)), age_options());
    std::ostringstream out;
    write_estimates_csv(out, r);
    const auto back = parse(out.str());
    REQUIRE(back.rows.size() == r.labels.size());
    const auto col = [&](const char* name) { return back.column(name); };
    for (std::size_t d = 0; d < r.labels.size(); ++d) {
      const auto& row = back.rows[d];
      CHECK(row[col("domain")] == r.labels[d]);
      CHECK(std::stod(row[col("unconstrained")]) == r.unconstrained[d]);
      CHECK(std::stod(row[col("constrained")]) == r.constrained[d]);
      CHECK(std::stod(row[col("se_constrained")]) == r.se_constrained[d]);
      CHECK(std::stod(row[col("ci_lower_unconstrained")]) == r.ci_unconstrained[d].lower);
      CHECK(std::stod(row[col("ci_upper_constrained")]) == r.ci_constrained[d].upper);
      CHECK(std::stod(row[col("n_hat")]) == r.n_hat[d]);
    }
  }

  TEST_CASE("decreasing constraint mirrors the increasing fit") {
    const auto t = parse("y,w,d\n3,2,1\n3.4,2,1\n2.2,2,2\n3.1,3,2\n1.0,2,3\n1.9,2,3\n");
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    opt.decreasing = true;
    const auto down = analyze(t, opt);
    const auto flipped = analyze(parse("y,w,d\n-3,2,1\n-3.4,2,1\n-2.2,2,2\n-3.1,3,2\n-1.0,2,3\n-1.9,2,3\n"),
                                 [&] {
                                   auto o = opt;
                                   o.decreasing = false;
                                   return o;
                                 }());
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(down.constrained[d] == -flipped.constrained[d]);
      CHECK(down.se_constrained[d] == flipped.se_constrained[d]);
      if (d > 0) CHECK(down.constrained[d] <= down.constrained[d - 1]);
    }
    CHECK(down.cic.cic_constrained == flipped.cic.cic_constrained);
  }

  TEST_CASE("domain label ordering") {
    const auto t = parse("y,w,d\n1,2,10\n2,2,9\n3,2,2\n1,2,10\n2,2,9\n3,2,2\n");
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    CHECK(analyze(t, opt).labels == std::vector<std::string>{"2", "9", "10"});
    opt.domain_order = {"10", "9", "2"};
    const auto r = analyze(t, opt);
    CHECK(r.labels == opt.domain_order);
    CHECK(r.unconstrained == std::vector<double>{1.0, 2.0, 3.0});
    opt.domain_order = {"10", "9"};
    CHECK(exit_code_of([&] { analyze(t, opt); }) == kExitBadInput);
    opt.domain_order = {"10", "9", "2", "7"};
    CHECK(exit_code_of([&] { analyze(t, opt); }) == kExitEmptyDomain);
  }

  TEST_CASE("stratum column switches to exact stratified probabilities") {
    const auto t = parse(
        "y,w,d,h\n1,4,a,s1\n1.4,4,a,s1\n2,4,b,s1\n2.2,4,b,s1\n2.5,3,a,s2\n1.7,3,b,s2\n3,3,b,s2\n");
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    opt.stratum_col = "h";
    const auto r = analyze(t, opt);
    CHECK(r.covariance_mode == "stratified-srswor");
    const auto bad = parse("y,w,d,h\n1,4,a,s1\n1.4,5,a,s1\n2,4,b,s1\n");
    CHECK(exit_code_of([&] { analyze(bad, opt); }) == kExitBadInput);
  }

  TEST_CASE("bad inputs map to exit codes") {
    EstimateOptions opt;
    opt.value_col = "y";
    opt.weight_col = "w";
    opt.domain_col = "d";
    CHECK(exit_code_of([&] { analyze(parse("y,w,d\nabc,1,a\n"), opt); }) == kExitBadInput);
    CHECK(exit_code_of([&] { analyze(parse("y,w,d\n1,0.5,a\n"), opt); }) == kExitBadInput);
    CHECK(exit_code_of([&] { analyze(parse("y,w\n1,2\n"), opt); }) == kExitBadInput);

    const auto csv = write_file("gap.csv", "x,y,w\n0.5,1,2\n1.5,2,2\n0.2,1.5,2\n1.1,2.5,3\n");
    const auto gap = run_cli({"estimate", csv.string(), "--value-col", "y", "--weight-col", "w",
                              "--bin-col", "x", "--bin-edges", "0,1,2,3"});
    CHECK(gap.code == kExitEmptyDomain);
    CHECK(gap.err.find("error") != std::string::npos);

    CHECK(run_cli({"estimate", (scratch() / "absent.csv").string(), "--value-col", "y",
                   "--weight-col", "w", "--domain-col", "d"})
              .code == kExitBadInput);
    CHECK(run_cli({"estimate", csv.string(), "--value-col", "nope", "--weight-col", "w",
                   "--bin-col", "x", "--bin-edges", "0,1,2"})
              .code == kExitBadInput);
    CHECK(run_cli({"frobnicate"}).code == kExitBadInput);
    CHECK(run_cli({"table", "--table", "12"}).code == kExitBadInput);
    CHECK(run_cli({"simulate", "--scenario", "table99"}).code == kExitBadInput);
  }

  TEST_CASE("estimate command writes the JSON report and CSV") {
    const auto csv = write_file("ages.csv", age_csv(5, 300));
    const auto report = scratch() / "report.json";
    const auto table = scratch() / "estimates.csv";
    std::vector<std::string> args{"estimate", csv.string(), "--value-col", "chol",
                                  "--weight-col", "wt", "--bin-col", "age", "--bin-edges",
                                  "21,25,29,33,37,41,45,49,53,57,61", "--conditional-draws",
                                  "1000", "--out", report.string(), "--csv-out", table.string()};
    const auto result = run_cli(args);
    REQUIRE(result.code == kExitOk);
    const auto j = read_json(report);
    CHECK(j["schema"] == kSchemaVersion);
    CHECK(j["estimates"].size() == 10);
    CHECK(j["ci"].size() == 10);
    CHECK(j["covariance_mode"] == "independent-approx");
    CHECK(j["cic"].contains("chosen"));
    CHECK(j["cic"]["trace"].contains("constrained"));
    CHECK(j["tests"]["wald"].contains("p_value"));
    CHECK(j["tests"]["conditional"].contains("p0"));
    CHECK(j["flags"].is_array());
    CHECK(fs::file_size(table) > 0);
    const auto again = run_cli(args);
    CHECK(read_json(report) == j);
  }

  TEST_CASE("scenario JSON round-trip") {
    auto config = simlab::table_preset(5).cells.back().config;
    const auto j = to_json(config);
    CHECK(to_json(scenario_from_json(j)) == j);
    auto stratified = simlab::table_preset(9).cells.front().config;
    CHECK(to_json(scenario_from_json(to_json(stratified))) == to_json(stratified));
    auto extra = j;
    extra["colour"] = "blue";
    CHECK(exit_code_of([&] { scenario_from_json(extra); }) == kExitBadInput);
    auto invalid = j;
    invalid["reps"] = 0;
    CHECK(exit_code_of([&] { scenario_from_json(invalid); }) == kExitBadInput);

    const auto path = write_file("scenario.json", to_json(stratified).dump());
    CHECK(to_json(resolve_scenario(path.string())) == to_json(stratified));
    CHECK(resolve_scenario("table5/Monotone/r=2").name == "table5/Monotone/r=2");
    CHECK(resolve_scenario("table1").name == simlab::table_preset(1).cells.front().config.name);
  }

  TEST_CASE("simulate is deterministic apart from timing") {
    const auto a = scratch() / "sim-a.json";
    const auto b = scratch() / "sim-b.json";
    REQUIRE(run_cli({"simulate", "--scenario", "table1", "--reps", "30", "--seed", "5", "--out",
                     a.string()})
                .code == kExitOk);
    REQUIRE(run_cli({"simulate", "--scenario", "table1", "--reps", "30", "--seed", "5", "--out",
                     b.string()})
                .code == kExitOk);
    auto ja = read_json(a);
    auto jb = read_json(b);
    CHECK(ja.contains("timing"));
    ja.erase("timing");
    jb.erase("timing");
    CHECK(ja.dump() == jb.dump());
    CHECK(ja["config"]["reps"] == 30);
    CHECK(ja["config"]["seed"] == 5);
    CHECK(ja["summary"]["reps_used"] == 30);
  }

  TEST_CASE("a one-replicate simulation") {
    const auto path = scratch() / "one.json";
    REQUIRE(run_cli({"simulate", "--scenario", "table3", "--reps", "1", "--out", path.string()})
                .code == kExitOk);
    const double p = read_json(path)["summary"]["proportions"]["cic"]["proportion_unconstrained"];
    CHECK((p == 0.0 || p == 1.0));
  }

  TEST_CASE("table command") {
    const auto path = scratch() / "table1.json";
    const auto t1 = run_cli({"table", "--table", "1", "--scale", "desk", "--reps", "20", "--out",
                             path.string()});
    REQUIRE(t1.code == kExitOk);
    const auto j = read_json(path);
    CHECK(j["cells"].size() == 9);
    CHECK(j["scale"] == "desk");
    CHECK(j["cells"][0]["summary"]["reps_used"] == 20);

    const auto t5 = run_cli({"table", "--table", "5", "--reps", "30"});
    REQUIRE(t5.code == kExitOk);
    bool starred = false;
    std::istringstream lines(t5.out);
    for (std::string line; std::getline(lines, line);) {
      if (line.find("r=2") != std::string::npos && line.find("Monotone") == std::string::npos &&
          line.find('*') != std::string::npos) {
        starred = true;
      }
    }
    CHECK(starred);
  }
}
