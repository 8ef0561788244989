#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "isocrit/cli.hpp"
#include "isocrit/design_cov.hpp"
#include "isocrit/error.hpp"
#include "isocrit/random.hpp"

namespace isocrit::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double require_number(const std::string& text, const std::string& column, std::size_t row) {
  const auto v = parse_number(text);
  if (!v) {
    throw CliError(kExitBadInput, "row " + std::to_string(row + 1) + ": column '" + column +
                                      "' is not a number: '" + text + "'");
  }
  return *v;
}

std::string edge_label(double a, double b, bool closed) {
  return fmt::format("[{:g},{:g}{}", a, b, closed ? "]" : ")");
}

struct Ingested {
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<int> domains;
  std::vector<std::string> strata;
  std::vector<std::string> labels;
  std::size_t dropped = 0;
};

Ingested ingest(const CsvTable& table, const EstimateOptions& opt) {
  if (opt.domain_col.has_value() == opt.bin_col.has_value()) {
    throw CliError(kExitBadInput, "give exactly one of --domain-col or --bin-col");
  }
  const std::size_t vcol = table.column(opt.value_col);
  const std::size_t wcol = table.column(opt.weight_col);
  const std::size_t dcol = table.column(opt.domain_col ? *opt.domain_col : *opt.bin_col);
  const std::optional<std::size_t> scol =
      opt.stratum_col ? std::optional<std::size_t>(table.column(*opt.stratum_col)) : std::nullopt;

  if (opt.bin_col) {
    if (opt.bin_edges.size() < 2) {
      throw CliError(kExitBadInput, "--bin-edges needs at least two edges");
    }
    for (std::size_t i = 1; i < opt.bin_edges.size(); ++i) {
      if (!(opt.bin_edges[i] > opt.bin_edges[i - 1])) {
        throw CliError(kExitBadInput, "--bin-edges must be strictly increasing");
      }
    }
  }

  Ingested out;
  std::vector<std::string> raw_labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const double y = require_number(row[vcol], opt.value_col, r);
    const double w = require_number(row[wcol], opt.weight_col, r);
    if (!(w >= 1.0)) {
      throw CliError(kExitBadInput, "row " + std::to_string(r + 1) +
                                        ": survey weight must be at least 1 (weight = 1/pi)");
    }
    int domain = -1;
    std::string label;
    if (opt.bin_col) {
      const double x = require_number(row[dcol], *opt.bin_col, r);
      const auto& e = opt.bin_edges;
      if (x < e.front() || x > e.back()) {
        ++out.dropped;
        continue;
      }
      const auto it = std::upper_bound(e.begin(), e.end(), x);
      domain = static_cast<int>(std::min<std::ptrdiff_t>(it - e.begin() - 1,
                                                         static_cast<std::ptrdiff_t>(e.size()) - 2));
    } else {
      label = std::string(trim(row[dcol]));
      if (label.empty()) {
        throw CliError(kExitBadInput, "row " + std::to_string(r + 1) + ": empty domain label");
      }
    }
    out.values.push_back(y);
    out.weights.push_back(w);
    out.domains.push_back(domain);
    raw_labels.push_back(std::move(label));
    if (scol) out.strata.emplace_back(trim(row[*scol]));
  }

  if (opt.bin_col) {
    const auto& e = opt.bin_edges;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      out.labels.push_back(edge_label(e[i], e[i + 1], i + 2 == e.size()));
    }
  } else if (!opt.domain_order.empty()) {
    out.labels = opt.domain_order;
  } else {
    const std::set<std::string> unique(raw_labels.begin(), raw_labels.end());
    out.labels.assign(unique.begin(), unique.end());
    const bool numeric = std::all_of(out.labels.begin(), out.labels.end(),
                                     [](const std::string& s) { return parse_number(s).has_value(); });
    if (numeric) {
      std::stable_sort(out.labels.begin(), out.labels.end(),
                       [](const std::string& a, const std::string& b) {
                         return *parse_number(a) < *parse_number(b);
                       });
    }
  }
  if (!opt.bin_col) {
    std::map<std::string, int> index;
    for (std::size_t d = 0; d < out.labels.size(); ++d) {
      if (!index.emplace(out.labels[d], static_cast<int>(d)).second) {
        throw CliError(kExitBadInput, "domain '" + out.labels[d] + "' listed twice");
      }
    }
    for (std::size_t k = 0; k < raw_labels.size(); ++k) {
      const auto it = index.find(raw_labels[k]);
      if (it == index.end()) {
        throw CliError(kExitBadInput, "domain '" + raw_labels[k] + "' is not in --domain-order");
      }
      out.domains[k] = it->second;
    }
  }

  std::vector<std::size_t> per_domain(out.labels.size(), 0);
  for (int d : out.domains) ++per_domain[d];
  for (std::size_t d = 0; d < per_domain.size(); ++d) {
    if (per_domain[d] == 0) {
      throw CliError(kExitEmptyDomain, "domain '" + out.labels[d] + "' has no observations");
    }
  }
  return out;
}

DesignSample build_sample(const Ingested& in, std::string& mode) {
  const int D = static_cast<int>(in.labels.size());
  std::vector<SampledUnit> units(in.values.size());
  for (std::size_t k = 0; k < units.size(); ++k) {
    units[k] = {in.values[k], 1.0 / in.weights[k], in.domains[k], 0, k};
  }
  if (in.strata.empty()) {
    mode = "independent-approx";
    return DesignSample(std::move(units), D, DesignKind::IndependentApprox,
                        std::make_shared<IndependentJoint>());
  }

  std::map<std::string, int> stratum_index;
  for (const auto& s : in.strata) stratum_index.emplace(s, static_cast<int>(stratum_index.size()));
  const std::size_t H = stratum_index.size();
  std::vector<double> n_h(H, 0.0);
  std::vector<double> N_h(H, 0.0);
  std::vector<double> w_h(H, 0.0);
  for (std::size_t k = 0; k < units.size(); ++k) {
    const int h = stratum_index.at(in.strata[k]);
    units[k].group = h;
    const double w = in.weights[k];
    if (n_h[h] == 0.0) {
      w_h[h] = w;
    } else if (std::abs(w - w_h[h]) > 1e-9 * w_h[h]) {
      throw CliError(kExitBadInput, "stratum '" + in.strata[k] +
                                        "' has unequal weights; stratified SRSWOR needs one weight "
                                        "per stratum");
    }
    n_h[h] += 1.0;
    N_h[h] += w;
  }
  for (auto& u : units) u.pi = n_h[u.group] / N_h[u.group];
  mode = "stratified-srswor";
  return DesignSample(std::move(units), D, DesignKind::StratifiedSrswor,
                      std::make_shared<StratifiedSrsworJoint>(std::move(n_h), std::move(N_h)));
}

}  // namespace

AnalysisReport analyze(const CsvTable& table, const EstimateOptions& opt) {
  auto in = ingest(table, opt);
  if (opt.decreasing) {
    for (double& y : in.values) y = -y;
  }
  AnalysisReport rep;
  rep.rows_read = table.rows.size();
  rep.rows_used = in.values.size();
  rep.labels = in.labels;
  const auto sample = build_sample(in, rep.covariance_mode);
  const int D = sample.num_domains();

  SelectionResult sel;
  try {
    sel = select_hajek(sample, opt.penalty);
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyDomain || e.code() == Errc::EmptyBlock) {
      throw CliError(kExitEmptyDomain, e.what());
    }
    throw CliError(kExitBadInput, e.what());
  }

  const auto counts = domain_counts(sample);
  rep.n = counts.n;
  rep.n_hat = counts.n_hat;
  rep.unconstrained = sel.unconstrained.means;
  rep.constrained = sel.constrained.theta;
  rep.cic = sel.report;

  const auto& partition = sel.constrained.partition;
  const LinearizedCovariance engine(sample);
  rep.block.resize(D);
  rep.se_unconstrained.resize(D);
  rep.se_constrained.resize(D);
  for (int d = 0; d < D; ++d) {
    rep.block[d] = partition.block_of(d);
    const auto& block = partition.block_containing(d);
    rep.se_unconstrained[d] = std::sqrt(std::max(sel.cov_y_y(d, d), 0.0));
    rep.se_constrained[d] = std::sqrt(std::max(engine.ac_hat(block, block), 0.0));
  }

  rep.wald = wald_test(rep.unconstrained, rep.constrained, partition, sel.cov_y_y);
  rep.conditional =
      conditional_test(rep.unconstrained, rep.constrained, partition, sel.cov_y_y,
                       opt.conditional_draws, derive_seed(opt.seed, {kConditionalStream, 0}));

  if (opt.decreasing) {
    for (auto* v : {&rep.unconstrained, &rep.constrained}) {
      for (double& x : *v) x = -x;
    }
  }
  for (int d = 0; d < D; ++d) {
    const double hu = kNormalQuantile975 * rep.se_unconstrained[d];
    const double hc = kNormalQuantile975 * rep.se_constrained[d];
    rep.ci_unconstrained.push_back({rep.unconstrained[d] - hu, rep.unconstrained[d] + hu});
    rep.ci_constrained.push_back({rep.constrained[d] - hc, rep.constrained[d] + hc});
  }

  if (rep.covariance_mode == "independent-approx") {
    rep.flags.push_back(
        "independent-approx: joint inclusion probabilities approximated by pi_k pi_l");
  }
  if (opt.decreasing) rep.flags.push_back("decreasing: nonincreasing constraint via negation");
  if (in.dropped > 0) {
    rep.flags.push_back(fmt::format("dropped {} rows outside the bin edges", in.dropped));
  }
  for (int d : sel.single_unit_domains) {
    rep.flags.push_back(fmt::format("single-unit block: domain '{}' has zero estimated variance",
                                    rep.labels[d]));
  }
  for (int d = 0; d < D; ++d) {
    if (rep.se_unconstrained[d] == 0.0 || rep.se_constrained[d] == 0.0) {
      rep.flags.push_back(
          fmt::format("degenerate interval: zero estimated variance for domain '{}'", rep.labels[d]));
    }
  }
  if (!rep.wald.available()) {
    rep.flags.push_back("tests unavailable: estimated covariance is singular");
  }
  for (int d = 0; d < D; ++d) {
    if (partition.block_containing(d).size() > 1 &&
        rep.se_constrained[d] > rep.se_unconstrained[d]) {
      rep.flags.push_back(fmt::format(
          "constrained interval wider than unconstrained for domain '{}'", rep.labels[d]));
    }
  }
  return rep;
}

namespace {

nlohmann::json test_json(const TestResult& t) {
  nlohmann::json j;
  j["q"] = t.q;
  j["df"] = t.df;
  j["blocks"] = t.blocks;
  j["available"] = t.available();
  j["p_value"] = t.p_value ? nlohmann::json(*t.p_value) : nlohmann::json(nullptr);
  if (t.p0) j["p0"] = *t.p0;
  return j;
}

}  // namespace

nlohmann::json to_json(const AnalysisReport& rep, const EstimateOptions& opt) {
  nlohmann::json config;
  config["value_col"] = opt.value_col;
  config["weight_col"] = opt.weight_col;
  if (opt.domain_col) config["domain_col"] = *opt.domain_col;
  if (opt.bin_col) {
    config["bin_col"] = *opt.bin_col;
    config["bin_edges"] = opt.bin_edges;
  }
  if (opt.stratum_col) config["stratum_col"] = *opt.stratum_col;
  config["decreasing"] = opt.decreasing;
  config["penalty"] = opt.penalty;
  config["seed"] = opt.seed;
  config["conditional_draws"] = opt.conditional_draws;
  config["level"] = opt.level;
  config["rows_read"] = rep.rows_read;
  config["rows_used"] = rep.rows_used;

  nlohmann::json estimates = nlohmann::json::array();
  nlohmann::json ci = nlohmann::json::array();
  for (std::size_t d = 0; d < rep.labels.size(); ++d) {
    estimates.push_back({{"domain", rep.labels[d]},
                         {"n", rep.n[d]},
                         {"n_hat", rep.n_hat[d]},
                         {"unconstrained", rep.unconstrained[d]},
                         {"constrained", rep.constrained[d]},
                         {"block", rep.block[d]},
                         {"se_unconstrained", rep.se_unconstrained[d]},
                         {"se_constrained", rep.se_constrained[d]}});
    ci.push_back({{"domain", rep.labels[d]},
                  {"unconstrained", {rep.ci_unconstrained[d].lower, rep.ci_unconstrained[d].upper}},
                  {"constrained", {rep.ci_constrained[d].lower, rep.ci_constrained[d].upper}}});
  }
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["config"] = config;
  j["covariance_mode"] = rep.covariance_mode;
  j["estimates"] = estimates;
  j["ci"] = ci;
  j["cic"] = {{"sse", rep.cic.sse_term},
              {"trace",
               {{"constrained", rep.cic.trace_constrained},
                {"unconstrained", rep.cic.trace_unconstrained}}},
              {"constrained", rep.cic.cic_constrained},
              {"unconstrained", rep.cic.cic_unconstrained},
              {"penalty", rep.cic.penalty},
              {"chosen", std::string(to_string(rep.cic.chosen))}};
  j["tests"] = {{"level", opt.level},
                {"wald", test_json(rep.wald)},
                {"conditional", test_json(rep.conditional)}};
  j["flags"] = rep.flags;
  return j;
}

void write_estimates_csv(std::ostream& out, const AnalysisReport& rep) {
  out << "domain,n,n_hat,unconstrained,se_unconstrained,ci_lower_unconstrained,"
         "ci_upper_unconstrained,constrained,se_constrained,ci_lower_constrained,"
         "ci_upper_constrained,block\n";
  for (std::size_t d = 0; d < rep.labels.size(); ++d) {
    std::string label = rep.labels[d];
    if (label.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : label) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = quoted + "\"";
    }
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", label, rep.n[d], rep.n_hat[d],
                       rep.unconstrained[d], rep.se_unconstrained[d],
                       rep.ci_unconstrained[d].lower, rep.ci_unconstrained[d].upper,
                       rep.constrained[d], rep.se_constrained[d], rep.ci_constrained[d].lower,
                       rep.ci_constrained[d].upper, rep.block[d]);
  }
}

}  // namespace isocrit::cli
