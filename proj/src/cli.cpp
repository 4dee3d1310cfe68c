#include "confscore/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "confscore/error.hpp"
#include "confscore/kernels.hpp"

namespace confscore::cli {

namespace {

using nlohmann::ordered_json;

std::string number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : ""; }

ordered_json json_number(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json json_number(const std::optional<double>& v) {
  return v ? json_number(*v) : ordered_json(nullptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::vector<const ReportRow*> ordered_rows(const RankingReport& report, bool rank_order) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows) rows.push_back(&r);
  if (!rank_order)
    std::sort(rows.begin(), rows.end(),
              [](const ReportRow* a, const ReportRow* b) { return a->id < b->id; });
  return rows;
}

ordered_json wald_json(const std::optional<WaldResult>& w) {
  if (!w) return nullptr;
  ordered_json j;
  j["se"] = json_number(w->se);
  j["ci_lo"] = json_number(w->ci_lo);
  j["ci_hi"] = json_number(w->ci_hi);
  j["p_value"] = json_number(w->p_value);
  return j;
}

std::string rule_name(const SelectionRule& rule) {
  switch (rule.kind) {
    case SelectionRule::Kind::top_k: return "top_k";
    case SelectionRule::Kind::alpha_test: return "alpha_test";
    case SelectionRule::Kind::none: break;
  }
  return "none";
}

ordered_json config_json(const RunConfig& c) {
  // thread count and wall time live in the manifest so reports stay
  // byte-identical across machines and thread counts
  ordered_json j;
  j["subcommand"] = c.subcommand;
  if (!c.data_path.empty()) j["data"] = c.data_path;
  if (!c.groups_path.empty()) j["groups"] = c.groups_path;
  if (!c.scenario_path.empty()) j["scenario"] = c.scenario_path;
  if (c.subcommand != "simulate") {
    j["outcome"] = c.outcome_column;
    j["exposure"] = c.exposure_column;
    j["outcome_kind"] = outcome_kind_name(c.outcome_kind);
  }
  j["estimator"] = estimator_kind_name(c.estimator);
  j["score"] = score_kind_name(c.score_kind);
  j["degree"] = c.degree;
  j["interactions"] = c.interactions;
  j["saturated"] = c.saturated;
  j["compose_tau"] = c.compose_tau;
  j["log_scale_psi"] = c.log_scale_psi;
  j["alpha"] = c.alpha;
  j["top_k"] = c.top_k ? ordered_json(*c.top_k) : ordered_json(nullptr);
  j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json(nullptr);
  if (c.subcommand == "simulate") {
    j["replicates"] = c.replicates ? ordered_json(*c.replicates) : ordered_json(nullptr);
    j["oracle_mc"] = c.oracle_mc;
  }
  j["format"] = c.format == Format::csv ? "csv" : "json";
  return j;
}

PipelineOptions pipeline_options(const RunConfig& c) {
  PipelineOptions o;
  o.estimator = c.estimator;
  o.basis.degree = c.degree;
  o.basis.interactions = c.interactions;
  o.saturated = c.saturated;
  o.dr.compose_tau = c.compose_tau;
  o.alpha = c.alpha;
  o.log_scale_psi = c.log_scale_psi;
  o.threads = c.threads;
  return o;
}

void validate(const RunConfig& c) {
  BasisConfig{c.degree, true, c.interactions}.validate();
  if (!(c.alpha > 0.0 && c.alpha < 1.0))
    throw Error(ErrorKind::config, "--alpha must lie in (0, 1)");
  if (c.top_k && c.alpha_given && c.subcommand == "rank")
    throw Error(ErrorKind::config,
                "--top-k and --alpha are mutually exclusive selection rules");
  if (c.threads < 1) throw Error(ErrorKind::config, "--threads must be at least 1");
  if (c.subcommand != "simulate" && c.data_path.empty())
    throw Error(ErrorKind::config, "--data is required");
  if (c.subcommand == "simulate") {
    if (c.scenario_path.empty()) throw Error(ErrorKind::config, "--scenario is required");
    if (c.out_path.empty()) throw Error(ErrorKind::config, "--out is required for simulate");
  }
}

struct Output {
  std::string path;
  std::string content;
};

ordered_json manifest(const RunConfig& c, double wall_seconds,
                      const std::vector<std::string>& files) {
  ordered_json j;
  j["schema"] = "confscore.manifest/1";
  j["version"] = kVersion;
  j["config"] = config_json(c);
  j["threads"] = c.threads;
  j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json(nullptr);
  j["wall_time_seconds"] = wall_seconds;
  j["isa"] = kernels::isa_name(kernels::active_isa());
  j["compiler"] = __VERSION__;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  j["outputs"] = files;
  return j;
}

int cmd_report(const RunConfig& c, std::ostream& out,
               std::chrono::steady_clock::time_point start) {
  const Dataset data = load_csv(c.data_path, {c.outcome_column, c.exposure_column, c.outcome_kind});
  const PipelineOptions options = pipeline_options(c);
  std::vector<Target> targets = c.groups_path.empty() ? covariate_targets(data)
                                                      : load_groups(c.groups_path, data).groups;
  SelectionRule rule;
  if (c.subcommand == "rank")
    rule = c.top_k ? SelectionRule::top(*c.top_k) : SelectionRule::test(c.alpha);
  const RankingReport report = rank_targets(data, targets, options, c.score_kind, rule);

  const bool rank_order = c.subcommand == "rank";
  const std::string content = c.format == Format::csv
                                  ? render_report_csv(report, rank_order)
                                  : render_report_json(report, c, rank_order);
  if (c.out_path.empty()) {
    out << content;
    return 0;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_atomic(c.out_path, content);
  write_atomic(c.out_path + ".manifest.json",
               manifest(c, wall, {c.out_path}).dump(2) + "\n");
  return 0;
}

int cmd_simulate(const RunConfig& c, std::chrono::steady_clock::time_point start) {
  SimulationConfig sc;
  sc.scenario = parse_scenario(read_file(c.scenario_path));
  if (c.seed) sc.scenario.seed = *c.seed;
  if (c.replicates) sc.scenario.replicates = *c.replicates;
  sc.scenario.validate();
  sc.estimator = c.estimator;
  sc.score_kind = c.score_kind;
  sc.basis = BasisConfig{c.degree, true, c.interactions};
  sc.alpha = c.alpha;
  sc.rule = c.top_k ? SelectionRule::top(*c.top_k) : SelectionRule::test(c.alpha);
  if (!has_influence(c.estimator) && !c.top_k) sc.rule = {};
  sc.oracle_mc_size = c.oracle_mc;
  sc.threads = c.threads;
  const SimResult res = run_simulation(sc);
  const std::size_t p = sc.scenario.p;

  std::ostringstream rep;
  rep << "replicate,id,name,label,phi,se_phi,ci_lo,ci_hi,selected,covered,oracle_phi\n";
  for (const auto& r : res.replicates) {
    for (std::size_t j = 0; j < p; ++j) {
      rep << r.replicate << ',' << j + 1 << ",C" << j + 1 << ',' << label_name(res.labels[j])
          << ',' << number(r.phi[j]) << ',' << (r.se_phi.empty() ? "" : number(r.se_phi[j]))
          << ',' << (r.ci_lo.empty() ? "" : number(r.ci_lo[j])) << ','
          << (r.ci_hi.empty() ? "" : number(r.ci_hi[j])) << ',' << int(r.selected[j]) << ','
          << (r.covered.empty() ? "" : std::to_string(int(r.covered[j]))) << ','
          << (res.oracle.empty() ? "" : number(res.oracle[j].phi)) << '\n';
    }
  }

  std::ostringstream roc;
  roc << "k,sensitivity,false_positive_rate\n";
  for (const auto& pt : res.mean_roc)
    roc << pt.k << ',' << number(pt.sensitivity) << ',' << number(pt.false_positive_rate) << '\n';

  ordered_json sum;
  sum["schema"] = kSimulationSchema;
  sum["version"] = kVersion;
  sum["config"] = config_json(c);
  sum["scenario"] = ordered_json::parse(scenario_to_json(sc.scenario));
  const auto ms = [](const MeanSe& m) {
    ordered_json j;
    j["mean"] = json_number(m.mean);
    j["se"] = json_number(m.se);
    return j;
  };
  sum["sensitivity"] = ms(res.sensitivity);
  sum["specificity"] = ms(res.specificity);
  sum["auc"] = ms(res.auc);
  sum["confounders_on_top_rate"] = json_number(res.confounders_on_top_rate);
  ordered_json covs = ordered_json::array();
  for (std::size_t j = 0; j < p; ++j) {
    ordered_json row;
    row["id"] = j + 1;
    row["name"] = "C" + std::to_string(j + 1);
    row["label"] = label_name(res.labels[j]);
    row["estimate"] = ms(res.phi[j]);
    if (!res.oracle.empty()) {
      row["oracle_phi"] = json_number(res.oracle[j].phi);
      row["oracle_mc_se"] = json_number(res.oracle[j].mc_se);
    }
    row["coverage"] = res.coverage.empty() ? ordered_json(nullptr) : ms(res.coverage[j]);
    covs.push_back(row);
  }
  sum["covariates"] = covs;
  ordered_json pos = ordered_json::array();
  for (const auto& r : res.replicates) {
    ordered_json row;
    row["replicate"] = r.replicate;
    row["min_propensity"] = json_number(r.min_propensity);
    row["max_propensity"] = json_number(r.max_propensity);
    row["extreme_share"] = json_number(r.extreme_propensity_share);
    pos.push_back(row);
  }
  sum["positivity"] = pos;

  const std::vector<Output> outputs = {
      {c.out_path + ".replicates.csv", rep.str()},
      {c.out_path + ".summary.json", sum.dump(2) + "\n"},
      {c.out_path + ".roc.csv", roc.str()},
  };
  std::vector<std::string> names;
  for (const auto& o : outputs) {
    write_atomic(o.path, o.content);
    names.push_back(o.path);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_atomic(c.out_path + ".manifest.json", manifest(c, wall, names).dump(2) + "\n");
  return 0;
}

void add_common(CLI::App* sub, RunConfig& c, std::string& outcome_kind, std::string& estimator,
                std::string& score, std::string& format) {
  sub->add_option("--outcome", c.outcome_column, "Outcome column name");
  sub->add_option("--exposure", c.exposure_column, "Binary exposure column name");
  sub->add_option("--estimator", estimator, "plugin-om | plugin-ps | dr | tmle");
  sub->add_option("--score", score, "difference | ratio");
  sub->add_option("--degree", c.degree, "Polynomial basis degree (1-12)");
  sub->add_flag("--interactions", c.interactions, "Pairwise products in group bases");
  sub->add_option("--alpha", c.alpha, "Significance level; CIs have level 1 - alpha")
      ->each([&c](const std::string&) { c.alpha_given = true; });
  sub->add_option("--top-k", c.top_k, "Select the K highest-ranked targets");
  sub->add_option("--outcome-kind", outcome_kind, "continuous | bounded");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--threads", c.threads, "Worker threads");
  sub->add_option("--out", c.out_path, "Output path");
  sub->add_option("--format", format, "json | csv");
  sub->add_flag("--log-psi", c.log_scale_psi, "Ratio-score inference on the log scale");
}

}  // namespace

std::string render_report_csv(const RankingReport& report, bool rank_order) {
  std::ostringstream s;
  s << "id,name,theta,phi,psi,se_phi,ci_lo,ci_hi,p_value,rank,selected\n";
  for (const ReportRow* r : ordered_rows(report, rank_order)) {
    s << r->id + 1 << ',' << csv_field(r->name) << ',' << number(r->theta) << ','
      << number(r->phi) << ',' << number(r->psi) << ',' << number(r->se_phi) << ','
      << (r->test ? number(r->test->ci_lo) : "") << ','
      << (r->test ? number(r->test->ci_hi) : "") << ','
      << (r->test ? number(r->test->p_value) : "") << ',' << r->rank << ','
      << (r->selected ? "true" : "false") << '\n';
  }
  return s.str();
}

std::string render_report_json(const RankingReport& report, const RunConfig& config,
                               bool rank_order) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["version"] = kVersion;
  j["config"] = config_json(config);
  j["estimator"] = estimator_kind_name(report.estimator);
  j["score"] = score_kind_name(report.score_kind);
  ordered_json rule;
  rule["kind"] = rule_name(report.rule);
  if (report.rule.kind == SelectionRule::Kind::top_k) rule["k"] = report.rule.k;
  if (report.rule.kind == SelectionRule::Kind::alpha_test) rule["alpha"] = report.rule.alpha;
  j["selection_rule"] = rule;
  ordered_json results = ordered_json::array();
  for (const ReportRow* r : ordered_rows(report, rank_order)) {
    ordered_json row;
    row["id"] = r->id + 1;
    row["name"] = r->name;
    row["theta"] = json_number(r->theta);
    row["mu_o"] = json_number(r->mu_o);
    row["mu_e"] = json_number(r->mu_e);
    row["phi"] = json_number(r->phi);
    row["psi"] = json_number(r->psi);
    row["se_phi"] = json_number(r->se_phi);
    row["ci_lo"] = r->test ? json_number(r->test->ci_lo) : ordered_json(nullptr);
    row["ci_hi"] = r->test ? json_number(r->test->ci_hi) : ordered_json(nullptr);
    row["p_value"] = r->test ? json_number(r->test->p_value) : ordered_json(nullptr);
    row["rank"] = r->rank;
    row["selected"] = r->selected;
    if (r->inference) {
      row["inference_phi"] = wald_json(r->inference->phi);
      row["inference_psi"] = wald_json(r->inference->psi);
    }
    row["constant"] = r->constant;
    if (report.estimator == EstimatorKind::tmle && !r->constant) {
      ordered_json t;
      t["iterations"] = r->tmle.iterations;
      t["converged"] = r->tmle.converged;
      t["eps1"] = json_number(r->tmle.eps1);
      t["eps2"] = json_number(r->tmle.eps2);
      row["tmle"] = t;
    }
    row["warnings"] = r->warnings;
    results.push_back(row);
  }
  j["results"] = results;
  return j.dump(2) + "\n";
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::io, "write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot move output into '" + path + "'");
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig c;
  c.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string outcome_kind = "continuous", estimator = "tmle", score = "difference",
              format = "json";

  CLI::App app{"Confounder ranking by difference and ratio scores", "confscore"};
  app.require_subcommand(1);
  auto* score_cmd = app.add_subcommand("score", "Estimate scores for every covariate or group");
  auto* rank_cmd = app.add_subcommand("rank", "Rank and select covariates or groups");
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation scenario");
  for (auto* sub : {score_cmd, rank_cmd}) {
    sub->add_option("--data", c.data_path, "Input CSV with header row");
    sub->add_option("--groups", c.groups_path, "JSON object {group: [columns]}");
    sub->add_flag("--saturated", c.saturated, "Per-level means for discrete covariates");
    sub->add_flag("--compose-tau", c.compose_tau, "DR: build tau from pi and Q");
  }
  sim_cmd->add_option("--scenario", c.scenario_path, "Scenario JSON file");
  sim_cmd->add_option("--replicates", c.replicates, "Override the scenario replicate count");
  sim_cmd->add_option("--oracle-mc", c.oracle_mc, "Monte Carlo draws per oracle value");
  for (auto* sub : {score_cmd, rank_cmd, sim_cmd})
    add_common(sub, c, outcome_kind, estimator, score, format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "kind=config message=" << e.what() << "\n";
    return 2;
  }

  try {
    c.subcommand = app.get_subcommands().front()->get_name();
    c.outcome_kind = parse_outcome_kind(outcome_kind);
    c.estimator = parse_estimator_kind(estimator);
    c.score_kind = parse_score_kind(score);
    if (format == "csv") c.format = Format::csv;
    else if (format != "json") throw Error(ErrorKind::config, "--format must be json or csv");
    validate(c);
    if (c.subcommand == "simulate") return cmd_simulate(c, start);
    return cmd_report(c, out, start);
  } catch (const Error& e) {
    err << e.reason() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "kind=internal message=" << msg << "\n";
    return 1;
  }
}

}  // namespace confscore::cli
