#include "mnar/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "mnar/errors.hpp"

namespace mnar {

namespace fs = std::filesystem;

namespace {

double lambda_max(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

AssumptionReport run_audit(const ExperimentConfig& cfg) {
  const GaussianParams truth = cfg.truth();
  Rng rng = make_stream(cfg.seed, {2});
  AssumptionReport report;
  report.mc_samples = cfg.audit.mc_samples;
  std::optional<double> beta = cfg.audit.beta;
  if (const auto* sc = std::get_if<SelfCensoringModel>(&cfg.model)) {
    if (cfg.dimension >= 2) report.alpha_pair = audit_alpha_pair(truth, *sc, cfg.audit.mc_samples, rng);
  } else {
    if (!beta) beta = cfg.linear_threshold.beta;
  }
  if (beta) {
    report.beta = *beta;
    report.alpha_subset = audit_alpha_subset(truth, cfg.model, *beta, cfg.audit.mc_samples, rng);
  }
  if (const auto* lt = std::get_if<LinearThresholdModel>(&cfg.model); lt && !cfg.audit.anchor.empty()) {
    report.anchoring = audit_anchoring(truth, *lt, cfg.audit.anchor, cfg.audit.mc_samples, rng);
  }
  return report;
}

void log_audit(const AssumptionReport& r, std::ostream& log) {
  if (r.alpha_pair) log << "alpha_pair " << r.alpha_pair->value << " (se " << r.alpha_pair->std_error << ")\n";
  if (r.alpha_subset) {
    log << "alpha_subset " << r.alpha_subset->alpha << " at beta " << r.beta << " ("
        << r.alpha_subset->subsets_evaluated << (r.alpha_subset->exhaustive ? " subsets, exhaustive)" : " sampled subsets)")
        << "\n";
  }
  if (r.anchoring) {
    log << "gamma " << r.anchoring->gamma << " (binned, width " << r.anchoring->bin_width << ")\n";
  }
}

std::vector<Observation> load_observations(const ExperimentConfig& cfg) {
  const fs::path path = cfg.observations_path();
  if (!fs::exists(path)) throw IoError("observation file " + path.string() + " not found; run generate first");
  std::vector<Observation> obs = read_observations(path, cfg.dimension);
  if (obs.empty()) throw SchemaError(path.string() + ": no observations");
  return obs;
}

std::string trace_csv(const IterateTrace& trace) {
  std::string out = "iter,eta,grad_norm,dist_to_mu0\n";
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
    out += std::to_string(i + 1) + ',' + format_double(trace.etas[i]) + ',' + format_double(trace.grad_norms[i]) +
           ',' + format_double(trace.dist_to_mu0[i]) + '\n';
  }
  return out;
}

EstimateReport estimate_self_censoring(const ExperimentConfig& cfg, const std::vector<Observation>& obs,
                                       const AssumptionReport& audit) {
  const GaussianParams truth = cfg.truth();
  SelfCensorConfig sc_cfg = cfg.self_censoring.cfg;
  sc_cfg.seed = cfg.seed;
  if (sc_cfg.epsilon > 0.0 && !(sc_cfg.alpha > 0.0)) {
    sc_cfg.alpha = audit.alpha_pair ? audit.alpha_pair->value : 1.0;
  }
  const SelfCensorEstimate est = fit_self_censoring(obs, std::get<SelfCensoringModel>(cfg.model), sc_cfg);
  Rng rng = make_stream(cfg.seed, {4});
  const EstimateMetrics metrics = evaluate_estimate(truth, est, cfg.self_censoring.tv_samples, rng);

  EstimateReport r;
  r.mean = est.mean;
  r.cov = est.cov;
  r.mean_mahalanobis = metrics.mean_mahalanobis;
  r.mean_l2 = metrics.mean_l2;
  r.cov_whitened_frobenius = metrics.cov_whitened_frobenius;
  r.cov_frobenius = metrics.cov_frobenius;
  if (metrics.tv) {
    r.tv = metrics.tv->value;
    r.tv_std_error = metrics.tv->std_error;
  }
  Json coords = Json::array();
  for (const SubproblemDiagnostics& s : est.per_coordinate) {
    coords.push_back({{"samples", s.samples}, {"iterations", s.iterations}});
  }
  Json pairs = Json::array();
  for (const auto& [key, s] : est.per_pair) {
    pairs.push_back({{"pair", {key.first, key.second}}, {"samples", s.samples}, {"iterations", s.iterations}});
  }
  r.diagnostics = {{"per_coordinate", coords}, {"per_pair", pairs}, {"psd_projected", est.psd_projected}};
  return r;
}

EstimateReport estimate_linear_threshold(const ExperimentConfig& cfg, const std::vector<Observation>& obs,
                                         const AssumptionReport& audit, std::ostream& log) {
  const DescentSettings& s = cfg.linear_threshold;
  const GaussianParams truth = cfg.truth();
  double alpha = 0.0;
  if (s.alpha) {
    alpha = *s.alpha;
  } else if (audit.alpha_subset) {
    alpha = audit.alpha_subset->alpha;
  }
  if (!(alpha > 0.0)) {
    throw SubsetMassZero("audited subset mass is 0 at beta " + format_double(s.beta) +
                         "; choose beta so every block is jointly observed with positive probability");
  }
  if (static_cast<long>(obs.size()) < s.M_init + s.M_sgd) {
    throw InsufficientStream("need " + std::to_string(s.M_init + s.M_sgd) + " observations, file has " +
                             std::to_string(obs.size()));
  }
  DescentConfig dc = default_descent_config(cfg.truth_cov, alpha, s.beta, s.M_init, s.M_sgd);
  if (s.lambda_sgd) dc.lambda_sgd = *s.lambda_sgd;
  if (s.r_proj) dc.r_proj = *s.r_proj;
  dc.eta_lmc = s.eta_lmc;
  dc.M_grad = s.M_grad;
  dc.lmc_burn_in = s.lmc_burn_in;
  dc.R_lmc = s.R_lmc;
  dc.delta_R = s.delta_R;
  dc.grad_growth = s.grad_growth;
  dc.lmc_boundary = s.lmc_boundary;
  dc.validate(cfg.dimension, cfg.truth_cov);

  std::optional<Matrix> complete;
  if (s.use_witness && fs::exists(cfg.hidden_path())) {
    complete = read_rows(cfg.hidden_path(), cfg.dimension);
    if (complete->rows() != static_cast<Eigen::Index>(obs.size())) {
      throw SchemaError(cfg.hidden_path().string() + ": row count does not match the observation file");
    }
  }
  Rng rng = make_stream(cfg.seed, {3});
  const IterateTrace trace =
      missing_descent(obs, std::get<LinearThresholdModel>(cfg.model), cfg.truth_cov, dc, rng, complete ? &*complete : nullptr);
  write_text(cfg.output_dir / "trace.csv", trace_csv(trace));
  log << "trace: " << (cfg.output_dir / "trace.csv").string() << "\n";

  const std::vector<Observation> used(obs.begin(), obs.begin() + (s.M_init + s.M_sgd));
  const Vector naive = available_case_mean(used, cfg.dimension);

  EstimateReport r;
  r.mean = trace.mean;
  r.mean_mahalanobis = mahalanobis_norm_chol(truth.mean() - trace.mean, truth.chol());
  r.mean_l2 = (truth.mean() - trace.mean).norm();
  r.naive_mean_mahalanobis = mahalanobis_norm_chol(truth.mean() - naive, truth.chol());
  const double init_bound = 4.0 * std::sqrt(lambda_max(cfg.truth_cov) / s.beta * std::log(1.0 / alpha));
  r.diagnostics = {{"mu0", vector_to_json(trace.mu0)},
                   {"mu0_mahalanobis_error", mahalanobis_norm_chol(truth.mean() - trace.mu0, truth.chol())},
                   {"alpha", alpha},
                   {"beta", dc.beta},
                   {"lambda_sgd", dc.lambda_sgd},
                   {"r_proj", dc.r_proj},
                   {"eta_lmc", dc.eta_lmc},
                   {"M_init", dc.M_init},
                   {"M_sgd", dc.M_sgd},
                   {"M_grad", dc.M_grad},
                   {"lmc_burn_in", dc.lmc_burn_in},
                   {"chains_seeded_from_hidden_rows", complete.has_value()},
                   {"nonmixing_warnings", trace.nonmixing_warnings},
                   {"unsettled_projections", trace.unsettled_projections},
                   // run-time stand-in for the unobservable bound on the distance to the truth
                   {"distance_bound_surrogate", dc.r_proj + init_bound}};
  return r;
}

double metric_for(const EstimateReport& r) {
  if (r.scenario == "self_censoring") return r.cov_whitened_frobenius.value_or(std::nan(""));
  return r.mean_mahalanobis;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const char* hint_for(const Error& e) {
  if (dynamic_cast<const PairStarved*>(&e)) return "increase n or check the pairwise mass assumption";
  if (dynamic_cast<const BlockStarved*>(&e)) return "increase M_init or check the subset mass assumption";
  if (dynamic_cast<const AnchorViolated*>(&e)) return "anchor coordinates must be seen on every draw";
  if (dynamic_cast<const MassTooLow*>(&e)) return "the truncation set has too little mass under the current estimate";
  if (dynamic_cast<const InsufficientStream*>(&e)) return "generate more samples or lower M_init/M_sgd";
  if (e.category() == ErrorCategory::kNonConvergence) return "increase the sample count or the step budget";
  return nullptr;
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& opts) {
  if (!opts.config) throw SchemaError("--config is required");
  if (!fs::exists(*opts.config)) throw IoError("config file " + opts.config->string() + " not found");
  ExperimentConfig cfg = load_config(*opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.output_dir = *opts.out;
  return cfg;
}

void cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.samples > std::numeric_limits<int>::max()) throw SchemaError("config.samples: too large");
  Rng rng = make_stream(cfg.seed, {1});
  Matrix complete;
  const std::vector<Observation> obs =
      generate_observations(cfg.truth(), cfg.model, static_cast<int>(cfg.samples), rng, &complete);
  write_observations(cfg.observations_path(), obs);
  write_rows(cfg.hidden_path(), complete);
  const Json meta = {{"seed", cfg.seed},
                     {"samples", cfg.samples},
                     {"config_digest", cfg.digest},
                     {"observations", cfg.observations_path().filename().string()},
                     {"hidden", cfg.hidden_path().filename().string()}};
  write_text(cfg.output_dir / "generate.json", meta.dump(2) + "\n");
  log << "wrote " << obs.size() << " observations to " << cfg.observations_path().string() << "\n";
}

AssumptionReport cmd_audit(const ExperimentConfig& cfg, std::ostream& log) {
  const AssumptionReport report = run_audit(cfg);
  Json doc = audit_to_json(report);
  doc["seed"] = cfg.seed;
  doc["config_digest"] = cfg.digest;
  write_text(cfg.output_dir / "audit.json", doc.dump(2) + "\n");
  log_audit(report, log);
  return report;
}

EstimateReport cmd_estimate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Observation> obs = load_observations(cfg);
  const AssumptionReport audit = run_audit(cfg);
  EstimateReport r = cfg.scenario == "self_censoring" ? estimate_self_censoring(cfg, obs, audit)
                                                      : estimate_linear_threshold(cfg, obs, audit, log);
  r.scenario = cfg.scenario;
  r.dimension = cfg.dimension;
  r.samples = static_cast<long>(obs.size());
  r.seed = cfg.seed;
  r.config_digest = cfg.digest;
  if (cfg.scenario == "self_censoring") {
    r.naive_mean_mahalanobis =
        mahalanobis_norm_chol(cfg.truth_mean - available_case_mean(obs, cfg.dimension), cfg.truth().chol());
  }
  Json audit_doc = audit_to_json(audit);
  r.audit = audit_doc;
  r.acceptance = cfg.acceptance;
  judge(r);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(cfg.output_dir / "report.json", report_to_json(r).dump(2) + "\n");
  log << "mean error (Mahalanobis) " << r.mean_mahalanobis << ", available-case " << r.naive_mean_mahalanobis << "\n";
  if (r.cov_whitened_frobenius) log << "whitened covariance error " << *r.cov_whitened_frobenius << "\n";
  log << (r.passed ? "acceptance: pass" : "acceptance: FAIL") << "\n";
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need >= 2 paired points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("loglog_slope: all x equal");
  return sxy / sxx;
}

Summary summarize(const std::vector<EstimateReport>& reports, bool allow_mixed) {
  if (reports.empty()) throw InvalidArgument("summarize: no reports");
  Summary s;
  const std::string& scenario = reports.front().scenario;
  s.metric_name = scenario == "self_censoring" ? "cov_whitened_frobenius" : "mean_mahalanobis";
  for (const EstimateReport& r : reports) {
    if (r.scenario != scenario) throw SchemaError("reports mix scenarios " + scenario + " and " + r.scenario);
    if (!allow_mixed && r.config_digest != reports.front().config_digest) {
      throw SchemaError("reports come from different configs (digest " + reports.front().config_digest + " vs " +
                        r.config_digest + "); pass --allow-mixed to aggregate anyway");
    }
    s.rows.push_back({r.samples, r.seed, metric_for(r), r.passed});
    s.all_passed = s.all_passed && r.passed;
  }
  std::sort(s.rows.begin(), s.rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return a.samples != b.samples ? a.samples < b.samples : a.seed < b.seed;
  });
  std::map<long, std::vector<double>> by_n;
  for (const SummaryRow& row : s.rows) by_n[row.samples].push_back(row.metric);
  if (by_n.size() >= 2) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [n, v] : by_n) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(median(v));
    }
    s.loglog_slope = loglog_slope(xs, ys);
  }
  return s;
}

std::string summary_csv(const Summary& s) {
  std::string out = "n,seed," + s.metric_name + ",passed\n";
  for (const SummaryRow& r : s.rows) {
    out += std::to_string(r.samples) + ',' + std::to_string(r.seed) + ',' + format_double(r.metric) + ',' +
           (r.passed ? "true" : "false") + '\n';
  }
  return out;
}

std::string summary_svg(const Summary& s) {
  const double w = 640;
  const double h = 420;
  const double pad = 60;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const SummaryRow& r : s.rows) {
    if (!(r.metric > 0.0)) continue;
    x0 = std::min(x0, std::log10(static_cast<double>(r.samples)));
    x1 = std::max(x1, std::log10(static_cast<double>(r.samples)));
    y0 = std::min(y0, std::log10(r.metric));
    y1 = std::max(y1, std::log10(r.metric));
  }
  if (x0 > x1) x0 = x1 = 0;
  if (y0 > y1) y0 = y1 = 0;
  // pad degenerate ranges so single-point plots still render
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double lx) { return pad + (lx - x0) / (x1 - x0) * (w - 2 * pad); };
  auto py = [&](double ly) { return h - pad - (ly - y0) / (y1 - y0) * (h - 2 * pad); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">log10 n</text>\n";
  svg << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2
      << ")\" text-anchor=\"middle\">log10 " << s.metric_name << "</text>\n";
  for (const SummaryRow& r : s.rows) {
    if (!(r.metric > 0.0)) continue;
    svg << "<circle cx=\"" << px(std::log10(static_cast<double>(r.samples))) << "\" cy=\""
        << py(std::log10(r.metric)) << "\" r=\"3\" fill=\"" << (r.passed ? "steelblue" : "firebrick") << "\"/>\n";
  }
  if (s.loglog_slope) {
    svg << "<text x=\"" << w - pad << "\" y=\"" << pad - 20 << "\" text-anchor=\"end\">slope "
        << format_double(*s.loglog_slope) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    if (name == "report") {
      if (opts.reports.empty()) throw SchemaError("report: pass one or more report.json paths");
      fs::path out_dir = ".";
      if (opts.config) out_dir = resolve_config(opts).output_dir;
      if (opts.out) out_dir = *opts.out;
      std::vector<EstimateReport> reports;
      for (const fs::path& p : opts.reports) {
        reports.push_back(report_from_json(parse_json(read_text(p), p.string()), p.string()));
      }
      const Summary s = summarize(reports, opts.allow_mixed);
      write_text(out_dir / "summary.csv", summary_csv(s));
      write_text(out_dir / "summary.svg", summary_svg(s));
      log << s.rows.size() << " rows written to " << (out_dir / "summary.csv").string() << "\n";
      if (s.loglog_slope) log << "log-log slope of " << s.metric_name << ": " << *s.loglog_slope << "\n";
      if (!s.all_passed) {
        err << "one or more reports failed their acceptance thresholds\n";
        return kExitAcceptance;
      }
      return kExitOk;
    }
    const ExperimentConfig cfg = resolve_config(opts);
    if (name == "generate") {
      cmd_generate(cfg, log);
    } else if (name == "audit") {
      cmd_audit(cfg, log);
    } else if (name == "estimate") {
      cmd_estimate(cfg, log);
    } else {
      throw SchemaError("unknown command " + name);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (const char* hint = hint_for(e)) err << "hint: " << hint << "\n";
    switch (e.category()) {
      case ErrorCategory::kInvalidInput: return kExitSchema;
      case ErrorCategory::kAssumptionViolation: return kExitAssumption;
      case ErrorCategory::kNonConvergence: return kExitNonConvergence;
      case ErrorCategory::kNumerical: return kExitIo;
    }
    return kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace mnar
