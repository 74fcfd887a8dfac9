#include "mnar/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "mnar/errors.hpp"

namespace mnar {

namespace fs = std::filesystem;

namespace {

void only_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) throw SchemaError(where + "." + k + ": unknown field");
  }
}

const Json& need(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw SchemaError(where + "." + key + ": missing required field");
  return obj[key];
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number() || !std::isfinite(j.get<double>())) throw SchemaError(where + ": expected a finite number");
  return j.get<double>();
}

double positive(const Json& j, const std::string& where) {
  const double x = number(j, where);
  if (!(x > 0.0)) throw SchemaError(where + ": must be positive");
  return x;
}

long count(const Json& j, const std::string& where, long min = 1) {
  if (!j.is_number_integer()) throw SchemaError(where + ": expected an integer");
  const long x = j.get<long>();
  if (x < min) throw SchemaError(where + ": must be >= " + std::to_string(min));
  return x;
}

bool flag(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw SchemaError(where + ": expected true or false");
  return j.get<bool>();
}

std::string text(const Json& j, const std::string& where) {
  if (!j.is_string()) throw SchemaError(where + ": expected a string");
  return j.get<std::string>();
}

template <class F>
void maybe(const Json& obj, const char* key, const std::string& where, F&& apply) {
  if (obj.contains(key)) apply(obj[key], where + "." + key);
}

void parse_self_censoring(const Json& j, const std::string& w, SelfCensorSettings& s) {
  only_keys(j, w, {"min_samples", "psd_projection", "epsilon", "eps_scale", "alpha", "threads", "steps",
                   "settle_tol", "tv_samples"});
  maybe(j, "min_samples", w, [&](const Json& v, const std::string& p) { s.cfg.min_samples = count(v, p); });
  maybe(j, "psd_projection", w, [&](const Json& v, const std::string& p) { s.cfg.psd_projection = flag(v, p); });
  maybe(j, "epsilon", w, [&](const Json& v, const std::string& p) { s.cfg.epsilon = positive(v, p); });
  maybe(j, "eps_scale", w, [&](const Json& v, const std::string& p) { s.cfg.eps_scale = positive(v, p); });
  maybe(j, "alpha", w, [&](const Json& v, const std::string& p) {
    s.cfg.alpha = positive(v, p);
    if (s.cfg.alpha > 1.0) throw SchemaError(p + ": must be <= 1");
  });
  maybe(j, "threads", w, [&](const Json& v, const std::string& p) { s.cfg.threads = static_cast<int>(count(v, p)); });
  maybe(j, "steps", w, [&](const Json& v, const std::string& p) { s.cfg.fit.steps = count(v, p); });
  maybe(j, "settle_tol", w, [&](const Json& v, const std::string& p) { s.cfg.fit.settle_tol = positive(v, p); });
  maybe(j, "tv_samples", w, [&](const Json& v, const std::string& p) { s.tv_samples = static_cast<int>(count(v, p, 0)); });
}

void parse_descent(const Json& j, const std::string& w, DescentSettings& s) {
  only_keys(j, w, {"beta", "alpha", "lambda_sgd", "r_proj", "M_init", "M_sgd", "eta_lmc", "M_grad", "lmc_burn_in",
                   "R_lmc", "delta_R", "grad_growth", "use_witness", "lmc_boundary"});
  maybe(j, "beta", w, [&](const Json& v, const std::string& p) { s.beta = positive(v, p); });
  maybe(j, "alpha", w, [&](const Json& v, const std::string& p) {
    s.alpha = positive(v, p);
    if (*s.alpha > 1.0) throw SchemaError(p + ": must be <= 1");
  });
  maybe(j, "lambda_sgd", w, [&](const Json& v, const std::string& p) { s.lambda_sgd = positive(v, p); });
  maybe(j, "r_proj", w, [&](const Json& v, const std::string& p) { s.r_proj = positive(v, p); });
  maybe(j, "M_init", w, [&](const Json& v, const std::string& p) { s.M_init = count(v, p); });
  maybe(j, "M_sgd", w, [&](const Json& v, const std::string& p) { s.M_sgd = count(v, p); });
  maybe(j, "eta_lmc", w, [&](const Json& v, const std::string& p) { s.eta_lmc = positive(v, p); });
  maybe(j, "M_grad", w, [&](const Json& v, const std::string& p) { s.M_grad = static_cast<int>(count(v, p)); });
  maybe(j, "lmc_burn_in", w, [&](const Json& v, const std::string& p) { s.lmc_burn_in = static_cast<int>(count(v, p, 0)); });
  maybe(j, "R_lmc", w, [&](const Json& v, const std::string& p) { s.R_lmc = positive(v, p); });
  maybe(j, "delta_R", w, [&](const Json& v, const std::string& p) { s.delta_R = positive(v, p); });
  maybe(j, "grad_growth", w, [&](const Json& v, const std::string& p) {
    s.grad_growth = number(v, p);
    if (s.grad_growth < 0.0) throw SchemaError(p + ": must be >= 0");
  });
  maybe(j, "use_witness", w, [&](const Json& v, const std::string& p) { s.use_witness = flag(v, p); });
  maybe(j, "lmc_boundary", w, [&](const Json& v, const std::string& p) {
    const std::string b = text(v, p);
    if (b == "reflect") s.lmc_boundary = LmcBoundary::Reflect;
    else if (b == "project") s.lmc_boundary = LmcBoundary::Project;
    else throw SchemaError(p + ": expected \"reflect\" or \"project\"");
  });
}

Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

std::optional<double> optional_from(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return number(obj[key], where + "." + key);
}

Json thresholds_to_json(const AcceptanceThresholds& a) {
  Json out = Json::object();
  if (a.max_mean_mahalanobis) out["max_mean_mahalanobis"] = *a.max_mean_mahalanobis;
  if (a.max_cov_whitened_frobenius) out["max_cov_whitened_frobenius"] = *a.max_cov_whitened_frobenius;
  if (a.max_tv) out["max_tv"] = *a.max_tv;
  out["beat_naive"] = a.beat_naive;
  return out;
}

AcceptanceThresholds thresholds_from_json(const Json& j, const std::string& w) {
  only_keys(j, w, {"max_mean_mahalanobis", "max_cov_whitened_frobenius", "max_tv", "beat_naive"});
  AcceptanceThresholds a;
  maybe(j, "max_mean_mahalanobis", w, [&](const Json& v, const std::string& p) { a.max_mean_mahalanobis = positive(v, p); });
  maybe(j, "max_cov_whitened_frobenius", w,
        [&](const Json& v, const std::string& p) { a.max_cov_whitened_frobenius = positive(v, p); });
  maybe(j, "max_tv", w, [&](const Json& v, const std::string& p) { a.max_tv = positive(v, p); });
  maybe(j, "beat_naive", w, [&](const Json& v, const std::string& p) { a.beat_naive = flag(v, p); });
  return a;
}

}  // namespace

fs::path ExperimentConfig::observations_path() const { return output_dir / "observations.ndjson"; }
fs::path ExperimentConfig::hidden_path() const { return output_dir / "hidden.ndjson"; }

ExperimentConfig parse_config(const Json& doc, const fs::path& base_dir) {
  const std::string w = "config";
  only_keys(doc, w, {"schema_version", "scenario", "dimension", "truth", "model", "samples", "seed", "estimator",
                     "audit", "acceptance", "output"});
  ExperimentConfig cfg;
  cfg.schema_version = static_cast<int>(count(need(doc, "schema_version", w), w + ".schema_version"));
  if (cfg.schema_version != kSchemaVersion) {
    throw SchemaError(w + ".schema_version: unsupported version " + std::to_string(cfg.schema_version) +
                      ", expected " + std::to_string(kSchemaVersion));
  }
  cfg.scenario = text(need(doc, "scenario", w), w + ".scenario");
  if (cfg.scenario != "self_censoring" && cfg.scenario != "linear_threshold") {
    throw SchemaError(w + ".scenario: expected \"self_censoring\" or \"linear_threshold\"");
  }
  cfg.dimension = static_cast<int>(count(need(doc, "dimension", w), w + ".dimension"));
  const int d = cfg.dimension;

  const Json& truth = need(doc, "truth", w);
  only_keys(truth, w + ".truth", {"mean", "cov"});
  cfg.truth_mean = vector_from_json(need(truth, "mean", w + ".truth"), w + ".truth.mean", d);
  cfg.truth_cov = matrix_from_json(need(truth, "cov", w + ".truth"), w + ".truth.cov", d, d);
  try {
    (void)cfg.truth();
  } catch (const Error& e) {
    throw SchemaError(w + ".truth.cov: " + e.what());
  }

  cfg.model = model_from_json(need(doc, "model", w), w + ".model");
  if (model_dim(cfg.model) != d) {
    throw SchemaError(w + ".model: dimension " + std::to_string(model_dim(cfg.model)) + " does not match " +
                      w + ".dimension " + std::to_string(d));
  }
  if (model_kind(cfg.model) != cfg.scenario) {
    throw SchemaError(w + ".model.kind: \"" + model_kind(cfg.model) + "\" does not match scenario \"" +
                      cfg.scenario + "\"");
  }
  cfg.samples = count(need(doc, "samples", w), w + ".samples");
  {
    const Json& s = need(doc, "seed", w);
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long>() >= 0)) {
      throw SchemaError(w + ".seed: expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }

  if (doc.contains("estimator")) {
    const std::string we = w + ".estimator";
    if (cfg.scenario == "self_censoring") {
      parse_self_censoring(doc["estimator"], we, cfg.self_censoring);
    } else {
      parse_descent(doc["estimator"], we, cfg.linear_threshold);
    }
  }
  if (cfg.scenario == "linear_threshold") {
    DescentSettings& lt = cfg.linear_threshold;
    try {
      (void)subset_size_for_beta(lt.beta, d);
    } catch (const InvalidBeta& e) {
      throw SchemaError(w + ".estimator.beta: " + e.what());
    }
    if (lt.M_init == 0) lt.M_init = cfg.samples / 2;
    if (lt.M_sgd == 0) lt.M_sgd = cfg.samples - lt.M_init;
    if (lt.M_init < 1 || lt.M_sgd < 1 || lt.M_init + lt.M_sgd > cfg.samples) {
      throw SchemaError(w + ".estimator: M_init + M_sgd must be positive and at most samples (" +
                        std::to_string(cfg.samples) + ")");
    }
    if (lt.lmc_burn_in >= lt.M_grad) throw SchemaError(w + ".estimator.lmc_burn_in: must be below M_grad");
    if (lt.eta_lmc >= 1.0) throw SchemaError(w + ".estimator.eta_lmc: must be below 1");
  }

  if (doc.contains("audit")) {
    const std::string wa = w + ".audit";
    const Json& a = doc["audit"];
    only_keys(a, wa, {"mc_samples", "beta", "anchor"});
    maybe(a, "mc_samples", wa, [&](const Json& v, const std::string& p) { cfg.audit.mc_samples = static_cast<int>(count(v, p)); });
    maybe(a, "beta", wa, [&](const Json& v, const std::string& p) {
      cfg.audit.beta = positive(v, p);
      try {
        (void)subset_size_for_beta(*cfg.audit.beta, d);
      } catch (const InvalidBeta& e) {
        throw SchemaError(p + ": " + e.what());
      }
    });
    maybe(a, "anchor", wa, [&](const Json& v, const std::string& p) {
      if (!v.is_array()) throw SchemaError(p + ": expected an array of coordinates");
      for (std::size_t k = 0; k < v.size(); ++k) {
        const long c = count(v[k], p + "[" + std::to_string(k) + "]", 0);
        if (c >= d) throw SchemaError(p + "[" + std::to_string(k) + "]: coordinate out of range");
        if (!cfg.audit.anchor.empty() && c <= cfg.audit.anchor.back()) {
          throw SchemaError(p + ": coordinates must be strictly increasing");
        }
        cfg.audit.anchor.push_back(static_cast<int>(c));
      }
      if (cfg.scenario != "linear_threshold") throw SchemaError(p + ": anchoring applies to linear_threshold only");
    });
  }
  if (doc.contains("acceptance")) cfg.acceptance = thresholds_from_json(doc["acceptance"], w + ".acceptance");
  if (doc.contains("output")) {
    only_keys(doc["output"], w + ".output", {"dir"});
    maybe(doc["output"], "dir", w + ".output", [&](const Json& v, const std::string& p) {
      const fs::path dir = text(v, p);
      cfg.output_dir = dir.is_absolute() ? dir : base_dir / dir;
    });
  } else {
    cfg.output_dir = base_dir;
  }
  cfg.digest = config_digest(doc);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const Json doc = parse_json(read_text(path), path.string());
  return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string config_digest(const Json& doc) {
  Json core = doc;
  if (core.is_object()) {
    core.erase("samples");
    core.erase("seed");
    core.erase("output");
  }
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : core.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json audit_to_json(const AssumptionReport& r) {
  Json out = Json::object();
  out["mc_samples"] = r.mc_samples;
  if (r.alpha_pair) out["alpha_pair"] = {{"value", r.alpha_pair->value}, {"std_error", r.alpha_pair->std_error}};
  if (r.alpha_subset) {
    const SubsetAudit& s = *r.alpha_subset;
    out["beta"] = r.beta;
    out["alpha_subset"] = {{"value", s.alpha},
                           {"std_error", s.std_error},
                           {"subset_size", s.subset_size},
                           {"subsets_evaluated", s.subsets_evaluated},
                           {"exhaustive", s.exhaustive},
                           {"worst_subset", s.worst_subset}};
  }
  if (r.anchoring) {
    const AnchorAudit& a = *r.anchoring;
    out["anchoring"] = {{"gamma", a.gamma},           {"bin_width", a.bin_width}, {"cells", a.cells},
                        {"bins_used", a.bins_used},   {"bins_skipped", a.bins_skipped},
                        {"mc_samples", a.mc_samples}, {"method", "binned approximation"}};
  }
  return out;
}

Json report_to_json(const EstimateReport& r) {
  Json out;
  out["scenario"] = r.scenario;
  out["dimension"] = r.dimension;
  out["samples"] = r.samples;
  out["seed"] = r.seed;
  out["config_digest"] = r.config_digest;
  out["estimate"]["mean"] = vector_to_json(r.mean);
  out["estimate"]["cov"] = r.cov ? matrix_to_json(*r.cov) : Json(nullptr);
  Json& m = out["metrics"];
  m["mean_mahalanobis"] = r.mean_mahalanobis;
  m["mean_l2"] = r.mean_l2;
  m["cov_whitened_frobenius"] = optional_number(r.cov_whitened_frobenius);
  m["cov_frobenius"] = optional_number(r.cov_frobenius);
  m["tv"] = optional_number(r.tv);
  m["tv_std_error"] = optional_number(r.tv_std_error);
  m["naive_mean_mahalanobis"] = r.naive_mean_mahalanobis;
  out["audit"] = r.audit;
  out["diagnostics"] = r.diagnostics;
  out["acceptance"] = {{"thresholds", thresholds_to_json(r.acceptance)}, {"passed", r.passed}, {"failures", r.failures}};
  out["runtime_seconds"] = r.runtime_seconds;
  return out;
}

EstimateReport report_from_json(const Json& doc, const std::string& w) {
  only_keys(doc, w, {"scenario", "dimension", "samples", "seed", "config_digest", "estimate", "metrics", "audit",
                     "diagnostics", "acceptance", "runtime_seconds"});
  EstimateReport r;
  r.scenario = text(need(doc, "scenario", w), w + ".scenario");
  r.dimension = static_cast<int>(count(need(doc, "dimension", w), w + ".dimension"));
  r.samples = count(need(doc, "samples", w), w + ".samples");
  {
    const Json& s = need(doc, "seed", w);
    if (!s.is_number_integer()) throw SchemaError(w + ".seed: expected an integer");
    r.seed = s.get<std::uint64_t>();
  }
  r.config_digest = text(need(doc, "config_digest", w), w + ".config_digest");
  const Json& est = need(doc, "estimate", w);
  r.mean = vector_from_json(need(est, "mean", w + ".estimate"), w + ".estimate.mean", r.dimension);
  if (est.contains("cov") && !est["cov"].is_null()) {
    r.cov = matrix_from_json(est["cov"], w + ".estimate.cov", r.dimension, r.dimension);
  }
  const Json& m = need(doc, "metrics", w);
  const std::string wm = w + ".metrics";
  r.mean_mahalanobis = number(need(m, "mean_mahalanobis", wm), wm + ".mean_mahalanobis");
  r.mean_l2 = number(need(m, "mean_l2", wm), wm + ".mean_l2");
  r.cov_whitened_frobenius = optional_from(m, "cov_whitened_frobenius", wm);
  r.cov_frobenius = optional_from(m, "cov_frobenius", wm);
  r.tv = optional_from(m, "tv", wm);
  r.tv_std_error = optional_from(m, "tv_std_error", wm);
  r.naive_mean_mahalanobis = number(need(m, "naive_mean_mahalanobis", wm), wm + ".naive_mean_mahalanobis");
  if (doc.contains("audit")) r.audit = doc["audit"];
  if (doc.contains("diagnostics")) r.diagnostics = doc["diagnostics"];
  const Json& acc = need(doc, "acceptance", w);
  r.acceptance = thresholds_from_json(need(acc, "thresholds", w + ".acceptance"), w + ".acceptance.thresholds");
  r.passed = flag(need(acc, "passed", w + ".acceptance"), w + ".acceptance.passed");
  for (const Json& f : need(acc, "failures", w + ".acceptance")) r.failures.push_back(text(f, w + ".acceptance.failures"));
  r.runtime_seconds = number(need(doc, "runtime_seconds", w), w + ".runtime_seconds");
  return r;
}

void judge(EstimateReport& r) {
  r.failures.clear();
  const AcceptanceThresholds& a = r.acceptance;
  auto check = [&](const char* name, std::optional<double> value, std::optional<double> limit) {
    if (!limit) return;
    if (!value) {
      r.failures.push_back(std::string(name) + " unavailable");
    } else if (!(*value <= *limit)) {
      r.failures.push_back(std::string(name) + " " + format_double(*value) + " > " + format_double(*limit));
    }
  };
  check("mean_mahalanobis", r.mean_mahalanobis, a.max_mean_mahalanobis);
  check("cov_whitened_frobenius", r.cov_whitened_frobenius, a.max_cov_whitened_frobenius);
  check("tv", r.tv, a.max_tv);
  if (a.beat_naive && !(r.mean_mahalanobis < r.naive_mean_mahalanobis)) {
    r.failures.push_back("estimate no better than the available-case mean");
  }
  r.passed = r.failures.empty();
}

}  // namespace mnar
