// precise: debiased top-K metric estimation from a small gold set and a
// large machine-annotated set.
//
//   precise estimate   [flags] <data.jsonl|data.csv>
//   precise calibrate  [flags] <data.jsonl|data.csv> --out map.json
//   precise experiment [flags] (<pool.jsonl> | --simulate queries=..,k=..,rate=..)
//
// Exit codes: 0 success, 2 input error, 3 statistical precondition failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "precise/precise.hpp"

namespace {

using nlohmann::json;
using namespace precise;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPrecondition = 3;

// Every setting, keyed by flag name without the leading dashes. Values are
// kept as text so config-file entries and flags go through one parser.
const std::map<std::string, std::string>& default_settings() {
  static const std::map<std::string, std::string> defaults = {
      {"k", "4"},
      {"level", "0.95"},
      {"lambda", "analytic"},
      {"estimators", "gold,prob,bin,ppi"},
      {"calibrate", "false"},
      {"bin-threshold", "0.5"},
      {"format", "json"},
      {"seed", "0"},
      {"out", ""},
      {"confidence-scale", ""},
      {"bin-width", "0.1"},
      {"n", "30"},
      {"trials", "50"},
      {"ablate", ""},
      {"simulate", ""},
      {"unlabeled", "0"},
      {"per-query-cost", "0"},
      {"workers", "1"},
  };
  return defaults;
}

struct RunConfig {
  std::size_t k = 4;
  double level = 0.95;
  LambdaPolicy lambda_policy = LambdaPolicy::analytic();
  std::vector<EstimatorKind> estimators;
  bool calibrate = false;
  double bin_threshold = 0.5;
  std::string format = "json";
  std::uint64_t seed = 0;
  std::string out;
  ConfidenceScale scale;
  double bin_width = 0.1;
  std::size_t n = 30;
  std::size_t trials = 50;
  std::vector<std::size_t> ablate;
  std::string simulate;
  std::size_t unlabeled = 0;
  double per_query_cost = 0.0;
  std::size_t workers = 1;
};

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    auto t = std::string(detail::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw InputError("--" + key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw InputError("--" + key + ": expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw InputError("--" + key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InputError("--" + key + ": integer out of range '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (detail::iequals(v, "true") || v == "1") return true;
  if (detail::iequals(v, "false") || v == "0") return false;
  throw InputError("--" + key + ": expected true/false, got '" + v + "'");
}

RunConfig build_config(const std::map<std::string, std::string>& s) {
  RunConfig c;
  c.k = to_uint("k", s.at("k"));
  if (c.k < 1) throw InputError("--k must be >= 1");
  c.level = to_double("level", s.at("level"));
  if (!(c.level > 0.0 && c.level < 1.0)) throw InputError("--level must lie in (0,1)");
  try {
    c.lambda_policy = LambdaPolicy::parse(s.at("lambda"));
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("--lambda: ") + e.what());
  }
  for (const auto& name : split_list(s.at("estimators"))) {
    const auto e = parse_estimator(name);
    if (!e) throw InputError("--estimators: unknown estimator '" + name + "'");
    c.estimators.push_back(*e);
  }
  if (c.estimators.empty()) throw InputError("--estimators: empty list");
  c.calibrate = to_bool("calibrate", s.at("calibrate"));
  c.bin_threshold = to_double("bin-threshold", s.at("bin-threshold"));
  if (!(c.bin_threshold >= 0.0 && c.bin_threshold <= 1.0)) throw InputError("--bin-threshold must lie in [0,1]");
  c.format = s.at("format");
  if (c.format != "json" && c.format != "csv" && c.format != "human") {
    throw InputError("--format must be json, csv or human");
  }
  c.seed = to_uint("seed", s.at("seed"));
  c.out = s.at("out");
  if (const auto& path = s.at("confidence-scale"); !path.empty()) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open confidence scale '" + path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InputError("confidence scale '" + path + "': " + e.what());
    }
    c.scale = ConfidenceScale::from_json(j);
  }
  c.bin_width = to_double("bin-width", s.at("bin-width"));
  if (!(c.bin_width > 0.0 && c.bin_width <= 1.0)) throw InputError("--bin-width must lie in (0,1]");
  c.n = to_uint("n", s.at("n"));
  c.trials = to_uint("trials", s.at("trials"));
  if (c.trials < 1) throw InputError("--trials must be >= 1");
  for (const auto& m : split_list(s.at("ablate"))) {
    const auto v = to_uint("ablate", m);
    if (v < 1) throw InputError("--ablate multipliers must be >= 1");
    c.ablate.push_back(v);
  }
  c.simulate = s.at("simulate");
  c.unlabeled = to_uint("unlabeled", s.at("unlabeled"));
  c.per_query_cost = to_double("per-query-cost", s.at("per-query-cost"));
  if (!(c.per_query_cost >= 0.0)) throw InputError("--per-query-cost must be non-negative");
  c.workers = to_uint("workers", s.at("workers"));
  if (c.workers < 1) throw InputError("--workers must be >= 1");
  return c;
}

std::string json_scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ',';
      out += json_scalar_text(e);
    }
    return out;
  }
  throw InputError("config values must be scalars or arrays of scalars");
}

void overlay_config_file(std::map<std::string, std::string>& settings, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw InputError("config file '" + path + "' must hold a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!settings.count(key)) throw InputError("config file '" + path + "': unknown key '" + key + "'");
    settings[key] = json_scalar_text(value);
  }
}

// Flags bound to one subcommand. Values start at their defaults so --help
// shows them; only flags actually given on the command line override the
// config file.
struct CommandFlags {
  std::map<std::string, std::string> values = default_settings();
  std::map<std::string, CLI::Option*> options;
  bool calibrate = false;
  CLI::Option* calibrate_opt = nullptr;
  std::string config;
  std::string input;

  void add(CLI::App* cmd, const std::string& key, const std::string& help) {
    options[key] = cmd->add_option("--" + key, values[key], help)->capture_default_str();
  }

  std::map<std::string, std::string> resolve() const {
    auto settings = default_settings();
    std::string cfg_path = config;
    if (cfg_path.empty()) {
      if (const char* env = std::getenv("PRECISE_CONFIG"); env && *env) cfg_path = env;
    }
    if (!cfg_path.empty()) overlay_config_file(settings, cfg_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) settings[key] = values.at(key);
    }
    if (calibrate_opt && calibrate_opt->count() > 0) settings["calibrate"] = calibrate ? "true" : "false";
    return settings;
  }
};

void add_common(CLI::App* cmd, CommandFlags& f) {
  f.add(cmd, "k", "Documents per query (K)");
  f.add(cmd, "level", "Confidence level for intervals");
  f.add(cmd, "lambda", "Lambda policy: fixed:<v> | analytic | grid:<step>");
  f.add(cmd, "estimators", "Comma-separated estimators: gold,prob,bin,ppi");
  f.calibrate_opt = cmd->add_flag("--calibrate,!--no-calibrate", f.calibrate,
                                  "Fit isotonic calibration on the gold docs and apply it to both splits (default: off)");
  f.add(cmd, "bin-threshold", "Threshold for the binarized annotator estimate");
  f.add(cmd, "format", "Output format: json | csv | human");
  f.add(cmd, "seed", "Seed for all randomness");
  f.add(cmd, "out", "Output path (default: standard output)");
  f.add(cmd, "confidence-scale", "JSON file mapping the six confidence phrases to scores");
  cmd->add_option("--config", f.config, "Flat JSON config file (keys are flag names); defaults to $PRECISE_CONFIG");
}

// Writes `text` to cfg.out or stdout.
void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) throw InputError("cannot write '" + cfg.out + "'");
  out << text;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v * 100.0 << '%';
  return os.str();
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string num(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int cmd_estimate(const RunConfig& cfg, const std::string& input) {
  const Dataset d = load_dataset(input, cfg.k);
  EstimationConfig ec;
  ec.scale = cfg.scale;
  ec.calibrate = cfg.calibrate;
  ec.bin_threshold = cfg.bin_threshold;
  ec.level = cfg.level;
  ec.lambda_policy = cfg.lambda_policy;
  ec.estimators = cfg.estimators;
  const EstimationResult r = run_estimators(d, ec);

  std::vector<std::string> warnings = r.warnings;
  for (const auto& e : r.estimates) {
    for (const auto& w : e.warnings) warnings.push_back(std::string(to_string(e.estimator)) + ": " + w);
  }
  print_warnings(warnings);
  for (const auto& e : r.estimates) {
    if (!e.variance) {
      throw PreconditionError(std::string(to_string(e.estimator)) +
                              ": confidence interval needs at least 2 queries (n=" + std::to_string(e.n) +
                              ", N=" + std::to_string(e.N) + ")");
    }
  }

  std::ostringstream os;
  if (cfg.format == "json") {
    json j;
    j["k"] = d.k;
    j["n"] = d.n();
    j["N"] = d.N();
    j["estimates"] = json::array();
    for (const auto& e : r.estimates) j["estimates"].push_back(to_json(e));
    j["calibration"] = r.calibration ? r.calibration->to_json() : json(nullptr);
    j["warnings"] = r.warnings;
    os << j.dump(2) << '\n';
  } else if (cfg.format == "csv") {
    os << "estimator,value,value_clamped,variance,ci_lower,ci_upper,level,lambda,n,N\n";
    for (const auto& e : r.estimates) {
      os << to_string(e.estimator) << ',' << num(e.value) << ',' << num(e.value_clamped) << ','
         << num(*e.variance) << ',' << num(e.ci->lower) << ',' << num(e.ci->upper) << ',' << num(e.level) << ','
         << (e.lambda ? num(*e.lambda) : "") << ',' << e.n << ',' << e.N << '\n';
    }
  } else {
    os << "Precision@" << d.k << " estimates (n=" << d.n() << " gold, N=" << d.N() << " unlabeled, "
       << fixed2(cfg.level * 100.0) << "% CI)\n";
    for (const auto& e : r.estimates) {
      os << "  " << std::left << std::setw(11) << to_string(e.estimator) << std::right << std::setw(8)
         << pct(e.value) << "  [" << pct(e.ci->lower) << ", " << pct(e.ci->upper) << "]";
      if (e.lambda) os << "  lambda=" << fixed2(*e.lambda);
      os << '\n';
    }
  }
  emit(cfg, os.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const RunConfig& cfg, const std::string& input) {
  const Dataset d = load_dataset(input, cfg.k);
  const auto pairs = labeled_scores(d.gold, cfg.scale);
  std::vector<std::string> warnings;
  const CalibrationMap map = fit_isotonic(pairs, &warnings);
  print_warnings(warnings);
  const CalibrationDiagnostics diag = calibration_diagnostics(pairs, cfg.bin_width);

  if (!cfg.out.empty()) {
    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) throw InputError("cannot write '" + cfg.out + "'");
    out << map.to_json().dump(2) << '\n';
  }

  std::ostringstream os;
  if (cfg.format == "json") {
    json j = {{"diagnostics", to_json(diag)}};
    if (cfg.out.empty()) j["calibration"] = map.to_json();
    os << j.dump(2) << '\n';
  } else if (cfg.format == "csv") {
    write_histogram_csv(diag, os);
  } else {
    os << "Calibration fitted on " << pairs.size() << " labeled docs (" << map.breakpoints().size()
       << " breakpoints)\n";
    os << "  relevant docs scored >= 0.5:   "
       << (diag.tp_fraction_ge_half ? pct(*diag.tp_fraction_ge_half) : std::string("n/a")) << '\n';
    os << "  irrelevant docs scored <= 0.4: "
       << (diag.tn_fraction_le_040 ? pct(*diag.tn_fraction_le_040) : std::string("n/a")) << '\n';
    for (const auto& b : diag.bins) {
      os << "  [" << fixed2(b.lo) << ", " << fixed2(b.hi) << ")  tp=" << b.tp_count << "  tn=" << b.tn_count << '\n';
    }
  }
  std::cout << os.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

Dataset simulate_from_kvlist(const std::string& kvlist, const RunConfig& cfg) {
  std::map<std::string, std::string> kv = {{"queries", "10000"}, {"k", std::to_string(cfg.k)},
                                           {"rate", "0.8973"},   {"profile", "sharp"},
                                           {"shift", "0"},       {"concentration", ""},
                                           {"dispersion", "0"},  {"verbalize", "false"}};
  for (const auto& item : split_list(kvlist)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("--simulate: expected key=value, got '" + item + "'");
    const std::string key(detail::trim(item.substr(0, eq)));
    if (!kv.count(key)) throw InputError("--simulate: unknown key '" + key + "'");
    kv[key] = std::string(detail::trim(item.substr(eq + 1)));
  }
  const auto queries = to_uint("simulate queries", kv["queries"]);
  const auto k = to_uint("simulate k", kv["k"]);
  const double rate = to_double("simulate rate", kv["rate"]);
  try {
    AnnotatorProfile profile = kv["concentration"].empty()
                                   ? AnnotatorProfile::preset(kv["profile"], rate)
                                   : AnnotatorProfile::calibrated(rate, to_double("simulate concentration", kv["concentration"]));
    profile.systematic_shift = to_double("simulate shift", kv["shift"]);
    profile.verbalize = to_bool("simulate verbalize", kv["verbalize"]);
    constexpr std::uint64_t kPoolStream = 0x9E3779B97F4A7C15ull;
    return simulate_pool(queries, k, rate, profile, cfg.seed ^ kPoolStream,
                         to_double("simulate dispersion", kv["dispersion"]), cfg.scale);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("--simulate: ") + e.what());
  }
}

void write_report_human(std::ostream& os, const SamplingReport& r, std::optional<std::size_t> multiplier) {
  os << "n=" << r.n << " N=" << r.N;
  if (multiplier) os << " (" << *multiplier << "x)";
  os << " trials=" << r.trials << " truth=" << pct(r.truth) << " cost_usd=" << fixed2(r.cost_usd) << '\n';
  os << "  estimator     bias   |bias|  std_err  coverage\n";
  for (const auto& e : r.estimators) {
    os << "  " << std::left << std::setw(11) << to_string(e.estimator) << std::right << std::setw(7)
       << fixed2(e.bias) << std::setw(8) << fixed2(e.abs_bias) << std::setw(9) << fixed2(e.std_error) << std::setw(10)
       << (e.coverage ? pct(*e.coverage) : std::string("n/a")) << '\n';
  }
}

int cmd_experiment(const RunConfig& cfg, const std::string& input) {
  if (input.empty() == cfg.simulate.empty()) {
    throw InputError("experiment needs exactly one of a pool file or --simulate");
  }
  const Dataset pool = input.empty() ? simulate_from_kvlist(cfg.simulate, cfg) : load_dataset(input, cfg.k);

  TrialConfig tc;
  tc.n_gold = cfg.n;
  tc.trials = cfg.trials;
  tc.base_seed = cfg.seed;
  tc.estimators = cfg.estimators;
  tc.lambda_policy = cfg.lambda_policy;
  tc.k = pool.k;
  tc.level = cfg.level;
  tc.calibrate = cfg.calibrate;
  tc.bin_threshold = cfg.bin_threshold;
  if (cfg.unlabeled > 0) tc.n_unlabeled = cfg.unlabeled;
  tc.per_query_cost_usd = cfg.per_query_cost;
  tc.workers = cfg.workers;
  tc.scale = cfg.scale;
  if (tc.n_gold < 2) throw PreconditionError("--n must be >= 2");

  std::ostringstream os;
  if (cfg.ablate.empty()) {
    const SamplingReport r = run_resampling(pool, tc);
    if (cfg.format == "json") {
      os << to_json(r).dump(2) << '\n';
    } else if (cfg.format == "csv") {
      write_estimates_csv(r, os);
    } else {
      write_report_human(os, r, std::nullopt);
    }
  } else {
    const auto reports = ablate_unlabeled_size(pool, tc, cfg.ablate);
    if (cfg.format == "json") {
      json j = json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        j.push_back({{"multiplier", cfg.ablate[i]}, {"report", to_json(reports[i])}});
      }
      os << json{{"ablation", j}}.dump(2) << '\n';
    } else if (cfg.format == "csv") {
      for (std::size_t i = 0; i < reports.size(); ++i) write_estimates_csv(reports[i], os, i == 0, cfg.ablate[i]);
    } else {
      for (std::size_t i = 0; i < reports.size(); ++i) write_report_human(os, reports[i], cfg.ablate[i]);
    }
  }
  emit(cfg, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased top-K ranking metric estimation from gold and machine-annotated queries"};
  app.require_subcommand(1);

  CommandFlags est_flags, cal_flags, exp_flags;

  auto* est = app.add_subcommand("estimate", "Estimate Precision@K with gold-only, annotator-only and PPI estimators");
  add_common(est, est_flags);
  est->add_option("input", est_flags.input, "Dataset (JSON lines, or CSV by extension)")->required();

  auto* cal = app.add_subcommand("calibrate", "Fit an isotonic calibration map on the gold docs and print diagnostics");
  add_common(cal, cal_flags);
  cal_flags.add(cal, "bin-width", "Histogram bin width for diagnostics");
  cal->add_option("input", cal_flags.input, "Dataset with gold queries")->required();

  auto* exp = app.add_subcommand("experiment", "Resampling experiment over a fully labeled pool");
  add_common(exp, exp_flags);
  exp_flags.add(exp, "n", "Gold queries sampled per trial");
  exp_flags.add(exp, "trials", "Number of resampling trials");
  exp_flags.add(exp, "ablate", "Comma-separated unlabeled-size multipliers of n, e.g. 10,100,2000");
  exp_flags.add(exp, "simulate", "Synthetic pool: queries=,k=,rate=,profile=,shift=,concentration=,dispersion=,verbalize=");
  exp_flags.add(exp, "unlabeled", "Unlabeled queries per trial (0 = all non-gold queries)");
  exp_flags.add(exp, "per-query-cost", "Annotation cost per unlabeled query in USD");
  exp_flags.add(exp, "workers", "Worker threads for trials (output does not depend on it)");
  exp->add_option("pool", exp_flags.input, "Fully labeled pool (omit with --simulate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (est->parsed()) return cmd_estimate(build_config(est_flags.resolve()), est_flags.input);
    if (cal->parsed()) return cmd_calibrate(build_config(cal_flags.resolve()), cal_flags.input);
    if (exp->parsed()) return cmd_experiment(build_config(exp_flags.resolve()), exp_flags.input);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return kExitPrecondition;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}
