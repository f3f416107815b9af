#include "epsel/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "epsel/error.hpp"
#include "epsel/parallel.hpp"
#include "epsel/random.hpp"

namespace epsel {

using nlohmann::json;

namespace {

constexpr std::string_view kModeNames[] = {"simulate", "se", "compare", "sweep", "diagnose"};
constexpr std::string_view kFormatNames[] = {"csv", "json", "svg"};

const std::set<std::string> kTopLevelKeys = {
    "mode",      "n",          "delta",         "sigma2",         "ensemble",
    "prior",     "iterations", "trials",        "base_seed",      "tolerances",
    "early_stop_tol", "mc_samples", "reference_n", "output_dir", "formats", "sweep"};

// Reads fields into a config and collects every problem instead of stopping at the first.
class FieldReader {
 public:
  explicit FieldReader(std::vector<ValidationError::Field>& errors) : errors_(errors) {}

  template <class T>
  void read(const json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(path, fmt::format("expected {}, got {}", type_name<T>(), obj.at(key).dump()));
    }
  }

  void fail(std::string path, std::string reason) {
    errors_.push_back({std::move(path), std::move(reason)});
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else return "an array";
  }

  std::vector<ValidationError::Field>& errors_;
};

void check(std::vector<ValidationError::Field>& errors, bool ok, std::string field,
           std::string reason) {
  if (!ok) errors.push_back({std::move(field), std::move(reason)});
}

std::vector<ValidationError::Field> validation_errors(const ExperimentConfig& c) {
  std::vector<ValidationError::Field> e;
  check(e, c.n >= 1, "n", fmt::format("must be >= 1, got {}", c.n));
  const bool delta_ok = c.delta > 0.0 && c.delta <= 1.0;
  check(e, delta_ok, "delta", fmt::format("must lie in (0, 1], got {}", c.delta));
  if (delta_ok && c.n >= 1) {
    check(e, c.m() >= 1, "delta", fmt::format("round(delta * N) = {} must be >= 1", c.m()));
  }
  check(e, c.sigma2 > 0.0 && std::isfinite(c.sigma2), "sigma2",
        fmt::format("must be positive, got {}", c.sigma2));
  check(e, c.prior.rho_s > 0.0 && c.prior.rho_s <= 1.0, "prior.rho_s",
        fmt::format("must lie in (0, 1], got {}", c.prior.rho_s));
  check(e, c.prior.active_var > 0.0, "prior.active_var",
        fmt::format("must be positive, got {}", c.prior.active_var));
  check(e, std::abs(c.prior.rho_s * c.prior.active_var - 1.0) <= 1e-9, "prior",
        fmt::format("rho_s * active_var = {} must equal 1", c.prior.rho_s * c.prior.active_var));
  check(e, c.iterations >= 1, "iterations", fmt::format("must be >= 1, got {}", c.iterations));
  check(e, c.trials >= 1, "trials", fmt::format("must be >= 1, got {}", c.trials));
  if (c.mode == Mode::compare) {
    check(e, c.trials >= 2, "trials", "compare mode needs at least 2 trials");
  }
  check(e, c.tolerances.tol_scale > 0.0, "tolerances.tol_scale", "must be positive");
  check(e, c.tolerances.rel_tol >= 0.0, "tolerances.rel_tol", "must be >= 0");
  check(e, c.early_stop_tol >= 0.0, "early_stop_tol", "must be >= 0");
  check(e, c.mc_samples >= 100'000, "mc_samples", "must be >= 100000");
  check(e, c.reference_n >= 2, "reference_n", "must be >= 2");
  check(e, !c.output_dir.empty(), "output_dir", "must not be empty");

  if (c.ensemble.kind == EnsembleKind::custom_spectrum) {
    const auto& sv = c.ensemble.singular_values;
    const bool finite = std::all_of(sv.begin(), sv.end(),
                                    [](double s) { return std::isfinite(s) && s >= 0.0; });
    check(e, finite, "ensemble.singular_values", "must be finite and >= 0");
    check(e, std::any_of(sv.begin(), sv.end(), [](double s) { return s > 0.0; }),
          "ensemble.singular_values", "needs at least one positive value");
    if (c.mode != Mode::se && c.mode != Mode::sweep && delta_ok && c.n >= 1) {
      check(e, static_cast<Index>(sv.size()) == c.m(), "ensemble.singular_values",
            fmt::format("has {} entries, expected M = {}", sv.size(), c.m()));
    }
  }

  if (c.mode == Mode::sweep) {
    if (!c.sweep || c.sweep->values.empty()) {
      e.push_back({"sweep.values", "sweep mode needs a nonempty axis list"});
    } else {
      const auto& s = *c.sweep;
      check(e, s.axis == "delta" || s.axis == "sigma2", "sweep.axis",
            fmt::format("must be \"delta\" or \"sigma2\", got \"{}\"", s.axis));
      check(e, std::is_sorted(s.values.begin(), s.values.end()), "sweep.values",
            "must be sorted ascending");
      if (s.axis == "delta") {
        check(e, std::all_of(s.values.begin(), s.values.end(),
                             [](double d) { return d > 0.0 && d <= 1.0; }),
              "sweep.values", "delta values must lie in (0, 1]");
      } else if (s.axis == "sigma2") {
        check(e, std::all_of(s.values.begin(), s.values.end(), [](double v) { return v > 0.0; }),
              "sweep.values", "sigma2 values must be positive");
      }
      check(e, s.grid.v_min > 0.0 && s.grid.v_max > s.grid.v_min && s.grid.points >= 2,
            "sweep.grid", "needs 0 < v_min < v_max and at least 2 points");
    }
  }
  return e;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::function<double()> steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

unsigned workers_for(const RunContext& ctx) {
  return ctx.workers > 0 ? ctx.workers : worker_count();
}

std::vector<TrialResult> run_trials(const ExperimentConfig& config, const RunContext& ctx) {
  std::vector<TrialResult> out(static_cast<std::size_t>(config.trials));
  parallel_for(
      out.size(), [&](std::size_t i) { out[i] = run_trial(config, static_cast<int>(i)); },
      workers_for(ctx));
  return out;
}

}  // namespace

std::string_view to_string(Mode mode) { return kModeNames[static_cast<int>(mode)]; }

std::string_view to_string(OutputFormat format) { return kFormatNames[static_cast<int>(format)]; }

std::optional<Mode> mode_from_string(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kModeNames[i] == name) return static_cast<Mode>(i);
  }
  return std::nullopt;
}

std::optional<OutputFormat> format_from_string(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (kFormatNames[i] == name) return static_cast<OutputFormat>(i);
  }
  return std::nullopt;
}

Index ExperimentConfig::m() const {
  return static_cast<Index>(std::llround(delta * static_cast<double>(n)));
}

double ExperimentConfig::realized_delta() const {
  return static_cast<double>(m()) / static_cast<double>(n);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

ExperimentConfig parse_config(const json& doc) {
  std::vector<ValidationError::Field> errors;
  if (!doc.is_object()) {
    throw ValidationError("<root>", "configuration must be a JSON object");
  }
  ExperimentConfig c;
  FieldReader r(errors);

  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.count(key)) errors.push_back({key, "unknown field"});
  }

  if (doc.contains("mode")) {
    std::string name;
    r.read(doc, "mode", "mode", name);
    if (auto m = mode_from_string(name)) {
      c.mode = *m;
    } else if (!name.empty()) {
      errors.push_back({"mode", fmt::format("unknown mode \"{}\"", name)});
    }
  }
  r.read(doc, "n", "n", c.n);
  r.read(doc, "delta", "delta", c.delta);
  r.read(doc, "sigma2", "sigma2", c.sigma2);
  r.read(doc, "iterations", "iterations", c.iterations);
  r.read(doc, "trials", "trials", c.trials);
  r.read(doc, "base_seed", "base_seed", c.base_seed);
  r.read(doc, "early_stop_tol", "early_stop_tol", c.early_stop_tol);
  r.read(doc, "mc_samples", "mc_samples", c.mc_samples);
  r.read(doc, "reference_n", "reference_n", c.reference_n);
  r.read(doc, "output_dir", "output_dir", c.output_dir);

  if (doc.contains("ensemble")) {
    const json& ens = doc.at("ensemble");
    if (!ens.is_object()) {
      errors.push_back({"ensemble", "must be an object"});
    } else {
      std::string kind = std::string(to_string(c.ensemble.kind));
      r.read(ens, "kind", "ensemble.kind", kind);
      try {
        c.ensemble.kind = ensemble_kind_from_string(kind);
      } catch (const Error&) {
        errors.push_back({"ensemble.kind", fmt::format("unknown ensemble \"{}\"", kind)});
      }
      r.read(ens, "singular_values", "ensemble.singular_values", c.ensemble.singular_values);
      for (const auto& [key, _] : ens.items()) {
        if (key != "kind" && key != "singular_values") {
          errors.push_back({"ensemble." + key, "unknown field"});
        }
      }
    }
  }

  if (doc.contains("prior")) {
    const json& pr = doc.at("prior");
    if (!pr.is_object()) {
      errors.push_back({"prior", "must be an object"});
    } else {
      // active_var defaults to 1 / rho_s when omitted.
      r.read(pr, "rho_s", "prior.rho_s", c.prior.rho_s);
      c.prior.active_var = c.prior.rho_s > 0.0 ? 1.0 / c.prior.rho_s : 1.0;
      r.read(pr, "active_var", "prior.active_var", c.prior.active_var);
      for (const auto& [key, _] : pr.items()) {
        if (key != "rho_s" && key != "active_var") errors.push_back({"prior." + key, "unknown field"});
      }
    }
  }

  if (doc.contains("tolerances")) {
    const json& tol = doc.at("tolerances");
    if (!tol.is_object()) {
      errors.push_back({"tolerances", "must be an object"});
    } else {
      r.read(tol, "tol_scale", "tolerances.tol_scale", c.tolerances.tol_scale);
      r.read(tol, "rel_tol", "tolerances.rel_tol", c.tolerances.rel_tol);
      for (const auto& [key, _] : tol.items()) {
        if (key != "tol_scale" && key != "rel_tol") {
          errors.push_back({"tolerances." + key, "unknown field"});
        }
      }
    }
  }

  if (doc.contains("formats")) {
    const json& f = doc.at("formats");
    if (!f.is_array()) {
      errors.push_back({"formats", "must be an array"});
    } else {
      c.formats.clear();
      for (const json& item : f) {
        const auto fmt_value = item.is_string() ? format_from_string(item.get<std::string>())
                                                : std::nullopt;
        if (!fmt_value) {
          errors.push_back({"formats", fmt::format("unknown format {}", item.dump())});
        } else if (std::find(c.formats.begin(), c.formats.end(), *fmt_value) ==
                   c.formats.end()) {
          c.formats.push_back(*fmt_value);
        }
      }
      std::sort(c.formats.begin(), c.formats.end());
    }
  }

  if (doc.contains("sweep") && !doc.at("sweep").is_null()) {
    const json& sw = doc.at("sweep");
    if (!sw.is_object()) {
      errors.push_back({"sweep", "must be an object"});
    } else {
      SweepSpec s;
      r.read(sw, "axis", "sweep.axis", s.axis);
      r.read(sw, "values", "sweep.values", s.values);
      if (sw.contains("grid")) {
        const json& g = sw.at("grid");
        r.read(g, "v_min", "sweep.grid.v_min", s.grid.v_min);
        r.read(g, "v_max", "sweep.grid.v_max", s.grid.v_max);
        r.read(g, "points", "sweep.grid.points", s.grid.points);
      }
      c.sweep = std::move(s);
    }
  }

  auto semantic = validation_errors(c);
  errors.insert(errors.end(), semantic.begin(), semantic.end());
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("<file>", fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(doc);
}

void validate(const ExperimentConfig& config) {
  auto errors = validation_errors(config);
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

json to_json(const ExperimentConfig& c) {
  json formats = json::array();
  for (OutputFormat f : c.formats) formats.push_back(std::string(to_string(f)));
  json doc{
      {"mode", std::string(to_string(c.mode))},
      {"n", c.n},
      {"delta", c.delta},
      {"sigma2", c.sigma2},
      {"ensemble",
       {{"kind", std::string(to_string(c.ensemble.kind))},
        {"singular_values", c.ensemble.singular_values}}},
      {"prior", {{"rho_s", c.prior.rho_s}, {"active_var", c.prior.active_var}}},
      {"iterations", c.iterations},
      {"trials", c.trials},
      {"base_seed", c.base_seed},
      {"tolerances",
       {{"tol_scale", c.tolerances.tol_scale}, {"rel_tol", c.tolerances.rel_tol}}},
      {"early_stop_tol", c.early_stop_tol},
      {"mc_samples", c.mc_samples},
      {"reference_n", c.reference_n},
      {"output_dir", c.output_dir},
      {"formats", formats},
  };
  if (c.sweep) {
    doc["sweep"] = {{"axis", c.sweep->axis},
                    {"values", c.sweep->values},
                    {"grid",
                     {{"v_min", c.sweep->grid.v_min},
                      {"v_max", c.sweep->grid.v_max},
                      {"points", c.sweep->grid.points}}}};
  } else {
    doc["sweep"] = nullptr;
  }
  return doc;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials) {
  std::size_t length = 0;
  for (const auto& t : trials) {
    if (!t.failed) length = std::max(length, t.iterations.size());
  }
  std::vector<AggregateRow> rows(length);
  for (std::size_t i = 0; i < length; ++i) {
    AggregateRow& row = rows[i];
    row.iter = static_cast<int>(i);
    double sum = 0.0, v_ab = 0.0, v_ba = 0.0;
    for (const auto& t : trials) {
      if (t.failed || t.iterations.size() <= i) continue;
      ++row.count;
      sum += t.iterations[i].mse;
      v_ab += t.iterations[i].v_ab;
      v_ba += t.iterations[i].v_ba;
    }
    if (row.count == 0) continue;
    row.mse_mean = sum / row.count;
    row.v_ab_mean = v_ab / row.count;
    row.v_ba_mean = v_ba / row.count;
    double ss = 0.0;
    for (const auto& t : trials) {
      if (t.failed || t.iterations.size() <= i) continue;
      const double d = t.iterations[i].mse - row.mse_mean;
      ss += d * d;
    }
    row.mse_std = row.count > 1 ? std::sqrt(ss / (row.count - 1)) : 0.0;
  }
  return rows;
}

SpectralDensity config_spectrum(const ExperimentConfig& config, double delta) {
  return limiting_spectrum(config.ensemble, delta, config.reference_n, Seed{config.base_seed});
}

TrialResult run_trial(const ExperimentConfig& config, int trial) {
  TrialResult out;
  out.trial = trial;
  const Seed seed = Seed{config.base_seed}.trial(static_cast<std::uint64_t>(trial));
  out.seed = seed.value;
  try {
    const MeasurementModel model =
        build_measurement(config.ensemble, config.m(), config.n, config.sigma2, seed);
    const CVector x = sample_signal(config.prior, config.n, seed);
    Rng noise_rng = make_rng(seed, Stream::noise);
    const CVector w = complex_normal_vector(noise_rng, config.m(), config.sigma2);
    const CVector y = model.apply(x) + w;
    EpOptions opts;
    opts.early_stop_tol = config.early_stop_tol;
    out.iterations = run_ep(model, config.prior, y, x, config.iterations, opts).iterations;
  } catch (const NumericalFailure& e) {
    out.failed = true;
    out.failed_iteration = e.iteration();
    out.error = e.what();
    spdlog::warn("trial {} (seed {}) failed at iteration {}: {}", trial, seed.value,
                 e.iteration(), e.what());
  }
  return out;
}

std::vector<ComparisonRow> comparison_table(const std::vector<AggregateRow>& rows,
                                            const SeTrajectory& se) {
  std::vector<ComparisonRow> out;
  for (const AggregateRow& row : rows) {
    const auto i = static_cast<std::size_t>(row.iter);
    if (row.count == 0 || i >= se.predicted_mse.size()) continue;
    ComparisonRow c;
    c.iter = row.iter;
    c.mc_mean = row.mse_mean;
    c.mc_std = row.mse_std;
    c.se_pred = se.predicted_mse[i];
    c.rel_dev = std::abs(c.mc_mean - c.se_pred) / c.se_pred;
    out.push_back(c);
  }
  return out;
}

std::vector<ComparisonRow> compare_se_mc(const ExperimentConfig& config, const RunContext& ctx) {
  ExperimentConfig c = config;
  c.mode = Mode::compare;
  validate(c);
  const auto trials = run_trials(c, ctx);
  const auto se = se_recursion(c.prior, config_spectrum(c, c.realized_delta()), c.sigma2,
                               c.iterations);
  return comparison_table(aggregate(trials), se);
}

void locate_threshold(ThresholdReport& report) {
  report.threshold.reset();
  report.crossover = false;
  const auto& rows = report.rows;
  std::size_t start = rows.size();
  while (start > 0 && rows[start - 1].unique) --start;
  if (start == rows.size()) return;
  report.threshold = rows[start].axis_value;
  report.crossover = start > 0 && rows[start - 1].fp_count > 1;
}

ThresholdReport sweep_threshold(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.mode = Mode::sweep;
  validate(c);
  const SweepSpec& sweep = *c.sweep;
  ThresholdReport report;
  report.axis = sweep.axis;
  report.rows.resize(sweep.values.size());

  parallel_for(sweep.values.size(), [&](std::size_t i) {
    const double value = sweep.values[i];
    const bool delta_axis = sweep.axis == "delta";
    const double delta = delta_axis ? value : c.realized_delta();
    const double sigma2 = delta_axis ? c.sigma2 : value;
    const auto fp = se_fixed_points(c.prior, config_spectrum(c, delta), sigma2, sweep.grid);
    ThresholdRow& row = report.rows[i];
    row.axis_value = value;
    row.fp_count = static_cast<int>(fp.points.size());
    row.attractor_mse = fp.attractor.mse;
    row.unique = fp.unique;
    row.grid_exhausted = fp.grid_exhausted;
  });
  locate_threshold(report);
  return report;
}

ResultSet run_experiment(const ExperimentConfig& config, const RunContext& ctx) {
  validate(config);
  const auto clock = ctx.clock ? ctx.clock : steady_clock_seconds();
  const double start = clock();

  ResultSet rs;
  rs.config = config;
  rs.timestamp = ctx.timestamp.empty() ? utc_timestamp() : ctx.timestamp;

  switch (config.mode) {
    case Mode::simulate:
    case Mode::compare: {
      rs.trials = run_trials(config, ctx);
      rs.aggregate = aggregate(rs.trials);
      rs.se = se_recursion(config.prior, config_spectrum(config, config.realized_delta()),
                           config.sigma2, config.iterations);
      rs.comparison = comparison_table(rs.aggregate, *rs.se);
      break;
    }
    case Mode::se:
      rs.se = se_recursion(config.prior, config_spectrum(config, config.realized_delta()),
                           config.sigma2, config.iterations);
      break;
    case Mode::sweep:
      rs.threshold = sweep_threshold(config);
      break;
    case Mode::diagnose: {
      const SpectralDensity spectrum = config_spectrum(config, config.realized_delta());
      McOptions mc;
      mc.samples = config.mc_samples;
      mc.seed = config.base_seed;
      rs.predictions = predict_error_covariance(config.prior, spectrum, config.sigma2,
                                                config.iterations, mc);
      rs.se = rs.predictions->se;
      const auto n_trials = static_cast<std::size_t>(config.trials);
      rs.trials.resize(n_trials);
      std::vector<std::optional<DiagnoseTrial>> diag(n_trials);
      parallel_for(
          n_trials,
          [&](std::size_t i) {
            TrialResult& tr = rs.trials[i];
            tr.trial = static_cast<int>(i);
            const Seed seed = Seed{config.base_seed}.trial(i);
            tr.seed = seed.value;
            try {
              const MeasurementModel model = build_measurement(
                  config.ensemble, config.m(), config.n, config.sigma2, seed);
              const CVector x = sample_signal(config.prior, config.n, seed);
              Rng noise_rng = make_rng(seed, Stream::noise);
              const CVector w = complex_normal_vector(noise_rng, config.m(), config.sigma2);
              ErrorTrace trace = instrumented_run(model, config.prior, x, w, config.iterations);
              trace.seed = seed.value;
              for (int t = 0; t < trace.iterations; ++t) {
                const auto k = static_cast<std::size_t>(t);
                tr.iterations.push_back(EpIteration{t, trace.v_ba[k], trace.v_ab[k],
                                                    trace.gamma[k], trace.mse[k],
                                                    trace.mse_ab[k]});
              }
              DiagnoseTrial d;
              d.trial = tr.trial;
              d.seed = seed.value;
              d.report = orthogonality_report(trace, *rs.predictions, config.tolerances);
              d.mu = trace.mu;
              d.rank_deficient = trace.rank_deficient;
              diag[i] = std::move(d);
            } catch (const NumericalFailure& e) {
              tr.failed = true;
              tr.failed_iteration = e.iteration();
              tr.error = e.what();
            }
          },
          workers_for(ctx));
      for (auto& d : diag) {
        if (d) rs.diagnostics.push_back(std::move(*d));
      }
      rs.aggregate = aggregate(rs.trials);
      rs.comparison = comparison_table(rs.aggregate, *rs.se);
      break;
    }
  }

  rs.failed_trials = static_cast<int>(
      std::count_if(rs.trials.begin(), rs.trials.end(), [](const TrialResult& t) { return t.failed; }));
  rs.wall_seconds = clock() - start;
  return rs;
}

}  // namespace epsel
