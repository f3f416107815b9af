// epsel: run EP / state-evolution experiments from a JSON configuration.

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "epsel/error.hpp"
#include "epsel/experiment.hpp"
#include "epsel/report.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitAllTrialsFailed = 3;

void print_summary(const epsel::ResultSet& rs) {
  using epsel::Mode;
  const auto& c = rs.config;
  fmt::print("mode {}  N = {}  M = {}  delta = {:.6g}  sigma2 = {:.6g}\n", epsel::to_string(c.mode),
             c.n, c.m(), c.realized_delta(), c.sigma2);
  if (c.mode == Mode::sweep && rs.threshold) {
    for (const auto& r : rs.threshold->rows) {
      fmt::print("  {} = {:<8.4g} fixed points {}  attractor mse {:.6g}\n", rs.threshold->axis,
                 r.axis_value, r.fp_count, r.attractor_mse);
    }
    if (rs.threshold->threshold) {
      fmt::print("threshold estimate {} = {:.6g}{}\n", rs.threshold->axis,
                 *rs.threshold->threshold, rs.threshold->crossover ? "" : " (no crossover)");
    } else {
      fmt::print("no trailing run of unique fixed points\n");
    }
    return;
  }
  if (c.mode == Mode::se && rs.se) {
    for (std::size_t t = 0; t < rs.se->predicted_mse.size(); ++t) {
      fmt::print("  t = {:<3} v_ba {:.6g}  v_ab {:.6g}  mse {:.6g}\n", t, rs.se->mse_ba[t],
                 rs.se->mse_ab[t], rs.se->predicted_mse[t]);
    }
    return;
  }
  for (const auto& row : rs.comparison) {
    fmt::print("  t = {:<3} mc {:.6g} +- {:.3g}  se {:.6g}  rel dev {:.3g}\n", row.iter,
               row.mc_mean, row.mc_std, row.se_pred, row.rel_dev);
  }
  if (c.mode == Mode::diagnose) {
    int passed = 0;
    for (const auto& d : rs.diagnostics) passed += d.report.pass ? 1 : 0;
    fmt::print("identity checks passed in {}/{} trials\n", passed, rs.diagnostics.size());
  }
  if (rs.failed_trials > 0) fmt::print("{} of {} trials failed\n", rs.failed_trials, c.trials);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EP recovery and state-evolution experiments"};
  std::string mode_arg;
  std::string config_path;
  std::optional<long> n;
  std::optional<double> delta;
  std::optional<double> sigma2;
  std::optional<unsigned long long> seed;
  std::optional<int> trials;
  std::optional<std::string> mode_flag;
  std::optional<std::string> out_dir;
  std::string timestamp;
  std::string log_level = "warn";

  app.add_option("MODE", mode_arg, "simulate | se | compare | sweep | diagnose");
  app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--n", n, "signal dimension N");
  app.add_option("--delta", delta, "compression rate M/N");
  app.add_option("--sigma2", sigma2, "noise variance");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--trials", trials, "number of trials");
  app.add_option("--mode", mode_flag, "mode (same as the positional argument)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--timestamp", timestamp, "timestamp used in output file names");
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw epsel::ValidationError("<file>", fmt::format("{}: {}", config_path, e.what()));
      }
    }
    if (!doc.is_object()) throw epsel::ValidationError("<root>", "must be a JSON object");
    if (mode_flag && !mode_arg.empty() && *mode_flag != mode_arg) {
      throw epsel::ValidationError(
          {{"mode", fmt::format("positional mode \"{}\" conflicts with --mode \"{}\"", mode_arg,
                                *mode_flag)}});
    }
    if (mode_flag) doc["mode"] = *mode_flag;
    if (!mode_arg.empty()) doc["mode"] = mode_arg;
    if (n) doc["n"] = *n;
    if (delta) doc["delta"] = *delta;
    if (sigma2) doc["sigma2"] = *sigma2;
    if (seed) doc["base_seed"] = *seed;
    if (trials) doc["trials"] = *trials;
    if (out_dir) doc["output_dir"] = *out_dir;

    const epsel::ExperimentConfig config = epsel::parse_config(doc);
    epsel::RunContext ctx;
    ctx.timestamp = timestamp;
    const epsel::ResultSet rs = epsel::run_experiment(config, ctx);
    print_summary(rs);
    for (const auto& path : epsel::emit_report(rs, config.formats, config.output_dir)) {
      fmt::print("wrote {}\n", path.string());
    }
    if (!rs.trials.empty() && rs.failed_trials == static_cast<int>(rs.trials.size())) {
      fmt::print(stderr, "all {} trials failed\n", rs.failed_trials);
      return kExitAllTrialsFailed;
    }
    return 0;
  } catch (const epsel::ValidationError& e) {
    fmt::print(stderr, "invalid configuration:\n");
    for (const auto& f : e.fields()) fmt::print(stderr, "  {}: {}\n", f.name, f.reason);
    return kExitValidation;
  } catch (const epsel::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    switch (e.code()) {
      case epsel::Errc::invalid_dimension:
      case epsel::Errc::invalid_parameter:
      case epsel::Errc::invalid_variance:
      case epsel::Errc::unsupported_shape:
      case epsel::Errc::validation:
        return kExitValidation;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
