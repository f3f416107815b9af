#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "epsel/experiment.hpp"
#include "epsel/report.hpp"

using namespace epsel;
namespace fs = std::filesystem;

namespace {

const RunContext kFixed{.timestamp = "20260101T000000Z", .clock = [] { return 0.0; }};

ResultSet simulate(int trials = 3) {
  ExperimentConfig c;
  c.n = 64;
  c.iterations = 3;
  c.trials = trials;
  c.base_seed = 5;
  return run_experiment(c, kFixed);
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("epsel_report_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("simulate CSV layout") {
  const auto rs = simulate();
  const std::string csv = render_csv(rs);
  CHECK(csv.rfind("iter,trial,mse_emp,v_ab,v_ba,gamma\n", 0) == 0);
  CHECK(csv.find("\n\niter,trials,mse_mean,mse_std,se_pred,rel_dev\n") != std::string::npos);
  // 1 header + 3x3 rows + blank + 1 header + 3 aggregate rows
  CHECK(occurrences(csv, "\n") == 1 + 9 + 1 + 1 + 3);
}

TEST_CASE("se CSV layout") {
  ExperimentConfig c;
  c.mode = Mode::se;
  c.iterations = 4;
  const auto csv = render_csv(run_experiment(c, kFixed));
  CHECK(csv.rfind("iter,mse_ba,mse_ab,predicted_mse,gamma\n", 0) == 0);
  CHECK(occurrences(csv, "\n") == 5);
}

TEST_CASE("JSON carries the config echo") {
  const auto rs = simulate();
  const auto doc = nlohmann::json::parse(render_json(rs));
  auto echo = doc.at("config");
  CHECK(echo.at("m") == 32);
  CHECK(echo.at("delta_realized") == 0.5);
  echo.erase("m");
  echo.erase("delta_realized");
  CHECK(echo == to_json(rs.config));
  CHECK(doc.at("timestamp") == "20260101T000000Z");
}

TEST_CASE("SVG has one polyline per series") {
  const std::string svg = render_svg(simulate());
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(occurrences(svg, "<polyline class=\"series\"") == 2);
  CHECK(occurrences(svg, "<polygon class=\"band\"") == 1);

  ExperimentConfig c;
  c.mode = Mode::se;
  const std::string se_svg = render_svg(run_experiment(c, kFixed));
  CHECK(occurrences(se_svg, "<polyline class=\"series\"") == 1);
  CHECK(occurrences(se_svg, "<polygon class=\"band\"") == 0);
}

TEST_CASE("file names") {
  const auto rs = simulate(2);
  CHECK(report_file_name(rs, OutputFormat::csv) == "simulate_20260101T000000Z_5.csv");
  CHECK(report_file_name(rs, OutputFormat::svg) == "simulate_20260101T000000Z_5.svg");
}

TEST_CASE("emit_report") {
  const auto rs = simulate(2);
  const fs::path dir = scratch("emit");
  CHECK(emit_report(rs, {}, dir).empty());
  CHECK_FALSE(fs::exists(dir));

  const auto paths =
      emit_report(rs, {OutputFormat::csv, OutputFormat::json, OutputFormat::svg}, dir / "nested");
  REQUIRE(paths.size() == 3);
  for (const auto& p : paths) CHECK(fs::exists(p));
  CHECK(slurp(paths[0]) == render_csv(rs));
  fs::remove_all(dir);
}

TEST_CASE("identical inputs give identical bytes") {
  const fs::path a = scratch("a");
  const fs::path b = scratch("b");
  const std::vector<OutputFormat> all{OutputFormat::csv, OutputFormat::json, OutputFormat::svg};
  const auto pa = emit_report(simulate(), all, a);
  const auto pb = emit_report(simulate(), all, b);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(slurp(pa[i]) == slurp(pb[i]));
  fs::remove_all(a);
  fs::remove_all(b);
}
