#include "epsel/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "epsel/error.hpp"

namespace epsel {

using nlohmann::json;

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.17g}", x);
}

json complex_table(const CMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

json real_table(const RMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json real_vector(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json se_json(const SeTrajectory& se) {
  return {{"mse_ba", se.mse_ba},
          {"mse_ab", se.mse_ab},
          {"predicted_mse", se.predicted_mse},
          {"gamma", se.gamma}};
}

// --- SVG --------------------------------------------------------------------

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

struct Band {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
};

class Chart {
 public:
  Chart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add(Series s) { series_.push_back(std::move(s)); }
  void set_band(Band b) { band_ = std::move(b); }

  [[nodiscard]] std::string render() const {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -x_min;
    double y_min = x_min;
    double y_max = -x_min;
    const auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
      for (double v : xs) {
        x_min = std::min(x_min, v);
        x_max = std::max(x_max, v);
      }
      for (double v : ys) {
        if (!std::isfinite(v)) continue;
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
      }
    };
    for (const Series& s : series_) extend(s.x, s.y);
    if (band_) {
      extend(band_->x, band_->lo);
      extend(band_->x, band_->hi);
    }
    if (!std::isfinite(x_min)) x_min = 0.0, x_max = 1.0;
    if (!std::isfinite(y_min)) y_min = 0.0, y_max = 1.0;
    const bool log_y = y_min > 0.0;
    const auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    double lo = ty(y_min);
    double hi = ty(y_max);
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    if (x_max - x_min < 1e-12) x_min -= 0.5, x_max += 0.5;

    const auto px = [&](double v) { return kLeft + (v - x_min) / (x_max - x_min) * kPlotW; };
    const auto py = [&](double v) {
      const double c = std::clamp(ty(std::max(v, log_y ? y_min : v)), lo, hi);
      return kTop + (hi - c) / (hi - lo) * kPlotH;
    };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} "
        "{}\">\n",
        kWidth, kHeight, kWidth, kHeight);
    out += fmt::format("<title>{}</title>\n", escape(title_));
    out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
                       kWidth, kHeight);
    out += fmt::format(
        "<path d=\"M{0} {1} L{0} {2} L{3} {2}\" fill=\"none\" stroke=\"black\"/>\n", kLeft, kTop,
        kTop + kPlotH, kLeft + kPlotW);
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        kLeft + kPlotW / 2, kHeight - 8, escape(x_label_));
    out += fmt::format(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 14 {})\">{}{}</text>\n",
        kTop + kPlotH / 2, kTop + kPlotH / 2, escape(y_label_), log_y ? " (log)" : "");
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                       kLeft - 4, kTop + 4, fmt::format("{:.3g}", y_max));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                       kLeft - 4, kTop + kPlotH, fmt::format("{:.3g}", y_min));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", kLeft,
                       kTop + kPlotH + 14, fmt::format("{:.3g}", x_min));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                       kLeft + kPlotW, kTop + kPlotH + 14, fmt::format("{:.3g}", x_max));

    if (band_ && !band_->x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < band_->x.size(); ++i) {
        pts += fmt::format("{:.2f},{:.2f} ", px(band_->x[i]), py(band_->hi[i]));
      }
      for (std::size_t i = band_->x.size(); i-- > 0;) {
        pts += fmt::format("{:.2f},{:.2f} ", px(band_->x[i]), py(band_->lo[i]));
      }
      pts.pop_back();
      out += fmt::format(
          "<polygon class=\"band\" points=\"{}\" fill=\"#1f77b4\" fill-opacity=\"0.2\" "
          "stroke=\"none\"/>\n",
          pts);
    }
    int legend_y = kTop + 12;
    for (const Series& s : series_) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      }
      if (!pts.empty()) pts.pop_back();
      out += fmt::format(
          "<polyline class=\"series\" data-name=\"{}\" points=\"{}\" fill=\"none\" "
          "stroke=\"{}\" stroke-width=\"1.5\"/>\n",
          escape(s.name), pts, s.color);
      out += fmt::format(
          "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", kLeft + kPlotW - 150,
          legend_y, s.color, escape(s.name));
      legend_y += 14;
    }
    out += "</svg>\n";
    return out;
  }

 private:
  static constexpr int kWidth = 640;
  static constexpr int kHeight = 400;
  static constexpr int kLeft = 70;
  static constexpr int kTop = 30;
  static constexpr int kPlotW = 540;
  static constexpr int kPlotH = 320;

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  }

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Series> series_;
  std::optional<Band> band_;
};

std::vector<double> iota_vector(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
  return v;
}

}  // namespace

json to_json(const ResultSet& rs) {
  json config = to_json(rs.config);
  config["m"] = rs.config.m();
  config["delta_realized"] = rs.config.realized_delta();

  json trials = json::array();
  for (const TrialResult& t : rs.trials) {
    json iters = json::array();
    for (const EpIteration& it : t.iterations) {
      iters.push_back({{"t", it.t},
                       {"mse", it.mse},
                       {"mse_ab", it.mse_ab},
                       {"v_ab", it.v_ab},
                       {"v_ba", it.v_ba},
                       {"gamma", it.gamma}});
    }
    json jt{{"trial", t.trial}, {"seed", t.seed}, {"failed", t.failed}, {"iterations", iters}};
    if (t.failed) {
      jt["failed_iteration"] = t.failed_iteration;
      jt["error"] = t.error;
    }
    trials.push_back(std::move(jt));
  }

  json agg = json::array();
  for (const AggregateRow& a : rs.aggregate) {
    agg.push_back({{"iter", a.iter},
                   {"trials", a.count},
                   {"mse_mean", a.mse_mean},
                   {"mse_std", a.mse_std},
                   {"v_ab_mean", a.v_ab_mean},
                   {"v_ba_mean", a.v_ba_mean}});
  }

  json cmp = json::array();
  for (const ComparisonRow& c : rs.comparison) {
    cmp.push_back({{"iter", c.iter},
                   {"mc_mean", c.mc_mean},
                   {"mc_std", c.mc_std},
                   {"se_pred", c.se_pred},
                   {"rel_dev", c.rel_dev}});
  }

  json doc{{"config", std::move(config)},
           {"timestamp", rs.timestamp},
           {"wall_seconds", rs.wall_seconds},
           {"failed_trials", rs.failed_trials},
           {"trials", std::move(trials)},
           {"aggregate", std::move(agg)},
           {"comparison", std::move(cmp)}};
  doc["se"] = rs.se ? se_json(*rs.se) : json(nullptr);

  if (rs.threshold) {
    json rows = json::array();
    for (const ThresholdRow& r : rs.threshold->rows) {
      rows.push_back({{"value", r.axis_value},
                      {"fp_count", r.fp_count},
                      {"unique", r.unique},
                      {"attractor_mse", r.attractor_mse},
                      {"grid_exhausted", r.grid_exhausted}});
    }
    doc["threshold"] = {{"axis", rs.threshold->axis},
                        {"rows", std::move(rows)},
                        {"threshold", rs.threshold->threshold ? json(*rs.threshold->threshold)
                                                              : json(nullptr)},
                        {"crossover", rs.threshold->crossover}};
  }
  if (rs.predictions) {
    const CovarianceTables& p = *rs.predictions;
    doc["predictions"] = {{"zeta", complex_table(p.zeta)},
                          {"zeta_se", real_table(p.zeta_se)},
                          {"gamma2", complex_table(p.gamma2)},
                          {"m_cov", complex_table(p.m_cov)},
                          {"nu", real_vector(p.nu)}};
  }
  if (!rs.diagnostics.empty()) {
    json diag = json::array();
    for (const DiagnoseTrial& d : rs.diagnostics) {
      diag.push_back({{"trial", d.trial},
                      {"seed", d.seed},
                      {"mu", real_vector(d.mu)},
                      {"rank_deficient", d.rank_deficient},
                      {"report", d.report}});
    }
    doc["diagnostics"] = std::move(diag);
  }
  return doc;
}

std::string render_json(const ResultSet& rs) { return to_json(rs).dump(2) + "\n"; }

std::string render_csv(const ResultSet& rs) {
  std::string out;
  if (rs.config.mode == Mode::se) {
    out += "iter,mse_ba,mse_ab,predicted_mse,gamma\n";
    if (rs.se) {
      const SeTrajectory& se = *rs.se;
      for (std::size_t t = 0; t < se.mse_ab.size(); ++t) {
        out += fmt::format("{},{},{},{},{}\n", t, num(se.mse_ba[t]), num(se.mse_ab[t]),
                           num(se.predicted_mse[t]), num(se.gamma[t]));
      }
    }
    return out;
  }
  if (rs.config.mode == Mode::sweep) {
    out += "axis,value,fp_count,unique,attractor_mse,grid_exhausted\n";
    if (rs.threshold) {
      for (const ThresholdRow& r : rs.threshold->rows) {
        out += fmt::format("{},{},{},{},{},{}\n", rs.threshold->axis, num(r.axis_value),
                           r.fp_count, r.unique ? 1 : 0, num(r.attractor_mse),
                           r.grid_exhausted ? 1 : 0);
      }
      out += "\nthreshold,crossover\n";
      out += fmt::format("{},{}\n",
                         rs.threshold->threshold ? num(*rs.threshold->threshold) : "none",
                         rs.threshold->crossover ? 1 : 0);
    }
    return out;
  }

  out += "iter,trial,mse_emp,v_ab,v_ba,gamma\n";
  for (const TrialResult& t : rs.trials) {
    if (t.failed) continue;
    for (const EpIteration& it : t.iterations) {
      out += fmt::format("{},{},{},{},{},{}\n", it.t, t.trial, num(it.mse), num(it.v_ab),
                         num(it.v_ba), num(it.gamma));
    }
  }
  out += "\niter,trials,mse_mean,mse_std,se_pred,rel_dev\n";
  for (const AggregateRow& a : rs.aggregate) {
    const auto i = static_cast<std::size_t>(a.iter);
    const bool has_se = rs.se && i < rs.se->predicted_mse.size() && a.count > 0;
    const double pred = has_se ? rs.se->predicted_mse[i] : std::nan("");
    const double rel = has_se ? std::abs(a.mse_mean - pred) / pred : std::nan("");
    out += fmt::format("{},{},{},{},{},{}\n", a.iter, a.count, num(a.mse_mean), num(a.mse_std),
                       num(pred), num(rel));
  }
  return out;
}

std::string render_svg(const ResultSet& rs) {
  const ExperimentConfig& c = rs.config;
  if (c.mode == Mode::sweep) {
    Chart chart(fmt::format("fixed-point scan over {}", rs.threshold ? rs.threshold->axis : ""),
                rs.threshold ? rs.threshold->axis : "axis", "attractor MSE");
    Series s{"attractor MSE", "#d62728", {}, {}};
    if (rs.threshold) {
      for (const ThresholdRow& r : rs.threshold->rows) {
        s.x.push_back(r.axis_value);
        s.y.push_back(r.attractor_mse);
      }
    }
    chart.add(std::move(s));
    return chart.render();
  }

  Chart chart(fmt::format("{}: N = {}, delta = {:.4g}, sigma2 = {:.4g}", to_string(c.mode), c.n,
                          c.realized_delta(), c.sigma2),
              "iteration", "MSE");
  if (c.mode != Mode::se && !rs.aggregate.empty()) {
    Series mc{"MC mean", "#1f77b4", {}, {}};
    Band band;
    for (const AggregateRow& a : rs.aggregate) {
      if (a.count == 0) continue;
      const auto x = static_cast<double>(a.iter);
      mc.x.push_back(x);
      mc.y.push_back(a.mse_mean);
      band.x.push_back(x);
      band.lo.push_back(std::max(a.mse_mean - a.mse_std, 1e-300));
      band.hi.push_back(a.mse_mean + a.mse_std);
    }
    chart.set_band(std::move(band));
    chart.add(std::move(mc));
  }
  if (rs.se) {
    chart.add({"SE prediction", "#d62728", iota_vector(rs.se->predicted_mse.size()),
               rs.se->predicted_mse});
  }
  return chart.render();
}

std::string report_file_name(const ResultSet& rs, OutputFormat format) {
  return fmt::format("{}_{}_{}.{}", to_string(rs.config.mode), rs.timestamp, rs.config.base_seed,
                     to_string(format));
}

std::vector<std::filesystem::path> emit_report(const ResultSet& rs,
                                               const std::vector<OutputFormat>& formats,
                                               const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  if (formats.empty()) {
    spdlog::warn("no output formats requested; nothing written");
    return written;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(Errc::io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  }
  for (OutputFormat f : formats) {
    const std::filesystem::path path = dir / report_file_name(rs, f);
    std::string body;
    switch (f) {
      case OutputFormat::csv: body = render_csv(rs); break;
      case OutputFormat::json: body = render_json(rs); break;
      case OutputFormat::svg: body = render_svg(rs); break;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, fmt::format("cannot open {} for writing", path.string()));
    out << body;
    out.close();
    if (!out) throw Error(Errc::io, fmt::format("write to {} failed", path.string()));
    written.push_back(path);
  }
  return written;
}

}  // namespace epsel
