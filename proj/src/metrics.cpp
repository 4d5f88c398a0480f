#include "metrics.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "error.hpp"
#include "io_util.hpp"

namespace boneage {

using nlohmann::json;

namespace {

GroupMetrics group_metrics(const std::vector<double>& y,
                           const std::vector<double>& yhat,
                           const std::vector<std::size_t>& idx) {
  GroupMetrics g;
  g.n = static_cast<int>(idx.size());
  double abs_sum = 0.0, sq_sum = 0.0, ratio_sq_sum = 0.0;
  bool ratio_defined = true;
  for (std::size_t i : idx) {
    const double d = y[i] - yhat[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    if (y[i] == 0.0) {
      ratio_defined = false;
    } else if (ratio_defined) {
      const double r = d / y[i];
      ratio_sq_sum += r * r;
    }
  }
  g.mae = abs_sum / g.n;
  g.rmse = std::sqrt(sq_sum / g.n);
  if (ratio_defined) {
    g.rmspe = std::sqrt(ratio_sq_sum / g.n);
  }
  return g;
}

}  // namespace

MetricsReport compute_metrics(const std::vector<double>& y,
                              const std::vector<double>& yhat,
                              const std::vector<Cohort>& cohorts) {
  if (y.size() != yhat.size() || y.size() != cohorts.size() || y.empty()) {
    fail(ErrorKind::Shape,
         "metrics need equal nonempty actual/predicted/cohort lengths");
  }
  MetricsReport report;
  std::vector<std::size_t> all(y.size());
  std::map<Cohort, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) {
    all[i] = i;
    groups[cohorts[i]].push_back(i);
  }
  report.overall = group_metrics(y, yhat, all);
  for (const auto& [cohort, idx] : groups) {
    report.per_cohort[cohort] = group_metrics(y, yhat, idx);
  }
  return report;
}

double rmspe(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size() || y.empty()) {
    fail(ErrorKind::Shape, "rmspe needs equal nonempty lengths");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      fail(ErrorKind::Domain, "rmspe is undefined for a zero target");
    }
    const double r = (y[i] - yhat[i]) / y[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

namespace {

json group_to_json(const GroupMetrics& g) {
  json j;
  j["n"] = g.n;
  j["mae"] = g.mae;
  j["rmse"] = g.rmse;
  if (g.rmspe) {
    j["rmspe"] = *g.rmspe;
    j["rmspe_percent"] = *g.rmspe * 100.0;
  } else {
    j["rmspe"] = nullptr;
    j["rmspe_percent"] = nullptr;
  }
  return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["overall"] = group_to_json(report.overall);
  json per = json::object();
  for (const auto& [cohort, g] : report.per_cohort) {
    per[cohort_name(cohort)] = group_to_json(g);
  }
  j["per_cohort"] = per;
  return j.dump(2) + "\n";
}

namespace {

void append_row(std::string& out, const std::string& label,
                const GroupMetrics& g) {
  char buf[160];
  if (g.rmspe) {
    std::snprintf(buf, sizeof(buf), "%-10s %6d %12.6f %12.6f %12.6f %12.6f\n",
                  label.c_str(), g.n, g.mae, g.rmse, *g.rmspe,
                  *g.rmspe * 100.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%-10s %6d %12.6f %12.6f %12s %12s\n",
                  label.c_str(), g.n, g.mae, g.rmse, "undefined", "undefined");
  }
  out += buf;
}

}  // namespace

std::string report_to_text(const MetricsReport& report) {
  std::string out;
  char header[160];
  std::snprintf(header, sizeof(header), "%-10s %6s %12s %12s %12s %12s\n",
                "group", "n", "mae", "rmse", "rmspe", "rmspe_pct");
  out += header;
  append_row(out, "overall", report.overall);
  for (const auto& [cohort, g] : report.per_cohort) {
    append_row(out, cohort_name(cohort), g);
  }
  return out;
}

std::string scatter_csv(const std::vector<double>& y,
                        const std::vector<double>& yhat,
                        const std::vector<Cohort>& cohorts) {
  if (y.size() != yhat.size() || y.size() != cohorts.size()) {
    fail(ErrorKind::Shape,
         "scatter export needs equal actual/predicted/cohort lengths");
  }
  std::string out = "actual,predicted,cohort\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    out += format_double(y[i]);
    out += ',';
    out += format_double(yhat[i]);
    out += ',';
    out += cohort_name(cohorts[i]);
    out += '\n';
  }
  return out;
}

}  // namespace boneage
