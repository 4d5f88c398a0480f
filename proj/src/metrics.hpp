#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annotations.hpp"

namespace boneage {

/// Error summary for one group of predictions. rmspe is the dimensionless
/// ratio form sqrt(mean(((y - yhat)/y)^2)); it is absent when the group
/// contains a zero target, where the ratio is undefined.
struct GroupMetrics {
  int n = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> rmspe;
};

struct MetricsReport {
  GroupMetrics overall;
  std::map<Cohort, GroupMetrics> per_cohort;  // cohorts present in the input
};

/// MAE, RMSE, and RMSPE overall and per cohort. Equal nonempty lengths
/// required (ShapeError). Zero targets mark the affected group's rmspe
/// undefined instead of poisoning the rest of the report.
MetricsReport compute_metrics(const std::vector<double>& y,
                              const std::vector<double>& yhat,
                              const std::vector<Cohort>& cohorts);

/// Strict RMSPE: DomainError when any target is zero.
double rmspe(const std::vector<double>& y, const std::vector<double>& yhat);

/// Canonical JSON (sorted keys, two-space indent, trailing newline).
/// Undefined rmspe serializes as null; rmspe_percent is the same ratio
/// times 100.
std::string report_to_json(const MetricsReport& report);

/// Fixed-width table with six decimal places; undefined rmspe prints as
/// "undefined".
std::string report_to_text(const MetricsReport& report);

/// CSV with header actual,predicted,cohort, rows in input order, values at
/// full round-trip precision.
std::string scatter_csv(const std::vector<double>& y,
                        const std::vector<double>& yhat,
                        const std::vector<Cohort>& cohorts);

}  // namespace boneage
