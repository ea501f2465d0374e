#pragma once

// JSON and CSV serialization of results. Field order is fixed and floating
// point values are always written with 17 significant digits, so identical
// inputs give byte-identical reports.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcs/gramian.hpp"
#include "tcs/ingest.hpp"
#include "tcs/reduction.hpp"
#include "tcs/scores.hpp"

namespace tcs {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) { os << "{}"; return; }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) { os << "[]"; return; }
      os << "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ", ";
        first = false;
        write_json(os, v, indent, depth + 1);
      }
      os << "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      // Non-finite values are not valid JSON numbers; write them as strings.
      if (!std::isfinite(v)) os << '"' << format_double(v) << '"';
      else os << format_double(v);
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Deterministic pretty-printer (arrays on one line).
inline std::string dump_json(const Json& j) {
  std::ostringstream os;
  detail::write_json(os, j, 2, 0);
  os << "\n";
  return os.str();
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const SolverOptions& o) {
  Json j;
  j["sigma"] = o.sigma;
  j["rho"] = o.rho;
  j["alpha0"] = o.alpha0;
  j["epsilon_stop"] = o.epsilon_stop;
  j["max_iters"] = o.max_iters;
  return j;
}

inline Json tolerances_json(const GramianOptions& g) {
  Json j;
  j["gramian_method"] = to_string(g.method);
  j["quadrature_rtol"] = g.quadrature_rtol;
  j["quadrature_max_intervals"] = g.quadrature_max_intervals;
  j["psd_tolerance"] = kPsdTolerance;
  j["rank_threshold"] = kRankThreshold;
  j["feasibility_tolerance"] = kFeasibilityTolerance;
  j["uniqueness_threshold"] = kUniquenessThreshold;
  j["max_backtracks"] = kMaxBacktracks;
  j["stationarity_tolerance"] = kStationarityTolerance;
  j["phi_branch_switch"] = kPhiSwitch;
  j["strong_convexity_samples"] = kStrongConvexitySamples;
  j["strong_convexity_floor"] = kStrongConvexityFloor;
  return j;
}

inline Json to_json(const UniquenessCertificate& c) {
  Json j;
  j["smallest_normalized_singular_value"] = c.smallest_normalized_singular_value;
  j["det_R"] = c.det_r;
  j["verdict"] = to_string(c.verdict);
  return j;
}

inline Json to_json(const ScoreResult& r) {
  Json j;
  j["p_star"] = to_json(r.p_star);
  j["objective_value"] = r.objective_value;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["stalled"] = r.stalled;
  j["feasibility_margin"] = r.feasibility_margin;
  j["stationarity_residual"] = r.stationarity_residual;
  j["uniqueness"] = to_json(r.uniqueness);
  j["objective_trace"] = to_json(r.objective_trace);
  return j;
}

inline Json to_json(const BoundInputs& b) {
  Json j;
  j["mu"] = b.mu;
  j["mu11"] = b.mu11;
  j["a12_norm"] = b.a12_norm;
  j["horizon"] = b.horizon;
  return j;
}

inline Json to_json(const ComparisonReport& r) {
  Json j;
  j["kind"] = to_string(r.kind);
  j["horizon"] = r.horizon;
  j["p_target"] = to_json(r.p_target);
  j["p_reduced"] = to_json(r.p_reduced);
  j["diff_norm"] = r.diff_norm;
  j["bound_inputs"] = to_json(r.bounds);
  j["delta_w_norms"] = to_json(r.delta_w_norms);
  j["epsilon_T"] = r.epsilon_t;
  j["epsilon_bound"] = r.epsilon_bound;
  j["phi_overflow"] = r.phi_overflow;
  j["delta_star"] = r.delta_star;
  j["margin"] = r.margin;
  j["reduced_feasible_in_full"] = r.reduced_feasible_in_full;
  j["bounds_applicable"] = r.bounds_applicable;
  j["theorem_eps"] = optional_json(r.theorem_eps);
  j["gamma"] = optional_json(r.gamma);
  j["mu_strong_estimate"] = optional_json(r.mu_strong_estimate);
  j["p_diff_bound"] = optional_json(r.p_diff_bound);
  j["p_diff_bound_is_estimate"] = r.p_diff_bound.has_value();
  if (r.sandwich) {
    Json s;
    s["lower_slack"] = r.sandwich->lower_slack;
    s["upper_slack"] = optional_json(r.sandwich->upper_slack);
    j["objective_sandwich"] = s;
  } else {
    j["objective_sandwich"] = nullptr;
  }
  j["target"] = to_json(r.target);
  j["reduced"] = to_json(r.reduced);
  return j;
}

inline Json to_json(const CohortSummary& c) {
  Json meta;
  meta["horizon"] = c.options.horizon;
  meta["m"] = c.options.m;
  meta["kind"] = to_string(c.options.kind);
  meta["ranking_basis"] = c.ranking_basis;
  meta["ranking_horizon"] = c.options.horizon;
  meta["ranking_problem"] = c.options.ranking == RankingBasis::degree
                                ? "weighted in-strength (row sums of the transposed connectivity)"
                                : "all nodes targeted (m = n), full Gramians, same solver options";
  meta["solver"] = to_json(c.options.solver);
  meta["tolerances"] = tolerances_json(c.options.gramian);
  meta["std_convention"] = "population";

  Json j;
  j["metadata"] = meta;
  Json idx = Json::array();
  for (Index i : c.target_indices) idx.push_back(i + 1);
  j["target_indices"] = idx;
  j["target_labels"] = c.target_labels;
  j["subjects"] = c.per_subject.size();
  j["failed"] = c.failures.size();
  j["mean_diff"] = c.mean_diff;
  j["std_diff"] = c.std_diff;
  j["mean_a12"] = c.mean_a12;
  j["std_a12"] = c.std_a12;
  j["ranking_scores"] = to_json(c.ranking_scores);
  Json subjects = Json::array();
  for (const auto& s : c.per_subject) {
    Json e;
    e["subject_id"] = s.subject_id;
    e["diff_norm"] = s.diff_norm;
    e["a12_norm"] = s.a12_norm;
    e["delta_star"] = s.delta_star;
    e["converged"] = s.converged;
    e["p_target"] = to_json(s.p_target);
    e["p_reduced"] = to_json(s.p_reduced);
    subjects.push_back(e);
  }
  j["per_subject"] = subjects;
  Json failures = Json::array();
  for (const auto& f : c.failures) {
    Json e;
    e["subject_id"] = f.subject_id;
    e["stage"] = f.stage;
    e["message"] = f.message;
    failures.push_back(e);
  }
  j["failures"] = failures;
  return j;
}

// ---------------------------------------------------------------------------
// CSV tables

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// One row per subject.
inline std::string cohort_subjects_csv(const CohortSummary& c) {
  std::string out = "subject_id,diff_norm,a12_norm,delta_star,converged\n";
  for (const auto& s : c.per_subject)
    out += csv_escape(s.subject_id) + "," + format_double(s.diff_norm) + "," + format_double(s.a12_norm) + "," +
           format_double(s.delta_star) + "," + (s.converged ? "true" : "false") + "\n";
  return out;
}

/// Single summary row in the mean +- std layout of the cohort tables.
inline std::string cohort_summary_csv(const CohortSummary& c) {
  std::string out = "T,m,kind,subjects,failed,mean_a12,std_a12,mean_diff,std_diff\n";
  out += format_double(c.options.horizon) + "," + std::to_string(c.options.m) + "," + to_string(c.options.kind) +
         "," + std::to_string(c.per_subject.size()) + "," + std::to_string(c.failures.size()) + "," +
         format_double(c.mean_a12) + "," + format_double(c.std_a12) + "," + format_double(c.mean_diff) + "," +
         format_double(c.std_diff) + "\n";
  return out;
}

/// Subject x node score matrix for box plots: one row per subject and
/// formulation (target / reduced), one column per selected node.
inline std::string cohort_boxplot_csv(const CohortSummary& c) {
  std::string out = "subject_id,formulation";
  for (const auto& l : c.target_labels) out += "," + csv_escape(l);
  out += "\n";
  for (const auto& s : c.per_subject) {
    for (int f = 0; f < 2; ++f) {
      const Vector& p = f == 0 ? s.p_target : s.p_reduced;
      out += csv_escape(s.subject_id) + (f == 0 ? ",target" : ",reduced");
      for (Index i = 0; i < p.size(); ++i) out += "," + format_double(p(i));
      out += "\n";
    }
  }
  return out;
}

}  // namespace tcs
