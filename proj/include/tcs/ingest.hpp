#pragma once

// Connectivity input (dense CSV, Matrix Market), Laplacian dynamics A = -L,
// and the two-stage cohort pipeline: rank nodes by the mean all-node score,
// then compare target and reduced scores on the top-m nodes per subject.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/detail/parallel.hpp"
#include "tcs/errors.hpp"
#include "tcs/gramian.hpp"
#include "tcs/reduction.hpp"
#include "tcs/scores.hpp"

namespace tcs {

enum class MatrixFormat { dense_csv, matrix_market };

/// Matrix Market for .mtx / .mm, dense CSV otherwise.
inline MatrixFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return (ext == ".mtx" || ext == ".mm") ? MatrixFormat::matrix_market : MatrixFormat::dense_csv;
}

struct LabeledMatrix {
  Matrix matrix;
  std::vector<std::string> labels;  // empty when the file carries none
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return in;
}

}  // namespace detail

/// Comma-separated rows; an optional first row of non-numeric labels.
inline LabeledMatrix read_dense_csv(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  LabeledMatrix out;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto cells = detail::split(view, ',');
    if (rows.empty() && out.labels.empty()) {
      const bool numeric = std::all_of(cells.begin(), cells.end(),
                                       [](std::string_view c) { return detail::parse_double(c).has_value(); });
      if (!numeric) {
        for (auto c : cells) out.labels.emplace_back(detail::trim(c));
        width = cells.size();
        continue;
      }
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(width) + " columns, found " + std::to_string(cells.size()),
                       line_no);
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = detail::parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ":" + std::to_string(c + 1) +
                             ": not a finite number: '" + std::string(detail::trim(cells[c])) + "'",
                         line_no, c + 1);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no numeric rows", line_no);
  out.matrix.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      out.matrix(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return out;
}

/// Matrix Market "matrix" objects: coordinate (real/integer/pattern, general,
/// symmetric or skew-symmetric) and array (real/integer, general or symmetric).
inline LabeledMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 0);
  ++line_no;
  std::istringstream banner(line);
  std::string tag, object, layout, field, symmetry;
  banner >> tag >> object >> layout >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  object = lower(object), layout = lower(layout), field = lower(field), symmetry = lower(symmetry);
  if (tag != "%%MatrixMarket" || object != "matrix")
    throw ParseError(path.string() + ":1: missing %%MatrixMarket matrix banner", 1);
  if (layout != "coordinate" && layout != "array")
    throw ParseError(path.string() + ":1: unsupported layout '" + layout + "'", 1);
  if (field != "real" && field != "integer" && field != "pattern" && field != "double")
    throw ParseError(path.string() + ":1: unsupported field '" + field + "'", 1);
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    throw ParseError(path.string() + ":1: unsupported symmetry '" + symmetry + "'", 1);
  const bool pattern = field == "pattern";
  const double mirror_sign = symmetry == "skew-symmetric" ? -1.0 : 1.0;
  const bool mirrored = symmetry != "general";

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      const std::string_view v = detail::trim(out);
      if (v.empty() || v.front() == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) throw ParseError(path.string() + ": missing size line", line_no);
  std::istringstream size_line(line);
  long long rows = 0, cols = 0, nnz = 0;
  size_line >> rows >> cols;
  if (layout == "coordinate") size_line >> nnz;
  if (!size_line || rows <= 0 || cols <= 0 || nnz < 0)
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed size line", line_no);

  LabeledMatrix out;
  out.matrix = Matrix::Zero(rows, cols);
  if (layout == "coordinate") {
    for (long long k = 0; k < nnz; ++k) {
      if (!next_data_line(line))
        throw ParseError(path.string() + ": expected " + std::to_string(nnz) + " entries, found " +
                             std::to_string(k),
                         line_no);
      std::istringstream entry(line);
      long long i = 0, j = 0;
      double v = 1.0;
      entry >> i >> j;
      if (!pattern) entry >> v;
      if (!entry || i < 1 || j < 1 || i > rows || j > cols || !std::isfinite(v))
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed entry '" + line + "'",
                         line_no);
      out.matrix(i - 1, j - 1) += v;
      if (mirrored && i != j) out.matrix(j - 1, i - 1) += mirror_sign * v;
    }
  } else {
    if (pattern) throw ParseError(path.string() + ":1: pattern field requires coordinate layout", 1);
    for (long long j = 0; j < cols; ++j)
      for (long long i = mirrored ? j : 0; i < rows; ++i) {
        if (!next_data_line(line))
          throw ParseError(path.string() + ": too few array values", line_no);
        const auto v = detail::parse_double(line);
        if (!v || !std::isfinite(*v))
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a finite number", line_no);
        out.matrix(i, j) = *v;
        if (mirrored && i != j) out.matrix(j, i) = mirror_sign * *v;
      }
  }
  return out;
}

/// One label per non-empty line.
inline std::vector<std::string> read_labels(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    const auto v = detail::trim(line);
    if (!v.empty()) labels.emplace_back(v);
  }
  return labels;
}

inline LabeledMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format,
                                 const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  LabeledMatrix lm = format == MatrixFormat::matrix_market ? read_matrix_market(path) : read_dense_csv(path);
  if (lm.matrix.rows() != lm.matrix.cols())
    throw ParseError(path.string() + ": matrix is not square (" + std::to_string(lm.matrix.rows()) + "x" +
                         std::to_string(lm.matrix.cols()) + ")",
                     0);
  if (labels_path) lm.labels = read_labels(*labels_path);
  if (!lm.labels.empty() && static_cast<Index>(lm.labels.size()) != lm.matrix.rows())
    throw ParseError(path.string() + ": " + std::to_string(lm.labels.size()) + " labels for " +
                         std::to_string(lm.matrix.rows()) + " nodes",
                     1);
  if (lm.labels.empty()) lm.labels = default_labels(lm.matrix.rows());
  return lm;
}

/// A dynamics matrix read verbatim (entries may be negative).
inline SystemMatrix load_system(const std::filesystem::path& path, MatrixFormat format,
                                const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  LabeledMatrix lm = read_matrix(path, format, labels_path);
  return SystemMatrix(std::move(lm.matrix), std::move(lm.labels));
}

// ---------------------------------------------------------------------------
// Connectivity and Laplacian dynamics

struct Connectivity {
  Matrix matrix;  // entry (i, j): weight of the connection from node i to node j
  std::string subject_id;
  std::vector<std::string> labels;

  void validate() const {
    if (matrix.rows() == 0 || matrix.rows() != matrix.cols())
      throw ValidationError("connectivity " + subject_id + " is not square");
    if (static_cast<Index>(labels.size()) != matrix.rows())
      throw ValidationError("connectivity " + subject_id + " has mismatched labels");
    for (Index i = 0; i < matrix.rows(); ++i)
      for (Index j = 0; j < matrix.cols(); ++j)
        if (!std::isfinite(matrix(i, j)) || matrix(i, j) < 0.0)
          throw ValidationError("connectivity " + subject_id + " entry (" + std::to_string(i + 1) + ", " +
                                std::to_string(j + 1) + ") must be finite and nonnegative");
  }
};

inline Connectivity load_matrix(const std::filesystem::path& path, MatrixFormat format,
                                const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  LabeledMatrix lm = read_matrix(path, format, labels_path);
  for (Index i = 0; i < lm.matrix.rows(); ++i)
    for (Index j = 0; j < lm.matrix.cols(); ++j)
      if (lm.matrix(i, j) < 0.0)
        throw ParseError(path.string() + ": negative weight at row " + std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1),
                         static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
  return {std::move(lm.matrix), path.stem().string(), std::move(lm.labels)};
}

inline Connectivity load_matrix(const std::filesystem::path& path) {
  return load_matrix(path, format_from_path(path));
}

/// A = -L with L = diag(row sums of C') - C' and C' the transposed connectivity.
inline SystemMatrix build_system(const Connectivity& conn) {
  conn.validate();
  const Matrix ct = conn.matrix.transpose();
  Matrix lap = -ct;
  lap.diagonal() += ct.rowwise().sum();
  return SystemMatrix(-lap, conn.labels);
}

// ---------------------------------------------------------------------------
// Cohort pipeline

enum class RankingBasis { mean_score, degree };

struct CohortOptions {
  double horizon = 1.0;
  Index m = 1;
  ScoreKind kind = ScoreKind::vcs;
  RankingBasis ranking = RankingBasis::mean_score;
  SolverOptions solver;
  GramianOptions gramian;
  unsigned jobs = 1;
};

struct SubjectResult {
  std::string subject_id;
  Vector p_target;
  Vector p_reduced;
  double diff_norm = 0.0;
  double a12_norm = 0.0;
  double delta_star = 0.0;
  bool converged = false;
};

struct SubjectFailure {
  std::string subject_id;
  std::string stage;
  std::string message;
};

struct CohortSummary {
  std::vector<SubjectResult> per_subject;
  std::vector<SubjectFailure> failures;
  double mean_diff = 0.0;
  double std_diff = 0.0;
  double mean_a12 = 0.0;
  double std_a12 = 0.0;
  std::vector<Index> target_indices;  // 0-based, ranked order
  std::vector<std::string> target_labels;
  std::vector<double> ranking_scores;  // per node, mean over ranked subjects
  std::string ranking_basis;
  std::vector<std::string> labels;
  CohortOptions options;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation (divides by the count).
inline MeanStd mean_population_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

/// Indices of the m largest scores; ties go to the lower index.
inline std::vector<Index> top_m(const std::vector<double>& scores, Index m) {
  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(m));
  return order;
}

/// Score of every node with all n nodes targeted.
inline Vector all_node_scores(const SystemMatrix& sys, const CohortOptions& opt) {
  const CanonicalSystem canon = canonicalize(sys, TargetSpec::leading(sys.n()));
  GramianOptions gopt = opt.gramian;
  const GramianSet gset = output_gramian_set(canon, opt.horizon, gopt);
  return solve_score(opt.kind, gset, opt.solver).p_star;
}

inline std::vector<Connectivity> load_cohort(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".csv" || ext == ".mtx" || ext == ".mm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError(dir.string() + " contains no .csv/.mtx matrices");
  std::vector<Connectivity> subjects;
  for (const auto& f : files) {
    subjects.push_back(load_matrix(f));
    const Connectivity& c = subjects.back();
    if (c.matrix.rows() != subjects.front().matrix.rows())
      throw ValidationError(f.string() + ": has " + std::to_string(c.matrix.rows()) + " nodes, expected " +
                            std::to_string(subjects.front().matrix.rows()));
    if (c.labels != subjects.front().labels)
      throw ValidationError(f.string() + ": node labels differ from " + subjects.front().subject_id);
  }
  return subjects;
}

inline CohortSummary cohort_run(const std::vector<Connectivity>& subjects, const CohortOptions& opt) {
  if (subjects.empty()) throw ValidationError("cohort is empty");
  detail::check_horizon(opt.horizon);
  opt.solver.validate();
  const Index n = subjects.front().matrix.rows();
  for (const auto& s : subjects)
    if (s.matrix.rows() != n)
      throw ValidationError("subject " + s.subject_id + " has " + std::to_string(s.matrix.rows()) +
                            " nodes, expected " + std::to_string(n));
  if (opt.m < 1 || opt.m > n)
    throw ValidationError("m = " + std::to_string(opt.m) + " outside [1, " + std::to_string(n) + "]");

  std::vector<SystemMatrix> systems;
  systems.reserve(subjects.size());
  for (const auto& s : subjects) systems.push_back(build_system(s));

  CohortSummary out;
  out.options = opt;
  out.labels = subjects.front().labels;
  GramianOptions inner = opt.gramian;
  inner.jobs = 1;
  CohortOptions inner_opt = opt;
  inner_opt.gramian = inner;

  // Stage 1: node ranking.
  const std::size_t count = subjects.size();
  std::vector<std::optional<Vector>> node_scores(count);
  std::vector<std::string> stage1_errors(count);
  if (opt.ranking == RankingBasis::degree) {
    out.ranking_basis = "degree";
    for (std::size_t s = 0; s < count; ++s)
      node_scores[s] = Vector(subjects[s].matrix.colwise().sum().transpose());
  } else {
    out.ranking_basis = opt.kind == ScoreKind::vcs ? "mean-VCS" : "mean-AECS";
    detail::parallel_for(count, opt.jobs, [&](std::size_t s) {
      try {
        node_scores[s] = all_node_scores(systems[s], inner_opt);
      } catch (const std::exception& e) {
        stage1_errors[s] = e.what();
      }
    });
  }
  std::vector<double> mean_scores(static_cast<std::size_t>(n), 0.0);
  std::size_t ranked = 0;
  for (std::size_t s = 0; s < count; ++s) {
    if (!node_scores[s]) {
      out.failures.push_back({subjects[s].subject_id, "ranking", stage1_errors[s]});
      continue;
    }
    ++ranked;
    for (Index i = 0; i < n; ++i) mean_scores[static_cast<std::size_t>(i)] += (*node_scores[s])(i);
  }
  if (ranked == 0) throw FeasibilityError("no subject could be scored for ranking", 0.0);
  for (double& v : mean_scores) v /= static_cast<double>(ranked);
  out.ranking_scores = mean_scores;
  out.target_indices = top_m(mean_scores, opt.m);
  for (Index i : out.target_indices) out.target_labels.push_back(out.labels[static_cast<std::size_t>(i)]);

  // Stage 2: target vs reduced comparison on the selected nodes.
  const TargetSpec targets(out.target_indices);
  std::vector<std::optional<SubjectResult>> results(count);
  std::vector<std::string> stage2_errors(count);
  detail::parallel_for(count, opt.jobs, [&](std::size_t s) {
    if (!node_scores[s]) return;  // already excluded at the ranking stage
    try {
      const CanonicalSystem canon = canonicalize(systems[s], targets);
      const ComparisonReport rep = comparison_report(opt.kind, canon, opt.horizon, opt.solver, inner);
      SubjectResult r;
      r.subject_id = subjects[s].subject_id;
      r.p_target = rep.p_target;
      r.p_reduced = rep.p_reduced;
      r.diff_norm = rep.diff_norm;
      r.a12_norm = rep.bounds.a12_norm;
      r.delta_star = rep.delta_star;
      r.converged = rep.target.converged && rep.reduced.converged;
      results[s] = std::move(r);
    } catch (const std::exception& e) {
      stage2_errors[s] = e.what();
    }
  });
  std::vector<double> diffs, a12s;
  for (std::size_t s = 0; s < count; ++s) {
    if (!results[s]) {
      if (node_scores[s]) out.failures.push_back({subjects[s].subject_id, "comparison", stage2_errors[s]});
      continue;
    }
    diffs.push_back(results[s]->diff_norm);
    a12s.push_back(results[s]->a12_norm);
    out.per_subject.push_back(std::move(*results[s]));
  }
  const MeanStd d = mean_population_std(diffs);
  const MeanStd a = mean_population_std(a12s);
  out.mean_diff = d.mean;
  out.std_diff = d.std;
  out.mean_a12 = a.mean;
  out.std_a12 = a.std;
  return out;
}

inline CohortSummary cohort_run(const std::filesystem::path& dir, const CohortOptions& opt) {
  return cohort_run(load_cohort(dir), opt);
}

}  // namespace tcs
