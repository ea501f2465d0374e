#pragma once

// Command-line front end: score, compare, bounds, uniqueness and cohort.
// Exit status: 0 success, 1 invalid input, 2 numerical failure (including a
// solver that ran out of iterations; the partial result is still written).

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/errors.hpp"
#include "tcs/gramian.hpp"
#include "tcs/ingest.hpp"
#include "tcs/reduction.hpp"
#include "tcs/report.hpp"
#include "tcs/scores.hpp"

namespace tcs::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Command { score, compare, bounds, uniqueness, cohort };
enum class OutputFormat { json, csv };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::score: return "score";
    case Command::compare: return "compare";
    case Command::bounds: return "bounds";
    case Command::uniqueness: return "uniqueness";
    case Command::cohort: return "cohort";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::score;
  std::filesystem::path input;
  std::optional<std::filesystem::path> labels;
  std::filesystem::path cohort_dir;
  bool laplacian = false;  // input is a connectivity matrix; use A = -L
  bool reduced = false;    // score / uniqueness on the reduced problem
  std::string targets;     // "1,2,5" (1-based) or "top:<m>"
  double horizon = 0.0;
  Index m = 0;             // cohort target count
  ScoreKind kind = ScoreKind::vcs;
  RankingBasis ranking = RankingBasis::mean_score;
  GramianOptions gramian;
  SolverOptions solver;
  unsigned jobs = detail::default_jobs();
  std::optional<std::filesystem::path> output;  // stdout when empty
  std::optional<std::filesystem::path> csv_prefix;
  OutputFormat format = OutputFormat::json;

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("--T must be positive");
    solver.validate();
    if (jobs == 0) throw ValidationError("--jobs must be positive");
    if (command == Command::cohort) {
      if (cohort_dir.empty()) throw ValidationError("cohort requires --dir");
      if (m < 1) throw ValidationError("cohort requires --m >= 1");
    } else {
      if (input.empty()) throw ValidationError(std::string(to_string(command)) + " requires --input");
      if (targets.empty()) throw ValidationError(std::string(to_string(command)) + " requires --targets");
    }
  }
};

/// Parses argv into a RunConfig. Returns nullopt after printing help; throws
/// ValidationError on malformed arguments.
inline std::optional<RunConfig> parse_args(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Target controllability scores for linear network dynamics", "tcs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  const std::map<std::string, ScoreKind> kinds{{"vcs", ScoreKind::vcs}, {"aecs", ScoreKind::aecs}};
  const std::map<std::string, GramianMethod> methods{{"block-exp", GramianMethod::block_exponential},
                                                     {"quadrature", GramianMethod::quadrature}};
  const std::map<std::string, OutputFormat> formats{{"json", OutputFormat::json}, {"csv", OutputFormat::csv}};
  const std::map<std::string, RankingBasis> rankings{{"score", RankingBasis::mean_score},
                                                     {"degree", RankingBasis::degree}};
  std::string output, labels, csv_prefix;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--T", cfg.horizon, "Time horizon T > 0")->required();
    sub->add_option("--kind", cfg.kind, "Score kind")->transform(CLI::CheckedTransformer(kinds, CLI::ignore_case));
    sub->add_option("--method", cfg.gramian.method, "Gramian method")
        ->transform(CLI::CheckedTransformer(methods, CLI::ignore_case));
    sub->add_option("--sigma", cfg.solver.sigma, "Armijo sufficient-decrease constant");
    sub->add_option("--rho", cfg.solver.rho, "Armijo backtracking factor");
    sub->add_option("--alpha0", cfg.solver.alpha0, "Initial Armijo step");
    sub->add_option("--eps", cfg.solver.epsilon_stop, "Stopping tolerance on ||p_k - p_{k+1}||");
    sub->add_option("--max-iters", cfg.solver.max_iters, "Iteration cap");
    sub->add_option("--jobs", cfg.jobs, "Worker threads");
    sub->add_option("--output,-o", output, "Report path (stdout when omitted)");
    sub->add_option("--format", cfg.format, "Report format")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  };
  auto single = [&](CLI::App* sub) {
    common(sub);
    sub->add_option("--input,-i", cfg.input, "System matrix (.csv or .mtx)")->required();
    sub->add_option("--labels", labels, "Node labels file, one per line");
    sub->add_flag("--laplacian", cfg.laplacian, "Treat input as connectivity and use A = -L");
    sub->add_option("--targets", cfg.targets, "Comma list of 1-based indices, or top:<m>")->required();
  };

  CLI::App* score = app.add_subcommand("score", "Target VCS/AECS of one system");
  single(score);
  score->add_flag("--reduced", cfg.reduced, "Score the reduced system x' = A11 x instead");
  CLI::App* compare = app.add_subcommand("compare", "Target vs reduced scores with error bounds");
  single(compare);
  CLI::App* bounds = app.add_subcommand("bounds", "Gramian gap bounds and relative errors");
  single(bounds);
  CLI::App* uniq = app.add_subcommand("uniqueness", "Uniqueness certificate");
  single(uniq);
  uniq->add_flag("--reduced", cfg.reduced, "Certify the reduced problem instead");
  CLI::App* cohort = app.add_subcommand("cohort", "Two-stage cohort pipeline over a directory");
  common(cohort);
  cohort->add_option("--dir", cfg.cohort_dir, "Directory of connectivity matrices")->required();
  cohort->add_option("--m", cfg.m, "Number of targets")->required();
  cohort->add_option("--rank-by", cfg.ranking, "Node ranking basis")
      ->transform(CLI::CheckedTransformer(rankings, CLI::ignore_case));
  cohort->add_option("--csv-prefix", csv_prefix, "Also write <prefix>_{subjects,summary,boxplot}.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return std::nullopt;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ValidationError(e.what());
  }
  if (score->parsed()) cfg.command = Command::score;
  else if (compare->parsed()) cfg.command = Command::compare;
  else if (bounds->parsed()) cfg.command = Command::bounds;
  else if (uniq->parsed()) cfg.command = Command::uniqueness;
  else cfg.command = Command::cohort;
  if (!output.empty()) cfg.output = output;
  if (!labels.empty()) cfg.labels = labels;
  if (!csv_prefix.empty()) cfg.csv_prefix = csv_prefix;
  cfg.gramian.jobs = cfg.jobs;
  return cfg;
}

namespace detail {

inline void configure_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("tcs");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("TCS_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

inline std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  for (auto cell : tcs::detail::split(s, ',')) {
    const auto v = tcs::detail::parse_double(cell);
    if (!v || *v != std::floor(*v))
      throw ValidationError("--targets: '" + std::string(tcs::detail::trim(cell)) + "' is not an integer");
    out.push_back(static_cast<Index>(*v));
  }
  return out;
}

inline SystemMatrix load_input(const RunConfig& cfg) {
  const MatrixFormat fmt = format_from_path(cfg.input);
  if (!cfg.laplacian) return load_system(cfg.input, fmt, cfg.labels);
  return build_system(load_matrix(cfg.input, fmt, cfg.labels));
}

inline TargetSpec resolve_targets(const RunConfig& cfg, const SystemMatrix& sys) {
  if (cfg.targets.rfind("top:", 0) == 0) {
    const auto v = tcs::detail::parse_double(cfg.targets.substr(4));
    if (!v || *v < 1 || *v > static_cast<double>(sys.n()) || *v != std::floor(*v))
      throw ValidationError("--targets top:<m> needs 1 <= m <= " + std::to_string(sys.n()));
    CohortOptions opt;
    opt.horizon = cfg.horizon;
    opt.kind = cfg.kind;
    opt.solver = cfg.solver;
    opt.gramian = cfg.gramian;
    const Vector s = all_node_scores(sys, opt);
    const std::vector<double> scores(s.data(), s.data() + s.size());
    return TargetSpec(top_m(scores, static_cast<Index>(*v)));
  }
  return TargetSpec::from_one_based(parse_index_list(cfg.targets));
}

inline Json header_json(const RunConfig& cfg) {
  Json j;
  j["tool"] = "tcs";
  j["version"] = kVersion;
  j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  j["command"] = to_string(cfg.command);
  Json in;
  if (cfg.command == Command::cohort) {
    in["dir"] = cfg.cohort_dir.string();
    in["m"] = cfg.m;
    in["rank_by"] = cfg.ranking == RankingBasis::degree ? "degree" : "score";
  } else {
    in["input"] = cfg.input.string();
    in["laplacian"] = cfg.laplacian;
    in["targets"] = cfg.targets;
    in["reduced"] = cfg.reduced;
  }
  in["T"] = cfg.horizon;
  in["kind"] = tcs::to_string(cfg.kind);
  j["inputs"] = in;
  j["solver"] = to_json(cfg.solver);
  j["tolerances"] = tolerances_json(cfg.gramian);
  return j;
}

inline Json targets_json(const CanonicalSystem& canon) {
  Json t = Json::array();
  for (Index i = 0; i < canon.m(); ++i) {
    Json e;
    e["index"] = canon.permutation[static_cast<std::size_t>(i)] + 1;
    e["label"] = canon.labels[static_cast<std::size_t>(i)];
    t.push_back(e);
  }
  return t;
}

inline void emit(const RunConfig& cfg, const std::string& text) {
  if (!cfg.output) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(*cfg.output, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + cfg.output->string());
  out << text;
}

inline std::string score_csv(const CanonicalSystem& canon, const ScoreResult& r) {
  std::string out = "index,label,score\n";
  for (Index i = 0; i < canon.m(); ++i)
    out += std::to_string(canon.permutation[static_cast<std::size_t>(i)] + 1) + "," +
           csv_escape(canon.labels[static_cast<std::size_t>(i)]) + "," + format_double(r.p_star(i)) + "\n";
  return out;
}

inline std::string compare_csv(const CanonicalSystem& canon, const ComparisonReport& r) {
  std::string out = "index,label,p_target,p_reduced,delta_w_norm\n";
  for (Index i = 0; i < canon.m(); ++i)
    out += std::to_string(canon.permutation[static_cast<std::size_t>(i)] + 1) + "," +
           csv_escape(canon.labels[static_cast<std::size_t>(i)]) + "," + format_double(r.p_target(i)) + "," +
           format_double(r.p_reduced(i)) + "," + format_double(r.delta_w_norms[static_cast<std::size_t>(i)]) +
           "\n";
  return out;
}

inline int run_single(const RunConfig& cfg) {
  const SystemMatrix sys = load_input(cfg);
  const TargetSpec targets = resolve_targets(cfg, sys);
  const CanonicalSystem canon = canonicalize(sys, targets);
  spdlog::info("{}: n = {}, m = {}, T = {}", to_string(cfg.command), canon.n(), canon.m(), cfg.horizon);
  Json report = header_json(cfg);
  report["targets"] = targets_json(canon);
  int status = 0;

  switch (cfg.command) {
    case Command::score: {
      const GramianSet gset = cfg.reduced ? reduced_gramian_set(canon, cfg.horizon, cfg.gramian)
                                          : output_gramian_set(canon, cfg.horizon, cfg.gramian);
      const ScoreResult r = solve_score(cfg.kind, gset, cfg.solver, &canon);
      if (!r.converged) {
        spdlog::error("solver stopped after {} iterations without converging", r.iterations);
        status = 2;
      }
      report["flavor"] = tcs::to_string(gset.flavor);
      report["result"] = to_json(r);
      emit(cfg, cfg.format == OutputFormat::csv ? score_csv(canon, r) : dump_json(report));
      break;
    }
    case Command::compare: {
      const ComparisonReport r = comparison_report(cfg.kind, canon, cfg.horizon, cfg.solver, cfg.gramian);
      if (!r.target.converged || !r.reduced.converged) {
        spdlog::error("a solver stopped without converging");
        status = 2;
      }
      report["result"] = to_json(r);
      emit(cfg, cfg.format == OutputFormat::csv ? compare_csv(canon, r) : dump_json(report));
      break;
    }
    case Command::bounds: {
      const GramianSet full = output_gramian_set(canon, cfg.horizon, cfg.gramian);
      const GramianSet red = reduced_gramian_set(canon, cfg.horizon, cfg.gramian);
      const BoundInputs b = BoundInputs::from(canon, cfg.horizon);
      const PhiValue ph = phi(b.mu, cfg.horizon);
      const GramianGap gap = gramian_gap(full, red);
      const Vector uniform = Vector::Constant(canon.m(), 1.0 / static_cast<double>(canon.m()));
      Json res;
      res["bound_inputs"] = to_json(b);
      res["phi"] = ph.value;
      res["phi_overflow"] = ph.overflow;
      res["epsilon_bound"] = b.epsilon_bound();
      res["delta_w_norms"] = to_json(gap.delta_w_norms);
      bool holds = true;
      for (double d : gap.delta_w_norms) holds = holds && d <= b.epsilon_bound() + 1e-12;
      res["gap_bound_holds"] = holds;
      if (is_feasible(uniform, full)) {
        const DeltaQuantities d = delta_quantities(full, gap, {uniform}, b);
        res["epsilon_T_uniform"] = d.epsilon_at[0];
        res["delta_T_uniform"] = d.delta_at[0];
        res["delta_star_uniform"] = d.delta_star;
        res["margin_uniform"] = d.margin;
      } else {
        res["epsilon_T_uniform"] = nullptr;
        spdlog::warn("uniform weights are infeasible; relative errors omitted");
      }
      if (cfg.laplacian) res["log_norm_nonzero"] = std::abs(b.mu) > kLaplacianLogNormSlack;
      report["result"] = res;
      if (cfg.format == OutputFormat::csv) {
        std::string out = "index,label,delta_w_norm,epsilon_bound\n";
        for (Index i = 0; i < canon.m(); ++i)
          out += std::to_string(canon.permutation[static_cast<std::size_t>(i)] + 1) + "," +
                 csv_escape(canon.labels[static_cast<std::size_t>(i)]) + "," +
                 format_double(gap.delta_w_norms[static_cast<std::size_t>(i)]) + "," +
                 format_double(b.epsilon_bound()) + "\n";
        emit(cfg, out);
      } else {
        emit(cfg, dump_json(report));
      }
      break;
    }
    case Command::uniqueness: {
      const GramianSet gset = cfg.reduced ? reduced_gramian_set(canon, cfg.horizon, cfg.gramian)
                                          : output_gramian_set(canon, cfg.horizon, cfg.gramian);
      const UniquenessCertificate c = uniqueness_certificate(gset, canon);
      report["flavor"] = tcs::to_string(gset.flavor);
      report["result"] = to_json(c);
      if (cfg.format == OutputFormat::csv) {
        emit(cfg, "smallest_normalized_singular_value,det_R,verdict\n" +
                      format_double(c.smallest_normalized_singular_value) + "," + format_double(c.det_r) + "," +
                      tcs::to_string(c.verdict) + "\n");
      } else {
        emit(cfg, dump_json(report));
      }
      break;
    }
    case Command::cohort: break;
  }
  return status;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

inline int run_cohort(const RunConfig& cfg) {
  CohortOptions opt;
  opt.horizon = cfg.horizon;
  opt.m = cfg.m;
  opt.kind = cfg.kind;
  opt.ranking = cfg.ranking;
  opt.solver = cfg.solver;
  opt.gramian = cfg.gramian;
  opt.jobs = cfg.jobs;
  const CohortSummary summary = cohort_run(cfg.cohort_dir, opt);
  if (!summary.failures.empty())
    spdlog::warn("{} subject(s) excluded after solver or feasibility failures", summary.failures.size());
  Json report = header_json(cfg);
  report["result"] = to_json(summary);
  emit(cfg, cfg.format == OutputFormat::csv ? cohort_summary_csv(summary) : dump_json(report));
  if (cfg.csv_prefix) {
    const std::string prefix = cfg.csv_prefix->string();
    write_file(prefix + "_subjects.csv", cohort_subjects_csv(summary));
    write_file(prefix + "_summary.csv", cohort_summary_csv(summary));
    write_file(prefix + "_boxplot.csv", cohort_boxplot_csv(summary));
  }
  return summary.per_subject.empty() ? 2 : 0;
}

}  // namespace detail

/// Executes a parsed configuration and maps failures onto exit codes.
inline int run(const RunConfig& cfg) {
  detail::configure_logging();
  try {
    cfg.validate();
    return cfg.command == Command::cohort ? detail::run_cohort(cfg) : detail::run_single(cfg);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const FeasibilityError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const AccuracyError& e) {
    spdlog::error("{} (residual {})", e.what(), e.residual());
    return 2;
  } catch (const LineSearchError& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}

/// parse_args + run; argument errors exit with status 1.
inline int main(int argc, const char* const* argv) {
  detail::configure_logging();
  std::optional<RunConfig> cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  if (!cfg) return 0;
  return run(*cfg);
}

}  // namespace tcs::cli
