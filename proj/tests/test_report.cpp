#include <gtest/gtest.h>

#include "support.hpp"
#include "tcs/report.hpp"

using namespace tcs;

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "Infinity");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "NaN");
  test::Rng rng(71);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(DumpJson, FixedOrderAndNonFiniteAsStrings) {
  Json j;
  j["zeta"] = 1;
  j["alpha"] = 0.25;
  j["list"] = Json::array({1.5, std::numeric_limits<double>::infinity()});
  j["nested"] = {{"b", true}, {"a", nullptr}};
  const std::string s = dump_json(j);
  EXPECT_LT(s.find("zeta"), s.find("alpha"));
  EXPECT_NE(s.find("[1.5, \"Infinity\"]"), std::string::npos) << s;
  const Json back = Json::parse(s);
  EXPECT_EQ(back["alpha"].get<double>(), 0.25);
  EXPECT_TRUE(back["nested"]["a"].is_null());
}

TEST(DumpJson, ComparisonReportIsDeterministicAndParses) {
  const CanonicalSystem c = canonicalize(SystemMatrix(test::rotor()), TargetSpec::leading(2));
  const std::string a = dump_json(to_json(comparison_report(ScoreKind::aecs, c, 0.5)));
  const std::string b = dump_json(to_json(comparison_report(ScoreKind::aecs, c, 0.5)));
  EXPECT_EQ(a, b);
  const Json j = Json::parse(a);
  EXPECT_EQ(j["kind"], "aecs");
  EXPECT_EQ(j["p_target"].size(), 2u);
  EXPECT_TRUE(j.contains("objective_sandwich"));
}

TEST(CohortCsv, Layouts) {
  const auto subjects = test::synthetic_cohort(72, 3, 6);
  CohortOptions o;
  o.m = 2;
  const CohortSummary s = cohort_run(subjects, o);
  const std::string rows = cohort_subjects_csv(s);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 4);
  EXPECT_EQ(rows.rfind("subject_id,diff_norm,a12_norm,delta_star,converged\n", 0), 0u);
  const std::string summary = cohort_summary_csv(s);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
  const std::string box = cohort_boxplot_csv(s);
  EXPECT_EQ(std::count(box.begin(), box.end(), '\n'), 1 + 2 * 3);
  EXPECT_NE(box.find("subject_1,target,"), std::string::npos);
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("q\"x"), "\"q\"\"x\"");
  const Json j = to_json(s);
  EXPECT_EQ(j["metadata"]["std_convention"], "population");
  EXPECT_EQ(j["target_indices"][0].get<Index>(), s.target_indices[0] + 1);
}
