#include "garchrank/experiments.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <atomic>
#include <cstdlib>

using namespace garchrank;

namespace {

StudyConfig small_study() {
  return parse_study_config(
      "# tiny grid\n"
      "dgp = dgp1, dgp2\n"
      "phi = 0, 1/3\n"
      "n = 100\n"
      "score = w, mood\n"
      "trials = 6\n"
      "seed = 17\n");
}

}  // namespace

TEST(StudyConfig, ParsesKeys) {
  const auto c = parse_study_config(
      "dgp = custom\n"
      "spec = 0.2 | 0.1, 0.05 | 0.6   # two lags\n"
      "phi = 1/9, 0.2\n"
      "n = 100, 200\n"
      "score = vdw, klotz\n"
      "groups = 2\n"
      "laws = normal, t:0.25\n"
      "trials = 40\n"
      "B = 99\n"
      "n0 = 250\n"
      "recompute_sigma = false\n"
      "level = 0.1\n"
      "seed = 123\n"
      "workers = 3\n"
      "sigma_form = influence\n"
      "dof_rule = full\n");
  ASSERT_EQ(c.dgps.size(), 1u);
  EXPECT_EQ(c.dgps[0].name, "custom");
  EXPECT_EQ(c.dgps[0].spec.alpha.size(), 2u);
  EXPECT_DOUBLE_EQ(c.dgps[0].spec.beta[0], 0.6);
  EXPECT_DOUBLE_EQ(c.phis[0], 1.0 / 9.0);
  EXPECT_EQ(c.ns, (std::vector<std::size_t>{100, 200}));
  EXPECT_EQ(c.scores, (std::vector<Score>{Score::VanDerWaerden, Score::Klotz}));
  EXPECT_EQ(c.laws[1], "t:0.25");
  EXPECT_EQ(c.B, 99u);
  EXPECT_FALSE(c.recompute_sigma);
  EXPECT_EQ(c.seed, 123u);
  EXPECT_EQ(c.sigma_form, SigmaForm::Influence);
  EXPECT_EQ(c.dof_rule, DofRule::Full);
}

TEST(StudyConfig, RejectsBadInput) {
  EXPECT_THROW(parse_study_config("colour = blue\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("phi\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("phi = 0.7\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("B = 20\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("n = 30\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("dgp = custom\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("dgp = dgp9\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("laws = normal, cauchy, t\n"), std::invalid_argument);
  EXPECT_THROW(parse_study_config("groups = 2\nlaws = normal, t, t\n"), std::invalid_argument);
  try {
    parse_study_config("\n\ntrials = many\n");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(StudyConfig, LawLookup) {
  EXPECT_DOUBLE_EQ(std::get<MixtureNormal>(law_for("mixture", 0.2).variant()).phi, 0.2);
  EXPECT_DOUBLE_EQ(std::get<StudentT>(law_for("t:0.1", 0.3).variant()).phi, 0.1);
  EXPECT_TRUE(law_for("normal", 0.3).is_normal());
  EXPECT_THROW(law_for("laplace", 0.1), std::invalid_argument);
}

TEST(Study, SameResultsForAnyWorkerCount) {
  auto c = small_study();
  ::unsetenv("GARCHRANK_WORKERS");
  c.workers = 1;
  const auto one = report_json(run_study(c));
  c.workers = 3;
  const auto three = report_json(run_study(c));
  EXPECT_EQ(one, three);
  const auto j = nlohmann::json::parse(one);
  EXPECT_EQ(j["schema"], "garchrank.study/1");
  EXPECT_EQ(j["cells"].size(), 8u);
  EXPECT_FALSE(j.contains("runtime_seconds"));
  const auto table = report_table(run_study(c));
  EXPECT_NE(table.find("dgp2"), std::string::npos);
}

TEST(Study, WorkersFromEnvironment) {
  ::setenv("GARCHRANK_WORKERS", "4", 1);
  EXPECT_EQ(resolve_workers(1), 4u);
  ::setenv("GARCHRANK_WORKERS", "zero", 1);
  EXPECT_EQ(resolve_workers(2), 2u);
  ::unsetenv("GARCHRANK_WORKERS");
  EXPECT_EQ(resolve_workers(0), 1u);
}

TEST(Study, RemainderSweepShape) {
  const auto sw = remainder_sweep(dgp1(), InnovationDist::normal(), {250, 1000}, 4, 3, 2);
  ASSERT_EQ(sw.median_sup.size(), 2u);
  for (double v : sw.median_sup) EXPECT_GT(v, 0.0);
  EXPECT_EQ(sw.replicates, 4u);
}

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
