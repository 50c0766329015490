#pragma once

#include "garchrank/garch.hpp"
#include "garchrank/innovations.hpp"
#include "garchrank/ksample.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace garchrank {

struct NamedSpec {
  std::string name;  // "dgp1", "dgp2" or "custom"
  GarchSpec spec;
};

// Monte Carlo study over the grid dgp x phi x n x score.
//
// Group j of every trial uses the j-th entry of the group law list; the
// default list is (normal, mixture(phi), t(phi)).
struct StudyConfig {
  std::vector<NamedSpec> dgps{{"dgp1", dgp1()}};
  std::vector<double> phis{0.0, 1.0 / 9.0, 1.0 / 5.0, 1.0 / 3.0};
  std::vector<std::size_t> ns{100};
  std::vector<Score> scores{Score::Wilcoxon, Score::VanDerWaerden};
  std::size_t groups = 3;
  // Per-group law override, e.g. "normal", "mixture", "t", "mixture:0.2".
  // A bare family name takes the cell's phi.
  std::vector<std::string> laws{"normal", "mixture", "t"};
  std::size_t trials = 500;
  std::size_t B = 0;  // 0 skips the bootstrap test
  std::size_t n0 = 500;
  bool recompute_sigma = true;
  double level = 0.05;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  SigmaForm sigma_form = SigmaForm::Complete;
  DofRule dof_rule = DofRule::Contrast;
  std::string records_path;  // per-trial CSV when non-empty

  void validate() const;
};

// Flat key = value text; '#' starts a comment. Unknown keys are errors.
StudyConfig parse_study_config(const std::string& text);
StudyConfig load_study_config(const std::string& path);

// GARCHRANK_WORKERS, when set to a positive integer, overrides the config.
std::size_t resolve_workers(std::size_t configured);

InnovationDist law_for(const std::string& law, double phi);

struct StudyCell {
  std::string dgp;
  double phi = 0.0;
  std::size_t n = 0;
  Score score = Score::Wilcoxon;
  std::size_t completed = 0;  // trials with every fit successful
  std::size_t failures = 0;
  double reject_asymptotic = 0.0;
  double se_asymptotic = 0.0;
  std::optional<double> reject_bootstrap;
  std::optional<double> se_bootstrap;
  std::size_t bootstrap_dropped = 0;
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyCell> cells;
  double runtime_seconds = 0.0;  // kept out of the JSON for byte determinism
};

class StudyAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

StudyReport run_study(const StudyConfig& config);

// Stable JSON; schema field "garchrank.study/1".
std::string report_json(const StudyReport& report);
// Rejection proportions laid out with phi down the rows and (n, score) across.
std::string report_table(const StudyReport& report);

// Median sup-norm of the expansion remainder per series length.
struct RemainderSweep {
  std::vector<std::size_t> ns;
  std::vector<double> median_sup;
  std::size_t replicates = 0;
};

RemainderSweep remainder_sweep(const GarchSpec& spec, const InnovationDist& dist,
                               const std::vector<std::size_t>& ns, std::size_t replicates,
                               std::uint64_t seed, std::size_t workers = 1);

// Runs fn(i) for i in [0, count) on `workers` threads. fn must only touch
// slot i of any shared output.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace garchrank
