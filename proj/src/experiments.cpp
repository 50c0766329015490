#include "garchrank/experiments.hpp"

#include "garchrank/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <mutex>
#include <thread>

namespace garchrank {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Accepts plain decimals and fractions such as 1/9.
double parse_real(const std::string& s) {
  const auto slash = s.find('/');
  std::size_t used = 0;
  try {
    if (slash == std::string::npos) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    }
    const double num = std::stod(s.substr(0, slash));
    const double den = std::stod(s.substr(slash + 1));
    if (den == 0.0) throw std::invalid_argument(s);
    return num / den;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
}

std::size_t parse_count(const std::string& s) {
  const double v = parse_real(s);
  if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("not a count: '" + s + "'");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

// "omega | a1, a2 | b1" with either coefficient list allowed empty.
GarchSpec parse_spec(const std::string& s) {
  const auto bar1 = s.find('|');
  const auto bar2 = bar1 == std::string::npos ? std::string::npos : s.find('|', bar1 + 1);
  if (bar2 == std::string::npos) {
    throw std::invalid_argument("spec must look like 'omega | alphas | betas'");
  }
  GarchSpec g;
  g.omega = parse_real(trim(s.substr(0, bar1)));
  for (const auto& a : split(s.substr(bar1 + 1, bar2 - bar1 - 1), ',')) {
    g.alpha.push_back(parse_real(a));
  }
  for (const auto& b : split(s.substr(bar2 + 1), ',')) g.beta.push_back(parse_real(b));
  g.validate();
  return g;
}

std::uint64_t trial_stream(std::size_t data_cell, std::size_t trial) {
  return (static_cast<std::uint64_t>(data_cell) << 32) | static_cast<std::uint64_t>(trial);
}

struct TrialOutcome {
  bool failed = false;
  std::vector<double> L, p;           // per score
  std::vector<bool> reject;
  std::vector<double> p_boot;
  std::vector<bool> reject_boot;
  std::vector<std::size_t> dropped;
};

}  // namespace

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void StudyConfig::validate() const {
  if (dgps.empty() || phis.empty() || ns.empty() || scores.empty()) {
    throw std::invalid_argument("study grid has an empty axis");
  }
  if (groups < 2) throw std::invalid_argument("groups must be at least 2");
  if (laws.size() != groups) throw std::invalid_argument("need one law per group");
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  if (B != 0 && B < 99) throw std::invalid_argument("B must be 0 or at least 99");
  for (double phi : phis) {
    if (!(phi >= 0.0 && phi < 0.5)) throw std::invalid_argument("phi must lie in [0, 1/2)");
  }
  for (const auto& d : dgps) {
    d.spec.validate();
    for (std::size_t n : ns) {
      if (n < min_fit_length(d.spec.p(), d.spec.q())) {
        throw std::invalid_argument("n = " + std::to_string(n) + " is too short for " + d.name);
      }
    }
  }
  for (const auto& law : laws) (void)law_for(law, phis.front());
}

StudyConfig parse_study_config(const std::string& text) {
  StudyConfig c;
  std::optional<GarchSpec> custom;
  std::vector<std::string> dgp_names{"dgp1"};
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "dgp") {
        dgp_names = split(value, ',');
      } else if (key == "spec") {
        custom = parse_spec(value);
      } else if (key == "phi") {
        c.phis.clear();
        for (const auto& v : split(value, ',')) c.phis.push_back(parse_real(v));
      } else if (key == "n") {
        c.ns.clear();
        for (const auto& v : split(value, ',')) c.ns.push_back(parse_count(v));
      } else if (key == "score") {
        c.scores.clear();
        for (const auto& v : split(value, ',')) c.scores.push_back(parse_score(v));
      } else if (key == "groups") {
        c.groups = parse_count(value);
      } else if (key == "laws") {
        c.laws = split(value, ',');
      } else if (key == "trials") {
        c.trials = parse_count(value);
      } else if (key == "B") {
        c.B = parse_count(value);
      } else if (key == "n0") {
        c.n0 = parse_count(value);
      } else if (key == "recompute_sigma") {
        c.recompute_sigma = parse_bool(value);
      } else if (key == "level") {
        c.level = parse_real(value);
      } else if (key == "seed") {
        c.seed = std::stoull(value);
      } else if (key == "workers") {
        c.workers = parse_count(value);
      } else if (key == "sigma_form") {
        c.sigma_form = parse_sigma_form(value);
      } else if (key == "dof_rule") {
        c.dof_rule = parse_dof_rule(value);
      } else if (key == "records") {
        c.records_path = value;
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (c.laws.size() != c.groups && c.laws == std::vector<std::string>{"normal", "mixture", "t"}) {
    c.laws.assign(c.groups, "normal");
  }
  c.dgps.clear();
  for (const auto& name : dgp_names) {
    if (name == "dgp1") {
      c.dgps.push_back({name, dgp1()});
    } else if (name == "dgp2") {
      c.dgps.push_back({name, dgp2()});
    } else if (name == "custom") {
      if (!custom) throw std::invalid_argument("dgp = custom needs a spec line");
      c.dgps.push_back({name, *custom});
    } else {
      throw std::invalid_argument("unknown dgp '" + name + "'");
    }
  }
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::size_t resolve_workers(std::size_t configured) {
  if (const char* env = std::getenv("GARCHRANK_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(configured, 1);
}

InnovationDist law_for(const std::string& law, double phi) {
  const auto colon = law.find(':');
  const std::string family = law.substr(0, colon);
  const double p = colon == std::string::npos ? phi : parse_real(law.substr(colon + 1));
  if (family == "normal") return InnovationDist::normal();
  if (family == "mixture") return InnovationDist::mixture(p);
  if (family == "t") return InnovationDist::student_t(p);
  throw std::invalid_argument("unknown law '" + law + "'");
}

StudyReport run_study(const StudyConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_phi = config.phis.size();
  const std::size_t n_n = config.ns.size();
  const std::size_t n_data = config.dgps.size() * n_phi * n_n;
  const std::size_t n_scores = config.scores.size();
  const std::size_t total = n_data * config.trials;

  std::vector<TrialOutcome> outcomes(total);
  parallel_for(total, resolve_workers(config.workers), [&](std::size_t idx) {
    const std::size_t cell = idx / config.trials;
    const std::size_t trial = idx % config.trials;
    const std::size_t d = cell / (n_phi * n_n);
    const double phi = config.phis[(cell / n_n) % n_phi];
    const std::size_t n = config.ns[cell % n_n];
    const GarchSpec& spec = config.dgps[d].spec;
    const std::uint64_t stream = trial_stream(cell, trial);
    TrialOutcome& out = outcomes[idx];

    std::vector<std::vector<double>> samples;
    std::vector<Orders> orders(config.groups, Orders{spec.p(), spec.q()});
    try {
      for (std::size_t j = 0; j < config.groups; ++j) {
        RngStream rng(config.seed, stream, j);
        samples.push_back(simulate(spec, law_for(config.laws[j], phi), n, config.n0, rng).values);
      }
      for (std::size_t s = 0; s < n_scores; ++s) {
        TestOptions opt;
        opt.score = config.scores[s];
        opt.level = config.level;
        opt.sigma_form = config.sigma_form;
        opt.dof_rule = config.dof_rule;
        if (config.B == 0) {
          const TestResult r = asymptotic_test(samples, orders, opt);
          out.L.push_back(r.L_N);
          out.p.push_back(r.p_asymptotic);
          out.reject.push_back(r.reject);
        } else {
          BootstrapOptions bo;
          bo.B = config.B;
          bo.n0 = config.n0;
          bo.recompute_sigma = config.recompute_sigma;
          bo.seed = splitmix64(config.seed ^ splitmix64(stream * 16 + s + 1));
          const BootstrapResult r = bootstrap_test(samples, orders, opt, bo);
          out.L.push_back(r.observed.L_N);
          out.p.push_back(r.observed.p_asymptotic);
          out.reject.push_back(r.observed.reject);
          out.p_boot.push_back(r.p_bootstrap);
          out.reject_boot.push_back(r.reject);
          out.dropped.push_back(r.dropped);
        }
      }
    } catch (const std::exception&) {
      out = TrialOutcome{};
      out.failed = true;
    }
  });

  StudyReport report;
  report.config = config;
  std::size_t failures = 0;
  for (std::size_t cell = 0; cell < n_data; ++cell) {
    for (std::size_t s = 0; s < n_scores; ++s) {
      StudyCell sc;
      sc.dgp = config.dgps[cell / (n_phi * n_n)].name;
      sc.phi = config.phis[(cell / n_n) % n_phi];
      sc.n = config.ns[cell % n_n];
      sc.score = config.scores[s];
      std::size_t rej = 0, rej_boot = 0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const TrialOutcome& o = outcomes[cell * config.trials + t];
        if (o.failed) {
          ++sc.failures;
          continue;
        }
        ++sc.completed;
        rej += o.reject[s] ? 1 : 0;
        if (config.B > 0) {
          rej_boot += o.reject_boot[s] ? 1 : 0;
          sc.bootstrap_dropped += o.dropped[s];
        }
      }
      if (s == 0) failures += sc.failures;
      const double m = static_cast<double>(std::max<std::size_t>(sc.completed, 1));
      sc.reject_asymptotic = static_cast<double>(rej) / m;
      sc.se_asymptotic = std::sqrt(sc.reject_asymptotic * (1.0 - sc.reject_asymptotic) / m);
      if (config.B > 0) {
        sc.reject_bootstrap = static_cast<double>(rej_boot) / m;
        sc.se_bootstrap = std::sqrt(*sc.reject_bootstrap * (1.0 - *sc.reject_bootstrap) / m);
      }
      report.cells.push_back(sc);
    }
  }
  if (static_cast<double>(failures) > 0.2 * static_cast<double>(total)) {
    std::ostringstream msg;
    msg << "study aborted: " << failures << " of " << total << " trials failed to fit;";
    for (const auto& c : report.cells) {
      if (c.score == config.scores.front() && c.failures > 0) {
        msg << ' ' << c.dgp << " phi=" << c.phi << " n=" << c.n << ": " << c.failures << ';';
      }
    }
    throw StudyAborted(msg.str());
  }

  if (!config.records_path.empty()) {
    std::ofstream rec(config.records_path);
    if (!rec) throw std::runtime_error("cannot write " + config.records_path);
    rec << "dgp,phi,n,trial,score,L_N,p_asymptotic,reject_asymptotic,p_bootstrap,reject_bootstrap\n";
    char buf[64];
    for (std::size_t idx = 0; idx < total; ++idx) {
      const std::size_t cell = idx / config.trials;
      const TrialOutcome& o = outcomes[idx];
      if (o.failed) continue;
      for (std::size_t s = 0; s < n_scores; ++s) {
        rec << config.dgps[cell / (n_phi * n_n)].name << ',';
        std::snprintf(buf, sizeof buf, "%.17g", config.phis[(cell / n_n) % n_phi]);
        rec << buf << ',' << config.ns[cell % n_n] << ',' << idx % config.trials << ','
            << score_name(config.scores[s]) << ',';
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", o.L[s], o.p[s]);
        rec << buf << ',' << (o.reject[s] ? 1 : 0) << ',';
        if (config.B > 0) {
          std::snprintf(buf, sizeof buf, "%.17g", o.p_boot[s]);
          rec << buf << ',' << (o.reject_boot[s] ? 1 : 0);
        } else {
          rec << ',';
        }
        rec << '\n';
      }
    }
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_json(const StudyReport& report) {
  using nlohmann::ordered_json;
  const StudyConfig& c = report.config;
  ordered_json cfg;
  ordered_json dgps = ordered_json::array();
  for (const auto& d : c.dgps) {
    dgps.push_back({{"name", d.name},
                    {"omega", d.spec.omega},
                    {"alpha", d.spec.alpha},
                    {"beta", d.spec.beta}});
  }
  cfg["dgps"] = dgps;
  cfg["phi"] = c.phis;
  cfg["n"] = c.ns;
  ordered_json scores = ordered_json::array();
  for (Score s : c.scores) scores.push_back(std::string(score_name(s)));
  cfg["score"] = scores;
  cfg["groups"] = c.groups;
  cfg["laws"] = c.laws;
  cfg["trials"] = c.trials;
  cfg["B"] = c.B;
  cfg["n0"] = c.n0;
  cfg["recompute_sigma"] = c.recompute_sigma;
  cfg["level"] = c.level;
  cfg["seed"] = c.seed;
  cfg["sigma_form"] = std::string(sigma_form_name(c.sigma_form));
  cfg["dof_rule"] = std::string(dof_rule_name(c.dof_rule));

  ordered_json cells = ordered_json::array();
  for (const auto& s : report.cells) {
    ordered_json j;
    j["dgp"] = s.dgp;
    j["phi"] = s.phi;
    j["n"] = s.n;
    j["score"] = std::string(score_name(s.score));
    j["completed"] = s.completed;
    j["failures"] = s.failures;
    j["reject_asymptotic"] = s.reject_asymptotic;
    j["se_asymptotic"] = s.se_asymptotic;
    if (s.reject_bootstrap) {
      j["reject_bootstrap"] = *s.reject_bootstrap;
      j["se_bootstrap"] = *s.se_bootstrap;
      j["bootstrap_dropped"] = s.bootstrap_dropped;
    }
    cells.push_back(j);
  }
  ordered_json out;
  out["schema"] = "garchrank.study/1";
  out["config"] = cfg;
  out["cells"] = cells;
  return out.dump(2) + "\n";
}

std::string report_table(const StudyReport& report) {
  const StudyConfig& c = report.config;
  std::ostringstream os;
  char buf[64];
  for (const auto& d : c.dgps) {
    os << "Proportion of rejections, " << d.name << " (level " << c.level << ", "
       << c.trials << " trials" << (c.B ? ", asymptotic/bootstrap" : "") << ")\n";
    os << "  phi    ";
    for (std::size_t n : c.ns) {
      for (Score s : c.scores) {
        std::snprintf(buf, sizeof buf, " %*s", c.B ? 13 : 8,
                      ("n=" + std::to_string(n) + " " + std::string(score_name(s))).c_str());
        os << buf;
      }
    }
    os << '\n';
    for (double phi : c.phis) {
      std::snprintf(buf, sizeof buf, "  %-7.4f", phi);
      os << buf;
      for (std::size_t n : c.ns) {
        for (Score s : c.scores) {
          const auto it = std::find_if(report.cells.begin(), report.cells.end(), [&](const auto& x) {
            return x.dgp == d.name && x.phi == phi && x.n == n && x.score == s;
          });
          if (c.B) {
            std::snprintf(buf, sizeof buf, "   %.3f/%.3f", it->reject_asymptotic,
                          it->reject_bootstrap.value_or(0.0));
          } else {
            std::snprintf(buf, sizeof buf, " %8.3f", it->reject_asymptotic);
          }
          os << buf;
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

RemainderSweep remainder_sweep(const GarchSpec& spec, const InnovationDist& dist,
                               const std::vector<std::size_t>& ns, std::size_t replicates,
                               std::uint64_t seed, std::size_t workers) {
  RemainderSweep sweep;
  sweep.ns = ns;
  sweep.replicates = replicates;
  const auto grid = linear_grid(-4.0, 4.0, 161);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    std::vector<double> sups(replicates, std::nan(""));
    parallel_for(replicates, workers, [&](std::size_t r) {
      RngStream rng(seed, i, r);
      const auto s = simulate(spec, dist, ns[i], 500, rng);
      try {
        sups[r] = decompose_diagnostic(s.values, s.innovations, spec, dist, grid).sup_remainder;
      } catch (const std::exception&) {
      }
    });
    std::erase_if(sups, [](double v) { return std::isnan(v); });
    if (sups.empty()) throw std::runtime_error("every remainder replicate failed");
    std::sort(sups.begin(), sups.end());
    const std::size_t m = sups.size();
    sweep.median_sup.push_back(m % 2 ? sups[m / 2] : 0.5 * (sups[m / 2 - 1] + sups[m / 2]));
  }
  return sweep;
}

}  // namespace garchrank
