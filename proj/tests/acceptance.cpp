// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <numeric>
#include <thread>

#include <unistd.h>

#include "oracles.hpp"
#include "seqlabel/cli.hpp"
#include "seqlabel/estimator.hpp"
#include "seqlabel/inference.hpp"
#include "seqlabel/io.hpp"
#include "seqlabel/sgd.hpp"
#include "seqlabel/synth.hpp"

using namespace seqlabel;
namespace fs = std::filesystem;

namespace {

int cores() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

Outcome b_constants() {
  const double b2 = pinv_norm(build_B(2));
  const double b4 = pinv_norm(build_B(4));
  const bool ok = std::abs(b2 - 1.366) <= 0.001 && std::abs(b4 - 1.112) <= 0.001;
  return {ok, "||B_2^-1||=" + fmt(b2) + " ||B_4^-1||=" + fmt(b4)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome products_identity() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = 1 + trial % 4;
    const auto joint = oracle::random_distribution(rng, std::size_t{1} << t);
    const auto r = oracle::product_moments(joint, t);
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(joint.data(), joint.size());
    const Eigen::VectorXd Be = build_B(t) * e;
    for (std::size_t i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(Be[i] - r[i]));
  }
  return {worst <= 1e-12, "max |B e - r| = " + fmt(worst) + " over 1000 distributions"};
}

// ---- 3 ----------------------------------------------------------------------

// Columns whose label configuration has probability zero are not identified
// by any data and are skipped.
double joint_error_max(const ModelSpec& model, const LabelModelParams& a, const LabelModelParams& b) {
  double worst = 0.0;
  for (const auto& x : a.joint) {
    const auto* y = b.joint_of(x.source);
    if (!y || y->vote.size() != x.vote.size()) return std::numeric_limits<double>::infinity();
    const auto& cov = model.sources()[x.source].coverage;
    const std::size_t S = std::size_t{1} << x.width;
    for (std::size_t w = 0; w < S; ++w) {
      const auto positives = static_cast<std::uint32_t>(~w & (S - 1));
      if (model.label_probability(cov, positives) == 0.0) continue;
      for (std::size_t z = 0; z < S; ++z) worst = std::max(worst, std::abs(x.vote[z * S + w] - y->vote[z * S + w]));
    }
  }
  return a.joint.size() == b.joint.size() ? worst : std::numeric_limits<double>::infinity();
}

Outcome noiseless() {
  double worst_mu = 0.0, worst_phi = 0.0, worst_joint = 0.0;
  int failures = 0, phi_slices = 0, joints = 0;
  std::string first_failure;
  for (int s = 0; s < 100; ++s) {
    RandomOptions opts;
    opts.max_T = 5;
    opts.max_sources = 8;
    opts.joint = s % 4 == 3;
    const auto inst = random_instance(1000 + s, opts);
    try {
      const auto stats = population_stats(inst.model, inst.truth, plan_keys(inst.model));
      const auto fit = fit_closed_form(inst.model, stats);
      const auto truth = truth_params(inst.model, inst.truth);
      worst_mu = std::max(worst_mu, mu_error_max(inst.model, fit, truth));
      worst_phi = std::max(worst_phi, phi_error_max(fit, truth));
      worst_joint = std::max(worst_joint, joint_error_max(inst.model, fit, truth));
      phi_slices += static_cast<int>(fit.phi.size());
      joints += static_cast<int>(fit.joint.size());
    } catch (const Error& e) {
      if (!failures++) first_failure = " first failure (model " + std::to_string(s) + "): " + e.what();
    }
  }
  const bool ok = failures == 0 && worst_mu <= 1e-10 && worst_phi <= 1e-10 && worst_joint <= 1e-10;
  return {ok, "max mu err " + fmt(worst_mu) + ", phi err " + fmt(worst_phi) + " (" + std::to_string(phi_slices) +
                  " slices), joint err " + fmt(worst_joint) + " (" + std::to_string(joints) + " tables), " +
                  std::to_string(failures) + " failed fits" + first_failure};
}

// ---- 4 ----------------------------------------------------------------------

struct ChainRun {
  Dataset data;
  LabelModelParams fit;
  LabelModelParams oracle;
};

ChainRun chain_run(const Instance& inst, std::uint64_t seed) {
  auto data = generate({&inst.model, &inst.truth, 1'000'000, seed}, cores());
  auto fit = fit_closed_form(inst.model, data.votes, cores());
  auto orc = oracle_params(inst.model, data.votes, data.latent);
  return {std::move(data), std::move(fit), std::move(orc)};
}

Outcome sampled(const Instance& inst, std::optional<ChainRun>& first) {
  double worst_mu = 0.0, worst_phi = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto run = chain_run(inst, seed);
    worst_mu = std::max(worst_mu, mu_error_max(inst.model, run.fit, run.oracle));
    worst_phi = std::max(worst_phi, phi_error_max(run.fit, run.oracle));
    if (seed == 1) first = std::move(run);
  }
  return {worst_mu <= 0.01 && worst_phi <= 0.02,
          "over 5 seeds max |mu - oracle| = " + fmt(worst_mu) + ", max |phi - oracle| = " + fmt(worst_phi)};
}

// ---- 5, 6 -------------------------------------------------------------------

const std::vector<std::int64_t> kGrid{1000, 4000, 16000, 64000};

std::vector<std::uint64_t> seeds(std::uint64_t first, int count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), first);
  return s;
}

Outcome scaling(const ScalingSummary& tied) {
  int nan = 0;
  for (const auto& r : tied.rows) nan += !std::isfinite(r.error);
  if (!tied.slope) return {false, "no slope (" + std::to_string(nan) + " failed fits)"};
  const double s = *tied.slope;
  std::string means;
  for (double m : tied.mean_error) means += " " + fmt(m);
  return {s >= -0.65 && s <= -0.35 && nan == 0,
          "slope " + fmt(s) + ", mean errors" + means + ", " + std::to_string(nan) + " failed fits"};
}

Outcome tying(const ScalingSummary& tied, const ScalingSummary& untied) {
  bool ok = true;
  std::string d;
  for (std::size_t g = 0; g < kGrid.size(); ++g) {
    ok = ok && std::isfinite(tied.mean_error[g]) && std::isfinite(untied.mean_error[g]) &&
         tied.mean_error[g] < untied.mean_error[g];
    d += " n=" + std::to_string(kGrid[g]) + ":" + fmt(tied.mean_error[g]) + "<" + fmt(untied.mean_error[g]);
  }
  return {ok, "tied<untied" + d};
}

// ---- 7 ----------------------------------------------------------------------

Outcome posterior_oracle() {
  double worst = 0.0;
  std::int64_t rows = 0;
  for (int s = 0; s < 200; ++s) {
    RandomOptions opts;
    opts.max_T = 6;
    opts.max_sources = 8;
    opts.joint = s % 3 == 2;
    const auto inst = random_instance(5000 + s, opts);
    const auto params = truth_params(inst.model, inst.truth);
    const auto data = generate({&inst.model, &inst.truth, 20, static_cast<std::uint64_t>(s)});
    const PosteriorEngine engine(inst.model, params);
    for (std::int64_t i = 0; i < data.votes.sequences(); ++i) {
      const auto row = data.votes.row(i);
      const auto got = engine.posterior(row).marginals;
      const auto want = oracle::posterior_marginals(inst.model, params, {row.begin(), row.end()});
      for (std::size_t t = 0; t < want.size(); ++t) worst = std::max(worst, std::abs(got[t] - want[t]));
      ++rows;
    }
  }
  return {worst <= 1e-10, "max marginal difference " + fmt(worst) + " over " + std::to_string(rows) + " rows"};
}

// ---- 8 ----------------------------------------------------------------------

Outcome sgd_equivalence(const Instance& inst, const ChainRun& run) {
  SgdOptions opts;
  opts.seed = 7;
  std::string detail;
  double diff = std::numeric_limits<double>::infinity();
  try {
    const auto sgd = fit_sgd(inst.model, run.data.votes, opts, cores());
    diff = mu_error_max(inst.model, sgd.params, run.fit);
    detail = "max |mu_sgd - mu_closed| = " + fmt(diff) + " (final loss " + fmt(sgd.final_loss) + ")";
  } catch (const Error& e) {
    detail = std::string("SGD failed: ") + e.what();
  }

  // Gradient check at interior points of the box.
  const auto stats = empirical_stats(run.data.votes, plan_keys(inst.model), cores());
  const auto set = build_constraints(inst.model, stats);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> box(0.05, 0.95);
  double worst = 0.0;
  for (int p = 0; p < 100; ++p) {
    std::vector<double> theta(set.parameters);
    for (double& v : theta) v = box(rng);
    std::vector<double> grad;
    total_loss(set, theta, &grad);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < set.parameters; ++i) {
      const double h = 1e-6;
      auto plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (total_loss(set, plus) - total_loss(set, minus)) / (2 * h);
      num += (grad[i] - fd) * (grad[i] - fd);
      den += fd * fd;
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  return {diff <= 0.01 && worst <= 1e-4, detail + "; gradient relative error " + fmt(worst) + " at 100 points"};
}

// ---- 9 ----------------------------------------------------------------------

Outcome sequential_benefit() {
  const auto inst = duplication_instance();
  const auto rows = sequential_benefit_experiment(inst.model, inst.truth, 20000, seeds(1, 50), cores());
  int wins = 0;
  double m = 0, i = 0, v = 0;
  for (const auto& r : rows) {
    wins += r.modeled >= r.ignored;
    m += r.modeled;
    i += r.ignored;
    v += r.majority;
  }
  const double k = static_cast<double>(rows.size());
  m /= k;
  i /= k;
  v /= k;
  return {wins >= 45 && m >= v && i >= v, "modeled>=ignored in " + std::to_string(wins) + "/50; mean F1 modeled " +
                                              fmt(m) + ", ignored " + fmt(i) + ", majority " + fmt(v)};
}

// ---- 10 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const Instance& inst) {
  const fs::path dir = fs::temp_directory_path() / ("seqlabel_determinism_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::ofstream(dir / "model.json") << model_to_json(inst.model, &inst.truth).dump(2);
  const int counts[] = {1, 3, 8};
  std::vector<std::string> reference;
  bool ok = true;
  int runs = 0;
  std::ostringstream sink;
  for (int threads : counts) {
    const fs::path d = dir / std::to_string(runs++);
    fs::create_directories(d);
    auto cfg = [&](std::string command) {
      RunConfig c;
      c.command = std::move(command);
      c.model = (dir / "model.json").string();
      c.threads = threads;
      c.seed = 11;
      return c;
    };
    auto sim = cfg("simulate");
    sim.n = 50000;
    sim.out = (d / "votes.csv").string();
    sim.gold = (d / "gold.csv").string();
    auto fit = cfg("fit");
    fit.votes = sim.out;
    fit.out = (d / "params.json").string();
    auto sgd = cfg("fit");
    sgd.method = "sgd";
    sgd.epochs = 200;
    sgd.votes = sim.out;
    sgd.out = (d / "params_sgd.json").string();
    sgd.loss_curve = (d / "loss.csv").string();
    auto pred = cfg("predict");
    pred.votes = sim.out;
    pred.params = fit.out;
    pred.out = (d / "labels.csv").string();
    auto ev = cfg("eval");
    ev.labels = pred.out;
    ev.gold = sim.gold;
    ev.out = (d / "metrics.json").string();
    for (const auto* c : {&sim, &fit, &sgd, &pred, &ev})
      if (run(*c, sink, sink) != 0) return {false, "pipeline failed: " + sink.str()};
    std::vector<std::string> files;
    for (const char* f : {"votes.csv", "gold.csv", "params.json", "params_sgd.json", "loss.csv", "labels.csv", "metrics.json"})
      files.push_back(slurp(d / f));
    if (reference.empty())
      reference = files;
    else
      ok = ok && files == reference;
  }
  fs::remove_all(dir);
  return {ok, "simulate/fit/sgd/predict/eval outputs " + std::string(ok ? "identical" : "differ") +
                  " at 1, 3 and 8 threads"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& f) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < limit_s;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s [%.2fs, limit %.0fs]\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                limit_s);
    std::fflush(stdout);
  };

  const auto chain = chain_instance();
  std::optional<ChainRun> first;
  std::optional<ScalingSummary> tied, untied;

  report(1, "B-matrix constants", 1, b_constants);
  report(2, "products-to-joints identity", 10, products_identity);
  report(3, "noiseless recovery", 30, noiseless);
  report(4, "sampled recovery", 120, [&] { return sampled(chain, first); });
  report(5, "scaling law", 300, [&] {
    tied = scaling_experiment(chain.model, chain.truth, kGrid, seeds(1, 20), true, cores());
    return scaling(*tied);
  });
  report(6, "tying benefit", 300, [&] {
    if (!tied) return Outcome{false, "scaling run missing"};
    untied = scaling_experiment(chain.model, chain.truth, kGrid, seeds(1, 20), false, cores());
    return tying(*tied, *untied);
  });
  report(7, "posterior oracle", 60, posterior_oracle);
  report(8, "SGD equivalence", 180, [&] {
    if (!first) return Outcome{false, "criterion-4 data missing"};
    return sgd_equivalence(chain, *first);
  });
  report(9, "sequential-dependency benefit", 300, sequential_benefit);
  report(10, "determinism", 60, [&] { return determinism(chain); });
  std::printf("%d of 10 criteria failed\n", failed);
  return failed;
}
