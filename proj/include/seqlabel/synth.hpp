#pragma once

// Ground-truth generator, latent-label oracles, exact population moments and
// the simulation experiments.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "seqlabel/inference.hpp"
#include "seqlabel/moments.hpp"
#include "seqlabel/params.hpp"

namespace seqlabel {

// True generative tables. mu and abstain are per unit; phi slices are
// conditioned on both sources voting and carry the unit mu tables as exact
// marginals; joint tables replace the unit draws of their source.
struct Truth {
  std::vector<MuTable> mu;
  std::vector<double> abstain;
  std::vector<PhiEntry> phi;
  std::vector<JointEntry> joint;
};

// Throws InvalidSpec when a table is not a distribution, an edge slice does
// not reproduce its mu marginals, or shapes disagree with the model.
void check_truth(const ModelSpec& model, const Truth& truth);

struct GeneratorSpec {
  const ModelSpec* model = nullptr;
  const Truth* truth = nullptr;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  VoteTensor votes;
  std::vector<Config> latent;
};

// One splitmix64 stream per (sequence, source) and one label stream per
// sequence, all derived from the master seed.
Dataset generate(const GeneratorSpec& spec, int threads = 1);

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

// Conditional frequencies counted against the latent labels.
LabelModelParams oracle_params(const ModelSpec& model, const VoteTensor& votes, std::span<const Config> latent);
// The truth in parameter form (tied tables must agree across their units).
LabelModelParams truth_params(const ModelSpec& model, const Truth& truth);
// Exact moments of the generative model: n = 1, count = P(all vote).
ProductStats population_stats(const ModelSpec& model, const Truth& truth, std::span<const MomentKey> keys);

// ---- experiments ------------------------------------------------------------

struct ScalingRow {
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  bool tying = true;
  double error = 0.0;  // NaN when the fit failed
};

struct ScalingSummary {
  std::vector<ScalingRow> rows;
  std::vector<std::int64_t> n_grid;
  std::vector<double> mean_error;
  std::vector<double> std_error;
  std::optional<double> slope;  // log-log, null for a single grid point
};

ScalingSummary scaling_experiment(const ModelSpec& model, const Truth& truth, std::span<const std::int64_t> n_grid,
                                  std::span<const std::uint64_t> seeds, bool tying, int threads = 1);

struct BenefitRow {
  std::uint64_t seed = 0;
  double modeled = 0.0;
  double ignored = 0.0;
  double majority = 0.0;
};

// Element-level F1 against the latent labels for three labelers.
std::vector<BenefitRow> sequential_benefit_experiment(const ModelSpec& model, const Truth& truth, std::int64_t n,
                                                      std::span<const std::uint64_t> seeds, int threads = 1);

// ---- fixtures ---------------------------------------------------------------

struct Instance {
  ModelSpec model;
  Truth truth;
};

// Four frames, three overlapping windows and the whole sequence; frame,
// window and scene tie groups; two correlated frame pairs.
Instance chain_instance();
// Per frame one accurate source, two weak ones and a duplicated pair.
Instance duplication_instance();
// Random model satisfying the exactness conditions of the estimator:
// symmetric accuracies wherever a unit serves as a partner, abstention
// independent of the labels. Resampled until it validates.
struct RandomOptions {
  int max_T = 5;
  int max_sources = 8;
  bool edges = true;
  bool joint = false;  // at least one source in joint form
};
Instance random_instance(std::uint64_t seed, const RandomOptions& opts = {});

// Symmetric accuracy table with E[lambda y | vote] = a.
MuTable symmetric_mu(double a);
// Mixture of independence and duplication with weight rho.
PhiTable correlated_phi(const MuTable& a, const MuTable& b, double rho);

}  // namespace seqlabel
