#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "seqlabel/model.hpp"
#include "seqlabel/params.hpp"

namespace seqlabel {

inline constexpr double kInferenceEpsilon = 1e-9;

struct Posterior {
  std::vector<double> config;     // P(y | lambda) over the 2^T element configurations
  std::vector<double> marginals;  // P(task = +1 | lambda) for every task
  bool prior_fallback = false;
};

// Precomputes log factors once; posterior() is then safe to call
// concurrently.
class PosteriorEngine {
 public:
  PosteriorEngine(const ModelSpec& model, const LabelModelParams& params);

  Posterior posterior(std::span<const std::int8_t> row, Diagnostics* diag = nullptr) const;
  // P(task = +1 | lambda) for the requested tasks only.
  void marginals(std::span<const std::int8_t> row, std::span<const int> tasks, std::span<double> out,
                 Diagnostics* diag = nullptr) const;

 private:
  std::vector<double> log_scores(std::span<const std::int8_t> row) const;

  const ModelSpec* model_;
  const LabelModelParams* params_;
  std::vector<double> log_prior_;
  std::vector<std::uint64_t> labels_;        // task label bits per configuration
  std::vector<std::array<double, 4>> log_mu_;  // per unit, full table
  std::vector<std::array<double, 8>> log_phi_; // per phi entry, full table
  std::vector<int> phi_of_unit_;             // phi entry index or -1
};

Posterior posterior(const ModelSpec& model, const LabelModelParams& params, std::span<const std::int8_t> row,
                    Diagnostics* diag = nullptr);

// Per-sequence probabilities (or 0/1 labels) for the tasks of one resolution.
struct LabelTable {
  std::vector<int> tasks;
  std::int64_t sequences = 0;
  std::vector<double> p;  // row-major sequences x tasks

  double at(std::int64_t i, std::size_t c) const { return p[i * tasks.size() + c]; }
};

LabelTable emit_labels(const ModelSpec& model, const LabelModelParams& params, const VoteTensor& votes, int resolution,
                       int threads = 1, Diagnostics* diag = nullptr);

struct MajorityResult {
  LabelTable labels;            // 0/1
  std::int64_t ties = 0;        // elements resolved by the -1 tie rule
  std::int64_t abstained = 0;   // elements without any vote
};

// Element labels by vote sign, coarse votes broadcast to their children;
// coarse resolutions aggregate the element labels.
MajorityResult majority_vote(const ModelSpec& model, const VoteTensor& votes, int resolution);

struct Metrics {
  std::optional<double> precision, recall, f1;
  std::int64_t n_eval = 0;
  double threshold = 0.5;
  bool degenerate_gold = false;
};

Metrics evaluate(const LabelTable& predicted, const LabelTable& gold, double threshold = 0.5);

// Latent element configurations as 0/1 labels for the tasks of a resolution.
LabelTable gold_labels(const ModelSpec& model, std::span<const Config> latent, int resolution);

}  // namespace seqlabel
