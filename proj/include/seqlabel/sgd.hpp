#pragma once

// Moment-matching variant: squared residuals of every observable moment as a
// function of the probability tables, minimized by projected mini-batch SGD.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqlabel/estimator.hpp"

namespace seqlabel {

struct SgdOptions {
  double lr = 0.05;
  int epochs = 4000;
  int batch = 64;  // 0 = full batch
  std::uint64_t seed = 0;
  bool projection = true;
  bool weight_by_support = false;
  double tol_loss = 1e-4;
};

// residual = sum_k coef_k * theta[i_k] * theta[j_k] - target; an index of -1
// stands for the constant 1.
struct Term {
  double coef = 0.0;
  int i = -1;
  int j = -1;
};

struct Constraint {
  std::string kind;  // pair, mean, phi_moment, phi_partner, marginal, simplex
  std::vector<Term> terms;
  double target = 0.0;
  double weight = 1.0;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  int parameters = 0;
  // theta layout: 4 entries per slot (mu_vote order), then 8 per phi slice.
  int phi_offset(int slice) const { return mu_parameters + 8 * slice; }
  int mu_parameters = 0;
  std::vector<Edge> slices;  // (edge index, offset) per phi slice
  int moment_count() const;
  int simplex_count() const;
};

ConstraintSet build_constraints(const ModelSpec& model, const ProductStats& stats, bool weight_by_support = false);

double residual(const Constraint& c, const std::vector<double>& theta);
// Total weighted squared residual plus negativity penalties; fills the
// gradient when given.
double total_loss(const ConstraintSet& set, const std::vector<double>& theta, std::vector<double>* grad = nullptr);

std::vector<double> pack_params(const ModelSpec& model, const ConstraintSet& set, const LabelModelParams& params);
std::vector<double> default_theta(const ModelSpec& model, const ConstraintSet& set);

struct SgdResult {
  LabelModelParams params;
  double final_loss = 0.0;
  std::vector<double> residuals;
  std::vector<double> loss_curve;  // per epoch
  std::vector<double> theta;
};

// Throws Diverged when the loss becomes non-finite, grows a hundredfold over
// its starting value, or a step overshoots the whole [0,1] box.
SgdResult fit_sgd(const ModelSpec& model, const ProductStats& stats, const ConstraintSet& set,
                  const std::optional<LabelModelParams>& init, const SgdOptions& opts);
SgdResult fit_sgd(const ModelSpec& model, const VoteTensor& votes, const SgdOptions& opts, int threads = 1);

}  // namespace seqlabel
