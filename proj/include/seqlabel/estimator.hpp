#pragma once

// Closed-form estimation: agreements -> products -> joints -> Bayes.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "seqlabel/model.hpp"
#include "seqlabel/moments.hpp"
#include "seqlabel/params.hpp"

namespace seqlabel {

inline constexpr double kMagnitudeFloor = 1e-6;   // |E| floor before logs
inline constexpr double kClampTolerance = 0.05;   // joint clamps beyond this warn
inline constexpr double kMarginalTolerance = 0.05;
inline constexpr int kMaxBOrder = 12;

// ---- products to joints ----------------------------------------------------

// B_t over t binary variables d_1..d_t. Column z: bit b set <=> d_{b+1} = -1.
// Row u: the subset {d_{b+1} : bit b of u set}; row 0 is the empty product.
// B[u][z] = 1 iff the product over u is +1 at z.
Eigen::MatrixXd build_B(int t);
// Spectral norm of the pseudo-inverse.
double pinv_norm(const Eigen::MatrixXd& A);

// e = B^{-1} r, clamped to [0,1] and renormalized. Warns when any clamp
// exceeds kClampTolerance.
Eigen::VectorXd solve_joints(const Eigen::MatrixXd& B, const Eigen::VectorXd& r, Diagnostics* diag = nullptr,
                             const std::string& context = {});

double product_probability(double signed_mean);
// r for D = (lambda, y) in subset order (empty, lambda, y, lambda y).
Eigen::Vector4d assemble_r(double p_lambda, double p_y, double rho);
// mu(z|w) = p(z,w) / P(y = w), column-renormalized.
MuTable bayes_mu(const Eigen::VectorXd& e, double p_y);

// ---- agreements to products ------------------------------------------------

struct AgreementSystem {
  Eigen::MatrixXd M;
  Eigen::VectorXd q;
  std::vector<Edge> rows;       // column pairs; (a, a) is a squared term
  std::vector<double> observed; // signed pair values
};

AgreementSystem build_agreement_system(int columns, std::span<const Edge> rows, std::span<const double> pairs,
                                       Diagnostics* diag = nullptr);
// |E[a]| per column from the least-squares solution of M l = q.
Eigen::VectorXd solve_agreement_system(const AgreementSystem& sys);
// Signs consistent with every observed pair sign; the global branch makes
// the magnitude-weighted sum positive.
Eigen::VectorXd recover_signs(const Eigen::VectorXd& magnitudes, const AgreementSystem& sys);

// ---- pooled inputs shared with the SGD variant -----------------------------

struct SlotPair {
  int a = 0, b = 0;          // slots, a <= b
  double corrected = 0.0;    // pooled E[A_a] E[A_b]
  double raw = 0.0;          // pooled E[lambda lambda']
  double support = 0.0;
  std::array<double, 4> Q{}; // pooled P(y = w, y' = w'), (+,+), (+,-), (-,+), (-,-)
};

struct SlotInput {
  double mean = 0.0;       // pooled E[lambda | vote]
  double p_positive = 0.0; // count-weighted P(y_t = +1)
  double vote_rate = 0.0;
  double support = 0.0;
};

struct EstimationInputs {
  std::vector<SlotInput> slots;
  std::vector<SlotPair> pairs;
};

EstimationInputs prepare_inputs(const ModelSpec& model, const ProductStats& stats);

// Every moment the estimator and the SGD variant read.
std::vector<MomentKey> plan_keys(const ModelSpec& model);
// Same-task units usable to split an edge's composite agreements.
std::vector<int> phi_partners(const ModelSpec& model, int j, int k, int offset);

struct SlotAgreement {
  double signed_mean = 0.0;
  double pinv_norm = 0.0;
};
SlotAgreement estimate_slot_agreement(const ModelSpec& model, const EstimationInputs& in, int slot,
                                      Diagnostics* diag = nullptr);

PhiEntry estimate_phi(const ModelSpec& model, const ProductStats& stats, const LabelModelParams& mu_stage,
                      const std::vector<double>& agreements, Edge edge, int offset, Diagnostics* diag = nullptr);

JointEntry estimate_joint(const ModelSpec& model, const ProductStats& stats, const std::vector<double>& agreements,
                          int source, Diagnostics* diag = nullptr);

// The full pipeline. Throws when any mu slot fails; failed phi slices fall
// back to independence with a warning.
LabelModelParams fit_closed_form(const ModelSpec& model, const ProductStats& stats);
// Validates, accumulates the planned moments and fits.
LabelModelParams fit_closed_form(const ModelSpec& model, const VoteTensor& votes, int threads = 1);

// Refuses a model whose validation report fails.
void require_valid(const ModelSpec& model);

}  // namespace seqlabel
