#pragma once

#include <array>
#include <string>
#include <vector>

#include "seqlabel/core.hpp"
#include "seqlabel/model.hpp"

namespace seqlabel {

// mu(z | w) ordered (+|+), (+|-), (-|+), (-|-): index 2*[z = -1] + [w = -1].
using MuTable = std::array<double, 4>;
// phi(z1, z2 | w): index 4*[z1 = -1] + 2*[z2 = -1] + [w = -1].
using PhiTable = std::array<double, 8>;

inline int mu_index(int z, int w) { return (z < 0 ? 2 : 0) + (w < 0 ? 1 : 0); }
inline int phi_index(int z1, int z2, int w) { return (z1 < 0 ? 4 : 0) + (z2 < 0 ? 2 : 0) + (w < 0 ? 1 : 0); }

// One table per slot. `vote` is conditioned on the source voting; the full
// table scales it by the voting probability so that each column plus the
// abstention mass sums to one.
struct MuEntry {
  std::string tie_group;
  int offset = 0;
  MuTable vote{};
  double abstain = 0.0;

  MuTable full() const;
  bool operator==(const MuEntry&) const = default;
};

struct PhiEntry {
  Edge edge{};      // sources, j < k
  int offset = 0;   // shared coverage offset
  PhiTable vote{};  // conditioned on both voting
  double both_vote = 1.0;
  bool fallback = false;  // independence product of the two mu tables

  PhiTable full() const;
  bool operator==(const PhiEntry&) const = default;
};

// Vote-conditional joint of all s votes of one source given the s labels of
// its coverage: index zbits * 2^s + wbits, bit i set <=> position i is -1.
struct JointEntry {
  int source = 0;
  int width = 0;
  std::vector<double> vote;
  std::vector<double> abstain;  // per offset
  bool operator==(const JointEntry&) const = default;
};

struct FitDiagnostics {
  std::string method = "closed_form";
  double b_min = 0.0;
  double m_pinv_norm = 0.0;  // largest over slots
  std::vector<double> slot_pinv_norm;
  double final_loss = 0.0;
  double lr = 0.0;
  int epochs = 0;
  int batch = 0;
  std::uint64_t seed = 0;
  Diagnostics warnings;
  bool operator==(const FitDiagnostics& o) const {
    return method == o.method && b_min == o.b_min && m_pinv_norm == o.m_pinv_norm && slot_pinv_norm == o.slot_pinv_norm &&
           final_loss == o.final_loss && lr == o.lr && epochs == o.epochs && batch == o.batch && seed == o.seed;
  }
};

struct LabelModelParams {
  std::vector<MuEntry> mu;  // slot order
  std::vector<PhiEntry> phi;
  std::vector<JointEntry> joint;
  FitDiagnostics diagnostics;

  const MuEntry& mu_of_unit(const ModelSpec& model, int unit) const { return mu.at(model.units()[unit].slot); }
  const PhiEntry* phi_of(int j, int offset) const;
  const JointEntry* joint_of(int source) const;
  bool operator==(const LabelModelParams&) const = default;
};

// Stacked full mu tables, one per unit (4 entries each).
std::vector<double> stacked_mu(const ModelSpec& model, const LabelModelParams& params);
double mu_error_l2(const ModelSpec& model, const LabelModelParams& a, const LabelModelParams& b);
double mu_error_max(const ModelSpec& model, const LabelModelParams& a, const LabelModelParams& b);
double phi_error_max(const LabelModelParams& a, const LabelModelParams& b);

// Checks column and slice normalization and the [0,1] range.
void check_params(const ModelSpec& model, const LabelModelParams& params, double tol = 1e-9);

// Product of the two sources' mu tables on a shared slice.
PhiTable independence_phi(const MuTable& a, const MuTable& b);

}  // namespace seqlabel
