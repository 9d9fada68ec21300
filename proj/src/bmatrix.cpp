#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "seqlabel/estimator.hpp"

namespace seqlabel {

Eigen::MatrixXd build_B(int t) {
  if (t < 1 || t > kMaxBOrder)
    throw SizeExceeded("B_" + std::to_string(t) + " exceeds the maximum order " + std::to_string(kMaxBOrder));
  const int size = 1 << t;
  Eigen::MatrixXd B(size, size);
  for (int u = 0; u < size; ++u)
    for (int z = 0; z < size; ++z) B(u, z) = std::popcount(static_cast<unsigned>(u & z)) % 2 == 0 ? 1.0 : 0.0;
  return B;
}

double pinv_norm(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double tol = 1e-12 * std::max<double>(A.rows(), A.cols()) * (s.size() ? s(0) : 0.0);
  double smallest = 0.0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) smallest = s(i);
  return smallest > 0.0 ? 1.0 / smallest : 0.0;
}

Eigen::VectorXd solve_joints(const Eigen::MatrixXd& B, const Eigen::VectorXd& r, Diagnostics* diag,
                             const std::string& context) {
  if (B.rows() != B.cols() || B.rows() != r.size()) throw SingularSystem("products-to-joints system is not square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  if (!lu.isInvertible()) throw SingularSystem("products-to-joints matrix is singular");
  Eigen::VectorXd e = lu.solve(r);
  double worst = 0.0;
  for (int i = 0; i < e.size(); ++i) {
    const double c = std::clamp(e(i), 0.0, 1.0);
    worst = std::max(worst, std::abs(c - e(i)));
    e(i) = c;
  }
  const double sum = e.sum();
  if (!(sum > 0.0)) throw SingularSystem("joint vector is entirely clamped away" + (context.empty() ? "" : " for " + context));
  e /= sum;
  if (worst > kClampTolerance && diag) {
    std::ostringstream msg;
    msg << "joint entries clamped by up to " << worst << (context.empty() ? "" : " for " + context);
    diag->warn("ClampWarning", msg.str());
  }
  return e;
}

double product_probability(double signed_mean) { return 0.5 * (1.0 + signed_mean); }

Eigen::Vector4d assemble_r(double p_lambda, double p_y, double rho) { return {1.0, p_lambda, p_y, rho}; }

MuTable bayes_mu(const Eigen::VectorXd& e, double p_y) {
  // e is ordered by (lambda bit, y bit) with lambda the low bit.
  MuTable mu{};
  const double prior[2] = {p_y, 1.0 - p_y};
  for (int w = 0; w < 2; ++w) {
    const double plus = prior[w] > 0.0 ? e(0 + 2 * w) / prior[w] : 0.5;
    const double minus = prior[w] > 0.0 ? e(1 + 2 * w) / prior[w] : 0.5;
    const double col = plus + minus;
    mu[0 + w] = col > 0.0 ? plus / col : 0.5;
    mu[2 + w] = col > 0.0 ? minus / col : 0.5;
  }
  return mu;
}

AgreementSystem build_agreement_system(int columns, std::span<const Edge> rows, std::span<const double> pairs,
                                       Diagnostics* diag) {
  if (rows.size() != pairs.size()) throw InvalidSpec("agreement rows and values differ in length");
  AgreementSystem sys;
  sys.M = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), columns);
  sys.q.resize(static_cast<int>(rows.size()));
  int clamped = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [a, b] = rows[i];
    sys.M(i, a) += 1.0;
    sys.M(i, b) += 1.0;
    double mag = std::abs(pairs[i]);
    if (!(mag >= kMagnitudeFloor)) {
      mag = kMagnitudeFloor;
      ++clamped;
    }
    sys.q(i) = std::log(mag * mag);
  }
  if (clamped && diag)
    diag->warn("ClampWarning", std::to_string(clamped) + " pair expectations raised to the magnitude floor");
  sys.rows.assign(rows.begin(), rows.end());
  sys.observed.assign(pairs.begin(), pairs.end());
  return sys;
}

Eigen::VectorXd solve_agreement_system(const AgreementSystem& sys) {
  const int c = static_cast<int>(sys.M.cols());
  if (sys.M.rows() < c) throw RankDeficient("agreement system has fewer rows than unknowns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.M);
  qr.setThreshold(1e-10);
  if (qr.rank() < c)
    throw RankDeficient("agreement system has rank " + std::to_string(qr.rank()) + " < " + std::to_string(c));
  const Eigen::VectorXd l = qr.solve(sys.q);
  return (l / 2.0).array().exp();
}

Eigen::VectorXd recover_signs(const Eigen::VectorXd& magnitudes, const AgreementSystem& sys) {
  const int c = static_cast<int>(magnitudes.size());
  // Union-find with parity, inserting the strongest pairs first.
  std::vector<int> parent(c), parity(c, 0);
  for (int i = 0; i < c; ++i) parent[i] = i;
  auto find = [&](int v) {
    int p = 0;
    while (parent[v] != v) {
      p ^= parity[v];
      v = parent[v];
    }
    return std::make_pair(v, p);
  };
  std::vector<std::size_t> order(sys.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return std::abs(sys.observed[x]) > std::abs(sys.observed[y]); });
  for (std::size_t i : order) {
    auto [a, b] = sys.rows[i];
    const int want = sys.observed[i] < 0 ? 1 : 0;
    auto [ra, pa] = find(a);
    auto [rb, pb] = find(b);
    if (ra == rb) {
      if ((pa ^ pb) != want)
        throw SignInconsistency("pairwise agreement signs admit no consistent assignment (odd negative cycle)");
      continue;
    }
    parent[rb] = ra;
    parity[rb] = pa ^ pb ^ want;
  }
  Eigen::VectorXd signed_values(c);
  double sum = 0.0;
  for (int i = 0; i < c; ++i) {
    const auto [root, p] = find(i);
    if (root != find(0).first) throw SignInconsistency("agreement group is disconnected");
    signed_values(i) = (p ? -1.0 : 1.0) * magnitudes(i);
    sum += signed_values(i);
  }
  if (std::abs(sum) < 1e-12) throw SignAmbiguous("positive-sum rule cannot pick a sign branch (sum is 0)");
  if (sum < 0) signed_values = -signed_values;
  return signed_values;
}

}  // namespace seqlabel
