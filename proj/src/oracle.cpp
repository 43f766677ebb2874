#include "ams/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace ams::oracle {

double gamblers_ruin_exact(double p_up, int start, int L) {
  if (!(p_up > 0.0 && p_up < 1.0)) throw std::invalid_argument("gamblers_ruin_exact: p_up must be in (0, 1)");
  if (L < 1 || start < 0 || start > L) throw std::invalid_argument("gamblers_ruin_exact: need 0 <= start <= L, L >= 1");
  if (p_up == 0.5) return static_cast<double>(start) / static_cast<double>(L);
  const double r = (1.0 - p_up) / p_up;
  return (1.0 - std::pow(r, start)) / (1.0 - std::pow(r, L));
}

DenseBridgeSampler::DenseBridgeSampler(std::size_t kappa) : kappa_(kappa) {
  if (kappa == 0) throw std::invalid_argument("DenseBridgeSampler: kappa must be at least 1");
  const auto n = static_cast<Eigen::Index>(kappa);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i, i) = 2.0;
    if (i + 1 < n) q(i, i + 1) = q(i + 1, i) = -1.0;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw std::runtime_error("DenseBridgeSampler: factorization failed");
  lower_ = llt.matrixL();
}

BridgeState DenseBridgeSampler::sample(Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(kappa_);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g(i) = rng.gaussian();
  // Q = L L^T, so x = L^{-T} g has covariance Q^{-1}.
  const Eigen::VectorXd x = lower_.transpose().triangularView<Eigen::Upper>().solve(g);
  BridgeState s;
  s.values.assign(x.data(), x.data() + n);
  return s;
}

Eigen::MatrixXd DenseBridgeSampler::covariance() const {
  const auto n = static_cast<Eigen::Index>(kappa_);
  const Eigen::MatrixXd q = lower_ * lower_.transpose();
  return q.llt().solve(Eigen::MatrixXd::Identity(n, n));
}

BridgeState dense_bridge_sampler(std::size_t kappa, Rng& rng) { return DenseBridgeSampler(kappa).sample(rng); }

OracleResult bridge_exceedance_mc(std::size_t kappa, double z, std::uint64_t n_samples, Rng& rng) {
  const DenseBridgeSampler sampler(kappa);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const auto s = sampler.sample(rng);
    hits += *std::max_element(s.values.begin(), s.values.end()) > z ? 1 : 0;
  }
  return detail::binomial(hits, n_samples, "bridge-dense-mc");
}

}  // namespace ams::oracle
