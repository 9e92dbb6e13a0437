// Survey-weighted logistic membership model fitted by IRLS.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fit_data.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/membership_model.hpp"
#include "svytrans/stats.hpp"

namespace svytrans {

namespace {

constexpr int kMaxHalvings = 40;
// Standardised coefficient magnitude beyond which a non-converged fit is
// reported as separation rather than slow convergence.
constexpr double kDivergentCoefficient = 25.0;

Eigen::MatrixXd design_matrix(const detail::FitData& d) {
  Eigen::MatrixXd x(d.n, d.columns.size() + 1);
  x.col(0).setOnes();
  for (std::size_t k = 0; k < d.columns.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k + 1)) =
        Eigen::Map<const Eigen::VectorXd>(d.columns[k].data(), static_cast<Eigen::Index>(d.n));
  }
  return x;
}

void check_rank(const Eigen::MatrixXd& x, const detail::FitData& d) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const auto rank = qr.rank();
  if (rank == x.cols()) return;
  std::string cols;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < x.cols(); ++k) {
    const auto c = perm[k];
    if (!cols.empty()) cols += ", ";
    cols += c == 0 ? std::string("(intercept)") : d.names[static_cast<std::size_t>(c - 1)];
  }
  throw RankDeficiencyError("rank-deficient design matrix; collinear columns: " + cols);
}

double deviance(const detail::FitData& d, const Eigen::VectorXd& eta) {
  long double dev = 0;
  for (std::size_t i = 0; i < d.n; ++i) {
    dev += detail::bernoulli_deviance(d.y[i], d.w[i], eta[static_cast<Eigen::Index>(i)]);
  }
  return static_cast<double>(dev);
}

Eigen::VectorXd score(const detail::FitData& d, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& eta) {
  const auto p = x.cols();
  std::vector<long double> acc(static_cast<std::size_t>(p), 0.0L);
  for (std::size_t i = 0; i < d.n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const long double r = d.w[i] * (d.y[i] - expit(eta[ii]));
    for (Eigen::Index j = 0; j < p; ++j) acc[static_cast<std::size_t>(j)] += r * x(ii, j);
  }
  Eigen::VectorXd u(p);
  for (Eigen::Index j = 0; j < p; ++j) u[j] = static_cast<double>(acc[static_cast<std::size_t>(j)]);
  return u;
}

}  // namespace

MembershipModel fit_logistic(const CombinedDataset& dataset,
                             const std::vector<std::string>& covariate_subset,
                             bool use_survey_weights, const IrlsOptions& options) {
  const detail::FitData d = detail::make_fit_data(dataset, covariate_subset, use_survey_weights);
  const Eigen::MatrixXd x = design_matrix(d);
  check_rank(x, d);
  detail::check_single_covariate_separation(d);

  const auto p = x.cols();
  const Eigen::Map<const Eigen::VectorXd> w(d.w.data(), static_cast<Eigen::Index>(d.n));

  double w_trial = 0, w_survey = 0;
  for (std::size_t i = 0; i < d.n; ++i) (d.y[i] > 0.5 ? w_trial : w_survey) += d.w[i];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta[0] = std::log(w_trial / w_survey);
  Eigen::VectorXd eta = x * beta;
  double dev = deviance(d, eta);
  Eigen::VectorXd u = score(d, x, eta);
  // The score is linear in the weights, so the tolerance follows their scale.
  const double tol = options.score_tolerance *
                     std::max(1.0, (w_trial + w_survey) / static_cast<double>(d.n));

  Convergence conv;
  bool stalled = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    conv.iterations = it;
    // Once below tolerance, one more Newton step lands at rounding level.
    const bool polish = u.cwiseAbs().maxCoeff() < tol;
    if (polish && conv.converged) break;
    conv.converged = polish;
    Eigen::VectorXd hw(static_cast<Eigen::Index>(d.n));
    for (Eigen::Index i = 0; i < hw.size(); ++i) {
      const double pi = expit(eta[i]);
      hw[i] = w[i] * pi * (1.0 - pi);
    }
    const Eigen::MatrixXd info = x.transpose() * hw.asDiagonal() * x;
    const Eigen::VectorXd step = info.ldlt().solve(u);

    double t = 1.0;
    bool accepted = false;
    bool decreased = false;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      const Eigen::VectorXd cand = beta + t * step;
      const Eigen::VectorXd cand_eta = x * cand;
      const double cand_dev = deviance(d, cand_eta);
      if (std::isfinite(cand_dev) && cand_dev <= dev) {
        decreased = cand_dev < dev;
        beta = cand;
        eta = cand_eta;
        dev = cand_dev;
        accepted = true;
        break;
      }
    }
    u = score(d, x, eta);
    conv.iterations = it + 1;
    if (polish) break;
    if (!accepted || !decreased) {
      stalled = true;
      break;
    }
  }
  conv.gradient_norm = u.norm();
  const double max_score = u.cwiseAbs().maxCoeff();
  if (!conv.converged && max_score < tol) conv.converged = true;
  // When the deviance can no longer be lowered the score sits at its
  // rounding floor; accept it if within the documented bound.
  if (!conv.converged && stalled && max_score < 1e-8 * static_cast<double>(d.n) * tol / options.score_tolerance) {
    conv.converged = true;
  }

  if (!conv.converged) {
    std::size_t worst = 0;
    double worst_mag = 0.0;
    for (std::size_t k = 0; k < d.columns.size(); ++k) {
      const double sd = std::sqrt(weighted_moments(d.columns[k], d.w).variance);
      const double mag = std::abs(beta[static_cast<Eigen::Index>(k + 1)]) * sd;
      if (mag > worst_mag) {
        worst_mag = mag;
        worst = k;
      }
    }
    if (worst_mag > kDivergentCoefficient) {
      throw SeparationError("perfect separation: coefficient of '" + d.names[worst] +
                                "' diverges",
                            d.names[worst]);
    }
    throw ConvergenceError("IRLS did not converge after " + std::to_string(conv.iterations) +
                               " iterations; gradient norm " + std::to_string(conv.gradient_norm),
                           conv.gradient_norm);
  }

  MembershipModel m;
  m.learner = Learner::Logistic;
  m.covariate_subset = covariate_subset;
  m.weighted_fit = use_survey_weights;
  m.coefficients.assign(beta.data(), beta.data() + beta.size());
  m.convergence = conv;
  m.dataset_fingerprint = dataset.fingerprint();
  return m;
}

}  // namespace svytrans
