#pragma once

#include <Eigen/Dense>

#include "misspec/core_model.hpp"

namespace misspec {

/// Misspecified LMMSE estimator W_bar = [W_S; W_F] (p_bar x n) built from the
/// observed features [A_S, A_F] with identity prior and assumed noise
/// variance sigma_hat2. Immutable after construction.
class MisspecifiedEstimator {
public:
    MisspecifiedEstimator(MatrixXd W_bar, Index p_S, Index p_C, double sigma_hat2);

    const MatrixXd& W_bar() const noexcept { return W_; }
    auto W_S() const { return W_.topRows(p_S_); }
    auto W_F() const { return W_.bottomRows(W_.rows() - p_S_); }

    Index n() const noexcept { return W_.cols(); }
    Index p_S() const noexcept { return p_S_; }
    Index p_F() const noexcept { return W_.rows() - p_S_; }
    Index p_C() const noexcept { return p_C_; }
    double sigma_hat2() const noexcept { return sigma_hat2_; }

private:
    MatrixXd W_;
    Index p_S_;
    Index p_C_;
    double sigma_hat2_;
};

/// Relative singular-value cutoff used for pseudo-inverses: max(rows, cols) * eps.
double rank_tolerance(Index rows, Index cols) noexcept;

/// W_bar = V diag(s / (s^2 + sigma_hat2)) U^T from the cached SVD. At
/// sigma_hat2 = 0 this is the Moore-Penrose pseudo-inverse of A_bar.
MisspecifiedEstimator build_misspecified(const FeatureSet& features, double sigma_hat2);

/// General assumed prior: K A_bar^T (A_bar K A_bar^T + sigma_hat2 I)^+.
/// No closed-form MSE accompanies this variant.
MisspecifiedEstimator build_misspecified(const FeatureSet& features, const MatrixXd& prior_cov,
                                         double sigma_hat2);

/// Oracle LMMSE with full knowledge of [A_S, A_C], K_x and K_v = sigma_v2 I:
/// W_O = K_x A~^T (A~ K_x A~^T + K_v)^+  (p x n). Reference baseline only.
MatrixXd build_oracle(const FeatureSet& features, const Priors& priors, double sigma_v2);

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
MatrixXd symmetric_pinv(const MatrixXd& m);

struct Estimates {
    VectorXd x_S;
    VectorXd x_F;
    VectorXd x_C;  // always zero
};

Estimates estimate(const MisspecifiedEstimator& est, const VectorXd& y);

/// Error integrands for one fixed A_bar, with A_C averaged analytically.
struct ConditionalMse {
    double eps1 = 0.0;         // tr((I - W_S A_S) K_x_S (I - W_S A_S)^T)
    double eps2_weight = 0.0;  // tr(W_S W_S^T)
    double eps_C = 0.0;        // tr(K_x_C)
    double fake_signal = 0.0;  // tr(W_F A_S K_x_S A_S^T W_F^T)
    double fake_weight = 0.0;  // tr(W_F W_F^T)
    double sigma_v2 = 0.0;

    /// MSE over (x_S, x_C): eps1 + eps2 (tr K_x_C + sigma_v2) + tr K_x_C.
    double mse() const noexcept { return eps1 + eps2_weight * (eps_C + sigma_v2) + eps_C; }
    /// Shared-block part of mse().
    double mse_S() const noexcept { return eps1 + eps2_weight * (eps_C + sigma_v2); }
    /// Fake-block error E||x_F_hat||^2.
    double mse_F() const noexcept { return fake_signal + (eps_C + sigma_v2) * fake_weight; }
    /// Output error for isotropic held-out rows.
    double mse_y() const noexcept { return mse() + mse_F() + sigma_v2; }
};

ConditionalMse conditional_mse(const MisspecifiedEstimator& est, const FeatureSet& features,
                               const MatrixXd& K_x_S, double trace_K_x_C, double sigma_v2);

}  // namespace misspec
