#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "misspec/rng.hpp"

namespace misspec {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class CovarianceKind { Isotropic, DecayedEigen };

/// Recipe for a covariance matrix.
///
/// Isotropic(scale) is scale * I. DecayedEigen(alpha) is
/// (dim / tr L) * U L U^T with L = diag(1^alpha, ..., dim^alpha) and U a Haar
/// rotation; its trace equals dim.
struct CovarianceSpec {
    CovarianceKind kind = CovarianceKind::Isotropic;
    Index dim = 0;
    double scale = 1.0;
    double alpha = 0.0;
    std::uint64_t seed = 0;

    static CovarianceSpec isotropic(Index dim, double scale = 1.0) {
        return {CovarianceKind::Isotropic, dim, scale, 0.0, 0};
    }
    static CovarianceSpec decayed(Index dim, double alpha, std::uint64_t seed) {
        return {CovarianceKind::DecayedEigen, dim, 1.0, alpha, seed};
    }

    /// Trace of the materialized matrix.
    double nominal_power() const noexcept {
        return kind == CovarianceKind::Isotropic ? scale * static_cast<double>(dim)
                                                 : static_cast<double>(dim);
    }
};

/// A materialized covariance K together with a square-root factor F, K = F F^T.
struct Covariance {
    MatrixXd matrix;
    MatrixXd factor;
    VectorXd eigenvalues;  // descending
    bool isotropic = true;
    double isotropic_sd = 1.0;  // sqrt(scale) when isotropic

    Index dim() const noexcept { return matrix.rows(); }
    double trace() const { return matrix.trace(); }

    /// Columns of the result are i.i.d. N(0, K).
    MatrixXd sample_columns(Index count, Rng& rng) const;
    /// Rows of the result are i.i.d. N(0, K).
    MatrixXd sample_rows(Index count, Rng& rng) const;
};

/// Haar-distributed orthogonal p x p matrix: QR of a Gaussian matrix with the
/// signs of diag(R) folded into the columns of Q.
MatrixXd haar_orthogonal(Index p, Rng& rng);

/// Materializes with the stream derived from spec.seed (fixed per experiment).
Covariance materialize_covariance(const CovarianceSpec& spec);
/// Materializes drawing the rotation from `rng` (redrawn per realization).
Covariance materialize_covariance(const CovarianceSpec& spec, Rng& rng);

/// One experiment cell. The assumed prior on the p_S + p_F model unknowns is
/// the identity.
struct ProblemConfig {
    Index p_S = 0;
    Index p_C = 0;
    Index p_F = 0;
    Index n = 1;
    double sigma_v2 = 0.0;
    double sigma_hat2 = 0.0;
    CovarianceSpec cov_x_S;
    CovarianceSpec cov_x_C;

    /// Identity priors on both unknown blocks.
    static ProblemConfig isotropic(Index p_S, Index p_C, Index p_F, Index n, double sigma_v2,
                                   double sigma_hat2 = 0.0);

    Index p() const noexcept { return p_S + p_C; }
    Index p_bar() const noexcept { return p_S + p_F; }

    /// Throws InvalidSpec on violated invariants.
    void validate() const;
};

/// Row covariances of the feature matrices: K_a for [A_S, A_C] (p x p) and
/// K_a_F for A_F (p_F x p_F). The two blocks are uncorrelated.
struct FeatureCovariance {
    Covariance a;
    Covariance a_F;
};

/// One realization of the regressors plus the thin SVD of [A_S, A_F].
class FeatureSet {
public:
    FeatureSet(MatrixXd A_S, MatrixXd A_C, MatrixXd A_F);

    const MatrixXd& A_S() const noexcept { return A_S_; }
    const MatrixXd& A_C() const noexcept { return A_C_; }
    const MatrixXd& A_F() const noexcept { return A_F_; }

    Index n() const noexcept { return A_S_.rows(); }
    Index p_S() const noexcept { return A_S_.cols(); }
    Index p_C() const noexcept { return A_C_.cols(); }
    Index p_F() const noexcept { return A_F_.cols(); }
    Index p_bar() const noexcept { return p_S() + p_F(); }

    /// [A_S, A_F]
    MatrixXd A_bar() const;

    /// Thin SVD factors of A_bar: U (n x r), s (r, descending), V (p_bar x r),
    /// r = min(n, p_bar).
    const MatrixXd& U() const noexcept { return U_; }
    const VectorXd& singular_values() const noexcept { return s_; }
    const MatrixXd& V() const noexcept { return V_; }

private:
    MatrixXd A_S_, A_C_, A_F_;
    MatrixXd U_, V_;
    VectorXd s_;
};

FeatureSet sample_features(const ProblemConfig& config, Rng& rng);
FeatureSet sample_features(const ProblemConfig& config, const FeatureCovariance& cov, Rng& rng);

struct UnknownsDraw {
    VectorXd x_S;
    VectorXd x_C;
    VectorXd v;
};

/// `count` independent draws stored column-wise.
struct UnknownsBatch {
    MatrixXd X_S;  // p_S x count
    MatrixXd X_C;  // p_C x count
    MatrixXd V;    // n x count
    Index count() const noexcept { return V.cols(); }
};

/// Materialized priors of the underlying system.
struct Priors {
    Covariance x_S;
    Covariance x_C;

    static Priors materialize(const ProblemConfig& config);
};

UnknownsDraw sample_unknowns(const ProblemConfig& config, const Priors& priors, Rng& rng);
UnknownsBatch sample_unknowns(const ProblemConfig& config, const Priors& priors, Index count,
                              Rng& rng);

/// y = A_S x_S + A_C x_C + v. A_F never enters.
VectorXd generate_observations(const FeatureSet& features, const UnknownsDraw& draw);
MatrixXd generate_observations(const FeatureSet& features, const UnknownsBatch& batch);

}  // namespace misspec
