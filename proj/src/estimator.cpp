#include "misspec/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "misspec/errors.hpp"

namespace misspec {

MisspecifiedEstimator::MisspecifiedEstimator(MatrixXd W_bar, Index p_S, Index p_C,
                                             double sigma_hat2)
    : W_(std::move(W_bar)), p_S_(p_S), p_C_(p_C), sigma_hat2_(sigma_hat2) {
    if (p_S_ < 0 || p_S_ > W_.rows()) throw InvalidInput("p_S exceeds estimator rows");
}

double rank_tolerance(Index rows, Index cols) noexcept {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

MisspecifiedEstimator build_misspecified(const FeatureSet& features, double sigma_hat2) {
    if (!std::isfinite(sigma_hat2) || sigma_hat2 < 0.0)
        throw InvalidInput("sigma_hat2 must be finite and non-negative");
    const VectorXd& s = features.singular_values();
    const Index r = s.size();
    VectorXd gain = VectorXd::Zero(r);
    if (r > 0) {
        const double cutoff = rank_tolerance(features.n(), features.p_bar()) * s[0];
        for (Index i = 0; i < r; ++i) {
            if (s[i] > cutoff) gain[i] = s[i] / (s[i] * s[i] + sigma_hat2);
        }
    }
    MatrixXd w = features.V() * gain.asDiagonal() * features.U().transpose();
    return MisspecifiedEstimator(std::move(w), features.p_S(), features.p_C(), sigma_hat2);
}

MatrixXd symmetric_pinv(const MatrixXd& m) {
    if (m.rows() == 0) return MatrixXd(0, 0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
    const VectorXd& lam = eig.eigenvalues();
    const double top = lam.cwiseAbs().maxCoeff();
    const double cutoff = rank_tolerance(m.rows(), m.cols()) * top;
    VectorXd inv = VectorXd::Zero(lam.size());
    for (Index i = 0; i < lam.size(); ++i) {
        if (lam[i] > cutoff) inv[i] = 1.0 / lam[i];
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

MisspecifiedEstimator build_misspecified(const FeatureSet& features, const MatrixXd& prior_cov,
                                         double sigma_hat2) {
    if (!std::isfinite(sigma_hat2) || sigma_hat2 < 0.0)
        throw InvalidInput("sigma_hat2 must be finite and non-negative");
    if (prior_cov.rows() != features.p_bar() || prior_cov.cols() != features.p_bar())
        throw InvalidInput("assumed prior must be p_bar x p_bar");
    const MatrixXd a = features.A_bar();
    const MatrixXd ka_t = prior_cov * a.transpose();
    MatrixXd gram = a * ka_t;
    gram.diagonal().array() += sigma_hat2;
    MatrixXd w = ka_t * symmetric_pinv(gram);
    return MisspecifiedEstimator(std::move(w), features.p_S(), features.p_C(), sigma_hat2);
}

MatrixXd build_oracle(const FeatureSet& features, const Priors& priors, double sigma_v2) {
    const Index p_S = features.p_S();
    const Index p_C = features.p_C();
    if (priors.x_S.dim() != p_S || priors.x_C.dim() != p_C)
        throw InvalidInput("priors do not match feature dimensions");
    MatrixXd a(features.n(), p_S + p_C);
    a << features.A_S(), features.A_C();
    MatrixXd k = MatrixXd::Zero(p_S + p_C, p_S + p_C);
    k.topLeftCorner(p_S, p_S) = priors.x_S.matrix;
    k.bottomRightCorner(p_C, p_C) = priors.x_C.matrix;
    const MatrixXd ka_t = k * a.transpose();
    MatrixXd gram = a * ka_t;
    gram.diagonal().array() += sigma_v2;
    return ka_t * symmetric_pinv(gram);
}

Estimates estimate(const MisspecifiedEstimator& est, const VectorXd& y) {
    if (y.size() != est.n()) throw InvalidInput("observation length does not match estimator");
    Estimates e;
    e.x_S = est.W_S() * y;
    e.x_F = est.W_F() * y;
    e.x_C = VectorXd::Zero(est.p_C());
    return e;
}

ConditionalMse conditional_mse(const MisspecifiedEstimator& est, const FeatureSet& features,
                               const MatrixXd& K_x_S, double trace_K_x_C, double sigma_v2) {
    const Index p_S = est.p_S();
    if (K_x_S.rows() != p_S || K_x_S.cols() != p_S)
        throw InvalidInput("K_x_S must be p_S x p_S");
    if (features.p_S() != p_S || features.p_F() != est.p_F() || features.n() != est.n())
        throw InvalidInput("estimator was not built from these features");

    ConditionalMse c;
    c.eps_C = trace_K_x_C;
    c.sigma_v2 = sigma_v2;
    if (p_S > 0) {
        MatrixXd b = -(est.W_S() * features.A_S());
        b.diagonal().array() += 1.0;
        c.eps1 = std::max(0.0, (b * K_x_S).cwiseProduct(b).sum());
        c.eps2_weight = est.W_S().squaredNorm();
    }
    if (est.p_F() > 0) {
        c.fake_weight = est.W_F().squaredNorm();
        if (p_S > 0) {
            const MatrixXd g = est.W_F() * features.A_S();
            c.fake_signal = std::max(0.0, (g * K_x_S).cwiseProduct(g).sum());
        }
    }
    return c;
}

}  // namespace misspec
