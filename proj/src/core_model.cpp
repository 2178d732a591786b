#include "misspec/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

MatrixXd Covariance::sample_columns(Index count, Rng& rng) const {
    MatrixXd z = rng.gaussian(dim(), count);
    if (isotropic) return isotropic_sd * z;
    return factor * z;
}

MatrixXd Covariance::sample_rows(Index count, Rng& rng) const {
    MatrixXd z = rng.gaussian(count, dim());
    if (isotropic) return isotropic_sd * z;
    return z * factor.transpose();
}

MatrixXd haar_orthogonal(Index p, Rng& rng) {
    if (p == 0) return MatrixXd(0, 0);
    const MatrixXd g = rng.gaussian(p, p);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(p, p);
    const MatrixXd& r = qr.matrixQR();
    for (Index j = 0; j < p; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

namespace {

void check_spec(const CovarianceSpec& spec) {
    if (spec.dim < 0) throw InvalidSpec("covariance dimension is negative");
    if (spec.kind == CovarianceKind::Isotropic) {
        if (!(spec.scale > 0.0) || !std::isfinite(spec.scale))
            throw InvalidSpec("isotropic covariance scale must be positive and finite");
    } else {
        if (!std::isfinite(spec.alpha)) throw InvalidSpec("decay exponent alpha must be finite");
        if (spec.dim == 0) throw InvalidSpec("decayed covariance needs dim >= 1");
    }
}

// Normalized decayed spectrum, descending. Computed as (i/dim)^alpha so large
// alpha cannot overflow before normalization.
VectorXd decayed_spectrum(Index dim, double alpha) {
    VectorXd lam(dim);
    const double d = static_cast<double>(dim);
    for (Index i = 0; i < dim; ++i) lam[i] = std::pow(static_cast<double>(i + 1) / d, alpha);
    lam *= d / lam.sum();
    std::sort(lam.data(), lam.data() + dim, std::greater<>());
    return lam;
}

}  // namespace

Covariance materialize_covariance(const CovarianceSpec& spec, Rng& rng) {
    check_spec(spec);
    const Index d = spec.dim;
    Covariance cov;
    if (spec.kind == CovarianceKind::Isotropic) {
        const double scale = spec.scale;
        cov.matrix = scale * MatrixXd::Identity(d, d);
        cov.factor = std::sqrt(scale) * MatrixXd::Identity(d, d);
        cov.isotropic_sd = std::sqrt(scale);
        cov.eigenvalues = VectorXd::Constant(d, scale);
        cov.isotropic = true;
        return cov;
    }

    const VectorXd lam = decayed_spectrum(d, spec.alpha);
    if (!lam.allFinite() || lam.minCoeff() < -1e-12 * lam.maxCoeff())
        throw InvalidSpec("decayed spectrum is not positive semidefinite");

    const MatrixXd u = haar_orthogonal(d, rng);
    // The spectral square root stays exact even when K is numerically
    // singular (large alpha), where a Cholesky factorization would fail.
    cov.factor = u * lam.cwiseSqrt().asDiagonal();
    cov.matrix = u * lam.asDiagonal() * u.transpose();
    cov.matrix = (0.5 * (cov.matrix + cov.matrix.transpose())).eval();
    cov.eigenvalues = lam;
    cov.isotropic = false;
    return cov;
}

Covariance materialize_covariance(const CovarianceSpec& spec) {
    Rng rng(spec.seed, {0xc0f5ULL, static_cast<std::uint64_t>(spec.dim)});
    return materialize_covariance(spec, rng);
}

ProblemConfig ProblemConfig::isotropic(Index p_S, Index p_C, Index p_F, Index n, double sigma_v2,
                                       double sigma_hat2) {
    ProblemConfig c;
    c.p_S = p_S;
    c.p_C = p_C;
    c.p_F = p_F;
    c.n = n;
    c.sigma_v2 = sigma_v2;
    c.sigma_hat2 = sigma_hat2;
    c.cov_x_S = CovarianceSpec::isotropic(p_S);
    c.cov_x_C = CovarianceSpec::isotropic(p_C);
    return c;
}

void ProblemConfig::validate() const {
    if (p_S < 0 || p_C < 0 || p_F < 0) throw InvalidSpec("feature counts must be non-negative");
    if (n < 1) throw InvalidSpec("n must be at least 1");
    if (!(sigma_v2 >= 0.0) || !std::isfinite(sigma_v2))
        throw InvalidSpec("sigma_v2 must be finite and non-negative");
    if (!(sigma_hat2 >= 0.0) || !std::isfinite(sigma_hat2))
        throw InvalidSpec("sigma_hat2 must be finite and non-negative");
    if (cov_x_S.dim != p_S)
        throw InvalidSpec("cov_x_S dimension " + std::to_string(cov_x_S.dim) + " != p_S " +
                          std::to_string(p_S));
    if (cov_x_C.dim != p_C)
        throw InvalidSpec("cov_x_C dimension " + std::to_string(cov_x_C.dim) + " != p_C " +
                          std::to_string(p_C));
    check_spec(cov_x_S);
    check_spec(cov_x_C);
}

FeatureSet::FeatureSet(MatrixXd A_S, MatrixXd A_C, MatrixXd A_F)
    : A_S_(std::move(A_S)), A_C_(std::move(A_C)), A_F_(std::move(A_F)) {
    const Index n = A_S_.rows();
    if ((A_C_.size() > 0 && A_C_.rows() != n) || (A_F_.size() > 0 && A_F_.rows() != n))
        throw InvalidInput("feature blocks must have the same number of rows");
    A_C_.conservativeResize(n, A_C_.cols());
    A_F_.conservativeResize(n, A_F_.cols());

    const Index pb = p_bar();
    if (pb == 0 || n == 0) {
        U_ = MatrixXd(n, 0);
        V_ = MatrixXd(pb, 0);
        s_ = VectorXd(0);
        return;
    }
    Eigen::BDCSVD<MatrixXd> svd(A_bar(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    U_ = svd.matrixU();
    V_ = svd.matrixV();
    s_ = svd.singularValues();
}

MatrixXd FeatureSet::A_bar() const {
    MatrixXd a(n(), p_bar());
    a << A_S_, A_F_;
    return a;
}

FeatureSet sample_features(const ProblemConfig& config, Rng& rng) {
    config.validate();
    MatrixXd a_s = rng.gaussian(config.n, config.p_S);
    MatrixXd a_c = rng.gaussian(config.n, config.p_C);
    MatrixXd a_f = rng.gaussian(config.n, config.p_F);
    return FeatureSet(std::move(a_s), std::move(a_c), std::move(a_f));
}

FeatureSet sample_features(const ProblemConfig& config, const FeatureCovariance& cov, Rng& rng) {
    config.validate();
    if (cov.a.dim() != config.p())
        throw InvalidSpec("K_a dimension " + std::to_string(cov.a.dim()) + " != p " +
                          std::to_string(config.p()));
    if (cov.a_F.dim() != config.p_F)
        throw InvalidSpec("K_a_F dimension " + std::to_string(cov.a_F.dim()) + " != p_F " +
                          std::to_string(config.p_F));
    const MatrixXd a = cov.a.sample_rows(config.n, rng);
    MatrixXd a_f = cov.a_F.sample_rows(config.n, rng);
    return FeatureSet(a.leftCols(config.p_S), a.rightCols(config.p_C), std::move(a_f));
}

Priors Priors::materialize(const ProblemConfig& config) {
    config.validate();
    return {materialize_covariance(config.cov_x_S), materialize_covariance(config.cov_x_C)};
}

UnknownsDraw sample_unknowns(const ProblemConfig& config, const Priors& priors, Rng& rng) {
    UnknownsBatch b = sample_unknowns(config, priors, 1, rng);
    return {b.X_S.col(0), b.X_C.col(0), b.V.col(0)};
}

UnknownsBatch sample_unknowns(const ProblemConfig& config, const Priors& priors, Index count,
                              Rng& rng) {
    if (priors.x_S.dim() != config.p_S || priors.x_C.dim() != config.p_C)
        throw InvalidSpec("materialized priors do not match the configuration");
    UnknownsBatch b;
    b.X_S = priors.x_S.sample_columns(count, rng);
    b.X_C = priors.x_C.sample_columns(count, rng);
    if (config.sigma_v2 == 0.0) {
        b.V = MatrixXd::Zero(config.n, count);
    } else {
        b.V = std::sqrt(config.sigma_v2) * rng.gaussian(config.n, count);
    }
    return b;
}

VectorXd generate_observations(const FeatureSet& features, const UnknownsDraw& draw) {
    if (draw.x_S.size() != features.p_S() || draw.x_C.size() != features.p_C() ||
        draw.v.size() != features.n())
        throw InvalidInput("unknowns do not match feature dimensions");
    VectorXd y = draw.v;
    if (features.p_S() > 0) y.noalias() += features.A_S() * draw.x_S;
    if (features.p_C() > 0) y.noalias() += features.A_C() * draw.x_C;
    return y;
}

MatrixXd generate_observations(const FeatureSet& features, const UnknownsBatch& batch) {
    if (batch.X_S.rows() != features.p_S() || batch.X_C.rows() != features.p_C() ||
        batch.V.rows() != features.n())
        throw InvalidInput("unknowns do not match feature dimensions");
    MatrixXd y = batch.V;
    if (features.p_S() > 0) y.noalias() += features.A_S() * batch.X_S;
    if (features.p_C() > 0) y.noalias() += features.A_C() * batch.X_C;
    return y;
}

}  // namespace misspec
