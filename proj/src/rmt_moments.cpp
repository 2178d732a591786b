#include "misspec/rmt_moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "misspec/errors.hpp"
#include "misspec/parallel.hpp"
#include "misspec/stats.hpp"

namespace misspec {

namespace {
double d(Index v) { return static_cast<double>(v); }
}  // namespace

SpectrumSample sample_spectrum(Index n, Index p_bar, Rng& rng) {
    if (n < 1 || p_bar < 1) throw InvalidInput("spectrum needs n >= 1 and p_bar >= 1");
    SpectrumSample out;
    out.n = n;
    out.p_bar = p_bar;
    out.seed = rng.id();
    const MatrixXd a = rng.gaussian(n, p_bar);
    Eigen::BDCSVD<MatrixXd> svd(a);
    const VectorXd& s = svd.singularValues();
    out.eigenvalues = VectorXd::Zero(p_bar);
    out.eigenvalues.head(s.size()) = s.cwiseAbs2();
    return out;
}

SpectrumSample sample_spectrum_bidiagonal(Index n, Index p_bar, Rng& rng) {
    if (n < 1 || p_bar < 1) throw InvalidInput("spectrum needs n >= 1 and p_bar >= 1");
    const Index big = std::max(n, p_bar);
    const Index m = std::min(n, p_bar);
    SpectrumSample out;
    out.n = n;
    out.p_bar = p_bar;
    out.seed = rng.id();
    auto chi = [&](Index dof) {
        std::chi_squared_distribution<double> dist(static_cast<double>(dof));
        return std::sqrt(dist(rng.engine()));
    };
    VectorXd d(m), e(std::max<Index>(m - 1, 0));
    for (Index i = 0; i < m; ++i) {
        d[i] = chi(big - i);
        if (i + 1 < m) e[i] = chi(m - 1 - i);
    }
    // B^T B for upper bidiagonal B is tridiagonal.
    VectorXd diag(m), sub(std::max<Index>(m - 1, 0));
    for (Index i = 0; i < m; ++i) diag[i] = d[i] * d[i] + (i > 0 ? e[i - 1] * e[i - 1] : 0.0);
    for (Index i = 0; i + 1 < m; ++i) sub[i] = d[i] * e[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    VectorXd lam = eig.eigenvalues().cwiseMax(0.0).reverse();
    out.eigenvalues = VectorXd::Zero(p_bar);
    out.eigenvalues.head(m) = lam;
    return out;
}

MomentTerms moment_terms(const VectorXd& eigenvalues, double sigma_hat2, Index p_S) {
    const Index pb = eigenvalues.size();
    if (pb < 2) throw Unsupported("moments require p_bar > 1");
    if (p_S < 0 || p_S > pb) throw InvalidInput("p_S must lie in [0, p_bar]");
    const double top = eigenvalues.maxCoeff();
    const double cutoff = top > 0.0 ? 1e-13 * top : 0.0;

    double mu1 = 0.0;
    double sum_t = 0.0;
    double sum_t2 = 0.0;
    for (Index i = 0; i < pb; ++i) {
        const double lam = eigenvalues[i];
        double t;  // sigma_hat2 / (lam + sigma_hat2)
        if (sigma_hat2 == 0.0) {
            t = lam > cutoff ? 0.0 : 1.0;
            if (lam > cutoff) mu1 += 1.0 / lam;
        } else {
            const double den = lam + sigma_hat2;
            mu1 += lam / (den * den);
            t = sigma_hat2 / den;
        }
        sum_t += t;
        sum_t2 += t * t;
    }
    // sum_{i} sum_{j<i} t_i t_j
    const double pairs = 0.5 * (sum_t * sum_t - sum_t2);
    const double p = d(pb);
    const double mu2 =
        ((d(p_S) + 2.0) * sum_t2 + 2.0 * (p - d(p_S)) / (p - 1.0) * pairs) / (p * (p + 2.0));
    return {mu1, mu2};
}

SpectralMoments estimate_moments(Index n, Index p_bar, double sigma_hat2, Index p_S,
                                 Index num_spectra, std::uint64_t seed, unsigned threads) {
    if (num_spectra < 2) throw InvalidInput("num_spectra must be at least 2 to estimate variance");
    if (p_bar <= 1) throw Unsupported("moments require p_bar > 1");
    if (!(sigma_hat2 >= 0.0) || !std::isfinite(sigma_hat2))
        throw InvalidInput("sigma_hat2 must be finite and non-negative");

    std::vector<MomentTerms> terms(static_cast<std::size_t>(num_spectra));
    parallel_for(terms.size(), threads, [&](std::size_t k) {
        Rng rng(seed, {static_cast<std::uint64_t>(k)});
        const SpectrumSample spec = sample_spectrum_bidiagonal(n, p_bar, rng);
        terms[k] = moment_terms(spec.eigenvalues, sigma_hat2, p_S);
    });

    RunningStats s1, s2;
    RunningCovariance c12;
    for (const MomentTerms& t : terms) {
        s1.push(t.mu1);
        s2.push(t.mu2);
        c12.push(t.mu1, t.mu2);
    }
    SpectralMoments m;
    m.mu1 = s1.mean();
    m.mu2 = s2.mean();
    m.stderr1 = s1.stderr_mean();
    m.stderr2 = s2.stderr_mean();
    m.cov12 = c12.covariance() / d(num_spectra);
    m.sigma_hat2 = sigma_hat2;
    m.num_spectra = num_spectra;
    m.method = MomentMethod::MonteCarloSpectra;
    return m;
}

ClosedForm expected_pinv_gram_trace(Index n, Index p_bar) {
    const Regime r = classify(p_bar, n);
    if (r == Regime::Under) return {r, d(p_bar) / (d(n) - d(p_bar) - 1.0)};
    if (r == Regime::Over) return {r, d(n) / (d(p_bar) - d(n) - 1.0)};
    return {r, std::nullopt};
}

HaarMoments haar_fourth_moments(Index p) {
    if (p <= 1) throw Unsupported("Haar fourth moments require p > 1");
    const double q = d(p);
    return {3.0 / (q * (q + 2.0)), 1.0 / (q * (q + 2.0)), -1.0 / ((q - 1.0) * q * (q + 2.0))};
}

QExpectation q_expectation(Index n, Index p, Index p_S) {
    if (!(p > n && p > p_S && p > 1) || n < 1 || p_S < 0)
        throw Unsupported("projection moments require p > n, p > p_S and p > 1");
    const double pf = d(p - p_S);
    const double q = d(p);
    const double leak = pf * d(n) * (q - d(n)) / ((q - 1.0) * q * (q + 2.0));
    return {d(n) / q - leak, leak};
}

double gaussian_sandwich_trace(const MatrixXd& K) {
    if (K.rows() != K.cols()) throw InvalidInput("K must be square");
    const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InvalidInput("K must be symmetric");
    return K.trace();
}

double SampledMoment::z(double reference) const {
    if (stderr == 0.0) return mean == reference ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(mean - reference) / stderr;
}

namespace {
SampledMoment finish(const RunningStats& s) { return {s.mean(), s.stderr_mean(), static_cast<Index>(s.count())}; }
}  // namespace

SampledHaarMoments sample_haar_moments(Index p, Index draws, Rng& rng) {
    if (p <= 1) throw Unsupported("Haar fourth moments require p > 1");
    RunningStats s4, s22, sx;
    const double q = d(p);
    for (Index k = 0; k < draws; ++k) {
        const MatrixXd v = haar_orthogonal(p, rng);
        const MatrixXd v2 = v.cwiseAbs2();
        const double m4 = v2.cwiseAbs2().sum() / (q * q);
        // sum_i sum_{l != k} v_il^2 v_ik^2 = sum_i (rowsum_i^2 - sum_l v_il^4)
        double m22 = 0.0;
        for (Index i = 0; i < p; ++i) {
            const double rs = v2.row(i).sum();
            m22 += rs * rs - v2.row(i).cwiseAbs2().sum();
        }
        m22 /= q * q * (q - 1.0);
        // sum_{i != j} sum_{k != l} v_il v_jl v_ik v_jk
        //   = sum_{i != j} [(v_i . v_j)^2 - sum_l v_il^2 v_jl^2]
        const MatrixXd g = v * v.transpose();
        const MatrixXd h = v2 * v2.transpose();
        double cross = 0.0;
        for (Index i = 0; i < p; ++i)
            for (Index j = 0; j < p; ++j)
                if (i != j) cross += g(i, j) * g(i, j) - h(i, j);
        cross /= q * (q - 1.0) * q * (q - 1.0);
        s4.push(m4);
        s22.push(m22);
        sx.push(cross);
    }
    return {finish(s4), finish(s22), finish(sx)};
}

SampledMoment sample_pinv_gram_trace(Index n, Index p_bar, Index draws, Rng& rng) {
    RunningStats s;
    for (Index k = 0; k < draws; ++k) {
        const MatrixXd a = rng.gaussian(n, p_bar);
        // Non-zero eigenvalues of A^T A equal those of the smaller Gram matrix.
        const MatrixXd gram = n >= p_bar ? MatrixXd(a.transpose() * a) : MatrixXd(a * a.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        s.push(eig.eigenvalues().cwiseInverse().sum());
    }
    return finish(s);
}

SampledQ sample_q(Index n, Index p, Index p_S, Index draws, Rng& rng) {
    if (!(p > n && p > p_S)) throw Unsupported("projection moments require p > n and p > p_S");
    const Index p_F = p - p_S;
    RunningStats sq, sqbar;
    std::vector<RunningStats> off(static_cast<std::size_t>(p_S * p_S));
    for (Index k = 0; k < draws; ++k) {
        const MatrixXd a = rng.gaussian(n, p);
        // Orthonormal basis of the row space of A; A^+ A = B B^T.
        Eigen::HouseholderQR<MatrixXd> qr(a.transpose());
        const MatrixXd b = qr.householderQ() * MatrixXd::Identity(p, n);
        const MatrixXd p_ss = b.topRows(p_S) * b.topRows(p_S).transpose();
        const MatrixXd p_sf = b.topRows(p_S) * b.bottomRows(p_F).transpose();
        const MatrixXd q = p_ss * p_ss;
        const MatrixXd qbar = p_sf * p_sf.transpose();
        sq.push(q.diagonal().mean());
        sqbar.push(qbar.diagonal().mean());
        for (Index i = 0; i < p_S; ++i)
            for (Index j = 0; j < p_S; ++j)
                if (i != j) off[static_cast<std::size_t>(i * p_S + j)].push(q(i, j));
    }
    SampledQ out{finish(sq), finish(sqbar), 0.0};
    for (Index i = 0; i < p_S; ++i)
        for (Index j = 0; j < p_S; ++j)
            if (i != j) out.max_offdiag_z = std::max(out.max_offdiag_z, finish(off[static_cast<std::size_t>(i * p_S + j)]).z(0.0));
    return out;
}

SampledSandwich sample_gaussian_sandwich(const MatrixXd& K, Index n, Index draws, Rng& rng) {
    gaussian_sandwich_trace(K);
    const Index p = K.rows();
    RunningStats diag;
    std::vector<RunningStats> off(static_cast<std::size_t>(n * n));
    for (Index k = 0; k < draws; ++k) {
        const MatrixXd a = rng.gaussian(n, p);
        const MatrixXd s = a * K * a.transpose();
        diag.push(s.diagonal().mean());
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) off[static_cast<std::size_t>(i * n + j)].push(s(i, j));
    }
    SampledSandwich out{finish(diag), 0.0};
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) out.max_offdiag_z = std::max(out.max_offdiag_z, finish(off[static_cast<std::size_t>(i * n + j)]).z(0.0));
    return out;
}

}  // namespace misspec
