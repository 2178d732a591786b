#pragma once

#include <cstdint>

#include "misspec/analytic.hpp"
#include "misspec/core_model.hpp"

namespace misspec {

/// Eigenvalues of A^T A for one Gaussian n x p_bar matrix A, descending,
/// padded with exact zeros when p_bar > n.
struct SpectrumSample {
    VectorXd eigenvalues;
    Index n = 0;
    Index p_bar = 0;
    std::uint64_t seed = 0;
};

/// Eigenvalues are squared singular values of A; A^T A is never formed.
SpectrumSample sample_spectrum(Index n, Index p_bar, Rng& rng);

/// Same law as sample_spectrum, drawn from the m x m bidiagonal model of a
/// Gaussian matrix (m = min(n, p_bar)) with chi-distributed entries, so the
/// cost does not grow with max(n, p_bar). Eigenvalues come from the
/// tridiagonal B^T B.
SpectrumSample sample_spectrum_bidiagonal(Index n, Index p_bar, Rng& rng);

/// Per-spectrum integrands of mu1 and mu2 at sigma_hat2. At sigma_hat2 = 0
/// zero eigenvalues contribute 0 to mu1 and 1 to every lambda-tilde (the
/// sigma_hat2 -> 0+ limit).
struct MomentTerms {
    double mu1 = 0.0;
    double mu2 = 0.0;
};
MomentTerms moment_terms(const VectorXd& eigenvalues, double sigma_hat2, Index p_S);

/// Monte Carlo estimate of (mu1, mu2) over `num_spectra` independent spectra
/// drawn with sample_spectrum_bidiagonal.
/// Spectrum k uses the stream stream_id(seed, {k}), so the result does not
/// depend on `threads`.
SpectralMoments estimate_moments(Index n, Index p_bar, double sigma_hat2, Index p_S,
                                 Index num_spectra, std::uint64_t seed, unsigned threads = 1);

inline constexpr Index kDefaultNumSpectra = 200;

/// E[tr((A^T A)^+)]: p_bar/(n - p_bar - 1) when n > p_bar + 1 and
/// n/(p_bar - n - 1) when p_bar > n + 1.
ClosedForm expected_pinv_gram_trace(Index n, Index p_bar);

/// Fourth moments of the entries of a p x p Haar orthogonal matrix.
struct HaarMoments {
    double m4 = 0.0;       // E[v_il^4]
    double m22 = 0.0;      // E[v_il^2 v_ik^2], k != l
    double m_cross = 0.0;  // E[v_il v_jl v_ik v_jk], i != j, k != l
};
HaarMoments haar_fourth_moments(Index p);

/// Diagonal coefficients of E[Q] and E[Q_bar] for the row-space projection
/// of a Gaussian n x p matrix, with p_F = p - p_S.
struct QExpectation {
    double mu_q = 0.0;
    double mu_qbar = 0.0;
};
QExpectation q_expectation(Index n, Index p, Index p_S);

/// Isotropic coefficient of E[A K A^T] for Gaussian A: tr(K).
double gaussian_sandwich_trace(const MatrixXd& K);

// ---------------------------------------------------------------------------
// Sampling oracles. Each draws fresh Gaussian or Haar matrices and reports
// a Welford mean with its standard error.

struct SampledMoment {
    double mean = 0.0;
    double stderr = 0.0;
    Index draws = 0;

    /// |mean - reference| / stderr
    double z(double reference) const;
};

struct SampledHaarMoments {
    SampledMoment m4, m22, m_cross;
};
SampledHaarMoments sample_haar_moments(Index p, Index draws, Rng& rng);

SampledMoment sample_pinv_gram_trace(Index n, Index p_bar, Index draws, Rng& rng);

/// Per-draw averages of the diagonals of Q and Q_bar; `max_offdiag_z` is the
/// largest |z| of any off-diagonal entry of Q against zero.
struct SampledQ {
    SampledMoment mu_q, mu_qbar;
    double max_offdiag_z = 0.0;
};
SampledQ sample_q(Index n, Index p, Index p_S, Index draws, Rng& rng);

struct SampledSandwich {
    SampledMoment diagonal;  // average diagonal entry of A K A^T
    double max_offdiag_z = 0.0;
};
SampledSandwich sample_gaussian_sandwich(const MatrixXd& K, Index n, Index draws, Rng& rng);

}  // namespace misspec
