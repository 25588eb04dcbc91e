#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fhvs/design.hpp"
#include "fhvs/rng.hpp"

namespace fhvs::dist {

// Precomputed ingredients of the survey-weighted sampling distribution for one
// area: nonzero eigenvalues of D^{1/2} M D^{1/2}, eigenvectors back-transformed
// to v = D^{-1/2} e (so v'Dv = 1), and their squared projections onto the
// urban indicator. Parameters (gamma, sigma2) only enter downstream through
// the noncentralities, so one eigensystem serves a whole MCMC run.
struct SaswEigensystem {
    int area = -1;
    Eigen::VectorXd q;        // nonzero eigenvalues, descending
    Eigen::VectorXd a;        // a_j = (v_j' u)^2 for the urban indicator u
    Eigen::MatrixXd vectors;  // columns v_j, v'Dv = 1
    double wdw = 0.0;         // w*' D w*
    double sum_wstar = 0.0;   // 1' w*
    int m_dot = 0;
    int n_strata = 0;
    double total_n = 0.0;     // in-domain sample size, for the simple distribution
    std::vector<design::AreaSample::Row> rows;  // retained for bias diagnostics
    Eigen::MatrixXd m_matrix;

    int rank() const { return static_cast<int>(q.size()); }
};

// Chi-square parameterization of a sampling distribution for V-hat:
//   V-hat ~ theoretical_v * scale_c * chisq(df_d)
struct ChiSquareParams {
    double scale_c = 0.0;
    double df_d = 0.0;
    double theoretical_v = 0.0;

    double mean() const { return theoretical_v * scale_c * df_d; }
    double variance() const { return 2.0 * theoretical_v * theoretical_v * scale_c * scale_c * df_d; }
};

// V*(sigma2) = sigma2 sum(w*^2/n) / (sum w*)^2 over in-domain clusters
double v_star(const design::AreaSample& a, double sigma2);

// V-dagger(sigma2) = sigma2 / total in-domain sample size
double v_dagger(const design::AreaSample& a, double sigma2);

// Constants of the simple sampling distribution for one area; legacy mode uses
// the SRS degrees of freedom (total sample size minus one) instead.
struct SimpleDist {
    double c = 0.0;
    double d = 0.0;
    double total_n = 0.0;
    ChiSquareParams params(double sigma2) const { return {c, d, sigma2 / total_n}; }
};
SimpleDist simple_params(const design::AreaSample& a, bool legacy_srs_df = false);

SaswEigensystem sasw_eigensystem(const design::AreaSample& a, double rel_tol = 1e-10);

ChiSquareParams sasw_params(const SaswEigensystem& eig, double gamma, double sigma2);

// Per-row gamma vector variant (general stratum effects); used by tests.
ChiSquareParams sasw_params_general(const SaswEigensystem& eig, const Eigen::VectorXd& gamma_vec,
                                    double sigma2);

// Draws from the exact law (sigma2/(1'w*)^2) sum_j q_j chisq1(delta_j).
std::vector<double> sample_exact_sw(const SaswEigensystem& eig, double gamma, double sigma2,
                                    int n_draws, std::uint64_t seed);

// First-moment bias of V-hat against V*: factor = Q1 / w*'Dw*, with the
// weight-spread term R and the mean-contrast cross term satisfying
// factor = 1 + (cross - R)/w*'Dw*.
struct BiasDiagnostics {
    double factor = 0.0;
    double r_term = 0.0;
    double cross_term = 0.0;
};
BiasDiagnostics bias_factor(const SaswEigensystem& eig, double gamma, double sigma2);

}  // namespace fhvs::dist
