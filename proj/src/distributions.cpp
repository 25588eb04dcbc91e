#include "fhvs/distributions.hpp"

#include <cmath>
#include <stdexcept>

#include "fhvs/estimators.hpp"
#include "fhvs/stats.hpp"

namespace fhvs::dist {

double v_star(const design::AreaSample& a, double sigma2) {
    if (sigma2 < 0.0) throw std::invalid_argument("v_star: negative sigma2");
    KahanSum num, den;
    for (const auto& r : a.rows) {
        if (!r.in_domain) continue;
        num.add(r.wstar * r.wstar / r.n);
        den.add(r.wstar);
    }
    if (den.value() <= 0.0) throw std::invalid_argument("v_star: no in-domain clusters");
    return sigma2 * num.value() / (den.value() * den.value());
}

double v_dagger(const design::AreaSample& a, double sigma2) {
    if (sigma2 < 0.0) throw std::invalid_argument("v_dagger: negative sigma2");
    const auto n = a.total_n();
    if (n <= 0) throw std::invalid_argument("v_dagger: zero total sample size");
    return sigma2 / static_cast<double>(n);
}

SimpleDist simple_params(const design::AreaSample& a, bool legacy_srs_df) {
    SimpleDist s;
    s.total_n = static_cast<double>(a.total_n());
    if (s.total_n <= 0.0) throw std::invalid_argument("simple_params: zero total sample size");
    double df;
    if (legacy_srs_df) {
        df = s.total_n - 1.0;
    } else {
        df = static_cast<double>(a.m_dot - a.stratum_count());
    }
    if (df <= 0.0) throw std::invalid_argument("simple_params: nonpositive degrees of freedom");
    s.c = 1.0 / df;
    s.d = df;
    return s;
}

SaswEigensystem sasw_eigensystem(const design::AreaSample& a, double rel_tol) {
    SaswEigensystem out;
    out.area = a.area;
    out.m_dot = a.m_dot;
    out.n_strata = a.stratum_count();
    out.total_n = static_cast<double>(a.total_n());
    out.rows = a.rows;

    const int n = static_cast<int>(a.rows.size());
    Eigen::VectorXd w(n), inv_sqrt_n(n), urban(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = a.rows[i];
        if (!std::isfinite(r.ybar) || !std::isfinite(r.wstar) || r.n < 1)
            throw std::invalid_argument("sasw_eigensystem: non-finite input row");
        w(i) = r.in_domain ? r.wstar : 0.0;
        inv_sqrt_n(i) = 1.0 / std::sqrt(static_cast<double>(r.n));
        urban(i) = r.urban ? 1.0 : 0.0;
    }
    out.sum_wstar = w.sum();
    out.wdw = (w.array() * w.array() * inv_sqrt_n.array() * inv_sqrt_n.array()).sum();

    out.m_matrix = est::quadform_matrix(a);
    const Eigen::MatrixXd psi =
        inv_sqrt_n.asDiagonal() * out.m_matrix * inv_sqrt_n.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("sasw_eigensystem: eigendecomposition failed");
    const Eigen::VectorXd& vals = es.eigenvalues();  // ascending
    const double cutoff = rel_tol * std::max(0.0, vals(n - 1));

    std::vector<int> keep;
    for (int k = n - 1; k >= 0; --k)
        if (vals(k) > cutoff && vals(k) > 0.0) keep.push_back(k);  // descending order

    const int r = static_cast<int>(keep.size());
    out.q.resize(r);
    out.a.resize(r);
    out.vectors.resize(n, r);
    for (int j = 0; j < r; ++j) {
        out.q(j) = vals(keep[j]);
        // back-transform so that v' D v = e'e = 1
        Eigen::VectorXd v = es.eigenvectors().col(keep[j]).cwiseQuotient(inv_sqrt_n);
        out.vectors.col(j) = v;
        const double proj = v.dot(urban);
        out.a(j) = proj * proj;
    }
    return out;
}

namespace {

struct Moments {
    double q1;
    double q2;
};

Moments moments(const SaswEigensystem& eig, const Eigen::VectorXd& delta) {
    KahanSum q1, q2;
    for (int j = 0; j < eig.rank(); ++j) {
        q1.add(eig.q(j) * (1.0 + delta(j)));
        q2.add(eig.q(j) * eig.q(j) * (1.0 + 2.0 * delta(j)));
    }
    return {q1.value(), 2.0 * q2.value()};
}

Eigen::VectorXd deltas_for(const SaswEigensystem& eig, double gamma, double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("sasw: sigma2 <= 0");
    return eig.a * (gamma * gamma / sigma2);
}

ChiSquareParams params_from(const SaswEigensystem& eig, const Moments& m, double sigma2) {
    if (m.q1 <= 0.0) throw std::invalid_argument("sasw_params: degenerate eigensystem");
    ChiSquareParams p;
    p.scale_c = m.q2 / (2.0 * m.q1 * eig.wdw);
    p.df_d = 2.0 * m.q1 * m.q1 / m.q2;
    p.theoretical_v = sigma2 * eig.wdw / (eig.sum_wstar * eig.sum_wstar);
    return p;
}

}  // namespace

ChiSquareParams sasw_params(const SaswEigensystem& eig, double gamma, double sigma2) {
    const Eigen::VectorXd delta = deltas_for(eig, gamma, sigma2);
    return params_from(eig, moments(eig, delta), sigma2);
}

ChiSquareParams sasw_params_general(const SaswEigensystem& eig, const Eigen::VectorXd& gamma_vec,
                                    double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("sasw: sigma2 <= 0");
    Eigen::VectorXd delta(eig.rank());
    for (int j = 0; j < eig.rank(); ++j) {
        const double proj = eig.vectors.col(j).dot(gamma_vec);
        delta(j) = proj * proj / sigma2;
    }
    return params_from(eig, moments(eig, delta), sigma2);
}

std::vector<double> sample_exact_sw(const SaswEigensystem& eig, double gamma, double sigma2,
                                    int n_draws, std::uint64_t seed) {
    if (n_draws < 1) throw std::invalid_argument("sample_exact_sw: n_draws < 1");
    const Eigen::VectorXd delta = deltas_for(eig, gamma, sigma2);
    const double scale = sigma2 / (eig.sum_wstar * eig.sum_wstar);
    Rng rng(derive_seed(seed, {0x5357u}));
    std::vector<double> out(n_draws);
    for (auto& v : out) {
        double s = 0.0;
        for (int j = 0; j < eig.rank(); ++j) s += eig.q(j) * rng.noncentral_chisq1(delta(j));
        v = scale * s;
    }
    return out;
}

BiasDiagnostics bias_factor(const SaswEigensystem& eig, double gamma, double sigma2) {
    const Eigen::VectorXd delta = deltas_for(eig, gamma, sigma2);
    const Moments m = moments(eig, delta);

    BiasDiagnostics d;
    d.factor = m.q1 / eig.wdw;

    // R = w*'Dw* - tr(MD) from the per-stratum double sum: with u_c the
    // stratum-centered weight, R = sum_h f_h sum_c u_c [ (2/s) w_c^2/n_c
    // - (wDw/s^2) u_c ].
    const auto& rows = eig.rows;
    const double s = eig.sum_wstar;
    const double wdw = eig.wdw;
    KahanSum r_sum;
    std::size_t i = 0;
    while (i < rows.size()) {
        const int h = rows[i].stratum;
        std::size_t begin = i;
        double wsum = 0.0;
        int mh = 0;
        while (i < rows.size() && rows[i].stratum == h) {
            wsum += rows[i].in_domain ? rows[i].wstar : 0.0;
            ++mh;
            ++i;
        }
        if (mh < 2) continue;
        const double wbar = wsum / mh;
        const double f = mh / (mh - 1.0);
        for (std::size_t j = begin; j < i; ++j) {
            const double wc = rows[j].in_domain ? rows[j].wstar : 0.0;
            const double uc = wc - wbar;
            r_sum.add(f * uc * (2.0 / s * wc * wc / rows[j].n - wdw / (s * s) * uc));
        }
    }
    d.r_term = r_sum.value();

    // gamma' M gamma / sigma2 via the centered per-stratum form, independent
    // of the eigendecomposition
    if (gamma != 0.0) {
        Eigen::VectorXd gvec(rows.size());
        Eigen::VectorXd w(rows.size());
        for (std::size_t j = 0; j < rows.size(); ++j) {
            gvec(j) = rows[j].urban ? gamma : 0.0;
            w(j) = rows[j].in_domain ? rows[j].wstar : 0.0;
        }
        const double gbar_w = w.dot(gvec) / s;
        Eigen::VectorXd t = w.array() * (gvec.array() - gbar_w);
        KahanSum cross;
        std::size_t j = 0;
        while (j < rows.size()) {
            const int h = rows[j].stratum;
            std::size_t begin = j;
            double tsum = 0.0;
            int mh = 0;
            while (j < rows.size() && rows[j].stratum == h) {
                tsum += t(j);
                ++mh;
                ++j;
            }
            if (mh < 2) continue;
            const double tbar = tsum / mh;
            const double f = mh / (mh - 1.0);
            for (std::size_t l = begin; l < j; ++l) cross.add(f * (t(l) - tbar) * (t(l) - tbar));
        }
        d.cross_term = cross.value() / sigma2;
    }
    return d;
}

}  // namespace fhvs::dist
