#include "fhvs/estimators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fhvs/stats.hpp"

namespace fhvs::est {

namespace {

struct StratumSlice {
    int stratum;
    int begin;  // row range [begin, end) in AreaSample::rows
    int end;
    int m_h;    // all sampled clusters in the stratum
    int m_hi;   // in-domain
};

// rows are stored stratum-contiguous by construction
std::vector<StratumSlice> slices(const design::AreaSample& a) {
    std::vector<StratumSlice> out;
    const int n = static_cast<int>(a.rows.size());
    int i = 0;
    while (i < n) {
        StratumSlice s;
        s.stratum = a.rows[i].stratum;
        s.begin = i;
        while (i < n && a.rows[i].stratum == s.stratum) ++i;
        s.end = i;
        s.m_h = s.end - s.begin;
        s.m_hi = 0;
        for (int j = s.begin; j < s.end; ++j)
            if (a.rows[j].in_domain) ++s.m_hi;
        out.push_back(s);
    }
    return out;
}

double weight(const design::AreaSample::Row& r) { return r.in_domain ? r.wstar : 0.0; }

}  // namespace

double hajek_mean(const design::AreaSample& a) {
    KahanSum num, den;
    for (const auto& r : a.rows) {
        if (!r.in_domain) continue;
        num.add(r.wstar * r.ybar);
        den.add(r.wstar);
    }
    if (den.value() <= 0.0) throw std::invalid_argument("hajek_mean: no in-domain clusters");
    return num.value() / den.value();
}

double taylor_variance(const design::AreaSample& a) {
    if (a.m_dot <= 1) return 0.0;
    const double theta = hajek_mean(a);
    KahanSum wsum;
    for (const auto& r : a.rows) wsum.add(weight(r));
    const double s = wsum.value();

    KahanSum total;
    for (const auto& sl : slices(a)) {
        if (sl.m_hi == 0) continue;  // all weights zero, inner sums vanish
        if (sl.m_h < 2)
            throw std::invalid_argument("taylor_variance: contributing stratum with a single sampled cluster");
        KahanSum tsum;
        for (int j = sl.begin; j < sl.end; ++j)
            tsum.add(weight(a.rows[j]) * (a.rows[j].ybar - theta));
        const double tbar = tsum.value() / sl.m_h;
        KahanSum sq;
        for (int j = sl.begin; j < sl.end; ++j) {
            const double d = weight(a.rows[j]) * (a.rows[j].ybar - theta) - tbar;
            sq.add(d * d);
        }
        total.add(sq.value() * sl.m_h / (sl.m_h - 1.0));
    }
    return total.value() / (s * s);
}

double simple_variance(const design::AreaSample& a) {
    const int m = a.m_dot;
    const int nh = a.stratum_count();
    if (m <= nh) throw std::invalid_argument("simple_variance: zero degrees of freedom");
    KahanSum total;
    for (const auto& sl : slices(a)) {
        if (sl.m_hi == 0) continue;
        KahanSum ysum;
        for (int j = sl.begin; j < sl.end; ++j)
            if (a.rows[j].in_domain) ysum.add(a.rows[j].ybar);
        const double yb = ysum.value() / sl.m_hi;
        for (int j = sl.begin; j < sl.end; ++j) {
            if (!a.rows[j].in_domain) continue;
            const double d = a.rows[j].ybar - yb;
            total.add(d * d);
        }
    }
    return total.value() / (static_cast<double>(m) * (m - nh));
}

// T = W (I - 1 w*'/s), B block-diagonal with m_h/(m_h-1) (I - 11'/m_h)
Eigen::MatrixXd quadform_matrix(const design::AreaSample& a) {
    const int n = static_cast<int>(a.rows.size());
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = weight(a.rows[i]);
    const double s = w.sum();
    if (s <= 0.0) throw std::invalid_argument("quadform_matrix: no in-domain weight");

    Eigen::MatrixXd t = -w * (w.transpose() / s);
    t.diagonal() += w;

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& sl : slices(a)) {
        if (sl.m_h < 2) {
            if (sl.m_hi > 0)
                throw std::invalid_argument("quadform_matrix: contributing stratum with a single sampled cluster");
            continue;
        }
        const double f = sl.m_h / (sl.m_h - 1.0);
        for (int i = sl.begin; i < sl.end; ++i) {
            for (int j = sl.begin; j < sl.end; ++j) b(i, j) = -f / sl.m_h;
            b(i, i) += f;
        }
    }
    return t.transpose() * b * t;
}

double matrix_variance(const design::AreaSample& a) {
    if (a.m_dot <= 1) return 0.0;
    const int n = static_cast<int>(a.rows.size());
    Eigen::VectorXd y(n), w(n);
    for (int i = 0; i < n; ++i) {
        y(i) = a.rows[i].ybar;
        w(i) = weight(a.rows[i]);
    }
    const double s = w.sum();
    const Eigen::MatrixXd m = quadform_matrix(a);
    return y.dot(m * y) / (s * s);
}

std::pair<double, double> domain_decomposition(const design::AreaSample& a) {
    if (a.m_dot <= 1) return {0.0, 0.0};
    const double theta = hajek_mean(a);
    KahanSum wsum;
    for (const auto& r : a.rows) wsum.add(weight(r));
    const double s = wsum.value();

    KahanSum inside, outside;
    for (const auto& sl : slices(a)) {
        if (sl.m_hi == 0) continue;
        if (sl.m_h < 2)
            throw std::invalid_argument("domain_decomposition: contributing stratum with a single sampled cluster");
        KahanSum tsum;
        for (int j = sl.begin; j < sl.end; ++j)
            if (a.rows[j].in_domain) tsum.add(a.rows[j].wstar * (a.rows[j].ybar - theta));
        const double t_in = tsum.value();
        KahanSum sq;
        for (int j = sl.begin; j < sl.end; ++j) {
            if (!a.rows[j].in_domain) continue;
            const double d = a.rows[j].wstar * (a.rows[j].ybar - theta) - t_in / sl.m_h;
            sq.add(d * d);
        }
        inside.add(sq.value() * sl.m_h / (sl.m_h - 1.0));
        outside.add((sl.m_h - sl.m_hi) / ((sl.m_h - 1.0) * sl.m_h) * t_in * t_in);
    }
    return {inside.value() / (s * s), outside.value() / (s * s)};
}

DesignEstimate estimate_area(const design::AreaSample& a) {
    DesignEstimate e;
    e.area = a.area;
    e.m_dot = a.m_dot;
    e.strata_count = a.stratum_count();
    e.estimable = a.estimable;
    if (a.m_dot >= 1) {
        e.theta_hat = hajek_mean(a);
        e.v_hat = taylor_variance(a);
    } else {
        e.theta_hat = std::numeric_limits<double>::quiet_NaN();
        e.v_hat = std::numeric_limits<double>::quiet_NaN();
    }
    return e;
}

}  // namespace fhvs::est
