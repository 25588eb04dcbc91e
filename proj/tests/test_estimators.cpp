#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "fhvs/estimators.hpp"
#include "fhvs/rng.hpp"

using namespace fhvs;
using namespace fhvs::design;
using namespace fhvs::est;

namespace {

// Test-side oracle: direct transcription of the weighted variance formula,
// summing over every sampled cluster of each contributing stratum with
// weights zeroed outside the domain. Kept independent of the library path.
double longform_oracle(const AreaSample& a) {
    if (a.m_dot <= 1) return 0.0;
    double wsum = 0.0, num = 0.0;
    for (const auto& r : a.rows)
        if (r.in_domain) {
            wsum += r.wstar;
            num += r.wstar * r.ybar;
        }
    const double theta = num / wsum;

    std::map<int, std::vector<const AreaSample::Row*>> strata;
    for (const auto& r : a.rows) strata[r.stratum].push_back(&r);

    double total = 0.0;
    for (const auto& [h, rows] : strata) {
        bool any_in = false;
        for (const auto* r : rows) any_in = any_in || r->in_domain;
        if (!any_in) continue;
        const double mh = static_cast<double>(rows.size());
        double tbar = 0.0;
        for (const auto* r : rows) tbar += (r->in_domain ? r->wstar : 0.0) * (r->ybar - theta);
        tbar /= mh;
        double inner = 0.0;
        for (const auto* r : rows) {
            const double term = (r->in_domain ? r->wstar : 0.0) * (r->ybar - theta) - tbar;
            inner += term * term;
        }
        total += mh / (mh - 1.0) * inner;
    }
    return total / (wsum * wsum);
}

AreaSample make_area(const std::vector<std::array<double, 3>>& rows_by_stratum_y_w,
                     const std::vector<int>& strata_of_rows,
                     const std::vector<bool>& in_domain, const std::vector<int>& n_of_rows = {}) {
    AreaSample a;
    a.area = 0;
    for (std::size_t i = 0; i < strata_of_rows.size(); ++i) {
        AreaSample::Row r;
        r.cluster_id = static_cast<int>(i);
        r.stratum = strata_of_rows[i];
        r.ybar = rows_by_stratum_y_w[i][1];
        r.wstar = rows_by_stratum_y_w[i][2];
        r.n = n_of_rows.empty() ? 5 : n_of_rows[i];
        r.in_domain = in_domain[i];
        r.urban = false;
        a.rows.push_back(r);
        if (r.in_domain) {
            ++a.m_dot;
            if (std::find(a.strata.begin(), a.strata.end(), r.stratum) == a.strata.end())
                a.strata.push_back(r.stratum);
        }
    }
    a.estimable = a.m_dot > 1;
    return a;
}

AreaSample random_area(Rng& rng, bool allow_unplanned = true) {
    const int n_strata = 1 + static_cast<int>(rng.below(3));
    AreaSample a;
    a.area = 0;
    int id = 0;
    for (int h = 0; h < n_strata; ++h) {
        const int mh = 2 + static_cast<int>(rng.below(5));
        for (int c = 0; c < mh; ++c) {
            AreaSample::Row r;
            r.cluster_id = id++;
            r.stratum = h;
            r.ybar = rng.normal(0.0, 2.0);
            r.wstar = std::exp(rng.normal(1.0, 0.7));
            r.n = 1 + static_cast<int>(rng.below(20));
            r.in_domain = !allow_unplanned || rng.uniform() < 0.7;
            r.urban = rng.uniform() < 0.5;
            a.rows.push_back(r);
        }
    }
    // keep at least two in-domain clusters so the estimator is defined
    int m = 0;
    for (const auto& r : a.rows) m += r.in_domain;
    for (auto& r : a.rows) {
        if (m >= 2) break;
        if (!r.in_domain) {
            r.in_domain = true;
            ++m;
        }
    }
    a.m_dot = 0;
    for (const auto& r : a.rows)
        if (r.in_domain) {
            ++a.m_dot;
            if (std::find(a.strata.begin(), a.strata.end(), r.stratum) == a.strata.end())
                a.strata.push_back(r.stratum);
        }
    a.estimable = a.m_dot > 1;
    return a;
}

}  // namespace

TEST_SUITE_BEGIN("estimators");

TEST_CASE("hajek mean basics") {
    const auto a = make_area({{0, 1.0, 1.0}, {0, 3.0, 1.0}}, {0, 0}, {true, true});
    CHECK(hajek_mean(a) == doctest::Approx(2.0));
    const auto b = make_area({{0, 0.0, 1.0}, {0, 4.0, 3.0}}, {0, 0}, {true, true});
    CHECK(hajek_mean(b) == doctest::Approx(3.0));
    const auto c = make_area({{0, 5.0, 2.0}, {0, 9.0, 1.0}}, {0, 0}, {true, false});
    CHECK(hajek_mean(c) == doctest::Approx(5.0));
    const auto d = make_area({{0, 5.0, 2.0}}, {0}, {false});
    CHECK_THROWS(hajek_mean(d));
}

TEST_CASE("taylor variance: planned single stratum") {
    const auto a = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}}, {0, 0}, {true, true});
    CHECK(taylor_variance(a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("taylor variance: unplanned domain fixture equals 0.75") {
    const auto a = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}, {0, 9.0, 4.0}}, {0, 0, 0},
                             {true, true, false});
    CHECK(taylor_variance(a) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(longform_oracle(a) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("taylor variance: single in-domain cluster gives zero") {
    const auto a = make_area({{0, 5.0, 2.0}, {0, 1.0, 3.0}}, {0, 0}, {true, false});
    CHECK(taylor_variance(a) == 0.0);
}

TEST_CASE("taylor variance: contributing stratum of size one is an error") {
    const auto a = make_area({{0, 5.0, 2.0}, {1, 1.0, 3.0}}, {0, 1}, {true, true});
    CHECK_THROWS(taylor_variance(a));
}

TEST_CASE("simple variance examples") {
    const auto a = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}}, {0, 0}, {true, true});
    CHECK(simple_variance(a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(simple_variance(a) == doctest::Approx(taylor_variance(a)).epsilon(1e-12));

    const auto b = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}, {1, 0.0, 1.0}, {1, 2.0, 1.0}},
                             {0, 0, 1, 1}, {true, true, true, true});
    CHECK(simple_variance(b) == doctest::Approx(0.5).epsilon(1e-12));

    const auto c = make_area({{0, 3.0, 1.0}, {0, 3.0, 2.0}, {0, 3.0, 0.5}}, {0, 0, 0},
                             {true, true, true});
    CHECK(simple_variance(c) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

    const auto d = make_area({{0, 1.0, 1.0}, {1, 2.0, 1.0}}, {0, 1}, {true, true});
    CHECK_THROWS(simple_variance(d));  // zero degrees of freedom
}

TEST_CASE("matrix form equals the longform evaluation") {
    const auto a = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}, {0, 9.0, 4.0}}, {0, 0, 0},
                             {true, true, false});
    CHECK(matrix_variance(a) == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(321);
    for (int t = 0; t < 300; ++t) {
        const auto r = random_area(rng);
        const double tv = taylor_variance(r);
        const double mv = matrix_variance(r);
        const double oracle = longform_oracle(r);
        CHECK(std::abs(mv - tv) <= 1e-10 * std::max(1e-300, std::abs(tv)));
        CHECK(tv == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("simplification holds under the equal-design assumptions") {
    Rng rng(654);
    for (int t = 0; t < 100; ++t) {
        // planned domain, equal weights, equal m_h per stratum
        const int n_strata = 1 + static_cast<int>(rng.below(3));
        const int mh = 2 + static_cast<int>(rng.below(4));
        std::vector<std::array<double, 3>> rows;
        std::vector<int> strata;
        std::vector<bool> in;
        for (int h = 0; h < n_strata; ++h)
            for (int c = 0; c < mh; ++c) {
                rows.push_back({0.0, rng.normal(0.0, 1.0), 2.5});
                strata.push_back(h);
                in.push_back(true);
            }
        const auto a = make_area(rows, strata, in);
        CHECK(taylor_variance(a) ==
              doctest::Approx(simple_variance(a)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("scale equivariance and weight invariance") {
    Rng rng(987);
    for (int t = 0; t < 50; ++t) {
        auto a = random_area(rng);
        const double theta = hajek_mean(a);
        const double v = taylor_variance(a);
        auto b = a;
        for (auto& r : b.rows) r.ybar *= 3.0;
        CHECK(hajek_mean(b) == doctest::Approx(3.0 * theta).epsilon(1e-12).scale(1.0));
        CHECK(taylor_variance(b) == doctest::Approx(9.0 * v).epsilon(1e-10).scale(1e-300));
        auto c = a;
        for (auto& r : c.rows) r.wstar *= 7.5;
        CHECK(hajek_mean(c) == doctest::Approx(theta).epsilon(1e-12).scale(1.0));
        CHECK(taylor_variance(c) == doctest::Approx(v).epsilon(1e-10).scale(1e-300));
    }
}

TEST_CASE("variance is nonnegative on random instances") {
    Rng rng(246);
    for (int t = 0; t < 500; ++t) {
        const auto a = random_area(rng);
        CHECK(taylor_variance(a) >= 0.0);
        CHECK(matrix_variance(a) >= -1e-15);
    }
}

TEST_CASE("domain decomposition sums to the variance") {
    const auto planned = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}, {1, 1.0, 2.0}, {1, 4.0, 2.0}},
                                   {0, 0, 1, 1}, {true, true, true, true});
    auto [inside_p, outside_p] = domain_decomposition(planned);
    CHECK(outside_p == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(inside_p == doctest::Approx(taylor_variance(planned)).epsilon(1e-12));

    const auto unplanned = make_area({{0, 0.0, 1.0}, {0, 2.0, 1.0}, {0, 9.0, 4.0}}, {0, 0, 0},
                                     {true, true, false});
    auto [inside_u, outside_u] = domain_decomposition(unplanned);
    CHECK(inside_u + outside_u == doctest::Approx(0.75).epsilon(1e-12));

    const auto flat = make_area({{0, 2.0, 1.0}, {0, 2.0, 3.0}, {0, 2.0, 1.0}}, {0, 0, 0},
                                {true, true, false});
    auto [inside_f, outside_f] = domain_decomposition(flat);
    CHECK(inside_f == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(outside_f == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

    Rng rng(135);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_area(rng);
        auto [ins, outs] = domain_decomposition(a);
        CHECK(ins + outs == doctest::Approx(taylor_variance(a)).epsilon(1e-9).scale(1e-300));
        CHECK(ins >= 0.0);
        CHECK(outs >= 0.0);
    }
}

TEST_CASE("estimate_area carries flags and counts") {
    const auto a = make_area({{0, 1.0, 1.0}, {0, 3.0, 1.0}}, {0, 0}, {true, true});
    const auto e = estimate_area(a);
    CHECK(e.theta_hat == doctest::Approx(2.0));
    CHECK(e.m_dot == 2);
    CHECK(e.strata_count == 1);
    CHECK(e.estimable);
}

TEST_SUITE_END();
