#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fhvs/rng.hpp"
#include "fhvs/spatial.hpp"
#include "fhvs/stats.hpp"

using namespace fhvs;
using namespace fhvs::spatial;

namespace {

std::vector<std::vector<int>> path_graph(int n) {
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i + 1 < n; ++i) {
        adj[i].push_back(i + 1);
        adj[i + 1].push_back(i);
    }
    return adj;
}

std::vector<std::vector<int>> grid_graph(int rows, int cols) {
    std::vector<std::vector<int>> adj(rows * cols);
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) {
                adj[id(r, c)].push_back(id(r, c + 1));
                adj[id(r, c + 1)].push_back(id(r, c));
            }
            if (r + 1 < rows) {
                adj[id(r, c)].push_back(id(r + 1, c));
                adj[id(r + 1, c)].push_back(id(r, c));
            }
        }
    return adj;
}

}  // namespace

TEST_SUITE_BEGIN("spatial");

TEST_CASE("structure matrix of a 3-node path") {
    const auto q = icar_structure(path_graph(3));
    CHECK(q(0, 0) == 1.0);
    CHECK(q(1, 1) == 2.0);
    CHECK(q(2, 2) == 1.0);
    CHECK(q(0, 1) == -1.0);
    CHECK(q(1, 2) == -1.0);
    CHECK(q(0, 2) == 0.0);
    for (int i = 0; i < 3; ++i) CHECK(q.row(i).sum() == doctest::Approx(0.0));
}

TEST_CASE("two-node structure and scaling factor 1/4") {
    const auto q = icar_structure(path_graph(2));
    CHECK(q(0, 0) == 1.0);
    CHECK(q(0, 1) == -1.0);
    // constrained generalized inverse of [[1,-1],[-1,1]] has diagonal (1/4, 1/4)
    const auto s = scale_icar(q);
    CHECK(s.scale == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("disconnected or degenerate graphs are rejected") {
    std::vector<std::vector<int>> disc(4);
    disc[0].push_back(1);
    disc[1].push_back(0);
    disc[2].push_back(3);
    disc[3].push_back(2);
    CHECK_THROWS(icar_structure(disc));
    CHECK_THROWS(icar_structure(std::vector<std::vector<int>>(1)));
}

TEST_CASE("structure is PSD with exactly one zero eigenvalue") {
    const auto q = icar_structure(grid_graph(4, 5));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    const auto& vals = es.eigenvalues();
    CHECK(vals(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(vals(1) > 1e-8);
}

TEST_CASE("scaling yields unit geometric mean marginal variance") {
    const auto s = scale_icar(icar_structure(grid_graph(5, 6)));
    // recompute the generalized inverse of the scaled structure directly
    const int n = s.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.structure);
    double log_gm = 0.0;
    for (int i = 0; i < n; ++i) {
        double m = 0.0;
        for (int k = 1; k < n; ++k)
            m += es.eigenvectors()(i, k) * es.eigenvectors()(i, k) / es.eigenvalues()(k);
        log_gm += std::log(m);
    }
    CHECK(std::exp(log_gm / n) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scaling an already scaled structure is idempotent") {
    const auto s1 = scale_icar(icar_structure(grid_graph(4, 4)));
    const auto s2 = scale_icar(s1.structure);
    CHECK(s2.scale == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((s2.structure - s1.structure).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("icar draws satisfy the sum-to-zero constraint") {
    const auto s = scale_icar(icar_structure(grid_graph(5, 5)));
    Rng rng(101);
    for (int t = 0; t < 50; ++t) {
        const auto u = sample_icar(s, rng);
        CHECK(std::abs(u.sum()) < 1e-8);
    }
}

TEST_CASE("bym2 marginal standard deviation is about 1/sqrt(tau)") {
    const auto s = scale_icar(icar_structure(grid_graph(6, 10)));
    Rng rng(103);
    const double tau = 1.0 / (0.32 * 0.32), phi = 0.75;
    KahanSum sq;
    const int draws = 20000;
    for (int t = 0; t < draws; ++t) {
        const auto b = sample_bym2(s, tau, phi, rng);
        sq.add(b.squaredNorm() / b.size());
    }
    const double sd = std::sqrt(sq.value() / draws);
    CHECK(sd == doctest::Approx(0.32).epsilon(0.05));
}

TEST_CASE("bym2 variance matches 1/tau across phi") {
    const auto s = scale_icar(icar_structure(grid_graph(5, 8)));
    Rng rng(107);
    for (double phi : {0.0, 0.4, 1.0}) {
        const double tau = 4.0;
        KahanSum sq;
        const int draws = 20000;
        for (int t = 0; t < draws; ++t) sq.add(sample_bym2(s, tau, phi, rng).squaredNorm() / s.size());
        CHECK(sq.value() / draws == doctest::Approx(1.0 / tau).epsilon(0.05));
    }
}

TEST_CASE("bym2 log density reduces to its parts at the ends") {
    const auto s = scale_icar(icar_structure(path_graph(6)));
    Rng rng(109);
    Eigen::VectorXd u = sample_icar(s, rng);
    Eigen::VectorXd v(6);
    for (int i = 0; i < 6; ++i) v(i) = rng.normal();

    const double iid_part = -0.5 * v.squaredNorm() - 0.5 * 6 * std::log(2.0 * std::numbers::pi);
    CHECK(bym2_logdensity(u, v, 2.0, 0.0, s) == doctest::Approx(iid_part).epsilon(1e-12));

    // the structured part is invariant to constant shifts only through the
    // quadratic form; the constraint penalty rejects a shifted u
    const double base = bym2_logdensity(u, v, 2.0, 0.75, s);
    Eigen::VectorXd shifted = u.array() + 1.0;
    CHECK(icar_quadform(s, shifted) == doctest::Approx(icar_quadform(s, u)).epsilon(1e-10));
    CHECK(bym2_logdensity(shifted, v, 2.0, 0.75, s) < base - 100.0);
    CHECK_THROWS(bym2_logdensity(u, v, 2.0, 1.5, s));
}

TEST_CASE("pc prior: rate, normalization, tail") {
    // lambda = -ln(alpha)/u
    CHECK(-std::log(0.01) / 1.0 == doctest::Approx(4.60517).epsilon(1e-5));

    auto check_pair = [](double u, double alpha) {
        // numerical integration of the density over tau, via midpoint rule on
        // the substitution t = tau^{-1/2} (density becomes lambda exp(-lambda t))
        const double lambda = -std::log(alpha) / u;
        auto density = [&](double tau) { return std::exp(pc_prec_logdensity(tau, u, alpha)); };
        // integrate over t = tau^{-1/2}, splitting at t = u so the tail event
        // 1/sqrt(tau) > u aligns with a panel boundary
        auto piece = [&](double lo, double hi, int steps) {
            double acc = 0.0;
            const double w = (hi - lo) / steps;
            for (int i = 0; i < steps; ++i) {
                const double t = lo + (i + 0.5) * w;
                const double tau = 1.0 / (t * t);
                const double jac = 2.0 / (t * t * t);  // |d tau / d t|
                acc += density(tau) * jac * w;
            }
            return acc;
        };
        const double t_max = 60.0 / lambda;
        const double head = piece(1e-9, u, 400000);
        const double tail = piece(u, t_max, 400000);
        CHECK(head + tail == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(tail == doctest::Approx(alpha).epsilon(1e-6).scale(1.0));
    };
    check_pair(1.0, 0.01);
    check_pair(1.0, 0.1);
    check_pair(0.5, 0.05);
}

TEST_CASE("beta(0.5,1) has mean 1/3 and integrates to 1") {
    // analytic: mean of Beta(a,b) is a/(a+b)
    CHECK(0.5 / 1.5 == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    const int steps = 2000000;
    double total = 0.0, m1 = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double x = (i + 0.5) / steps;
        const double f = std::exp(beta_logdensity(x, 0.5, 1.0));
        total += f / steps;
        m1 += x * f / steps;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(m1 == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_SUITE_END();
