#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fhvs/mcmc.hpp"
#include "fhvs/model.hpp"
#include "fhvs/posterior.hpp"
#include "fhvs/rng.hpp"
#include "fhvs/stats.hpp"
#include "synth.hpp"

using namespace fhvs;
using namespace fhvs::inference;

namespace {

Eigen::VectorXd random_params(const ParamLayout& lay, Rng& rng, double scale = 0.3) {
    Eigen::VectorXd x(lay.size);
    for (int j = 0; j < lay.size; ++j) x(j) = scale * rng.normal();
    x(lay.log_tau_b) = std::log(8.0) + 0.2 * rng.normal();
    if (lay.smooth) x(lay.log_tau_e) = std::log(8.0) + 0.2 * rng.normal();
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("inference");

TEST_CASE("variant names round-trip") {
    for (const char* n : {"standard", "oracle", "simple-struct", "simple-unstruct", "sasw-struct",
                          "sasw-unstruct"})
        CHECK(ModelVariant::parse(n).name() == n);
    CHECK_THROWS(ModelVariant::parse("bogus"));
}

TEST_CASE("finite differences recover the Gaussian score of the standard model") {
    auto [d, truth] = testutil::synth_model_data(12, ModelVariant::parse("standard"), 5);
    const auto lay = ParamLayout::make(d);
    Rng rng(17);
    const auto x = random_params(lay, rng);
    const auto s = derive_state(d, lay, x);

    for (int i : {0, 3, 7}) {
        const int j = lay.v_b + i;
        const double h = 1e-5;
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const double fd = (log_posterior(d, lay, xp) - log_posterior(d, lay, xm)) / (2.0 * h);
        // chain rule: d theta_i / d v_b[i] = sqrt((1-phi)/tau)
        const double dtheta = std::sqrt((1.0 - s.phi_b) / s.tau_b);
        const double analytic = (d.theta_hat(i) - s.theta(i)) / d.v_hat(i) * dtheta - x(j);
        CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
    }
}

TEST_CASE("variance likelihood uses m-1 degrees of freedom for single-stratum areas") {
    auto [d, truth] = testutil::synth_model_data(8, ModelVariant::parse("simple-unstruct"), 7);
    for (int i = 0; i < d.n_areas; ++i) {
        CHECK(d.simple_d(i) > 0);
        CHECK(d.simple_d(i) == doctest::Approx(1.0 / d.simple_c(i)));
    }
    // direct check of the density at the configured degrees of freedom
    const double sigma2 = 1.3;
    const double v = sigma2 / d.total_n(0);
    const double ll = variance_loglik(d, 0, sigma2, 0.0);
    const double expect = scaled_chisq_logpdf(d.v_hat(0), v * d.simple_c(0), d.simple_d(0));
    CHECK(ll == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("doubling the theoretical variance lowers the likelihood beyond the mode") {
    auto [d, truth] = testutil::synth_model_data(6, ModelVariant::parse("simple-unstruct"), 11);
    // choose an area and sigma2 so that v_hat sits above the density mode
    const int i = 0;
    const double df = d.simple_d(i);
    REQUIRE(df > 2.0);
    const double sigma2_small = d.v_hat(i) * d.total_n(i) / (d.simple_c(i) * df);  // mean matches
    const double ll1 = variance_loglik(d, i, sigma2_small, 0.0);
    const double ll2 = variance_loglik(d, i, 2.0 * sigma2_small, 0.0);
    CHECK(ll2 < ll1);
}

TEST_CASE("non-estimable areas contribute only through priors") {
    auto [d, truth] = testutil::synth_model_data(10, ModelVariant::parse("simple-struct"), 13);
    d.estimable[4] = 0;
    const auto lay = ParamLayout::make(d);
    Rng rng(23);
    const auto x = random_params(lay, rng);
    const double lp0 = log_posterior(d, lay, x);
    auto d2 = d;
    d2.theta_hat(4) = 1e9;  // garbage data in the excluded area
    d2.v_hat(4) = 1e-9;
    CHECK(log_posterior(d2, lay, x) == doctest::Approx(lp0).epsilon(1e-12));
}

TEST_CASE("areas with zero variance estimate keep the mean likelihood only") {
    auto [d, truth] = testutil::synth_model_data(10, ModelVariant::parse("simple-struct"), 29);
    const auto lay = ParamLayout::make(d);
    Rng rng(31);
    const auto x = random_params(lay, rng);
    auto d2 = d;
    d2.v_hat(3) = 0.0;
    const auto s = derive_state(d2, lay, x);
    CHECK(variance_loglik(d2, 3, s.sigma2(3), x(lay.gamma)) == 0.0);
    CHECK(mean_loglik(d2, 3, s.theta(3), s.sigma2(3)) != 0.0);
    CHECK(std::isfinite(log_posterior(d2, lay, x)));
}

TEST_CASE("log posterior is invariant under a consistent area permutation") {
    for (const char* name : {"standard", "simple-struct", "sasw-unstruct"}) {
        auto [d, truth] = testutil::synth_model_data(9, ModelVariant::parse(name), 37);
        const auto lay = ParamLayout::make(d);
        Rng rng(41);
        const auto x = random_params(lay, rng);
        const double lp = log_posterior(d, lay, x);

        // permute areas in every structure
        std::vector<int> perm(d.n_areas);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

        ModelData pd = d;
        Eigen::VectorXd px = x;
        Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(d.n_areas, d.n_areas);
        // rebuild the unscaled structure from the scaled one
        raw = d.icar.structure / d.icar.scale;
        Eigen::MatrixXd praw(d.n_areas, d.n_areas);
        for (int i = 0; i < d.n_areas; ++i)
            for (int j = 0; j < d.n_areas; ++j) praw(perm[i], perm[j]) = raw(i, j);
        pd.icar = spatial::scale_icar(praw);
        for (int i = 0; i < d.n_areas; ++i) {
            pd.theta_hat(perm[i]) = d.theta_hat(i);
            pd.v_hat(perm[i]) = d.v_hat(i);
            pd.estimable[perm[i]] = d.estimable[i];
            pd.total_n(perm[i]) = d.total_n(i);
            pd.simple_c(perm[i]) = d.simple_c(i);
            pd.simple_d(perm[i]) = d.simple_d(i);
            pd.X.row(perm[i]) = d.X.row(i);
            pd.p_urban(perm[i]) = d.p_urban(i);
            if (lay.smooth) pd.Z.row(perm[i]) = d.Z.row(i);
            if (!d.eig.empty()) {
                pd.eig[perm[i]] = d.eig[i];
                pd.eig[perm[i]].area = perm[i];
            }
            px(lay.u_b + perm[i]) = x(lay.u_b + i);
            px(lay.v_b + perm[i]) = x(lay.v_b + i);
            if (lay.structured_variance) px(lay.u_e + perm[i]) = x(lay.u_e + i);
            if (lay.smooth && !lay.structured_variance) px(lay.v_e + perm[i]) = x(lay.v_e + i);
            if (lay.structured_variance) px(lay.v_e + perm[i]) = x(lay.v_e + i);
        }
        CHECK(log_posterior(pd, lay, px) == doctest::Approx(lp).epsilon(1e-10));
    }
}

TEST_CASE("chi-square parameters enter only through the precomputed eigensystems") {
    auto [d, truth] = testutil::synth_model_data(6, ModelVariant::parse("sasw-unstruct"), 43);
    const auto lay = ParamLayout::make(d);
    Rng rng(47);
    // evaluations at many parameter points reuse the same eigensystems and
    // agree with a fresh evaluation
    const auto x = random_params(lay, rng);
    const double lp1 = log_posterior(d, lay, x);
    for (int t = 0; t < 5; ++t) {
        const auto y = random_params(lay, rng);
        (void)log_posterior(d, lay, y);
    }
    CHECK(log_posterior(d, lay, x) == lp1);
}

TEST_CASE("fit is deterministic given a seed") {
    auto [d, truth] = testutil::synth_model_data(8, ModelVariant::parse("simple-unstruct"), 53);
    McmcConfig cfg{2, 80, 60, 1, 2.0, 0.0};
    const auto a = fit(d, cfg, 2024);
    const auto b = fit(d, cfg, 2024);
    const auto c = fit(d, cfg, 2025);
    CHECK((a.chains[0] - b.chains[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.chains[1] - b.chains[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.chains[0] - c.chains[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("posterior mean tracks the direct estimate under flat priors") {
    // two areas, standard model, wide priors: shrinkage is negligible
    auto [d, truth] = testutil::synth_model_data(2, ModelVariant::parse("standard"), 59);
    d.theta_hat << 5.0, -3.0;
    d.v_hat << 1.0, 1.0;
    d.X = Eigen::MatrixXd::Ones(2, 1);
    d.p_urban.setZero();
    d.priors.regression_sd = 50.0;
    d.priors.pc_u = 50.0;   // prior allows a large random-effect scale
    d.priors.pc_alpha = 0.5;
    McmcConfig cfg{2, 500, 800, 2, 2.0, 0.0};
    const auto draws = fit(d, cfg, 31);
    const auto s = summarize_posterior(draws, 0.90);
    CHECK(s[0].theta_mean == doctest::Approx(5.0).epsilon(0.06));
    CHECK(s[1].theta_mean == doctest::Approx(-3.0).epsilon(0.06));
    CHECK(s[0].theta_lo < 5.0);
    CHECK(s[0].theta_hi > 5.0);
}

TEST_CASE("split rhat and ess behave on synthetic chains") {
    Rng rng(61);
    std::vector<Eigen::VectorXd> iid;
    for (int c = 0; c < 4; ++c) {
        Eigen::VectorXd s(500);
        for (int t = 0; t < 500; ++t) s(t) = rng.normal();
        iid.push_back(s);
    }
    CHECK(split_rhat(iid) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(bulk_ess(iid) > 1200.0);

    // strong autocorrelation deflates the effective sample size
    std::vector<Eigen::VectorXd> ar;
    for (int c = 0; c < 4; ++c) {
        Eigen::VectorXd s(500);
        double v = 0.0;
        for (int t = 0; t < 500; ++t) {
            v = 0.9 * v + std::sqrt(1 - 0.81) * rng.normal();
            s(t) = v;
        }
        ar.push_back(s);
    }
    CHECK(bulk_ess(ar) < 400.0);
    CHECK(bulk_ess(ar) > 30.0);

    // separated chains blow up rhat
    std::vector<Eigen::VectorXd> sep = iid;
    sep[0].array() += 5.0;
    CHECK(split_rhat(sep) > 1.5);
}

TEST_CASE("summaries use type-7 interpolated quantiles") {
    PosteriorDraws d;
    d.n_chains = 1;
    d.n_iter = 4000;
    d.n_areas = 1;
    d.names = {"theta[0]"};
    Eigen::MatrixXd m(4000, 1);
    Rng rng(67);
    std::vector<double> vals(4000);
    std::iota(vals.begin(), vals.end(), 1.0);
    for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[rng.below(i)]);
    for (int t = 0; t < 4000; ++t) m(t, 0) = vals[t];
    d.chains.push_back(m);

    const auto s = summarize_posterior(d, 0.90);
    // type-7 on 1..4000: h = 0.05*3999 = 199.95 -> 200.95; upper mirrors it
    CHECK(s[0].theta_lo == doctest::Approx(200.95).epsilon(1e-12));
    CHECK(s[0].theta_hi == doctest::Approx(3800.05).epsilon(1e-12));
    CHECK(s[0].theta_mean == doctest::Approx(2000.5).epsilon(1e-12));

    // constant draws give a zero-width interval
    PosteriorDraws c = d;
    c.chains[0].setConstant(7.25);
    const auto sc = summarize_posterior(c, 0.90);
    CHECK(sc[0].theta_lo == 7.25);
    CHECK(sc[0].theta_hi == 7.25);
}

TEST_CASE("rank probabilities") {
    PosteriorDraws d;
    d.n_chains = 1;
    d.n_iter = 400;
    d.n_areas = 2;
    d.names = {"theta[0]", "theta[1]"};
    Eigen::MatrixXd m(400, 2);
    Rng rng(71);
    for (int t = 0; t < 400; ++t) {
        m(t, 0) = rng.normal();
        m(t, 1) = m(t, 0) + 1.0 + rng.uniform();  // area 0 always smaller
    }
    d.chains.push_back(m);
    const auto p = rank_probabilities(d, 0.5);
    CHECK(p(0) == doctest::Approx(1.0));

    // exchangeable areas: average probability equals (floor(pK)+1)/K
    PosteriorDraws e;
    e.n_chains = 1;
    e.n_iter = 2000;
    e.n_areas = 40;
    for (int i = 0; i < 40; ++i) e.names.push_back("theta[" + std::to_string(i) + "]");
    Eigen::MatrixXd me(2000, 40);
    for (int t = 0; t < 2000; ++t)
        for (int i = 0; i < 40; ++i) me(t, i) = rng.normal();
    e.chains.push_back(me);
    const auto pe = rank_probabilities(e, 0.25);
    CHECK(pe.mean() == doctest::Approx((std::floor(0.25 * 40) + 1) / 40.0).epsilon(1e-12));
    CHECK(pe.mean() == doctest::Approx(0.25).epsilon(0.12));
    CHECK_THROWS(rank_probabilities(e, 0.0));
}

TEST_CASE("model data validation catches mismatched eigensystems") {
    auto [d, truth] = testutil::synth_model_data(5, ModelVariant::parse("sasw-struct"), 73);
    d.eig[2].area = 4;
    CHECK_THROWS(d.validate());
    auto [d2, truth2] = testutil::synth_model_data(5, ModelVariant::parse("sasw-struct"), 73);
    d2.eig.pop_back();
    CHECK_THROWS(d2.validate());
}

TEST_SUITE_END();
