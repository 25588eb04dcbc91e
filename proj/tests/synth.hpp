#pragma once

// Model-consistent synthetic data for sampler tests: draws latent effects and
// observations from the generative model itself, at chosen true parameter
// values. Shared by the unit suite and the acceptance calibration run.

#include <Eigen/Dense>

#include "fhvs/design.hpp"
#include "fhvs/distributions.hpp"
#include "fhvs/geography.hpp"
#include "fhvs/model.hpp"
#include "fhvs/rng.hpp"
#include "fhvs/spatial.hpp"

namespace fhvs::testutil {

struct SynthTruth {
    Eigen::VectorXd beta;
    double gamma = 0.0;
    Eigen::VectorXd eta;
    Eigen::VectorXd theta, sigma2;
};

struct SynthData {
    inference::ModelData data;
    SynthTruth truth;
};

inline SynthData synth_model_data(int k, const inference::ModelVariant& variant,
                                  std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x53u}));
    const auto geog = frame::build_geography(k, std::max(2, k / 6), 0, seed);
    const auto icar = spatial::scale_icar(spatial::icar_structure(geog.adjacency));

    SynthTruth t;
    t.beta = Eigen::Vector4d(-1.0, -0.15, -0.1, 0.25);
    t.gamma = 1.0;
    t.eta = Eigen::Vector4d(0.5, -0.15, -0.1, 0.25);

    inference::ModelData d;
    d.variant = variant;
    d.n_areas = k;
    d.X = Eigen::MatrixXd::Ones(k, 4);
    Eigen::MatrixXd zfull = Eigen::MatrixXd::Ones(k, 4);
    d.p_urban.resize(k);
    for (int i = 0; i < k; ++i) {
        for (int j = 1; j < 4; ++j) d.X(i, j) = rng.normal();
        for (int j = 1; j < 4; ++j) zfull(i, j) = rng.normal();
        d.p_urban(i) = rng.uniform();
    }
    if (variant.smooth()) d.Z = variant.structured_variance ? zfull : Eigen::MatrixXd::Ones(k, 1);

    const Eigen::VectorXd b = spatial::sample_bym2(icar, 1.0 / (0.32 * 0.32), 0.75, rng);
    const Eigen::VectorXd e = spatial::sample_bym2(icar, 1.0 / (0.22 * 0.22), 0.75, rng);

    t.theta = d.X * t.beta + t.gamma * d.p_urban + b;
    // unstructured variants still get data generated with the full covariates
    t.sigma2 = (zfull * t.eta + e).array().exp();

    d.theta_hat.resize(k);
    d.v_hat.resize(k);
    d.estimable.assign(k, 1);
    d.total_n.resize(k);
    d.simple_c.resize(k);
    d.simple_d.resize(k);
    if (variant.smooth() && variant.dist == inference::SamplingDist::sasw) d.eig.resize(k);

    for (int i = 0; i < k; ++i) {
        // planned single-stratum area with m clusters, constant weights
        const int m = 4 + static_cast<int>(rng.below(6));
        design::AreaSample a;
        a.area = i;
        a.strata = {0};
        for (int c = 0; c < m; ++c) {
            long n;
            do {
                n = rng.negbin(8.0, 9.0);
            } while (n == 0);
            a.rows.push_back({c, 0, 0.0, 120.0, static_cast<int>(n), true, rng.uniform() < 0.4});
        }
        a.m_dot = m;
        a.estimable = true;
        d.total_n(i) = static_cast<double>(a.total_n());
        d.simple_c(i) = 1.0 / (m - 1.0);
        d.simple_d(i) = m - 1.0;

        double v_i, c_i, df_i;
        if (variant.smooth() && variant.dist == inference::SamplingDist::sasw) {
            d.eig[i] = dist::sasw_eigensystem(a);
            const auto p = dist::sasw_params(d.eig[i], t.gamma, t.sigma2(i));
            v_i = p.theoretical_v;
            c_i = p.scale_c;
            df_i = p.df_d;
        } else {
            v_i = t.sigma2(i) / d.total_n(i);
            c_i = d.simple_c(i);
            df_i = d.simple_d(i);
        }
        d.theta_hat(i) = t.theta(i) + std::sqrt(v_i) * rng.normal();
        d.v_hat(i) = v_i * c_i * rng.chisq(df_i);
    }

    d.icar = icar;
    d.validate();
    return {std::move(d), std::move(t)};
}

}  // namespace fhvs::testutil
