#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fhvs/distributions.hpp"
#include "fhvs/spatial.hpp"

namespace fhvs::inference {

enum class ModelKind { standard, oracle, smooth };
enum class SamplingDist { simple, sasw };

struct ModelVariant {
    ModelKind kind = ModelKind::smooth;
    SamplingDist dist = SamplingDist::simple;       // smooth only
    bool structured_variance = true;                // smooth only

    static ModelVariant parse(const std::string& name);
    std::string name() const;
    bool smooth() const { return kind == ModelKind::smooth; }
};

struct PriorConfig {
    double eta_intercept_mean = 0.5;
    double eta_intercept_sd = 0.5;
    double regression_sd = 2.0;
    double pc_u = 1.0;
    double pc_alpha = 0.01;
    double phi_a = 0.5;
    double phi_b = 1.0;
};

// Observed data and fixed structures for one model fit. Eigensystems are
// computed once by the caller; parameter values only enter the variance
// likelihood through the chi-square moments.
struct ModelData {
    ModelVariant variant;
    int n_areas = 0;

    Eigen::VectorXd theta_hat;  // direct estimates (NaN allowed where not estimable)
    Eigen::VectorXd v_hat;
    std::vector<char> estimable;
    Eigen::VectorXd total_n;       // in-domain sample size per area
    Eigen::VectorXd simple_c, simple_d;  // NaN where undefined
    std::vector<dist::SaswEigensystem> eig;  // per area, sasw variants only

    Eigen::MatrixXd X;        // K x p mean covariates, leading intercept
    Eigen::VectorXd p_urban;  // urban population proportion
    Eigen::MatrixXd Z;        // K x pz variance covariates (smooth only)

    spatial::ScaledIcar icar;
    Eigen::VectorXd oracle_v;  // empirical design variances (oracle kind)

    PriorConfig priors;

    bool mean_term(int i) const;
    bool variance_term(int i) const;
    void validate() const;
};

// Flat parameter vector layout for a variant.
struct ParamLayout {
    int n_areas = 0, p_mean = 0, p_var = 0;
    bool smooth = false, structured_variance = false;

    int beta = 0;       // [beta] p_mean
    int gamma = 0;      // scalar
    int u_b = 0, v_b = 0, log_tau_b = 0, logit_phi_b = 0;
    int eta = -1, u_e = -1, v_e = -1, log_tau_e = -1, logit_phi_e = -1;
    int size = 0;

    static ParamLayout make(const ModelData& d);
    std::vector<std::string> names() const;
};

// Derived latent state for a parameter vector.
struct LatentState {
    Eigen::VectorXd b, e, theta, sigma2;
    double tau_b = 0.0, phi_b = 0.0, tau_e = 0.0, phi_e = 0.0;
};
LatentState derive_state(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x);

// Per-area likelihood contributions and the full log posterior. Non-finite
// results signal an invalid proposal and are handled by rejection.
double mean_loglik(const ModelData& d, int i, double theta_i, double sigma2_i);
double variance_loglik(const ModelData& d, int i, double sigma2_i, double gamma);
double log_prior(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x);
double log_posterior(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x);

// Density of V ~ scale * chisq(df) at v.
double scaled_chisq_logpdf(double v, double scale, double df);

}  // namespace fhvs::inference
