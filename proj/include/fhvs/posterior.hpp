#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fhvs/mcmc.hpp"

namespace fhvs::inference {

struct AreaSummary {
    int area = -1;
    double theta_mean = 0.0, theta_lo = 0.0, theta_hi = 0.0;
    // NaN for variants without a latent variance model
    double sigma2_mean = 0.0, sigma2_lo = 0.0, sigma2_hi = 0.0;
};

// Posterior mean and equal-tailed credible interval per area (type-7
// interpolated quantiles over the pooled draws).
std::vector<AreaSummary> summarize_posterior(const PosteriorDraws& draws, double level = 0.90);

// Posterior probability that each area is among the lowest p fraction:
// per draw, the share of areas an area strictly exceeds is compared to p.
Eigen::VectorXd rank_probabilities(const PosteriorDraws& draws, double p);

}  // namespace fhvs::inference
