#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fhvs/model.hpp"

namespace fhvs::inference {

struct McmcConfig {
    int chains = 4;
    int warmup = 1000;
    int iters = 1000;  // stored draws per chain
    int thin = 1;      // sweeps per stored draw after warmup
    double rhat_max = 1.05;
    double ess_min = 100.0;
};

// Stored draws across chains: sampled parameters plus derived quantities
// (b, e, natural-scale hyperparameters, theta, sigma2).
struct PosteriorDraws {
    std::vector<std::string> names;
    int n_chains = 0;
    int n_iter = 0;
    int n_areas = 0;
    std::vector<Eigen::MatrixXd> chains;  // each n_iter x names.size()
    Eigen::VectorXd rhat;
    Eigen::VectorXd ess;
    bool converged = true;
    std::vector<std::string> warnings;

    int col(const std::string& name) const;
    // draws of one column pooled across chains
    std::vector<double> pooled(int column) const;
    std::vector<double> pooled(const std::string& name) const { return pooled(col(name)); }
};

PosteriorDraws fit(const ModelData& data, const McmcConfig& cfg, std::uint64_t seed);

// split-chain potential scale reduction and effective sample size
double split_rhat(const std::vector<Eigen::VectorXd>& sequences);
double bulk_ess(const std::vector<Eigen::VectorXd>& sequences);

}  // namespace fhvs::inference
