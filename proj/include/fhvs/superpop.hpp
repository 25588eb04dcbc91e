#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "fhvs/geography.hpp"

namespace fhvs::frame {

enum class Setting { s1, s1a, s2, s3, s4, reenum };

Setting parse_setting(const std::string& tag);
std::string setting_tag(Setting s);

// Outcome family for individual draws.
struct OutcomeKind {
    enum class Family { normal, student_t, intra_cluster_normal };
    Family family = Family::normal;
    double t_df = 5.0;
    double rho = 0.25;

    static OutcomeKind normal() { return {Family::normal, 5.0, 0.0}; }
    static OutcomeKind student_t(double df) {
        if (df <= 2.0) throw std::invalid_argument("student_t outcome: df <= 2 has undefined variance");
        return {Family::student_t, df, 0.0};
    }
    static OutcomeKind intra_cluster(double rho) {
        if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("intra_cluster outcome: rho outside [0,1)");
        return {Family::intra_cluster_normal, 5.0, rho};
    }
    static OutcomeKind for_setting(Setting s) {
        if (s == Setting::s3) return student_t(5.0);
        if (s == Setting::s4) return intra_cluster(0.25);
        return normal();
    }
};

// Superpopulation parameters: fixed-effect coefficients, covariates, per-area
// urban effects and BYM2 draws. theta/sigma2 give the stratum-area mean and
// variance of the latent model.
struct SuperpopParams {
    Eigen::VectorXd beta;        // length 4
    Eigen::VectorXd eta;         // length 4
    Eigen::MatrixXd X;           // K x 4, leading intercept column
    Eigen::MatrixXd Z;           // K x 4
    Eigen::VectorXd gamma_area;  // per-area urban effect on the mean
    Eigen::VectorXd kappa_area;  // per-area urban effect on the log variance
    Eigen::VectorXd b;           // per-area BYM2 draw (mean model)
    Eigen::VectorXd e;           // per-area BYM2 draw (log-variance model)
    Eigen::VectorXd b_structured;  // structured components, retained for checks
    Eigen::VectorXd e_structured;

    double theta(int area, bool urban) const {
        return X.row(area).dot(beta) + (urban ? gamma_area(area) : 0.0) + b(area);
    }
    double sigma2(int area, bool urban) const {
        return std::exp(Z.row(area).dot(eta) + (urban ? kappa_area(area) : 0.0) + e(area));
    }
};

SuperpopParams gen_superpopulation(const Geography& geog, Setting setting, std::uint64_t seed);

}  // namespace fhvs::frame
