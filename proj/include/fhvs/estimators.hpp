#pragma once

#include <Eigen/Dense>
#include <utility>

#include "fhvs/design.hpp"

namespace fhvs::est {

struct DesignEstimate {
    int area = -1;
    double theta_hat = 0.0;  // Hajek mean
    double v_hat = 0.0;      // Taylor variance
    int m_dot = 0;
    int strata_count = 0;
    bool estimable = false;
};

// Hajek estimator over the in-domain clusters.
double hajek_mean(const design::AreaSample& a);

// Taylor-linearized variance with unplanned-domain handling: out-of-domain
// clusters of a contributing stratum enter with weight zero, m_h counts the
// full stratum sample. Returns 0 when m_dot <= 1.
double taylor_variance(const design::AreaSample& a);

// Simplified estimator valid under the equal-weight planned-domain
// assumptions; uses in-domain clusters only.
double simple_variance(const design::AreaSample& a);

// Quadratic-form evaluation ybar' M ybar / (1'w*)^2 with M = T'BT.
double matrix_variance(const design::AreaSample& a);

// M = T'BT in the row order of the area sample; shared with the sampling
// distribution machinery.
Eigen::MatrixXd quadform_matrix(const design::AreaSample& a);

// Variance contributions of the clusters inside and outside the domain;
// the two terms sum to taylor_variance and the outside term vanishes for
// planned domains.
std::pair<double, double> domain_decomposition(const design::AreaSample& a);

DesignEstimate estimate_area(const design::AreaSample& a);

}  // namespace fhvs::est
