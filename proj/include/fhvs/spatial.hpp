#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fhvs/rng.hpp"

namespace fhvs::spatial {

// ICAR structure matrix scaled so the constrained marginal variances have
// geometric mean 1, together with the eigensystem used for sampling and
// generalized-inverse computations.
struct ScaledIcar {
    Eigen::MatrixXd structure;     // scaled structure matrix, K x K, rank K-1
    double scale = 1.0;            // kappa applied to the raw structure
    Eigen::VectorXd marginal_var;  // diag of the constrained generalized inverse (scaled model)
    Eigen::MatrixXd basis;         // K x (K-1) eigenvectors of the scaled structure, positive eigenvalues
    Eigen::VectorXd evals;         // corresponding eigenvalues, ascending

    int size() const { return static_cast<int>(structure.rows()); }
};

// Graph Laplacian of the adjacency: diagonal = degree, off-diagonal = -1 for
// neighbors. Throws if the graph is disconnected or has fewer than 2 nodes.
Eigen::MatrixXd icar_structure(const std::vector<std::vector<int>>& adjacency);

ScaledIcar scale_icar(const Eigen::MatrixXd& structure);

// u' Q* u for the scaled structure, via the edge form.
double icar_quadform(const ScaledIcar& icar, const Eigen::VectorXd& u);

// Draw of the constrained scaled ICAR effect (sums to zero by construction).
Eigen::VectorXd sample_icar(const ScaledIcar& icar, Rng& rng);

// b = (1/sqrt(tau)) (sqrt(1-phi) v + sqrt(phi) u)
Eigen::VectorXd bym2_combine(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                             double tau, double phi);

// Joint log density of the standardized components (u, v). The structured part
// is unnormalized in the intrinsic direction; a soft Gaussian penalty with
// SD 1e-3 / sqrt(K) keeps mean(u) identified. phi = 0 reduces to the IID part
// alone, phi = 1 to the structured part alone.
double bym2_logdensity(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                       double tau, double phi, const ScaledIcar& icar);

Eigen::VectorXd sample_bym2(const ScaledIcar& icar, double tau, double phi, Rng& rng);

// Type-2 Gumbel PC prior for a precision, defined by P(1/sqrt(tau) > u) = alpha.
double pc_prec_logdensity(double tau, double u, double alpha);

double beta_logdensity(double x, double a, double b);

}  // namespace fhvs::spatial
