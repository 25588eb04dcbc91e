#include "fhvs/spatial.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fhvs::spatial {

namespace {

bool connected(const std::vector<std::vector<int>>& adj) {
    const int n = static_cast<int>(adj.size());
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
        }
    }
    return count == n;
}

}  // namespace

Eigen::MatrixXd icar_structure(const std::vector<std::vector<int>>& adjacency) {
    const int n = static_cast<int>(adjacency.size());
    if (n < 2) throw std::invalid_argument("icar_structure: need at least 2 areas");
    if (!connected(adjacency)) throw std::invalid_argument("icar_structure: graph is disconnected");
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j : adjacency[i]) {
            if (j == i) throw std::invalid_argument("icar_structure: self-loop in adjacency");
            q(i, j) = -1.0;
        }
        q(i, i) = static_cast<double>(adjacency[i].size());
    }
    if (!q.isApprox(q.transpose()))
        throw std::invalid_argument("icar_structure: adjacency not symmetric");
    return q;
}

ScaledIcar scale_icar(const Eigen::MatrixXd& structure) {
    const int n = static_cast<int>(structure.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(structure);
    if (es.info() != Eigen::Success) throw std::runtime_error("scale_icar: eigendecomposition failed");
    const Eigen::VectorXd& vals = es.eigenvalues();
    const double tol = 1e-10 * vals(n - 1);
    int zeros = 0;
    while (zeros < n && vals(zeros) < tol) ++zeros;
    if (zeros != 1)
        throw std::invalid_argument("scale_icar: structure must be singular with exactly rank K-1");

    // Generalized inverse under the sum-to-zero constraint: null vector removed.
    Eigen::MatrixXd basis = es.eigenvectors().rightCols(n - 1);
    Eigen::VectorXd evals = vals.tail(n - 1);
    Eigen::VectorXd marg(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < n - 1; ++k) s += basis(i, k) * basis(i, k) / evals(k);
        marg(i) = s;
    }
    double log_gm = 0.0;
    for (int i = 0; i < n; ++i) log_gm += std::log(marg(i));
    const double kappa = std::exp(log_gm / n);  // geometric mean of marginal variances

    ScaledIcar out;
    out.scale = kappa;
    out.structure = structure * kappa;
    out.marginal_var = marg / kappa;
    out.basis = std::move(basis);
    out.evals = evals * kappa;
    return out;
}

double icar_quadform(const ScaledIcar& icar, const Eigen::VectorXd& u) {
    // edge form of u'Qu; the scaled structure keeps the Laplacian pattern
    double s = 0.0;
    const auto& q = icar.structure;
    const int n = icar.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (q(i, j) != 0.0) s += -q(i, j) * (u(i) - u(j)) * (u(i) - u(j));
    return s;
}

Eigen::VectorXd sample_icar(const ScaledIcar& icar, Rng& rng) {
    const int n = icar.size();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n - 1; ++k)
        u += icar.basis.col(k) * (rng.normal() / std::sqrt(icar.evals(k)));
    return u;
}

Eigen::VectorXd bym2_combine(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                             double tau, double phi) {
    if (tau <= 0.0) throw std::invalid_argument("bym2_combine: tau <= 0");
    if (phi < 0.0 || phi > 1.0) throw std::invalid_argument("bym2_combine: phi outside [0,1]");
    return (std::sqrt(1.0 - phi) * v + std::sqrt(phi) * u) / std::sqrt(tau);
}

double bym2_logdensity(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                       double tau, double phi, const ScaledIcar& icar) {
    if (tau <= 0.0) throw std::invalid_argument("bym2_logdensity: tau <= 0");
    if (phi < 0.0 || phi > 1.0) throw std::invalid_argument("bym2_logdensity: phi outside [0,1]");
    const int n = icar.size();
    double lp = 0.0;
    if (phi > 0.0) {
        const Eigen::VectorXd uc = u.array() - u.mean();
        lp += -0.5 * icar_quadform(icar, uc);
        const double sd = 1e-3 / std::sqrt(static_cast<double>(n));
        lp += -0.5 * (u.mean() / sd) * (u.mean() / sd);
    }
    if (phi < 1.0) {
        lp += -0.5 * v.squaredNorm() - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }
    return lp;
}

Eigen::VectorXd sample_bym2(const ScaledIcar& icar, double tau, double phi, Rng& rng) {
    const int n = icar.size();
    Eigen::VectorXd u = sample_icar(icar, rng);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    return bym2_combine(u, v, tau, phi);
}

double pc_prec_logdensity(double tau, double u, double alpha) {
    if (tau <= 0.0 || u <= 0.0 || alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("pc_prec_logdensity: invalid argument");
    const double lambda = -std::log(alpha) / u;
    return std::log(lambda / 2.0) - 1.5 * std::log(tau) - lambda / std::sqrt(tau);
}

double beta_logdensity(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
           std::lgamma(a) - std::lgamma(b);
}

}  // namespace fhvs::spatial
