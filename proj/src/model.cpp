#include "fhvs/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fhvs::inference {

ModelVariant ModelVariant::parse(const std::string& name) {
    if (name == "standard") return {ModelKind::standard, SamplingDist::simple, false};
    if (name == "oracle") return {ModelKind::oracle, SamplingDist::simple, false};
    if (name == "simple-struct") return {ModelKind::smooth, SamplingDist::simple, true};
    if (name == "simple-unstruct") return {ModelKind::smooth, SamplingDist::simple, false};
    if (name == "sasw-struct") return {ModelKind::smooth, SamplingDist::sasw, true};
    if (name == "sasw-unstruct") return {ModelKind::smooth, SamplingDist::sasw, false};
    throw std::invalid_argument("unknown model variant: " + name);
}

std::string ModelVariant::name() const {
    switch (kind) {
        case ModelKind::standard: return "standard";
        case ModelKind::oracle: return "oracle";
        case ModelKind::smooth:
            return std::string(dist == SamplingDist::simple ? "simple" : "sasw") +
                   (structured_variance ? "-struct" : "-unstruct");
    }
    return "?";
}

bool ModelData::mean_term(int i) const {
    if (!estimable[i]) return false;
    switch (variant.kind) {
        case ModelKind::standard: return v_hat(i) > 0.0 && std::isfinite(v_hat(i));
        case ModelKind::oracle: return std::isfinite(oracle_v(i)) && oracle_v(i) > 0.0;
        case ModelKind::smooth: return true;
    }
    return false;
}

bool ModelData::variance_term(int i) const {
    if (!variant.smooth() || !estimable[i]) return false;
    if (!(v_hat(i) > 0.0) || !std::isfinite(v_hat(i))) return false;
    if (variant.dist == SamplingDist::simple) return std::isfinite(simple_d(i)) && simple_d(i) > 0.0;
    return eig[i].rank() >= 1;
}

void ModelData::validate() const {
    const int k = n_areas;
    if (theta_hat.size() != k || v_hat.size() != k || static_cast<int>(estimable.size()) != k ||
        total_n.size() != k || X.rows() != k || p_urban.size() != k)
        throw std::invalid_argument("ModelData: area dimension mismatch");
    if (variant.smooth() && Z.rows() != k)
        throw std::invalid_argument("ModelData: variance covariate dimension mismatch");
    if (variant.smooth() && variant.dist == SamplingDist::sasw) {
        if (static_cast<int>(eig.size()) != k)
            throw std::invalid_argument("ModelData: eigensystem areas do not match data areas");
        for (int i = 0; i < k; ++i)
            if (eig[i].area != i) throw std::invalid_argument("ModelData: eigensystem area order mismatch");
    }
    if (variant.kind == ModelKind::oracle && oracle_v.size() != k)
        throw std::invalid_argument("ModelData: oracle variances missing");
    if (icar.size() != k) throw std::invalid_argument("ModelData: ICAR structure dimension mismatch");
}

ParamLayout ParamLayout::make(const ModelData& d) {
    ParamLayout l;
    l.n_areas = d.n_areas;
    l.p_mean = static_cast<int>(d.X.cols());
    l.smooth = d.variant.smooth();
    l.structured_variance = l.smooth && d.variant.structured_variance;
    l.p_var = l.smooth ? static_cast<int>(d.Z.cols()) : 0;

    int pos = 0;
    l.beta = pos; pos += l.p_mean;
    l.gamma = pos; pos += 1;
    l.u_b = pos; pos += l.n_areas;
    l.v_b = pos; pos += l.n_areas;
    l.log_tau_b = pos; pos += 1;
    l.logit_phi_b = pos; pos += 1;
    if (l.smooth) {
        l.eta = pos; pos += l.p_var;
        if (l.structured_variance) {
            l.u_e = pos; pos += l.n_areas;
            l.v_e = pos; pos += l.n_areas;
            l.log_tau_e = pos; pos += 1;
            l.logit_phi_e = pos; pos += 1;
        } else {
            l.v_e = pos; pos += l.n_areas;
            l.log_tau_e = pos; pos += 1;
        }
    }
    l.size = pos;
    return l;
}

std::vector<std::string> ParamLayout::names() const {
    std::vector<std::string> n(size);
    for (int j = 0; j < p_mean; ++j) n[beta + j] = "beta[" + std::to_string(j) + "]";
    n[gamma] = "gamma";
    for (int i = 0; i < n_areas; ++i) n[u_b + i] = "u_b[" + std::to_string(i) + "]";
    for (int i = 0; i < n_areas; ++i) n[v_b + i] = "v_b[" + std::to_string(i) + "]";
    n[log_tau_b] = "log_tau_b";
    n[logit_phi_b] = "logit_phi_b";
    if (smooth) {
        for (int j = 0; j < p_var; ++j) n[eta + j] = "eta[" + std::to_string(j) + "]";
        if (structured_variance) {
            for (int i = 0; i < n_areas; ++i) n[u_e + i] = "u_e[" + std::to_string(i) + "]";
            for (int i = 0; i < n_areas; ++i) n[v_e + i] = "v_e[" + std::to_string(i) + "]";
            n[log_tau_e] = "log_tau_e";
            n[logit_phi_e] = "logit_phi_e";
        } else {
            for (int i = 0; i < n_areas; ++i) n[v_e + i] = "v_e[" + std::to_string(i) + "]";
            n[log_tau_e] = "log_tau_e";
        }
    }
    return n;
}

namespace {
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

LatentState derive_state(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x) {
    LatentState s;
    const int k = lay.n_areas;
    s.tau_b = std::exp(x(lay.log_tau_b));
    s.phi_b = inv_logit(x(lay.logit_phi_b));
    const Eigen::VectorXd u_b = x.segment(lay.u_b, k);
    const Eigen::VectorXd v_b = x.segment(lay.v_b, k);
    s.b = spatial::bym2_combine(u_b, v_b, s.tau_b, s.phi_b);

    const Eigen::VectorXd beta = x.segment(lay.beta, lay.p_mean);
    s.theta = d.X * beta + x(lay.gamma) * d.p_urban + s.b;

    if (lay.smooth) {
        s.tau_e = std::exp(x(lay.log_tau_e));
        const Eigen::VectorXd eta = x.segment(lay.eta, lay.p_var);
        if (lay.structured_variance) {
            s.phi_e = inv_logit(x(lay.logit_phi_e));
            s.e = spatial::bym2_combine(x.segment(lay.u_e, k), x.segment(lay.v_e, k), s.tau_e, s.phi_e);
        } else {
            s.e = x.segment(lay.v_e, k) / std::sqrt(s.tau_e);
        }
        s.sigma2 = (d.Z * eta + s.e).array().exp();
    }
    return s;
}

double scaled_chisq_logpdf(double v, double scale, double df) {
    if (v <= 0.0 || scale <= 0.0 || df <= 0.0) return -std::numeric_limits<double>::infinity();
    const double x = v / scale;
    return (0.5 * df - 1.0) * std::log(x) - 0.5 * x - 0.5 * df * std::numbers::ln2 -
           std::lgamma(0.5 * df) - std::log(scale);
}

double mean_loglik(const ModelData& d, int i, double theta_i, double sigma2_i) {
    if (!d.mean_term(i)) return 0.0;
    double v = 0.0;
    switch (d.variant.kind) {
        case ModelKind::standard: v = d.v_hat(i); break;
        case ModelKind::oracle: v = d.oracle_v(i); break;
        case ModelKind::smooth:
            v = d.variant.dist == SamplingDist::simple
                    ? sigma2_i / d.total_n(i)
                    : sigma2_i * d.eig[i].wdw / (d.eig[i].sum_wstar * d.eig[i].sum_wstar);
            break;
    }
    if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
    const double r = d.theta_hat(i) - theta_i;
    return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * r * r / v;
}

double variance_loglik(const ModelData& d, int i, double sigma2_i, double gamma) {
    if (!d.variance_term(i)) return 0.0;
    if (!(sigma2_i > 0.0)) return -std::numeric_limits<double>::infinity();
    dist::ChiSquareParams p;
    if (d.variant.dist == SamplingDist::simple) {
        p.scale_c = d.simple_c(i);
        p.df_d = d.simple_d(i);
        p.theoretical_v = sigma2_i / d.total_n(i);
    } else {
        p = dist::sasw_params(d.eig[i], gamma, sigma2_i);
    }
    return scaled_chisq_logpdf(d.v_hat(i), p.theoretical_v * p.scale_c, p.df_d);
}

double log_prior(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x) {
    const auto& pr = d.priors;
    const int k = lay.n_areas;
    double lp = 0.0;

    auto normal_lp = [](double v, double mean, double sd) {
        const double z = (v - mean) / sd;
        return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    };

    for (int j = 0; j < lay.p_mean; ++j) lp += normal_lp(x(lay.beta + j), 0.0, pr.regression_sd);
    lp += normal_lp(x(lay.gamma), 0.0, pr.regression_sd);

    const double tau_b = std::exp(x(lay.log_tau_b));
    const double phi_b = inv_logit(x(lay.logit_phi_b));
    lp += spatial::pc_prec_logdensity(tau_b, pr.pc_u, pr.pc_alpha) + x(lay.log_tau_b);
    lp += spatial::beta_logdensity(phi_b, pr.phi_a, pr.phi_b) + std::log(phi_b) + std::log1p(-phi_b);
    lp += spatial::bym2_logdensity(x.segment(lay.u_b, k), x.segment(lay.v_b, k), tau_b, phi_b, d.icar);

    if (lay.smooth) {
        lp += normal_lp(x(lay.eta), pr.eta_intercept_mean, pr.eta_intercept_sd);
        for (int j = 1; j < lay.p_var; ++j) lp += normal_lp(x(lay.eta + j), 0.0, pr.regression_sd);
        const double tau_e = std::exp(x(lay.log_tau_e));
        lp += spatial::pc_prec_logdensity(tau_e, pr.pc_u, pr.pc_alpha) + x(lay.log_tau_e);
        if (lay.structured_variance) {
            const double phi_e = inv_logit(x(lay.logit_phi_e));
            lp += spatial::beta_logdensity(phi_e, pr.phi_a, pr.phi_b) + std::log(phi_e) +
                  std::log1p(-phi_e);
            lp += spatial::bym2_logdensity(x.segment(lay.u_e, k), x.segment(lay.v_e, k), tau_e,
                                           phi_e, d.icar);
        } else {
            lp += -0.5 * x.segment(lay.v_e, k).squaredNorm() -
                  0.5 * k * std::log(2.0 * std::numbers::pi);
        }
    }
    return lp;
}

double log_posterior(const ModelData& d, const ParamLayout& lay, const Eigen::VectorXd& x) {
    const LatentState s = derive_state(d, lay, x);
    double lp = log_prior(d, lay, x);
    for (int i = 0; i < d.n_areas; ++i) {
        const double s2 = lay.smooth ? s.sigma2(i) : 0.0;
        lp += mean_loglik(d, i, s.theta(i), s2);
        if (lay.smooth) lp += variance_loglik(d, i, s2, x(lay.gamma));
    }
    return lp;
}

}  // namespace fhvs::inference
