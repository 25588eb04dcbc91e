#include "fhvs/superpop.hpp"

#include "fhvs/rng.hpp"
#include "fhvs/spatial.hpp"

namespace fhvs::frame {

Setting parse_setting(const std::string& tag) {
    if (tag == "1") return Setting::s1;
    if (tag == "1a") return Setting::s1a;
    if (tag == "2") return Setting::s2;
    if (tag == "3") return Setting::s3;
    if (tag == "4") return Setting::s4;
    if (tag == "reenum") return Setting::reenum;
    throw std::invalid_argument("unknown setting tag: " + tag);
}

std::string setting_tag(Setting s) {
    switch (s) {
        case Setting::s1: return "1";
        case Setting::s1a: return "1a";
        case Setting::s2: return "2";
        case Setting::s3: return "3";
        case Setting::s4: return "4";
        case Setting::reenum: return "reenum";
    }
    return "?";
}

SuperpopParams gen_superpopulation(const Geography& geog, Setting setting, std::uint64_t seed) {
    const int k = geog.n_areas;
    SuperpopParams p;
    p.beta = Eigen::Vector4d(-1.0, -0.15, -0.1, 0.25);
    p.eta = Eigen::Vector4d(0.5, -0.15, -0.1, 0.25);

    Rng rng(derive_seed(seed, {0x5350u}));
    p.X = Eigen::MatrixXd::Ones(k, 4);
    p.Z = Eigen::MatrixXd::Ones(k, 4);
    for (int i = 0; i < k; ++i)
        for (int j = 1; j < 4; ++j) p.X(i, j) = rng.normal();
    for (int i = 0; i < k; ++i)
        for (int j = 1; j < 4; ++j) p.Z(i, j) = rng.normal();

    p.gamma_area = Eigen::VectorXd::Ones(k);
    p.kappa_area = Eigen::VectorXd::Zero(k);
    if (setting == Setting::s2) {
        for (int i = 0; i < k; ++i) p.gamma_area(i) = rng.normal(1.0, 1.0);
        for (int i = 0; i < k; ++i) p.kappa_area(i) = rng.normal(std::log(1.5), 0.25);
    }

    const auto icar = spatial::scale_icar(spatial::icar_structure(geog.adjacency));
    const double tau_b = 1.0 / (0.32 * 0.32);
    const double tau_e = 1.0 / (0.22 * 0.22);
    const double phi = 0.75;

    p.b_structured = spatial::sample_icar(icar, rng);
    Eigen::VectorXd vb(k);
    for (int i = 0; i < k; ++i) vb(i) = rng.normal();
    p.b = spatial::bym2_combine(p.b_structured, vb, tau_b, phi);

    p.e_structured = spatial::sample_icar(icar, rng);
    Eigen::VectorXd ve(k);
    for (int i = 0; i < k; ++i) ve(i) = rng.normal();
    p.e = spatial::bym2_combine(p.e_structured, ve, tau_e, phi);

    return p;
}

}  // namespace fhvs::frame
