#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fhvs/csv.hpp"
#include "fhvs/distributions.hpp"
#include "fhvs/posterior.hpp"
#include "fhvs/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fhvs;

namespace {

int cmd_simulate(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
                 int threads_override, const std::string& out_override) {
    auto cfg = runner::RunConfig::from_json_file(config_path);
    if (has_seed) cfg.seed = seed_override;
    if (threads_override > 0) cfg.threads = threads_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto summary = runner::run_setting(cfg);
    std::cout << "setting " << cfg.setting << ": " << cfg.replicates - summary.failures << "/"
              << cfg.replicates << " replicates succeeded\n";
    for (const auto& m : summary.models)
        std::cout << "  " << m.model << ": coverage " << m.avg_coverage << ", interval score "
                  << m.avg_interval_score << ", rmse " << m.avg_rmse << "\n";
    std::cout << "  theory-to-truth: simple " << summary.avg_theory_simple << ", sasw "
              << summary.avg_theory_sasw << "\n";
    return summary.failures == 0 ? 0 : 1;
}

int cmd_estimate(const std::string& in, const std::string& out) {
    runner::estimate_from_csv(in, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_diagnose(const std::string& clusters, double gamma, double sigma2,
                 const std::string& out) {
    const auto sample = runner::read_cluster_csv(clusters);
    int n_areas = 0;
    for (const auto& s : sample) n_areas = std::max(n_areas, s.area + 1);
    const auto areas = design::summarize_sample(sample, n_areas);
    csv::Table t;
    t.header = {"area", "r", "d", "bias_factor", "R"};
    for (const auto& a : areas) {
        if (!a.estimable) continue;
        const auto eig = dist::sasw_eigensystem(a);
        const auto p = dist::sasw_params(eig, gamma, sigma2);
        const auto b = dist::bias_factor(eig, gamma, sigma2);
        t.rows.push_back({std::to_string(a.area), std::to_string(eig.rank()), csv::format(p.df_d),
                          csv::format(b.factor), csv::format(b.r_term)});
    }
    csv::write_file(out, t);
    std::cout << "wrote " << out << "\n";
    return 0;
}

struct FitOptions {
    std::string estimates, clusters, covariates, adjacency, config, out;
    std::string model = "simple-unstruct";
    bool save_draws = false;
    std::vector<double> rank_p;
    std::uint64_t seed = 1;
};

int cmd_fit(const FitOptions& opt) {
    const auto ests = runner::read_estimates_csv(opt.estimates);
    const int k = static_cast<int>(ests.size());
    const auto variant = inference::ModelVariant::parse(opt.model);
    if (variant.kind == inference::ModelKind::oracle)
        throw std::runtime_error("fit: the oracle model needs simulation replicates");

    inference::ModelData d;
    d.variant = variant;
    d.n_areas = k;
    d.theta_hat.resize(k);
    d.v_hat.resize(k);
    d.estimable.assign(k, 0);
    d.total_n = Eigen::VectorXd::Zero(k);
    d.simple_c.resize(k);
    d.simple_d.resize(k);
    for (const auto& e : ests) {
        d.theta_hat(e.area) = e.theta_hat;
        d.v_hat(e.area) = e.v_hat;
        d.estimable[e.area] = e.estimable ? 1 : 0;
        const int df = e.m_dot - e.strata_count;
        d.simple_c(e.area) = df > 0 ? 1.0 / df : std::numeric_limits<double>::quiet_NaN();
        d.simple_d(e.area) = df > 0 ? df : std::numeric_limits<double>::quiet_NaN();
    }

    std::vector<design::AreaSample> areas;
    if (!opt.clusters.empty()) {
        const auto sample = runner::read_cluster_csv(opt.clusters);
        areas = design::summarize_sample(sample, k);
        for (const auto& a : areas) d.total_n(a.area) = static_cast<double>(a.total_n());
    } else if (variant.smooth()) {
        throw std::runtime_error("fit: smoothing models need --clusters for the design quantities");
    }
    if (variant.smooth() && variant.dist == inference::SamplingDist::sasw) {
        d.eig.resize(k);
        for (int i = 0; i < k; ++i) {
            if (d.estimable[i])
                d.eig[i] = dist::sasw_eigensystem(areas[i]);
            else
                d.eig[i].area = i;
        }
    }

    // covariates: area, p_urban, then any mx* (mean) and vz* (variance) columns
    const auto cov = csv::read_file(opt.covariates);
    const int ca = cov.require("area");
    const int cp = cov.require("p_urban");
    std::vector<int> mx, vz;
    for (std::size_t j = 0; j < cov.header.size(); ++j) {
        if (cov.header[j].rfind("mx", 0) == 0) mx.push_back(static_cast<int>(j));
        if (cov.header[j].rfind("vz", 0) == 0) vz.push_back(static_cast<int>(j));
    }
    d.X = Eigen::MatrixXd::Ones(k, 1 + mx.size());
    d.p_urban = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd zfull = Eigen::MatrixXd::Ones(k, 1 + vz.size());
    for (std::size_t r = 0; r < cov.rows.size(); ++r) {
        const int i = static_cast<int>(csv::parse_long(cov.rows[r][ca], r + 2, "area"));
        d.p_urban(i) = csv::parse_double(cov.rows[r][cp], r + 2, "p_urban");
        for (std::size_t j = 0; j < mx.size(); ++j)
            d.X(i, 1 + j) = csv::parse_double(cov.rows[r][mx[j]], r + 2, cov.header[mx[j]]);
        for (std::size_t j = 0; j < vz.size(); ++j)
            zfull(i, 1 + j) = csv::parse_double(cov.rows[r][vz[j]], r + 2, cov.header[vz[j]]);
    }
    if (variant.smooth())
        d.Z = variant.structured_variance ? zfull : Eigen::MatrixXd::Ones(k, 1);

    d.icar = spatial::scale_icar(spatial::icar_structure(runner::read_adjacency_csv(opt.adjacency, k)));

    inference::McmcConfig mcfg;
    if (!opt.config.empty()) {
        const auto rc = runner::RunConfig::from_json_file(opt.config);
        mcfg = rc.mcmc;
        d.priors = rc.priors;
    }

    const auto draws = inference::fit(d, mcfg, opt.seed);
    fs::create_directories(opt.out);
    const auto summary = inference::summarize_posterior(draws, 0.90);

    csv::Table t;
    t.header = {"area", "theta_mean", "theta_lo", "theta_hi", "sigma2_mean", "sigma2_lo", "sigma2_hi"};
    for (const auto& s : summary)
        t.rows.push_back({std::to_string(s.area), csv::format(s.theta_mean),
                          csv::format(s.theta_lo), csv::format(s.theta_hi),
                          csv::format(s.sigma2_mean), csv::format(s.sigma2_lo),
                          csv::format(s.sigma2_hi)});
    csv::write_file(opt.out + "/summary.csv", t);

    json diag;
    diag["converged"] = draws.converged;
    diag["warnings"] = draws.warnings;
    diag["max_rhat"] = draws.rhat.maxCoeff();
    diag["min_ess"] = draws.ess.minCoeff();
    diag["model"] = variant.name();
    {
        std::ofstream out(opt.out + "/diagnostics.json");
        out << diag.dump(2) << '\n';
    }

    for (double p : opt.rank_p) {
        const auto probs = inference::rank_probabilities(draws, p);
        csv::Table rt;
        rt.header = {"area", "prob_lowest"};
        for (int i = 0; i < k; ++i)
            rt.rows.push_back({std::to_string(i), csv::format(probs(i))});
        char buf[64];
        std::snprintf(buf, sizeof(buf), "rank_probs_p%02d.csv",
                      static_cast<int>(std::lround(p * 100)));
        csv::write_file(opt.out + "/" + buf, rt);
    }

    if (opt.save_draws) {
        csv::Table dt;
        dt.header = {"chain", "iter"};
        for (const auto& n : draws.names) dt.header.push_back(n);
        for (int c = 0; c < draws.n_chains; ++c)
            for (int it = 0; it < draws.n_iter; ++it) {
                std::vector<std::string> row = {std::to_string(c), std::to_string(it)};
                for (int j = 0; j < static_cast<int>(draws.names.size()); ++j)
                    row.push_back(csv::format(draws.chains[c](it, j)));
                dt.rows.push_back(std::move(row));
            }
        csv::write_file(opt.out + "/draws.csv", dt);
    }

    std::cout << "wrote " << opt.out << " (converged=" << (draws.converged ? "yes" : "no") << ")\n";
    return draws.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"variance-smoothing Fay-Herriot small area estimation"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run a simulation setting end to end");
    std::string sim_config;
    std::uint64_t sim_seed = 0;
    int sim_threads = 0;
    std::string sim_out;
    sim->add_option("--config", sim_config, "run configuration JSON")->required();
    auto* seed_opt = sim->add_option("--seed", sim_seed, "override root seed");
    sim->add_option("--threads", sim_threads, "worker threads for replicates");
    sim->add_option("--out", sim_out, "override output directory");

    auto* est_cmd = app.add_subcommand("estimate", "design-based estimates from a cluster CSV");
    std::string est_in, est_out = "estimates.csv";
    est_cmd->add_option("--in", est_in, "cluster summary CSV")->required();
    est_cmd->add_option("--out", est_out, "output per-area CSV");

    auto* fit_cmd = app.add_subcommand("fit", "fit one model to design estimates");
    FitOptions fopt;
    fit_cmd->add_option("--estimates", fopt.estimates, "per-area estimates CSV")->required();
    fit_cmd->add_option("--clusters", fopt.clusters,
                        "cluster summary CSV (needed for smoothing models)");
    fit_cmd->add_option("--covariates", fopt.covariates, "covariates CSV")->required();
    fit_cmd->add_option("--adjacency", fopt.adjacency, "edge list CSV")->required();
    fit_cmd->add_option("--config", fopt.config, "run configuration JSON (mcmc + priors)");
    fit_cmd->add_option("--model", fopt.model, "model variant");
    fit_cmd->add_option("--out", fopt.out, "output directory")->required();
    fit_cmd->add_option("--seed", fopt.seed, "mcmc seed");
    fit_cmd->add_flag("--save-draws", fopt.save_draws, "write full draws CSV");
    fit_cmd->add_option("--rank-p", fopt.rank_p, "rank probability thresholds, e.g. 0.1 0.25");

    auto* diag_cmd = app.add_subcommand("diagnose", "survey-weighted distribution diagnostics");
    std::string dg_clusters, dg_out = "diagnostics.csv";
    double dg_gamma = 0.0, dg_sigma2 = 1.0;
    diag_cmd->add_option("--clusters", dg_clusters, "cluster summary CSV")->required();
    diag_cmd->add_option("--gamma", dg_gamma, "urban effect plug-in");
    diag_cmd->add_option("--sigma2", dg_sigma2, "superpopulation variance plug-in");
    diag_cmd->add_option("--out", dg_out, "output CSV");

    auto* eval_cmd = app.add_subcommand("evaluate", "recompute metric tables for a run directory");
    std::string ev_dir;
    eval_cmd->add_option("--run", ev_dir, "run directory written by simulate")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(sim_config, sim_seed, seed_opt->count() > 0, sim_threads, sim_out);
        if (est_cmd->parsed()) return cmd_estimate(est_in, est_out);
        if (fit_cmd->parsed()) return cmd_fit(fopt);
        if (diag_cmd->parsed()) return cmd_diagnose(dg_clusters, dg_gamma, dg_sigma2, dg_out);
        if (eval_cmd->parsed()) {
            const auto summary = runner::evaluate_run(ev_dir);
            std::cout << "evaluated " << ev_dir << " (" << summary.models.size() << " models, "
                      << summary.failures << " failed replicates)\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
