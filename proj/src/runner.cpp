#include "fhvs/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fhvs/csv.hpp"
#include "fhvs/distributions.hpp"
#include "fhvs/evaluation.hpp"
#include "fhvs/rng.hpp"
#include "fhvs/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fhvs::runner {

namespace {

constexpr std::uint64_t kStageGeo = 1, kStagePop = 2, kStageFrame = 3, kStageSuperpop = 4;
constexpr std::uint64_t kStageSample = 10, kStageDraw = 11, kStageFit = 12;

std::uint64_t setting_tag_u64(frame::Setting s) { return static_cast<std::uint64_t>(s) + 100; }

std::string rep_dir(const std::string& root, int g) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "rep_%04d", g);
    return root + "/" + buf;
}

double nan_d() { return std::numeric_limits<double>::quiet_NaN(); }

// estimates files carry NaN for areas without any sampled cluster
double parse_double_allow_nan(const std::string& s, std::size_t row, const std::string& col) {
    if (s == "nan" || s == "-nan" || s == "NaN") return nan_d();
    return csv::parse_double(s, row, col);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    c.setting = j.value("setting", c.setting);
    c.seed = j.value("seed", c.seed);
    c.replicates = j.value("replicates", c.replicates);
    c.threads = j.value("threads", c.threads);
    if (j.contains("geography")) {
        const auto& g = j["geography"];
        c.areas = g.value("areas", c.areas);
        c.admin1 = g.value("admin1", c.admin1);
        c.urban_only_admin1 = g.value("urban_only_admin1", c.urban_only_admin1);
    }
    if (j.contains("population")) {
        const auto& p = j["population"];
        c.area_pop_mean = p.value("area_pop_mean", c.area_pop_mean);
        c.area_pop_log_sd = p.value("area_pop_log_sd", c.area_pop_log_sd);
        c.urban_frac_alpha = p.value("urban_frac_alpha", c.urban_frac_alpha);
        c.urban_frac_beta = p.value("urban_frac_beta", c.urban_frac_beta);
    }
    if (j.contains("frame")) {
        const auto& f = j["frame"];
        c.clusters_per_stratum = f.value("clusters_per_stratum", c.clusters_per_stratum);
        c.sample_clusters_per_stratum =
            f.value("sample_clusters_per_stratum", c.sample_clusters_per_stratum);
    }
    if (j.contains("design")) {
        const auto& d = j["design"];
        if (d.contains("urban_negbin")) {
            c.urban_nb.size = d["urban_negbin"].value("size", c.urban_nb.size);
            c.urban_nb.mean = d["urban_negbin"].value("mean", c.urban_nb.mean);
        }
        if (d.contains("rural_negbin")) {
            c.rural_nb.size = d["rural_negbin"].value("size", c.rural_nb.size);
            c.rural_nb.mean = d["rural_negbin"].value("mean", c.rural_nb.mean);
        }
    }
    if (j.contains("mcmc")) {
        const auto& m = j["mcmc"];
        c.mcmc.chains = m.value("chains", c.mcmc.chains);
        c.mcmc.warmup = m.value("warmup", c.mcmc.warmup);
        c.mcmc.iters = m.value("iters", c.mcmc.iters);
        c.mcmc.thin = m.value("thin", c.mcmc.thin);
        c.mcmc.rhat_max = m.value("rhat_max", c.mcmc.rhat_max);
        c.mcmc.ess_min = m.value("ess_min", c.mcmc.ess_min);
    }
    if (j.contains("priors")) {
        const auto& p = j["priors"];
        c.priors.eta_intercept_mean = p.value("eta_intercept_mean", c.priors.eta_intercept_mean);
        c.priors.eta_intercept_sd = p.value("eta_intercept_sd", c.priors.eta_intercept_sd);
        c.priors.regression_sd = p.value("regression_sd", c.priors.regression_sd);
        c.priors.pc_u = p.value("pc_u", c.priors.pc_u);
        c.priors.pc_alpha = p.value("pc_alpha", c.priors.pc_alpha);
        c.priors.phi_a = p.value("phi_a", c.priors.phi_a);
        c.priors.phi_b = p.value("phi_b", c.priors.phi_b);
    }
    if (j.contains("models")) c.models = j["models"].get<std::vector<std::string>>();
    c.out_dir = j.value("out", c.out_dir);
    if (c.replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (c.models.empty()) throw std::invalid_argument("config: model list is empty");
    for (const auto& m : c.models) inference::ModelVariant::parse(m);  // validate names
    return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["setting"] = setting;
    j["seed"] = seed;
    j["replicates"] = replicates;
    j["threads"] = threads;
    j["geography"] = {{"areas", areas}, {"admin1", admin1}, {"urban_only_admin1", urban_only_admin1}};
    j["population"] = {{"area_pop_mean", area_pop_mean},
                       {"area_pop_log_sd", area_pop_log_sd},
                       {"urban_frac_alpha", urban_frac_alpha},
                       {"urban_frac_beta", urban_frac_beta}};
    j["frame"] = {{"clusters_per_stratum", clusters_per_stratum},
                  {"sample_clusters_per_stratum", sample_clusters_per_stratum}};
    j["design"] = {{"urban_negbin", {{"size", urban_nb.size}, {"mean", urban_nb.mean}}},
                   {"rural_negbin", {{"size", rural_nb.size}, {"mean", rural_nb.mean}}}};
    j["mcmc"] = {{"chains", mcmc.chains}, {"warmup", mcmc.warmup},   {"iters", mcmc.iters},
                 {"thin", mcmc.thin},     {"rhat_max", mcmc.rhat_max}, {"ess_min", mcmc.ess_min}};
    j["priors"] = {{"eta_intercept_mean", priors.eta_intercept_mean},
                   {"eta_intercept_sd", priors.eta_intercept_sd},
                   {"regression_sd", priors.regression_sd},
                   {"pc_u", priors.pc_u},
                   {"pc_alpha", priors.pc_alpha},
                   {"phi_a", priors.phi_a},
                   {"phi_b", priors.phi_b}};
    j["models"] = models;
    j["out"] = out_dir;
    return j.dump(2);
}

Prepared prepare(const RunConfig& cfg) {
    Prepared p;
    p.setting = frame::parse_setting(cfg.setting);
    p.geog = frame::build_geography(cfg.areas, cfg.admin1, cfg.urban_only_admin1,
                                    derive_seed(cfg.seed, {kStageGeo}));

    frame::FrameConfig fc;
    fc.reenumerate = p.setting == frame::Setting::reenum;
    fc.clusters_per_stratum.assign(p.geog.n_strata(), cfg.clusters_per_stratum);
    fc.area_pop.resize(cfg.areas);
    fc.urban_frac.resize(cfg.areas);
    {
        Rng rng(derive_seed(cfg.seed, {kStagePop}));
        for (int i = 0; i < cfg.areas; ++i) {
            const double lp = std::log(cfg.area_pop_mean) + cfg.area_pop_log_sd * rng.normal();
            fc.area_pop[i] = std::max<long>(50, std::llround(std::exp(lp)));
            const double ga = rng.gamma(cfg.urban_frac_alpha, 1.0);
            const double gb = rng.gamma(cfg.urban_frac_beta, 1.0);
            fc.urban_frac[i] = ga / (ga + gb);
            const int a = p.geog.admin1_of_area[i];
            if (p.geog.rural_stratum_of_admin1[a] < 0) fc.urban_frac[i] = 1.0;
        }
    }
    p.survey_frame = frame::build_frame(p.geog, fc, derive_seed(cfg.seed, {kStageFrame}));
    p.params = frame::gen_superpopulation(p.geog, p.setting, derive_seed(cfg.seed, {kStageSuperpop}));
    p.kind = frame::OutcomeKind::for_setting(p.setting);

    p.sample_cfg.clusters_to_sample.assign(p.geog.n_strata(), cfg.sample_clusters_per_stratum);
    p.sample_cfg.urban_size = cfg.urban_nb;
    p.sample_cfg.rural_size = cfg.rural_nb;
    p.sample_cfg.multiplier = p.setting == frame::Setting::s1a ? 5 : 1;

    p.icar = spatial::scale_icar(spatial::icar_structure(p.geog.adjacency));

    p.p_urban.resize(cfg.areas);
    p.truth_theta.resize(cfg.areas);
    p.truth_sigma2.resize(cfg.areas);
    for (int i = 0; i < cfg.areas; ++i) {
        p.p_urban(i) = p.survey_frame.urban_fraction(i);
        // superpopulation area mean: population-weighted across strata
        p.truth_theta(i) = p.params.X.row(i).dot(p.params.beta) +
                           p.params.gamma_area(i) * p.p_urban(i) + p.params.b(i);
        p.truth_sigma2(i) = std::exp(p.params.Z.row(i).dot(p.params.eta) + p.params.e(i));
    }
    return p;
}

inference::ModelData make_model_data(const Prepared& prep, const RunConfig& cfg,
                                     const std::vector<est::DesignEstimate>& ests,
                                     const std::vector<design::AreaSample>& areas,
                                     inference::ModelVariant variant,
                                     const Eigen::VectorXd* oracle_v) {
    const int k = prep.geog.n_areas;
    inference::ModelData d;
    d.variant = variant;
    d.n_areas = k;
    d.theta_hat.resize(k);
    d.v_hat.resize(k);
    d.estimable.assign(k, 0);
    d.total_n.resize(k);
    d.simple_c.resize(k);
    d.simple_d.resize(k);
    for (int i = 0; i < k; ++i) {
        d.theta_hat(i) = ests[i].theta_hat;
        d.v_hat(i) = ests[i].v_hat;
        d.estimable[i] = ests[i].estimable ? 1 : 0;
        d.total_n(i) = static_cast<double>(areas[i].total_n());
        const int df = ests[i].m_dot - ests[i].strata_count;
        d.simple_c(i) = df > 0 ? 1.0 / df : nan_d();
        d.simple_d(i) = df > 0 ? static_cast<double>(df) : nan_d();
    }
    if (variant.smooth() && variant.dist == inference::SamplingDist::sasw) {
        d.eig.resize(k);
        for (int i = 0; i < k; ++i) {
            if (ests[i].estimable) {
                d.eig[i] = dist::sasw_eigensystem(areas[i]);
            } else {
                d.eig[i].area = i;
            }
        }
    }
    d.X = prep.params.X;
    d.p_urban = prep.p_urban;
    if (variant.smooth())
        d.Z = variant.structured_variance ? prep.params.Z : Eigen::MatrixXd::Ones(k, 1);
    d.icar = prep.icar;
    if (oracle_v) d.oracle_v = *oracle_v;
    d.priors = cfg.priors;
    d.validate();
    return d;
}

namespace {

void write_frame_csv(const std::string& path, const frame::SurveyFrame& f) {
    csv::Table t;
    t.header = {"id", "stratum", "area", "N", "L"};
    for (const auto& c : f.clusters)
        t.rows.push_back({std::to_string(c.id), std::to_string(c.stratum), std::to_string(c.area),
                          std::to_string(c.true_size), std::to_string(c.listed_size)});
    csv::write_file(path, t);
}

void write_truth_csv(const std::string& path, const Prepared& p) {
    csv::Table t;
    t.header = {"area", "theta", "sigma2", "p_urban"};
    for (int i = 0; i < p.geog.n_areas; ++i)
        t.rows.push_back({std::to_string(i), csv::format(p.truth_theta(i)),
                          csv::format(p.truth_sigma2(i)), csv::format(p.p_urban(i))});
    csv::write_file(path, t);
}

void write_covariates_csv(const std::string& path, const Prepared& p) {
    csv::Table t;
    t.header = {"area", "p_urban", "mx1", "mx2", "mx3", "vz1", "vz2", "vz3"};
    for (int i = 0; i < p.geog.n_areas; ++i)
        t.rows.push_back({std::to_string(i), csv::format(p.p_urban(i)),
                          csv::format(p.params.X(i, 1)), csv::format(p.params.X(i, 2)),
                          csv::format(p.params.X(i, 3)), csv::format(p.params.Z(i, 1)),
                          csv::format(p.params.Z(i, 2)), csv::format(p.params.Z(i, 3))});
    csv::write_file(path, t);
}

void write_design_csv(const std::string& path, const std::vector<design::AreaSample>& areas) {
    csv::Table t;
    t.header = {"area", "total_n", "wdw", "sum_wstar"};
    for (const auto& a : areas) {
        double wdw = 0.0, s = 0.0;
        for (const auto& r : a.rows) {
            if (!r.in_domain) continue;
            wdw += r.wstar * r.wstar / r.n;
            s += r.wstar;
        }
        t.rows.push_back({std::to_string(a.area), std::to_string(a.total_n()), csv::format(wdw),
                          csv::format(s)});
    }
    csv::write_file(path, t);
}

void write_fit_summary_csv(const std::string& path,
                           const std::vector<inference::AreaSummary>& s) {
    csv::Table t;
    t.header = {"area", "theta_mean", "theta_lo", "theta_hi", "sigma2_mean", "sigma2_lo", "sigma2_hi"};
    for (const auto& a : s)
        t.rows.push_back({std::to_string(a.area), csv::format(a.theta_mean), csv::format(a.theta_lo),
                          csv::format(a.theta_hi), csv::format(a.sigma2_mean),
                          csv::format(a.sigma2_lo), csv::format(a.sigma2_hi)});
    csv::write_file(path, t);
}

}  // namespace

void write_sample_csv(const std::string& path, const std::vector<design::ClusterSummary>& sample) {
    csv::Table t;
    t.header = {"cluster_id", "stratum", "area", "ybar", "n", "wstar", "urban"};
    for (const auto& s : sample)
        t.rows.push_back({std::to_string(s.cluster_id), std::to_string(s.stratum),
                          std::to_string(s.area), csv::format(s.ybar), std::to_string(s.n),
                          csv::format(s.wstar), s.urban ? "1" : "0"});
    csv::write_file(path, t);
}

std::vector<design::ClusterSummary> read_cluster_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const int c_id = t.require("cluster_id");
    const int c_st = t.require("stratum");
    const int c_ar = t.require("area");
    const int c_yb = t.require("ybar");
    const int c_n = t.require("n");
    const int c_w = t.require("wstar");
    const int c_ur = t.column("urban");  // optional; absent means unknown
    std::vector<design::ClusterSummary> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        design::ClusterSummary s;
        s.cluster_id = static_cast<int>(csv::parse_long(row[c_id], r + 2, "cluster_id"));
        s.stratum = static_cast<int>(csv::parse_long(row[c_st], r + 2, "stratum"));
        s.area = static_cast<int>(csv::parse_long(row[c_ar], r + 2, "area"));
        s.ybar = csv::parse_double(row[c_yb], r + 2, "ybar");
        s.n = static_cast<int>(csv::parse_long(row[c_n], r + 2, "n"));
        s.wstar = csv::parse_double(row[c_w], r + 2, "wstar");
        s.urban = c_ur >= 0 && csv::parse_long(row[c_ur], r + 2, "urban") != 0;
        if (s.n < 1)
            throw std::runtime_error("cluster csv: row " + std::to_string(r + 2) + ": n < 1");
        if (!(s.wstar > 0.0))
            throw std::runtime_error("cluster csv: row " + std::to_string(r + 2) + ": wstar <= 0");
        if (s.area < 0 || s.stratum < 0)
            throw std::runtime_error("cluster csv: row " + std::to_string(r + 2) + ": negative id");
        out.push_back(s);
    }
    return out;
}

void write_estimates_csv(const std::string& path, const std::vector<est::DesignEstimate>& ests) {
    csv::Table t;
    t.header = {"area", "theta_hat", "v_hat", "m", "strata", "estimable"};
    for (const auto& e : ests)
        t.rows.push_back({std::to_string(e.area), csv::format(e.theta_hat), csv::format(e.v_hat),
                          std::to_string(e.m_dot), std::to_string(e.strata_count),
                          e.estimable ? "1" : "0"});
    csv::write_file(path, t);
}

std::vector<est::DesignEstimate> read_estimates_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const int c_ar = t.require("area");
    const int c_th = t.require("theta_hat");
    const int c_v = t.require("v_hat");
    const int c_m = t.require("m");
    const int c_s = t.require("strata");
    const int c_e = t.require("estimable");
    std::vector<est::DesignEstimate> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        est::DesignEstimate e;
        e.area = static_cast<int>(csv::parse_long(row[c_ar], r + 2, "area"));
        e.theta_hat = parse_double_allow_nan(row[c_th], r + 2, "theta_hat");
        e.v_hat = parse_double_allow_nan(row[c_v], r + 2, "v_hat");
        e.m_dot = static_cast<int>(csv::parse_long(row[c_m], r + 2, "m"));
        e.strata_count = static_cast<int>(csv::parse_long(row[c_s], r + 2, "strata"));
        e.estimable = csv::parse_long(row[c_e], r + 2, "estimable") != 0;
        out.push_back(e);
    }
    return out;
}

std::vector<std::vector<int>> read_adjacency_csv(const std::string& path, int n_areas) {
    const auto t = csv::read_file(path);
    const int ci = t.require("i");
    const int cj = t.require("j");
    std::vector<std::vector<int>> adj(n_areas);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int i = static_cast<int>(csv::parse_long(t.rows[r][ci], r + 2, "i"));
        const int j = static_cast<int>(csv::parse_long(t.rows[r][cj], r + 2, "j"));
        if (i < 0 || j < 0 || i >= n_areas || j >= n_areas || i == j)
            throw std::runtime_error("adjacency csv: bad edge at row " + std::to_string(r + 2));
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;
}

void write_adjacency_csv(const std::string& path, const std::vector<std::vector<int>>& adj) {
    csv::Table t;
    t.header = {"i", "j"};
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (int j : adj[i])
            if (static_cast<int>(i) < j) t.rows.push_back({std::to_string(i), std::to_string(j)});
    csv::write_file(path, t);
}

void estimate_from_csv(const std::string& in_path, const std::string& out_path) {
    const auto sample = read_cluster_csv(in_path);
    if (sample.empty()) throw std::runtime_error("estimate: no cluster rows in " + in_path);
    int n_areas = 0;
    for (const auto& s : sample) n_areas = std::max(n_areas, s.area + 1);
    const auto areas = design::summarize_sample(sample, n_areas);
    std::vector<est::DesignEstimate> ests;
    for (const auto& a : areas) ests.push_back(est::estimate_area(a));
    write_estimates_csv(out_path, ests);
}

namespace {

ReplicateOutput run_replicate(const Prepared& prep, const RunConfig& cfg, int g) {
    ReplicateOutput out;
    out.replicate = g;
    const auto stag = setting_tag_u64(prep.setting);
    try {
        const auto sample_seed =
            derive_seed(cfg.seed, {stag, static_cast<std::uint64_t>(g), kStageSample});
        const auto draw_seed =
            derive_seed(cfg.seed, {stag, static_cast<std::uint64_t>(g), kStageDraw});
        const auto selected = design::pps_sample_clusters(prep.survey_frame, prep.sample_cfg, sample_seed);
        for (const auto& stratum_sel : selected)
            for (const auto& sel : stratum_sel)
                out.sample.push_back(design::draw_cluster_sample(prep.survey_frame, prep.params,
                                                                 prep.kind, sel, prep.sample_cfg,
                                                                 draw_seed));
        out.areas = design::summarize_sample(out.sample, prep.geog.n_areas);
        for (const auto& a : out.areas) out.estimates.push_back(est::estimate_area(a));

        int model_idx = 0;
        for (const auto& name : cfg.models) {
            const auto variant = inference::ModelVariant::parse(name);
            ++model_idx;
            if (variant.kind == inference::ModelKind::oracle) continue;  // second pass
            const auto data = make_model_data(prep, cfg, out.estimates, out.areas, variant, nullptr);
            const auto fit_seed = derive_seed(
                cfg.seed, {stag, static_cast<std::uint64_t>(g), kStageFit,
                           static_cast<std::uint64_t>(model_idx)});
            const auto draws = inference::fit(data, cfg.mcmc, fit_seed);
            out.fits[name] = inference::summarize_posterior(draws, 0.90);
            out.fit_converged[name] = draws.converged;
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

void persist_replicate(const std::string& dir, const ReplicateOutput& rep) {
    fs::create_directories(dir);
    std::ofstream status(dir + "/status.txt");
    status << (rep.ok ? "ok" : std::string("failed: ") + rep.error) << '\n';
    if (!rep.ok) return;
    write_sample_csv(dir + "/sample.csv", rep.sample);
    write_estimates_csv(dir + "/estimates.csv", rep.estimates);
    write_design_csv(dir + "/design.csv", rep.areas);
    for (const auto& [name, summary] : rep.fits) {
        const std::string fdir = dir + "/fits/" + name;
        fs::create_directories(fdir);
        write_fit_summary_csv(fdir + "/summary.csv", summary);
        json j;
        j["converged"] = rep.fit_converged.at(name);
        std::ofstream out(fdir + "/diagnostics.json");
        out << j.dump(2) << '\n';
    }
}

}  // namespace

SettingSummary run_setting(const RunConfig& cfg) {
    const Prepared prep = prepare(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream echo(cfg.out_dir + "/config.json");
        echo << cfg.to_json_text() << '\n';
    }
    write_frame_csv(cfg.out_dir + "/frame.csv", prep.survey_frame);
    write_truth_csv(cfg.out_dir + "/truth.csv", prep);
    write_covariates_csv(cfg.out_dir + "/covariates.csv", prep);
    write_adjacency_csv(cfg.out_dir + "/adjacency.csv", prep.geog.adjacency);

    // phase 1: independent replicates in a worker pool
    std::vector<ReplicateOutput> reps(cfg.replicates);
    {
        std::atomic<int> next{0};
        const int n_workers = std::max(1, std::min(cfg.threads, cfg.replicates));
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const int g = next.fetch_add(1);
                    if (g >= cfg.replicates) break;
                    reps[g] = run_replicate(prep, cfg, g);
                    persist_replicate(rep_dir(cfg.out_dir, g), reps[g]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // phase 2: empirical design variances require every replicate's estimates
    const int k = prep.geog.n_areas;
    Eigen::VectorXd v_emp(k);
    std::vector<int> g_count(k, 0);
    {
        std::vector<std::vector<double>> theta_reps(k);
        for (const auto& rep : reps) {
            if (!rep.ok) continue;
            for (int i = 0; i < k; ++i)
                if (rep.estimates[i].estimable) theta_reps[i].push_back(rep.estimates[i].theta_hat);
        }
        csv::Table t;
        t.header = {"area", "v_emp", "n_replicates"};
        for (int i = 0; i < k; ++i) {
            g_count[i] = static_cast<int>(theta_reps[i].size());
            v_emp(i) = g_count[i] >= 2 ? eval::empirical_design_variance(theta_reps[i]) : nan_d();
            t.rows.push_back({std::to_string(i), csv::format(v_emp(i)), std::to_string(g_count[i])});
        }
        csv::write_file(cfg.out_dir + "/empirical_var.csv", t);
    }

    const bool want_oracle =
        std::find(cfg.models.begin(), cfg.models.end(), "oracle") != cfg.models.end();
    if (want_oracle) {
        const auto stag = setting_tag_u64(prep.setting);
        int model_idx = 0;
        for (const auto& name : cfg.models) {
            ++model_idx;
            if (name == "oracle") break;
        }
        std::atomic<int> next{0};
        const int n_workers = std::max(1, std::min(cfg.threads, cfg.replicates));
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const int g = next.fetch_add(1);
                    if (g >= cfg.replicates) break;
                    auto& rep = reps[g];
                    if (!rep.ok) continue;
                    try {
                        // areas with no empirical variance are dropped from the fit
                        auto ests = rep.estimates;
                        for (int i = 0; i < k; ++i)
                            if (!std::isfinite(v_emp(i))) ests[i].estimable = false;
                        const auto variant = inference::ModelVariant::parse("oracle");
                        const auto data =
                            make_model_data(prep, cfg, ests, rep.areas, variant, &v_emp);
                        const auto fit_seed = derive_seed(
                            cfg.seed, {stag, static_cast<std::uint64_t>(g), kStageFit,
                                       static_cast<std::uint64_t>(model_idx)});
                        const auto draws = inference::fit(data, cfg.mcmc, fit_seed);
                        rep.fits["oracle"] = inference::summarize_posterior(draws, 0.90);
                        rep.fit_converged["oracle"] = draws.converged;
                        const std::string fdir = rep_dir(cfg.out_dir, g) + "/fits/oracle";
                        fs::create_directories(fdir);
                        write_fit_summary_csv(fdir + "/summary.csv", rep.fits["oracle"]);
                        json j;
                        j["converged"] = rep.fit_converged["oracle"];
                        std::ofstream out(fdir + "/diagnostics.json");
                        out << j.dump(2) << '\n';
                    } catch (const std::exception& e) {
                        rep.ok = false;
                        rep.error = std::string("oracle fit: ") + e.what();
                        std::ofstream status(rep_dir(cfg.out_dir, g) + "/status.txt");
                        status << "failed: " << rep.error << '\n';
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    return evaluate_run(cfg.out_dir);
}

namespace {

struct DesignRow {
    double total_n = 0.0, wdw = 0.0, sum_wstar = 0.0;
};

std::vector<DesignRow> read_design_csv(const std::string& path, int k) {
    const auto t = csv::read_file(path);
    const int ca = t.require("area");
    const int cn = t.require("total_n");
    const int cw = t.require("wdw");
    const int cs = t.require("sum_wstar");
    std::vector<DesignRow> out(k);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int i = static_cast<int>(csv::parse_long(t.rows[r][ca], r + 2, "area"));
        out[i].total_n = csv::parse_double(t.rows[r][cn], r + 2, "total_n");
        out[i].wdw = csv::parse_double(t.rows[r][cw], r + 2, "wdw");
        out[i].sum_wstar = csv::parse_double(t.rows[r][cs], r + 2, "sum_wstar");
    }
    return out;
}

std::vector<inference::AreaSummary> read_fit_summary_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const int ca = t.require("area");
    const int c1 = t.require("theta_mean");
    const int c2 = t.require("theta_lo");
    const int c3 = t.require("theta_hi");
    const int c4 = t.require("sigma2_mean");
    std::vector<inference::AreaSummary> out(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto& s = out[r];
        s.area = static_cast<int>(csv::parse_long(t.rows[r][ca], r + 2, "area"));
        s.theta_mean = parse_double_allow_nan(t.rows[r][c1], r + 2, "theta_mean");
        s.theta_lo = parse_double_allow_nan(t.rows[r][c2], r + 2, "theta_lo");
        s.theta_hi = parse_double_allow_nan(t.rows[r][c3], r + 2, "theta_hi");
        s.sigma2_mean = parse_double_allow_nan(t.rows[r][c4], r + 2, "sigma2_mean");
    }
    return out;
}

double mean_finite(const std::vector<double>& x) {
    KahanSum s;
    int n = 0;
    for (double v : x)
        if (std::isfinite(v)) {
            s.add(v);
            ++n;
        }
    return n ? s.value() / n : nan_d();
}

}  // namespace

const SettingSummary::ModelRow& SettingSummary::row(const std::string& model) const {
    for (const auto& m : models)
        if (m.model == model) return m;
    throw std::invalid_argument("SettingSummary: no such model " + model);
}

SettingSummary evaluate_run(const std::string& run_dir) {
    const RunConfig cfg = RunConfig::from_json_file(run_dir + "/config.json");
    const auto truth = csv::read_file(run_dir + "/truth.csv");
    const int k = static_cast<int>(truth.rows.size());
    std::vector<double> truth_theta(k), truth_sigma2(k);
    {
        const int ct = truth.require("theta");
        const int cs = truth.require("sigma2");
        const int ca = truth.require("area");
        for (int r = 0; r < k; ++r) {
            const int i = static_cast<int>(csv::parse_long(truth.rows[r][ca], r + 2, "area"));
            truth_theta[i] = csv::parse_double(truth.rows[r][ct], r + 2, "theta");
            truth_sigma2[i] = csv::parse_double(truth.rows[r][cs], r + 2, "sigma2");
        }
    }

    // load replicates
    struct Rep {
        std::vector<est::DesignEstimate> ests;
        std::vector<DesignRow> design;
        std::map<std::string, std::vector<inference::AreaSummary>> fits;
    };
    std::vector<Rep> reps;
    int failures = 0;
    for (int g = 0; g < cfg.replicates; ++g) {
        const std::string dir = rep_dir(run_dir, g);
        std::ifstream status(dir + "/status.txt");
        std::string line;
        std::getline(status, line);
        if (line != "ok") {
            ++failures;
            continue;
        }
        Rep r;
        r.ests = read_estimates_csv(dir + "/estimates.csv");
        r.design = read_design_csv(dir + "/design.csv", k);
        for (const auto& name : cfg.models) {
            const std::string f = dir + "/fits/" + name + "/summary.csv";
            if (fs::exists(f)) r.fits[name] = read_fit_summary_csv(f);
        }
        reps.push_back(std::move(r));
    }
    if (reps.empty()) throw std::runtime_error("evaluate_run: no successful replicates");

    // empirical design variance per area
    std::vector<double> v_emp(k, nan_d());
    std::vector<int> g_count(k, 0);
    for (int i = 0; i < k; ++i) {
        std::vector<double> th;
        for (const auto& r : reps)
            if (r.ests[i].estimable) th.push_back(r.ests[i].theta_hat);
        g_count[i] = static_cast<int>(th.size());
        if (th.size() >= 2) v_emp[i] = eval::empirical_design_variance(th);
    }

    // theoretical-to-truth ratios at the true sigma2, both distributions
    std::vector<double> theory_simple(k, nan_d()), theory_sasw(k, nan_d());
    for (int i = 0; i < k; ++i) {
        if (!(v_emp[i] > 0.0)) continue;
        KahanSum ss, sw;
        int n = 0;
        for (const auto& r : reps) {
            if (!r.ests[i].estimable) continue;
            ss.add(truth_sigma2[i] / r.design[i].total_n / v_emp[i]);
            sw.add(truth_sigma2[i] * r.design[i].wdw /
                   (r.design[i].sum_wstar * r.design[i].sum_wstar) / v_emp[i]);
            ++n;
        }
        if (n > 0) {
            theory_simple[i] = ss.value() / n;
            theory_sasw[i] = sw.value() / n;
        }
    }
    {
        csv::Table t;
        t.header = {"area", "v_emp", "n_replicates", "theory_simple", "theory_sasw"};
        for (int i = 0; i < k; ++i)
            t.rows.push_back({std::to_string(i), csv::format(v_emp[i]), std::to_string(g_count[i]),
                              csv::format(theory_simple[i]), csv::format(theory_sasw[i])});
        csv::write_file(run_dir + "/theory_ratios.csv", t);
    }

    SettingSummary summary;
    summary.failures = failures;
    summary.avg_theory_simple = mean_finite(theory_simple);
    summary.avg_theory_sasw = mean_finite(theory_sasw);

    csv::Table by_area;
    by_area.header = {"setting", "model",     "area",           "rmse",
                      "coverage", "avg_width", "interval_score", "est_to_truth_pop",
                      "est_to_truth_design", "theory_to_truth", "n_replicates"};
    csv::Table summary_t;
    summary_t.header = {"setting", "model",     "avg_rmse",        "avg_coverage",
                        "avg_width", "avg_interval_score", "avg_est_to_truth_pop",
                        "avg_est_to_truth_design", "avg_theory_to_truth", "failures"};

    for (const auto& name : cfg.models) {
        const auto variant = inference::ModelVariant::parse(name);
        // gather interval estimates per replicate
        std::vector<std::vector<eval::IntervalEstimate>> all;
        for (const auto& r : reps) {
            const auto it = r.fits.find(name);
            if (it == r.fits.end()) continue;
            std::vector<eval::IntervalEstimate> rep_est(k, {nan_d(), nan_d(), nan_d()});
            for (const auto& s : it->second)
                rep_est[s.area] = {s.theta_mean, s.theta_lo, s.theta_hi};
            all.push_back(std::move(rep_est));
        }
        if (all.empty()) continue;
        const auto metrics = eval::evaluate_estimates(all, truth_theta);

        std::vector<double> pops(k, nan_d()), designs(k, nan_d()), theories(k, nan_d());
        for (int i = 0; i < k; ++i) {
            std::vector<double> pop_ratio, design_v;
            for (const auto& r : reps) {
                const auto it = r.fits.find(name);
                if (it == r.fits.end()) continue;
                const double s2 = it->second[i].sigma2_mean;
                if (variant.smooth() && std::isfinite(s2)) pop_ratio.push_back(s2);
                if (!r.ests[i].estimable) continue;
                double v = nan_d();
                if (variant.kind == inference::ModelKind::standard) {
                    v = r.ests[i].v_hat;
                } else if (variant.smooth() && std::isfinite(s2)) {
                    v = variant.dist == inference::SamplingDist::simple
                            ? s2 / r.design[i].total_n
                            : s2 * r.design[i].wdw / (r.design[i].sum_wstar * r.design[i].sum_wstar);
                }
                if (std::isfinite(v)) design_v.push_back(v);
            }
            if (variant.smooth() && !pop_ratio.empty() && truth_sigma2[i] > 0.0)
                pops[i] = mean_finite(pop_ratio) / truth_sigma2[i];
            if (!design_v.empty() && v_emp[i] > 0.0) designs[i] = mean_finite(design_v) / v_emp[i];
            if (variant.smooth())
                theories[i] = variant.dist == inference::SamplingDist::simple ? theory_simple[i]
                                                                              : theory_sasw[i];
        }

        std::vector<double> rmses, covs, widths, scores;
        for (int i = 0; i < k; ++i) {
            const auto& m = metrics[i];
            if (m.n_replicates == 0) continue;
            rmses.push_back(m.rmse);
            covs.push_back(m.coverage);
            widths.push_back(m.avg_width);
            scores.push_back(m.avg_interval_score);
            by_area.rows.push_back({cfg.setting, name, std::to_string(i), csv::format(m.rmse),
                                    csv::format(m.coverage), csv::format(m.avg_width),
                                    csv::format(m.avg_interval_score), csv::format(pops[i]),
                                    csv::format(designs[i]), csv::format(theories[i]),
                                    std::to_string(m.n_replicates)});
        }

        SettingSummary::ModelRow row;
        row.model = name;
        row.avg_rmse = mean_finite(rmses);
        row.avg_coverage = mean_finite(covs);
        row.avg_width = mean_finite(widths);
        row.avg_interval_score = mean_finite(scores);
        row.avg_est_to_truth_pop = mean_finite(pops);
        row.avg_est_to_truth_design = mean_finite(designs);
        summary.models.push_back(row);

        summary_t.rows.push_back(
            {cfg.setting, name, csv::format(row.avg_rmse), csv::format(row.avg_coverage),
             csv::format(row.avg_width), csv::format(row.avg_interval_score),
             csv::format(row.avg_est_to_truth_pop), csv::format(row.avg_est_to_truth_design),
             csv::format(variant.smooth()
                             ? (variant.dist == inference::SamplingDist::simple
                                    ? summary.avg_theory_simple
                                    : summary.avg_theory_sasw)
                             : nan_d()),
             std::to_string(failures)});
    }

    csv::write_file(run_dir + "/metrics_by_area.csv", by_area);
    csv::write_file(run_dir + "/metrics_summary.csv", summary_t);
    return summary;
}

}  // namespace fhvs::runner
