#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fhvs/design.hpp"
#include "fhvs/estimators.hpp"
#include "fhvs/mcmc.hpp"
#include "fhvs/model.hpp"
#include "fhvs/posterior.hpp"

namespace fhvs::runner {

struct RunConfig {
    std::string setting = "1";
    std::uint64_t seed = 20260810;
    int replicates = 30;
    int threads = 1;

    // geography
    int areas = 60;
    int admin1 = 10;
    int urban_only_admin1 = 2;

    // population / frame
    double area_pop_mean = 4000.0;
    double area_pop_log_sd = 0.4;
    double urban_frac_alpha = 2.0;
    double urban_frac_beta = 4.0;
    int clusters_per_stratum = 104;        // M_h
    int sample_clusters_per_stratum = 13;  // m_h

    design::NegBinDist urban_nb{8.0, 9.0};
    design::NegBinDist rural_nb{4.0, 11.0};

    inference::McmcConfig mcmc{2, 600, 500, 2, 1.05, 100.0};
    inference::PriorConfig priors;
    std::vector<std::string> models = {"standard", "simple-struct", "sasw-struct"};

    std::string out_dir = "out";

    static RunConfig from_json_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Everything fixed across replicates of one setting.
struct Prepared {
    frame::Geography geog;
    frame::SurveyFrame survey_frame;
    frame::SuperpopParams params;
    frame::OutcomeKind kind;
    design::SampleConfig sample_cfg;
    spatial::ScaledIcar icar;
    Eigen::VectorXd p_urban;
    Eigen::VectorXd truth_theta;
    Eigen::VectorXd truth_sigma2;
    frame::Setting setting;
};

Prepared prepare(const RunConfig& cfg);

// One replicate held in memory: the sample, per-area groupings, design
// estimates and fitted summaries.
struct ReplicateOutput {
    int replicate = -1;
    bool ok = false;
    std::string error;
    std::vector<design::ClusterSummary> sample;
    std::vector<design::AreaSample> areas;
    std::vector<est::DesignEstimate> estimates;
    std::map<std::string, std::vector<inference::AreaSummary>> fits;
    std::map<std::string, bool> fit_converged;
};

// Aggregate outcome of a full setting run.
struct SettingSummary {
    struct ModelRow {
        std::string model;
        double avg_rmse = 0.0;
        double avg_coverage = 0.0;
        double avg_width = 0.0;
        double avg_interval_score = 0.0;
        double avg_est_to_truth_pop = 0.0;
        double avg_est_to_truth_design = 0.0;
    };
    std::vector<ModelRow> models;
    double avg_theory_simple = 0.0;
    double avg_theory_sasw = 0.0;
    int failures = 0;

    const ModelRow& row(const std::string& model) const;
};

SettingSummary run_setting(const RunConfig& cfg);

// Metric computation from a finished run directory; also used internally by
// run_setting so the on-disk artifacts are the single source of truth.
SettingSummary evaluate_run(const std::string& run_dir);

// Real-data path: cluster-level CSV in, per-area design estimates out.
void estimate_from_csv(const std::string& in_path, const std::string& out_path);

std::vector<design::ClusterSummary> read_cluster_csv(const std::string& path);
void write_sample_csv(const std::string& path, const std::vector<design::ClusterSummary>& sample);
void write_estimates_csv(const std::string& path, const std::vector<est::DesignEstimate>& ests);
std::vector<est::DesignEstimate> read_estimates_csv(const std::string& path);
std::vector<std::vector<int>> read_adjacency_csv(const std::string& path, int n_areas);
void write_adjacency_csv(const std::string& path, const std::vector<std::vector<int>>& adj);

inference::ModelData make_model_data(const Prepared& prep, const RunConfig& cfg,
                                     const std::vector<est::DesignEstimate>& ests,
                                     const std::vector<design::AreaSample>& areas,
                                     inference::ModelVariant variant,
                                     const Eigen::VectorXd* oracle_v);

}  // namespace fhvs::runner
