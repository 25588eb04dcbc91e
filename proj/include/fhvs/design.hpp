#pragma once

#include <cstdint>
#include <vector>

#include "fhvs/frame.hpp"

namespace fhvs::design {

struct NegBinDist {
    double size;
    double mean;
};

struct SampleConfig {
    std::vector<int> clusters_to_sample;  // m_h per stratum (before multiplier)
    NegBinDist urban_size{8.0, 9.0};
    NegBinDist rural_size{4.0, 11.0};
    int multiplier = 1;  // scales m_h, used by the enlarged-sample setting

    int effective_m(int h, int available) const {
        const int m = clusters_to_sample[h] * multiplier;
        return m < available ? m : available;
    }
};

struct SampledCluster {
    int cluster_id;
    double p1;       // first-stage inclusion probability, capped at 1
    bool certainty;  // p1 reached 1
};

// Systematic PPS without replacement on a randomly permuted frame; exactly
// m_h distinct selections per stratum. Certainty clusters (p1 >= 1) are
// removed first and selected deterministically.
std::vector<std::vector<SampledCluster>> pps_sample_clusters(const frame::SurveyFrame& f,
                                                             const SampleConfig& cfg,
                                                             std::uint64_t seed);

struct ClusterSummary {
    int cluster_id;
    int stratum;
    int area;
    bool urban;
    double ybar;   // sample mean outcome
    int n;         // individuals sampled
    double wstar;  // scaled weight w_c * n_c
};

ClusterSummary draw_cluster_sample(const frame::SurveyFrame& f, const frame::SuperpopParams& params,
                                   const frame::OutcomeKind& kind, const SampledCluster& sel,
                                   const SampleConfig& cfg, std::uint64_t seed);

// Everything the estimators need for one area: all sampled clusters of the
// strata intersecting the area, in a fixed order, with in-domain flags.
// Out-of-domain rows enter variance computations with weight zero.
struct AreaSample {
    struct Row {
        int cluster_id;
        int stratum;
        double ybar;
        double wstar;
        int n;
        bool in_domain;
        bool urban;
    };
    int area = -1;
    std::vector<Row> rows;
    std::vector<int> strata;  // distinct strata with at least one in-domain cluster
    int m_dot = 0;            // in-domain sampled clusters
    bool estimable = false;   // m_dot > 1

    int stratum_count() const { return static_cast<int>(strata.size()); }
    long total_n() const {
        long t = 0;
        for (const auto& r : rows)
            if (r.in_domain) t += r.n;
        return t;
    }
};

std::vector<AreaSample> summarize_sample(const std::vector<ClusterSummary>& sample, int n_areas);

}  // namespace fhvs::design
