#pragma once

#include <cstdint>
#include <vector>

#include "fhvs/geography.hpp"
#include "fhvs/superpop.hpp"

namespace fhvs::frame {

struct FrameCluster {
    int id;
    int stratum;
    int area;
    bool urban;
    long true_size;    // N_c
    long listed_size;  // L_c
};

struct SurveyFrame {
    std::vector<FrameCluster> clusters;
    std::vector<std::vector<int>> by_stratum;  // cluster ids per stratum
    std::vector<long> stratum_pop;             // sum of N_c per stratum
    std::vector<double> stratum_listed_total;  // sum of L_c per stratum
    std::vector<long> area_pop;                // total individuals per area
    std::vector<long> area_urban_pop;
    int n_strata = 0;
    int n_areas = 0;

    int clusters_in_stratum(int h) const { return static_cast<int>(by_stratum[h].size()); }
    // urban population share of an area, the p_i covariate of the latent mean model
    double urban_fraction(int area) const {
        return area_pop[area] > 0
                   ? static_cast<double>(area_urban_pop[area]) / static_cast<double>(area_pop[area])
                   : 0.0;
    }
};

struct FrameConfig {
    std::vector<long> area_pop;          // per-area population targets
    std::vector<double> urban_frac;      // per-area urban population share
    std::vector<int> clusters_per_stratum;  // M_h
    bool reenumerate = false;            // listed sizes drawn around 0.85 N_c
};

SurveyFrame build_frame(const Geography& geog, const FrameConfig& cfg, std::uint64_t seed);

// Individual outcome draws for one cluster: mean theta_hi, variance sigma2_hi
// under the configured family. intra_cluster_normal shares one cluster effect
// across the draws of a single call.
std::vector<double> gen_outcomes(const SurveyFrame& frame, const SuperpopParams& params,
                                 const OutcomeKind& kind, int cluster_id, int n_draws,
                                 std::uint64_t seed);

}  // namespace fhvs::frame
