#include "fhvs/frame.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fhvs/rng.hpp"

namespace fhvs::frame {

namespace {

// Unbiased integer allocation of m units to cells proportional to weights:
// floor quotas plus systematic selection on the fractional remainders, so
// E[allocation_i] = m * w_i / sum(w) exactly.
std::vector<int> proportional_allocation(const std::vector<double>& w, int m, Rng& rng) {
    const int n = static_cast<int>(w.size());
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) throw std::invalid_argument("proportional_allocation: no positive weight");
    std::vector<int> alloc(n, 0);
    std::vector<double> frac(n, 0.0);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double quota = m * w[i] / total;
        alloc[i] = static_cast<int>(std::floor(quota));
        frac[i] = quota - alloc[i];
        assigned += alloc[i];
    }
    int rem = m - assigned;
    if (rem > 0) {
        const double u = rng.uniform();
        double cum = 0.0;
        int next = 0;
        for (int i = 0; i < n && next < rem; ++i) {
            cum += frac[i];
            while (next < rem && u + next < cum) {
                ++alloc[i];
                ++next;
            }
        }
    }
    return alloc;
}

}  // namespace

SurveyFrame build_frame(const Geography& geog, const FrameConfig& cfg, std::uint64_t seed) {
    const int n_areas = geog.n_areas;
    const int n_strata = geog.n_strata();
    if (static_cast<int>(cfg.area_pop.size()) != n_areas ||
        static_cast<int>(cfg.urban_frac.size()) != n_areas)
        throw std::invalid_argument("build_frame: per-area config size mismatch");
    if (static_cast<int>(cfg.clusters_per_stratum.size()) != n_strata)
        throw std::invalid_argument("build_frame: per-stratum config size mismatch");
    for (int h = 0; h < n_strata; ++h)
        if (cfg.clusters_per_stratum[h] < 2)
            throw std::invalid_argument("build_frame: stratum with fewer than 2 clusters");
    for (long p : cfg.area_pop)
        if (p <= 0) throw std::invalid_argument("build_frame: nonpositive area population");

    // integer stratum-area cell populations; urban-only admin1 areas are fully urban
    std::vector<long> urban_pop(n_areas), rural_pop(n_areas);
    for (int i = 0; i < n_areas; ++i) {
        const int a = geog.admin1_of_area[i];
        if (geog.rural_stratum_of_admin1[a] < 0) {
            urban_pop[i] = cfg.area_pop[i];
            rural_pop[i] = 0;
        } else {
            urban_pop[i] = std::llround(cfg.urban_frac[i] * static_cast<double>(cfg.area_pop[i]));
            urban_pop[i] = std::clamp<long>(urban_pop[i], 0, cfg.area_pop[i]);
            rural_pop[i] = cfg.area_pop[i] - urban_pop[i];
        }
    }

    SurveyFrame f;
    f.n_strata = n_strata;
    f.n_areas = n_areas;
    f.by_stratum.resize(n_strata);
    f.stratum_pop.assign(n_strata, 0);
    f.stratum_listed_total.assign(n_strata, 0.0);
    f.area_pop = cfg.area_pop;
    f.area_urban_pop = urban_pop;

    Rng rng(derive_seed(seed, {0x4652u}));

    for (int h = 0; h < n_strata; ++h) {
        const auto& st = geog.strata[h];
        const auto areas = geog.areas_of_admin1(st.admin1);
        std::vector<double> cell_pop(areas.size());
        for (std::size_t j = 0; j < areas.size(); ++j)
            cell_pop[j] = static_cast<double>(st.urban ? urban_pop[areas[j]] : rural_pop[areas[j]]);

        auto alloc = proportional_allocation(cell_pop, cfg.clusters_per_stratum[h], rng);
        // every positive-population cell needs at least one cluster to hold it
        for (std::size_t j = 0; j < areas.size(); ++j) {
            while (cell_pop[j] > 0.0 && alloc[j] == 0) {
                const auto k = std::distance(alloc.begin(), std::max_element(alloc.begin(), alloc.end()));
                if (alloc[k] <= 1) throw std::runtime_error("build_frame: too few clusters for stratum cells");
                --alloc[k];
                ++alloc[j];
            }
        }

        for (std::size_t j = 0; j < areas.size(); ++j) {
            const long pop = static_cast<long>(cell_pop[j]);
            const int kc = alloc[j];
            if (kc == 0) continue;
            if (pop < kc) throw std::runtime_error("build_frame: cell population smaller than cluster count");
            const long base = pop / kc, rem = pop % kc;
            for (int t = 0; t < kc; ++t) {
                FrameCluster c;
                c.id = static_cast<int>(f.clusters.size());
                c.stratum = h;
                c.area = areas[j];
                c.urban = st.urban;
                c.true_size = base + (t < rem ? 1 : 0);
                c.listed_size = c.true_size;
                if (cfg.reenumerate) {
                    const double draw = rng.normal(0.85 * static_cast<double>(c.true_size),
                                                   0.20 * static_cast<double>(c.true_size));
                    c.listed_size = std::max<long>(1, std::llround(draw));
                }
                f.clusters.push_back(c);
                f.by_stratum[h].push_back(c.id);
                f.stratum_pop[h] += c.true_size;
                f.stratum_listed_total[h] += static_cast<double>(c.listed_size);
            }
        }
    }
    return f;
}

std::vector<double> gen_outcomes(const SurveyFrame& frame, const SuperpopParams& params,
                                 const OutcomeKind& kind, int cluster_id, int n_draws,
                                 std::uint64_t seed) {
    if (cluster_id < 0 || cluster_id >= static_cast<int>(frame.clusters.size()))
        throw std::invalid_argument("gen_outcomes: unknown cluster");
    if (n_draws < 1) throw std::invalid_argument("gen_outcomes: n_draws < 1");
    const auto& c = frame.clusters[cluster_id];
    const double theta = params.theta(c.area, c.urban);
    const double sigma = std::sqrt(params.sigma2(c.area, c.urban));

    Rng rng(derive_seed(seed, {0x4f55u, static_cast<std::uint64_t>(cluster_id)}));
    std::vector<double> y(n_draws);
    switch (kind.family) {
        case OutcomeKind::Family::normal:
            for (auto& v : y) v = theta + sigma * rng.normal();
            break;
        case OutcomeKind::Family::student_t: {
            if (kind.t_df <= 2.0) throw std::invalid_argument("gen_outcomes: t df <= 2");
            const double scale = sigma * std::sqrt((kind.t_df - 2.0) / kind.t_df);
            for (auto& v : y) v = theta + scale * rng.student_t(kind.t_df);
            break;
        }
        case OutcomeKind::Family::intra_cluster_normal: {
            const double shared = rng.normal();  // one cluster effect per call
            const double a = std::sqrt(kind.rho), b = std::sqrt(1.0 - kind.rho);
            for (auto& v : y) v = theta + sigma * (a * shared + b * rng.normal());
            break;
        }
    }
    return y;
}

}  // namespace fhvs::frame
