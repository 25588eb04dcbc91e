#include "fhvs/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fhvs/rng.hpp"
#include "fhvs/stats.hpp"

namespace fhvs::design {

std::vector<std::vector<SampledCluster>> pps_sample_clusters(const frame::SurveyFrame& f,
                                                             const SampleConfig& cfg,
                                                             std::uint64_t seed) {
    if (static_cast<int>(cfg.clusters_to_sample.size()) != f.n_strata)
        throw std::invalid_argument("pps_sample_clusters: m_h size mismatch");

    std::vector<std::vector<SampledCluster>> out(f.n_strata);
    for (int h = 0; h < f.n_strata; ++h) {
        const int available = f.clusters_in_stratum(h);
        const int m_target = cfg.clusters_to_sample[h] * cfg.multiplier;
        if (m_target > available)
            throw std::invalid_argument("pps_sample_clusters: m_h exceeds frame cluster count");
        if (m_target < 1) throw std::invalid_argument("pps_sample_clusters: m_h < 1");

        Rng rng(derive_seed(seed, {0x5050u, static_cast<std::uint64_t>(h)}));

        std::vector<int> pool = f.by_stratum[h];
        const double listed_total = f.stratum_listed_total[h];
        for (int id : pool)
            if (f.clusters[id].listed_size <= 0)
                throw std::invalid_argument("pps_sample_clusters: nonpositive listed size");

        auto nominal_p1 = [&](int id) {
            return std::min(1.0, m_target * static_cast<double>(f.clusters[id].listed_size) / listed_total);
        };

        // peel off certainty selections until none remain
        std::vector<SampledCluster> picked;
        int m = m_target;
        double total = listed_total;
        for (;;) {
            bool found = false;
            for (auto it = pool.begin(); it != pool.end();) {
                const double p = m * static_cast<double>(f.clusters[*it].listed_size) / total;
                if (p >= 1.0) {
                    picked.push_back({*it, 1.0, true});
                    total -= static_cast<double>(f.clusters[*it].listed_size);
                    --m;
                    it = pool.erase(it);
                    found = true;
                } else {
                    ++it;
                }
            }
            if (!found || m == 0) break;
        }

        if (m > 0) {
            // random order, then systematic selection on cumulated listed sizes
            for (std::size_t i = pool.size(); i > 1; --i)
                std::swap(pool[i - 1], pool[rng.below(i)]);
            const double step = total / m;
            double start = rng.uniform() * step;
            double cum = 0.0;
            std::size_t idx = 0;
            for (int j = 0; j < m; ++j) {
                const double point = start + j * step;
                while (idx + 1 < pool.size() &&
                       cum + static_cast<double>(f.clusters[pool[idx]].listed_size) <= point) {
                    cum += static_cast<double>(f.clusters[pool[idx]].listed_size);
                    ++idx;
                }
                picked.push_back({pool[idx], nominal_p1(pool[idx]), false});
            }
        }
        std::sort(picked.begin(), picked.end(),
                  [](const SampledCluster& a, const SampledCluster& b) { return a.cluster_id < b.cluster_id; });
        out[h] = std::move(picked);
    }
    return out;
}

ClusterSummary draw_cluster_sample(const frame::SurveyFrame& f, const frame::SuperpopParams& params,
                                   const frame::OutcomeKind& kind, const SampledCluster& sel,
                                   const SampleConfig& cfg, std::uint64_t seed) {
    const auto& c = f.clusters[sel.cluster_id];
    const NegBinDist& dist = c.urban ? cfg.urban_size : cfg.rural_size;

    Rng rng(derive_seed(seed, {0x4e43u, static_cast<std::uint64_t>(sel.cluster_id)}));
    long n = 0;
    do {
        n = rng.negbin(dist.size, dist.mean);
    } while (n == 0);
    if (n > c.true_size) n = c.true_size;

    const auto y = frame::gen_outcomes(f, params, kind, sel.cluster_id, static_cast<int>(n), seed);
    const double ybar = mean(y);

    // w_c = 1/(p1 p2) with p2 = n/N; the scaled weight is w_c * n = N_c / p1
    const double wstar = static_cast<double>(c.true_size) / sel.p1;

    ClusterSummary s;
    s.cluster_id = sel.cluster_id;
    s.stratum = c.stratum;
    s.area = c.area;
    s.urban = c.urban;
    s.ybar = ybar;
    s.n = static_cast<int>(n);
    s.wstar = wstar;
    return s;
}

std::vector<AreaSample> summarize_sample(const std::vector<ClusterSummary>& sample, int n_areas) {
    // group the full sample by stratum once; each area then pulls the strata it touches
    int n_strata = 0;
    for (const auto& s : sample) n_strata = std::max(n_strata, s.stratum + 1);
    std::vector<std::vector<const ClusterSummary*>> by_stratum(n_strata);
    for (const auto& s : sample) by_stratum[s.stratum].push_back(&s);

    std::vector<AreaSample> out(n_areas);
    for (int i = 0; i < n_areas; ++i) out[i].area = i;

    std::vector<std::vector<int>> strata_of_area(n_areas);
    for (const auto& s : sample) {
        auto& v = strata_of_area[s.area];
        if (std::find(v.begin(), v.end(), s.stratum) == v.end()) v.push_back(s.stratum);
    }

    for (int i = 0; i < n_areas; ++i) {
        auto& a = out[i];
        a.strata = strata_of_area[i];
        std::sort(a.strata.begin(), a.strata.end());
        for (int h : a.strata) {
            for (const ClusterSummary* s : by_stratum[h]) {
                AreaSample::Row r;
                r.cluster_id = s->cluster_id;
                r.stratum = s->stratum;
                r.ybar = s->ybar;
                r.wstar = s->wstar;
                r.n = s->n;
                r.in_domain = (s->area == i);
                r.urban = s->urban;
                a.rows.push_back(r);
                if (r.in_domain) ++a.m_dot;
            }
        }
        a.estimable = a.m_dot > 1;
    }
    return out;
}

}  // namespace fhvs::design
