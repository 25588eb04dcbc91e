#include "fhvs/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fhvs/stats.hpp"

namespace fhvs::inference {

std::vector<AreaSummary> summarize_posterior(const PosteriorDraws& draws, double level) {
    if (draws.chains.empty() || draws.n_iter == 0)
        throw std::invalid_argument("summarize_posterior: no draws");
    if (level <= 0.0 || level >= 1.0)
        throw std::invalid_argument("summarize_posterior: level outside (0,1)");
    const double lo_p = (1.0 - level) / 2.0, hi_p = 1.0 - lo_p;
    const bool smooth = std::any_of(draws.names.begin(), draws.names.end(),
                                    [](const std::string& n) { return n == "sigma2[0]"; });
    std::vector<AreaSummary> out(draws.n_areas);
    for (int i = 0; i < draws.n_areas; ++i) {
        auto& s = out[i];
        s.area = i;
        auto th = draws.pooled("theta[" + std::to_string(i) + "]");
        s.theta_mean = mean(th);
        std::sort(th.begin(), th.end());
        s.theta_lo = quantile_sorted(th, lo_p);
        s.theta_hi = quantile_sorted(th, hi_p);
        if (smooth) {
            auto s2 = draws.pooled("sigma2[" + std::to_string(i) + "]");
            s.sigma2_mean = mean(s2);
            std::sort(s2.begin(), s2.end());
            s.sigma2_lo = quantile_sorted(s2, lo_p);
            s.sigma2_hi = quantile_sorted(s2, hi_p);
        } else {
            s.sigma2_mean = s.sigma2_lo = s.sigma2_hi = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

Eigen::VectorXd rank_probabilities(const PosteriorDraws& draws, double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("rank_probabilities: p outside (0,1)");
    const int k = draws.n_areas;
    std::vector<int> theta_col(k);
    for (int i = 0; i < k; ++i) theta_col[i] = draws.col("theta[" + std::to_string(i) + "]");

    Eigen::VectorXd hits = Eigen::VectorXd::Zero(k);
    long n_draws = 0;
    std::vector<std::pair<double, int>> vals(k);
    for (const auto& c : draws.chains) {
        for (int t = 0; t < draws.n_iter; ++t) {
            for (int i = 0; i < k; ++i) vals[i] = {c(t, theta_col[i]), i};
            std::sort(vals.begin(), vals.end());
            // share of areas strictly exceeded; ties get the lowest count
            for (int r = 0; r < k; ++r) {
                int below = r;
                while (below > 0 && vals[below - 1].first == vals[r].first) --below;
                if (static_cast<double>(below) / k <= p) hits(vals[r].second) += 1.0;
            }
            ++n_draws;
        }
    }
    return hits / static_cast<double>(n_draws);
}

}  // namespace fhvs::inference
