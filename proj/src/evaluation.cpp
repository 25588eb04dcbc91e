#include "fhvs/evaluation.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fhvs/stats.hpp"

namespace fhvs::eval {

double empirical_design_variance(const std::vector<double>& theta_hats) {
    if (theta_hats.size() < 2)
        throw std::invalid_argument("empirical_design_variance: need at least 2 replicates");
    return variance_n(theta_hats);
}

double interval_score(double lo, double hi, double truth, double alpha) {
    if (lo > hi) throw std::invalid_argument("interval_score: lower bound above upper bound");
    return (hi - lo) + 2.0 / alpha * std::max(0.0, lo - truth) +
           2.0 / alpha * std::max(0.0, truth - hi);
}

std::vector<AreaMetrics> evaluate_estimates(
    const std::vector<std::vector<IntervalEstimate>>& replicates,
    const std::vector<double>& truth, double alpha) {
    if (replicates.empty()) throw std::invalid_argument("evaluate_estimates: no replicates");
    const int k = static_cast<int>(truth.size());
    std::vector<AreaMetrics> out(k);
    for (int i = 0; i < k; ++i) {
        auto& m = out[i];
        m.area = i;
        KahanSum se, cov, width, score;
        int g = 0;
        for (const auto& rep : replicates) {
            if (static_cast<int>(rep.size()) != k)
                throw std::invalid_argument("evaluate_estimates: inconsistent area sets");
            const auto& e = rep[i];
            if (!std::isfinite(e.mean)) continue;  // averaged over available replicates
            se.add((e.mean - truth[i]) * (e.mean - truth[i]));
            cov.add(truth[i] >= e.lo && truth[i] <= e.hi ? 1.0 : 0.0);
            width.add(e.hi - e.lo);
            score.add(interval_score(e.lo, e.hi, truth[i], alpha));
            ++g;
        }
        m.n_replicates = g;
        if (g > 0) {
            m.rmse = std::sqrt(se.value() / g);
            m.coverage = cov.value() / g;
            m.avg_width = width.value() / g;
            m.avg_interval_score = score.value() / g;
        }
    }
    return out;
}

namespace {
double mean_skip_nan(const std::vector<double>& x) {
    KahanSum s;
    int n = 0;
    for (double v : x) {
        if (!std::isfinite(v)) continue;
        s.add(v);
        ++n;
    }
    return n > 0 ? s.value() / n : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace

RatioMetrics ratio_metrics(const std::vector<double>& theoretical_v,
                           const std::vector<double>& sigma2_post,
                           const std::vector<double>& design_v_at_post, double v_empirical,
                           double sigma2_true) {
    if (!(v_empirical > 0.0) || !(sigma2_true > 0.0))
        throw std::invalid_argument("ratio_metrics: zero denominator");
    RatioMetrics r;
    std::vector<double> a, b, c;
    for (double v : theoretical_v) a.push_back(v / v_empirical);
    for (double v : sigma2_post) b.push_back(v / sigma2_true);
    for (double v : design_v_at_post) c.push_back(v / v_empirical);
    r.theory_to_truth = mean_skip_nan(a);
    r.est_to_truth_pop = mean_skip_nan(b);
    r.est_to_truth_design = mean_skip_nan(c);
    return r;
}

double chisq_params_quantile(const dist::ChiSquareParams& p, double prob) {
    boost::math::chi_squared_distribution<double> chi(p.df_d);
    return p.theoretical_v * p.scale_c * boost::math::quantile(chi, prob);
}

DistComparison compare_distributions(const std::vector<dist::ChiSquareParams>& per_replicate,
                                     const std::vector<double>& empirical_draws) {
    if (empirical_draws.size() < 99)
        throw std::invalid_argument("compare_distributions: need at least 99 empirical draws");
    if (per_replicate.empty())
        throw std::invalid_argument("compare_distributions: no replicate distributions");

    std::vector<double> sorted = empirical_draws;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> emp_q(99);
    for (int j = 1; j <= 99; ++j) emp_q[j - 1] = quantile_sorted(sorted, j / 100.0);
    const double emp_mean = mean(sorted);

    KahanSum w2, md;
    for (const auto& p : per_replicate) {
        KahanSum gap;
        for (int j = 1; j <= 99; ++j) {
            const double d = chisq_params_quantile(p, j / 100.0) - emp_q[j - 1];
            gap.add(d * d);
        }
        w2.add(gap.value() / 99.0);
        md.add(p.mean() - emp_mean);
    }
    const double g = static_cast<double>(per_replicate.size());
    return {w2.value() / g, md.value() / g};
}

}  // namespace fhvs::eval
