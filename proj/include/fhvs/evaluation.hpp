#pragma once

#include <vector>

#include "fhvs/distributions.hpp"

namespace fhvs::eval {

// Empirical design variance over replicates, denominator |G_i|.
double empirical_design_variance(const std::vector<double>& theta_hats);

// Interval score for a (1 - alpha) interval: width plus 2/alpha times each
// violation distance.
double interval_score(double lo, double hi, double truth, double alpha = 0.1);

struct IntervalEstimate {
    double mean, lo, hi;
};

struct AreaMetrics {
    int area = -1;
    double rmse = 0.0;
    double coverage = 0.0;
    double avg_width = 0.0;
    double avg_interval_score = 0.0;
    int n_replicates = 0;
};

// RMSE, coverage, width and interval score per area across replicates;
// replicates[g][i] is the posterior summary of area i in replicate g.
std::vector<AreaMetrics> evaluate_estimates(
    const std::vector<std::vector<IntervalEstimate>>& replicates,
    const std::vector<double>& truth, double alpha = 0.1);

struct RatioMetrics {
    double theory_to_truth = 0.0;    // mean of v_i^(g)(sigma2_true) / V_i
    double est_to_truth_pop = 0.0;   // mean of sigma2_post^(g) / sigma2_true
    double est_to_truth_design = 0.0;  // mean of v_i^(g)(sigma2_post^(g)) / V_i
};

// Averages of the three variance ratio diagnostics; entries of the
// per-replicate vectors may be NaN for replicates where the area lacked
// estimates, and are skipped.
RatioMetrics ratio_metrics(const std::vector<double>& theoretical_v,
                           const std::vector<double>& sigma2_post,
                           const std::vector<double>& design_v_at_post, double v_empirical,
                           double sigma2_true);

// Average squared Wasserstein-2 discrepancy across integer percentiles
// 1..99 between per-replicate analytic sampling distributions and the
// empirical draws, plus the average difference in means.
struct DistComparison {
    double wasserstein2 = 0.0;
    double mean_diff = 0.0;
};
DistComparison compare_distributions(const std::vector<dist::ChiSquareParams>& per_replicate,
                                     const std::vector<double>& empirical_draws);

// Percentile of the scaled chi-square V ~ theoretical_v * c * chisq(d).
double chisq_params_quantile(const dist::ChiSquareParams& p, double prob);

}  // namespace fhvs::eval
