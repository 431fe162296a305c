#pragma once

#include <string>
#include <vector>

#include "promptmut/template_model.hpp"

namespace promptmut {

// values[model][template]; template 0 is the original.
struct MetricTable {
    std::vector<std::string> model_ids;
    std::vector<std::vector<double>> values;

    std::size_t models() const { return values.size(); }
    std::size_t templates() const { return values.empty() ? 0 : values[0].size(); }
};

// ranks[model][template]: rank of the model under that template (1 = best),
// midranks on ties.
struct RankMatrix {
    std::vector<std::vector<double>> ranks;

    std::size_t models() const { return ranks.size(); }
    std::size_t templates() const { return ranks.empty() ? 0 : ranks[0].size(); }
};

struct AgreementLabel {
    double w = 0.0;
    std::string label;  // "strong" iff w >= 0.85, else "weak-to-moderate"
};

struct AnovaResult {
    double f_template = 0.0, f_temperature = 0.0, f_interaction = 0.0;
    double p_template = 1.0, p_temperature = 1.0, p_interaction = 1.0;
    int df_template = 0, df_temperature = 0, df_interaction = 0, df_error = 0;
};

struct IouResult {
    std::vector<std::vector<double>> pairwise;  // symmetric, diagonal 1
    double mean = 0.0;                          // over unordered distinct pairs
};

// Z = (x0 - mean) / sigma with population sigma (divide by n).
double z_score(const std::vector<double>& series);

// MPI = max_i (x_i - x0) / x0, i ranging over the whole series, hence >= 0.
double mpi(const std::vector<double>& series);

// Per template, models ranked by metric descending with midranks on ties.
RankMatrix rank_models(const MetricTable& table);

// W = 12S / (m^2 (n^3 - n)) with S the squared deviation of rank sums.
// The tie-corrected variant subtracts m * sum(T_j) in the denominator.
AgreementLabel kendalls_w(const RankMatrix& ranks, bool tie_corrected = false);

// Top-k template sets per model (boundary ties to the lower template index),
// IoU per model pair, mean over distinct pairs.
IouResult top_k_iou(const MetricTable& table, int k);

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Balanced two-way fixed-effects ANOVA with interaction over
// obs[template][temperature][replicate].
AnovaResult two_way_anova(const std::vector<std::vector<std::vector<double>>>& obs);

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (absolute tolerance well below 1e-12); exposed for the oracle
// tests of the p-value path.
double regularized_incomplete_beta(double a, double b, double x);

// Survival function of the F distribution: P(F_{d1,d2} > f).
double f_distribution_sf(double f, int d1, int d2);

// Number of distinct operation kinds appearing in a lineage.
int distinct_op_kinds(const std::vector<AppliedOp>& lineage);
int op_kind_for_name(const std::string& name);

// Diversity-based subset pick: template 0 always; at least one template per
// distinct-kind-count group (best |delta| first); remaining slots filled by
// |delta| descending. Returns sorted template indices.
std::vector<int> select_diverse_subset(const std::vector<int>& distinct_kind_counts,
                                       const std::vector<double>& deltas, int count);

}  // namespace promptmut
