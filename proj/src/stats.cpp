#include "promptmut/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "promptmut/errors.hpp"

namespace promptmut {

double z_score(const std::vector<double>& series) {
    std::size_t n = series.size();
    if (n < 2) throw DegenerateSeriesError("z-score needs at least two values");
    double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : series) ss += (x - mean) * (x - mean);
    double sigma = std::sqrt(ss / static_cast<double>(n));
    if (sigma == 0.0) throw DegenerateSeriesError("series is constant; sigma is zero");
    return (series[0] - mean) / sigma;
}

double mpi(const std::vector<double>& series) {
    if (series.empty()) throw DomainError("mpi needs a non-empty series");
    double x0 = series[0];
    if (x0 == 0.0) throw ZeroBaselineError("mpi is undefined at a zero baseline");
    double best = 0.0;  // i = 0 contributes exactly 0
    for (double x : series) best = std::max(best, (x - x0) / x0);
    return best;
}

RankMatrix rank_models(const MetricTable& table) {
    std::size_t n = table.models();
    if (n < 2) throw DomainError("ranking needs at least two models");
    std::size_t m = table.templates();
    for (const auto& row : table.values) {
        if (row.size() != m) throw DomainError("metric table must be rectangular");
    }

    RankMatrix out;
    out.ranks.assign(n, std::vector<double>(m, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return table.values[a][j] > table.values[b][j];
        });
        std::size_t i = 0;
        while (i < n) {
            std::size_t run = i;
            while (run + 1 < n &&
                   table.values[order[run + 1]][j] == table.values[order[i]][j])
                ++run;
            // Positions i..run (0-based) share the midrank of ranks i+1..run+1.
            double midrank = (static_cast<double>(i + 1) + static_cast<double>(run + 1)) / 2.0;
            for (std::size_t p = i; p <= run; ++p) out.ranks[order[p]][j] = midrank;
            i = run + 1;
        }
    }
    return out;
}

AgreementLabel kendalls_w(const RankMatrix& ranks, bool tie_corrected) {
    std::size_t n = ranks.models();
    std::size_t m = ranks.templates();
    if (n < 2) throw DomainError("Kendall's W needs at least two objects");
    if (m < 2) throw DomainError("Kendall's W needs at least two judges");

    std::vector<double> totals(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) totals[i] += ranks.ranks[i][j];
    double mean_total = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(n);
    double s = 0.0;
    for (double t : totals) s += (t - mean_total) * (t - mean_total);

    double md = static_cast<double>(m);
    double nd = static_cast<double>(n);
    double denom = md * md * (nd * nd * nd - nd);
    if (tie_corrected) {
        double tie_sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            std::map<double, int> groups;
            for (std::size_t i = 0; i < n; ++i) groups[ranks.ranks[i][j]]++;
            for (const auto& [rank, t] : groups) {
                double td = t;
                tie_sum += td * td * td - td;
            }
        }
        denom -= md * tie_sum;
    }

    AgreementLabel out;
    out.w = denom > 0.0 ? 12.0 * s / denom : 0.0;
    out.label = out.w >= 0.85 ? "strong" : "weak-to-moderate";
    return out;
}

namespace {

// Indices of a model's k best templates, boundary ties to the lower index.
std::set<int> top_k_set(const std::vector<double>& values, int k) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    return std::set<int>(order.begin(), order.begin() + k);
}

}  // namespace

IouResult top_k_iou(const MetricTable& table, int k) {
    std::size_t n = table.models();
    std::size_t m = table.templates();
    if (k < 1 || static_cast<std::size_t>(k) > m)
        throw DomainError("top-k requires 1 <= k <= number of templates");
    for (const auto& row : table.values) {
        if (row.size() != m) throw DomainError("metric table must be rectangular");
    }

    std::vector<std::set<int>> sets;
    sets.reserve(n);
    for (const auto& row : table.values) sets.push_back(top_k_set(row, k));

    IouResult out;
    out.pairwise.assign(n, std::vector<double>(n, 1.0));
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::vector<int> both;
            std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                                  std::back_inserter(both));
            double inter = static_cast<double>(both.size());
            double uni = static_cast<double>(sets[i].size() + sets[j].size()) - inter;
            double iou = uni > 0.0 ? inter / uni : 1.0;
            out.pairwise[i][j] = out.pairwise[j][i] = iou;
            total += iou;
            ++pairs;
        }
    }
    out.mean = pairs ? total / static_cast<double>(pairs) : 1.0;
    return out;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw DimensionMismatchError("pearson_r needs vectors of equal length");
    if (x.size() < 2) throw DomainError("pearson_r needs at least two points");
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ConstantInputError("pearson_r inputs must be nonconstant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    const int max_iter = 500;
    const double eps = 1e-16;
    const double tiny = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    return h;  // converged to working precision in practice long before this
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DomainError("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_distribution_sf(double f, int d1, int d2) {
    if (d1 < 1 || d2 < 1) throw DomainError("F distribution needs positive degrees of freedom");
    if (f <= 0.0) return 1.0;
    double x = static_cast<double>(d2) / (d2 + static_cast<double>(d1) * f);
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, x);
}

AnovaResult two_way_anova(const std::vector<std::vector<std::vector<double>>>& obs) {
    std::size_t a = obs.size();
    if (a < 2) throw UnbalancedDesignError("factor A needs at least two levels");
    std::size_t b = obs[0].size();
    if (b < 2) throw UnbalancedDesignError("factor B needs at least two levels");
    std::size_t r = obs[0].empty() ? 0 : obs[0][0].size();
    if (r < 2) throw UnbalancedDesignError("each cell needs at least two replicates");
    for (const auto& row : obs) {
        if (row.size() != b) throw UnbalancedDesignError("ragged factor B levels");
        for (const auto& cell : row) {
            if (cell.size() != r) throw UnbalancedDesignError("ragged replicate counts");
        }
    }

    double ad = static_cast<double>(a), bd = static_cast<double>(b), rd = static_cast<double>(r);
    double grand = 0.0;
    std::vector<std::vector<double>> cell(a, std::vector<double>(b, 0.0));
    std::vector<double> row_mean(a, 0.0), col_mean(b, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            for (double x : obs[i][j]) cell[i][j] += x;
            cell[i][j] /= rd;
            row_mean[i] += cell[i][j];
            col_mean[j] += cell[i][j];
            grand += cell[i][j];
        }
        row_mean[i] /= bd;
    }
    for (std::size_t j = 0; j < b; ++j) col_mean[j] /= ad;
    grand /= ad * bd;

    double ss_a = 0.0, ss_b = 0.0, ss_ab = 0.0, ss_e = 0.0;
    for (std::size_t i = 0; i < a; ++i) ss_a += (row_mean[i] - grand) * (row_mean[i] - grand);
    ss_a *= bd * rd;
    for (std::size_t j = 0; j < b; ++j) ss_b += (col_mean[j] - grand) * (col_mean[j] - grand);
    ss_b *= ad * rd;
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            double dev = cell[i][j] - row_mean[i] - col_mean[j] + grand;
            ss_ab += dev * dev;
            for (double x : obs[i][j]) ss_e += (x - cell[i][j]) * (x - cell[i][j]);
        }
    }
    ss_ab *= rd;

    AnovaResult res;
    res.df_template = static_cast<int>(a) - 1;
    res.df_temperature = static_cast<int>(b) - 1;
    res.df_interaction = res.df_template * res.df_temperature;
    res.df_error = static_cast<int>(a * b * (r - 1));

    double ms_e = ss_e / res.df_error;
    if (ms_e == 0.0) throw DegenerateError("zero error variance; F statistics are undefined");
    res.f_template = (ss_a / res.df_template) / ms_e;
    res.f_temperature = (ss_b / res.df_temperature) / ms_e;
    res.f_interaction = (ss_ab / res.df_interaction) / ms_e;
    res.p_template = f_distribution_sf(res.f_template, res.df_template, res.df_error);
    res.p_temperature = f_distribution_sf(res.f_temperature, res.df_temperature, res.df_error);
    res.p_interaction = f_distribution_sf(res.f_interaction, res.df_interaction, res.df_error);
    return res;
}

int op_kind_for_name(const std::string& name) {
    if (name == "paraphrase_text") return 1;
    if (name == "paraphrase_tag") return 2;
    if (name == "change_tag_case") return 3;
    if (name == "change_format") return 4;
    if (name == "change_delimiter") return 5;
    throw DomainError("unknown operation name " + name);
}

int distinct_op_kinds(const std::vector<AppliedOp>& lineage) {
    std::set<int> kinds;
    for (const AppliedOp& op : lineage) kinds.insert(op_kind_for_name(op.name));
    return static_cast<int>(kinds.size());
}

std::vector<int> select_diverse_subset(const std::vector<int>& distinct_kind_counts,
                                       const std::vector<double>& deltas, int count) {
    std::size_t n = distinct_kind_counts.size();
    if (n == 0 || deltas.size() != n)
        throw DomainError("subset selection needs aligned kind counts and deltas");
    if (count < 1 || static_cast<std::size_t>(count) > n)
        throw DomainError("subset count must be within the pool size");

    // Groups are formed over the mutants; the original is a mandatory extra.
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 1; i < n; ++i) groups[distinct_kind_counts[i]].push_back(i);
    if (count < static_cast<int>(groups.size()) + 1)
        throw CountTooSmallError("count " + std::to_string(count) + " cannot cover " +
                                 std::to_string(groups.size()) + " groups plus the original");

    auto by_delta = [&](int x, int y) {
        double dx = std::fabs(deltas[x]), dy = std::fabs(deltas[y]);
        if (dx != dy) return dx > dy;
        return x < y;
    };

    std::set<int> selected = {0};
    for (auto& [kinds, members] : groups) {
        std::sort(members.begin(), members.end(), by_delta);
        selected.insert(members.front());
    }
    std::vector<int> rest;
    for (std::size_t i = 0; i < n; ++i)
        if (!selected.count(static_cast<int>(i))) rest.push_back(static_cast<int>(i));
    std::sort(rest.begin(), rest.end(), by_delta);
    for (int idx : rest) {
        if (static_cast<int>(selected.size()) >= count) break;
        selected.insert(idx);
    }
    return std::vector<int>(selected.begin(), selected.end());
}

}  // namespace promptmut
