#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "promptmut/errors.hpp"
#include "promptmut/stats.hpp"

using namespace promptmut;
using doctest::Approx;

namespace {

MetricTable make_table(std::vector<std::vector<double>> values) {
    MetricTable t;
    t.values = std::move(values);
    for (std::size_t i = 0; i < t.values.size(); ++i)
        t.model_ids.push_back("m" + std::to_string(i));
    return t;
}

AppliedOp op_named(const std::string& name) {
    AppliedOp op;
    op.name = name;
    return op;
}

}  // namespace

TEST_CASE("z_score standardizes against the population sigma") {
    CHECK(z_score({2.0, 1.0, 0.0}) == Approx(std::sqrt(1.5)).epsilon(1e-12));
    CHECK(z_score({0.5, 0.5, 0.8}) == Approx(-0.7071067811865475).epsilon(1e-12));
    CHECK(z_score({1.0, 3.0}) == Approx(-1.0).epsilon(1e-12));

    // Affine maps with positive scale leave the score unchanged.
    std::mt19937 gen(42);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> series(6);
        for (double& v : series) v = unif(gen);
        double scale = 0.5 + rep * 0.3;
        double shift = unif(gen) * 10.0;
        std::vector<double> mapped = series;
        for (double& v : mapped) v = scale * v + shift;
        CHECK(z_score(mapped) == Approx(z_score(series)).epsilon(1e-9));
    }

    CHECK_THROWS_AS(z_score({1.0}), DegenerateSeriesError);
    CHECK_THROWS_AS(z_score({0.3, 0.3, 0.3}), DegenerateSeriesError);
}

TEST_CASE("mpi is the best relative improvement over the original") {
    CHECK(mpi({0.5, 0.6, 0.4}) == Approx(0.2).epsilon(1e-12));
    CHECK(mpi({0.5, 0.3, 0.2}) == 0.0);  // nothing beats the original
    CHECK(mpi({0.4}) == 0.0);
    CHECK(mpi({0.25, 0.75}) == Approx(2.0).epsilon(1e-12));

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> series(8);
        for (double& v : series) v = unif(gen);
        CHECK(mpi(series) >= 0.0);
    }

    CHECK_THROWS_AS(mpi({0.0, 0.4}), ZeroBaselineError);
    CHECK_THROWS_AS(mpi({}), DomainError);
}

TEST_CASE("rank_models ranks descending with midranks on ties") {
    MetricTable table = make_table({{0.9, 0.2}, {0.7, 0.8}, {0.9, 0.5}, {0.1, 0.5}});
    RankMatrix ranks = rank_models(table);
    REQUIRE(ranks.models() == 4);
    REQUIRE(ranks.templates() == 2);
    CHECK(ranks.ranks[0][0] == 1.5);  // 0.9 shared by models 0 and 2
    CHECK(ranks.ranks[2][0] == 1.5);
    CHECK(ranks.ranks[1][0] == 3.0);
    CHECK(ranks.ranks[3][0] == 4.0);
    CHECK(ranks.ranks[1][1] == 1.0);
    CHECK(ranks.ranks[2][1] == 2.5);
    CHECK(ranks.ranks[3][1] == 2.5);
    CHECK(ranks.ranks[0][1] == 4.0);

    // Any strictly increasing transform of a column preserves the ranking.
    MetricTable warped = table;
    for (auto& row : warped.values)
        for (double& v : row) v = std::exp(3.0 * v);
    RankMatrix again = rank_models(warped);
    CHECK(again.ranks == ranks.ranks);

    CHECK_THROWS_AS(rank_models(make_table({{0.5, 0.6}})), DomainError);
    CHECK_THROWS_AS(rank_models(make_table({{0.5, 0.6}, {0.5}})), DomainError);
}

TEST_CASE("kendalls_w matches the hand-computed anchor") {
    // Two judges over three objects: ranks (1,2,3) and (1,3,2) give W = 0.75.
    RankMatrix ranks;
    ranks.ranks = {{1.0, 1.0}, {2.0, 3.0}, {3.0, 2.0}};
    AgreementLabel w = kendalls_w(ranks);
    CHECK(w.w == Approx(0.75).epsilon(1e-12));
    CHECK(w.label == "weak-to-moderate");

    RankMatrix agree;
    agree.ranks = {{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
    AgreementLabel full = kendalls_w(agree);
    CHECK(full.w == Approx(1.0).epsilon(1e-12));
    CHECK(full.label == "strong");

    // Midranks: totals (2.5, 3.5, 6) give S = 6.5; the corrected denominator
    // drops from 96 to 84.
    RankMatrix tied;
    tied.ranks = {{1.5, 1.0}, {1.5, 2.0}, {3.0, 3.0}};
    CHECK(kendalls_w(tied).w == Approx(78.0 / 96.0).epsilon(1e-12));
    AgreementLabel corrected = kendalls_w(tied, true);
    CHECK(corrected.w == Approx(78.0 / 84.0).epsilon(1e-12));
    CHECK(corrected.label == "strong");

    RankMatrix one_judge;
    one_judge.ranks = {{1.0}, {2.0}};
    CHECK_THROWS_AS(kendalls_w(one_judge), DomainError);
    RankMatrix one_object;
    one_object.ranks = {{1.0, 1.0}};
    CHECK_THROWS_AS(kendalls_w(one_object), DomainError);
}

TEST_CASE("top_k_iou breaks boundary ties toward the lower template index") {
    MetricTable table = make_table({{0.9, 0.5, 0.5, 0.1}, {0.1, 0.5, 0.5, 0.9}});
    IouResult iou = top_k_iou(table, 2);
    // Sets {0,1} and {3,1}: one shared of three distinct.
    CHECK(iou.pairwise[0][1] == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(iou.pairwise[1][0] == iou.pairwise[0][1]);
    CHECK(iou.pairwise[0][0] == 1.0);
    CHECK(iou.mean == Approx(1.0 / 3.0).epsilon(1e-12));

    // k equal to the pool makes every set identical.
    IouResult all = top_k_iou(table, 4);
    CHECK(all.mean == 1.0);

    MetricTable three = make_table({{0.9, 0.1}, {0.9, 0.1}, {0.1, 0.9}});
    IouResult pairs = top_k_iou(three, 1);
    CHECK(pairs.pairwise[0][1] == 1.0);
    CHECK(pairs.pairwise[0][2] == 0.0);
    CHECK(pairs.pairwise[1][2] == 0.0);
    CHECK(pairs.mean == Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(top_k_iou(table, 0), DomainError);
    CHECK_THROWS_AS(top_k_iou(table, 5), DomainError);
}

TEST_CASE("pearson_r matches anchors and clamps rounding") {
    CHECK(pearson_r({1.0, 2.0, 3.0}, {1.0, 3.0, 2.0}) == Approx(0.5).epsilon(1e-9));
    CHECK(pearson_r({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}) == Approx(1.0).epsilon(1e-12));
    CHECK(pearson_r({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == Approx(-1.0).epsilon(1e-12));
    CHECK(std::fabs(pearson_r({1.0, 2.0, 3.0, 4.0}, {2.0, 4.0, 6.0, 8.0})) <= 1.0);

    CHECK_THROWS_AS(pearson_r({1.0, 2.0}, {1.0}), DimensionMismatchError);
    CHECK_THROWS_AS(pearson_r({1.0}, {1.0}), DomainError);
    CHECK_THROWS_AS(pearson_r({1.0, 1.0}, {1.0, 2.0}), ConstantInputError);
}

TEST_CASE("regularized incomplete beta matches reference values") {
    CHECK(regularized_incomplete_beta(2.0, 3.0, 0.5) == Approx(0.6875).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2.5, 0.5, 0.3) ==
          Approx(0.018927124071945658).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(4.0, 4.0, 0.9) == Approx(0.997272).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(0.5, 0.5, 0.25) ==
          Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);

    // Complement identity and monotonicity in x.
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    std::uniform_real_distribution<double> shape(0.2, 8.0);
    for (int rep = 0; rep < 50; ++rep) {
        double a = shape(gen), b = shape(gen), x = unif(gen);
        CHECK(regularized_incomplete_beta(a, b, x) ==
              Approx(1.0 - regularized_incomplete_beta(b, a, 1.0 - x)).epsilon(1e-10));
        CHECK(regularized_incomplete_beta(a, b, x) <=
              regularized_incomplete_beta(a, b, std::min(1.0, x + 0.01)) + 1e-12);
    }

    CHECK_THROWS_AS(regularized_incomplete_beta(0.0, 1.0, 0.5), DomainError);
    CHECK_THROWS_AS(regularized_incomplete_beta(1.0, -2.0, 0.5), DomainError);
}

TEST_CASE("f_distribution_sf matches reference values") {
    CHECK(f_distribution_sf(2.5, 3, 10) == Approx(0.11903956265827816).epsilon(1e-12));
    CHECK(f_distribution_sf(1.0, 5, 20) == Approx(0.44302518468487956).epsilon(1e-12));
    CHECK(f_distribution_sf(10.0, 2, 7) == Approx(0.008872989457173153).epsilon(1e-12));
    CHECK(f_distribution_sf(0.0, 3, 10) == 1.0);
    CHECK(f_distribution_sf(-2.0, 3, 10) == 1.0);
    CHECK_THROWS_AS(f_distribution_sf(1.0, 0, 10), DomainError);
}

TEST_CASE("two_way_anova reproduces the reference decomposition") {
    SUBCASE("2x2 design with two replicates") {
        std::vector<std::vector<std::vector<double>>> obs = {
            {{1.0, 1.1}, {2.0, 2.2}},
            {{1.5, 1.4}, {2.6, 2.5}},
        };
        AnovaResult res = two_way_anova(obs);
        CHECK(res.df_template == 1);
        CHECK(res.df_temperature == 1);
        CHECK(res.df_interaction == 1);
        CHECK(res.df_error == 4);
        CHECK(res.f_template == Approx(41.28571428571423).epsilon(1e-9));
        CHECK(res.f_temperature == Approx(264.14285714285677).epsilon(1e-9));
        CHECK(res.f_interaction == Approx(0.1428571428571416).epsilon(1e-6));
        CHECK(res.p_template == Approx(0.0030163829306507016).epsilon(1e-6));
        CHECK(res.p_temperature == Approx(8.386701070892417e-05).epsilon(1e-6));
        CHECK(res.p_interaction == Approx(0.724658636496097).epsilon(1e-6));
    }
    SUBCASE("3x2 design with three replicates") {
        std::vector<std::vector<std::vector<double>>> obs = {
            {{0.50, 0.52, 0.49}, {0.61, 0.66, 0.64}},
            {{0.55, 0.57, 0.58}, {0.70, 0.68, 0.72}},
            {{0.42, 0.44, 0.40}, {0.55, 0.51, 0.53}},
        };
        AnovaResult res = two_way_anova(obs);
        CHECK(res.df_template == 2);
        CHECK(res.df_temperature == 1);
        CHECK(res.df_interaction == 2);
        CHECK(res.df_error == 12);
        CHECK(res.f_template == Approx(99.40579710144928).epsilon(1e-9));
        CHECK(res.f_temperature == Approx(185.0579710144929).epsilon(1e-9));
        CHECK(res.f_interaction == Approx(0.7101449275362245).epsilon(1e-9));
        CHECK(res.p_template == Approx(3.401891995029832e-08).epsilon(1e-6));
        CHECK(res.p_temperature == Approx(1.1816435360045103e-08).epsilon(1e-6));
        CHECK(res.p_interaction == Approx(0.5111120271639353).epsilon(1e-6));
    }
    SUBCASE("2x3 design where only the second factor matters") {
        std::vector<std::vector<std::vector<double>>> obs = {
            {{0.30, 0.30}, {0.50, 0.50}, {0.70, 0.70}},
            {{0.31, 0.29}, {0.51, 0.49}, {0.71, 0.69}},
        };
        AnovaResult res = two_way_anova(obs);
        CHECK(res.df_template == 1);
        CHECK(res.df_temperature == 2);
        CHECK(res.df_interaction == 2);
        CHECK(res.df_error == 6);
        CHECK(res.f_temperature == Approx(1599.999999999997).epsilon(1e-9));
        CHECK(res.p_temperature == Approx(6.554856629994515e-09).epsilon(1e-6));
        CHECK(res.f_template < 1e-10);
        CHECK(res.p_template == Approx(1.0).epsilon(1e-12));
        CHECK(res.f_interaction < 1e-10);
        CHECK(res.p_interaction == Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("degenerate and unbalanced designs are refused") {
        std::vector<std::vector<std::vector<double>>> flat = {
            {{0.5, 0.5}, {0.5, 0.5}},
            {{0.5, 0.5}, {0.5, 0.5}},
        };
        CHECK_THROWS_AS(two_way_anova(flat), DegenerateError);

        std::vector<std::vector<std::vector<double>>> ragged = {
            {{1.0, 1.1}, {2.0, 2.2}},
            {{1.5, 1.4}, {2.6}},
        };
        CHECK_THROWS_AS(two_way_anova(ragged), UnbalancedDesignError);
        CHECK_THROWS_AS(two_way_anova({{{1.0, 2.0}, {3.0, 4.0}}}), UnbalancedDesignError);
        std::vector<std::vector<std::vector<double>>> single_rep = {
            {{1.0}, {2.0}},
            {{1.5}, {2.6}},
        };
        CHECK_THROWS_AS(two_way_anova(single_rep), UnbalancedDesignError);
    }
}

TEST_CASE("operation kinds are recovered from lineage names") {
    CHECK(op_kind_for_name("paraphrase_text") == 1);
    CHECK(op_kind_for_name("paraphrase_tag") == 2);
    CHECK(op_kind_for_name("change_tag_case") == 3);
    CHECK(op_kind_for_name("change_format") == 4);
    CHECK(op_kind_for_name("change_delimiter") == 5);
    CHECK_THROWS_AS(op_kind_for_name("swap_sections"), DomainError);

    CHECK(distinct_op_kinds({}) == 0);
    CHECK(distinct_op_kinds({op_named("paraphrase_text"), op_named("paraphrase_text"),
                             op_named("change_delimiter")}) == 2);
    CHECK(distinct_op_kinds({op_named("paraphrase_text"), op_named("paraphrase_tag"),
                             op_named("change_tag_case"), op_named("change_format"),
                             op_named("change_delimiter")}) == 5);
}

TEST_CASE("select_diverse_subset covers every group then fills by delta") {
    std::vector<int> counts = {0, 1, 1, 2, 2, 3};
    std::vector<double> deltas = {0.0, 0.05, -0.30, 0.10, -0.02, 0.01};

    CHECK(select_diverse_subset(counts, deltas, 4) == std::vector<int>{0, 2, 3, 5});
    CHECK(select_diverse_subset(counts, deltas, 5) == std::vector<int>{0, 1, 2, 3, 5});
    CHECK(select_diverse_subset(counts, deltas, 6) == std::vector<int>{0, 1, 2, 3, 4, 5});

    // |delta| ties resolve to the lower template index.
    CHECK(select_diverse_subset({0, 1, 1}, {0.0, -0.2, 0.2}, 2) == std::vector<int>{0, 1});

    CHECK_THROWS_AS(select_diverse_subset(counts, deltas, 3), CountTooSmallError);
    CHECK_THROWS_AS(select_diverse_subset(counts, deltas, 0), DomainError);
    CHECK_THROWS_AS(select_diverse_subset(counts, deltas, 7), DomainError);
    CHECK_THROWS_AS(select_diverse_subset({0, 1}, {0.0}, 1), DomainError);

    // Random pools keep the structural guarantees.
    std::mt19937 gen(11);
    std::uniform_int_distribution<int> kind(1, 5);
    std::uniform_real_distribution<double> delta(-0.5, 0.5);
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t n = 6 + rep % 10;
        std::vector<int> kc(n);
        std::vector<double> dv(n);
        kc[0] = 0;
        dv[0] = 0.0;
        std::set<int> group_ids;
        for (std::size_t i = 1; i < n; ++i) {
            kc[i] = kind(gen);
            dv[i] = delta(gen);
            group_ids.insert(kc[i]);
        }
        int count = static_cast<int>(group_ids.size()) + 1 + rep % 3;
        if (count > static_cast<int>(n)) count = static_cast<int>(n);
        std::vector<int> picked = select_diverse_subset(kc, dv, count);
        CHECK(static_cast<int>(picked.size()) == count);
        CHECK(std::is_sorted(picked.begin(), picked.end()));
        CHECK(picked.front() == 0);
        std::set<int> covered;
        for (int idx : picked)
            if (idx != 0) covered.insert(kc[idx]);
        CHECK(covered == group_ids);
    }
}
