#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairtopk/metrics.hpp"

using namespace fairtopk;

namespace {

std::vector<std::string> make_ids(std::size_t n)
{
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = "e" + std::to_string(i);
    return ids;
}

}  // namespace

TEST_CASE("select_top_k keeps the k highest scores")
{
    const std::vector<std::string> ids = make_ids(5);
    const std::vector<double> scores = {0.1, 0.9, 0.5, 0.8, 0.2};
    const TopKSelection sel = select_top_k(scores, ids, 3, 42);
    CHECK(sel.k == 3);
    CHECK(sel.selected_ids ==
          std::unordered_set<std::string>{"e1", "e2", "e3"});
    // strictly-above-cutoff records are always in
    const TopKSelection one = select_top_k(scores, ids, 1, 0);
    CHECK(one.selected_ids == std::unordered_set<std::string>{"e1"});

    // k >= n selects everyone
    CHECK(select_top_k(scores, ids, 6, 0).selected_ids.size() == 5);
    CHECK_THROWS(select_top_k(scores, ids, 0, 0));
    CHECK_THROWS(select_top_k({0.1, std::nan("")}, make_ids(2), 1, 0));
    CHECK_THROWS(select_top_k({0.1, 0.2, 0.3}, make_ids(2), 1, 0));
}

TEST_CASE("cutoff ties break deterministically per seed")
{
    const std::vector<std::string> ids = make_ids(6);
    const std::vector<double> scores = {0.9, 0.5, 0.5, 0.5, 0.5, 0.1};
    const TopKSelection a = select_top_k(scores, ids, 3, 7);
    const TopKSelection b = select_top_k(scores, ids, 3, 7);
    CHECK(a.selected_ids == b.selected_ids);
    CHECK(a.selected_ids.contains("e0"));
    CHECK(a.selected_ids.size() == 3);
    // a different seed can pick a different tied pair, but some seed must
    bool differs = false;
    for (std::uint64_t s = 0; s < 64 && !differs; ++s)
        differs = select_top_k(scores, ids, 3, s).selected_ids != a.selected_ids;
    CHECK(differs);
}

TEST_CASE("selections are invariant to joint permutations of the input")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng() % 40;
        const std::size_t k = 1 + rng() % n;
        std::vector<std::string> ids = make_ids(n);
        std::vector<double> scores(n);
        for (auto& s : scores)
            s = static_cast<double>(rng() % 8) / 8.0;  // force ties
        const TopKSelection base = select_top_k(scores, ids, k, trial);
        CHECK(base.selected_ids.size() == k);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::string> pids(n);
        std::vector<double> pscores(n);
        for (std::size_t i = 0; i < n; ++i) {
            pids[i] = ids[perm[i]];
            pscores[i] = scores[perm[i]];
        }
        CHECK(select_top_k(pscores, pids, k, trial).selected_ids ==
              base.selected_ids);

        // strictly monotone transforms preserve the ranking and the ties
        std::vector<double> tscores(n);
        for (std::size_t i = 0; i < n; ++i)
            tscores[i] = 3.0 * scores[i] + 1.0;
        CHECK(select_top_k(tscores, ids, k, trial).selected_ids ==
              base.selected_ids);
    }
}

TEST_CASE("precision and group recall on a hand-checked selection")
{
    const std::vector<std::string> ids = make_ids(6);
    const std::vector<double> scores = {0.9, 0.8, 0.7, 0.4, 0.3, 0.2};
    const std::unordered_map<std::string, int> labels = {
        {"e0", 1}, {"e1", 0}, {"e2", 1}, {"e3", 1}, {"e4", 0}, {"e5", 1}};
    const std::unordered_map<std::string, Group> groups = {
        {"e0", Group::Protected},    {"e1", Group::Protected},
        {"e2", Group::NonProtected}, {"e3", Group::Protected},
        {"e4", Group::NonProtected}, {"e5", Group::NonProtected}};
    const TopKSelection sel = select_top_k(scores, ids, 3, 0);
    CHECK(precision_at_k(sel, labels) == doctest::Approx(2.0 / 3.0));
    const GroupRecall r = recall_by_group(sel, labels, groups);
    // protected positives: e0 (in), e3 (out); nonprotected: e2 (in), e5 (out)
    CHECK(*r.protected_tpr == doctest::Approx(0.5));
    CHECK(*r.nonprotected_tpr == doctest::Approx(0.5));
    CHECK(recall_disparity(r.protected_tpr, r.nonprotected_tpr) ==
          doctest::Approx(1.0));
}

TEST_CASE("recall is absent for a group with no positives")
{
    const std::vector<std::string> ids = make_ids(3);
    const std::unordered_map<std::string, int> labels = {
        {"e0", 1}, {"e1", 0}, {"e2", 0}};
    const std::unordered_map<std::string, Group> groups = {
        {"e0", Group::NonProtected},
        {"e1", Group::NonProtected},
        {"e2", Group::Protected}};
    const TopKSelection sel = select_top_k({0.9, 0.5, 0.1}, ids, 2, 0);
    const GroupRecall r = recall_by_group(sel, labels, groups);
    CHECK(!r.protected_tpr.has_value());
    CHECK(*r.nonprotected_tpr == 1.0);
}

TEST_CASE("disparity conventions")
{
    CHECK(recall_disparity(0.5, 0.5) == 1.0);
    CHECK(recall_disparity(0.25, 0.75) == doctest::Approx(3.0));
    CHECK(recall_disparity(0.8, 0.4) == doctest::Approx(0.5));
    CHECK(recall_disparity(0.0, 0.3) == kInfiniteDisparity);
    CHECK(recall_disparity(0.0, 0.0) == 1.0);
    // reciprocal property for finite positive rates
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double a = u(rng);
        const double b = u(rng);
        CHECK(recall_disparity(a, b) ==
              doctest::Approx(1.0 / recall_disparity(b, a)));
    }
}

TEST_CASE("aggregate computes mean, standard error, and the 95% interval")
{
    const Aggregate a = aggregate({0.4, 0.6});
    CHECK(a.mean == doctest::Approx(0.5));
    // sd = 0.1414..., se = 0.1
    CHECK(a.standard_error == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(a.ci_low == doctest::Approx(0.304).epsilon(1e-12));
    CHECK(a.ci_high == doctest::Approx(0.696).epsilon(1e-12));
    CHECK(a.n_finite == 2);
    CHECK(a.n_infinite == 0);

    const Aggregate single = aggregate({0.7});
    CHECK(single.mean == 0.7);
    CHECK(single.standard_error == 0.0);
    CHECK(single.ci_low == 0.7);
    CHECK(single.ci_high == 0.7);

    const Aggregate inf = aggregate({1.0, kInfiniteDisparity, 3.0});
    CHECK(inf.mean == doctest::Approx(2.0));
    CHECK(inf.n_finite == 2);
    CHECK(inf.n_infinite == 1);

    CHECK_THROWS(aggregate({kInfiniteDisparity}));
    CHECK_THROWS(aggregate({}));
}

TEST_CASE("method results aggregate their splits")
{
    MethodResult m;
    m.method = "demo";
    m.splits = {{0, 0.4, 0.5, 0.6, 1.2}, {1, 0.6, 0.7, 0.7, 1.0}};
    m.aggregate_splits();
    CHECK(m.precision_agg.mean == doctest::Approx(0.5));
    CHECK(m.disparity_agg.mean == doctest::Approx(1.1));
    CHECK(m.recall_protected_agg.n_finite == 2);
}
