#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fairtopk/selection.hpp"

using namespace fairtopk;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GridEntry entry(const std::string& name, double precision, double disparity)
{
    GridEntry e;
    e.name = name;
    e.mean_precision = precision;
    e.mean_disparity = disparity;
    return e;
}

}  // namespace

TEST_CASE("the level ladders are fixed")
{
    CHECK(SelectionConstraint::disparity_levels() ==
          std::vector<double>{5.0, 2.0, 1.5, 1.3, 1.2, 1.1, 1.05, 1.0});
    CHECK(SelectionConstraint::accuracy_levels() ==
          std::vector<double>{0.0, 0.05, 0.10, 0.15, 0.2, 0.25, 0.5, 0.6});
    const SelectionConstraint f =
        SelectionConstraint::at_level(ConstraintKind::Disparity, 'F');
    CHECK(f.level == 'F');
    CHECK(f.value == 1.1);
    const SelectionConstraint a =
        SelectionConstraint::at_level(ConstraintKind::Accuracy, 'A');
    CHECK(a.value == 0.0);
    CHECK_THROWS(SelectionConstraint::at_level(ConstraintKind::Disparity, 'I'));
    CHECK_THROWS(SelectionConstraint::at_level(ConstraintKind::Disparity, 'a'));
}

TEST_CASE("normalized disparity folds both directions onto [1, inf)")
{
    CHECK(entry("m", 0.5, 1.0).normalized_disparity() == 1.0);
    CHECK(entry("m", 0.5, 2.0).normalized_disparity() == 2.0);
    CHECK(entry("m", 0.5, 0.5).normalized_disparity() == doctest::Approx(2.0));
    CHECK(entry("m", 0.5, kInf).normalized_disparity() == kInf);
    CHECK(entry("m", 0.5, 0.0).normalized_disparity() == kInf);
}

TEST_CASE("disparity constraint picks the most precise qualifying model")
{
    const std::vector<GridEntry> grid = {
        entry("m1", 0.50, 1.40),
        entry("m2", 0.45, 1.08),
        entry("m3", 0.40, 1.02),
    };
    const SelectionOutcome f = select_model(
        grid, SelectionConstraint::at_level(ConstraintKind::Disparity, 'F'));
    // cutoff 1.1: m2 and m3 qualify; m2 is more precise
    CHECK(f.index == 1);
    CHECK(f.satisfied);
    CHECK(f.distance == 0.0);

    // cutoff 5.0 admits everything: the most precise model wins
    const SelectionOutcome a = select_model(
        grid, SelectionConstraint::at_level(ConstraintKind::Disparity, 'A'));
    CHECK(a.index == 0);

    // cutoff 1.0 admits nothing: fall back to the closest model
    const SelectionOutcome h = select_model(
        grid, SelectionConstraint::at_level(ConstraintKind::Disparity, 'H'));
    CHECK(h.index == 2);
    CHECK(!h.satisfied);
    CHECK(h.distance == doctest::Approx(0.02));
}

TEST_CASE("the disparity fallback ignores the level value")
{
    const std::vector<GridEntry> grid = {
        entry("m1", 0.40, 1.8),
        entry("m2", 0.36, 1.2),
    };
    SelectionConstraint c;
    c.kind = ConstraintKind::Disparity;
    c.value = 1.1;  // nothing qualifies
    const SelectionOutcome out = select_model(grid, c);
    CHECK(out.index == 1);
    CHECK(!out.satisfied);
    CHECK(out.distance == doctest::Approx(0.1));
}

TEST_CASE("infinite disparity never qualifies and loses fallback ties")
{
    const std::vector<GridEntry> grid = {
        entry("m1", 0.60, kInf),
        entry("m2", 0.20, 3.0),
    };
    SelectionConstraint c;
    c.kind = ConstraintKind::Disparity;
    c.value = 5.0;
    const SelectionOutcome out = select_model(grid, c);
    CHECK(out.index == 1);
    CHECK(out.satisfied);
}

TEST_CASE("accuracy constraint is a hard precision floor")
{
    const std::vector<GridEntry> grid = {
        entry("m1", 0.50, 1.40),
        entry("m2", 0.46, 1.10),
        entry("m3", 0.30, 1.00),
    };
    // tolerate a 0.05 drop from 0.50: m1 and m2 qualify, m2 less disparate
    SelectionConstraint c;
    c.kind = ConstraintKind::Accuracy;
    c.value = 0.05;
    const SelectionOutcome out = select_model(grid, c);
    CHECK(out.index == 1);
    CHECK(out.satisfied);

    // zero tolerance pins the selection to the most precise model
    c.value = 0.0;
    CHECK(select_model(grid, c).index == 0);

    // a huge tolerance frees the least disparate model
    c.value = 0.6;
    CHECK(select_model(grid, c).index == 2);
}

TEST_CASE("singleton grids and ties")
{
    const std::vector<GridEntry> one = {entry("only", 0.4, 2.0)};
    for (ConstraintKind kind :
         {ConstraintKind::Disparity, ConstraintKind::Accuracy}) {
        for (char level = 'A'; level <= 'H'; ++level) {
            const SelectionOutcome out =
                select_model(one, SelectionConstraint::at_level(kind, level));
            CHECK(out.index == 0);
        }
    }
    CHECK(select_original(one) == 0);
    const std::vector<GridEntry> tied = {entry("a", 0.5, 1.5),
                                         entry("b", 0.5, 1.5)};
    CHECK(select_original(tied) == 0);
    CHECK_THROWS(select_model({}, SelectionConstraint{}));
    CHECK_THROWS(select_original({}));
}

TEST_CASE("tightening either ladder moves the trade-off monotonically")
{
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> uprec(0.1, 0.9);
    std::uniform_real_distribution<double> udisp(0.3, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<GridEntry> grid;
        const std::size_t m = 2 + rng() % 10;
        for (std::size_t i = 0; i < m; ++i) {
            double disp = udisp(rng);
            if (rng() % 8 == 0) disp = kInf;
            grid.push_back(
                entry("m" + std::to_string(i), uprec(rng), disp));
        }
        bool any_finite = false;
        for (const auto& e : grid)
            any_finite = any_finite || std::isfinite(e.mean_disparity);
        if (!any_finite) continue;

        double last_precision = kInf;
        double last_norm = kInf;
        for (char level = 'A'; level <= 'H'; ++level) {
            const SelectionOutcome d = select_model(
                grid,
                SelectionConstraint::at_level(ConstraintKind::Disparity, level));
            CHECK(grid[d.index].mean_precision <= last_precision + 1e-12);
            last_precision = grid[d.index].mean_precision;

            const SelectionOutcome a = select_model(
                grid,
                SelectionConstraint::at_level(ConstraintKind::Accuracy, level));
            // a growing tolerance frees ever less disparate models
            CHECK(grid[a.index].normalized_disparity() <= last_norm + 1e-12);
            last_norm = grid[a.index].normalized_disparity();
            // the accuracy floor is hard
            const double best = grid[select_original(grid)].mean_precision;
            CHECK(grid[a.index].mean_precision >=
                  best - SelectionConstraint::accuracy_levels()[static_cast<
                             std::size_t>(level - 'A')] -
                      1e-12);
        }
    }
}

TEST_CASE("grid summaries round-trip through csv including inf")
{
    const std::vector<GridEntry> grid = {
        entry("lr_l2_c1", 0.512345678901234, 1.25),
        entry("dt_d5_s2_gini", 0.4, kInf),
    };
    const std::string path = "/tmp/fairtopk_test_grid.csv";
    write_grid_csv(grid, path);
    const std::vector<GridEntry> back = load_grid_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == grid[0].name);
    CHECK(back[0].mean_precision == grid[0].mean_precision);
    CHECK(back[0].mean_disparity == grid[0].mean_disparity);
    CHECK(back[1].mean_disparity == kInf);
    CHECK_THROWS(load_grid_csv("/tmp/fairtopk_no_such_grid.csv"));
}
