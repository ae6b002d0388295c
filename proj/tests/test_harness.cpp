#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fairtopk/harness.hpp"

using namespace fairtopk;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string write_temp(const std::string& name, const std::string& content)
{
    const std::string path = "/tmp/fairtopk_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

// A fast synthetic config: six monthly blocks, three evaluation splits.
ExperimentConfig small_config(const std::string& output_dir)
{
    ExperimentConfig config;
    SyntheticSpec synth;
    synth.n = 1500;
    synth.n_features = 2;
    synth.span_start = {2019, 1, 1};
    synth.span_end = {2019, 7, 1};
    synth.seed = 12;
    config.synthetic = synth;
    config.k = 40;
    config.splits.start = synth.span_start;
    config.splits.end = synth.span_end;
    config.splits.block_months = 1;
    config.splits.min_train_blocks = 2;
    config.grid = GridProfile::Small;
    config.methods = {MethodSpec::parse("original"),
                      MethodSpec::parse("posthoc"),
                      MethodSpec::parse("sampling_1_under")};
    config.output_dir = output_dir;
    return config;
}

}  // namespace

TEST_CASE("generate_synthetic hits its base rates and group mix")
{
    SyntheticSpec spec;
    spec.n = 10000;
    spec.n_features = 2;
    const Dataset d = generate_synthetic(spec);
    REQUIRE(d.records.size() == spec.n);
    CHECK(d.schema.size() == spec.n_features + 1);
    REQUIRE(d.protected_feature_index.has_value());
    CHECK(*d.protected_feature_index == spec.n_features);

    const EmpiricalStats stats = empirical_stats(d);
    const double n_p = static_cast<double>(stats.count(Group::Protected));
    const double n_np = static_cast<double>(stats.count(Group::NonProtected));
    CHECK(std::abs(stats.marginal(Group::Protected) - 0.3) <
          3.0 / std::sqrt(spec.n));
    CHECK(std::abs(*stats.label_rate(Group::Protected) - spec.base_rate_p) <=
          3.0 / std::sqrt(n_p));
    CHECK(std::abs(*stats.label_rate(Group::NonProtected) -
                   spec.base_rate_np) <= 3.0 / std::sqrt(n_np));

    // the appended protected column encodes the group exactly
    for (const auto& r : d.records)
        CHECK(r.features[spec.n_features] ==
              (r.group == Group::Protected ? 1.0 : 0.0));
    // dates stay inside the span
    for (const auto& r : d.records) {
        CHECK(!(r.as_of_time < spec.span_start));
        CHECK(r.as_of_time < spec.span_end);
    }

    // regeneration with the same seed is identical
    const Dataset again = generate_synthetic(spec);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(again.records[i].entity_id == d.records[i].entity_id);
        CHECK(again.records[i].features == d.records[i].features);
        CHECK(again.records[i].label == d.records[i].label);
    }

    SyntheticSpec bad;
    bad.protected_fraction = 0.0;
    CHECK_THROWS(bad.validate());
    bad = SyntheticSpec{};
    bad.base_rate_np = 1.5;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("method names round-trip through parse")
{
    const std::vector<std::string> names = {
        "original",         "no_protected",
        "inprocess",        "posthoc",
        "composite_coupled", "composite_decoupled",
        "composite_single_threshold",
        "sampling_1_under", "sampling_3_over",
        "sampling_6_under", "selection_disparity_A",
        "selection_accuracy_H"};
    for (const auto& name : names)
        CHECK(MethodSpec::parse(name).name() == name);
    CHECK_THROWS(MethodSpec::parse("sampling_7_under"));
    CHECK_THROWS(MethodSpec::parse("sampling_1_sideways"));
    CHECK_THROWS(MethodSpec::parse("selection_disparity_I"));
    CHECK_THROWS(MethodSpec::parse("selection_speed_A"));
    CHECK_THROWS(MethodSpec::parse(""));
    CHECK_THROWS(MethodSpec::parse("unknown_method"));
}

TEST_CASE("configs load from key=value files")
{
    const std::string path = write_temp(
        "config.txt",
        "# comment line\n"
        "data = synthetic\n"
        "synthetic.n = 2000\n"
        "synthetic.seed = 9\n"
        "k = 50\n"
        "start = 2019-01-01\n"
        "end = 2019-07-01\n"
        "block_months = 1\n"
        "min_train_blocks = 2\n"
        "grid = small\n"
        "train_seed = 4\n"
        "methods = original, posthoc, selection_disparity_C\n"
        "output_dir = /tmp/fairtopk_cfg_out\n");
    const ExperimentConfig config = load_config(path);
    REQUIRE(config.synthetic.has_value());
    CHECK(config.synthetic->n == 2000);
    CHECK(config.synthetic->seed == 9);
    CHECK(config.k == 50);
    CHECK(config.splits.block_months == 1);
    CHECK(config.seeds.train == 4);
    REQUIRE(config.methods.size() == 3);
    CHECK(config.methods[2].name() == "selection_disparity_C");
    CHECK(config.output_dir == "/tmp/fairtopk_cfg_out");
    CHECK_NOTHROW(config.validate());

    const std::string bad =
        write_temp("bad_config.txt", "data = synthetic\nnot_a_key = 1\n");
    CHECK_THROWS(load_config(bad));
    CHECK_THROWS(load_config("/tmp/fairtopk_no_such_config.txt"));
}

TEST_CASE("config validation catches contradictions")
{
    ExperimentConfig config = small_config("/tmp/fairtopk_val_out");
    CHECK_NOTHROW(config.validate());
    config.csv_path = "also.csv";  // two data sources
    CHECK_THROWS(config.validate());
    config = small_config("/tmp/fairtopk_val_out");
    config.synthetic.reset();  // none
    CHECK_THROWS(config.validate());
    config = small_config("/tmp/fairtopk_val_out");
    config.k = 0;
    CHECK_THROWS(config.validate());
    config = small_config("/tmp/fairtopk_val_out");
    config.methods.clear();  // legal: the baseline method is added at run time
    CHECK_NOTHROW(config.validate());
    config.output_dir.clear();
    CHECK_THROWS(config.validate());
}

TEST_CASE("a small experiment produces a full, deterministic result set")
{
    const ExperimentConfig config = small_config("/tmp/fairtopk_run_a");
    const ExperimentResults results = run_experiment(config);
    REQUIRE(results.ok());
    // six monthly blocks, two reserved for the first train window:
    // three evaluation splits
    REQUIRE(results.methods.size() == 3);
    for (const auto& m : results.methods) {
        CHECK(m.splits.size() == 3);
        for (const auto& s : m.splits) {
            CHECK(s.precision >= 0.0);
            CHECK(s.precision <= 1.0);
            CHECK(s.disparity > 0.0);
        }
    }
    CHECK_NOTHROW(static_cast<void>(results.method("original")));
    CHECK_NOTHROW(static_cast<void>(results.method("posthoc")));
    CHECK_THROWS(static_cast<void>(results.method("no_such_method")));
    CHECK(!results.grid.empty());

    // the post-hoc quota narrows mean disparity relative to the baseline
    const auto norm = [](double d) { return d >= 1.0 ? d : 1.0 / d; };
    CHECK(norm(results.method("posthoc").disparity_agg.mean) <=
          norm(results.method("original").disparity_agg.mean) + 0.25);

    // the four output files exist and results.csv has one line per
    // (method, split) plus the header
    const std::string results_csv = slurp("/tmp/fairtopk_run_a/results.csv");
    CHECK(static_cast<std::size_t>(
              std::count(results_csv.begin(), results_csv.end(), '\n')) ==
          1 + 3 * 3);
    CHECK(results_csv.rfind("method,split,precision_at_k,recall_p,recall_np,"
                            "disparity\n", 0) == 0);
    slurp("/tmp/fairtopk_run_a/aggregates.csv");
    slurp("/tmp/fairtopk_run_a/grid_results.csv");
    slurp("/tmp/fairtopk_run_a/report.txt");

    // a second run with identical seeds is byte-identical
    ExperimentConfig rerun = small_config("/tmp/fairtopk_run_b");
    const ExperimentResults again = run_experiment(rerun);
    REQUIRE(again.ok());
    CHECK(slurp("/tmp/fairtopk_run_b/results.csv") == results_csv);
    CHECK(slurp("/tmp/fairtopk_run_b/aggregates.csv") ==
          slurp("/tmp/fairtopk_run_a/aggregates.csv"));
}

TEST_CASE("an original method is prepended when missing")
{
    ExperimentConfig config = small_config("/tmp/fairtopk_run_c");
    config.methods = {MethodSpec::parse("posthoc")};
    const ExperimentResults results = run_experiment(config);
    REQUIRE(results.ok());
    REQUIRE(results.methods.size() == 2);
    CHECK(results.methods[0].method == "original");
}

TEST_CASE("the reference config wires the documented defaults")
{
    const ExperimentConfig config = reference_config("/tmp/fairtopk_ref");
    CHECK_NOTHROW(config.validate());
    REQUIRE(config.synthetic.has_value());
    CHECK(config.synthetic->n == 20000);
    CHECK(config.k == 500);
    CHECK(config.splits.block_months == 1);
    CHECK(config.grid == GridProfile::Small);
    CHECK(config.methods.size() >= 8);
    CHECK(config.output_dir == "/tmp/fairtopk_ref");
}
