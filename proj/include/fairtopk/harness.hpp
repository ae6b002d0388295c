#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtopk/dataset.hpp"
#include "fairtopk/learners.hpp"
#include "fairtopk/metrics.hpp"
#include "fairtopk/preprocess.hpp"
#include "fairtopk/selection.hpp"

namespace fairtopk {

// Disparity-inducing synthetic data: per-record features are standard
// normals, labels are Bernoulli(sigmoid(w_g * x0 + offset_g + noise)),
// and each group's offset is calibrated by bisection so empirical base
// rates hit their targets. A weaker protected signal (weight_p <
// weight_np) induces baseline recall disparity. The group is also
// appended as a redundant 0/1 feature column.
struct SyntheticSpec {
    std::size_t n = 20000;
    double protected_fraction = 0.3;
    double base_rate_p = 0.12;
    double base_rate_np = 0.24;
    std::size_t n_features = 4;
    double informative_weight_p = 1.6;
    double informative_weight_np = 2.0;
    double noise_sd = 0.5;
    Date span_start{2019, 1, 1};
    Date span_end{2020, 1, 1};
    std::uint64_t seed = 7;

    void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

enum class MethodKind {
    Original,
    NoProtected,
    Sampling,
    InProcess,
    PostHoc,
    CompositeCoupled,
    CompositeDecoupled,
    CompositeSingleThreshold,
    Selection
};

struct MethodSpec {
    MethodKind kind = MethodKind::Original;
    int sampling_strategy = 1;
    SampleMode sampling_mode = SampleMode::Undersample;
    ConstraintKind constraint_kind = ConstraintKind::Disparity;
    char constraint_level = 'A';

    [[nodiscard]] std::string name() const;
    static MethodSpec parse(const std::string& name);
};

struct Seeds {
    std::uint64_t train = 1;
    std::uint64_t tie = 2;
    std::uint64_t sampling = 3;
};

struct ExperimentConfig {
    // exactly one data source
    std::optional<std::string> csv_path;
    CsvConfig csv;
    std::optional<SyntheticSpec> synthetic;

    std::size_t k = 500;
    TemporalSplitPlan splits;
    GridProfile grid = GridProfile::Small;
    std::vector<MethodSpec> methods;
    Seeds seeds;
    std::string output_dir = "out";

    void validate() const;
};

// Plain-text key=value config; `methods` is a comma-separated list of
// method names like `sampling_3_under` or `selection_disparity_C`.
ExperimentConfig load_config(const std::string& path);

struct ExperimentResults {
    std::vector<MethodResult> methods;
    // per-model summaries on the adjustment splits, averaged across
    // splits; input to the constrained model selection methods
    std::vector<GridEntry> grid;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;  // per-method failures

    [[nodiscard]] bool ok() const { return errors.empty(); }
    [[nodiscard]] const MethodResult& method(const std::string& name) const;
};

// Runs every configured method over the temporal splits and writes
// results.csv, aggregates.csv, grid_results.csv, and report.txt to the
// output directory. Each evaluation split trains on one temporal split's
// train block, computes quotas/selection on that split's validation
// block, and measures on the next split's validation block, so no method
// sees evaluation labels before scoring. Splits fan out to a worker pool
// capped by FAIRTOPK_WORKERS; outputs are deterministic for fixed seeds.
ExperimentResults run_experiment(const ExperimentConfig& config);

// The desk-scale reference setup used by the acceptance checks: the
// default SyntheticSpec, k=500, monthly blocks over 2019 giving five
// evaluation splits, and the small grid.
ExperimentConfig reference_config(const std::string& output_dir);

}  // namespace fairtopk
