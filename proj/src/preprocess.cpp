#include "fairtopk/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace fairtopk {

namespace {

constexpr double kTolerance = 1e-9;

CellCounts cell_counts(const EmpiricalStats& stats)
{
    return {stats.positives_protected,
            stats.count_protected - stats.positives_protected,
            stats.positives_nonprotected,
            stats.count_nonprotected - stats.positives_nonprotected};
}

std::size_t cell_of(const Record& rec)
{
    const std::size_t group_offset = rec.group == Group::Protected ? 0 : 2;
    return group_offset + (rec.label == 1 ? 0 : 1);
}

// Integer cell count nearest the real-valued optimum, clamped to the
// mode's monotonicity bound. Exact .5 ties resolve toward the smaller
// total change.
std::int64_t round_cell(double optimum, std::int64_t original, SampleMode mode)
{
    const double frac = optimum - std::floor(optimum);
    std::int64_t c;
    if (std::abs(frac - 0.5) < kTolerance)
        c = mode == SampleMode::Undersample
                ? static_cast<std::int64_t>(std::ceil(optimum))
                : static_cast<std::int64_t>(std::floor(optimum));
    else
        c = static_cast<std::int64_t>(std::floor(optimum + 0.5));
    if (mode == SampleMode::Undersample)
        c = std::min(c, original);
    else
        c = std::max(c, original);
    return std::max<std::int64_t>(c, 0);
}

}  // namespace

Dataset remove_protected_attribute(const Dataset& dataset)
{
    if (!dataset.protected_feature_index)
        throw std::invalid_argument(
            "remove_protected_attribute: protected_feature_index is not set");
    const std::size_t idx = *dataset.protected_feature_index;
    if (idx >= dataset.schema.size())
        throw std::invalid_argument(
            "remove_protected_attribute: index outside schema");

    Dataset out;
    out.protected_token = dataset.protected_token;
    out.nonprotected_token = dataset.nonprotected_token;
    out.schema = dataset.schema;
    out.schema.erase(out.schema.begin() + static_cast<std::ptrdiff_t>(idx));
    out.records.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) {
        Record copy = rec;
        copy.features.erase(copy.features.begin() +
                            static_cast<std::ptrdiff_t>(idx));
        out.records.push_back(std::move(copy));
    }
    return out;
}

SamplingTarget resolve_strategy(int strategy_id, const EmpiricalStats& stats,
                                SampleMode mode)
{
    if (stats.count_protected == 0 || stats.count_nonprotected == 0)
        throw std::invalid_argument("resolve_strategy: both groups required");
    SamplingTarget target;
    target.mode = mode;
    target.strategy_id = strategy_id;
    const double np_rate = *stats.label_rate(Group::NonProtected);
    switch (strategy_id) {
        case 1:
            target.alpha = 1.0;
            break;
        case 2:
            target.beta_p = 0.5;
            target.beta_np = 0.5;
            break;
        case 3:
            target.beta_p = np_rate;
            break;
        case 4:
            target.beta_p = 0.5;
            break;
        case 5:
            target.alpha = 1.0;
            target.beta_p = 0.5;
            target.beta_np = 0.5;
            break;
        case 6:
            target.alpha = 1.0;
            target.beta_p = np_rate;
            break;
        default:
            throw std::invalid_argument("strategy_id outside 1-6: " +
                                        std::to_string(strategy_id));
    }
    return target;
}

std::pair<Dataset, ResampleReport> resample(const Dataset& dataset,
                                            const SamplingTarget& target,
                                            std::uint64_t seed)
{
    if (!target.alpha && !target.beta_p && !target.beta_np)
        throw std::invalid_argument("resample: no target set");
    const EmpiricalStats stats = empirical_stats(dataset);
    if (stats.count_protected == 0 || stats.count_nonprotected == 0)
        throw std::invalid_argument("resample: a group has zero records");

    // Unset targets are preserve constraints at the original values.
    const double beta_p = target.beta_p.value_or(*stats.label_rate(Group::Protected));
    const double beta_np =
        target.beta_np.value_or(*stats.label_rate(Group::NonProtected));
    const double alpha =
        target.alpha.value_or(static_cast<double>(stats.count_nonprotected) /
                              static_cast<double>(stats.count_protected));
    if (alpha <= 0.0)
        throw std::invalid_argument("resample: alpha must be positive");
    for (double beta : {beta_p, beta_np})
        if (beta < 0.0 || beta > 1.0)
            throw std::invalid_argument("resample: beta outside [0,1]");

    // Every achievable distribution is a scaling of the cell vector
    //   a = (beta_p, 1-beta_p, alpha*beta_np, alpha*(1-beta_np))
    // by t = N'_Protected. Oversampling needs every cell to grow to a_i*t,
    // undersampling to shrink, so the real-valued optimum is the extreme
    // feasible t.
    const CellCounts before = cell_counts(stats);
    const std::array<double, 4> coef = {beta_p, 1.0 - beta_p, alpha * beta_np,
                                        alpha * (1.0 - beta_np)};
    const bool over = target.mode == SampleMode::Oversample;
    double t_star = over ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 4; ++i) {
        if (coef[i] <= kTolerance) {
            if (before[i] > 0 && over)
                throw std::runtime_error(
                    "resample: target needs an empty cell that oversampling "
                    "cannot shrink");
            continue;
        }
        if (before[i] == 0)
            throw std::runtime_error(
                "resample: target requires records with a (group,label) the "
                "dataset does not contain");
        const double bound = static_cast<double>(before[i]) / coef[i];
        t_star = over ? std::max(t_star, bound) : std::min(t_star, bound);
    }

    CellCounts after{};
    for (std::size_t i = 0; i < 4; ++i)
        after[i] = coef[i] <= kTolerance && !over
                       ? 0
                       : round_cell(coef[i] * t_star, before[i], target.mode);
    if (after[0] + after[1] == 0 || after[2] + after[3] == 0)
        throw std::runtime_error("resample: target would empty a group");

    // Materialize: keep a random subset per shrinking cell, duplicate
    // random members per growing cell. Cell order is fixed so identical
    // seeds give identical output.
    std::array<std::vector<std::size_t>, 4> members;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        members[cell_of(dataset.records[i])].push_back(i);

    std::mt19937_64 rng(seed);
    ResampleReport report;
    report.before = before;
    report.after = after;

    Dataset out;
    out.schema = dataset.schema;
    out.protected_token = dataset.protected_token;
    out.nonprotected_token = dataset.nonprotected_token;
    out.protected_feature_index = dataset.protected_feature_index;

    std::vector<char> keep(dataset.records.size(), 1);
    std::vector<std::size_t> extra;
    for (std::size_t cell = 0; cell < 4; ++cell) {
        auto& idx = members[cell];
        const std::int64_t want = after[cell];
        const std::int64_t have = before[cell];
        if (want < have) {
            // partial Fisher-Yates: the first `want` entries are a uniform
            // sample without replacement
            for (std::int64_t j = 0; j < want; ++j) {
                std::uniform_int_distribution<std::size_t> pick(
                    static_cast<std::size_t>(j), idx.size() - 1);
                std::swap(idx[static_cast<std::size_t>(j)], idx[pick(rng)]);
            }
            for (std::size_t j = static_cast<std::size_t>(want); j < idx.size(); ++j)
                keep[idx[j]] = 0;
            report.removed_count += have - want;
        } else if (want > have) {
            std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
            for (std::int64_t j = 0; j < want - have; ++j)
                extra.push_back(idx[pick(rng)]);
            report.duplicated_count += want - have;
        }
    }
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        if (keep[i]) out.records.push_back(dataset.records[i]);
    for (std::size_t i : extra) out.records.push_back(dataset.records[i]);
    return {std::move(out), report};
}

}  // namespace fairtopk
