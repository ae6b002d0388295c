#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include "fairtopk/dataset.hpp"

namespace fairtopk {

enum class SampleMode : std::uint8_t { Oversample, Undersample };

// Target distributions for resampling. Unset fields are hard "preserve
// the original distribution" constraints: an unset alpha keeps the
// original group ratio, an unset beta keeps that group's label rate.
struct SamplingTarget {
    std::optional<double> alpha;    // target N'_NonProtected / N'_Protected
    std::optional<double> beta_p;   // target P'(Y=1 | Protected)
    std::optional<double> beta_np;  // target P'(Y=1 | NonProtected)
    SampleMode mode = SampleMode::Undersample;
    std::optional<int> strategy_id;  // 1-6 when built by resolve_strategy
};

// Cell order used throughout: (P,1), (P,0), (NP,1), (NP,0).
using CellCounts = std::array<std::int64_t, 4>;

struct ResampleReport {
    CellCounts before{};
    CellCounts after{};
    std::int64_t duplicated_count = 0;
    std::int64_t removed_count = 0;
};

// Deletes the feature column that encodes group membership. Group tokens
// are retained for evaluation and post-processing. Throws if the dataset
// has no protected_feature_index (including on a second application).
Dataset remove_protected_attribute(const Dataset& dataset);

// The six preset strategies: (ratio P:NP, label dist P, label dist NP) =
//   1: 1:1, original, original     4: original, 50-50, original
//   2: original, 50-50, 50-50      5: 1:1, 50-50, 50-50
//   3: original, same-as-NP, orig  6: 1:1, same-as-NP, original
// The returned target carries the mode passed in.
SamplingTarget resolve_strategy(int strategy_id, const EmpiricalStats& stats,
                                SampleMode mode);

// Resamples so every targeted distribution is achieved within integer
// rounding (each cell within +/-1 of the real-valued optimum) and every
// untargeted distribution is preserved within the same bound, changing
// as few records as possible. Oversampling duplicates uniformly at
// random with replacement; undersampling removes uniformly at random
// without replacement. Deterministic given (dataset, target, seed).
std::pair<Dataset, ResampleReport> resample(const Dataset& dataset,
                                            const SamplingTarget& target,
                                            std::uint64_t seed);

}  // namespace fairtopk
