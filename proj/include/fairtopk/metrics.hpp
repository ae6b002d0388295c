#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairtopk/dataset.hpp"

namespace fairtopk {

struct TopKSelection {
    std::size_t k = 0;
    std::unordered_set<std::string> selected_ids;
    std::uint64_t tie_seed = 0;
};

// The k highest scores; ties at the cutoff score are broken uniformly at
// random, seeded canonically over the sorted tied ids so joint
// permutations of the input leave the selection unchanged.
TopKSelection select_top_k(const std::vector<double>& scores,
                           const std::vector<std::string>& ids, std::size_t k,
                           std::uint64_t tie_seed);

double precision_at_k(const TopKSelection& selection,
                      const std::unordered_map<std::string, int>& labels);

struct GroupRecall {
    std::optional<double> protected_tpr;
    std::optional<double> nonprotected_tpr;

    [[nodiscard]] std::optional<double> tpr(Group g) const
    {
        return g == Group::Protected ? protected_tpr : nonprotected_tpr;
    }
};

GroupRecall recall_by_group(const TopKSelection& selection,
                            const std::unordered_map<std::string, int>& labels,
                            const std::unordered_map<std::string, Group>& groups);

inline constexpr double kInfiniteDisparity =
    std::numeric_limits<double>::infinity();

// TPR_nonprotected / TPR_protected. 1.0 is parity; +inf when the
// protected group's positives go entirely unselected while the
// non-protected group's do not; 1.0 when both TPRs are zero.
double recall_disparity(std::optional<double> tpr_protected,
                        std::optional<double> tpr_nonprotected);

struct Aggregate {
    double mean = 0.0;
    double standard_error = 0.0;  // sample sd (n-1) / sqrt(n); 0 when n=1
    double ci_low = 0.0;          // mean -/+ 1.96 * standard_error
    double ci_high = 0.0;
    std::size_t n_finite = 0;
    std::size_t n_infinite = 0;  // +inf sentinels, excluded from the mean
};

Aggregate aggregate(const std::vector<double>& values);

struct SplitResult {
    std::size_t split_index = 0;
    double precision = 0.0;
    std::optional<double> recall_protected;
    std::optional<double> recall_nonprotected;
    double disparity = 1.0;  // may be kInfiniteDisparity
};

struct MethodResult {
    std::string method;
    std::vector<SplitResult> splits;
    Aggregate precision_agg;
    Aggregate recall_protected_agg;
    Aggregate recall_nonprotected_agg;
    Aggregate disparity_agg;

    void aggregate_splits();
};

}  // namespace fairtopk
