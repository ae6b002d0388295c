#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairtopk/metrics.hpp"

namespace fairtopk {

// Per-group selection counts replacing a single score threshold; counts
// rather than thresholds so the budget stays fixed when score
// distributions drift between splits.
struct GroupQuota {
    std::size_t k_total = 0;
    std::size_t k_protected = 0;
    std::size_t k_nonprotected = 0;
    double achieved_gap = 0.0;  // |TPR_P - TPR_NP| on the adjustment split
    bool boundary = false;      // minimal gap sat at k_P = 0 or k_P = k
};

// Scores with labels/groups for one split, detached from feature data.
struct ScoredFrame {
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<Group> groups;

    [[nodiscard]] std::size_t size() const { return ids.size(); }
};

ScoredFrame load_scores_csv(const std::string& path,
                            const std::string& protected_token,
                            const std::string& nonprotected_token);
void write_scores_csv(const ScoredFrame& frame, const std::string& path,
                      const std::string& protected_token,
                      const std::string& nonprotected_token);

// Enumerates every split of k across the two groups, taking each group's
// top members by score (seeded ties), and returns the split minimizing
// |TPR_P - TPR_NP|; gap ties prefer higher combined precision, then the
// smaller protected count. All comparisons are exact (integer
// cross-multiplied rationals).
GroupQuota equalize_tpr_quota(const std::vector<double>& scores,
                              const std::vector<std::string>& ids,
                              const std::vector<int>& labels,
                              const std::vector<Group>& groups, std::size_t k,
                              std::uint64_t tie_seed);

// Selects each group's top quota members independently; the union has
// exactly k_total entries. Throws if a group's population is below its
// quota.
TopKSelection apply_quota(const std::vector<double>& scores,
                          const std::vector<std::string>& ids,
                          const std::vector<Group>& groups,
                          const GroupQuota& quota, std::uint64_t tie_seed);

GroupQuota equalize_tpr_quota(const ScoredFrame& frame, std::size_t k,
                              std::uint64_t tie_seed);
TopKSelection apply_quota(const ScoredFrame& frame, const GroupQuota& quota,
                          std::uint64_t tie_seed);

}  // namespace fairtopk
