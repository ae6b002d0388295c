#pragma once

#include <cstdint>
#include <vector>

#include "fairtopk/learners.hpp"
#include "fairtopk/posthoc.hpp"

namespace fairtopk {

enum class CompositeMode { CoupledSelection, DecoupledTraining };
enum class CombineMode { TprQuota, SingleThreshold };

// Outcome of per-group model selection over a candidate list.
struct PerGroupSelection {
    std::size_t protected_index = 0;
    std::size_t nonprotected_index = 0;
    // best pooled model on the pooled top-k; fixes the per-group depths
    std::size_t best_overall_index = 0;
    std::size_t depth_protected = 0;
    std::size_t depth_nonprotected = 0;
};

// One model chosen per group plus the rule for merging their selections.
struct CompositePolicy {
    CompositeMode mode = CompositeMode::CoupledSelection;
    CombineMode combine = CombineMode::TprQuota;
    TrainedModel protected_model;
    TrainedModel nonprotected_model;
};

// Candidate grids for decoupled training: the pooled models plus models
// refit on each group's records alone. A group's candidate list is pooled
// followed by its own models, so index order encodes the tie rule that a
// group-specific model must strictly beat every pooled one to be chosen.
struct DecoupledGrid {
    std::vector<TrainedModel> pooled;
    std::vector<TrainedModel> protected_only;
    std::vector<TrainedModel> nonprotected_only;
};

// Picks each group's candidate by precision among that group's top-n_g
// scored members, where n_g is the group's headcount inside the best
// pooled model's pooled top-k. `candidate_scores[m]` holds candidate m's
// scores aligned with `validation.records`; the first `n_pooled`
// candidates are pooled models and only those compete for best overall.
// Precision ties go to the lower candidate index.
// Optional allow-lists restrict which candidates each group may choose
// (used for decoupled training, where a group cannot pick the other
// group's refit models); null means all candidates are eligible.
PerGroupSelection select_per_group(
    const std::vector<std::vector<double>>& candidate_scores,
    std::size_t n_pooled, const Dataset& validation, std::size_t k,
    std::uint64_t tie_seed,
    const std::vector<std::size_t>* protected_candidates = nullptr,
    const std::vector<std::size_t>* nonprotected_candidates = nullptr);

// Fits every grid spec on the pool and again on each group's records.
// Throws when a group's subset is empty or single-class.
DecoupledGrid train_decoupled(const std::vector<ModelSpec>& grid,
                              const Dataset& train, std::uint64_t seed);

// Scores each record with its group's model.
std::vector<double> score_per_group(const TrainedModel& protected_model,
                                    const TrainedModel& nonprotected_model,
                                    const Dataset& data);

// Merges per-group scores into one top-k selection. TprQuota learns a
// quota on the adjustment frame and applies it to the target scores;
// SingleThreshold pools the raw scores and takes the global top-k even
// though the two models' scales need not be comparable.
TopKSelection combine(CombineMode mode, const ScoredFrame& adjustment,
                      const std::vector<double>& scores,
                      const std::vector<std::string>& ids,
                      const std::vector<Group>& groups, std::size_t k,
                      std::uint64_t tie_seed);

}  // namespace fairtopk
