#include "fairtopk/composite.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace fairtopk {

namespace {

std::size_t group_slot(Group g) { return g == Group::Protected ? 0 : 1; }

// Positives inside a group's top-`depth` members under one candidate's
// scores; `depth` is fixed per group, so comparing counts compares
// precisions.
std::int64_t group_top_positives(const std::vector<double>& scores,
                                 const Dataset& validation, Group group,
                                 std::size_t depth, std::uint64_t tie_seed)
{
    std::vector<double> gscores;
    std::vector<std::string> gids;
    std::unordered_map<std::string, int> glabels;
    for (std::size_t i = 0; i < validation.records.size(); ++i) {
        const auto& rec = validation.records[i];
        if (rec.group != group) continue;
        gscores.push_back(scores[i]);
        gids.push_back(rec.entity_id);
        glabels.emplace(rec.entity_id, rec.label);
    }
    TopKSelection sel = select_top_k(gscores, gids, depth, tie_seed);
    std::int64_t positives = 0;
    for (const auto& id : sel.selected_ids) positives += glabels.at(id);
    return positives;
}

}  // namespace

PerGroupSelection select_per_group(
    const std::vector<std::vector<double>>& candidate_scores,
    std::size_t n_pooled, const Dataset& validation, std::size_t k,
    std::uint64_t tie_seed,
    const std::vector<std::size_t>* protected_candidates,
    const std::vector<std::size_t>* nonprotected_candidates)
{
    if (candidate_scores.empty())
        throw std::invalid_argument("select_per_group: no candidates");
    if (n_pooled == 0 || n_pooled > candidate_scores.size())
        throw std::invalid_argument("select_per_group: bad pooled count");
    const std::size_t n = validation.records.size();
    for (const auto& s : candidate_scores)
        if (s.size() != n)
            throw std::invalid_argument(
                "select_per_group: candidate scores not aligned with the "
                "validation records");
    if (k == 0 || k > n)
        throw std::invalid_argument("select_per_group: k out of range");

    std::array<std::int64_t, 2> group_positives{0, 0};
    std::array<std::int64_t, 2> group_count{0, 0};
    std::vector<std::string> ids;
    std::unordered_map<std::string, int> labels;
    std::unordered_map<std::string, Group> groups;
    ids.reserve(n);
    for (const auto& rec : validation.records) {
        ids.push_back(rec.entity_id);
        labels.emplace(rec.entity_id, rec.label);
        groups.emplace(rec.entity_id, rec.group);
        ++group_count[group_slot(rec.group)];
        if (rec.label == 1) ++group_positives[group_slot(rec.group)];
    }
    if (group_count[0] == 0 || group_count[1] == 0)
        throw std::invalid_argument(
            "select_per_group: a group is absent from the validation split");
    if (group_positives[0] == 0 || group_positives[1] == 0)
        throw std::invalid_argument(
            "select_per_group: a group has no validation positives");

    PerGroupSelection out;
    double best_precision = -1.0;
    TopKSelection best_selection;
    for (std::size_t m = 0; m < n_pooled; ++m) {
        TopKSelection sel = select_top_k(candidate_scores[m], ids, k, tie_seed);
        const double prec = precision_at_k(sel, labels);
        if (prec > best_precision) {
            best_precision = prec;
            out.best_overall_index = m;
            best_selection = std::move(sel);
        }
    }
    for (const auto& id : best_selection.selected_ids) {
        if (groups.at(id) == Group::Protected)
            ++out.depth_protected;
        else
            ++out.depth_nonprotected;
    }

    std::vector<std::size_t> all(candidate_scores.size());
    for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
    const std::array<const std::vector<std::size_t>*, 2> allowed{
        protected_candidates != nullptr ? protected_candidates : &all,
        nonprotected_candidates != nullptr ? nonprotected_candidates : &all};
    const std::array<std::size_t, 2> depths{out.depth_protected,
                                            out.depth_nonprotected};
    const std::array<Group, 2> gs{Group::Protected, Group::NonProtected};
    std::array<std::size_t, 2> choice{out.best_overall_index,
                                      out.best_overall_index};
    for (std::size_t g = 0; g < 2; ++g) {
        // a group entirely outside the pooled top-k keeps the pooled best
        if (depths[g] == 0) continue;
        std::int64_t best = -1;
        for (std::size_t m : *allowed[g]) {
            if (m >= candidate_scores.size())
                throw std::invalid_argument(
                    "select_per_group: candidate index out of range");
            const std::int64_t positives = group_top_positives(
                candidate_scores[m], validation, gs[g], depths[g], tie_seed);
            if (positives > best) {
                best = positives;
                choice[g] = m;
            }
        }
    }
    out.protected_index = choice[0];
    out.nonprotected_index = choice[1];
    return out;
}

DecoupledGrid train_decoupled(const std::vector<ModelSpec>& grid,
                              const Dataset& pool, std::uint64_t seed)
{
    if (grid.empty())
        throw std::invalid_argument("train_decoupled: empty grid");
    std::array<Dataset, 2> subsets;
    for (auto& s : subsets) {
        s.schema = pool.schema;
        s.protected_token = pool.protected_token;
        s.nonprotected_token = pool.nonprotected_token;
        s.protected_feature_index = pool.protected_feature_index;
    }
    for (const auto& rec : pool.records)
        subsets[group_slot(rec.group)].records.push_back(rec);
    if (subsets[0].records.empty() || subsets[1].records.empty())
        throw std::invalid_argument(
            "train_decoupled: a group has no training records");

    const std::uint64_t stride = grid.size();
    DecoupledGrid out;
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.pooled.push_back(train(grid[i], pool, derive_seed(seed, i)));
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.protected_only.push_back(
            train(grid[i], subsets[0], derive_seed(seed, stride + i)));
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.nonprotected_only.push_back(
            train(grid[i], subsets[1], derive_seed(seed, 2 * stride + i)));
    return out;
}

std::vector<double> score_per_group(const TrainedModel& protected_model,
                                    const TrainedModel& nonprotected_model,
                                    const Dataset& data)
{
    std::vector<double> out;
    out.reserve(data.records.size());
    for (const auto& rec : data.records) {
        const TrainedModel& model = rec.group == Group::Protected
                                        ? protected_model
                                        : nonprotected_model;
        out.push_back(score_one(model, rec.features));
    }
    return out;
}

TopKSelection combine(CombineMode mode, const ScoredFrame& adjustment,
                      const std::vector<double>& scores,
                      const std::vector<std::string>& ids,
                      const std::vector<Group>& groups, std::size_t k,
                      std::uint64_t tie_seed)
{
    if (mode == CombineMode::SingleThreshold)
        return select_top_k(scores, ids, k, tie_seed);
    const GroupQuota quota = equalize_tpr_quota(adjustment, k, tie_seed);
    return apply_quota(scores, ids, groups, quota, tie_seed);
}

}  // namespace fairtopk
