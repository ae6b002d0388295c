#include "fairtopk/posthoc.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairtopk {

namespace {

struct GroupView {
    std::vector<double> scores;
    std::vector<std::string> ids;
    std::vector<std::size_t> rows;  // indices into the full frame
};

std::array<GroupView, 2> split_by_group(const std::vector<double>& scores,
                                        const std::vector<std::string>& ids,
                                        const std::vector<Group>& groups)
{
    if (scores.size() != ids.size() || scores.size() != groups.size())
        throw std::invalid_argument("posthoc: scores/ids/groups length mismatch");
    std::array<GroupView, 2> views;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        GroupView& v = views[groups[i] == Group::Protected ? 0 : 1];
        v.scores.push_back(scores[i]);
        v.ids.push_back(ids[i]);
        v.rows.push_back(i);
    }
    return views;
}

// Number of selected positives when taking the group's top `depth` members.
std::int64_t selected_positives(const GroupView& view,
                                const std::vector<int>& labels,
                                std::size_t depth, std::uint64_t tie_seed)
{
    if (depth == 0) return 0;
    TopKSelection sel = select_top_k(view.scores, view.ids, depth, tie_seed);
    std::int64_t count = 0;
    for (std::size_t i = 0; i < view.rows.size(); ++i)
        if (labels[view.rows[i]] == 1 && sel.selected_ids.contains(view.ids[i]))
            ++count;
    return count;
}

}  // namespace

GroupQuota equalize_tpr_quota(const std::vector<double>& scores,
                              const std::vector<std::string>& ids,
                              const std::vector<int>& labels,
                              const std::vector<Group>& groups, std::size_t k,
                              std::uint64_t tie_seed)
{
    if (labels.size() != scores.size())
        throw std::invalid_argument("equalize_tpr_quota: labels length mismatch");
    if (k == 0)
        throw std::invalid_argument("equalize_tpr_quota: k must be positive");
    if (k > scores.size())
        throw std::invalid_argument(
            "equalize_tpr_quota: k exceeds the population size");

    const auto views = split_by_group(scores, ids, groups);
    std::array<std::int64_t, 2> positives{0, 0};
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) ++positives[groups[i] == Group::Protected ? 0 : 1];
    if (positives[0] == 0 || positives[1] == 0)
        throw std::invalid_argument(
            "equalize_tpr_quota: a group has no positive examples");

    const std::size_t n_p = views[0].rows.size();
    const std::size_t n_np = views[1].rows.size();
    const std::size_t lo = k > n_np ? k - n_np : 0;
    const std::size_t hi = std::min(k, n_p);

    // Exact comparisons: gaps and precisions share fixed denominators, so
    // only integer numerators are compared.
    bool have_best = false;
    std::size_t best_kp = 0;
    std::int64_t best_gap_num = 0;
    std::int64_t best_prec_num = 0;
    std::int64_t best_sel_p = 0;
    std::int64_t best_sel_np = 0;
    for (std::size_t kp = lo; kp <= hi; ++kp) {
        const std::int64_t sel_p =
            selected_positives(views[0], labels, kp, tie_seed);
        const std::int64_t sel_np =
            selected_positives(views[1], labels, k - kp, tie_seed);
        const std::int64_t gap_num =
            std::abs(sel_p * positives[1] - sel_np * positives[0]);
        const std::int64_t prec_num = sel_p + sel_np;
        const bool better =
            !have_best || gap_num < best_gap_num ||
            (gap_num == best_gap_num &&
             (prec_num > best_prec_num ||
              (prec_num == best_prec_num && kp < best_kp)));
        if (better) {
            have_best = true;
            best_kp = kp;
            best_gap_num = gap_num;
            best_prec_num = prec_num;
            best_sel_p = sel_p;
            best_sel_np = sel_np;
        }
    }
    (void)best_sel_p;
    (void)best_sel_np;

    GroupQuota quota;
    quota.k_total = k;
    quota.k_protected = best_kp;
    quota.k_nonprotected = k - best_kp;
    quota.achieved_gap = static_cast<double>(best_gap_num) /
                         static_cast<double>(positives[0] * positives[1]);
    quota.boundary = best_kp == lo || best_kp == hi;
    return quota;
}

TopKSelection apply_quota(const std::vector<double>& scores,
                          const std::vector<std::string>& ids,
                          const std::vector<Group>& groups,
                          const GroupQuota& quota, std::uint64_t tie_seed)
{
    if (quota.k_protected + quota.k_nonprotected != quota.k_total)
        throw std::invalid_argument("apply_quota: quota counts do not sum to k");
    if (quota.k_total == 0)
        throw std::invalid_argument("apply_quota: k must be positive");
    const auto views = split_by_group(scores, ids, groups);
    const std::array<std::size_t, 2> want{quota.k_protected,
                                          quota.k_nonprotected};
    TopKSelection out;
    out.k = quota.k_total;
    out.tie_seed = tie_seed;
    for (std::size_t g = 0; g < 2; ++g) {
        if (want[g] == 0) continue;
        if (want[g] > views[g].rows.size())
            throw std::invalid_argument(
                "apply_quota: quota exceeds the group population");
        TopKSelection part =
            select_top_k(views[g].scores, views[g].ids, want[g], tie_seed);
        out.selected_ids.insert(part.selected_ids.begin(),
                                part.selected_ids.end());
    }
    return out;
}

GroupQuota equalize_tpr_quota(const ScoredFrame& frame, std::size_t k,
                              std::uint64_t tie_seed)
{
    return equalize_tpr_quota(frame.scores, frame.ids, frame.labels,
                              frame.groups, k, tie_seed);
}

TopKSelection apply_quota(const ScoredFrame& frame, const GroupQuota& quota,
                          std::uint64_t tie_seed)
{
    return apply_quota(frame.scores, frame.ids, frame.groups, quota, tie_seed);
}

ScoredFrame load_scores_csv(const std::string& path,
                            const std::string& protected_token,
                            const std::string& nonprotected_token)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scores file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty scores file: " + path);
    ScoredFrame frame;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, score_s, label_s, group_s;
        if (!std::getline(ss, id, ',') || !std::getline(ss, score_s, ',') ||
            !std::getline(ss, label_s, ',') || !std::getline(ss, group_s))
            throw std::runtime_error("malformed scores row " +
                                     std::to_string(row) + " in " + path);
        char* end = nullptr;
        const double score = std::strtod(score_s.c_str(), &end);
        if (end == score_s.c_str() || *end != '\0')
            throw std::runtime_error("non-numeric score at row " +
                                     std::to_string(row) + " in " + path);
        int label;
        if (label_s == "0")
            label = 0;
        else if (label_s == "1")
            label = 1;
        else
            throw std::runtime_error("label outside {0,1} at row " +
                                     std::to_string(row) + " in " + path);
        Group group;
        if (group_s == protected_token)
            group = Group::Protected;
        else if (group_s == nonprotected_token)
            group = Group::NonProtected;
        else
            throw std::runtime_error("unknown group token '" + group_s +
                                     "' at row " + std::to_string(row) +
                                     " in " + path);
        frame.ids.push_back(std::move(id));
        frame.scores.push_back(score);
        frame.labels.push_back(label);
        frame.groups.push_back(group);
    }
    return frame;
}

void write_scores_csv(const ScoredFrame& frame, const std::string& path,
                      const std::string& protected_token,
                      const std::string& nonprotected_token)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scores file: " + path);
    out << "entity_id,score,label,group\n";
    char buf[64];
    for (std::size_t i = 0; i < frame.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", frame.scores[i]);
        out << frame.ids[i] << ',' << buf << ',' << frame.labels[i] << ','
            << (frame.groups[i] == Group::Protected ? protected_token
                                                    : nonprotected_token)
            << '\n';
    }
}

}  // namespace fairtopk
