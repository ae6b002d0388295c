#include "fairtopk/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fairtopk {

TopKSelection select_top_k(const std::vector<double>& scores,
                           const std::vector<std::string>& ids, std::size_t k,
                           std::uint64_t tie_seed)
{
    if (k == 0) throw std::invalid_argument("select_top_k: k must be positive");
    if (scores.size() != ids.size())
        throw std::invalid_argument("select_top_k: scores/ids length mismatch");
    for (double s : scores)
        if (!std::isfinite(s))
            throw std::invalid_argument("select_top_k: non-finite score");

    TopKSelection out;
    out.k = k;
    out.tie_seed = tie_seed;
    const std::size_t n = scores.size();
    if (k >= n) {
        out.selected_ids.insert(ids.begin(), ids.end());
        return out;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     order.end(), [&](std::size_t a, std::size_t b) {
                         return scores[a] > scores[b];
                     });
    const double cutoff = scores[order[k - 1]];

    std::vector<std::string> tied;
    std::size_t above = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (scores[i] > cutoff) {
            out.selected_ids.insert(ids[i]);
            ++above;
        } else if (scores[i] == cutoff) {
            tied.push_back(ids[i]);
        }
    }
    // Canonical order before shuffling makes the draw invariant to input
    // permutations.
    std::sort(tied.begin(), tied.end());
    std::mt19937_64 rng(tie_seed);
    std::shuffle(tied.begin(), tied.end(), rng);
    for (std::size_t i = 0; i < k - above; ++i)
        out.selected_ids.insert(tied[i]);
    return out;
}

double precision_at_k(const TopKSelection& selection,
                      const std::unordered_map<std::string, int>& labels)
{
    if (selection.selected_ids.empty())
        throw std::invalid_argument("precision_at_k: empty selection");
    std::int64_t positives = 0;
    for (const auto& id : selection.selected_ids) {
        auto it = labels.find(id);
        if (it == labels.end())
            throw std::invalid_argument("precision_at_k: unlabeled id " + id);
        positives += it->second;
    }
    return static_cast<double>(positives) /
           static_cast<double>(selection.selected_ids.size());
}

GroupRecall recall_by_group(const TopKSelection& selection,
                            const std::unordered_map<std::string, int>& labels,
                            const std::unordered_map<std::string, Group>& groups)
{
    std::array<std::int64_t, 2> total{0, 0};
    std::array<std::int64_t, 2> selected{0, 0};
    for (const auto& [id, label] : labels) {
        if (label != 1) continue;
        auto it = groups.find(id);
        if (it == groups.end())
            throw std::invalid_argument("recall_by_group: id without group " + id);
        const std::size_t g = it->second == Group::Protected ? 0 : 1;
        ++total[g];
        if (selection.selected_ids.contains(id)) ++selected[g];
    }
    GroupRecall out;
    if (total[0] > 0)
        out.protected_tpr =
            static_cast<double>(selected[0]) / static_cast<double>(total[0]);
    if (total[1] > 0)
        out.nonprotected_tpr =
            static_cast<double>(selected[1]) / static_cast<double>(total[1]);
    return out;
}

double recall_disparity(std::optional<double> tpr_protected,
                        std::optional<double> tpr_nonprotected)
{
    if (!tpr_protected || !tpr_nonprotected)
        throw std::invalid_argument("recall_disparity: a TPR is absent");
    const double p = *tpr_protected;
    const double np = *tpr_nonprotected;
    if (p == 0.0 && np == 0.0) return 1.0;
    if (p == 0.0) return kInfiniteDisparity;
    return np / p;
}

Aggregate aggregate(const std::vector<double>& values)
{
    Aggregate out;
    std::vector<double> finite;
    for (double v : values) {
        if (std::isinf(v))
            ++out.n_infinite;
        else
            finite.push_back(v);
    }
    if (finite.empty())
        throw std::invalid_argument("aggregate: no finite values");
    out.n_finite = finite.size();
    const double n = static_cast<double>(finite.size());
    double sum = 0.0;
    for (double v : finite) sum += v;
    out.mean = sum / n;
    if (finite.size() > 1) {
        double ss = 0.0;
        for (double v : finite) ss += (v - out.mean) * (v - out.mean);
        out.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    out.ci_low = out.mean - 1.96 * out.standard_error;
    out.ci_high = out.mean + 1.96 * out.standard_error;
    return out;
}

void MethodResult::aggregate_splits()
{
    std::vector<double> precisions;
    std::vector<double> rp;
    std::vector<double> rnp;
    std::vector<double> disparities;
    for (const auto& s : splits) {
        precisions.push_back(s.precision);
        if (s.recall_protected) rp.push_back(*s.recall_protected);
        if (s.recall_nonprotected) rnp.push_back(*s.recall_nonprotected);
        disparities.push_back(s.disparity);
    }
    precision_agg = aggregate(precisions);
    if (!rp.empty()) recall_protected_agg = aggregate(rp);
    if (!rnp.empty()) recall_nonprotected_agg = aggregate(rnp);
    disparity_agg = aggregate(disparities);
}

}  // namespace fairtopk
