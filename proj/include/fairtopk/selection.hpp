#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fairtopk {

enum class ConstraintKind { Disparity, Accuracy };

// Lettered constraint levels, A (loosest) through H (tightest for
// disparity, loosest-to-tightest reversed for accuracy where the value is
// the tolerated precision drop from the grid's best model).
struct SelectionConstraint {
    ConstraintKind kind = ConstraintKind::Disparity;
    char level = 'A';
    double value = 0.0;

    static SelectionConstraint at_level(ConstraintKind kind, char level);
    static const std::vector<double>& disparity_levels();
    static const std::vector<double>& accuracy_levels();
};

// One grid model's validation summary used for selection.
struct GridEntry {
    std::string name;
    double mean_precision = 0.0;
    double mean_disparity = 1.0;

    // Folds both directions of imbalance onto [1, inf); 1 is parity.
    [[nodiscard]] double normalized_disparity() const;
};

struct SelectionOutcome {
    std::size_t index = 0;
    bool satisfied = true;  // false when the disparity cutoff had no taker
    double distance = 0.0;  // normalized disparity overshoot when !satisfied
};

// Disparity constraints are soft: among models with normalized disparity
// within the cutoff, pick the most precise; if none qualify, fall back to
// the model closest to the cutoff. Accuracy constraints are hard: among
// models within `value` of the best precision, pick the least disparate.
// Ties everywhere prefer higher precision, then lower grid index.
SelectionOutcome select_model(const std::vector<GridEntry>& grid,
                              const SelectionConstraint& constraint);

// Unconstrained baseline: highest mean precision, ties to the lower index.
std::size_t select_original(const std::vector<GridEntry>& grid);

// Grid summaries as CSV (`name,mean_precision,mean_disparity`); `inf` is
// accepted and emitted for the infinite-disparity sentinel.
std::vector<GridEntry> load_grid_csv(const std::string& path);
void write_grid_csv(const std::vector<GridEntry>& grid,
                    const std::string& path);

}  // namespace fairtopk
