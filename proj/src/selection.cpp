#include "fairtopk/selection.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fairtopk {

const std::vector<double>& SelectionConstraint::disparity_levels()
{
    static const std::vector<double> levels{5.0,  2.0, 1.5,  1.3,
                                            1.2, 1.1, 1.05, 1.0};
    return levels;
}

const std::vector<double>& SelectionConstraint::accuracy_levels()
{
    static const std::vector<double> levels{0.0,  0.05, 0.10, 0.15,
                                            0.2, 0.25, 0.5,  0.6};
    return levels;
}

SelectionConstraint SelectionConstraint::at_level(ConstraintKind kind,
                                                  char level)
{
    if (level < 'A' || level > 'H')
        throw std::invalid_argument(
            "SelectionConstraint: level must be in A..H");
    SelectionConstraint out;
    out.kind = kind;
    out.level = level;
    const std::size_t idx = static_cast<std::size_t>(level - 'A');
    out.value = kind == ConstraintKind::Disparity ? disparity_levels()[idx]
                                                  : accuracy_levels()[idx];
    return out;
}

double GridEntry::normalized_disparity() const
{
    const double d = mean_disparity;
    if (std::isinf(d)) return d;
    if (d <= 0.0)
        return std::numeric_limits<double>::infinity();
    return d >= 1.0 ? d : 1.0 / d;
}

namespace {

// true when candidate `a` beats `b` on (higher precision, lower index)
bool precision_then_index(const std::vector<GridEntry>& grid, std::size_t a,
                          std::size_t b)
{
    if (grid[a].mean_precision != grid[b].mean_precision)
        return grid[a].mean_precision > grid[b].mean_precision;
    return a < b;
}

}  // namespace

SelectionOutcome select_model(const std::vector<GridEntry>& grid,
                              const SelectionConstraint& constraint)
{
    if (grid.empty())
        throw std::invalid_argument("select_model: empty grid");

    SelectionOutcome out;
    if (constraint.kind == ConstraintKind::Disparity) {
        bool any = false;
        std::size_t best = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double nd = grid[i].normalized_disparity();
            if (std::isinf(nd) || nd > constraint.value) continue;
            if (!any || precision_then_index(grid, i, best)) {
                any = true;
                best = i;
            }
        }
        if (any) {
            out.index = best;
            out.satisfied = true;
            out.distance = 0.0;
            return out;
        }
        // Soft fallback: closest to the cutoff; infinite disparity always
        // ranks last.
        bool have = false;
        std::size_t fallback = 0;
        double fallback_dist = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double nd = grid[i].normalized_disparity();
            const double dist = std::isinf(nd)
                                    ? std::numeric_limits<double>::infinity()
                                    : nd - constraint.value;
            const bool better =
                !have || dist < fallback_dist ||
                (dist == fallback_dist && precision_then_index(grid, i, fallback));
            if (better) {
                have = true;
                fallback = i;
                fallback_dist = dist;
            }
        }
        out.index = fallback;
        out.satisfied = false;
        out.distance = fallback_dist;
        return out;
    }

    // Accuracy constraint: hard precision floor relative to the grid's best.
    double best_precision = grid[0].mean_precision;
    for (const auto& e : grid)
        if (e.mean_precision > best_precision) best_precision = e.mean_precision;
    const double floor = best_precision - constraint.value;
    bool have = false;
    std::size_t best = 0;
    double best_nd = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].mean_precision < floor) continue;
        const double nd = grid[i].normalized_disparity();
        const bool better = !have || nd < best_nd ||
                            (nd == best_nd && precision_then_index(grid, i, best));
        if (better) {
            have = true;
            best = i;
            best_nd = nd;
        }
    }
    out.index = best;
    out.satisfied = true;
    out.distance = 0.0;
    return out;
}

std::size_t select_original(const std::vector<GridEntry>& grid)
{
    if (grid.empty())
        throw std::invalid_argument("select_original: empty grid");
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (precision_then_index(grid, i, best)) best = i;
    return best;
}

namespace {

double parse_metric(const std::string& text, const std::string& path,
                    std::size_t row)
{
    if (text == "inf")
        return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw std::runtime_error("non-numeric value at row " +
                                 std::to_string(row) + " in " + path);
    return v;
}

}  // namespace

std::vector<GridEntry> load_grid_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty grid file: " + path);
    std::vector<GridEntry> grid;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        GridEntry e;
        std::string prec, disp;
        if (!std::getline(ss, e.name, ',') || !std::getline(ss, prec, ',') ||
            !std::getline(ss, disp))
            throw std::runtime_error("malformed grid row " +
                                     std::to_string(row) + " in " + path);
        e.mean_precision = parse_metric(prec, path, row);
        e.mean_disparity = parse_metric(disp, path, row);
        grid.push_back(std::move(e));
    }
    return grid;
}

void write_grid_csv(const std::vector<GridEntry>& grid, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write grid file: " + path);
    out << "name,mean_precision,mean_disparity\n";
    char buf[64];
    for (const auto& e : grid) {
        out << e.name << ',';
        std::snprintf(buf, sizeof buf, "%.17g", e.mean_precision);
        out << buf << ',';
        if (std::isinf(e.mean_disparity)) {
            out << "inf";
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", e.mean_disparity);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace fairtopk
