#include "fairtopk/inprocess.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "fairtopk/optim.hpp"

namespace fairtopk {

namespace {

double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct Positives {
    std::vector<std::size_t> protected_rows;
    std::vector<std::size_t> nonprotected_rows;
};

Positives find_positives(const Dataset& data)
{
    Positives out;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        if (data.records[i].label != 1) continue;
        if (data.records[i].group == Group::Protected)
            out.protected_rows.push_back(i);
        else
            out.nonprotected_rows.push_back(i);
    }
    if (out.protected_rows.empty() || out.nonprotected_rows.empty())
        throw std::invalid_argument(
            "train_constrained: a group has no positive examples");
    return out;
}

double margin(const Dataset& data, const std::vector<double>& theta,
              std::size_t row)
{
    const auto& x = data.records[row].features;
    double u = theta[x.size()];
    for (std::size_t j = 0; j < x.size(); ++j) u += theta[j] * x[j];
    return u;
}

double soft_fnr(const Dataset& data, const std::vector<double>& theta,
                const std::vector<size_t>& rows, double temperature)
{
    double sum = 0.0;
    for (std::size_t row : rows)
        sum += sigmoid(-margin(data, theta, row) / temperature);
    return sum / static_cast<double>(rows.size());
}

void add_soft_fnr_gradient(const Dataset& data, const std::vector<double>& theta,
                           const std::vector<size_t>& rows, double temperature,
                           double scale, std::vector<double>& g)
{
    const std::size_t d = theta.size() - 1;
    const double per = scale / static_cast<double>(rows.size());
    for (std::size_t row : rows) {
        const double s = sigmoid(-margin(data, theta, row) / temperature);
        const double coef = -per * s * (1.0 - s) / temperature;
        const auto& x = data.records[row].features;
        for (std::size_t j = 0; j < d; ++j) g[j] += coef * x[j];
        g[d] += coef;
    }
}

}  // namespace

void FairnessConstraint::validate() const
{
    if (epsilon < 0.0)
        throw std::invalid_argument("FairnessConstraint: epsilon must be >= 0");
    if (temperature <= 0.0)
        throw std::invalid_argument(
            "FairnessConstraint: temperature must be positive");
    if (penalty_start <= 0.0 || penalty_growth <= 1.0 || max_outer_iters <= 0)
        throw std::invalid_argument("FairnessConstraint: bad penalty schedule");
}

double constrained_objective(const Dataset& train, const ModelSpec& lr_spec,
                             const FairnessConstraint& constraint,
                             double penalty_weight,
                             const std::vector<double>& theta)
{
    const std::size_t n = train.records.size();
    const std::size_t d = train.schema.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = train.records[i].label == 1 ? 1.0 : -1.0;
        const double z = -m * margin(train, theta, i);
        loss += z > 30.0 ? z : std::log1p(std::exp(z));
    }
    loss /= static_cast<double>(n);
    const double inv_cn = 1.0 / (lr_spec.c * static_cast<double>(n));
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += theta[j] * theta[j];
    loss += 0.5 * inv_cn * ss;

    const Positives pos = find_positives(train);
    const double gap =
        soft_fnr(train, theta, pos.protected_rows, constraint.temperature) -
        soft_fnr(train, theta, pos.nonprotected_rows, constraint.temperature);
    const double excess = std::max(0.0, std::abs(gap) - constraint.epsilon);
    return loss + penalty_weight * excess * excess;
}

std::vector<double> constrained_gradient(const Dataset& train,
                                         const ModelSpec& lr_spec,
                                         const FairnessConstraint& constraint,
                                         double penalty_weight,
                                         const std::vector<double>& theta)
{
    const std::size_t n = train.records.size();
    const std::size_t d = train.schema.size();
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = train.records[i].label == 1 ? 1.0 : -1.0;
        const double coef = -m * sigmoid(-m * margin(train, theta, i));
        const auto& x = train.records[i].features;
        for (std::size_t j = 0; j < d; ++j) g[j] += coef * x[j];
        g[d] += coef;
    }
    for (double& v : g) v /= static_cast<double>(n);
    const double inv_cn = 1.0 / (lr_spec.c * static_cast<double>(n));
    for (std::size_t j = 0; j < d; ++j) g[j] += inv_cn * theta[j];

    const Positives pos = find_positives(train);
    const double gap =
        soft_fnr(train, theta, pos.protected_rows, constraint.temperature) -
        soft_fnr(train, theta, pos.nonprotected_rows, constraint.temperature);
    const double excess = std::max(0.0, std::abs(gap) - constraint.epsilon);
    if (excess > 0.0) {
        const double outer = 2.0 * penalty_weight * excess *
                             (gap >= 0.0 ? 1.0 : -1.0);
        add_soft_fnr_gradient(train, theta, pos.protected_rows,
                              constraint.temperature, outer, g);
        add_soft_fnr_gradient(train, theta, pos.nonprotected_rows,
                              constraint.temperature, -outer, g);
    }
    return g;
}

TrainedModel train_constrained(const Dataset& train, const ModelSpec& lr_spec,
                               const FairnessConstraint& constraint,
                               std::uint64_t seed,
                               ConstrainedTrainingTrace* trace)
{
    lr_spec.validate();
    constraint.validate();
    if (lr_spec.family != ModelFamily::LogisticRegression)
        throw std::invalid_argument(
            "train_constrained: spec must be logistic regression");
    if (lr_spec.penalty != Penalty::L2)
        throw std::invalid_argument(
            "train_constrained: only l2-penalized logistic regression is "
            "supported");
    const Positives pos = find_positives(train);

    const std::size_t d = train.schema.size();
    std::vector<double> theta(d + 1, 0.0);
    double lambda = constraint.penalty_start;
    for (int round = 0; round < constraint.max_outer_iters; ++round) {
        auto f = [&](const std::vector<double>& x) {
            return constrained_objective(train, lr_spec, constraint, lambda, x);
        };
        auto df = [&](const std::vector<double>& x, std::vector<double>& g) {
            g = constrained_gradient(train, lr_spec, constraint, lambda, x);
        };
        // The first round must run the exact unconstrained solver settings
        // so an inactive constraint reproduces train_logistic bit for bit;
        // warm-started later rounds only polish and get a smaller budget.
        const int max_iters = round == 0 ? 10000 : 2000;
        OptimResult result =
            minimize_gd(f, df, std::move(theta), 1e-6, max_iters);
        theta = std::move(result.x);
        if (trace != nullptr) {
            const double gap =
                soft_fnr(train, theta, pos.protected_rows,
                         constraint.temperature) -
                soft_fnr(train, theta, pos.nonprotected_rows,
                         constraint.temperature);
            trace->surrogate_excess.push_back(
                std::max(0.0, std::abs(gap) - constraint.epsilon));
        }
        lambda *= constraint.penalty_growth;
    }

    TrainedModel model;
    model.spec = lr_spec;
    model.feature_schema = train.schema;
    model.train_seed = seed;
    LinearParams params;
    params.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
    params.intercept = theta[d];
    model.parameters = std::move(params);
    return model;
}

double hard_fnr_gap(const TrainedModel& model, const Dataset& data,
                    double cutoff)
{
    std::array<std::int64_t, 2> positives{0, 0};
    std::array<std::int64_t, 2> misses{0, 0};
    for (const auto& rec : data.records) {
        if (rec.label != 1) continue;
        const std::size_t g = rec.group == Group::Protected ? 0 : 1;
        ++positives[g];
        if (score_one(model, rec.features) < cutoff) ++misses[g];
    }
    if (positives[0] == 0 || positives[1] == 0)
        throw std::invalid_argument("hard_fnr_gap: a group has no positives");
    const double fnr_p =
        static_cast<double>(misses[0]) / static_cast<double>(positives[0]);
    const double fnr_np =
        static_cast<double>(misses[1]) / static_cast<double>(positives[1]);
    return std::abs(fnr_p - fnr_np);
}

}  // namespace fairtopk
