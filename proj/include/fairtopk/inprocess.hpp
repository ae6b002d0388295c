#pragma once

#include <cstdint>
#include <vector>

#include "fairtopk/dataset.hpp"
#include "fairtopk/learners.hpp"

namespace fairtopk {

// Two-sided FNR-gap constraint on logistic regression, enforced through a
// growing quadratic penalty on a smooth FNR surrogate:
//   softFNR_g = mean over positives of group g of sigmoid(-(w.x+b)/temperature)
// The penalty is lambda * max(0, |softFNR_P - softFNR_NP| - epsilon)^2 with
// lambda following the geometric schedule below, warm-starting each round.
struct FairnessConstraint {
    double epsilon = 0.0001;
    double temperature = 0.1;
    double penalty_start = 1.0;
    double penalty_growth = 10.0;
    int max_outer_iters = 6;

    void validate() const;
};

struct ConstrainedTrainingTrace {
    // surrogate gap excess max(0, |softFNR gap| - epsilon) after each outer
    // round; non-increasing up to solver noise
    std::vector<double> surrogate_excess;
};

TrainedModel train_constrained(const Dataset& train, const ModelSpec& lr_spec,
                               const FairnessConstraint& constraint,
                               std::uint64_t seed,
                               ConstrainedTrainingTrace* trace = nullptr);

// |FNR(Protected) - FNR(NonProtected)| at a hard score cutoff, with
// FNR_g = (positives of g scored below cutoff) / (positives of g).
double hard_fnr_gap(const TrainedModel& model, const Dataset& data,
                    double cutoff);

// Penalized objective and gradient over theta = [w..., b], exposed for
// finite-difference checks.
double constrained_objective(const Dataset& train, const ModelSpec& lr_spec,
                             const FairnessConstraint& constraint,
                             double penalty_weight,
                             const std::vector<double>& theta);
std::vector<double> constrained_gradient(const Dataset& train,
                                         const ModelSpec& lr_spec,
                                         const FairnessConstraint& constraint,
                                         double penalty_weight,
                                         const std::vector<double>& theta);

}  // namespace fairtopk
