#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fairtopk/dataset.hpp"

namespace fairtopk {

enum class ModelFamily : std::uint8_t {
    LogisticRegression,
    DecisionTree,
    RandomForest
};

enum class Penalty : std::uint8_t { L1, L2 };
enum class MaxFeatures : std::uint8_t { Sqrt, Log2, All };
enum class SplitCriterion : std::uint8_t { Gini, Entropy };

struct ModelSpec {
    ModelFamily family = ModelFamily::LogisticRegression;
    // logistic regression
    Penalty penalty = Penalty::L2;
    double c = 1.0;
    // trees and forests
    int max_depth = 5;
    int min_samples_split = 2;
    // forests
    int n_estimators = 100;
    MaxFeatures max_features = MaxFeatures::Sqrt;
    SplitCriterion criterion = SplitCriterion::Gini;

    void validate() const;  // throws on out-of-range hyperparameters
    [[nodiscard]] std::string name() const;
};

struct LinearParams {
    std::vector<double> weights;
    double intercept = 0.0;
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;  // go left when x[feature] <= threshold
    int right = -1;
    double leaf_value = 0.0;  // positive rate at the leaf
};

struct TreeParams {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestParams {
    std::vector<TreeParams> trees;
};

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> feature_schema;
    std::uint64_t train_seed = 0;
    std::variant<LinearParams, TreeParams, ForestParams> parameters;
};

// Fits the family named in `spec` on the training data. Logistic regression
// minimizes mean log-loss plus (1/(c*n)) * penalty(w) to gradient norm
// 1e-6 or 10,000 iterations; trees split greedily on the criterion; the
// forest bags n_estimators trees with per-node feature subsampling.
// Throws on single-class training data.
TrainedModel train(const ModelSpec& spec, const Dataset& data,
                   std::uint64_t seed);

// Risk scores in [0,1], one per record; higher means higher risk.
std::vector<double> score(const TrainedModel& model, const Dataset& data);
double score_one(const TrainedModel& model, const std::vector<double>& features);

// Regularized logistic loss and its gradient over theta = [w..., b],
// exposed for finite-difference checks. The l1 gradient uses sign(w) and
// is only valid away from zero weights.
double lr_objective(const ModelSpec& spec, const Dataset& data,
                    const std::vector<double>& theta);
std::vector<double> lr_gradient(const ModelSpec& spec, const Dataset& data,
                                const std::vector<double>& theta);

// One bagged member tree the way the forest trainer builds it; the forest
// is exactly the mean of these.
TreeParams train_forest_member(const ModelSpec& spec, const Dataset& data,
                               std::uint64_t member_seed);

// Deterministic stream seed for the index-th consumer of a base seed
// (splitmix64 over the pair); also used for forest member trees.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

enum class GridProfile : std::uint8_t { Small, PaperLike };

// `PaperLike` is a crowdfunding-scale grid (logistic regressions over
// penalty x C, deep decision trees, 100-tree forests); `Small` is a fast
// grid for tests and desk-scale experiments.
std::vector<ModelSpec> default_grid(GridProfile profile);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace fairtopk
