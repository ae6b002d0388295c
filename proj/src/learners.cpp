#include "fairtopk/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
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

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// logistic regression

TrainedModel train_logistic(const ModelSpec& spec, const Dataset& data)
{
    const std::size_t n = data.records.size();
    const std::size_t d = data.schema.size();
    const double inv_cn = 1.0 / (spec.c * static_cast<double>(n));

    // theta = [w_0..w_{d-1}, b]
    auto margin = [&](const std::vector<double>& theta, std::size_t i) {
        const auto& x = data.records[i].features;
        double u = theta[d];
        for (std::size_t j = 0; j < d; ++j) u += theta[j] * x[j];
        return u;
    };
    auto smooth_loss = [&](const std::vector<double>& theta) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = data.records[i].label == 1 ? 1.0 : -1.0;
            const double z = -m * margin(theta, i);
            loss += z > 30.0 ? z : std::log1p(std::exp(z));
        }
        loss /= static_cast<double>(n);
        if (spec.penalty == Penalty::L2) {
            double ss = 0.0;
            for (std::size_t j = 0; j < d; ++j) ss += theta[j] * theta[j];
            loss += 0.5 * inv_cn * ss;
        }
        return loss;
    };
    auto smooth_grad = [&](const std::vector<double>& theta,
                           std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double m = data.records[i].label == 1 ? 1.0 : -1.0;
            const double coef = -m * sigmoid(-m * margin(theta, i));
            const auto& x = data.records[i].features;
            for (std::size_t j = 0; j < d; ++j) g[j] += coef * x[j];
            g[d] += coef;
        }
        for (double& v : g) v /= static_cast<double>(n);
        if (spec.penalty == Penalty::L2)
            for (std::size_t j = 0; j < d; ++j) g[j] += inv_cn * theta[j];
    };

    std::vector<double> theta0(d + 1, 0.0);
    OptimResult result;
    if (spec.penalty == Penalty::L2) {
        result = minimize_gd(smooth_loss, smooth_grad, std::move(theta0), 1e-6,
                             10000);
    } else {
        std::vector<char> mask(d + 1, 1);
        mask[d] = 0;  // intercept unpenalized
        result = minimize_proximal(smooth_loss, smooth_grad, std::move(theta0),
                                   inv_cn, mask, 1e-6, 10000);
    }

    TrainedModel model;
    model.spec = spec;
    model.feature_schema = data.schema;
    LinearParams params;
    params.weights.assign(result.x.begin(), result.x.begin() + static_cast<std::ptrdiff_t>(d));
    params.intercept = result.x[d];
    model.parameters = std::move(params);
    return model;
}

// ---------------------------------------------------------------------------
// decision trees

double impurity(std::int64_t pos, std::int64_t total, SplitCriterion criterion)
{
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    if (criterion == SplitCriterion::Gini) return 2.0 * p * (1.0 - p);
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

struct TreeBuilder {
    const Dataset& data;
    const ModelSpec& spec;
    const std::vector<std::size_t>& rows;  // training rows (may repeat)
    std::mt19937_64* rng = nullptr;        // feature subsampling, forests only
    std::vector<TreeNode> nodes;

    std::vector<std::size_t> sample_features() const
    {
        const std::size_t d = data.schema.size();
        std::size_t m = d;
        if (rng != nullptr) {
            switch (spec.max_features) {
                case MaxFeatures::Sqrt:
                    m = static_cast<std::size_t>(
                        std::ceil(std::sqrt(static_cast<double>(d))));
                    break;
                case MaxFeatures::Log2:
                    m = std::max<std::size_t>(
                        1, static_cast<std::size_t>(
                               std::floor(std::log2(static_cast<double>(d)))));
                    break;
                case MaxFeatures::All:
                    m = d;
                    break;
            }
        }
        std::vector<std::size_t> features(d);
        for (std::size_t j = 0; j < d; ++j) features[j] = j;
        if (m < d) {
            for (std::size_t j = 0; j < m; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, d - 1);
                std::swap(features[j], features[pick(*rng)]);
            }
            features.resize(m);
            // ascending order keeps the lower-feature-index tie rule intact
            std::sort(features.begin(), features.end());
        }
        return features;
    }

    int build(std::vector<std::size_t> node_rows, int depth)
    {
        const std::int64_t total = static_cast<std::int64_t>(node_rows.size());
        std::int64_t pos = 0;
        for (std::size_t r : node_rows) pos += data.records[r].label;

        const int index = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(index)].leaf_value =
            static_cast<double>(pos) / static_cast<double>(total);

        if (depth >= spec.max_depth || total < spec.min_samples_split ||
            pos == 0 || pos == total)
            return index;

        const double parent_impurity = impurity(pos, total, spec.criterion);
        const auto features = sample_features();
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::size_t> order = node_rows;
        for (std::size_t f : features) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return data.records[a].features[f] < data.records[b].features[f];
            });
            std::int64_t left_pos = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left_pos += data.records[order[i]].label;
                const double v = data.records[order[i]].features[f];
                const double next = data.records[order[i + 1]].features[f];
                if (v == next) continue;
                const auto left_n = static_cast<std::int64_t>(i + 1);
                const auto right_n = total - left_n;
                const double gain =
                    parent_impurity -
                    (static_cast<double>(left_n) / static_cast<double>(total)) *
                        impurity(left_pos, left_n, spec.criterion) -
                    (static_cast<double>(right_n) / static_cast<double>(total)) *
                        impurity(pos - left_pos, right_n, spec.criterion);
                // strict improvement: earlier (feature, threshold) wins ties
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = (v + next) / 2.0;
                }
            }
        }
        if (best_feature < 0) return index;

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : node_rows) {
            if (data.records[r].features[static_cast<std::size_t>(best_feature)] <=
                best_threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        node_rows.clear();
        node_rows.shrink_to_fit();
        const int left = build(std::move(left_rows), depth + 1);
        const int right = build(std::move(right_rows), depth + 1);
        nodes[static_cast<std::size_t>(index)].feature = best_feature;
        nodes[static_cast<std::size_t>(index)].threshold = best_threshold;
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }
};

TreeParams build_tree(const ModelSpec& spec, const Dataset& data,
                      const std::vector<std::size_t>& rows, std::mt19937_64* rng)
{
    TreeBuilder builder{data, spec, rows, rng, {}};
    builder.build(rows, 0);
    return TreeParams{std::move(builder.nodes)};
}

double tree_score(const TreeParams& tree, const std::vector<double>& x)
{
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                       : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(node)].leaf_value;
}

std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index)
{
    // splitmix64 on the pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    return member_seed(seed, index);
}

double lr_objective(const ModelSpec& spec, const Dataset& data,
                    const std::vector<double>& theta)
{
    const std::size_t n = data.records.size();
    const std::size_t d = data.schema.size();
    if (theta.size() != d + 1)
        throw std::invalid_argument("lr_objective: theta length mismatch");
    const double inv_cn = 1.0 / (spec.c * static_cast<double>(n));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = data.records[i].features;
        double u = theta[d];
        for (std::size_t j = 0; j < d; ++j) u += theta[j] * x[j];
        const double m = data.records[i].label == 1 ? 1.0 : -1.0;
        const double z = -m * u;
        loss += z > 30.0 ? z : std::log1p(std::exp(z));
    }
    loss /= static_cast<double>(n);
    if (spec.penalty == Penalty::L2) {
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) ss += theta[j] * theta[j];
        loss += 0.5 * inv_cn * ss;
    } else {
        double abs_sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) abs_sum += std::abs(theta[j]);
        loss += inv_cn * abs_sum;
    }
    return loss;
}

std::vector<double> lr_gradient(const ModelSpec& spec, const Dataset& data,
                                const std::vector<double>& theta)
{
    const std::size_t n = data.records.size();
    const std::size_t d = data.schema.size();
    if (theta.size() != d + 1)
        throw std::invalid_argument("lr_gradient: theta length mismatch");
    const double inv_cn = 1.0 / (spec.c * static_cast<double>(n));
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = data.records[i].features;
        double u = theta[d];
        for (std::size_t j = 0; j < d; ++j) u += theta[j] * x[j];
        const double m = data.records[i].label == 1 ? 1.0 : -1.0;
        const double coef = -m * sigmoid(-m * u);
        for (std::size_t j = 0; j < d; ++j) g[j] += coef * x[j];
        g[d] += coef;
    }
    for (double& v : g) v /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        if (spec.penalty == Penalty::L2)
            g[j] += inv_cn * theta[j];
        else
            g[j] += inv_cn * (theta[j] > 0.0 ? 1.0 : (theta[j] < 0.0 ? -1.0 : 0.0));
    }
    return g;
}

void ModelSpec::validate() const
{
    switch (family) {
        case ModelFamily::LogisticRegression:
            if (c <= 0.0)
                throw std::invalid_argument("ModelSpec: c must be positive");
            break;
        case ModelFamily::RandomForest:
            if (n_estimators <= 0)
                throw std::invalid_argument(
                    "ModelSpec: n_estimators must be positive");
            [[fallthrough]];
        case ModelFamily::DecisionTree:
            if (max_depth <= 0)
                throw std::invalid_argument(
                    "ModelSpec: max_depth must be positive");
            if (min_samples_split <= 0)
                throw std::invalid_argument(
                    "ModelSpec: min_samples_split must be positive");
            break;
    }
}

std::string ModelSpec::name() const
{
    std::ostringstream out;
    switch (family) {
        case ModelFamily::LogisticRegression:
            out << "lr_" << (penalty == Penalty::L1 ? "l1" : "l2") << "_c" << c;
            break;
        case ModelFamily::DecisionTree:
            out << "dt_d" << max_depth << "_s" << min_samples_split << '_'
                << (criterion == SplitCriterion::Gini ? "gini" : "entropy");
            break;
        case ModelFamily::RandomForest:
            out << "rf_n" << n_estimators << "_d" << max_depth << "_s"
                << min_samples_split << '_'
                << (max_features == MaxFeatures::Sqrt
                        ? "sqrt"
                        : max_features == MaxFeatures::Log2 ? "log2" : "all")
                << '_' << (criterion == SplitCriterion::Gini ? "gini" : "entropy");
            break;
    }
    return out.str();
}

TrainedModel train(const ModelSpec& spec, const Dataset& data,
                   std::uint64_t seed)
{
    spec.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    std::int64_t pos = 0;
    for (const auto& rec : data.records) pos += rec.label;
    if (pos == 0 || pos == static_cast<std::int64_t>(data.records.size()))
        throw std::invalid_argument("train: single-class training data");

    TrainedModel model;
    switch (spec.family) {
        case ModelFamily::LogisticRegression:
            model = train_logistic(spec, data);
            break;
        case ModelFamily::DecisionTree: {
            std::vector<std::size_t> rows(data.records.size());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            model.spec = spec;
            model.feature_schema = data.schema;
            model.parameters = build_tree(spec, data, rows, nullptr);
            break;
        }
        case ModelFamily::RandomForest: {
            ForestParams forest;
            forest.trees.reserve(static_cast<std::size_t>(spec.n_estimators));
            for (int i = 0; i < spec.n_estimators; ++i)
                forest.trees.push_back(train_forest_member(
                    spec, data, member_seed(seed, static_cast<std::uint64_t>(i))));
            model.spec = spec;
            model.feature_schema = data.schema;
            model.parameters = std::move(forest);
            break;
        }
    }
    model.train_seed = seed;
    return model;
}

TreeParams train_forest_member(const ModelSpec& spec, const Dataset& data,
                               std::uint64_t member_seed)
{
    std::mt19937_64 rng(member_seed);
    const std::size_t n = data.records.size();
    std::vector<std::size_t> rows(n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) rows[i] = pick(rng);
    return build_tree(spec, data, rows, &rng);
}

double score_one(const TrainedModel& model, const std::vector<double>& features)
{
    if (features.size() != model.feature_schema.size())
        throw std::invalid_argument("score: feature length mismatch");
    if (const auto* linear = std::get_if<LinearParams>(&model.parameters)) {
        double u = linear->intercept;
        for (std::size_t j = 0; j < features.size(); ++j)
            u += linear->weights[j] * features[j];
        return sigmoid(u);
    }
    if (const auto* tree = std::get_if<TreeParams>(&model.parameters))
        return tree_score(*tree, features);
    const auto& forest = std::get<ForestParams>(model.parameters);
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += tree_score(tree, features);
    return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> score(const TrainedModel& model, const Dataset& data)
{
    if (data.schema != model.feature_schema)
        throw std::invalid_argument("score: schema mismatch");
    std::vector<double> out;
    out.reserve(data.records.size());
    for (const auto& rec : data.records) out.push_back(score_one(model, rec.features));
    return out;
}

std::vector<ModelSpec> default_grid(GridProfile profile)
{
    std::vector<ModelSpec> grid;
    auto lr = [&](Penalty p, double c) {
        ModelSpec s;
        s.family = ModelFamily::LogisticRegression;
        s.penalty = p;
        s.c = c;
        grid.push_back(s);
    };
    auto dt = [&](int depth, int mss) {
        ModelSpec s;
        s.family = ModelFamily::DecisionTree;
        s.max_depth = depth;
        s.min_samples_split = mss;
        grid.push_back(s);
    };
    auto rf = [&](int n, int depth, int mss) {
        ModelSpec s;
        s.family = ModelFamily::RandomForest;
        s.n_estimators = n;
        s.max_depth = depth;
        s.min_samples_split = mss;
        grid.push_back(s);
    };

    if (profile == GridProfile::Small) {
        lr(Penalty::L2, 0.1);
        lr(Penalty::L2, 1.0);
        lr(Penalty::L1, 1.0);
        dt(3, 10);
        dt(5, 10);
        rf(20, 5, 10);
        return grid;
    }

    // crowdfunding-scale grid, forests capped at 100 estimators
    for (Penalty p : {Penalty::L1, Penalty::L2})
        for (double c : {0.0001, 0.001, 0.01, 0.1, 1.0, 10.0}) lr(p, c);
    for (int depth : {1, 5, 10, 20, 50, 100})
        for (int mss : {2, 5, 10, 100, 1000}) dt(depth, mss);
    for (int n : {100})
        for (int mss : {10, 50})
            for (int depth : {10, 50, 100}) rf(n, depth, mss);
    for (auto& spec : grid) spec.validate();
    return grid;
}

// ---------------------------------------------------------------------------
// serialization: self-describing plain text

namespace {

const char* family_token(ModelFamily family)
{
    switch (family) {
        case ModelFamily::LogisticRegression: return "logistic_regression";
        case ModelFamily::DecisionTree: return "decision_tree";
        case ModelFamily::RandomForest: return "random_forest";
    }
    return "";
}

void write_tree(std::ofstream& file, const TreeParams& tree)
{
    file << "tree " << tree.nodes.size() << '\n';
    for (const auto& node : tree.nodes)
        file << "node " << node.feature << ' ' << format_double(node.threshold)
             << ' ' << node.left << ' ' << node.right << ' '
             << format_double(node.leaf_value) << '\n';
}

TreeParams read_tree(std::istream& in)
{
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "tree")
        throw std::runtime_error("model file: expected tree header");
    TreeParams tree;
    tree.nodes.resize(count);
    for (auto& node : tree.nodes)
        if (!(in >> tag >> node.feature >> node.threshold >> node.left >>
              node.right >> node.leaf_value) ||
            tag != "node")
            throw std::runtime_error("model file: bad node line");
    return tree;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path)
{
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << "fairtopk-model 1\n";
    file << "family " << family_token(model.spec.family) << '\n';
    file << "penalty " << (model.spec.penalty == Penalty::L1 ? "l1" : "l2") << '\n';
    file << "c " << format_double(model.spec.c) << '\n';
    file << "max_depth " << model.spec.max_depth << '\n';
    file << "min_samples_split " << model.spec.min_samples_split << '\n';
    file << "n_estimators " << model.spec.n_estimators << '\n';
    file << "max_features "
         << (model.spec.max_features == MaxFeatures::Sqrt
                 ? "sqrt"
                 : model.spec.max_features == MaxFeatures::Log2 ? "log2" : "all")
         << '\n';
    file << "criterion "
         << (model.spec.criterion == SplitCriterion::Gini ? "gini" : "entropy")
         << '\n';
    file << "train_seed " << model.train_seed << '\n';
    file << "features " << model.feature_schema.size();
    for (const auto& name : model.feature_schema) file << ' ' << name;
    file << '\n';
    if (const auto* linear = std::get_if<LinearParams>(&model.parameters)) {
        file << "weights";
        for (double w : linear->weights) file << ' ' << format_double(w);
        file << '\n';
        file << "intercept " << format_double(linear->intercept) << '\n';
    } else if (const auto* tree = std::get_if<TreeParams>(&model.parameters)) {
        write_tree(file, *tree);
    } else {
        const auto& forest = std::get<ForestParams>(model.parameters);
        file << "trees " << forest.trees.size() << '\n';
        for (const auto& tree : forest.trees) write_tree(file, tree);
    }
}

TrainedModel load_model(const std::string& path)
{
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open " + path);
    std::string tag;
    int version = 0;
    if (!(file >> tag >> version) || tag != "fairtopk-model" || version != 1)
        throw std::runtime_error("not a fairtopk model file: " + path);

    TrainedModel model;
    std::string value;
    auto expect = [&](const char* key) {
        if (!(file >> tag) || tag != key)
            throw std::runtime_error(std::string("model file: expected ") + key);
    };
    expect("family");
    file >> value;
    if (value == "logistic_regression")
        model.spec.family = ModelFamily::LogisticRegression;
    else if (value == "decision_tree")
        model.spec.family = ModelFamily::DecisionTree;
    else if (value == "random_forest")
        model.spec.family = ModelFamily::RandomForest;
    else
        throw std::runtime_error("model file: unknown family " + value);
    expect("penalty");
    file >> value;
    model.spec.penalty = value == "l1" ? Penalty::L1 : Penalty::L2;
    expect("c");
    file >> model.spec.c;
    expect("max_depth");
    file >> model.spec.max_depth;
    expect("min_samples_split");
    file >> model.spec.min_samples_split;
    expect("n_estimators");
    file >> model.spec.n_estimators;
    expect("max_features");
    file >> value;
    model.spec.max_features = value == "sqrt"
                                  ? MaxFeatures::Sqrt
                                  : value == "log2" ? MaxFeatures::Log2
                                                    : MaxFeatures::All;
    expect("criterion");
    file >> value;
    model.spec.criterion =
        value == "gini" ? SplitCriterion::Gini : SplitCriterion::Entropy;
    expect("train_seed");
    file >> model.train_seed;
    expect("features");
    std::size_t n_features = 0;
    file >> n_features;
    model.feature_schema.resize(n_features);
    for (auto& name : model.feature_schema) file >> name;

    if (model.spec.family == ModelFamily::LogisticRegression) {
        expect("weights");
        LinearParams params;
        params.weights.resize(n_features);
        for (auto& w : params.weights) file >> w;
        expect("intercept");
        file >> params.intercept;
        model.parameters = std::move(params);
    } else if (model.spec.family == ModelFamily::DecisionTree) {
        model.parameters = read_tree(file);
    } else {
        expect("trees");
        std::size_t count = 0;
        file >> count;
        ForestParams forest;
        forest.trees.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            forest.trees.push_back(read_tree(file));
        model.parameters = std::move(forest);
    }
    if (!file) throw std::runtime_error("model file: truncated " + path);
    return model;
}

}  // namespace fairtopk
