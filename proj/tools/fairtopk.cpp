// Command-line front end: resampling, training, post-hoc adjustment,
// composite models, constrained model selection, and full experiment runs.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fairtopk/composite.hpp"
#include "fairtopk/dataset.hpp"
#include "fairtopk/harness.hpp"
#include "fairtopk/inprocess.hpp"
#include "fairtopk/learners.hpp"
#include "fairtopk/metrics.hpp"
#include "fairtopk/posthoc.hpp"
#include "fairtopk/preprocess.hpp"
#include "fairtopk/selection.hpp"

namespace {

using namespace fairtopk;

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Model spec config: key=value lines (family=lr|dt|rf, penalty=l1|l2,
// c=..., max_depth=..., min_samples_split=..., n_estimators=...,
// max_features=sqrt|log2|all, criterion=gini|entropy).
ModelSpec load_model_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spec file: " + path);
    ModelSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("spec file: line is not key=value: " +
                                     line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "family") {
            if (value == "lr")
                spec.family = ModelFamily::LogisticRegression;
            else if (value == "dt")
                spec.family = ModelFamily::DecisionTree;
            else if (value == "rf")
                spec.family = ModelFamily::RandomForest;
            else
                throw std::runtime_error("spec file: family must be lr|dt|rf");
        } else if (key == "penalty") {
            if (value == "l1")
                spec.penalty = Penalty::L1;
            else if (value == "l2")
                spec.penalty = Penalty::L2;
            else
                throw std::runtime_error("spec file: penalty must be l1|l2");
        } else if (key == "c") {
            spec.c = std::stod(value);
        } else if (key == "max_depth") {
            spec.max_depth = std::stoi(value);
        } else if (key == "min_samples_split") {
            spec.min_samples_split = std::stoi(value);
        } else if (key == "n_estimators") {
            spec.n_estimators = std::stoi(value);
        } else if (key == "max_features") {
            if (value == "sqrt")
                spec.max_features = MaxFeatures::Sqrt;
            else if (value == "log2")
                spec.max_features = MaxFeatures::Log2;
            else if (value == "all")
                spec.max_features = MaxFeatures::All;
            else
                throw std::runtime_error(
                    "spec file: max_features must be sqrt|log2|all");
        } else if (key == "criterion") {
            if (value == "gini")
                spec.criterion = SplitCriterion::Gini;
            else if (value == "entropy")
                spec.criterion = SplitCriterion::Entropy;
            else
                throw std::runtime_error(
                    "spec file: criterion must be gini|entropy");
        } else {
            throw std::runtime_error("spec file: unknown key " + key);
        }
    }
    spec.validate();
    return spec;
}

void write_selection_csv(const TopKSelection& selection,
                         const std::string& path)
{
    std::vector<std::string> ids(selection.selected_ids.begin(),
                                 selection.selected_ids.end());
    std::sort(ids.begin(), ids.end());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "entity_id\n";
    for (const auto& id : ids) out << id << '\n';
}

void add_token_options(CLI::App* cmd, CsvConfig& csv)
{
    cmd->add_option("--protected-token", csv.protected_token,
                    "group column value marking the protected group");
    cmd->add_option("--nonprotected-token", csv.nonprotected_token,
                    "group column value marking the non-protected group");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{
        "bias-reduction toolkit for resource-constrained top-k "
        "classification"};
    app.require_subcommand(1);

    // ---- resample ----
    auto* resample_cmd =
        app.add_subcommand("resample", "resample training data to a preset "
                                       "group/label target distribution");
    int strategy = 1;
    std::string mode_str = "under";
    std::uint64_t seed = 0;
    std::string in_path, out_path, report_path;
    CsvConfig resample_csv;
    resample_cmd->add_option("--strategy", strategy, "strategy 1-6")
        ->required()
        ->check(CLI::Range(1, 6));
    resample_cmd->add_option("--mode", mode_str, "over|under")
        ->check(CLI::IsMember({"over", "under"}));
    resample_cmd->add_option("--seed", seed, "resampling seed");
    resample_cmd->add_option("--in", in_path, "input dataset CSV")->required();
    resample_cmd->add_option("--out", out_path, "output dataset CSV")
        ->required();
    resample_cmd->add_option("--report", report_path,
                             "cell-count report CSV (optional)");
    add_token_options(resample_cmd, resample_csv);

    // ---- train ----
    auto* train_cmd =
        app.add_subcommand("train", "fit one model from a spec file");
    std::string spec_path, model_out;
    std::uint64_t train_seed = 0;
    CsvConfig train_csv;
    train_cmd->add_option("--spec", spec_path, "model spec key=value file")
        ->required();
    train_cmd->add_option("--in", in_path, "training dataset CSV")->required();
    train_cmd->add_option("--out", model_out, "model output path")->required();
    train_cmd->add_option("--seed", train_seed, "training seed");
    add_token_options(train_cmd, train_csv);

    // ---- train-constrained ----
    auto* constrained_cmd = app.add_subcommand(
        "train-constrained",
        "fit l2 logistic regression under an FNR-gap constraint");
    FairnessConstraint constraint;
    double lr_c = 1.0;
    CsvConfig constrained_csv;
    constrained_cmd->add_option("--epsilon", constraint.epsilon,
                                "allowed |FNR gap|");
    constrained_cmd->add_option("--temperature", constraint.temperature,
                                "surrogate sigmoid temperature");
    constrained_cmd->add_option("--c", lr_c,
                                "inverse regularization strength");
    constrained_cmd->add_option("--in", in_path, "training dataset CSV")
        ->required();
    constrained_cmd->add_option("--out", model_out, "model output path")
        ->required();
    constrained_cmd->add_option("--seed", train_seed, "training seed");
    add_token_options(constrained_cmd, constrained_csv);

    // ---- adjust ----
    auto* adjust_cmd = app.add_subcommand(
        "adjust", "learn a TPR-equalizing quota on one score set and apply "
                  "it to another");
    std::size_t k = 0;
    std::uint64_t tie_seed = 0;
    std::string scores_path, apply_path;
    std::string adj_p_token = "P";
    std::string adj_np_token = "NP";
    adjust_cmd->add_option("--k", k, "selection budget")->required();
    adjust_cmd
        ->add_option("--scores", scores_path,
                     "adjustment scores CSV (entity_id,score,label,group)")
        ->required();
    adjust_cmd->add_option("--apply-to", apply_path, "scores CSV to select from")
        ->required();
    adjust_cmd->add_option("--out", out_path, "selected entity ids CSV")
        ->required();
    adjust_cmd->add_option("--tie-seed", tie_seed, "tie-breaking seed");
    adjust_cmd->add_option("--protected-token", adj_p_token,
                           "protected group token");
    adjust_cmd->add_option("--nonprotected-token", adj_np_token,
                           "non-protected group token");

    // ---- composite ----
    auto* composite_cmd = app.add_subcommand(
        "composite", "per-group models combined into one top-k selection");
    std::string comp_mode = "coupled";
    std::string comp_combine = "quota";
    std::string comp_train, comp_adjust, comp_apply;
    std::string comp_grid = "small";
    CsvConfig composite_csv;
    composite_cmd->add_option("--mode", comp_mode, "coupled|decoupled")
        ->check(CLI::IsMember({"coupled", "decoupled"}));
    composite_cmd->add_option("--combine", comp_combine, "quota|single")
        ->check(CLI::IsMember({"quota", "single"}));
    composite_cmd->add_option("--k", k, "selection budget")->required();
    composite_cmd->add_option("--train", comp_train, "training dataset CSV")
        ->required();
    composite_cmd
        ->add_option("--adjust", comp_adjust,
                     "adjustment dataset CSV (model selection and quotas)")
        ->required();
    composite_cmd
        ->add_option("--apply-to", comp_apply, "dataset CSV to select from")
        ->required();
    composite_cmd->add_option("--out", out_path, "selected entity ids CSV")
        ->required();
    composite_cmd->add_option("--grid", comp_grid, "small|paper_like")
        ->check(CLI::IsMember({"small", "paper_like"}));
    composite_cmd->add_option("--seed", train_seed, "training seed");
    composite_cmd->add_option("--tie-seed", tie_seed, "tie-breaking seed");
    add_token_options(composite_cmd, composite_csv);

    // ---- select ----
    auto* select_cmd = app.add_subcommand(
        "select", "constrained model selection over grid results");
    std::string sel_constraint = "disparity";
    std::string sel_level = "A";
    std::string grid_path;
    select_cmd->add_option("--constraint", sel_constraint,
                           "disparity|accuracy")
        ->check(CLI::IsMember({"disparity", "accuracy"}));
    select_cmd->add_option("--level", sel_level, "constraint level A-H")
        ->check(CLI::IsMember({"A", "B", "C", "D", "E", "F", "G", "H"}));
    select_cmd
        ->add_option("--grid", grid_path,
                     "grid results CSV (name,mean_precision,mean_disparity)")
        ->required();

    // ---- run ----
    auto* run_cmd =
        app.add_subcommand("run", "run a full experiment from a config file");
    std::string config_path;
    run_cmd->add_option("--config", config_path, "experiment config file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (resample_cmd->parsed()) {
            const Dataset data = load_csv(in_path, resample_csv);
            const SampleMode mode = mode_str == "over"
                                        ? SampleMode::Oversample
                                        : SampleMode::Undersample;
            const SamplingTarget target =
                resolve_strategy(strategy, empirical_stats(data), mode);
            auto [resampled, report] = resample(data, target, seed);
            write_csv(resampled, out_path);
            if (!report_path.empty()) {
                std::ofstream rep(report_path);
                if (!rep)
                    throw std::runtime_error("cannot write " + report_path);
                rep << "cell,before,after\n";
                const char* names[4] = {"protected_pos", "protected_neg",
                                        "nonprotected_pos",
                                        "nonprotected_neg"};
                for (int c = 0; c < 4; ++c)
                    rep << names[c] << ',' << report.before[c] << ','
                        << report.after[c] << '\n';
                rep << "duplicated,," << report.duplicated_count << '\n';
                rep << "removed,," << report.removed_count << '\n';
            }
            std::cout << "wrote " << resampled.size() << " records to "
                      << out_path << " (duplicated "
                      << report.duplicated_count << ", removed "
                      << report.removed_count << ")\n";
        } else if (train_cmd->parsed()) {
            const ModelSpec spec = load_model_spec(spec_path);
            const Dataset data = load_csv(in_path, train_csv);
            const TrainedModel model = train(spec, data, train_seed);
            save_model(model, model_out);
            std::cout << "trained " << spec.name() << " on " << data.size()
                      << " records -> " << model_out << '\n';
        } else if (constrained_cmd->parsed()) {
            ModelSpec spec;
            spec.family = ModelFamily::LogisticRegression;
            spec.penalty = Penalty::L2;
            spec.c = lr_c;
            const Dataset data = load_csv(in_path, constrained_csv);
            const TrainedModel model =
                train_constrained(data, spec, constraint, train_seed);
            save_model(model, model_out);
            std::cout << "trained constrained " << spec.name()
                      << " (epsilon " << constraint.epsilon
                      << "), train FNR gap at 0.5: "
                      << hard_fnr_gap(model, data, 0.5) << '\n';
        } else if (adjust_cmd->parsed()) {
            const ScoredFrame adj =
                load_scores_csv(scores_path, adj_p_token, adj_np_token);
            const ScoredFrame target =
                load_scores_csv(apply_path, adj_p_token, adj_np_token);
            const GroupQuota quota = equalize_tpr_quota(adj, k, tie_seed);
            const TopKSelection selection =
                apply_quota(target, quota, tie_seed);
            write_selection_csv(selection, out_path);
            std::cout << "quota: protected " << quota.k_protected
                      << ", non-protected " << quota.k_nonprotected
                      << " (adjustment TPR gap " << quota.achieved_gap
                      << "); wrote " << selection.selected_ids.size()
                      << " ids to " << out_path << '\n';
        } else if (composite_cmd->parsed()) {
            const Dataset train_data = load_csv(comp_train, composite_csv);
            const Dataset adj_data = load_csv(comp_adjust, composite_csv);
            const Dataset apply_data = load_csv(comp_apply, composite_csv);
            const std::vector<ModelSpec> grid_specs =
                default_grid(comp_grid == "small" ? GridProfile::Small
                                                  : GridProfile::PaperLike);
            std::vector<TrainedModel> models;
            std::vector<std::vector<double>> candidates;
            std::size_t n_pooled = grid_specs.size();
            std::vector<std::size_t> allow_p, allow_np;
            const std::vector<std::size_t>* allow_p_ptr = nullptr;
            const std::vector<std::size_t>* allow_np_ptr = nullptr;
            if (comp_mode == "decoupled") {
                DecoupledGrid dg =
                    train_decoupled(grid_specs, train_data, train_seed);
                const std::size_t g = grid_specs.size();
                models = std::move(dg.pooled);
                for (auto& m : dg.protected_only)
                    models.push_back(std::move(m));
                for (auto& m : dg.nonprotected_only)
                    models.push_back(std::move(m));
                for (std::size_t i = 0; i < g; ++i) {
                    allow_p.push_back(i);
                    allow_np.push_back(i);
                }
                for (std::size_t i = 0; i < g; ++i) allow_p.push_back(g + i);
                for (std::size_t i = 0; i < g; ++i)
                    allow_np.push_back(2 * g + i);
                allow_p_ptr = &allow_p;
                allow_np_ptr = &allow_np;
            } else {
                for (std::size_t i = 0; i < grid_specs.size(); ++i)
                    models.push_back(train(grid_specs[i], train_data,
                                           derive_seed(train_seed, i)));
            }
            for (const auto& m : models)
                candidates.push_back(score(m, adj_data));
            const PerGroupSelection chosen =
                select_per_group(candidates, n_pooled, adj_data, k, tie_seed,
                                 allow_p_ptr, allow_np_ptr);
            const TrainedModel& mp = models[chosen.protected_index];
            const TrainedModel& mnp = models[chosen.nonprotected_index];
            ScoredFrame adj_frame;
            adj_frame.scores = score_per_group(mp, mnp, adj_data);
            for (const auto& rec : adj_data.records) {
                adj_frame.ids.push_back(rec.entity_id);
                adj_frame.labels.push_back(rec.label);
                adj_frame.groups.push_back(rec.group);
            }
            std::vector<double> apply_scores =
                score_per_group(mp, mnp, apply_data);
            std::vector<std::string> apply_ids;
            std::vector<Group> apply_groups;
            for (const auto& rec : apply_data.records) {
                apply_ids.push_back(rec.entity_id);
                apply_groups.push_back(rec.group);
            }
            const CombineMode combine_mode = comp_combine == "single"
                                                 ? CombineMode::SingleThreshold
                                                 : CombineMode::TprQuota;
            const TopKSelection selection =
                combine(combine_mode, adj_frame, apply_scores, apply_ids,
                        apply_groups, k, tie_seed);
            write_selection_csv(selection, out_path);
            std::cout << "protected model: " << mp.spec.name()
                      << ", non-protected model: " << mnp.spec.name()
                      << "; wrote " << selection.selected_ids.size()
                      << " ids to " << out_path << '\n';
        } else if (select_cmd->parsed()) {
            const std::vector<GridEntry> grid = load_grid_csv(grid_path);
            const SelectionConstraint c = SelectionConstraint::at_level(
                sel_constraint == "disparity" ? ConstraintKind::Disparity
                                              : ConstraintKind::Accuracy,
                sel_level[0]);
            const SelectionOutcome outcome = select_model(grid, c);
            const GridEntry& e = grid[outcome.index];
            std::cout << "chosen: " << e.name << " (precision "
                      << e.mean_precision << ", normalized disparity "
                      << e.normalized_disparity() << ")";
            if (!outcome.satisfied)
                std::cout << " [cutoff " << c.value
                          << " not met by any model; closest chosen, "
                             "overshoot "
                          << outcome.distance << "]";
            std::cout << '\n';
        } else if (run_cmd->parsed()) {
            const ExperimentConfig config = load_config(config_path);
            const ExperimentResults results = run_experiment(config);
            std::cout << "wrote results to " << config.output_dir << '\n';
            for (const auto& w : results.warnings)
                std::cout << "warning: " << w << '\n';
            for (const auto& e : results.errors)
                std::cerr << "error: " << e << '\n';
            if (!results.ok()) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
