#include "fairtopk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "fairtopk/composite.hpp"
#include "fairtopk/inprocess.hpp"
#include "fairtopk/posthoc.hpp"

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
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_short(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

void SyntheticSpec::validate() const
{
    if (n == 0) throw std::invalid_argument("SyntheticSpec: n must be positive");
    if (protected_fraction <= 0.0 || protected_fraction >= 1.0)
        throw std::invalid_argument(
            "SyntheticSpec: protected_fraction must be in (0,1)");
    for (double r : {base_rate_p, base_rate_np})
        if (r <= 0.0 || r >= 1.0)
            throw std::invalid_argument(
                "SyntheticSpec: base rates must be in (0,1)");
    if (n_features == 0)
        throw std::invalid_argument(
            "SyntheticSpec: n_features must be positive");
    if (noise_sd <= 0.0)
        throw std::invalid_argument("SyntheticSpec: noise_sd must be positive");
    if (!(span_start < span_end))
        throw std::invalid_argument(
            "SyntheticSpec: time span must be non-empty");
}

Dataset generate_synthetic(const SyntheticSpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> standard(0.0, 1.0);
    std::normal_distribution<double> noise_dist(0.0, spec.noise_sd);
    const std::int64_t day_lo = spec.span_start.serial();
    const std::int64_t day_hi = spec.span_end.serial() - 1;
    std::uniform_int_distribution<std::int64_t> day_dist(day_lo, day_hi);

    Dataset out;
    for (std::size_t f = 0; f < spec.n_features; ++f)
        out.schema.push_back("f" + std::to_string(f));
    out.schema.push_back("protected");
    out.protected_feature_index = spec.n_features;
    out.protected_token = "P";
    out.nonprotected_token = "NP";

    std::vector<double> noises(spec.n);
    std::vector<double> draws(spec.n);
    out.records.resize(spec.n);
    std::size_t id_width = 1;
    for (std::size_t v = spec.n; v >= 10; v /= 10) ++id_width;
    for (std::size_t i = 0; i < spec.n; ++i) {
        Record& rec = out.records[i];
        // fixed draw order keeps generation deterministic per seed
        rec.group = unit(rng) < spec.protected_fraction ? Group::Protected
                                                        : Group::NonProtected;
        rec.features.resize(spec.n_features + 1);
        for (std::size_t f = 0; f < spec.n_features; ++f)
            rec.features[f] = standard(rng);
        rec.features[spec.n_features] =
            rec.group == Group::Protected ? 1.0 : 0.0;
        noises[i] = noise_dist(rng);
        draws[i] = unit(rng);
        rec.as_of_time = Date::from_serial(day_dist(rng));
        std::string digits = std::to_string(i);
        if (digits.size() < id_width)
            digits.insert(0, id_width - digits.size(), '0');
        rec.entity_id = "e" + digits;
    }

    // Calibrate each group's offset by bisection: the empirical label rate
    // is monotone in the offset, stepping by 1/n_g, well inside the
    // 3/sqrt(n_g) tolerance.
    for (Group g : {Group::Protected, Group::NonProtected}) {
        const double weight = g == Group::Protected
                                  ? spec.informative_weight_p
                                  : spec.informative_weight_np;
        const double target =
            g == Group::Protected ? spec.base_rate_p : spec.base_rate_np;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < spec.n; ++i)
            if (out.records[i].group == g) rows.push_back(i);
        if (rows.empty())
            throw std::runtime_error("generate_synthetic: empty group");
        auto rate = [&](double offset) {
            std::size_t positives = 0;
            for (std::size_t i : rows) {
                const double z = weight * out.records[i].features[0] + offset +
                                 noises[i];
                if (draws[i] < sigmoid(z)) ++positives;
            }
            return static_cast<double>(positives) /
                   static_cast<double>(rows.size());
        };
        double lo = -40.0;
        double hi = 40.0;
        if (rate(lo) > target || rate(hi) < target)
            throw std::runtime_error(
                "generate_synthetic: base rate unattainable for this "
                "weight/noise combination");
        for (int iter = 0; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (rate(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        const double offset = hi;
        const double tolerance =
            3.0 / std::sqrt(static_cast<double>(rows.size()));
        if (std::abs(rate(offset) - target) > tolerance)
            throw std::runtime_error(
                "generate_synthetic: base rate unattainable for this "
                "weight/noise combination");
        for (std::size_t i : rows) {
            const double z =
                weight * out.records[i].features[0] + offset + noises[i];
            out.records[i].label = draws[i] < sigmoid(z) ? 1 : 0;
        }
    }
    return out;
}

std::string MethodSpec::name() const
{
    switch (kind) {
        case MethodKind::Original: return "original";
        case MethodKind::NoProtected: return "no_protected";
        case MethodKind::InProcess: return "inprocess";
        case MethodKind::PostHoc: return "posthoc";
        case MethodKind::CompositeCoupled: return "composite_coupled";
        case MethodKind::CompositeDecoupled: return "composite_decoupled";
        case MethodKind::CompositeSingleThreshold:
            return "composite_single_threshold";
        case MethodKind::Sampling:
            return "sampling_" + std::to_string(sampling_strategy) +
                   (sampling_mode == SampleMode::Oversample ? "_over"
                                                            : "_under");
        case MethodKind::Selection:
            return std::string("selection_") +
                   (constraint_kind == ConstraintKind::Disparity
                        ? "disparity_"
                        : "accuracy_") +
                   constraint_level;
    }
    throw std::logic_error("MethodSpec: unknown kind");
}

MethodSpec MethodSpec::parse(const std::string& name)
{
    MethodSpec spec;
    if (name == "original") {
        spec.kind = MethodKind::Original;
    } else if (name == "no_protected") {
        spec.kind = MethodKind::NoProtected;
    } else if (name == "inprocess") {
        spec.kind = MethodKind::InProcess;
    } else if (name == "posthoc") {
        spec.kind = MethodKind::PostHoc;
    } else if (name == "composite_coupled") {
        spec.kind = MethodKind::CompositeCoupled;
    } else if (name == "composite_decoupled") {
        spec.kind = MethodKind::CompositeDecoupled;
    } else if (name == "composite_single_threshold") {
        spec.kind = MethodKind::CompositeSingleThreshold;
    } else if (name.rfind("sampling_", 0) == 0) {
        spec.kind = MethodKind::Sampling;
        const std::string rest = name.substr(9);
        const auto us = rest.find('_');
        if (us == std::string::npos)
            throw std::invalid_argument("unknown method name: " + name);
        const std::string strat = rest.substr(0, us);
        const std::string mode = rest.substr(us + 1);
        if (strat.size() != 1 || strat[0] < '1' || strat[0] > '6')
            throw std::invalid_argument("unknown method name: " + name);
        spec.sampling_strategy = strat[0] - '0';
        if (mode == "over")
            spec.sampling_mode = SampleMode::Oversample;
        else if (mode == "under")
            spec.sampling_mode = SampleMode::Undersample;
        else
            throw std::invalid_argument("unknown method name: " + name);
    } else if (name.rfind("selection_", 0) == 0) {
        spec.kind = MethodKind::Selection;
        const std::string rest = name.substr(10);
        const auto us = rest.find('_');
        if (us == std::string::npos || us + 2 != rest.size())
            throw std::invalid_argument("unknown method name: " + name);
        const std::string kind = rest.substr(0, us);
        if (kind == "disparity")
            spec.constraint_kind = ConstraintKind::Disparity;
        else if (kind == "accuracy")
            spec.constraint_kind = ConstraintKind::Accuracy;
        else
            throw std::invalid_argument("unknown method name: " + name);
        spec.constraint_level = rest[us + 1];
        if (spec.constraint_level < 'A' || spec.constraint_level > 'H')
            throw std::invalid_argument("unknown method name: " + name);
    } else {
        throw std::invalid_argument("unknown method name: " + name);
    }
    return spec;
}

void ExperimentConfig::validate() const
{
    if (csv_path.has_value() == synthetic.has_value())
        throw std::invalid_argument(
            "ExperimentConfig: exactly one of csv_path and synthetic must be "
            "set");
    if (k == 0) throw std::invalid_argument("ExperimentConfig: k must be positive");
    if (synthetic) synthetic->validate();
    if (output_dir.empty())
        throw std::invalid_argument("ExperimentConfig: output_dir is empty");
}

namespace {

std::string trim(const std::string& s)
{
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& key)
{
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::runtime_error("config: non-numeric value for " + key);
    return x;
}

std::uint64_t to_u64(const std::string& v, const std::string& key)
{
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::runtime_error("config: non-integer value for " + key);
    return x;
}

bool to_bool(const std::string& v, const std::string& key)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: non-boolean value for " + key);
}

}  // namespace

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);

    ExperimentConfig cfg;
    SyntheticSpec synth;
    bool want_synthetic = false;
    bool want_csv = false;
    bool have_start = false;
    bool have_end = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "data") {
            if (value == "synthetic")
                want_synthetic = true;
            else if (value == "csv")
                want_csv = true;
            else
                throw std::runtime_error("config: data must be synthetic|csv");
        } else if (key == "csv_path") {
            cfg.csv_path = value;
            want_csv = true;
        } else if (key == "protected_token") {
            cfg.csv.protected_token = value;
        } else if (key == "nonprotected_token") {
            cfg.csv.nonprotected_token = value;
        } else if (key == "k") {
            cfg.k = static_cast<std::size_t>(to_u64(value, key));
        } else if (key == "start") {
            cfg.splits.start = Date::parse(value);
            have_start = true;
        } else if (key == "end") {
            cfg.splits.end = Date::parse(value);
            have_end = true;
        } else if (key == "block_months") {
            cfg.splits.block_months = static_cast<int>(to_u64(value, key));
        } else if (key == "min_train_blocks") {
            cfg.splits.min_train_blocks = static_cast<int>(to_u64(value, key));
        } else if (key == "sliding") {
            cfg.splits.sliding = to_bool(value, key);
        } else if (key == "grid") {
            if (value == "small")
                cfg.grid = GridProfile::Small;
            else if (value == "paper_like")
                cfg.grid = GridProfile::PaperLike;
            else
                throw std::runtime_error("config: grid must be small|paper_like");
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "train_seed") {
            cfg.seeds.train = to_u64(value, key);
        } else if (key == "tie_seed") {
            cfg.seeds.tie = to_u64(value, key);
        } else if (key == "sampling_seed") {
            cfg.seeds.sampling = to_u64(value, key);
        } else if (key == "methods") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!item.empty())
                    cfg.methods.push_back(MethodSpec::parse(item));
            }
        } else if (key == "synthetic.n") {
            synth.n = static_cast<std::size_t>(to_u64(value, key));
        } else if (key == "synthetic.protected_fraction") {
            synth.protected_fraction = to_double(value, key);
        } else if (key == "synthetic.base_rate_p") {
            synth.base_rate_p = to_double(value, key);
        } else if (key == "synthetic.base_rate_np") {
            synth.base_rate_np = to_double(value, key);
        } else if (key == "synthetic.n_features") {
            synth.n_features = static_cast<std::size_t>(to_u64(value, key));
        } else if (key == "synthetic.informative_weight_p") {
            synth.informative_weight_p = to_double(value, key);
        } else if (key == "synthetic.informative_weight_np") {
            synth.informative_weight_np = to_double(value, key);
        } else if (key == "synthetic.noise_sd") {
            synth.noise_sd = to_double(value, key);
        } else if (key == "synthetic.span_start") {
            synth.span_start = Date::parse(value);
        } else if (key == "synthetic.span_end") {
            synth.span_end = Date::parse(value);
        } else if (key == "synthetic.seed") {
            synth.seed = to_u64(value, key);
        } else {
            throw std::runtime_error("config: unknown key " + key);
        }
    }

    if (want_synthetic && want_csv)
        throw std::runtime_error("config: both synthetic and csv data requested");
    if (want_synthetic) cfg.synthetic = synth;
    if (cfg.synthetic) {
        if (!have_start) cfg.splits.start = cfg.synthetic->span_start;
        if (!have_end) cfg.splits.end = cfg.synthetic->span_end;
    }
    cfg.validate();
    return cfg;
}

const MethodResult& ExperimentResults::method(const std::string& name) const
{
    for (const auto& m : methods)
        if (m.method == name) return m;
    throw std::invalid_argument("no results for method " + name);
}

namespace {

struct EvalMaps {
    std::vector<std::string> ids;
    std::unordered_map<std::string, int> labels;
    std::unordered_map<std::string, Group> groups;
};

EvalMaps make_maps(const Dataset& data)
{
    EvalMaps maps;
    maps.ids.reserve(data.records.size());
    for (const auto& rec : data.records) {
        maps.ids.push_back(rec.entity_id);
        maps.labels.emplace(rec.entity_id, rec.label);
        maps.groups.emplace(rec.entity_id, rec.group);
    }
    return maps;
}

ScoredFrame make_frame(const Dataset& data, const std::vector<double>& scores)
{
    ScoredFrame frame;
    frame.scores = scores;
    for (const auto& rec : data.records) {
        frame.ids.push_back(rec.entity_id);
        frame.labels.push_back(rec.label);
        frame.groups.push_back(rec.group);
    }
    return frame;
}

struct SplitOutcome {
    // one entry per configured method, in configuration order; nullopt
    // when that method failed (the failure is recorded in `errors`)
    std::vector<std::optional<SplitResult>> rows;
    std::vector<GridEntry> grid;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;
};

class SplitRunner {
  public:
    SplitRunner(const ExperimentConfig& cfg,
                const std::vector<ModelSpec>& grid_specs, const Dataset& train,
                const Dataset& adjustment, const Dataset& evaluation,
                std::size_t split_index)
        : cfg_(cfg),
          grid_specs_(grid_specs),
          train_(train),
          adjustment_(adjustment),
          evaluation_(evaluation),
          split_(split_index),
          adj_maps_(make_maps(adjustment)),
          eval_maps_(make_maps(evaluation))
    {
    }

    SplitOutcome run()
    {
        SplitOutcome out;
        try {
            prepare_baseline();
        } catch (const std::exception& e) {
            out.errors.push_back("split " + std::to_string(split_) +
                                 ": baseline grid failed: " + e.what());
            out.rows.assign(cfg_.methods.size(), std::nullopt);
            out.warnings = std::move(warnings_);
            return out;
        }
        out.grid = adj_entries_;
        for (const auto& method : cfg_.methods) {
            try {
                out.rows.push_back(run_method(method));
            } catch (const std::exception& e) {
                out.rows.push_back(std::nullopt);
                out.errors.push_back("split " + std::to_string(split_) + " " +
                                     method.name() + ": " + e.what());
            }
        }
        out.warnings = std::move(warnings_);
        return out;
    }

  private:
    std::uint64_t context_seed(std::uint64_t context) const
    {
        return derive_seed(derive_seed(cfg_.seeds.train, split_), context);
    }

    std::vector<TrainedModel> train_grid(const Dataset& data,
                                         std::uint64_t base_seed) const
    {
        std::vector<TrainedModel> models;
        models.reserve(grid_specs_.size());
        for (std::size_t m = 0; m < grid_specs_.size(); ++m)
            models.push_back(
                train(grid_specs_[m], data, derive_seed(base_seed, m)));
        return models;
    }

    double adj_disparity(const TopKSelection& sel)
    {
        const GroupRecall rec =
            recall_by_group(sel, adj_maps_.labels, adj_maps_.groups);
        if (!rec.protected_tpr || !rec.nonprotected_tpr) {
            warn("split " + std::to_string(split_) +
                 ": adjustment block lacks positives in a group");
            return kInfiniteDisparity;
        }
        return recall_disparity(rec.protected_tpr, rec.nonprotected_tpr);
    }

    void prepare_baseline()
    {
        baseline_ = train_grid(train_, context_seed(0));
        baseline_adj_scores_.reserve(baseline_.size());
        for (const auto& model : baseline_) {
            baseline_adj_scores_.push_back(score(model, adjustment_));
            TopKSelection sel = select_top_k(baseline_adj_scores_.back(),
                                             adj_maps_.ids, cfg_.k,
                                             cfg_.seeds.tie);
            GridEntry entry;
            entry.name = model.spec.name();
            entry.mean_precision = precision_at_k(sel, adj_maps_.labels);
            entry.mean_disparity = adj_disparity(sel);
            adj_entries_.push_back(std::move(entry));
        }
        original_index_ = select_original(adj_entries_);
    }

    SplitResult evaluate(const TopKSelection& sel)
    {
        SplitResult result;
        result.split_index = split_;
        result.precision = precision_at_k(sel, eval_maps_.labels);
        const GroupRecall rec =
            recall_by_group(sel, eval_maps_.labels, eval_maps_.groups);
        result.recall_protected = rec.protected_tpr;
        result.recall_nonprotected = rec.nonprotected_tpr;
        if (rec.protected_tpr && rec.nonprotected_tpr) {
            result.disparity =
                recall_disparity(rec.protected_tpr, rec.nonprotected_tpr);
        } else {
            warn("split " + std::to_string(split_) +
                 ": evaluation block lacks positives in a group; disparity "
                 "reported as 1");
            result.disparity = 1.0;
        }
        return result;
    }

    SplitResult evaluate_model(const TrainedModel& model)
    {
        return evaluate(select_top_k(score(model, evaluation_), eval_maps_.ids,
                                     cfg_.k, cfg_.seeds.tie));
    }

    // Train the grid on `data`, pick the most precise model on the
    // adjustment block, and evaluate it.
    SplitResult evaluate_grid_best(const Dataset& data,
                                   const Dataset& adjustment,
                                   const Dataset& evaluation,
                                   std::uint64_t base_seed)
    {
        const std::vector<TrainedModel> models = train_grid(data, base_seed);
        EvalMaps adj = make_maps(adjustment);
        std::size_t best = 0;
        double best_precision = -1.0;
        for (std::size_t m = 0; m < models.size(); ++m) {
            TopKSelection sel =
                select_top_k(score(models[m], adjustment), adj.ids, cfg_.k,
                             cfg_.seeds.tie);
            const double prec = precision_at_k(sel, adj.labels);
            if (prec > best_precision) {
                best_precision = prec;
                best = m;
            }
        }
        return evaluate(select_top_k(score(models[best], evaluation),
                                     eval_maps_.ids, cfg_.k, cfg_.seeds.tie));
    }

    SplitResult run_composite(const MethodSpec& method)
    {
        std::vector<std::vector<double>> candidates = baseline_adj_scores_;
        std::size_t n_pooled = candidates.size();
        std::vector<TrainedModel> models = baseline_;
        std::vector<std::size_t> allow_p;
        std::vector<std::size_t> allow_np;
        const std::vector<std::size_t>* allow_p_ptr = nullptr;
        const std::vector<std::size_t>* allow_np_ptr = nullptr;
        if (method.kind == MethodKind::CompositeDecoupled) {
            DecoupledGrid dg =
                train_decoupled(grid_specs_, train_, context_seed(31));
            models = std::move(dg.pooled);
            const std::size_t g = grid_specs_.size();
            for (auto& m : dg.protected_only) models.push_back(std::move(m));
            for (auto& m : dg.nonprotected_only)
                models.push_back(std::move(m));
            candidates.clear();
            for (const auto& m : models)
                candidates.push_back(score(m, adjustment_));
            for (std::size_t i = 0; i < g; ++i) {
                allow_p.push_back(i);
                allow_np.push_back(i);
            }
            for (std::size_t i = 0; i < g; ++i) allow_p.push_back(g + i);
            for (std::size_t i = 0; i < g; ++i) allow_np.push_back(2 * g + i);
            allow_p_ptr = &allow_p;
            allow_np_ptr = &allow_np;
            n_pooled = g;
        }
        const PerGroupSelection chosen =
            select_per_group(candidates, n_pooled, adjustment_, cfg_.k,
                             cfg_.seeds.tie, allow_p_ptr, allow_np_ptr);
        const TrainedModel& mp = models[chosen.protected_index];
        const TrainedModel& mnp = models[chosen.nonprotected_index];
        const ScoredFrame adj_frame =
            make_frame(adjustment_, score_per_group(mp, mnp, adjustment_));
        const std::vector<double> eval_scores =
            score_per_group(mp, mnp, evaluation_);
        std::vector<Group> eval_groups;
        eval_groups.reserve(evaluation_.records.size());
        for (const auto& rec : evaluation_.records)
            eval_groups.push_back(rec.group);
        const CombineMode mode =
            method.kind == MethodKind::CompositeSingleThreshold
                ? CombineMode::SingleThreshold
                : CombineMode::TprQuota;
        return evaluate(combine(mode, adj_frame, eval_scores, eval_maps_.ids,
                                eval_groups, cfg_.k, cfg_.seeds.tie));
    }

    SplitResult run_method(const MethodSpec& method)
    {
        switch (method.kind) {
            case MethodKind::Original:
                return evaluate_model(baseline_[original_index_]);
            case MethodKind::NoProtected: {
                return evaluate_grid_best(
                    remove_protected_attribute(train_),
                    remove_protected_attribute(adjustment_),
                    remove_protected_attribute(evaluation_), context_seed(1));
            }
            case MethodKind::Sampling: {
                const std::uint64_t context =
                    10 + static_cast<std::uint64_t>(method.sampling_strategy) *
                             2 +
                    (method.sampling_mode == SampleMode::Oversample ? 1 : 0);
                const SamplingTarget target = resolve_strategy(
                    method.sampling_strategy, empirical_stats(train_),
                    method.sampling_mode);
                auto [resampled, report] = resample(
                    train_, target,
                    derive_seed(derive_seed(cfg_.seeds.sampling, split_),
                                context));
                (void)report;
                return evaluate_grid_best(resampled, adjustment_, evaluation_,
                                          context_seed(context));
            }
            case MethodKind::InProcess: {
                ModelSpec lr;
                lr.family = ModelFamily::LogisticRegression;
                lr.penalty = Penalty::L2;
                lr.c = 1.0;
                const TrainedModel model = train_constrained(
                    train_, lr, FairnessConstraint{}, context_seed(30));
                return evaluate_model(model);
            }
            case MethodKind::PostHoc: {
                const ScoredFrame adj_frame = make_frame(
                    adjustment_, baseline_adj_scores_[original_index_]);
                const GroupQuota quota =
                    equalize_tpr_quota(adj_frame, cfg_.k, cfg_.seeds.tie);
                const std::vector<double> eval_scores =
                    score(baseline_[original_index_], evaluation_);
                std::vector<Group> eval_groups;
                for (const auto& rec : evaluation_.records)
                    eval_groups.push_back(rec.group);
                return evaluate(apply_quota(eval_scores, eval_maps_.ids,
                                            eval_groups, quota,
                                            cfg_.seeds.tie));
            }
            case MethodKind::CompositeCoupled:
            case MethodKind::CompositeDecoupled:
            case MethodKind::CompositeSingleThreshold:
                return run_composite(method);
            case MethodKind::Selection: {
                const SelectionConstraint constraint =
                    SelectionConstraint::at_level(method.constraint_kind,
                                                  method.constraint_level);
                const SelectionOutcome outcome =
                    select_model(adj_entries_, constraint);
                return evaluate_model(baseline_[outcome.index]);
            }
        }
        throw std::logic_error("run_method: unknown kind");
    }

    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    const ExperimentConfig& cfg_;
    const std::vector<ModelSpec>& grid_specs_;
    const Dataset& train_;
    const Dataset& adjustment_;
    const Dataset& evaluation_;
    std::size_t split_;
    EvalMaps adj_maps_;
    EvalMaps eval_maps_;
    std::vector<TrainedModel> baseline_;
    std::vector<std::vector<double>> baseline_adj_scores_;
    std::vector<GridEntry> adj_entries_;
    std::size_t original_index_ = 0;
    std::vector<std::string> warnings_;
};

std::size_t worker_count(std::size_t tasks)
{
    std::size_t workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (const char* env = std::getenv("FAIRTOPK_WORKERS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && parsed > 0)
            workers = static_cast<std::size_t>(parsed);
    }
    return std::min(workers, std::max<std::size_t>(tasks, 1));
}

void write_results_csv(const std::string& path,
                       const std::vector<MethodResult>& methods)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,split,precision_at_k,recall_p,recall_np,disparity\n";
    for (const auto& m : methods) {
        for (const auto& s : m.splits) {
            out << m.method << ',' << s.split_index << ','
                << format_double(s.precision) << ',';
            if (s.recall_protected) out << format_double(*s.recall_protected);
            out << ',';
            if (s.recall_nonprotected)
                out << format_double(*s.recall_nonprotected);
            out << ',' << format_double(s.disparity) << '\n';
        }
    }
}

void write_aggregate_row(std::ofstream& out, const std::string& method,
                         const std::string& metric, const Aggregate& agg)
{
    out << method << ',' << metric << ',' << format_double(agg.mean) << ','
        << format_double(agg.standard_error) << ','
        << format_double(agg.ci_low) << ',' << format_double(agg.ci_high)
        << ',' << agg.n_finite << ',' << agg.n_infinite << '\n';
}

void write_aggregates_csv(const std::string& path,
                          const std::vector<MethodResult>& methods)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,metric,mean,standard_error,ci_low,ci_high,n_finite,"
           "n_infinite\n";
    for (const auto& m : methods) {
        if (m.splits.empty()) continue;
        write_aggregate_row(out, m.method, "precision_at_k", m.precision_agg);
        write_aggregate_row(out, m.method, "recall_p", m.recall_protected_agg);
        write_aggregate_row(out, m.method, "recall_np",
                            m.recall_nonprotected_agg);
        write_aggregate_row(out, m.method, "disparity", m.disparity_agg);
    }
}

void write_report(const std::string& path, const ExperimentConfig& cfg,
                  const ExperimentResults& results, std::size_t n_splits)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "experiment report\n";
    out << "k=" << cfg.k << " evaluation_splits=" << n_splits << " grid="
        << (cfg.grid == GridProfile::Small ? "small" : "paper_like") << "\n\n";
    out << "method summaries (mean [95% CI] over splits)\n";
    for (const auto& m : results.methods) {
        out << "  " << m.method << ": ";
        if (m.splits.empty()) {
            out << "no completed splits\n";
            continue;
        }
        out << "precision@k " << format_short(m.precision_agg.mean) << " ["
            << format_short(m.precision_agg.ci_low) << ", "
            << format_short(m.precision_agg.ci_high) << "], disparity "
            << format_short(m.disparity_agg.mean) << " ["
            << format_short(m.disparity_agg.ci_low) << ", "
            << format_short(m.disparity_agg.ci_high) << "]";
        if (m.disparity_agg.n_infinite > 0)
            out << " (" << m.disparity_agg.n_infinite
                << " split(s) with infinite disparity excluded from the "
                   "mean)";
        out << '\n';
    }
    out << '\n';
    if (!results.warnings.empty()) {
        out << "warnings\n";
        for (const auto& w : results.warnings) out << "  " << w << '\n';
        out << '\n';
    }
    if (!results.errors.empty()) {
        out << "errors\n";
        for (const auto& e : results.errors) out << "  " << e << '\n';
        out << '\n';
    }
    out << "note: the trained-in fairness constraint applies at the decision "
           "boundary, not at the top-k cutoff, so the inprocess method need "
           "not reduce disparity at k.\n";
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& config)
{
    config.validate();
    ExperimentConfig cfg = config;
    // The unconstrained baseline always runs; other methods are measured
    // against it.
    bool has_original = false;
    for (const auto& m : cfg.methods)
        if (m.kind == MethodKind::Original) has_original = true;
    if (!has_original) {
        MethodSpec original;
        original.kind = MethodKind::Original;
        cfg.methods.insert(cfg.methods.begin(), original);
    }

    Dataset data = cfg.synthetic ? generate_synthetic(*cfg.synthetic)
                                 : load_csv(*cfg.csv_path, cfg.csv);
    const std::vector<TemporalSplit> splits =
        make_temporal_splits(data, cfg.splits);
    if (splits.size() < 2)
        throw std::invalid_argument(
            "run_experiment: need at least two temporal splits (one "
            "adjustment block plus one evaluation block)");
    for (const auto& s : splits)
        if (s.validation.size() < cfg.k)
            throw std::invalid_argument(
                "run_experiment: k exceeds the validation block starting " +
                s.train_end.to_string());

    const std::vector<ModelSpec> grid_specs = default_grid(cfg.grid);
    const std::size_t n_eval = splits.size() - 1;
    std::vector<SplitOutcome> outcomes(n_eval);
    {
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_eval) return;
                SplitRunner runner(cfg, grid_specs, splits[i].train,
                                   splits[i].validation,
                                   splits[i + 1].validation, i);
                outcomes[i] = runner.run();
            }
        };
        const std::size_t workers = worker_count(n_eval);
        if (workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
    }

    ExperimentResults results;
    for (const auto& method : cfg.methods) {
        MethodResult mr;
        mr.method = method.name();
        results.methods.push_back(std::move(mr));
    }
    // deterministic reduction in (method, split) order
    for (std::size_t i = 0; i < n_eval; ++i) {
        const SplitOutcome& o = outcomes[i];
        for (std::size_t m = 0; m < cfg.methods.size(); ++m)
            if (m < o.rows.size() && o.rows[m])
                results.methods[m].splits.push_back(*o.rows[m]);
        for (const auto& w : o.warnings) results.warnings.push_back(w);
        for (const auto& e : o.errors) results.errors.push_back(e);
    }
    for (auto& m : results.methods) {
        if (m.splits.empty()) {
            results.errors.push_back("method " + m.method +
                                     " completed no splits");
            continue;
        }
        try {
            m.aggregate_splits();
        } catch (const std::exception& e) {
            results.warnings.push_back("aggregation for " + m.method +
                                       " incomplete: " + e.what());
        }
    }

    // Per-model grid summaries averaged over splits; an infinite split
    // disparity keeps the model's mean infinite.
    for (std::size_t g = 0; g < grid_specs.size(); ++g) {
        GridEntry entry;
        entry.name = grid_specs[g].name();
        double prec = 0.0;
        double disp = 0.0;
        std::size_t count = 0;
        for (const auto& o : outcomes) {
            if (o.grid.size() != grid_specs.size()) continue;
            prec += o.grid[g].mean_precision;
            disp += o.grid[g].mean_disparity;
            ++count;
        }
        if (count == 0) continue;
        entry.mean_precision = prec / static_cast<double>(count);
        entry.mean_disparity = disp / static_cast<double>(count);
        results.grid.push_back(std::move(entry));
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);
    write_results_csv((dir / "results.csv").string(), results.methods);
    write_aggregates_csv((dir / "aggregates.csv").string(), results.methods);
    write_grid_csv(results.grid, (dir / "grid_results.csv").string());
    write_report((dir / "report.txt").string(), cfg, results, n_eval);
    return results;
}

ExperimentConfig reference_config(const std::string& output_dir)
{
    ExperimentConfig cfg;
    cfg.synthetic = SyntheticSpec{};
    cfg.k = 500;
    cfg.splits.start = cfg.synthetic->span_start;
    cfg.splits.end = cfg.synthetic->span_end;
    cfg.splits.block_months = 1;
    cfg.splits.min_train_blocks = 6;
    cfg.splits.sliding = false;
    cfg.grid = GridProfile::Small;
    cfg.output_dir = output_dir;
    for (const char* name :
         {"original", "no_protected", "sampling_1_under", "inprocess",
          "posthoc", "composite_coupled", "composite_decoupled",
          "composite_single_threshold"})
        cfg.methods.push_back(MethodSpec::parse(name));
    for (const char* kind : {"disparity", "accuracy"})
        for (char level = 'A'; level <= 'H'; ++level)
            cfg.methods.push_back(MethodSpec::parse(
                std::string("selection_") + kind + "_" + level));
    return cfg;
}

}  // namespace fairtopk
