#include "fairtopk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairtopk {

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& text, const std::string& context)
{
    double value = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || p != text.data() + text.size())
        throw std::runtime_error("non-numeric value '" + text + "' " + context);
    return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvConfig& config)
{
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(file, line))
        throw std::runtime_error("empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    auto find_column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("missing column '" + name + "' in " + path);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = find_column(config.entity_id_column);
    const std::size_t time_col = find_column(config.as_of_time_column);
    const std::size_t label_col = find_column(config.label_column);
    const std::size_t group_col = find_column(config.group_column);

    Dataset out;
    out.protected_token = config.protected_token;
    out.nonprotected_token = config.nonprotected_token;
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i == id_col || i == time_col || i == label_col || i == group_col)
            continue;
        feature_cols.push_back(i);
        out.schema.push_back(header[i]);
    }

    std::size_t row = 1;
    while (std::getline(file, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        const std::string where = "on row " + std::to_string(row);
        if (fields.size() != header.size())
            throw std::runtime_error("malformed row: expected " +
                                     std::to_string(header.size()) +
                                     " fields, got " +
                                     std::to_string(fields.size()) + " " + where);
        Record rec;
        rec.entity_id = fields[id_col];
        rec.as_of_time = Date::parse(fields[time_col]);
        const std::string& label = fields[label_col];
        if (label == "0")
            rec.label = 0;
        else if (label == "1")
            rec.label = 1;
        else
            throw std::runtime_error("label '" + label + "' outside {0,1} " +
                                     where);
        const std::string& group = fields[group_col];
        if (group == config.protected_token)
            rec.group = Group::Protected;
        else if (group == config.nonprotected_token)
            rec.group = Group::NonProtected;
        else
            throw std::runtime_error("unknown group token '" + group + "' " +
                                     where);
        rec.features.reserve(feature_cols.size());
        for (std::size_t c : feature_cols)
            rec.features.push_back(parse_double(fields[c], where));
        out.records.push_back(std::move(rec));
    }
    return out;
}

void write_csv(const Dataset& dataset, const std::string& path)
{
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << "entity_id,as_of_time,label,group";
    for (const auto& name : dataset.schema) file << ',' << name;
    file << '\n';
    char buf[40];
    for (const auto& rec : dataset.records) {
        file << rec.entity_id << ',' << rec.as_of_time.to_string() << ','
             << rec.label << ',' << dataset.group_token(rec.group);
        for (double v : rec.features) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            file << ',' << buf;
        }
        file << '\n';
    }
}

double EmpiricalStats::marginal(Group g) const
{
    const std::int64_t total = count_protected + count_nonprotected;
    if (total == 0) throw std::runtime_error("empty dataset has no marginals");
    return static_cast<double>(count(g)) / static_cast<double>(total);
}

std::optional<double> EmpiricalStats::label_rate(Group g) const
{
    if (count(g) == 0) return std::nullopt;
    return static_cast<double>(positives(g)) / static_cast<double>(count(g));
}

EmpiricalStats empirical_stats(const Dataset& dataset)
{
    if (dataset.empty())
        throw std::invalid_argument("empirical_stats: empty dataset");
    EmpiricalStats stats;
    for (const auto& rec : dataset.records) {
        if (rec.group == Group::Protected) {
            ++stats.count_protected;
            stats.positives_protected += rec.label;
        } else {
            ++stats.count_nonprotected;
            stats.positives_nonprotected += rec.label;
        }
    }
    return stats;
}

std::vector<TemporalSplit> make_temporal_splits(const Dataset& dataset,
                                                const TemporalSplitPlan& plan)
{
    if (plan.end <= plan.start)
        throw std::invalid_argument("split plan: end must be after start");
    if (plan.block_months <= 0 || plan.min_train_blocks <= 0)
        throw std::invalid_argument("split plan: block and min_train_blocks must be positive");
    if (dataset.empty())
        throw std::invalid_argument("split plan: empty dataset");

    // Block boundaries start..end; a split needs its validation block to
    // fit entirely inside [start, end).
    std::vector<TemporalSplit> splits;
    for (int i = 0;; ++i) {
        const Date train_end =
            plan.start.add_months((plan.min_train_blocks + i) * plan.block_months);
        const Date val_end = train_end.add_months(plan.block_months);
        if (val_end > plan.end) break;
        const Date train_begin =
            plan.sliding
                ? plan.start.add_months(i * plan.block_months)
                : plan.start;

        TemporalSplit split;
        split.train_begin = train_begin;
        split.train_end = train_end;
        split.validation_end = val_end;
        split.train.schema = dataset.schema;
        split.train.protected_token = dataset.protected_token;
        split.train.nonprotected_token = dataset.nonprotected_token;
        split.train.protected_feature_index = dataset.protected_feature_index;
        split.validation = split.train;  // copy the empty shell
        for (const auto& rec : dataset.records) {
            if (rec.as_of_time >= train_begin && rec.as_of_time < train_end)
                split.train.records.push_back(rec);
            else if (rec.as_of_time >= train_end && rec.as_of_time < val_end)
                split.validation.records.push_back(rec);
        }
        split.validation_empty = split.validation.empty();
        splits.push_back(std::move(split));
    }
    if (splits.empty())
        throw std::invalid_argument(
            "split plan window shorter than (min_train_blocks + 1) blocks");
    return splits;
}

}  // namespace fairtopk
