#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtopk/date.hpp"

namespace fairtopk {

enum class Group : std::uint8_t { Protected, NonProtected };

struct Record {
    std::string entity_id;
    Date as_of_time;
    std::vector<double> features;
    int label = 0;  // 0 or 1
    Group group = Group::NonProtected;
};

// Immutable after construction; all operations below are pure functions.
struct Dataset {
    std::vector<std::string> schema;  // feature column names, ordered
    std::vector<Record> records;
    std::string protected_token;
    std::string nonprotected_token;
    // Index of the feature column that redundantly encodes group
    // membership, if the data carries one.
    std::optional<std::size_t> protected_feature_index;

    [[nodiscard]] std::size_t size() const { return records.size(); }
    [[nodiscard]] bool empty() const { return records.empty(); }
    [[nodiscard]] const std::string& group_token(Group g) const
    {
        return g == Group::Protected ? protected_token : nonprotected_token;
    }
};

// Column roles for CSV ingestion. Remaining header columns are numeric
// features in file order.
struct CsvConfig {
    std::string entity_id_column = "entity_id";
    std::string as_of_time_column = "as_of_time";
    std::string label_column = "label";
    std::string group_column = "group";
    std::string protected_token = "P";
    std::string nonprotected_token = "NP";
};

Dataset load_csv(const std::string& path, const CsvConfig& config);
void write_csv(const Dataset& dataset, const std::string& path);

// Group marginals and within-group label rates, kept as exact counts.
// Rates are absent (not zero) for an empty group.
struct EmpiricalStats {
    std::int64_t count_protected = 0;
    std::int64_t count_nonprotected = 0;
    std::int64_t positives_protected = 0;
    std::int64_t positives_nonprotected = 0;

    [[nodiscard]] std::int64_t count(Group g) const
    {
        return g == Group::Protected ? count_protected : count_nonprotected;
    }
    [[nodiscard]] std::int64_t positives(Group g) const
    {
        return g == Group::Protected ? positives_protected
                                     : positives_nonprotected;
    }
    [[nodiscard]] double marginal(Group g) const;
    [[nodiscard]] std::optional<double> label_rate(Group g) const;
};

EmpiricalStats empirical_stats(const Dataset& dataset);

struct TemporalSplitPlan {
    Date start;
    Date end;
    int block_months = 1;
    int min_train_blocks = 1;
    // Expanding train windows (all past blocks) by default; sliding keeps
    // only the most recent min_train_blocks blocks.
    bool sliding = false;
};

struct TemporalSplit {
    Dataset train;
    Dataset validation;
    Date train_begin;
    Date train_end;  // == validation begin
    Date validation_end;
    bool validation_empty = false;
};

// Ordered leakage-free (train, validation) pairs: split i trains on
// [start, start + (min_train_blocks + i) * block) and validates on the
// following block. Throws if the plan window holds fewer than
// min_train_blocks + 1 blocks.
std::vector<TemporalSplit> make_temporal_splits(const Dataset& dataset,
                                                const TemporalSplitPlan& plan);

}  // namespace fairtopk
