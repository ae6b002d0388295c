#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fairtopk/dataset.hpp"

using namespace fairtopk;

namespace {

std::string write_temp(const std::string& name, const std::string& content)
{
    const std::string path = "/tmp/fairtopk_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

Dataset counted_dataset(int np_total, int np_pos, int p_total, int p_pos)
{
    Dataset d;
    d.schema = {"x"};
    d.protected_token = "P";
    d.nonprotected_token = "NP";
    int id = 0;
    auto add = [&](Group g, int label) {
        Record r;
        r.entity_id = "e" + std::to_string(id++);
        r.as_of_time = {2020, 1, 1};
        r.features = {0.0};
        r.label = label;
        r.group = g;
        d.records.push_back(r);
    };
    for (int i = 0; i < np_total; ++i)
        add(Group::NonProtected, i < np_pos ? 1 : 0);
    for (int i = 0; i < p_total; ++i) add(Group::Protected, i < p_pos ? 1 : 0);
    return d;
}

}  // namespace

TEST_CASE("date parsing, formatting and month stepping")
{
    const Date d = Date::parse("2010-01-31");
    CHECK(d.year == 2010);
    CHECK(d.month == 1);
    CHECK(d.day == 31);
    CHECK(d.to_string() == "2010-01-31");
    CHECK(d.add_months(1) == Date{2010, 2, 28});
    CHECK(Date::parse("2020-01-31").add_months(1) == Date{2020, 2, 29});
    CHECK(Date{2019, 12, 15}.add_months(1) == Date{2020, 1, 15});
    CHECK(Date::from_serial(Date{1999, 7, 4}.serial()) == Date{1999, 7, 4});
    CHECK(Date{2020, 1, 2} > Date{2020, 1, 1});
    CHECK_THROWS(Date::parse("2020-02-30"));
    CHECK_THROWS(Date::parse("2020-13-01"));
    CHECK_THROWS(Date::parse("not-a-date"));
}

TEST_CASE("load_csv parses a small file")
{
    const std::string path = write_temp(
        "basic.csv",
        "entity_id,as_of_time,label,group,age,income\n"
        "a,2020-01-05,1,P,34,1200.5\n"
        "b,2020-02-05,0,NP,55,900\n"
        "c,2020-03-05,1,NP,21,300.25\n");
    const Dataset d = load_csv(path, CsvConfig{});
    CHECK(d.records.size() == 3);
    CHECK(d.schema == std::vector<std::string>{"age", "income"});
    CHECK(d.records[0].entity_id == "a");
    CHECK(d.records[0].group == Group::Protected);
    CHECK(d.records[0].label == 1);
    CHECK(d.records[0].features == std::vector<double>{34.0, 1200.5});
    CHECK(d.records[1].as_of_time == Date{2020, 2, 5});
}

TEST_CASE("load_csv rejects malformed rows with their location")
{
    const std::string bad_label = write_temp(
        "bad_label.csv",
        "entity_id,as_of_time,label,group,x\n"
        "a,2020-01-05,1,P,1\nb,2020-01-06,0,NP,2\nc,2020-01-07,1,NP,3\n"
        "d,2020-01-08,2,NP,4\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_label, CsvConfig{}),
                         doctest::Contains("row 5"), std::runtime_error);

    const std::string bad_group = write_temp(
        "bad_group.csv",
        "entity_id,as_of_time,label,group,x\na,2020-01-05,1,Q,1\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_group, CsvConfig{}),
                         doctest::Contains("Q"), std::runtime_error);

    const std::string bad_feature = write_temp(
        "bad_feature.csv",
        "entity_id,as_of_time,label,group,x\na,2020-01-05,1,P,abc\n");
    CHECK_THROWS(load_csv(bad_feature, CsvConfig{}));

    const std::string missing_column = write_temp(
        "missing_column.csv", "entity_id,as_of_time,label,x\na,2020-01-05,1,2\n");
    CHECK_THROWS(load_csv(missing_column, CsvConfig{}));
}

TEST_CASE("write_csv then load_csv round-trips the dataset")
{
    Dataset d = counted_dataset(3, 2, 2, 1);
    d.records[0].features = {0.12345678901234};
    d.records[1].features = {-17.25};
    d.records[2].features = {1e-9};
    const std::string path = "/tmp/fairtopk_test_roundtrip.csv";
    write_csv(d, path);
    const Dataset back = load_csv(path, CsvConfig{});
    REQUIRE(back.records.size() == d.records.size());
    CHECK(back.schema == d.schema);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(back.records[i].entity_id == d.records[i].entity_id);
        CHECK(back.records[i].label == d.records[i].label);
        CHECK(back.records[i].group == d.records[i].group);
        CHECK(back.records[i].as_of_time == d.records[i].as_of_time);
        for (std::size_t j = 0; j < d.schema.size(); ++j)
            CHECK(back.records[i].features[j] ==
                  doctest::Approx(d.records[i].features[j]).epsilon(1e-11));
    }
}

TEST_CASE("empirical_stats counts groups and label rates")
{
    const Dataset d = counted_dataset(80, 40, 20, 5);
    const EmpiricalStats s = empirical_stats(d);
    CHECK(s.marginal(Group::NonProtected) == doctest::Approx(0.8));
    CHECK(*s.label_rate(Group::NonProtected) == doctest::Approx(0.5));
    CHECK(*s.label_rate(Group::Protected) == doctest::Approx(0.25));
    CHECK(s.marginal(Group::Protected) + s.marginal(Group::NonProtected) ==
          doctest::Approx(1.0));

    const Dataset all_p = counted_dataset(0, 0, 4, 2);
    const EmpiricalStats sp = empirical_stats(all_p);
    CHECK(sp.marginal(Group::NonProtected) == 0.0);
    CHECK(!sp.label_rate(Group::NonProtected).has_value());

    const Dataset one = counted_dataset(0, 0, 1, 1);
    const EmpiricalStats so = empirical_stats(one);
    CHECK(so.marginal(Group::Protected) == 1.0);
    CHECK(*so.label_rate(Group::Protected) == 1.0);
}

TEST_CASE("make_temporal_splits enumerates quarterly blocks")
{
    Dataset d;
    d.schema = {"x"};
    d.protected_token = "P";
    d.nonprotected_token = "NP";
    // one record per month of 2010
    for (int m = 1; m <= 12; ++m) {
        Record r;
        r.entity_id = "m" + std::to_string(m);
        r.as_of_time = {2010, m, 15};
        r.features = {static_cast<double>(m)};
        r.label = m % 2;
        r.group = m % 3 == 0 ? Group::Protected : Group::NonProtected;
        d.records.push_back(r);
    }
    TemporalSplitPlan plan;
    plan.start = {2010, 1, 1};
    plan.end = {2011, 1, 1};
    plan.block_months = 3;
    plan.min_train_blocks = 1;
    const auto splits = make_temporal_splits(d, plan);
    REQUIRE(splits.size() == 3);
    CHECK(splits[0].train_end == Date{2010, 4, 1});
    CHECK(splits[1].train_end == Date{2010, 7, 1});
    CHECK(splits[2].train_end == Date{2010, 10, 1});
    CHECK(splits[0].train.size() == 3);
    CHECK(splits[0].validation.size() == 3);
    CHECK(splits[2].train.size() == 9);
    // expanding windows and leakage freedom
    for (const auto& s : splits) {
        CHECK(!s.validation_empty);
        for (const auto& tr : s.train.records)
            for (const auto& va : s.validation.records)
                CHECK(tr.as_of_time < va.as_of_time);
    }
    // no record validated twice
    std::size_t validated = 0;
    for (const auto& s : splits) validated += s.validation.size();
    CHECK(validated == 9);
}

TEST_CASE("make_temporal_splits sliding window keeps a fixed train span")
{
    Dataset d = counted_dataset(0, 0, 0, 0);
    for (int m = 1; m <= 12; ++m) {
        Record r;
        r.entity_id = "m" + std::to_string(m);
        r.as_of_time = {2010, m, 15};
        r.features = {0.0};
        r.label = m % 2;
        r.group = Group::NonProtected;
        d.records.push_back(r);
    }
    TemporalSplitPlan plan;
    plan.start = {2010, 1, 1};
    plan.end = {2011, 1, 1};
    plan.block_months = 3;
    plan.min_train_blocks = 1;
    plan.sliding = true;
    const auto splits = make_temporal_splits(d, plan);
    REQUIRE(splits.size() == 3);
    for (const auto& s : splits) CHECK(s.train.size() == 3);
    CHECK(splits[2].train_begin == Date{2010, 7, 1});
}

TEST_CASE("make_temporal_splits contract cases")
{
    const Dataset d = counted_dataset(4, 2, 4, 2);
    TemporalSplitPlan plan;
    plan.start = {2020, 1, 1};
    plan.end = {2020, 2, 1};
    plan.block_months = 1;
    plan.min_train_blocks = 1;
    // window holds a single block: no room for a validation block
    CHECK_THROWS(make_temporal_splits(d, plan));

    // records only in the train block: validation emitted empty and flagged
    plan.end = {2020, 3, 1};
    const auto splits = make_temporal_splits(d, plan);
    REQUIRE(splits.size() == 1);
    CHECK(splits[0].validation_empty);
    CHECK(splits[0].validation.empty());
    CHECK(splits[0].train.size() == 8);
}
