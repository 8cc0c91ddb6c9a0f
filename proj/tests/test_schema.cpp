#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "recourse/schema.hpp"
#include "test_util.hpp"

using namespace recourse;

namespace {

SchemaDocument one_numeric_schema() {
    return schema_from_json(json::parse(R"({"features":[{"name":"a","kind":"numeric"}]})"));
}

SchemaDocument mixed_schema() {
    return schema_from_json(json::parse(R"({
        "features":[
          {"name":"x","kind":"numeric","range":[0,10]},
          {"name":"n","kind":"numeric","range":[0,5],"integer_valued":true},
          {"name":"c","kind":"categorical","levels":["a","b"]}],
        "outcome":{"name":"y","kind":"classification"}})"));
}

Dataset read(const std::string& text, const SchemaDocument& doc) {
    std::istringstream in(text);
    return read_dataset(in, doc);
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::invalid_argument;
}

} // namespace

TEST(Csv, QuotedFieldsAndLineEndings) {
    std::istringstream in("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",2\n");
    auto rows = csv::parse(in);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "x, y");
    EXPECT_EQ(rows[1][1], "say \"hi\"");
    EXPECT_EQ(rows[2][0], "multi\nline");
    EXPECT_EQ(rows[2][1], "2");
}

TEST(Csv, RejectsUnterminatedQuote) {
    std::istringstream in("a\n\"open\n");
    EXPECT_EQ(code_of([&] { csv::parse(in); }), ErrorCode::parse);
}

TEST(Csv, WriteThenParseRoundTrips) {
    csv::Row row{"plain", "with,comma", "with \"quote\"", "line\nbreak", ""};
    std::ostringstream out;
    csv::write_row(out, row);
    std::istringstream in(out.str());
    auto rows = csv::parse(in);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], row);
}

TEST(LoadDataset, RangeHatIsMaxMinusMin) {
    auto data = read("a\n1\n5\n3\n", one_numeric_schema());
    ASSERT_EQ(data.ranges_hat().size(), 1u);
    EXPECT_EQ(data.range_hat(0), 4.0);
}

TEST(LoadDataset, IdenticalColumnHasZeroRange) {
    auto data = read("a\n2.5\n2.5\n2.5\n", one_numeric_schema());
    EXPECT_EQ(data.range_hat(0), 0.0);
}

TEST(LoadDataset, UnknownLevelIsRejected) {
    try {
        read("x,n,c,y\n1,2,z,0\n", mixed_schema());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::unknown_level);
        EXPECT_NE(std::string(e.what()).find("unknown level"), std::string::npos);
    }
}

TEST(LoadDataset, ErrorsCarryStableCodes) {
    auto doc = mixed_schema();
    EXPECT_EQ(code_of([&] { read("x,n,y\n1,2,0\n", doc); }), ErrorCode::schema);          // missing column
    EXPECT_EQ(code_of([&] { read("x,n,c\n1,2,a\n", doc); }), ErrorCode::schema);          // missing outcome
    EXPECT_EQ(code_of([&] { read("x,n,c,y,q\n1,2,a,0,3\n", doc); }), ErrorCode::schema);  // extra column
    EXPECT_EQ(code_of([&] { read("x,n,c,y\nabc,2,a,0\n", doc); }), ErrorCode::parse);
    EXPECT_EQ(code_of([&] { read("x,n,c,y\n,2,a,0\n", doc); }), ErrorCode::missing_value);
    EXPECT_EQ(code_of([&] { read("x,n,c,y\nNA,2,a,0\n", doc); }), ErrorCode::missing_value);
    EXPECT_EQ(code_of([&] { read("x,n,c,y\n1,2,a,\n", doc); }), ErrorCode::missing_value);
    EXPECT_EQ(code_of([&] { read("x,n,c,y\n", doc); }), ErrorCode::empty_dataset);
    EXPECT_EQ(code_of([&] { read("", doc); }), ErrorCode::empty_dataset);
    EXPECT_EQ(code_of([&] { read("x,n,c,y\n1,2,a\n", doc); }), ErrorCode::parse);  // short row
}

TEST(LoadDataset, ColumnOrderIsFreeAndRowOrderPreserved) {
    auto data = read("y,c,n,x\n1,b,3,0.5\n0,a,1,9\n", mixed_schema());
    ASSERT_EQ(data.size(), 2u);
    EXPECT_EQ(data.row(0), (Instance{0.5, 3, 1}));
    EXPECT_EQ(data.row(1), (Instance{9, 1, 0}));
    ASSERT_TRUE(data.outcomes());
    EXPECT_EQ(data.outcomes()->labels, (std::vector<std::string>{"1", "0"}));
}

TEST(LoadDataset, DemoDataLoads) {
    auto data = load_dataset(std::string(RECOURSE_DEMO_DIR) + "/credit.csv",
                             std::string(RECOURSE_DEMO_DIR) + "/credit.schema.json");
    EXPECT_EQ(data.size(), 300u);
    EXPECT_EQ(data.schema().size(), 6u);
    EXPECT_TRUE(data.schema()[0].fixed);
    EXPECT_TRUE(data.schema()[0].integer_valued);
    EXPECT_EQ(data.schema()[1].max, std::numeric_limits<double>::infinity());
    for (const auto& r : data.rows()) EXPECT_TRUE(validate_instance(r, data.schema()).empty());
}

TEST(Dataset, StatisticsMatchManualComputation) {
    auto data = testutil::random_mixed_dataset(57, 3, 2, 5);
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<double> col;
        for (const auto& r : data.rows()) col.push_back(r[j]);
        auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        EXPECT_EQ(data.range_hat(j), *hi - *lo);
        double mean = 0;
        for (double v : col) mean += v;
        mean /= col.size();
        double ss = 0;
        for (double v : col) ss += (v - mean) * (v - mean);
        EXPECT_NEAR(data.sd(j), std::sqrt(ss / (col.size() - 1)), 1e-12);
    }
    EXPECT_EQ(data.range_hat(3), 0.0);
    EXPECT_EQ(data.sd(4), 0.0);
}

TEST(Dataset, RangeHatInvariantUnderRowPermutation) {
    auto data = testutil::random_mixed_dataset(80, 4, 1, 9);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(idx.begin(), idx.end(), rng);
        auto perm = data.subset_rows(idx);
        EXPECT_EQ(perm.ranges_hat(), data.ranges_hat());
    }
}

TEST(Dataset, SerializeRoundTripIsBitExact) {
    auto data = testutil::random_mixed_dataset(40, 3, 2, 21);
    auto doc = SchemaDocument{data.schema(), outcome_spec(data)};
    std::ostringstream out;
    write_dataset(out, data);
    auto again = read(out.str(), doc);
    ASSERT_EQ(again.size(), data.size());
    for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(again.row(i), data.row(i));
    EXPECT_EQ(again.outcomes()->labels, data.outcomes()->labels);
    EXPECT_EQ(again.ranges_hat(), data.ranges_hat());
}

TEST(Dataset, OutcomeLengthMustMatchRows) {
    FeatureSchema s({FeatureDescriptor::numeric("a")});
    EXPECT_EQ(code_of([&] { Dataset(s, {Instance{1.0}}, Outcomes{"y", Task::regression, {}, {1.0, 2.0}}); }),
              ErrorCode::schema);
}

TEST(Schema, DescriptorInvariantsEnforced) {
    EXPECT_EQ(code_of([] { FeatureSchema(std::vector<FeatureDescriptor>{}); }), ErrorCode::schema);
    EXPECT_EQ(code_of([] {
                  FeatureSchema({FeatureDescriptor::numeric("a"), FeatureDescriptor::numeric("a")});
              }),
              ErrorCode::schema);
    EXPECT_EQ(code_of([] { FeatureSchema({FeatureDescriptor::numeric("a", 2, 1)}); }), ErrorCode::schema);
    EXPECT_EQ(code_of([] { FeatureSchema({FeatureDescriptor::categorical("c", {})}); }), ErrorCode::schema);
    EXPECT_EQ(code_of([] { FeatureSchema({FeatureDescriptor::categorical("c", {"a", "a"})}); }), ErrorCode::schema);
    EXPECT_EQ(code_of([] {
                  schema_from_json(json::parse(R"({"features":[{"name":"c","kind":"categorical","levels":["a"],"range":[0,1]}]})"));
              }),
              ErrorCode::schema);
    EXPECT_EQ(code_of([] {
                  schema_from_json(json::parse(R"({"features":[{"name":"c","kind":"ordinal"}]})"));
              }),
              ErrorCode::schema);
}

TEST(Schema, JsonRoundTripIncludingOpenRanges) {
    auto doc = schema_from_json(json::parse(R"({
        "features":[
          {"name":"a","kind":"numeric","range":[0,null]},
          {"name":"b","kind":"numeric","range":[null,3.5],"integer_valued":true,"fixed":true},
          {"name":"c","kind":"numeric"},
          {"name":"d","kind":"categorical","levels":["p","q","r"],"fixed":true}],
        "outcome":{"name":"t","kind":"regression"}})"));
    auto text = schema_to_json(doc.schema, doc.outcome);
    auto again = schema_from_json(text);
    EXPECT_TRUE(again.schema == doc.schema);
    ASSERT_TRUE(again.outcome);
    EXPECT_EQ(again.outcome->task, Task::regression);
    EXPECT_TRUE(text["features"][1]["range"][0].is_null());
    EXPECT_FALSE(text["features"][2].contains("range"));
}

TEST(ValidateInstance, MatchingInstanceIsOk) {
    auto doc = mixed_schema();
    EXPECT_TRUE(validate_instance(Instance{5, 2, 1}, doc.schema).empty());
}

TEST(ValidateInstance, BelowMinGivesOneViolation) {
    auto doc = mixed_schema();
    auto v = validate_instance(Instance{-1, 2, 1}, doc.schema);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].feature, "x");
}

TEST(ValidateInstance, BadLevelAndAboveMaxGiveTwoViolations) {
    auto doc = mixed_schema();
    auto v = validate_instance(Instance{11, 2, 7}, doc.schema);
    ASSERT_EQ(v.size(), 2u);
    std::vector<std::string> names{v[0].feature, v[1].feature};
    std::sort(names.begin(), names.end());
    EXPECT_EQ(names, (std::vector<std::string>{"c", "x"}));
}

TEST(ValidateInstance, IntegralityAndArity) {
    auto doc = mixed_schema();
    auto v = validate_instance(Instance{1, 2.5, 0}, doc.schema);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].feature, "n");
    EXPECT_EQ(validate_instance(Instance{1, 2}, doc.schema).size(), 1u);
}

TEST(InstanceJson, ObjectAndArrayFormsAgree) {
    auto doc = mixed_schema();
    Instance x{2.25, 3, 1};
    auto obj = instance_to_json(doc.schema, x);
    EXPECT_EQ(obj["c"], "b");
    EXPECT_EQ(instance_from_json(doc.schema, obj), x);
    EXPECT_EQ(instance_from_json(doc.schema, json::parse(R"([2.25, 3, "b"])")), x);
    EXPECT_EQ(code_of([&] { instance_from_json(doc.schema, json::parse(R"({"x":1,"n":2})")); }), ErrorCode::parse);
    EXPECT_EQ(code_of([&] { instance_from_json(doc.schema, json::parse(R"({"x":1,"n":2,"c":"b","z":0})")); }),
              ErrorCode::parse);
}

TEST(Target, IntervalValidation) {
    EXPECT_NO_THROW((DesiredTarget{0.2, 0.8, std::nullopt}.validate(Task::classification)));
    EXPECT_THROW((DesiredTarget{0.8, 0.2, std::nullopt}.validate()), Error);
    EXPECT_THROW((DesiredTarget{0.5, 1.5, std::nullopt}.validate(Task::classification)), Error);
    EXPECT_NO_THROW((DesiredTarget{-5, 50, std::nullopt}.validate(Task::regression)));
}

TEST(FormatDouble, ShortestRoundTrip) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        EXPECT_EQ(*parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-0.0), "0");
    EXPECT_FALSE(parse_double("1.5x"));
    EXPECT_FALSE(parse_double(""));
}
