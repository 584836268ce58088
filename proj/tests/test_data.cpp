#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "tea/dataset.hpp"

namespace {

std::filesystem::path write_temp_csv(const std::string& name, const std::string& content) {
    const std::filesystem::path path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

tea::Dataset make_line(std::size_t n) {
    tea::Dataset d;
    d.n = n;
    d.d = 1;
    d.feature_names = {"x"};
    for (std::size_t i = 0; i < n; ++i) {
        d.features.push_back(static_cast<double>(i));
        d.labels.push_back(i % 2 == 0 ? -1 : 1);
        d.row_ids.push_back(static_cast<std::int64_t>(i));
    }
    d.check();
    return d;
}

}  // namespace

TEST_CASE("load_csv infers numeric and categorical columns") {
    const auto path = write_temp_csv("tea_basic.csv",
                                     "age,color,score,label\n"
                                     "25,red,1.5,yes\n"
                                     "30,blue,2.5,no\n"
                                     "17,red,0.5,no\n"
                                     "40,green,3.5,yes\n");
    const tea::Dataset d = tea::load_csv(path.string(), "label", "yes");
    CHECK(d.n == 4);
    CHECK(d.d == 5);
    const std::vector<std::string> names = {"age", "color=blue", "color=green", "color=red",
                                            "score"};
    CHECK(d.feature_names == names);
    CHECK(d.labels == std::vector<int>{1, -1, -1, 1});
    CHECK(d.row_ids == std::vector<std::int64_t>{0, 1, 2, 3});
    CHECK(d.row(0)[0] == 25.0);
    CHECK(d.row(0)[3] == 1.0);  // color=red
    CHECK(d.row(1)[1] == 1.0);  // color=blue
    CHECK(d.row(3)[4] == 3.5);
    CHECK(d.feature_index("score") == 4);
    CHECK_THROWS(d.feature_index("missing"));
}

TEST_CASE("load_csv rejects malformed input") {
    const auto mixed = write_temp_csv("tea_mixed.csv", "a,label\n1,yes\nx,no\n");
    CHECK_THROWS(tea::load_csv(mixed.string(), "label", "yes"));

    const auto empty_cell = write_temp_csv("tea_empty.csv", "a,label\n1,yes\n,no\n");
    CHECK_THROWS(tea::load_csv(empty_cell.string(), "label", "yes"));

    const auto no_label = write_temp_csv("tea_nolabel.csv", "a,b\n1,2\n");
    CHECK_THROWS(tea::load_csv(no_label.string(), "label", "yes"));

    const auto no_rows = write_temp_csv("tea_norows.csv", "a,label\n");
    CHECK_THROWS(tea::load_csv(no_rows.string(), "label", "yes"));

    CHECK_THROWS(tea::load_csv("/nonexistent/file.csv", "label", "yes"));
}

TEST_CASE("load_csv handles quoted fields") {
    const auto path = write_temp_csv("tea_quoted.csv",
                                     "name,label\n"
                                     "\"a,b\",yes\n"
                                     "\"say \"\"hi\"\"\",no\n");
    const tea::Dataset d = tea::load_csv(path.string(), "label", "yes");
    CHECK(d.n == 2);
    const std::vector<std::string> names = {"name=a,b", "name=say \"hi\""};
    CHECK(d.feature_names == names);
}

TEST_CASE("split is disjoint, ordered, and deterministic") {
    const tea::Dataset d = make_line(20);
    const auto [train, test] = tea::split(d, 0.25, 42);
    CHECK(train.n == 15);
    CHECK(test.n == 5);

    std::set<std::int64_t> seen;
    for (const auto id : train.row_ids) seen.insert(id);
    for (const auto id : test.row_ids) seen.insert(id);
    CHECK(seen.size() == 20);
    CHECK(std::is_sorted(train.row_ids.begin(), train.row_ids.end()));
    CHECK(std::is_sorted(test.row_ids.begin(), test.row_ids.end()));

    const auto [train2, test2] = tea::split(d, 0.25, 42);
    CHECK(train2.row_ids == train.row_ids);
    const auto [train3, test3] = tea::split(d, 0.25, 43);
    CHECK(train3.row_ids != train.row_ids);

    // the test-row count is clamped so both sides stay nonempty
    const auto [tiny_train, tiny_test] = tea::split(d, 0.01, 1);
    CHECK(tiny_test.n == 1);
    const auto [big_train, big_test] = tea::split(d, 0.99, 1);
    CHECK(big_train.n == 1);
    CHECK_THROWS(tea::split(d, 0.0, 1));
    CHECK_THROWS(tea::split(d, 1.0, 1));
}

TEST_CASE("subset keeps order and row ids") {
    const tea::Dataset d = make_line(10);
    const tea::Dataset s = tea::subset(d, {7, 2, 5});
    CHECK(s.n == 3);
    CHECK(s.row_ids == std::vector<std::int64_t>{7, 2, 5});
    CHECK(s.row(0)[0] == 7.0);
    CHECK(s.labels[1] == d.labels[2]);
    CHECK_THROWS(tea::subset(d, {11}));
}

TEST_CASE("flip_labels flips an exact count and is undone by its mask") {
    const tea::Dataset d = make_line(40);
    const auto [flipped, record] = tea::flip_labels(d, 0.25, 9);
    CHECK(record.fraction == 0.25);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < d.n; ++i)
        if (flipped.labels[i] != d.labels[i]) ++changed;
    CHECK(changed == 10);
    std::size_t marked = 0;
    for (std::size_t i = 0; i < d.n; ++i)
        if (record.flipped_mask[i]) {
            ++marked;
            CHECK(flipped.labels[i] == -d.labels[i]);
        }
    CHECK(marked == 10);

    const tea::Dataset restored = tea::apply_mask(flipped, record.flipped_mask);
    CHECK(restored.labels == d.labels);

    const auto [again, record2] = tea::flip_labels(d, 0.25, 9);
    CHECK(again.labels == flipped.labels);

    const nlohmann::json j = tea::corruption_to_json(record, d);
    CHECK(j.at("seed").get<std::uint64_t>() == 9);
    CHECK(j.at("fraction").get<double>() == 0.25);
    CHECK(j.at("flipped_row_ids").size() == 10);
}

TEST_CASE("inject_domain_mismatch shrinks and corrupts the subgroup") {
    tea::Dataset d;
    d.n = 20;
    d.d = 2;
    d.feature_names = {"age", "z"};
    for (std::size_t i = 0; i < d.n; ++i) {
        const double age = i < 10 ? 16.0 : 30.0;
        d.features.push_back(age);
        d.features.push_back(0.5);
        d.labels.push_back(-1);
        d.row_ids.push_back(static_cast<std::int64_t>(i));
    }
    d.check();

    const auto [out, record] = tea::inject_domain_mismatch(d, "age", 18.0, 4, 3, 21);
    CHECK(out.n == 14);
    std::size_t subgroup = 0, positive_subgroup = 0, marked = 0;
    for (std::size_t i = 0; i < out.n; ++i) {
        const bool in_sub = out.row(i)[0] < 18.0;
        if (in_sub) {
            ++subgroup;
            if (out.labels[i] == 1) ++positive_subgroup;
        }
        if (record.flipped_mask[i]) {
            ++marked;
            CHECK(in_sub);
            CHECK(out.labels[i] == 1);
        }
    }
    CHECK(subgroup == 4);
    CHECK(positive_subgroup == 3);
    CHECK(marked == 3);
    CHECK(record.fraction == doctest::Approx(3.0 / 14.0));

    const auto [out2, record2] = tea::inject_domain_mismatch(d, "age", 18.0, 4, 3, 21);
    CHECK(out2.row_ids == out.row_ids);
    CHECK(out2.labels == out.labels);

    CHECK_THROWS(tea::inject_domain_mismatch(d, "age", 18.0, 11, 0, 1));  // keep > subgroup
    CHECK_THROWS(tea::inject_domain_mismatch(d, "age", 18.0, 4, 5, 1));   // flip > keep
    CHECK_THROWS(tea::inject_domain_mismatch(d, "missing", 18.0, 1, 0, 1));
}
