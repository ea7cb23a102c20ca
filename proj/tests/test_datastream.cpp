#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "mkd/datastream.hpp"
#include "support.hpp"

using namespace mkd;

namespace {

std::vector<std::size_t> all_positions(const Stream& s) {
    std::vector<std::size_t> ids;
    for (std::size_t b = 0; b < s.size(); ++b) {
        const auto batch = s.batch(b);
        ids.insert(ids.end(), batch.sample_ids.begin(), batch.sample_ids.end());
    }
    return ids;
}

void check_single_pass(const Stream& s, std::size_t n) {
    auto ids = all_positions(s);
    REQUIRE(ids.size() == n);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(ids[i] == i);
}

}  // namespace

TEST_SUITE("datastream") {
    TEST_CASE("schedules partition the class universe") {
        const auto s = build_schedule("cifar100", 10, BoundaryMode::clear, 0, 3);
        REQUIRE(s.n_tasks() == 10);
        std::set<int> all;
        for (const auto& t : s.tasks) {
            CHECK(t.size() == 10);
            CHECK(std::is_sorted(t.begin(), t.end()));
            for (int c : t) CHECK(all.insert(c).second);
        }
        CHECK(all.size() == 100);
        CHECK(*all.begin() == 0);
        CHECK(*all.rbegin() == 99);
        for (int c = 0; c < 100; ++c) CHECK(std::count(s.tasks[s.task_of(c)].begin(), s.tasks[s.task_of(c)].end(), c) == 1);
        CHECK(s.task_of(100) == -1);

        CHECK(build_schedule("mnist", 1, BoundaryMode::clear, 0, 0).tasks[0].size() == 10);
        CHECK(build_schedule("cifar100", 10, BoundaryMode::clear, 0, 3).tasks == s.tasks);
        CHECK(build_schedule("cifar100", 10, BoundaryMode::clear, 0, 4).tasks != s.tasks);
        CHECK_THROWS_AS(build_schedule("cifar10", 3, BoundaryMode::clear, 0, 0), std::invalid_argument);
        CHECK_THROWS(build_schedule("no-such-set", 2, BoundaryMode::clear, 0, 0));
        CHECK(s.manifest().find("\ntask 0: ") != std::string::npos);
    }

    TEST_CASE("clear stream: single pass, pure batches, schedule order, hints") {
        const Dataset d = testing::label_dataset(4, 50);
        const auto sch = build_schedule("labels", 4, 2, BoundaryMode::clear, 0, 1);
        const Stream s = iter_clear(d, sch, 10, 5);
        CHECK(s.size() == 20);
        check_single_pass(s, d.train_size());
        std::size_t last_task = 0;
        for (std::size_t b = 0; b < s.size(); ++b) {
            const auto batch = s.batch(b);
            CHECK(batch.size() == 10);
            REQUIRE(batch.task_hint);
            const std::size_t t = *batch.task_hint;
            CHECK(t >= last_task);
            last_task = t;
            CHECK(t == (b < 10 ? 0u : 1u));
            for (int y : batch.labels) CHECK(static_cast<std::size_t>(sch.task_of(y)) == t);
            for (std::size_t i = 0; i < batch.size(); ++i) CHECK(d.train_labels[batch.sample_ids[i]] == batch.labels[i]);
        }
        CHECK(s.plan().task_end_batch == std::vector<std::size_t>{9, 19});

        // Short final batch of a task, batches do not cross tasks.
        const Stream s7 = iter_clear(d, sch, 7, 5);
        CHECK(s7.size() == 2 * 15);
        CHECK(s7.batch(14).size() == 2);
    }

    TEST_CASE("determinism and batch size 1") {
        const Dataset d = testing::label_dataset(4, 20);
        const auto sch = build_schedule("labels", 4, 2, BoundaryMode::clear, 0, 1);
        CHECK(all_positions(iter_clear(d, sch, 3, 9)) == all_positions(iter_clear(d, sch, 3, 9)));
        CHECK(all_positions(iter_clear(d, sch, 3, 9)) != all_positions(iter_clear(d, sch, 3, 10)));
        const Stream one = iter_clear(d, sch, 1, 9);
        CHECK(one.size() == d.train_size());
        CHECK(one.batch(0).images.shape() == std::vector<std::size_t>{1, 1, 2, 2});
    }

    TEST_CASE("blurry with zero blur equals the clear stream without hints") {
        const Dataset d = testing::label_dataset(6, 30);
        const auto sch = build_schedule("labels", 6, 3, BoundaryMode::blurry, 0, 2);
        const Stream c = iter_clear(d, sch, 10, 4), b = iter_blurry(d, sch, 10, 0, 4);
        REQUIRE(c.size() == b.size());
        CHECK(all_positions(c) == all_positions(b));
        for (std::size_t i = 0; i < b.size(); ++i) CHECK_FALSE(b.batch(i).task_hint);
    }

    TEST_CASE("2 tasks x 1000 samples, blur 500: exactly 500 mixed positions") {
        const Dataset d = testing::label_dataset(2, 1000, 1);
        const auto sch = build_schedule("labels", 2, 2, BoundaryMode::blurry, 500, 0);
        const Stream s = iter_blurry(d, sch, 10, 500, 7);
        check_single_pass(s, 2000);
        const auto& p = s.plan();
        std::size_t mixed = 0, first = p.mix_prob.size(), last = 0;
        for (std::size_t i = 0; i < p.mix_prob.size(); ++i)
            if (p.mix_prob[i] > 0.0 && p.mix_prob[i] < 1.0) {
                ++mixed;
                first = std::min(first, i);
                last = i;
            }
        CHECK(mixed == 500);
        CHECK(last - first + 1 == 500);
        CHECK(first == 750);
        // Pure outside the window, ramping inside.
        for (std::size_t i = 0; i < first; ++i) CHECK(p.origin_task[i] == 0);
        for (std::size_t i = last + 1; i < 2000; ++i) CHECK(p.origin_task[i] == 1);
        for (std::size_t i = first + 1; i <= last; ++i) CHECK(p.mix_prob[i] > p.mix_prob[i - 1]);
        std::size_t late_from_first = 0, early_from_second = 0;
        for (std::size_t i = first; i < first + 100; ++i) early_from_second += p.origin_task[i] == 1;
        for (std::size_t i = last - 99; i <= last; ++i) late_from_first += p.origin_task[i] == 0;
        CHECK(early_from_second < 50);
        CHECK(late_from_first < 50);
        for (std::size_t b = 0; b < s.size(); ++b) CHECK_FALSE(s.batch(b).task_hint);
    }

    TEST_CASE("blur larger than a task is rejected") {
        const Dataset d = testing::label_dataset(2, 100, 1);
        const auto sch = build_schedule("labels", 2, 2, BoundaryMode::blurry, 500, 0);
        CHECK_THROWS_AS(iter_blurry(d, sch, 10, 500, 0), std::invalid_argument);
    }

    TEST_CASE("task test rows") {
        const Dataset d = testing::label_dataset(4, 5);
        const auto sch = build_schedule("labels", 4, 2, BoundaryMode::clear, 0, 1);
        for (std::size_t k = 0; k < 2; ++k)
            for (auto r : task_test_rows(d, sch, k)) CHECK(static_cast<std::size_t>(sch.task_of(d.test_labels[r])) == k);
    }
}
