#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "mkd/replay_buffer.hpp"

using namespace mkd;

namespace {

Tensor items(std::size_t first, std::size_t n) {
    Tensor t({n, 1});
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(first + i);
    return t;
}

std::vector<int> labels_for(std::size_t first, std::size_t n, std::size_t n_classes) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((first + i) % n_classes);
    return y;
}

double chi2_p(const std::vector<double>& observed, double expected) {
    double stat = 0.0;
    for (double o : observed) stat += (o - expected) * (o - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST_SUITE("replay_buffer") {
    TEST_CASE("filling, occupancy and n_seen") {
        ReplayBuffer buf(5, {1}, 100);
        Rng rng = make_rng(0, RngStream::reservoir);
        for (std::size_t t = 0; t < 40; ++t) {
            buf.reservoir_update(items(t, 1), labels_for(t, 1, 100), rng);
            CHECK(buf.size() == std::min<std::size_t>(t + 1, 5));
            CHECK(buf.n_seen() == t + 1);
        }
        CHECK_THROWS_AS(ReplayBuffer(0, {1}, 10), std::invalid_argument);
        ReplayBuffer empty(3, {1}, 10);
        CHECK(empty.random_retrieve(4, rng).size() == 0);
    }

    TEST_CASE("inclusion is uniform over the stream (chi-square)") {
        const std::size_t M = 10, n = 100, runs = 20000;
        std::vector<double> counts(n, 0.0);
        Rng rng = make_rng(1, RngStream::reservoir);
        for (std::size_t r = 0; r < runs; ++r) {
            ReplayBuffer buf(M, {1}, n);
            buf.reservoir_update(items(0, n), labels_for(0, n, n), rng);
            for (int y : buf.labels()) counts[static_cast<std::size_t>(y)] += 1.0;
        }
        CHECK(chi2_p(counts, static_cast<double>(runs * M) / n) > 0.01);
    }

    TEST_CASE("retrieval is uniform without replacement") {
        ReplayBuffer buf(20, {1}, 20);
        Rng rng = make_rng(2, RngStream::reservoir);
        buf.reservoir_update(items(0, 20), labels_for(0, 20, 20), rng);
        std::vector<double> counts(20, 0.0);
        const std::size_t draws = 20000;
        for (std::size_t i = 0; i < draws; ++i) {
            const auto m = buf.random_retrieve(5, rng);
            REQUIRE(m.size() == 5);
            std::set<ItemId> distinct(m.ids.begin(), m.ids.end());
            CHECK(distinct.size() == 5);
            for (int y : m.labels) counts[static_cast<std::size_t>(y)] += 1.0;
        }
        CHECK(chi2_p(counts, draws * 5.0 / 20.0) > 0.01);
        CHECK(buf.random_retrieve(64, rng).size() == 20);
    }

    TEST_CASE("stored logits and stale handles") {
        ReplayBuffer buf(2, {1}, 3);
        Rng rng = make_rng(3, RngStream::reservoir);
        Tensor logits({2, 3}, std::vector<Scalar>{1, 2, 3, 4, 5, 6});
        buf.reservoir_update(items(0, 2), labels_for(0, 2, 3), rng, &logits);
        const auto all = buf.all();
        REQUIRE(all.logits.shape() == std::vector<std::size_t>{2, 3});
        CHECK(buf.stored_logits(all.ids[1]) == std::vector<Scalar>{4, 5, 6});

        const Tensor wrong({1, 2});
        const std::vector<ItemId> first{all.ids[0]};
        CHECK_THROWS_AS(buf.update_stored_logits(first, wrong), std::invalid_argument);
        CHECK_THROWS_AS(buf.reservoir_update(items(2, 1), labels_for(2, 1, 3), rng, &wrong), std::invalid_argument);

        // Push until both originals are evicted.
        for (std::size_t t = 2; buf.contains(all.ids[0]) || buf.contains(all.ids[1]); ++t)
            buf.reservoir_update(items(t, 1), labels_for(t, 1, 3), rng);
        const Tensor ok({1, 3});
        CHECK_THROWS_AS(buf.update_stored_logits(first, ok), std::out_of_range);
        CHECK_THROWS_AS(buf.stored_logits(all.ids[0]), std::out_of_range);
        // Rows inserted without logits: a retrieval carries none.
        CHECK(buf.all().logits.empty());
    }

    TEST_CASE("dump writes images and an item table") {
        const auto dir = std::filesystem::temp_directory_path() / "mkd_buffer_dump";
        std::filesystem::remove_all(dir);
        ReplayBuffer buf(3, {1}, 5);
        Rng rng = make_rng(4, RngStream::reservoir);
        buf.reservoir_update(items(0, 3), labels_for(0, 3, 5), rng);
        buf.dump(dir);
        CHECK(std::filesystem::file_size(dir / "images.f64") == 3 * sizeof(double));
        CHECK(std::filesystem::exists(dir / "items.tsv"));
        std::filesystem::remove_all(dir);
    }
}
