#include "doctest.h"
#include "mkd/config.hpp"

using namespace mkd;

TEST_SUITE("config") {
    TEST_CASE("parse, comments and overrides") {
        const auto cfg = config_from_text(
            "# desk run\n"
            "method = derpp   # baseline\n"
            "mkd = on\n"
            "alpha = 0.1\n"
            "conv_channels = 8, 16\n"
            "\n"
            "boundary_mode = blurry\n"
            "blur_scale = 200\n");
        CHECK(cfg.method == Method::derpp);
        CHECK(cfg.mkd == MkdMode::on);
        CHECK(cfg.alpha == 0.1);
        CHECK(cfg.conv_channels == std::vector<std::size_t>{8, 16});
        CHECK(cfg.distill().lambda() == doctest::Approx(10.0));
        CHECK_NOTHROW(cfg.validate());

        RunConfig c = cfg;
        apply_overrides(c, {"lambda=2.5", "conv_channels=4:4", "seed=9"});
        CHECK(c.distill().lambda() == 2.5);
        CHECK(c.conv_channels == std::vector<std::size_t>{4, 4});
        CHECK(c.seed == 9);
        apply_overrides(c, {"lambda=auto"});
        CHECK(c.distill().lambda() == doctest::Approx(10.0));
        CHECK(c.default_run_name() == "derpp+mkd_seed9");

        CHECK_THROWS_AS(config_from_text("nonsense_key = 1\n"), std::invalid_argument);
        CHECK_THROWS_AS(config_from_text("memory_size = -3\n"), std::invalid_argument);
        CHECK_THROWS_AS(config_from_text("method\n"), std::invalid_argument);
        CHECK_THROWS_AS(apply_overrides(c, {"seed"}), std::invalid_argument);
    }

    TEST_CASE("text round trip") {
        RunConfig a;
        a.method = Method::erace;
        a.mkd = MkdMode::single_view;
        a.tau = 2.0;
        a.output_dir = "out";
        const RunConfig b = config_from_text(a.to_text());
        CHECK(b.to_pairs() == a.to_pairs());
    }

    TEST_CASE("validation errors") {
        auto bad = [](const std::string& text) {
            const RunConfig c = config_from_text(text);
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        };
        bad("n_tasks = 3\n");
        bad("blur_scale = 10\n");
        bad("tau = 0\n");
        bad("alpha = 0\n");
        bad("lr = -1\n");
        bad("snapshot_kd = low_quality\nmkd = on\n");
        bad("snapshot_kd = high_quality\nmethod = derpp\n");
        bad("memory_size = 0\n");
        bad("dataset = cifar100\nn_tasks = 3\n");
        CHECK_THROWS(config_from_text("dataset = svhn\n").validate());
    }

    TEST_CASE("grid parsing") {
        const auto g = parse_grid("alpha = 0.001, 0.01\nlambda = 1,5.5, 10\n# note\n");
        REQUIRE(g.size() == 2);
        CHECK(g[0].first == "alpha");
        CHECK(g[1].second == std::vector<std::string>{"1", "5.5", "10"});
        CHECK_THROWS(parse_grid("alpha =\n"));
    }
}
