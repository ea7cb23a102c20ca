#include <filesystem>

#include "doctest.h"
#include "mkd/model.hpp"
#include "mkd/momentum_teacher.hpp"
#include "support.hpp"

using namespace mkd;

TEST_SUITE("model") {
    TEST_CASE("tensor basics") {
        Tensor t({3, 2}, std::vector<Scalar>{0, 1, 2, 3, 4, 5});
        CHECK(t.rows() == 3);
        CHECK(t.row_size() == 2);
        CHECK(t.slice_rows(1, 3).storage() == std::vector<Scalar>{2, 3, 4, 5});
        const std::vector<std::size_t> idx{2, 0};
        CHECK(t.gather_rows(idx).storage() == std::vector<Scalar>{4, 5, 0, 1});
        CHECK(t.reshaped({6}).rank() == 1);
        CHECK_THROWS(t.reshaped({4}));
        CHECK_THROWS(Tensor({2, 2}, std::vector<Scalar>{1, 2, 3}));
        const Tensor u = concat_rows(t, Tensor({0, 2}));
        CHECK(u.rows() == 3);
        CHECK_THROWS(concat_rows(t, Tensor({1, 3})));
    }

    TEST_CASE("logits equal the head applied to the embedding") {
        for (auto backbone : {Backbone::cnn, Backbone::mlp}) {
            ArchSpec a;
            a.backbone = backbone;
            a.height = a.width = 8;
            a.conv_channels = {4, 6};
            a.hidden = {12};
            a.feature_dim = 10;
            Classifier m(a);
            m.initialize(3);
            Rng rng = make_rng(0, RngStream::dataset);
            const Tensor x = testing::random_images(5, a, rng);
            const Tensor f = m.features(x), z = m.forward(x);
            REQUIRE(f.shape() == std::vector<std::size_t>{5, 10});
            REQUIRE(z.shape() == std::vector<std::size_t>{5, 10});
            const auto head = m.head_params();
            for (std::size_t r = 0; r < 5; ++r)
                for (std::size_t c = 0; c < a.n_classes; ++c) {
                    double s = head[a.feature_dim * a.n_classes + c];
                    for (std::size_t d = 0; d < a.feature_dim; ++d) s += head[c * a.feature_dim + d] * f.at(r, d);
                    CHECK(z.at(r, c) == doctest::Approx(s).epsilon(1e-12));
                }
            for (auto v : f.storage()) CHECK(v >= 0.0);
        }
    }

    TEST_CASE("empty batch and wrong input shape") {
        Classifier m(testing::tiny_mlp());
        m.initialize(0);
        CHECK(m.forward(Tensor({0, 1, 4, 4})).shape() == std::vector<std::size_t>{0, 6});
        CHECK_THROWS_AS(m.forward(Tensor({2, 1, 5, 4})), std::invalid_argument);
    }

    TEST_CASE("initialization is seeded") {
        Classifier a(testing::tiny_mlp()), b(testing::tiny_mlp()), c(testing::tiny_mlp());
        a.initialize(7), b.initialize(7), c.initialize(8);
        CHECK(a.state() == b.state());
        CHECK(a.state() != c.state());
    }

    TEST_CASE("checkpoint round trip") {
        const auto dir = std::filesystem::temp_directory_path() / "mkd_model_ckpt";
        std::filesystem::create_directories(dir);
        ArchSpec a;
        a.height = a.width = 8;
        a.conv_channels = {3};
        Classifier m(a);
        m.initialize(11);
        m.save(dir / "m.ckpt", {{"alpha", "0.01"}});
        const Classifier back = Classifier::load(dir / "m.ckpt");
        CHECK(back.arch() == a);
        CHECK(back.state() == m.state());
        CHECK(std::filesystem::exists(dir / "m.ckpt.json"));
        CHECK_THROWS(Classifier::load(dir / "missing.ckpt"));
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("predict_labels takes the first maximum") {
        Tensor z({2, 3}, std::vector<Scalar>{0.1, 0.7, 0.2, 1.0, 1.0, 0.0});
        CHECK(predict_labels(z) == std::vector<int>{1, 0});
    }
}
