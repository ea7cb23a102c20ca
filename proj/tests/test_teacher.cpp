#include <cmath>

#include "doctest.h"
#include "mkd/momentum_teacher.hpp"
#include "support.hpp"

using namespace mkd;

TEST_SUITE("teacher") {
    TEST_CASE("lambda of alpha") {
        CHECK(lambda_of_alpha(0.01) == 5.5);
        CHECK(lambda_of_alpha(1.0) == doctest::Approx(14.5).epsilon(1e-12));
        CHECK(lambda_of_alpha(0.1) == doctest::Approx(10.0).epsilon(1e-12));
        CHECK(lambda_of_alpha(1e-4) == 0.0);
        CHECK_THROWS(lambda_of_alpha(0.0));
        CHECK_THROWS(lambda_of_alpha(1.5));
        for (double a = 0.001; a < 1.0; a *= 1.7) CHECK(lambda_of_alpha(a * 1.7 > 1 ? 1 : a * 1.7) >= lambda_of_alpha(a));
    }

    TEST_CASE("EMA extremes and a single step") {
        const auto arch = testing::tiny_mlp();
        Classifier s(arch), other(arch);
        s.initialize(1), other.initialize(2);

        TeacherState copy(s, 1.0);
        copy.ema_update(other.params());
        CHECK(std::vector<Scalar>(copy.params().begin(), copy.params().end()) == other.state());

        TeacherState half(s, 0.5);
        half.ema_update(other.params());
        for (std::size_t i = 0; i < s.param_count(); ++i)
            CHECK(half.params()[i] == doctest::Approx(0.5 * s.state()[i] + 0.5 * other.state()[i]));
        CHECK(half.n_updates() == 1);

        TeacherState fixed(s, 0.3);
        for (int i = 0; i < 10; ++i) fixed.ema_update(s.params());
        for (std::size_t i = 0; i < s.param_count(); ++i) CHECK(fixed.params()[i] == doctest::Approx(s.state()[i]));

        const std::vector<Scalar> short_vec(3);
        CHECK_THROWS(fixed.ema_update(short_vec));
    }

    TEST_CASE("averaged weights and inference modes") {
        const auto arch = testing::tiny_mlp();
        Classifier s(arch), o(arch);
        s.initialize(1), o.initialize(2);
        TeacherState t(s, 1.0);
        t.ema_update(o.params());
        const auto avg = average_weights(s.params(), t.params());
        for (std::size_t i = 0; i < avg.size(); ++i) CHECK(avg[i] == doctest::Approx((s.state()[i] + o.state()[i]) / 2));
        CHECK(inference_model(s, &t, InferenceMode::averaged).state() == avg);
        CHECK(inference_model(s, &t, InferenceMode::teacher).state() == o.state());
        CHECK(inference_model(s, nullptr, InferenceMode::averaged).state() == s.state());
        CHECK(parse_inference_mode("averaged") == InferenceMode::averaged);
        CHECK_THROWS(parse_inference_mode("mean"));
    }

    TEST_CASE("distill config validation") {
        DistillConfig c;
        CHECK_NOTHROW(c.validate());
        c.tau = 0.0;
        CHECK_THROWS(c.validate());
        c.tau = 4.0;
        c.alpha = 0.0;
        CHECK_THROWS(c.validate());
        c.alpha = 0.01;
        c.lambda_override = 2.0;
        CHECK(c.lambda() == 2.0);
    }
}
