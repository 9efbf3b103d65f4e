#include <doctest.h>

#include <cmath>
#include <random>

#include "kindsleep/preprocess.hpp"

using namespace kindsleep;

namespace {

OximetrySignal make_signal(std::vector<double> v) {
    return OximetrySignal::all_valid(std::move(v));
}

}  // namespace

TEST_CASE("pad_or_truncate pads with valid zeros and truncates") {
    const auto s = make_signal(std::vector<double>(25000, 95.0));
    const auto padded = pad_or_truncate(s, 25200);
    REQUIRE(padded.size() == 25200);
    for (std::size_t i = 25000; i < 25200; ++i) {
        CHECK(padded.samples[i] == 0.0);
        CHECK(padded.validity[i] == 1);
    }

    const auto longer = make_signal(std::vector<double>(26000, 95.0));
    CHECK(pad_or_truncate(longer, 25200).size() == 25200);

    const auto same = pad_or_truncate(padded, 25200);
    CHECK(same.samples == padded.samples);

    // Idempotent.
    const auto twice = pad_or_truncate(pad_or_truncate(s, 25200), 25200);
    CHECK(twice.samples == padded.samples);
}

TEST_CASE("interpolate_invalid fills gaps linearly with edge hold") {
    OximetrySignal s = make_signal({96, 0, 98});
    s.validity = {1, 0, 1};
    CHECK(interpolate_invalid(s).samples == std::vector<double>{96, 97, 98});

    OximetrySignal lead = make_signal({0, 95, 97});
    lead.validity = {0, 1, 1};
    CHECK(interpolate_invalid(lead).samples == std::vector<double>{95, 95, 97});

    const auto clean = make_signal({94, 95, 96});
    CHECK(interpolate_invalid(clean).samples == clean.samples);

    OximetrySignal dead = make_signal({1, 2});
    dead.validity = {0, 0};
    CHECK_THROWS_AS(interpolate_invalid(dead), ValidationError);
}

TEST_CASE("savgol window-5 order-2 impulse response") {
    std::vector<double> x(11, 0.0);
    x[5] = 1.0;
    const auto y = savgol_smooth(make_signal(x), 5, 2);
    const double c[5] = {-3.0 / 35, 12.0 / 35, 17.0 / 35, 12.0 / 35, -3.0 / 35};
    for (int j = 0; j < 5; ++j)
        CHECK(std::abs(y.samples[static_cast<std::size_t>(3 + j)] - c[j]) < 1e-12);
    CHECK(std::abs(y.samples[2]) < 1e-12);
    CHECK(std::abs(y.samples[8]) < 1e-12);
}

TEST_CASE("savgol reproduces low-degree polynomials everywhere") {
    // Fixed quadratic from the smoothing contract.
    std::vector<double> q(100);
    for (int t = 0; t < 100; ++t) q[static_cast<std::size_t>(t)] = 0.001 * t * t - 0.2 * t + 95;
    const auto yq = savgol_smooth(make_signal(q), 15, 2);
    for (std::size_t i = 0; i < q.size(); ++i)
        CHECK(std::abs(yq.samples[i] - q[i]) < 1e-9);

    // Constant input stays constant.
    const auto yc = savgol_smooth(make_signal(std::vector<double>(50, 95.0)), 15, 2);
    for (double v : yc.samples) CHECK(v == doctest::Approx(95.0).epsilon(1e-12));

    // Random polynomials of degree <= order, including the one-sided boundaries.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
        const double a = u(rng), b = u(rng), c = u(rng);
        std::vector<double> p(60);
        for (int t = 0; t < 60; ++t)
            p[static_cast<std::size_t>(t)] = a * t * t * 1e-3 + b * t * 0.1 + c;
        const auto y = savgol_smooth(make_signal(p), 15, 2);
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(std::abs(y.samples[i] - p[i]) < 1e-8);
    }
}

TEST_CASE("savgol is linear") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-5, 5);
    std::vector<double> x(40), y(40);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const double a = 1.7, b = -0.4;
    std::vector<double> mix(40);
    for (std::size_t i = 0; i < 40; ++i) mix[i] = a * x[i] + b * y[i];
    const auto sm = savgol_smooth(make_signal(mix), 7, 2);
    const auto sx = savgol_smooth(make_signal(x), 7, 2);
    const auto sy = savgol_smooth(make_signal(y), 7, 2);
    for (std::size_t i = 0; i < 40; ++i)
        CHECK(std::abs(sm.samples[i] - (a * sx.samples[i] + b * sy.samples[i])) < 1e-9);
}

TEST_CASE("savgol validates its configuration") {
    const auto s = make_signal(std::vector<double>(20, 95.0));
    CHECK_THROWS_AS(savgol_smooth(s, 4, 2), ValidationError);
    CHECK_THROWS_AS(savgol_smooth(s, 5, 5), ValidationError);
    CHECK_THROWS_AS(savgol_smooth(make_signal({1, 2, 3}), 5, 2), ValidationError);
    PreprocessConfig bad;
    bad.savgol_window = 14;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("standardize hits zero mean unit population sd") {
    CHECK(standardize(make_signal({0, 2})) == std::vector<double>{-1, 1});
    const auto zeros = standardize(make_signal(std::vector<double>(10, 95.0)));
    for (double v : zeros) CHECK(v == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(80, 100);
    std::vector<double> x(500);
    for (auto& v : x) v = u(rng);
    const auto z = standardize(make_signal(x));
    double mean = 0, var = 0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(z.size());
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(z.size());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
}

TEST_CASE("preprocess pipeline composes and is deterministic") {
    PreprocessConfig cfg;
    const auto constant = make_signal(std::vector<double>(25200, 95.0));
    for (double v : preprocess_pipeline(constant, cfg)) CHECK(v == 0.0);

    const auto shorter = make_signal(std::vector<double>(25000, 95.0));
    CHECK(preprocess_pipeline(shorter, cfg).size() == 25200);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(85, 99);
    OximetrySignal s = make_signal(std::vector<double>(25200));
    for (auto& v : s.samples) v = u(rng);
    s.validity[100] = 0;
    s.validity[101] = 0;
    const auto a = preprocess_pipeline(s, cfg);
    const auto b = preprocess_pipeline(s, cfg);
    CHECK(a == b);
    for (double v : a) CHECK(std::isfinite(v));
}
