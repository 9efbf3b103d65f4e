#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "kindsleep/slam.hpp"

using namespace kindsleep;

namespace {

SlamConfig tiny_config() {
    SlamConfig cfg;
    cfg.input_len = 64;
    cfg.n_conv_blocks = 1;
    cfg.filters_per_block = {4};
    cfg.kernel_sizes = {3};
    cfg.lstm_hidden = 4;
    cfg.attention_units = 3;
    cfg.dropout = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 7;
    return cfg;
}

std::vector<double> random_signal(int len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> s(static_cast<std::size_t>(len));
    for (auto& v : s) v = g(rng);
    return s;
}

ConceptVector random_target(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 40);
    std::array<double, ConceptVector::kSize> a{};
    for (auto& v : a) v = u(rng);
    return ConceptVector::from_array(a);
}

}  // namespace

TEST_CASE("whole-network gradients match finite differences") {
    SlamModel model(tiny_config());
    const auto signal = random_signal(64, 1);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 1);
    nn::Vector target(ConceptVector::kSize);
    for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = g(rng);

    auto loss = [&] { return nn::mae_loss(model.forward(signal, true), target); };
    auto backward = [&] {
        for (auto* p : model.params()) p->zero_grad();
        const nn::Vector y = model.forward(signal, true);
        model.backward(nn::mae_loss_grad(y, target), true);
    };
    const auto report = nn::grad_check(loss, backward, model.params(), 1e-3, 1e-5);
    INFO("worst param: ", report.worst_param, " rel err ", report.max_rel_err);
    CHECK(report.pass);
    CHECK(report.n_checked > 500);
}

TEST_CASE("untrained inference is deterministic, clamped, and sized") {
    SlamModel model(tiny_config());
    const auto signal = random_signal(64, 3);
    const ConceptVector a = predict_concepts(model, signal);
    const ConceptVector b = predict_concepts(model, signal);
    CHECK(a.to_array() == b.to_array());
    for (int k : rate_concept_indices()) CHECK(a[k] >= 0.0);
    CHECK(a.avgsat >= 0.0);
    CHECK(a.avgsat <= 100.0);
    CHECK(a.minsat >= 0.0);
    CHECK(a.minsat <= 100.0);
    CHECK_FALSE(model.trained());

    const auto sal = attention_saliency(model, signal);
    REQUIRE(sal.size() == 64);
    for (double v : sal) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(attention_saliency(model, signal) == sal);
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
    std::mt19937_64 rng(5);
    std::vector<std::vector<double>> xs, xv;
    std::vector<ConceptVector> ys, yv;
    for (int i = 0; i < 12; ++i) {
        xs.push_back(random_signal(64, 100 + static_cast<std::uint64_t>(i)));
        ys.push_back(random_target(rng));
    }
    for (int i = 0; i < 4; ++i) {
        xv.push_back(random_signal(64, 200 + static_cast<std::uint64_t>(i)));
        yv.push_back(random_target(rng));
    }
    const auto cfg = tiny_config();
    SlamModel m1 = train_slam(xs, ys, xv, yv, cfg);
    SlamModel m2 = train_slam(xs, ys, xv, yv, cfg);

    CHECK(m1.trained());
    REQUIRE(m1.history().size() == static_cast<std::size_t>(cfg.epochs));
    for (std::size_t e = 0; e < m1.history().size(); ++e) {
        CHECK(m1.history()[e].train_mae == m2.history()[e].train_mae);
        CHECK(m1.history()[e].val_mae == m2.history()[e].val_mae);
    }
    CHECK(predict_concepts(m1, xv[0]).to_array() == predict_concepts(m2, xv[0]).to_array());

    // The returned model reproduces the best recorded validation MAE.
    double best = m1.history()[0].val_mae;
    for (const auto& e : m1.history()) best = std::min(best, e.val_mae);
    double recomputed = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const nn::Vector pred = m1.forward(xv[i], false);
        const auto arr = yv[i].to_array();
        nn::Vector scaled(ConceptVector::kSize);
        for (int k = 0; k < ConceptVector::kSize; ++k)
            scaled(k) = (arr[static_cast<std::size_t>(k)] - m1.target_mean(k)) / m1.target_sd(k);
        recomputed += nn::mae_loss(pred, scaled);
    }
    recomputed /= static_cast<double>(xv.size());
    CHECK(recomputed == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("training makes progress on a learnable mapping") {
    // Target rate tracks the signal's DC level.
    std::vector<std::vector<double>> xs, xv;
    std::vector<ConceptVector> ys, yv;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> level(-2, 2);
    auto make = [&](std::vector<std::vector<double>>& x, std::vector<ConceptVector>& y,
                    int n, std::uint64_t base) {
        for (int i = 0; i < n; ++i) {
            const double c = level(rng);
            auto s = random_signal(64, base + static_cast<std::uint64_t>(i));
            for (auto& v : s) v = 0.1 * v + c;
            std::array<double, ConceptVector::kSize> a{};
            for (auto& v : a) v = 10 * c + 20;
            x.push_back(std::move(s));
            y.push_back(ConceptVector::from_array(a));
        }
    };
    make(xs, ys, 24, 1000);
    make(xv, yv, 8, 2000);
    auto cfg = tiny_config();
    cfg.epochs = 20;
    cfg.lr = 3e-3;
    const SlamModel m = train_slam(xs, ys, xv, yv, cfg);
    CHECK(m.history().back().train_mae < 0.5 * m.history().front().train_mae);
}

TEST_CASE("save/load round-trips the model bit-for-bit") {
    std::mt19937_64 rng(13);
    std::vector<std::vector<double>> xs, xv;
    std::vector<ConceptVector> ys, yv;
    for (int i = 0; i < 8; ++i) {
        xs.push_back(random_signal(64, 300 + static_cast<std::uint64_t>(i)));
        ys.push_back(random_target(rng));
    }
    xv.push_back(random_signal(64, 400));
    yv.push_back(random_target(rng));
    auto cfg = tiny_config();
    cfg.epochs = 2;
    SlamModel m = train_slam(xs, ys, xv, yv, cfg);

    const auto path = std::filesystem::temp_directory_path() / "kindsleep_test_slam.bin";
    m.save(path);
    SlamModel back = SlamModel::load(path);
    CHECK(back.trained());
    CHECK(back.config().input_len == cfg.input_len);
    CHECK(back.config().lstm_hidden == cfg.lstm_hidden);
    CHECK(back.history().size() == m.history().size());
    for (int i = 0; i < 5; ++i) {
        const auto sig = random_signal(64, 500 + static_cast<std::uint64_t>(i));
        CHECK(predict_concepts(back, sig).to_array() == predict_concepts(m, sig).to_array());
    }
}

TEST_CASE("summary features are per-minute means") {
    std::vector<double> s(120);
    std::iota(s.begin(), s.end(), 0.0);
    const auto f = summary_features(s);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == doctest::Approx(29.5).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(89.5).epsilon(1e-12));
    CHECK(summary_features(std::vector<double>(kSignalLen, 95.0)).size() == 420);
    CHECK_THROWS_AS(summary_features(std::vector<double>(59, 95.0)), ValidationError);
}

TEST_CASE("ridge at lambda zero matches ordinary least squares") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0, 1);
    const int n = 20, d = 3;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    Eigen::MatrixXd A(n, d + 1);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(d);
        for (int j = 0; j < d; ++j) {
            row[static_cast<std::size_t>(j)] = g(rng);
            A(i, j) = row[static_cast<std::size_t>(j)];
        }
        A(i, d) = 1.0;
        t(i) = 2 + 3 * row[0] - row[1] + 0.5 * row[2] + 0.01 * g(rng);
        y.push_back(t(i));
        x.push_back(std::move(row));
    }
    const Eigen::VectorXd beta = (A.transpose() * A).ldlt().solve(A.transpose() * t);
    RidgeModel m;
    m.fit(x, y, 0.0);
    for (int i = 0; i < n; ++i) {
        const double want = A.row(i) * beta;
        CHECK(m.predict(x[static_cast<std::size_t>(i)]) ==
              doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("ridge refuses a singular system at lambda zero") {
    // Second column duplicates the first.
    std::vector<std::vector<double>> x = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
    std::vector<double> y = {1, 2, 3, 4};
    RidgeModel m;
    CHECK_THROWS_AS(m.fit(x, y, 0.0), ValidationError);
    m.fit(x, y, 1.0);  // regularized solve is fine
    CHECK(std::isfinite(m.predict({2, 2})));
}

TEST_CASE("heavily regularized ridge baseline degrades to the mean predictor") {
    std::mt19937_64 rng(19);
    std::vector<std::vector<double>> xtr, xte;
    std::vector<ConceptVector> ytr, yte;
    for (int i = 0; i < 30; ++i) {
        xtr.push_back(random_signal(120, 600 + static_cast<std::uint64_t>(i)));
        ytr.push_back(random_target(rng));
    }
    for (int i = 0; i < 10; ++i) {
        xte.push_back(random_signal(120, 700 + static_cast<std::uint64_t>(i)));
        yte.push_back(random_target(rng));
    }
    const auto rows = ridge_concept_baseline(xtr, ytr, xte, yte, 1e9);
    REQUIRE(rows.size() == ConceptVector::kSize);
    for (int k = 0; k < ConceptVector::kSize; ++k) {
        CHECK(rows[static_cast<std::size_t>(k)].concept_name ==
              ConceptVector::names()[static_cast<std::size_t>(k)]);
        double mean = 0;
        for (const auto& c : ytr) mean += c[k];
        mean /= static_cast<double>(ytr.size());
        double mae = 0;
        for (const auto& c : yte) mae += std::abs(c[k] - mean);
        mae /= static_cast<double>(yte.size());
        CHECK(rows[static_cast<std::size_t>(k)].mae == doctest::Approx(mae).epsilon(1e-4));
        CHECK(rows[static_cast<std::size_t>(k)].rmse >= rows[static_cast<std::size_t>(k)].mae);
    }
}
