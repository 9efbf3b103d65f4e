// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier criteria share a single trained pipeline.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kindsleep/concepts.hpp"
#include "kindsleep/experiments.hpp"
#include "kindsleep/metrics.hpp"
#include "kindsleep/nn.hpp"
#include "kindsleep/preprocess.hpp"
#include "kindsleep/regressor.hpp"
#include "kindsleep/slam.hpp"
#include "kindsleep/synth.hpp"

namespace fs = std::filesystem;
using namespace kindsleep;

namespace {

bool g_all_pass = true;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL") << " — "
              << detail << std::endl;
    if (!pass) g_all_pass = false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0, 1);
    nn::Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient checks for every layer type plus the
// regressor's regularized loss, >= 20 random shapes each.
// ---------------------------------------------------------------------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(1, 4);
    std::uniform_int_distribution<int> seq(6, 14);
    double worst = 0;
    std::string worst_site;
    auto note = [&](const std::string& site, const nn::GradCheckReport& rep) {
        if (rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_site = site + "/" + rep.worst_param;
        }
    };

    for (int trial = 0; trial < 20; ++trial) {
        const int T = seq(rng), in = dim(rng), out = dim(rng);
        const int kernel = 2 * std::uniform_int_distribution<int>(0, 2)(rng) + 1;

        {
            nn::Conv1d layer(in, out, kernel, rng);
            const nn::Matrix x = random_matrix(T, in, rng);
            const nn::Matrix R = random_matrix(T, out, rng);
            auto loss = [&] { return layer.forward(x).cwiseProduct(R).sum(); };
            auto back = [&] {
                for (auto* p : layer.params()) p->zero_grad();
                layer.forward(x);
                layer.backward(R);
            };
            note("conv1d", nn::grad_check(loss, back, layer.params()));
        }
        {
            nn::BatchNorm1d layer(in);
            const nn::Matrix x = random_matrix(std::max(T, 2), in, rng);
            const nn::Matrix R = random_matrix(x.rows(), in, rng);
            auto loss = [&] { return layer.forward(x, true).cwiseProduct(R).sum(); };
            auto back = [&] {
                for (auto* p : layer.params()) p->zero_grad();
                layer.forward(x, true);
                layer.backward(R);
            };
            note("batchnorm", nn::grad_check(loss, back, layer.params()));
        }
        {
            nn::BiLstm layer(in, out, rng);
            const nn::Matrix x = random_matrix(T, in, rng);
            const nn::Matrix R = random_matrix(T, 2 * out, rng);
            auto loss = [&] { return layer.forward(x).cwiseProduct(R).sum(); };
            auto back = [&] {
                for (auto* p : layer.params()) p->zero_grad();
                layer.forward(x);
                layer.backward(R);
            };
            note("bilstm", nn::grad_check(loss, back, layer.params()));
        }
        {
            // Dense layers straddling an inference-mode dropout.
            nn::Dense d1(in, out + 1, rng);
            nn::Dropout drop(0.5);
            nn::Dense d2(out + 1, out, rng);
            std::mt19937_64 drop_rng(1);
            const nn::Matrix x = random_matrix(T, in, rng);
            const nn::Matrix R = random_matrix(T, out, rng);
            std::vector<nn::Param*> params = d1.params();
            for (auto* p : d2.params()) params.push_back(p);
            auto loss = [&] {
                return d2.forward(drop.forward(d1.forward(x), false, drop_rng))
                    .cwiseProduct(R)
                    .sum();
            };
            auto back = [&] {
                for (auto* p : params) p->zero_grad();
                d2.forward(drop.forward(d1.forward(x), false, drop_rng));
                d1.backward(drop.backward(d2.backward(R)));
            };
            note("dense+dropout_off", nn::grad_check(loss, back, params));
        }
        {
            nn::Attention layer(T, in, out, rng);
            const nn::Matrix x = random_matrix(T, in, rng);
            const nn::Vector r = random_matrix(in, 1, rng);
            auto loss = [&] { return layer.forward(x).dot(r); };
            auto back = [&] {
                for (auto* p : layer.params()) p->zero_grad();
                layer.forward(x);
                layer.backward(r);
            };
            note("attention", nn::grad_check(loss, back, layer.params()));
        }
        {
            // Regressor's regularized squared-error loss.
            const int hid = dim(rng) + 1, n = seq(rng);
            std::normal_distribution<double> g(0, 0.7);
            MlpRegressor reg;
            reg.W1.resize(hid, in);
            reg.b1.resize(hid);
            reg.W2.resize(1, hid);
            for (Eigen::Index i = 0; i < reg.W1.size(); ++i) reg.W1.data()[i] = g(rng);
            for (int i = 0; i < hid; ++i) reg.b1(i) = g(rng);
            for (int i = 0; i < hid; ++i) reg.W2(0, i) = g(rng);
            reg.b2 = g(rng);
            reg.l2_penalty_ = 0.05;
            Eigen::MatrixXd x = random_matrix(n, in, rng);
            Eigen::VectorXd y = random_matrix(n, 1, rng);

            Eigen::MatrixXd dW1;
            Eigen::VectorXd db1;
            Eigen::RowVectorXd dW2;
            double db2 = 0;
            reg.loss_and_gradients(x, y, dW1, db1, dW2, db2);
            const double h = 1e-5;
            auto loss_at = [&] {
                Eigen::MatrixXd t1;
                Eigen::VectorXd t2;
                Eigen::RowVectorXd t3;
                double t4;
                return reg.loss_and_gradients(x, y, t1, t2, t3, t4);
            };
            auto fd_block = [&](double* data, Eigen::Index cnt, const double* grad) {
                for (Eigen::Index i = 0; i < cnt; ++i) {
                    const double saved = data[i];
                    data[i] = saved + h;
                    const double lp = loss_at();
                    data[i] = saved - h;
                    const double lm = loss_at();
                    data[i] = saved;
                    const double fd = (lp - lm) / (2 * h);
                    const double rel = std::abs(fd - grad[i]) /
                                       std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
                    if (rel > worst) {
                        worst = rel;
                        worst_site = "regressor_loss";
                    }
                }
            };
            fd_block(reg.W1.data(), reg.W1.size(), dW1.data());
            fd_block(reg.b1.data(), reg.b1.size(), db1.data());
            fd_block(reg.W2.data(), reg.W2.size(), dW2.data());
            fd_block(&reg.b2, 1, &db2);
        }
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream msg;
    msg << "max rel err " << worst << " (" << worst_site << ") over 20 shapes per layer, "
        << elapsed << " s";
    report(1, worst < 1e-4 && elapsed < 120.0, msg.str());
}

// ---------------------------------------------------------------------------
// Criterion 2: polynomial smoothing filter.
// ---------------------------------------------------------------------------
void criterion_2() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> coef(-1, 1);
    double worst_poly = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const double a = 0.01 * coef(rng), b = coef(rng), c = 95 + coef(rng);
        std::vector<double> x(60);
        for (std::size_t t = 0; t < x.size(); ++t) {
            const double tt = static_cast<double>(t);
            x[t] = a * tt * tt + b * tt + c;
        }
        for (int window : {5, 15}) {
            const auto sm = savgol_smooth(OximetrySignal::all_valid(x), window, 2);
            for (std::size_t t = 0; t < x.size(); ++t)
                worst_poly = std::max(worst_poly, std::abs(sm.samples[t] - x[t]));
        }
    }

    std::vector<double> impulse(11, 0.0);
    impulse[5] = 1.0;
    const auto resp = savgol_smooth(OximetrySignal::all_valid(impulse), 5, 2);
    const std::array<double, 5> want = {-3.0 / 35, 12.0 / 35, 17.0 / 35, 12.0 / 35, -3.0 / 35};
    double worst_imp = 0;
    for (int j = 3; j <= 7; ++j)
        worst_imp = std::max(
            worst_imp,
            std::abs(resp.samples[static_cast<std::size_t>(j)] -
                     want[static_cast<std::size_t>(j - 3)]));

    std::ostringstream msg;
    msg << "polynomial reproduction err " << worst_poly << ", impulse coefficient err "
        << worst_imp;
    report(2, worst_poly < 1e-8 && worst_imp < 1e-12, msg.str());
}

// ---------------------------------------------------------------------------
// Criterion 3: concept oracle vs an independently coded predicate table.
// ---------------------------------------------------------------------------
ConceptVector predicate_table(const std::vector<RespiratoryEvent>& events, double tst_h) {
    std::array<double, 10> counts{};
    for (const auto& e : events) {
        const bool ap =
            e.kind == EventKind::ObstructiveApnea || e.kind == EventKind::CentralApnea;
        const bool ce = e.kind == EventKind::CentralApnea;
        const bool hy = e.kind == EventKind::Hypopnea && e.flow_reduction_pct > 30.0;
        if (ap || (hy && e.desat_pct >= 4.0)) counts[0] += 1;
        if (ap || (hy && (e.desat_pct >= 4.0 || e.arousal))) counts[1] += 1;
        if (ce || (hy && e.desat_pct >= 3.0)) counts[2] += 1;
        if (ce || (hy && (e.desat_pct >= 4.0 || e.arousal))) counts[3] += 1;
        if (ap || hy) counts[6] += 1;
        if ((ap || hy) && e.desat_pct >= 2.0) counts[7] += 1;
        if ((ap || hy) && e.desat_pct >= 3.0) counts[8] += 1;
        if ((ap || hy) && e.desat_pct >= 4.0) counts[9] += 1;
    }
    std::array<double, 10> a{};
    for (int k : {0, 1, 2, 3, 6, 7, 8, 9})
        a[static_cast<std::size_t>(k)] = counts[static_cast<std::size_t>(k)] / tst_h;
    return ConceptVector::from_array(a);
}

void criterion_3() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> n_events(0, 30);
    std::uniform_int_distribution<int> kind(0, 4);
    std::uniform_real_distribution<double> flow(0, 100), desat(0, 8), unit(0, 1);
    std::uniform_real_distribution<double> tst(1.0, 9.0);
    const auto sig = OximetrySignal::all_valid(std::vector<double>(3600, 95.0));

    std::size_t mismatches = 0, property_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<RespiratoryEvent> events;
        const int n = n_events(rng);
        for (int i = 0; i < n; ++i) {
            RespiratoryEvent e;
            e.kind = static_cast<EventKind>(kind(rng));
            e.flow_reduction_pct = flow(rng);
            e.desat_pct = desat(rng);
            e.arousal = unit(rng) < 0.5;
            events.push_back(e);
        }
        const double t = tst(rng);
        const auto got = compute_concepts(events, sig, t).to_array();
        const auto want = predicate_table(events, t).to_array();
        for (int k : rate_concept_indices())
            if (got[static_cast<std::size_t>(k)] != want[static_cast<std::size_t>(k)])
                ++mismatches;
        if (!(got[6] >= got[7] && got[7] >= got[8] && got[8] >= got[9])) ++property_failures;
        const auto half = compute_concepts(events, sig, 2.0 * t).to_array();
        for (int k : rate_concept_indices())
            if (half[static_cast<std::size_t>(k)] != got[static_cast<std::size_t>(k)] / 2.0)
                ++property_failures;
    }
    std::ostringstream msg;
    msg << mismatches << " mismatches, " << property_failures
        << " property failures over 1000 random event sets";
    report(3, mismatches == 0 && property_failures == 0, msg.str());
}

// ---------------------------------------------------------------------------
// Criterion 4: agreement/classification formulas vs duplicate oracles.
// ---------------------------------------------------------------------------
void criterion_4() {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0, 50);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> y(25), p(25);
        for (auto& v : y) v = u(rng);
        for (auto& v : p) v = u(rng);
        const std::size_t n = y.size();

        double s_abs = 0, s_sq = 0, s_res = 0, s_tot = 0;
        const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            s_abs += std::fabs(p[i] - y[i]);
            s_sq += (p[i] - y[i]) * (p[i] - y[i]);
            s_res += (y[i] - p[i]) * (y[i] - p[i]);
            s_tot += (y[i] - ybar) * (y[i] - ybar);
        }
        const auto rep = agreement_report(y, p);
        worst = std::max(worst, std::abs(rep.mae - s_abs / static_cast<double>(n)));
        worst = std::max(worst,
                         std::abs(rep.rmse - std::sqrt(s_sq / static_cast<double>(n))));
        worst = std::max(worst, std::abs(rep.r2 - (1.0 - s_res / s_tot)));

        // Two-way ANOVA table for the ICC, written out literally.
        double grand = 0;
        for (std::size_t i = 0; i < n; ++i) grand += y[i] + p[i];
        grand /= 2.0 * static_cast<double>(n);
        const double m1 = ybar;
        const double m2 = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
        const double ss_cols = static_cast<double>(n) * ((m1 - grand) * (m1 - grand) +
                                                         (m2 - grand) * (m2 - grand));
        double ss_rows = 0, ss_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double row = (y[i] + p[i]) / 2.0;
            ss_rows += 2.0 * (row - grand) * (row - grand);
            ss_total += (y[i] - grand) * (y[i] - grand) + (p[i] - grand) * (p[i] - grand);
        }
        const double msr = ss_rows / static_cast<double>(n - 1);
        const double msi = ss_cols;
        const double msw = (ss_total - ss_rows - ss_cols) / static_cast<double>(n - 1);
        const double icc_oracle =
            (msr - msw) / (msr + msw + (2.0 / static_cast<double>(n)) * (msi - msw));
        worst = std::max(worst, std::abs(rep.icc - icc_oracle));

        // Bland–Altman from the population sd of the differences.
        double bias = 0;
        for (std::size_t i = 0; i < n; ++i) bias += p[i] - y[i];
        bias /= static_cast<double>(n);
        double var = 0;
        for (std::size_t i = 0; i < n; ++i)
            var += (p[i] - y[i] - bias) * (p[i] - y[i] - bias);
        const double sd = std::sqrt(var / static_cast<double>(n));
        worst = std::max(worst, std::abs(rep.bland_altman.bias - bias));
        worst = std::max(worst, std::abs(rep.bland_altman.loa_low - (bias - 1.96 * sd)));
        worst = std::max(worst, std::abs(rep.bland_altman.loa_high - (bias + 1.96 * sd)));
    }

    using S = SeverityClass;
    const std::vector<S> ref = {S::Normal, S::Normal, S::Mild, S::Mild};
    const std::vector<S> pred = {S::Normal, S::Mild, S::Mild, S::Mild};
    const double f1_err = std::abs(weighted_scores(ref, pred).f1 - 11.0 / 15.0);

    const bool boundaries = severity(4.999) == S::Normal && severity(5.0) == S::Mild &&
                            severity(15.0) == S::Moderate && severity(30.0) == S::Severe;

    std::ostringstream msg;
    msg << "worst oracle deviation " << worst << ", two-class F1 err " << f1_err
        << ", boundaries " << (boundaries ? "ok" : "wrong");
    report(4, worst < 1e-9 && f1_err < 1e-12 && boundaries, msg.str());
}

// ---------------------------------------------------------------------------
// Criteria 5-8, 10 share one trained pipeline (400/100/100 split, seed 42).
// ---------------------------------------------------------------------------
ExperimentConfig pipeline_config() {
    ExperimentConfig cfg;
    cfg.synth.n_studies = 600;
    cfg.split = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
    return cfg;
}

void criterion_5(PipelineResult& run, double train_seconds) {
    std::vector<std::vector<double>> train_sig, test_sig;
    std::vector<ConceptVector> train_y, test_y;
    for (const auto& d : run.train) {
        train_sig.push_back(d.signal);
        train_y.push_back(d.oracle);
    }
    for (const auto& d : run.test) {
        test_sig.push_back(d.signal);
        test_y.push_back(d.oracle);
    }

    bool beats_mean = true;
    std::ostringstream detail;
    for (int k : rate_concept_indices()) {
        double mean = 0;
        for (const auto& c : train_y) mean += c[k];
        mean /= static_cast<double>(train_y.size());
        double mean_mae = 0, slam_mae = 0;
        for (std::size_t i = 0; i < run.test.size(); ++i) {
            mean_mae += std::abs(test_y[i][k] - mean);
            slam_mae += std::abs(run.test[i].predicted[k] - test_y[i][k]);
        }
        mean_mae /= static_cast<double>(run.test.size());
        slam_mae /= static_cast<double>(run.test.size());
        if (!(slam_mae <= 0.5 * mean_mae)) {
            beats_mean = false;
            detail << " [" << ConceptVector::names()[static_cast<std::size_t>(k)] << " "
                   << slam_mae << " vs mean " << mean_mae << "]";
        }
    }

    const auto ridge = ridge_concept_baseline(train_sig, train_y, test_sig, test_y, 1.0);
    double slam_a0h4 = 0;
    for (std::size_t i = 0; i < run.test.size(); ++i)
        slam_a0h4 += std::abs(run.test[i].predicted.ahi_a0h4 - test_y[i].ahi_a0h4);
    slam_a0h4 /= static_cast<double>(run.test.size());
    const bool beats_ridge = slam_a0h4 < ridge[0].mae;

    std::ostringstream msg;
    msg << "rate concepts " << (beats_mean ? ">=50% under mean predictor" : "too weak")
        << detail.str() << "; ahi_a0h4 MAE " << slam_a0h4 << " vs ridge " << ridge[0].mae
        << "; pipeline train " << train_seconds << " s";
    report(5, beats_mean && beats_ridge && train_seconds < 1800.0, msg.str());
}

void criterion_6(const PipelineResult& run) {
    const double r2v = run.in_distribution.agreement.r2;
    const double f1 = run.in_distribution.classification.f1.value;
    std::ostringstream msg;
    msg << "test R2 " << r2v << " (need > 0.7), weighted F1 " << f1 << " (need > 0.6)";
    report(6, r2v > 0.7 && f1 > 0.6, msg.str());
}

void criterion_7(const ExperimentConfig& base, const PipelineResult& run) {
    bool ok = true;
    std::ostringstream msg;
    for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
        ExperimentConfig cfg = base;
        cfg.seed = seed;
        cfg.regressor.seed = seed;

        const auto arms = corruption_ablation(cfg, run);
        const double f1_bad = arms[0].metrics.classification.f1.value;
        const double f1_part = arms[1].metrics.classification.f1.value;
        const double f1_good = arms[2].metrics.classification.f1.value;
        const bool order = f1_good > f1_part && f1_part > f1_bad;

        std::vector<double> ps, f1s;
        for (const auto& row : proportion_sweep(cfg, run)) {
            ps.push_back(row.p);
            f1s.push_back(row.metrics.classification.f1.value);
        }
        const double rho_sweep = spearman(ps, f1s);

        std::vector<double> taus, f1t;
        for (const auto& row : intervention_study(cfg, run)) {
            taus.push_back(row.tau);
            f1t.push_back(row.metrics.classification.f1.value);
        }
        const double rho_tau = spearman(taus, f1t);

        msg << "[seed " << seed << ": F1 " << f1_good << ">" << f1_part << ">" << f1_bad
            << ", sweep rho " << rho_sweep << ", intervention rho " << rho_tau << "] ";
        ok = ok && order && rho_sweep > 0.8 && rho_tau < 0.0;
    }
    report(7, ok, msg.str());
}

void criterion_8(PipelineResult& run) {
    double sum_in = 0, sum_out = 0;
    std::size_t n_in = 0, n_out = 0;
    const std::size_t n_studies = std::min<std::size_t>(run.test.size(), 50);
    for (std::size_t s = 0; s < n_studies; ++s) {
        const auto& d = run.test[s];
        const auto sal = attention_saliency(run.slam, d.signal);
        std::vector<char> inside(sal.size(), 0);
        for (const auto& e : d.events) {
            if (e.kind == EventKind::Artifact || e.desat_pct <= 0) continue;
            const int lo =
                std::max(0, static_cast<int>(std::floor(e.start_s - kDesatDescentS)));
            const int hi = std::min(
                static_cast<int>(sal.size()),
                static_cast<int>(
                    std::ceil(e.start_s + e.duration_s + 2.0 * kDesatRecoveryTauS)));
            for (int t = lo; t < hi; ++t) inside[static_cast<std::size_t>(t)] = 1;
        }
        for (std::size_t t = 0; t < sal.size(); ++t) {
            if (inside[t]) {
                sum_in += sal[t];
                ++n_in;
            } else {
                sum_out += sal[t];
                ++n_out;
            }
        }
    }
    const double mean_in = sum_in / static_cast<double>(n_in);
    const double mean_out = sum_out / static_cast<double>(n_out);
    std::ostringstream msg;
    msg << "mean saliency inside desaturation spans " << mean_in << " vs outside "
        << mean_out << " over " << n_studies << " test studies";
    report(8, mean_in > mean_out, msg.str());
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical CLI reruns.
// ---------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& entry : fs::recursive_directory_iterator(a))
        if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), a));
    std::sort(rel.begin(), rel.end());
    std::size_t b_files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(b))
        if (entry.is_regular_file()) ++b_files;
    if (b_files != rel.size()) return false;
    for (const auto& r : rel)
        if (!fs::exists(b / r) || slurp(a / r) != slurp(b / r)) return false;
    return true;
}

void criterion_9(const fs::path& cli) {
    const fs::path work = fs::temp_directory_path() / "kindsleep_acceptance_cli";
    fs::remove_all(work);
    fs::create_directories(work);

    ExperimentConfig small;
    small.synth.n_studies = 4;
    small.synth.duration_s = 1200;
    {
        std::ofstream out(work / "config.json");
        out << experiment_config_to_json(small);
    }
    {
        std::ofstream out(work / "pred.csv");
        out << "ref,pred\n2,3\n10,8\n22,25\n40,36\n4,6\n17,12\n";
    }

    auto run_cli = [&](const std::string& args, const fs::path& out_dir) {
        const std::string cmd = "\"" + cli.string() + "\" --config \"" +
                                (work / "config.json").string() + "\" --out-dir \"" +
                                out_dir.string() + "\" " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };

    bool ok = true;
    ok = ok && run_cli("synth", work / "synth1");
    ok = ok && run_cli("synth", work / "synth2");
    ok = ok && dirs_identical(work / "synth1", work / "synth2");

    fs::path bundle;
    if (ok) {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(work / "synth1" / "cohort"))
            if (entry.is_directory()) dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        ok = !dirs.empty();
        if (ok) bundle = dirs.front();
    }
    if (ok) {
        ok = ok && run_cli("oracle --study \"" + bundle.string() + "\"", work / "oracle1");
        ok = ok && run_cli("oracle --study \"" + bundle.string() + "\"", work / "oracle2");
        ok = ok && dirs_identical(work / "oracle1", work / "oracle2");
    }
    ok = ok && run_cli("evaluate --pred \"" + (work / "pred.csv").string() + "\"",
                       work / "eval1");
    ok = ok && run_cli("evaluate --pred \"" + (work / "pred.csv").string() + "\"",
                       work / "eval2");
    ok = ok && dirs_identical(work / "eval1", work / "eval2");

    report(9, ok,
           ok ? "synth/oracle/evaluate reruns byte-identical"
              : "CLI rerun outputs differ or a subcommand failed");
}

void criterion_10(const ExperimentConfig& base, const PipelineResult& run) {
    bool ok = true;
    std::ostringstream msg;
    for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
        ExperimentConfig cfg = base;
        cfg.seed = seed;
        const auto rows = pipeline_importance(cfg, run, 5);
        msg << "[seed " << seed << ": top " << rows[0].feature << " (" << rows[0].group
            << ")] ";
        ok = ok && rows[0].group == "concept";
    }
    report(10, ok, msg.str());
}

}  // namespace

int main(int, char** argv) {
    std::cout.setf(std::ios::fixed);
    std::cout.precision(4);
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();

        const ExperimentConfig cfg = pipeline_config();
        const auto t0 = std::chrono::steady_clock::now();
        PipelineResult run = run_pipeline(cfg);
        const double train_seconds = seconds_since(t0);

        criterion_5(run, train_seconds);
        criterion_6(run);
        criterion_7(cfg, run);
        criterion_8(run);
        criterion_9(fs::path(argv[0]).parent_path() / "kindsleep");
        criterion_10(cfg, run);
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 2;
    }
    return g_all_pass ? 0 : 1;
}
