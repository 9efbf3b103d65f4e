#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kindsleep/concepts.hpp"
#include "kindsleep/metrics.hpp"
#include "kindsleep/preprocess.hpp"
#include "kindsleep/synth.hpp"

using namespace kindsleep;

TEST_CASE("generation is deterministic per (seed, index)") {
    SynthConfig cfg;
    cfg.n_studies = 3;
    cfg.duration_s = 3600;
    const SleepStudy a = generate_study(cfg, 1);
    const SleepStudy b = generate_study(cfg, 1);
    CHECK(a.signal.samples == b.signal.samples);
    CHECK(a.signal.validity == b.signal.validity);
    CHECK(a.events.size() == b.events.size());
    CHECK(a.reference_ahi == b.reference_ahi);
    CHECK(a.clinical.bmi == b.clinical.bmi);

    SynthConfig other = cfg;
    other.seed = 43;
    CHECK(generate_study(other, 1).signal.samples != a.signal.samples);
}

TEST_CASE("severity mix forces the reference AHI class") {
    SynthConfig normal;
    normal.n_studies = 15;
    normal.duration_s = 3600;
    normal.severity_mix = {1, 0, 0, 0};
    for (const auto& s : generate_cohort(normal)) {
        CHECK(s.reference_ahi < 5.0);
        CHECK(severity_of_study(s) == SeverityClass::Normal);
    }

    SynthConfig severe = normal;
    severe.severity_mix = {0, 0, 0, 1};
    for (const auto& s : generate_cohort(severe)) CHECK(s.reference_ahi >= 30.0);
}

TEST_CASE("reference AHI is consistent with the concept oracle") {
    SynthConfig cfg;
    cfg.n_studies = 10;
    cfg.duration_s = 7200;
    for (const auto& s : generate_cohort(cfg)) {
        const auto c = compute_concepts(s.events, s.signal, s.total_sleep_time_h);
        CHECK(c.ahi_a0h4 == doctest::Approx(s.reference_ahi).epsilon(1e-12));
        CHECK(c.rdi0p >= c.rdi2p);
        CHECK(c.rdi2p >= c.rdi3p);
        CHECK(c.rdi3p >= c.rdi4p);
        CHECK(c.ahi_a0h4a >= c.ahi_a0h4);
    }
}

TEST_CASE("desaturation detector recovers imprinted events on clean signals") {
    SynthConfig cfg;
    cfg.n_studies = 20;
    cfg.duration_s = 7200;
    cfg.noise_sd = 0;
    cfg.artifact_prob = 0;
    cfg.severity_mix = {0, 0, 0.5, 0.5};
    std::size_t deep = 0, recovered = 0;
    for (const auto& s : generate_cohort(cfg)) {
        const auto detected = detect_desaturations(interpolate_invalid(s.signal), 4, 5);
        for (const auto& e : s.events) {
            if (e.kind == EventKind::Desaturation || e.kind == EventKind::Artifact) continue;
            if (e.desat_pct < 4.0) continue;
            ++deep;
            for (const auto& d : detected) {
                const double d_end = d.start_s + d.duration_s;
                const double e_end = e.start_s + e.duration_s;
                if (d.start_s < e_end && d_end > e.start_s - kDesatDescentS) {
                    ++recovered;
                    break;
                }
            }
        }
    }
    REQUIRE(deep > 50);
    CHECK(static_cast<double>(recovered) >= 0.95 * static_cast<double>(deep));
}

TEST_CASE("BMI is positively coupled to severity") {
    SynthConfig cfg;
    cfg.n_studies = 200;
    cfg.duration_s = 7200;
    std::vector<double> bmi, ahi;
    for (const auto& s : generate_cohort(cfg)) {
        bmi.push_back(s.clinical.bmi);
        ahi.push_back(s.reference_ahi);
    }
    CHECK(pearson(bmi, ahi) > 0.0);
}

TEST_CASE("infeasible event density raises a generation error") {
    SynthConfig cfg;
    cfg.n_studies = 1;
    cfg.duration_s = 3600;
    cfg.severity_mix = {0, 0, 0, 1};
    cfg.event_rate_ranges[3] = {3000, 3100};
    CHECK_THROWS_AS(generate_study(cfg, 0), std::runtime_error);
}

TEST_CASE("write_cohort emits one bundle per study plus a manifest") {
    SynthConfig cfg;
    cfg.n_studies = 3;
    cfg.duration_s = 1200;
    const auto dir = std::filesystem::temp_directory_path() / "kindsleep_test_cohort";
    std::filesystem::remove_all(dir);
    write_cohort(generate_cohort(cfg), dir);
    std::size_t bundles = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_directory()) ++bundles;
    CHECK(bundles == 3);
    std::ifstream manifest(dir / "manifest.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(manifest, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 4);  // header + 3 rows
}

TEST_CASE("config validation") {
    SynthConfig bad;
    bad.severity_mix = {0.5, 0.5, 0.5, 0};
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    SynthConfig nest;
    nest.event_rate_ranges[0] = {0, 10};  // crosses the class boundary at 5
    CHECK_THROWS_AS(nest.validate(), ValidationError);

    SynthConfig cfg;
    cfg.n_studies = 2;
    cfg.duration_s = 1800;
    CHECK_THROWS_AS(generate_study(cfg, 5), ValidationError);
}
