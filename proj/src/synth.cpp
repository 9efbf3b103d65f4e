#include "kindsleep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "kindsleep/concepts.hpp"
#include "kindsleep/io.hpp"
#include "kindsleep/regressor.hpp"

namespace fs = std::filesystem;

namespace kindsleep {

namespace {

// Qualifying-event composition: deterministic so the concept mix is a fixed
// function of the event count.
constexpr double kCentralFraction = 0.15;
constexpr double kHypopneaFraction = 0.45;
constexpr double kEventMinDurS = 12.0;
constexpr double kEventMaxDurS = 18.0;
constexpr double kFirstEventOffsetS = 200.0;
constexpr double kTailMarginS = 60.0;

std::mt19937_64 study_rng(std::uint64_t seed, int index) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(index) + 1};
    return std::mt19937_64(seq);
}

}  // namespace

void SynthConfig::validate() const {
    if (n_studies <= 0) throw ValidationError("SynthConfig: n_studies must be positive");
    if (duration_s < 600) throw ValidationError("SynthConfig: duration_s too short");
    double mix_sum = 0;
    for (double p : severity_mix) {
        if (p < 0) throw ValidationError("SynthConfig: severity_mix entries must be >= 0");
        mix_sum += p;
    }
    if (std::abs(mix_sum - 1.0) > 1e-9)
        throw ValidationError("SynthConfig: severity_mix must sum to 1");
    static const double bounds[5] = {0, 5, 15, 30, 1e9};
    for (int s = 0; s < 4; ++s) {
        const auto& [lo, hi] = event_rate_ranges[static_cast<std::size_t>(s)];
        if (lo < bounds[s] - 1e-9 || hi > bounds[s + 1] + 1e-9 || lo > hi)
            throw ValidationError("SynthConfig: event_rate_ranges must nest inside class bounds");
    }
    if (baseline_spo2_range.first < kSpo2ValidMin ||
        baseline_spo2_range.second > kSpo2ValidMax ||
        baseline_spo2_range.first > baseline_spo2_range.second)
        throw ValidationError("SynthConfig: bad baseline_spo2_range");
    if (noise_sd < 0 || artifact_prob < 0 || artifact_prob > 1)
        throw ValidationError("SynthConfig: bad noise_sd or artifact_prob");
}

SeverityClass severity_of_study(const SleepStudy& study) {
    return severity(study.reference_ahi);
}

SleepStudy generate_study(const SynthConfig& config, int index) {
    config.validate();
    if (index < 0 || index >= config.n_studies)
        throw ValidationError("generate_study: index out of range");

    std::mt19937_64 rng = study_rng(config.seed, index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SleepStudy study;
    study.id = "synth-" + std::to_string(config.seed) + "-" + std::to_string(index);
    const double tst_h = config.duration_s / 3600.0;
    study.total_sleep_time_h = tst_h;

    // Severity and target event count.
    int sev = 3;
    {
        const double u = unit(rng);
        double acc = 0;
        for (int s = 0; s < 4; ++s) {
            acc += config.severity_mix[static_cast<std::size_t>(s)];
            if (u < acc) {
                sev = s;
                break;
            }
        }
    }
    const auto& [rate_lo, rate_hi] = config.event_rate_ranges[static_cast<std::size_t>(sev)];
    // Sample the event count directly so the realized rate stays inside the class.
    const long n_min = static_cast<long>(std::ceil(rate_lo * tst_h));
    long n_max = static_cast<long>(std::floor(rate_hi * tst_h - 1e-9));
    n_max = std::max(n_max, n_min);
    const long n_events =
        n_min + static_cast<long>(unit(rng) * static_cast<double>(n_max - n_min + 1));

    // Slot the events across the usable span; error if they cannot fit.
    const double span = static_cast<double>(config.duration_s) - kFirstEventOffsetS - kTailMarginS;
    const double slot = n_events > 0 ? span / static_cast<double>(n_events) : span;
    const double footprint = kDesatDescentS + kEventMaxDurS + kDesatRecoveryTauS;
    if (n_events > 0 && slot < footprint)
        throw std::runtime_error("generate_study: events cannot fit without overlap (n=" +
                                 std::to_string(n_events) + ")");

    const long n_central = static_cast<long>(std::floor(kCentralFraction * static_cast<double>(n_events)));
    const long n_hyp = static_cast<long>(std::floor(kHypopneaFraction * static_cast<double>(n_events)));

    // Fixed kind composition, shuffled over the night so kind does not
    // correlate with time.
    std::vector<EventKind> kinds(static_cast<std::size_t>(n_events),
                                 EventKind::ObstructiveApnea);
    for (long i = 0; i < n_central; ++i) kinds[static_cast<std::size_t>(i)] = EventKind::CentralApnea;
    for (long i = n_central; i < n_central + n_hyp; ++i)
        kinds[static_cast<std::size_t>(i)] = EventKind::Hypopnea;
    std::shuffle(kinds.begin(), kinds.end(), rng);

    for (long i = 0; i < n_events; ++i) {
        RespiratoryEvent e;
        e.kind = kinds[static_cast<std::size_t>(i)];
        e.duration_s = std::floor(kEventMinDurS + unit(rng) * (kEventMaxDurS - kEventMinDurS));
        const double slot_start = kFirstEventOffsetS + slot * static_cast<double>(i);
        const double jitter_room = slot - (kDesatDescentS + e.duration_s + kDesatRecoveryTauS);
        e.start_s = std::floor(slot_start + kDesatDescentS + unit(rng) * std::max(0.0, jitter_room));
        if (e.kind == EventKind::Hypopnea) {
            e.flow_reduction_pct = 40.0 + 40.0 * unit(rng);
            e.desat_pct = 4.0 + 4.0 * unit(rng);  // all generated hypopneas qualify at 4%
        } else {
            e.desat_pct = 3.0 + 5.0 * unit(rng);  // apneas span the 3/4% thresholds
        }
        e.arousal = unit(rng) < 0.3;
        study.events.push_back(e);
    }

    // Signal: baseline plus one plateau-dip-recovery shape per event.
    const double baseline = config.baseline_spo2_range.first +
                            unit(rng) * (config.baseline_spo2_range.second -
                                         config.baseline_spo2_range.first);
    const int n = config.duration_s;
    std::vector<double> x(static_cast<std::size_t>(n), baseline);
    for (const auto& e : study.events) {
        const double t0 = e.start_s - kDesatDescentS;  // descent begins
        const double t1 = e.start_s;                   // plateau begins
        const double t2 = e.start_s + e.duration_s;    // recovery begins
        const int lo = std::max(0, static_cast<int>(std::floor(t0)));
        const int hi = std::min(n, static_cast<int>(std::ceil(t2 + 6.0 * kDesatRecoveryTauS)));
        for (int t = lo; t < hi; ++t) {
            const double tt = static_cast<double>(t);
            double shape = 0;
            if (tt >= t0 && tt < t1) shape = (tt - t0) / kDesatDescentS;
            else if (tt >= t1 && tt <= t2) shape = 1.0;
            else if (tt > t2) shape = std::exp(-(tt - t2) / kDesatRecoveryTauS);
            x[static_cast<std::size_t>(t)] -= e.desat_pct * shape;
        }
    }
    if (config.noise_sd > 0) {
        std::normal_distribution<double> noise(0.0, config.noise_sd);
        for (auto& v : x) v += noise(rng);
    }
    for (auto& v : x) v = std::min(v, 100.0);

    study.signal = OximetrySignal::all_valid(std::move(x));

    // Optional artifact: a span of junk values flagged invalid.
    if (unit(rng) < config.artifact_prob) {
        const int len = 30 + static_cast<int>(unit(rng) * 90.0);
        const int start = static_cast<int>(unit(rng) * static_cast<double>(n - len));
        for (int t = start; t < start + len; ++t) {
            study.signal.samples[static_cast<std::size_t>(t)] = 20.0 + 25.0 * unit(rng);
            study.signal.validity[static_cast<std::size_t>(t)] = 0;
        }
        RespiratoryEvent art;
        art.kind = EventKind::Artifact;
        art.start_s = start;
        art.duration_s = len;
        study.events.push_back(art);
    }

    // Clinical features; BMI mean ordered with severity.
    std::normal_distribution<double> gauss(0.0, 1.0);
    ClinicalFeatures& c = study.clinical;
    c.age = 40.0 + 40.0 * unit(rng);
    c.bmi = std::max(16.0, config.bmi_mean_by_severity[static_cast<std::size_t>(sev)] +
                               2.5 * gauss(rng));
    c.sbp = 125.0 + 15.0 * gauss(rng);
    c.dbp = 78.0 + 10.0 * gauss(rng);
    c.height_cm = 170.0 + 10.0 * gauss(rng);
    c.weight_kg = c.bmi * (c.height_cm / 100.0) * (c.height_cm / 100.0);
    c.smoker = unit(rng) < 0.2;
    c.hypertension = unit(rng) < 0.3;
    c.ethnicity = unit(rng) < 0.95 ? Ethnicity::NonHispanic : Ethnicity::Hispanic;
    const double race_u = unit(rng);
    c.race = race_u < 0.7 ? Race::White : (race_u < 0.9 ? Race::Black : Race::Other);
    c.gender = unit(rng) < 0.5 ? Gender::Male : Gender::Female;

    study.reference_ahi =
        compute_concepts(study.events, study.signal, study.total_sleep_time_h).ahi_a0h4;
    return study;
}

std::vector<SleepStudy> generate_cohort(const SynthConfig& config) {
    config.validate();
    std::vector<SleepStudy> cohort;
    cohort.reserve(static_cast<std::size_t>(config.n_studies));
    for (int i = 0; i < config.n_studies; ++i) cohort.push_back(generate_study(config, i));
    return cohort;
}

void write_cohort(const std::vector<SleepStudy>& cohort, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
    manifest << "id,severity,reference_ahi,bmi,age\n";
    for (const auto& study : cohort) {
        save_study_bundle(study, dir / study.id);
        manifest << study.id << ',' << to_string(severity_of_study(study)) << ','
                 << format_double(study.reference_ahi) << ','
                 << format_double(study.clinical.bmi) << ','
                 << format_double(study.clinical.age) << '\n';
    }
}

}  // namespace kindsleep
