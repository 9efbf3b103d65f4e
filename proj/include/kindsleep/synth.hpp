#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "kindsleep/types.hpp"

namespace kindsleep {

struct SynthConfig {
    int n_studies = 200;
    int duration_s = kSignalLen;
    // Probability of each severity class, Table order Normal/Mild/Moderate/Severe.
    std::array<double, 4> severity_mix = {0.30, 0.25, 0.25, 0.20};
    // Per-severity AHI ranges; must nest inside the clinical class boundaries.
    std::array<std::pair<double, double>, 4> event_rate_ranges = {
        std::pair<double, double>{0.0, 5.0},
        std::pair<double, double>{5.0, 15.0},
        std::pair<double, double>{15.0, 30.0},
        std::pair<double, double>{30.0, 55.0}};
    std::pair<double, double> baseline_spo2_range = {93.0, 98.0};
    double noise_sd = 0.3;       // % points
    double artifact_prob = 0.1;  // per study
    std::uint64_t seed = 42;
    // Severity-conditional BMI means (Normal/Mild/Moderate/Severe); couples BMI
    // positively to AHI. Set all equal to decouple.
    std::array<double, 4> bmi_mean_by_severity = {24.0, 27.0, 29.0, 32.0};

    void validate() const;
};

// Desaturation morphology imprinted per event.
constexpr double kDesatDescentS = 10.0;
constexpr double kDesatRecoveryTauS = 15.0;

SleepStudy generate_study(const SynthConfig& config, int index);

std::vector<SleepStudy> generate_cohort(const SynthConfig& config);

// Writes bundle directories plus manifest.csv (id,severity,reference_ahi,bmi,age).
void write_cohort(const std::vector<SleepStudy>& cohort, const std::filesystem::path& dir);

SeverityClass severity_of_study(const SleepStudy& study);

}  // namespace kindsleep
