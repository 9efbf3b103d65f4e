#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kindsleep {

// Thrown for bad configuration or malformed input (CLI exit code 1).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// SpO2 values outside this band are treated as non-physiological.
constexpr double kSpo2ValidMin = 50.0;
constexpr double kSpo2ValidMax = 100.0;

// Fixed model input length in seconds (1 Hz).
constexpr int kSignalLen = 25200;

struct OximetrySignal {
    std::vector<double> samples;     // % saturation
    std::vector<std::uint8_t> validity;  // 0 = missing / non-physiological
    int sample_rate_hz = 1;

    std::size_t size() const { return samples.size(); }

    static OximetrySignal all_valid(std::vector<double> values) {
        OximetrySignal s;
        s.validity.assign(values.size(), 1);
        s.samples = std::move(values);
        return s;
    }
};

enum class EventKind { ObstructiveApnea, CentralApnea, Hypopnea, Desaturation, Artifact };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

struct RespiratoryEvent {
    EventKind kind = EventKind::ObstructiveApnea;
    double start_s = 0;
    double duration_s = 0;
    double flow_reduction_pct = 0;  // meaningful for Hypopnea
    double desat_pct = 0;           // associated desaturation depth, % points
    bool arousal = false;
};

// The ten knowledge-informed metrics, in fixed order.
struct ConceptVector {
    double ahi_a0h4 = 0;
    double ahi_a0h4a = 0;
    double ahi_c0h3 = 0;
    double ahi_c0h4 = 0;
    double avgsat = 0;
    double minsat = 0;
    double rdi0p = 0;
    double rdi2p = 0;
    double rdi3p = 0;
    double rdi4p = 0;

    static constexpr int kSize = 10;
    static const std::array<const char*, kSize>& names();

    std::array<double, kSize> to_array() const;
    static ConceptVector from_array(const std::array<double, kSize>& a);

    double operator[](int i) const { return to_array()[static_cast<std::size_t>(i)]; }
};

// Indices of the eight rate-valued concepts (everything except avgsat/minsat).
const std::vector<int>& rate_concept_indices();

enum class Ethnicity { NonHispanic, Hispanic };
enum class Race { White, Black, Other };
enum class Gender { Male, Female };

const char* to_string(Ethnicity e);
const char* to_string(Race r);
const char* to_string(Gender g);
Ethnicity ethnicity_from_string(const std::string& s);
Race race_from_string(const std::string& s);
Gender gender_from_string(const std::string& s);

struct ClinicalFeatures {
    double age = 0;        // years
    double bmi = 0;        // kg/m^2
    double sbp = 0;        // mmHg
    double dbp = 0;        // mmHg
    double weight_kg = 0;
    double height_cm = 0;
    bool smoker = false;
    bool hypertension = false;
    Ethnicity ethnicity = Ethnicity::NonHispanic;
    Race race = Race::White;
    Gender gender = Gender::Male;
};

struct SleepStudy {
    std::string id;
    OximetrySignal signal;
    std::vector<RespiratoryEvent> events;
    ClinicalFeatures clinical;
    double total_sleep_time_h = 0;
    double reference_ahi = 0;
};

enum class SeverityClass { Normal = 0, Mild = 1, Moderate = 2, Severe = 3 };

const char* to_string(SeverityClass s);
SeverityClass severity_from_string(const std::string& s);

}  // namespace kindsleep
