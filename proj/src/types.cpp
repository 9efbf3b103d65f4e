#include "kindsleep/types.hpp"

namespace kindsleep {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::ObstructiveApnea: return "ObstructiveApnea";
        case EventKind::CentralApnea: return "CentralApnea";
        case EventKind::Hypopnea: return "Hypopnea";
        case EventKind::Desaturation: return "Desaturation";
        case EventKind::Artifact: return "Artifact";
    }
    return "?";
}

EventKind event_kind_from_string(const std::string& name) {
    if (name == "ObstructiveApnea") return EventKind::ObstructiveApnea;
    if (name == "CentralApnea") return EventKind::CentralApnea;
    if (name == "Hypopnea") return EventKind::Hypopnea;
    if (name == "Desaturation") return EventKind::Desaturation;
    if (name == "Artifact") return EventKind::Artifact;
    throw ValidationError("unknown event kind: " + name);
}

const std::array<const char*, ConceptVector::kSize>& ConceptVector::names() {
    static const std::array<const char*, kSize> n = {
        "ahi_a0h4", "ahi_a0h4a", "ahi_c0h3", "ahi_c0h4", "avgsat",
        "minsat",   "rdi0p",     "rdi2p",    "rdi3p",    "rdi4p"};
    return n;
}

std::array<double, ConceptVector::kSize> ConceptVector::to_array() const {
    return {ahi_a0h4, ahi_a0h4a, ahi_c0h3, ahi_c0h4, avgsat,
            minsat,   rdi0p,     rdi2p,    rdi3p,    rdi4p};
}

ConceptVector ConceptVector::from_array(const std::array<double, kSize>& a) {
    ConceptVector c;
    c.ahi_a0h4 = a[0];
    c.ahi_a0h4a = a[1];
    c.ahi_c0h3 = a[2];
    c.ahi_c0h4 = a[3];
    c.avgsat = a[4];
    c.minsat = a[5];
    c.rdi0p = a[6];
    c.rdi2p = a[7];
    c.rdi3p = a[8];
    c.rdi4p = a[9];
    return c;
}

const std::vector<int>& rate_concept_indices() {
    static const std::vector<int> idx = {0, 1, 2, 3, 6, 7, 8, 9};
    return idx;
}

const char* to_string(Ethnicity e) {
    return e == Ethnicity::NonHispanic ? "NonHispanic" : "Hispanic";
}

const char* to_string(Race r) {
    switch (r) {
        case Race::White: return "White";
        case Race::Black: return "Black";
        case Race::Other: return "Other";
    }
    return "?";
}

const char* to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }

Ethnicity ethnicity_from_string(const std::string& s) {
    if (s == "NonHispanic") return Ethnicity::NonHispanic;
    if (s == "Hispanic") return Ethnicity::Hispanic;
    throw ValidationError("unknown ethnicity: " + s);
}

Race race_from_string(const std::string& s) {
    if (s == "White") return Race::White;
    if (s == "Black") return Race::Black;
    if (s == "Other") return Race::Other;
    throw ValidationError("unknown race: " + s);
}

Gender gender_from_string(const std::string& s) {
    if (s == "Male") return Gender::Male;
    if (s == "Female") return Gender::Female;
    throw ValidationError("unknown gender: " + s);
}

const char* to_string(SeverityClass s) {
    switch (s) {
        case SeverityClass::Normal: return "Normal";
        case SeverityClass::Mild: return "Mild";
        case SeverityClass::Moderate: return "Moderate";
        case SeverityClass::Severe: return "Severe";
    }
    return "?";
}

SeverityClass severity_from_string(const std::string& s) {
    if (s == "Normal") return SeverityClass::Normal;
    if (s == "Mild") return SeverityClass::Mild;
    if (s == "Moderate") return SeverityClass::Moderate;
    if (s == "Severe") return SeverityClass::Severe;
    throw ValidationError("unknown severity class: " + s);
}

}  // namespace kindsleep
