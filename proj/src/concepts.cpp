#include "kindsleep/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kindsleep {

namespace {

bool is_apnea(const RespiratoryEvent& e) {
    return e.kind == EventKind::ObstructiveApnea || e.kind == EventKind::CentralApnea;
}

bool is_hyp_flow(const RespiratoryEvent& e) {
    return e.kind == EventKind::Hypopnea && e.flow_reduction_pct > 30.0;
}

}  // namespace

ConceptVector compute_concepts(const std::vector<RespiratoryEvent>& events,
                               const OximetrySignal& signal,
                               double total_sleep_time_h) {
    if (total_sleep_time_h <= 0)
        throw ValidationError("compute_concepts: total_sleep_time_h must be positive");

    long a = 0;        // apneas, any desaturation
    long c = 0;        // central apneas, any desaturation
    long a2 = 0, a3 = 0, a4 = 0;   // apneas by desaturation depth
    long h0 = 0, h2 = 0, h3 = 0, h4 = 0;  // hypopneas (flow > 30%) by depth
    long h4a = 0;      // hypopneas with >= 4% desaturation or arousal

    for (const auto& e : events) {
        if (is_apnea(e)) {
            ++a;
            if (e.kind == EventKind::CentralApnea) ++c;
            if (e.desat_pct >= 2.0) ++a2;
            if (e.desat_pct >= 3.0) ++a3;
            if (e.desat_pct >= 4.0) ++a4;
        } else if (is_hyp_flow(e)) {
            ++h0;
            if (e.desat_pct >= 2.0) ++h2;
            if (e.desat_pct >= 3.0) ++h3;
            if (e.desat_pct >= 4.0) ++h4;
            if (e.desat_pct >= 4.0 || e.arousal) ++h4a;
        }
        // Desaturation and Artifact events never count toward rates.
    }

    ConceptVector v;
    const double t = total_sleep_time_h;
    v.ahi_a0h4 = static_cast<double>(a + h4) / t;
    v.ahi_a0h4a = static_cast<double>(a + h4a) / t;
    v.ahi_c0h3 = static_cast<double>(c + h3) / t;
    v.ahi_c0h4 = static_cast<double>(c + h4a) / t;
    v.rdi0p = static_cast<double>(a + h0) / t;
    v.rdi2p = static_cast<double>(a2 + h2) / t;
    v.rdi3p = static_cast<double>(a3 + h3) / t;
    v.rdi4p = static_cast<double>(a4 + h4) / t;

    // Saturation statistics over valid samples inside the sleep period.
    const std::size_t sleep_samples = std::min(
        signal.size(),
        static_cast<std::size_t>(std::llround(total_sleep_time_h * 3600.0)));
    double sum = 0;
    double mn = std::numeric_limits<double>::infinity();
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < sleep_samples; ++i) {
        if (!signal.validity[i]) continue;
        sum += signal.samples[i];
        mn = std::min(mn, signal.samples[i]);
        ++n_valid;
    }
    if (n_valid == 0) {
        v.avgsat = 0;
        v.minsat = 0;
    } else {
        v.avgsat = sum / static_cast<double>(n_valid);
        v.minsat = mn;
    }
    return v;
}

std::vector<RespiratoryEvent> detect_desaturations(const OximetrySignal& signal,
                                                   double min_drop_pct,
                                                   double min_duration_s) {
    const int n = static_cast<int>(signal.size());
    if (n < kDesatBaselineWindowS)
        throw ValidationError("detect_desaturations: signal shorter than baseline window");

    // Per-sample depth below a trailing high-percentile baseline. A median
    // would sag in dense studies where desaturation tails cover most of the
    // window; the 90th percentile still tracks the inter-event level there.
    std::vector<double> depth(static_cast<std::size_t>(n), 0.0);
    std::vector<double> window;
    window.reserve(kDesatBaselineWindowS);
    for (int i = kDesatBaselineWindowS; i < n; ++i) {
        if (!signal.validity[static_cast<std::size_t>(i)]) continue;
        window.clear();
        for (int j = i - kDesatBaselineWindowS; j < i; ++j)
            if (signal.validity[static_cast<std::size_t>(j)])
                window.push_back(signal.samples[static_cast<std::size_t>(j)]);
        if (window.empty()) continue;
        const std::size_t rank = (9 * (window.size() - 1)) / 10;
        std::nth_element(window.begin(), window.begin() + static_cast<long>(rank), window.end());
        const double baseline = window[rank];
        depth[static_cast<std::size_t>(i)] = baseline - signal.samples[static_cast<std::size_t>(i)];
    }

    std::vector<RespiratoryEvent> out;
    int start = -1;
    double max_depth = 0;
    for (int i = 0; i <= n; ++i) {
        const bool in_span = i < n && depth[static_cast<std::size_t>(i)] >= min_drop_pct;
        if (in_span) {
            if (start < 0) {
                start = i;
                max_depth = 0;
            }
            max_depth = std::max(max_depth, depth[static_cast<std::size_t>(i)]);
        } else if (start >= 0) {
            const double dur = static_cast<double>(i - start);
            if (dur >= min_duration_s) {
                RespiratoryEvent e;
                e.kind = EventKind::Desaturation;
                e.start_s = start;
                e.duration_s = dur;
                e.desat_pct = max_depth;
                out.push_back(e);
            }
            start = -1;
        }
    }
    return out;
}

}  // namespace kindsleep
