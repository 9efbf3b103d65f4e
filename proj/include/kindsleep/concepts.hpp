#pragma once

#include <vector>

#include "kindsleep/types.hpp"

namespace kindsleep {

// The ten Table-style knowledge-informed metrics from scored events plus the
// raw signal. Rates are events per hour of sleep; saturation statistics come
// from valid samples inside the sleep period.
ConceptVector compute_concepts(const std::vector<RespiratoryEvent>& events,
                               const OximetrySignal& signal,
                               double total_sleep_time_h);

// Emits one Desaturation event per maximal span sitting >= min_drop_pct below
// the running baseline (90th percentile of the preceding 120 valid seconds)
// for at least min_duration_s seconds.
std::vector<RespiratoryEvent> detect_desaturations(const OximetrySignal& signal,
                                                   double min_drop_pct,
                                                   double min_duration_s);

constexpr int kDesatBaselineWindowS = 120;

}  // namespace kindsleep
