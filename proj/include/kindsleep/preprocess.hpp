#pragma once

#include <vector>

#include "kindsleep/types.hpp"

namespace kindsleep {

struct PreprocessConfig {
    int target_len = kSignalLen;
    int savgol_window = 15;  // odd, >= 3
    int savgol_order = 2;    // < savgol_window

    void validate() const;
};

// Zero-pads (valid samples) or truncates to target_len.
OximetrySignal pad_or_truncate(const OximetrySignal& signal, int target_len);

// Fills invalid samples: linear between valid neighbours, edge-hold at the ends.
OximetrySignal interpolate_invalid(const OximetrySignal& signal);

// Least-squares polynomial smoothing; boundary windows are truncated one-sided fits.
OximetrySignal savgol_smooth(const OximetrySignal& signal, int window, int order);

// Zero mean, unit population standard deviation; constant input maps to all zeros.
std::vector<double> standardize(const OximetrySignal& signal);

// pad_or_truncate -> savgol_smooth -> interpolate_invalid -> standardize.
std::vector<double> preprocess_pipeline(const OximetrySignal& signal,
                                        const PreprocessConfig& config);

}  // namespace kindsleep
