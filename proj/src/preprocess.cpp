#include "kindsleep/preprocess.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace kindsleep {

void PreprocessConfig::validate() const {
    if (target_len <= 0) throw ValidationError("target_len must be positive");
    if (savgol_window < 3 || savgol_window % 2 == 0)
        throw ValidationError("savgol_window must be an odd integer >= 3");
    if (savgol_order < 0 || savgol_order >= savgol_window)
        throw ValidationError("savgol_order must be in [0, savgol_window)");
}

OximetrySignal pad_or_truncate(const OximetrySignal& signal, int target_len) {
    if (signal.size() == 0) throw ValidationError("pad_or_truncate: empty signal");
    if (target_len <= 0) throw ValidationError("pad_or_truncate: target_len must be positive");
    OximetrySignal out = signal;
    const std::size_t n = static_cast<std::size_t>(target_len);
    if (out.samples.size() > n) {
        out.samples.resize(n);
        out.validity.resize(n);
    } else {
        // Padded positions are literal zeros and count as valid samples.
        out.samples.resize(n, 0.0);
        out.validity.resize(n, 1);
    }
    return out;
}

OximetrySignal interpolate_invalid(const OximetrySignal& signal) {
    const std::size_t n = signal.size();
    if (n == 0) throw ValidationError("interpolate_invalid: empty signal");

    std::vector<std::size_t> valid_idx;
    for (std::size_t i = 0; i < n; ++i)
        if (signal.validity[i]) valid_idx.push_back(i);
    if (valid_idx.empty()) throw ValidationError("signal entirely invalid");

    OximetrySignal out = signal;
    // Leading / trailing gaps hold the nearest valid value.
    for (std::size_t i = 0; i < valid_idx.front(); ++i)
        out.samples[i] = signal.samples[valid_idx.front()];
    for (std::size_t i = valid_idx.back() + 1; i < n; ++i)
        out.samples[i] = signal.samples[valid_idx.back()];
    // Interior gaps fill linearly between nearest valid neighbours.
    for (std::size_t k = 0; k + 1 < valid_idx.size(); ++k) {
        const std::size_t a = valid_idx[k], b = valid_idx[k + 1];
        if (b == a + 1) continue;
        const double ya = signal.samples[a], yb = signal.samples[b];
        const double span = static_cast<double>(b - a);
        for (std::size_t i = a + 1; i < b; ++i)
            out.samples[i] = ya + (yb - ya) * static_cast<double>(i - a) / span;
    }
    std::fill(out.validity.begin(), out.validity.end(), 1);
    return out;
}

namespace {

// Coefficients that evaluate the degree-`order` least-squares fit over
// relative offsets [lo, hi] at relative position 0.
std::vector<double> savgol_coeffs(int lo, int hi, int order) {
    const int w = hi - lo + 1;
    Eigen::MatrixXd design(w, order + 1);
    for (int j = 0; j < w; ++j) {
        double t = static_cast<double>(lo + j);
        double p = 1.0;
        for (int k = 0; k <= order; ++k) {
            design(j, k) = p;
            p *= t;
        }
    }
    // Row of the smoothing matrix for evaluation at t = 0: e0^T (A^T A)^-1 A^T.
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(order + 1);
    e0(0) = 1.0;
    Eigen::VectorXd c =
        design * (design.transpose() * design).ldlt().solve(e0);
    return std::vector<double>(c.data(), c.data() + w);
}

}  // namespace

OximetrySignal savgol_smooth(const OximetrySignal& signal, int window, int order) {
    if (window < 3 || window % 2 == 0)
        throw ValidationError("savgol_smooth: window must be odd and >= 3");
    if (order < 0 || order >= window)
        throw ValidationError("savgol_smooth: order must be in [0, window)");
    const int n = static_cast<int>(signal.size());
    if (n < window) throw ValidationError("savgol_smooth: signal shorter than window");

    const int half = window / 2;
    const std::vector<double> center = savgol_coeffs(-half, half, order);

    OximetrySignal out = signal;
    for (int i = half; i < n - half; ++i) {
        double acc = 0;
        for (int j = 0; j < window; ++j) acc += center[j] * signal.samples[i - half + j];
        out.samples[i] = acc;
    }
    // One-sided truncated fits at the boundaries.
    for (int i = 0; i < half; ++i) {
        const int lo = -i, hi = half;
        const auto c = savgol_coeffs(lo, hi, order);
        double acc = 0;
        for (int j = 0; j < static_cast<int>(c.size()); ++j)
            acc += c[j] * signal.samples[i + lo + j];
        out.samples[i] = acc;
    }
    for (int i = n - half; i < n; ++i) {
        const int lo = -half, hi = n - 1 - i;
        const auto c = savgol_coeffs(lo, hi, order);
        double acc = 0;
        for (int j = 0; j < static_cast<int>(c.size()); ++j)
            acc += c[j] * signal.samples[i + lo + j];
        out.samples[i] = acc;
    }
    return out;
}

std::vector<double> standardize(const OximetrySignal& signal) {
    const std::size_t n = signal.size();
    if (n == 0) throw ValidationError("standardize: empty signal");
    double mean = 0;
    for (double v : signal.samples) mean += v;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : signal.samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    std::vector<double> out(n);
    // Constant input maps to all zeros. The tolerance absorbs the ~1e-15
    // relative jitter a smoothing pass leaves on an exactly constant signal,
    // which would otherwise be amplified to unit variance here.
    const double sd = std::sqrt(var);
    if (sd <= 1e-9 * (1.0 + std::abs(mean))) return out;
    for (std::size_t i = 0; i < n; ++i) out[i] = (signal.samples[i] - mean) / sd;
    return out;
}

std::vector<double> preprocess_pipeline(const OximetrySignal& signal,
                                        const PreprocessConfig& config) {
    config.validate();
    OximetrySignal s = pad_or_truncate(signal, config.target_len);
    s = savgol_smooth(s, config.savgol_window, config.savgol_order);
    s = interpolate_invalid(s);
    return standardize(s);
}

}  // namespace kindsleep
