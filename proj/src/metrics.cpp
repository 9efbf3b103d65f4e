#include "kindsleep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kindsleep {

namespace {

void require_equal_length(const std::vector<double>& a, const std::vector<double>& b,
                          const char* what) {
    if (a.size() != b.size())
        throw ValidationError(std::string(what) + ": length mismatch");
}

double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double mae(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_equal_length(y, y_hat, "mae");
    if (y.empty()) throw ValidationError("mae: empty input");
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_equal_length(y, y_hat, "rmse");
    if (y.empty()) throw ValidationError("rmse: empty input");
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

double r2(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_equal_length(y, y_hat, "r2");
    if (y.size() < 2) throw ValidationError("r2: need at least 2 points");
    const double ybar = mean_of(y);
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    if (ss_tot == 0) throw ValidationError("undefined R^2: constant reference");
    return 1.0 - ss_res / ss_tot;
}

double icc(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_equal_length(y, y_hat, "icc");
    const std::size_t n = y.size();
    if (n < 3) throw ValidationError("icc: need at least 3 instances");
    constexpr double k = 2.0;

    double grand = 0;
    for (std::size_t i = 0; i < n; ++i) grand += y[i] + y_hat[i];
    grand /= (k * static_cast<double>(n));

    const double col0 = mean_of(y), col1 = mean_of(y_hat);

    double ss_rows = 0, ss_cols = 0, ss_err = 0;
    ss_cols = static_cast<double>(n) *
              ((col0 - grand) * (col0 - grand) + (col1 - grand) * (col1 - grand));
    for (std::size_t i = 0; i < n; ++i) {
        const double row = 0.5 * (y[i] + y_hat[i]);
        ss_rows += k * (row - grand) * (row - grand);
        const double r0 = y[i] - row - col0 + grand;
        const double r1 = y_hat[i] - row - col1 + grand;
        ss_err += r0 * r0 + r1 * r1;
    }

    const double ms_rows = ss_rows / static_cast<double>(n - 1);
    const double ms_cols = ss_cols / (k - 1.0);
    const double ms_err = ss_err / (static_cast<double>(n - 1) * (k - 1.0));

    const double denom =
        ms_rows + (k - 1.0) * ms_err + (k / static_cast<double>(n)) * (ms_cols - ms_err);
    if (denom == 0) return 0.0;
    return (ms_rows - ms_err) / denom;
}

BlandAltman bland_altman(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_equal_length(y, y_hat, "bland_altman");
    if (y.size() < 2) throw ValidationError("bland_altman: need at least 2 pairs");
    std::vector<double> d(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) d[i] = y_hat[i] - y[i];
    const double bias = mean_of(d);
    double var = 0;
    for (double v : d) var += (v - bias) * (v - bias);
    var /= static_cast<double>(d.size());
    const double sd = std::sqrt(var);
    return {bias, bias - 1.96 * sd, bias + 1.96 * sd};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require_equal_length(x, y, "pearson");
    if (x.size() < 3) throw ValidationError("pearson: need at least 3 points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) throw ValidationError("pearson: constant input");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

AgreementReport agreement_report(const std::vector<double>& y,
                                 const std::vector<double>& y_hat) {
    AgreementReport r;
    r.r2 = r2(y, y_hat);
    r.icc = icc(y, y_hat);
    r.mae = mae(y, y_hat);
    r.rmse = rmse(y, y_hat);
    r.bland_altman = bland_altman(y, y_hat);
    r.n = y.size();
    return r;
}

WeightedScores weighted_scores(const std::vector<SeverityClass>& ref,
                               const std::vector<SeverityClass>& pred) {
    if (ref.size() != pred.size() || ref.empty())
        throw ValidationError("weighted_scores: inputs must be equal-length and non-empty");
    const std::size_t n = ref.size();
    std::array<std::int64_t, 4> tp{}, fp{}, fn{}, tn{};
    std::array<std::int64_t, 4> support{};
    for (std::size_t i = 0; i < n; ++i) {
        const int r = static_cast<int>(ref[i]);
        const int p = static_cast<int>(pred[i]);
        ++support[static_cast<std::size_t>(r)];
        for (int c = 0; c < 4; ++c) {
            const bool is_r = (r == c), is_p = (p == c);
            if (is_r && is_p) ++tp[static_cast<std::size_t>(c)];
            else if (!is_r && is_p) ++fp[static_cast<std::size_t>(c)];
            else if (is_r && !is_p) ++fn[static_cast<std::size_t>(c)];
            else ++tn[static_cast<std::size_t>(c)];
        }
    }
    WeightedScores out;
    for (std::size_t c = 0; c < 4; ++c) {
        if (support[c] == 0) continue;  // zero weight
        const double w = static_cast<double>(support[c]) / static_cast<double>(n);
        const double tpc = static_cast<double>(tp[c]);
        // Zero predicted positives -> precision 0 by convention.
        const double prec = (tp[c] + fp[c]) > 0 ? tpc / static_cast<double>(tp[c] + fp[c]) : 0.0;
        const double rec = tpc / static_cast<double>(tp[c] + fn[c]);
        // No negatives at all -> specificity vacuously 1.
        const double spec = (tn[c] + fp[c]) > 0
                                ? static_cast<double>(tn[c]) / static_cast<double>(tn[c] + fp[c])
                                : 1.0;
        const double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        out.precision += w * prec;
        out.sensitivity += w * rec;
        out.specificity += w * spec;
        out.f1 += w * f1;
    }
    return out;
}

ClassificationReport classification_report(const std::vector<SeverityClass>& ref,
                                           const std::vector<SeverityClass>& pred,
                                           int bootstrap_n,
                                           std::uint64_t seed) {
    if (ref.size() != pred.size() || ref.empty())
        throw ValidationError("classification_report: inputs must be equal-length and non-empty");
    const std::size_t n = ref.size();

    ClassificationReport rep;
    rep.n = n;
    for (std::size_t i = 0; i < n; ++i)
        ++rep.confusion[static_cast<std::size_t>(ref[i])][static_cast<std::size_t>(pred[i])];

    for (std::size_t c = 0; c < 4; ++c) {
        std::int64_t tp = rep.confusion[c][c], fp = 0, fn = 0, tn = 0;
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t p = 0; p < 4; ++p) {
                if (r == c && p == c) continue;
                if (p == c) fp += rep.confusion[r][p];
                else if (r == c) fn += rep.confusion[r][p];
                else tn += rep.confusion[r][p];
            }
        PerClassScores& s = rep.per_class[c];
        s.support = static_cast<std::size_t>(tp + fn);
        s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        s.sensitivity = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        s.specificity = (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 1.0;
        s.f1 = (s.precision + s.sensitivity) > 0
                   ? 2.0 * s.precision * s.sensitivity / (s.precision + s.sensitivity)
                   : 0.0;
    }

    const WeightedScores point = weighted_scores(ref, pred);
    rep.f1.value = point.f1;
    rep.precision.value = point.precision;
    rep.sensitivity.value = point.sensitivity;
    rep.specificity.value = point.specificity;

    // Percentile bootstrap over subjects.
    std::vector<double> bf1, bprec, bsens, bspec;
    bf1.reserve(static_cast<std::size_t>(bootstrap_n));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<SeverityClass> rref(n), rpred(n);
    for (int b = 0; b < bootstrap_n; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = pick(rng);
            rref[i] = ref[j];
            rpred[i] = pred[j];
        }
        const WeightedScores s = weighted_scores(rref, rpred);
        bf1.push_back(s.f1);
        bprec.push_back(s.precision);
        bsens.push_back(s.sensitivity);
        bspec.push_back(s.specificity);
    }
    auto percentile_ci = [](std::vector<double> v, ScoreWithCi& out) {
        if (v.empty()) {
            out.ci_low = out.ci_high = out.value;
            return;
        }
        std::sort(v.begin(), v.end());
        auto at = [&](double q) {
            const double pos = q * static_cast<double>(v.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, v.size() - 1);
            const double frac = pos - static_cast<double>(lo);
            return v[lo] * (1 - frac) + v[hi] * frac;
        };
        out.ci_low = std::min(at(0.025), out.value);
        out.ci_high = std::max(at(0.975), out.value);
    };
    percentile_ci(bf1, rep.f1);
    percentile_ci(bprec, rep.precision);
    percentile_ci(bsens, rep.sensitivity);
    percentile_ci(bspec, rep.specificity);
    return rep;
}

}  // namespace kindsleep
