#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kindsleep/types.hpp"

namespace kindsleep {

double mae(const std::vector<double>& y, const std::vector<double>& y_hat);
double rmse(const std::vector<double>& y, const std::vector<double>& y_hat);

// 1 - SS_res / SS_tot. Throws on constant y.
double r2(const std::vector<double>& y, const std::vector<double>& y_hat);

// Two-way ANOVA intraclass correlation with the reference and the model as
// k = 2 observers over n instances.
double icc(const std::vector<double>& y, const std::vector<double>& y_hat);

struct BlandAltman {
    double bias = 0;
    double loa_low = 0;
    double loa_high = 0;
};

// bias = mean(y_hat - y); limits of agreement at +/- 1.96 population sd.
BlandAltman bland_altman(const std::vector<double>& y, const std::vector<double>& y_hat);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Average ranks (ties get the mean rank), 1-based.
std::vector<double> average_ranks(const std::vector<double>& x);

struct AgreementReport {
    double r2 = 0;
    double icc = 0;
    double mae = 0;
    double rmse = 0;
    BlandAltman bland_altman;
    std::size_t n = 0;
};

AgreementReport agreement_report(const std::vector<double>& y,
                                 const std::vector<double>& y_hat);

struct ScoreWithCi {
    double value = 0;
    double ci_low = 0;
    double ci_high = 0;
};

struct PerClassScores {
    double precision = 0;
    double sensitivity = 0;
    double specificity = 0;
    double f1 = 0;
    std::size_t support = 0;
};

struct ClassificationReport {
    // rows = reference, cols = predicted; class order Normal/Mild/Moderate/Severe
    std::array<std::array<std::int64_t, 4>, 4> confusion{};
    ScoreWithCi f1, precision, sensitivity, specificity;
    std::array<PerClassScores, 4> per_class{};
    std::size_t n = 0;
};

// Support-weighted one-vs-rest scores with 95% percentile-bootstrap CIs.
ClassificationReport classification_report(const std::vector<SeverityClass>& ref,
                                           const std::vector<SeverityClass>& pred,
                                           int bootstrap_n = 1000,
                                           std::uint64_t seed = 42);

// Point estimates only (used inside the bootstrap and by experiment sweeps).
struct WeightedScores {
    double f1 = 0, precision = 0, sensitivity = 0, specificity = 0;
};
WeightedScores weighted_scores(const std::vector<SeverityClass>& ref,
                               const std::vector<SeverityClass>& pred);

}  // namespace kindsleep
