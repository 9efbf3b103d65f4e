#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kindsleep/metrics.hpp"
#include "kindsleep/regressor.hpp"
#include "kindsleep/slam.hpp"
#include "kindsleep/synth.hpp"
#include "kindsleep/types.hpp"

namespace kindsleep {

extern const char* kToolVersion;

struct ExperimentConfig {
    SynthConfig synth;                 // in-distribution cohort
    std::vector<SynthConfig> ood;      // out-of-distribution cohorts
    std::array<double, 3> split = {0.65, 0.25, 0.10};
    std::uint64_t seed = 42;
    SlamConfig slam;
    RegressorConfig regressor;
    // Percentages of training subjects given correct concepts in the sweep.
    std::vector<double> sweep_grid = {5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    // Interception error thresholds (events/hour) for the intervention study.
    std::vector<double> intervention_taus = {0, 1, 2, 5, 10, 20, 1e9};
    double ridge_lambda = 1.0;
    int bootstrap_n = 1000;
    // Train the fusion regressor on oracle concepts instead of predictions.
    bool regressor_on_oracle_concepts = false;

    void validate() const;
};

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

// Seeded shuffle then contiguous partition; throws if any split is empty.
struct Split {
    std::vector<SleepStudy> train, val, test;
};
Split split_cohort(const std::vector<SleepStudy>& studies,
                   const std::array<double, 3>& fractions, std::uint64_t seed);

// One study reduced to model-ready pieces.
struct StudyData {
    std::string id;
    std::vector<double> signal;    // preprocessed, model input length
    ConceptVector oracle;          // ground-truth concepts
    ConceptVector predicted;       // filled by fill_predictions
    std::vector<double> clinical;  // encoded feature vector
    double ref_ahi = 0;
    double bmi = 0;
    std::vector<RespiratoryEvent> events;
};

StudyData prepare_study(const SleepStudy& study);
std::vector<StudyData> prepare_studies(const std::vector<SleepStudy>& studies);
void fill_predictions(SlamModel& model, std::vector<StudyData>& data);

// Concept+clinical row for the fusion regressor.
std::vector<double> fusion_features(const ConceptVector& concepts,
                                    const std::vector<double>& clinical);

// Trains the regressor on the supplied per-subject training concepts and
// evaluates on the test split using its predicted concepts (deployment mode).
struct ArmMetrics {
    AgreementReport agreement;
    ClassificationReport classification;
    std::vector<double> ref_ahi, pred_ahi;
};
ArmMetrics train_and_eval_arm(const std::vector<ConceptVector>& train_concepts,
                              const std::vector<StudyData>& train,
                              const std::vector<StudyData>& val,
                              const std::vector<StudyData>& test,
                              const RegressorConfig& reg_config, int bootstrap_n,
                              std::uint64_t eval_seed);

struct PipelineResult {
    SlamModel slam;
    MlpRegressor regressor;
    ArmMetrics in_distribution;
    std::vector<ArmMetrics> out_of_distribution;
    std::vector<StudyData> train, val, test;  // with predictions filled
};

// Full run: synthesize (or accept) cohorts, train SLAM on oracle concepts,
// train the fusion regressor, evaluate in- and out-of-distribution.
PipelineResult run_pipeline(const ExperimentConfig& config);
PipelineResult run_pipeline(const ExperimentConfig& config,
                            const std::vector<SleepStudy>& cohort,
                            const std::vector<std::vector<SleepStudy>>& ood_cohorts);

struct NamedArm {
    std::string name;
    ArmMetrics metrics;
};

// Rows: incorrect / incorrect_plus_5pct / correct / shuffled_labels.
std::vector<NamedArm> corruption_ablation(const ExperimentConfig& config,
                                          const PipelineResult& pipeline);

struct SweepRow {
    double p = 0;  // percent of training subjects with correct concepts
    ArmMetrics metrics;
};
std::vector<SweepRow> proportion_sweep(const ExperimentConfig& config,
                                       const PipelineResult& pipeline);

struct InterventionRow {
    double tau = 0;
    double fraction_intercepted = 0;
    ArmMetrics metrics;
};
std::vector<InterventionRow> intervention_study(const ExperimentConfig& config,
                                                const PipelineResult& pipeline);

// Rows: kindsleep / feature_level / decision_level.
std::vector<NamedArm> fusion_baselines(const ExperimentConfig& config,
                                       const PipelineResult& pipeline);

struct ImportanceRow {
    std::string feature;
    std::string group;  // "concept" or "clinical"
    double importance = 0;
};
// MAE increase when one feature column is permuted on the held-out set,
// averaged over repeats; sorted descending.
std::vector<ImportanceRow> permutation_importance(
    const MlpRegressor& model, const std::vector<std::vector<double>>& features,
    const std::vector<double>& targets, const std::vector<std::string>& feature_names,
    const std::vector<std::string>& feature_groups, int repeats, std::uint64_t seed);

std::vector<ImportanceRow> pipeline_importance(const ExperimentConfig& config,
                                               const PipelineResult& pipeline,
                                               int repeats);

struct BmiClassRow {
    std::string label;  // normal / overweight / obese
    std::size_t n = 0;
    bool defined = false;  // false when n < 2
    double mean_ahi = 0, sd_ahi = 0;
    ScoreWithCi f1;
};
struct BmiReport {
    std::array<BmiClassRow, 3> classes;
    double pearson_r = 0, pearson_p = 1;
    double spearman_rho = 0, spearman_p = 1;
};
// BMI classes < 25 / [25,30) / >= 30; correlation p-values by a seeded
// permutation test with n_permutations draws.
BmiReport bmi_stratified_report(const std::vector<double>& ref_ahi,
                                const std::vector<SeverityClass>& ref_sev,
                                const std::vector<SeverityClass>& pred_sev,
                                const std::vector<double>& bmi,
                                int n_permutations = 10000, std::uint64_t seed = 42);

// ---------------------------------------------------------------------------
// Report writers (CSV/JSON under an output directory).
// ---------------------------------------------------------------------------

void write_agreement_csv(const AgreementReport& r, const std::filesystem::path& path);
void write_classification_csv(const ClassificationReport& r,
                              const std::filesystem::path& path);
void write_confusion_csv(const ClassificationReport& r, const std::filesystem::path& path);
void write_bland_altman_points_csv(const std::vector<double>& ref,
                                   const std::vector<double>& pred,
                                   const std::filesystem::path& path);
void write_parity_points_csv(const std::vector<double>& ref,
                             const std::vector<double>& pred,
                             const std::filesystem::path& path);
void write_arm_csv(const std::vector<NamedArm>& arms, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_intervention_csv(const std::vector<InterventionRow>& rows,
                            const std::filesystem::path& path);
void write_importance_csv(const std::vector<ImportanceRow>& rows,
                          const std::filesystem::path& path);
void write_bmi_csv(const BmiReport& report, const std::filesystem::path& path);
void write_eval_bundle(const ArmMetrics& metrics, const std::filesystem::path& dir);

// run_manifest.json: FNV-1a hash of the config JSON, the seed, tool version.
void write_run_manifest(const std::filesystem::path& dir, const std::string& config_json,
                        std::uint64_t seed);

}  // namespace kindsleep
