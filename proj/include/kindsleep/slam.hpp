#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kindsleep/nn.hpp"
#include "kindsleep/types.hpp"

namespace kindsleep {

struct SlamConfig {
    int input_len = kSignalLen;
    int n_conv_blocks = 3;
    std::vector<int> filters_per_block = {32, 64, 64};
    std::vector<int> kernel_sizes = {9, 9, 9};
    int pool_size = 4;
    int pool_stride = 4;
    double leaky_slope = 0.01;  // 0 gives plain ReLU
    int lstm_hidden = 32;
    double dropout = 0.1;
    int attention_units = 32;
    double lr = 5e-4;
    double weight_decay = 0.0;
    int epochs = 15;
    int batch_size = 16;
    std::uint64_t seed = 42;

    void validate() const;
};

struct EpochStats {
    double train_mae = 0;  // on scaled targets
    double val_mae = 0;
};

// Oximetry-to-concepts network: conv blocks -> BiLSTM x2 -> dropout ->
// temporal attention -> dense head of width 10. Targets are standardized
// per concept with training-set statistics held by the model.
class SlamModel {
public:
    explicit SlamModel(const SlamConfig& config);

    // Scaled 10-vector; caches layer state for backward().
    nn::Vector forward(const std::vector<double>& signal, bool training);
    // Chains the loss gradient back through every layer, accumulating into
    // parameter grads; returns gradient w.r.t. the last conv block's output.
    nn::Matrix backward(const nn::Vector& dloss, bool through_conv);

    std::vector<nn::Param*> params();

    const SlamConfig& config() const { return config_; }
    bool trained() const { return trained_; }
    const std::vector<EpochStats>& history() const { return history_; }
    int pooled_len() const { return pooled_len_; }
    const nn::Matrix& conv_features() const { return conv_out_; }

    void save(const std::filesystem::path& path) const;
    static SlamModel load(const std::filesystem::path& path);

    friend SlamModel train_slam(const std::vector<std::vector<double>>& signals,
                                const std::vector<ConceptVector>& targets,
                                const std::vector<std::vector<double>>& val_signals,
                                const std::vector<ConceptVector>& val_targets,
                                const SlamConfig& config);
    friend ConceptVector predict_concepts(SlamModel& model,
                                          const std::vector<double>& signal);
    friend std::vector<double> attention_saliency(SlamModel& model,
                                                  const std::vector<double>& signal);

    Eigen::VectorXd target_mean, target_sd;  // per concept

private:
    SlamConfig config_;
    int pooled_len_ = 0;
    bool trained_ = false;
    std::vector<EpochStats> history_;
    std::mt19937_64 dropout_rng_;

    std::vector<nn::Conv1d> convs_;
    std::vector<nn::BatchNorm1d> bns_;
    std::vector<nn::LeakyRelu> acts_;
    std::vector<nn::MaxPool1d> pools_;
    std::vector<nn::BiLstm> lstms_;
    nn::Dropout drop_;
    nn::Attention attn_;
    nn::Dense head_;

    nn::Matrix conv_out_;  // cached last conv block output (T_pooled, C)
};

// Adam + MAE on standardized targets; the epoch with the best validation MAE
// is the model returned. Deterministic given config.seed.
SlamModel train_slam(const std::vector<std::vector<double>>& signals,
                     const std::vector<ConceptVector>& targets,
                     const std::vector<std::vector<double>>& val_signals,
                     const std::vector<ConceptVector>& val_targets,
                     const SlamConfig& config);

// Inference pass with inverse target scaling; rates clamped at 0,
// saturations clamped to [0,100].
ConceptVector predict_concepts(SlamModel& model, const std::vector<double>& signal);

// Gradient-weighted activation map over the last conv block, rectified,
// linearly upsampled to input length, min-max normalized to [0,1]. Works on
// untrained models too; callers should check model.trained().
std::vector<double> attention_saliency(SlamModel& model, const std::vector<double>& signal);

// Per-minute means of a preprocessed signal: the feature vector for the
// linear baselines (420 entries at the default length).
std::vector<double> summary_features(const std::vector<double>& signal);

struct RidgeBaselineRow {
    std::string concept_name;
    double mae = 0;
    double rmse = 0;
};

// Closed-form ridge per concept on summary features (unpenalized intercept);
// returns test-set errors. lambda = 0 on a rank-deficient system is an error.
std::vector<RidgeBaselineRow> ridge_concept_baseline(
    const std::vector<std::vector<double>>& train_signals,
    const std::vector<ConceptVector>& train_targets,
    const std::vector<std::vector<double>>& test_signals,
    const std::vector<ConceptVector>& test_targets, double lambda);

// Convenience used by the baselines and fusion arms: ridge fitted on
// arbitrary feature rows against a single target.
class RidgeModel {
public:
    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
             double lambda);
    double predict(const std::vector<double>& x) const;

private:
    Eigen::VectorXd beta_;  // last entry is the intercept
};

}  // namespace kindsleep
