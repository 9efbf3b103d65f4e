#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kindsleep/types.hpp"

namespace kindsleep {

// OSA severity from AHI: Normal < 5, Mild [5,15), Moderate [15,30), Severe >= 30.
SeverityClass severity(double ahi);

// One-hot multiclass, 0/1 binary, numeric passthrough. Length is fixed.
std::vector<double> encode_clinical(const ClinicalFeatures& c);
const std::vector<std::string>& clinical_feature_names();
constexpr int kClinicalDim = 14;

struct RegressorConfig {
    int hidden_units = 50;
    double l2_penalty = 0.1;
    double lr = 0.001;      // halved when validation loss stalls
    int lr_patience = 5;    // epochs without improvement before halving
    int max_epochs = 2000;
    std::uint64_t seed = 42;

    void validate() const;
};

// Single-hidden-layer ReLU MLP for AHI, trained full batch with squared-error
// loss plus an L2 penalty on the weights (biases excluded).
class MlpRegressor {
public:
    MlpRegressor() = default;

    // Validation set drives lr halving and best-model retention; pass empty
    // vectors to fall back to training loss.
    void train(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y,
               const std::vector<std::vector<double>>& x_val,
               const std::vector<double>& y_val,
               const RegressorConfig& config);

    // Estimated AHI, clamped at 0.
    double predict(const std::vector<double>& features) const;
    std::vector<double> predict_batch(const std::vector<std::vector<double>>& x) const;

    bool trained() const { return trained_; }
    int input_dim() const { return static_cast<int>(feat_mean_.size()); }

    void save(const std::filesystem::path& path) const;
    static MlpRegressor load(const std::filesystem::path& path);

    // Gradient of the regularized loss; exposed for finite-difference checks.
    double loss_and_gradients(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              Eigen::MatrixXd& dW1, Eigen::VectorXd& db1,
                              Eigen::RowVectorXd& dW2, double& db2) const;

    Eigen::MatrixXd W1;      // (hidden, in)
    Eigen::VectorXd b1;      // (hidden)
    Eigen::RowVectorXd W2;   // (1, hidden)
    double b2 = 0;
    double l2_penalty_ = 0;

private:
    Eigen::VectorXd feat_mean_, feat_sd_;
    double target_mean_ = 0, target_sd_ = 1;
    bool trained_ = false;

    Eigen::MatrixXd standardize_rows(const std::vector<std::vector<double>>& x) const;
};

}  // namespace kindsleep
