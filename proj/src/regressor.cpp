#include "kindsleep/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace kindsleep {

SeverityClass severity(double ahi) {
    if (ahi < 0) throw ValidationError("severity: AHI must be non-negative");
    if (ahi < 5.0) return SeverityClass::Normal;
    if (ahi < 15.0) return SeverityClass::Mild;
    if (ahi < 30.0) return SeverityClass::Moderate;
    return SeverityClass::Severe;
}

std::vector<double> encode_clinical(const ClinicalFeatures& c) {
    std::vector<double> v;
    v.reserve(kClinicalDim);
    v.push_back(c.age);
    v.push_back(c.bmi);
    v.push_back(c.sbp);
    v.push_back(c.dbp);
    v.push_back(c.weight_kg);
    v.push_back(c.height_cm);
    v.push_back(c.smoker ? 1.0 : 0.0);
    v.push_back(c.hypertension ? 1.0 : 0.0);
    v.push_back(c.gender == Gender::Female ? 1.0 : 0.0);
    v.push_back(c.ethnicity == Ethnicity::NonHispanic ? 1.0 : 0.0);
    v.push_back(c.ethnicity == Ethnicity::Hispanic ? 1.0 : 0.0);
    v.push_back(c.race == Race::White ? 1.0 : 0.0);
    v.push_back(c.race == Race::Black ? 1.0 : 0.0);
    v.push_back(c.race == Race::Other ? 1.0 : 0.0);
    return v;
}

const std::vector<std::string>& clinical_feature_names() {
    static const std::vector<std::string> names = {
        "age",           "bmi",          "sbp",        "dbp",
        "weight_kg",     "height_cm",    "smoker",     "hypertension",
        "gender_female", "eth_nonhisp",  "eth_hisp",   "race_white",
        "race_black",    "race_other"};
    return names;
}

void RegressorConfig::validate() const {
    if (hidden_units <= 0) throw ValidationError("RegressorConfig: hidden_units must be > 0");
    if (l2_penalty < 0) throw ValidationError("RegressorConfig: l2_penalty must be >= 0");
    if (lr <= 0) throw ValidationError("RegressorConfig: lr must be > 0");
    if (max_epochs <= 0) throw ValidationError("RegressorConfig: max_epochs must be > 0");
}

MatrixXd MlpRegressor::standardize_rows(const std::vector<std::vector<double>>& x) const {
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    const Eigen::Index d = feat_mean_.size();
    MatrixXd out(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(x[static_cast<std::size_t>(i)].size()) != d)
            throw ValidationError("regressor: feature length mismatch");
        for (Eigen::Index j = 0; j < d; ++j)
            out(i, j) = (x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                         feat_mean_(j)) /
                        feat_sd_(j);
    }
    return out;
}

double MlpRegressor::loss_and_gradients(const MatrixXd& x, const VectorXd& y,
                                        MatrixXd& dW1, VectorXd& db1,
                                        RowVectorXd& dW2, double& db2) const {
    const double n = static_cast<double>(x.rows());
    const MatrixXd pre = (x * W1.transpose()).rowwise() + b1.transpose();
    const MatrixXd h = pre.cwiseMax(0.0);
    const VectorXd pred = (h * W2.transpose()).col(0).array() + b2;
    const VectorXd err = pred - y;

    const double data_loss = err.squaredNorm() / n;
    const double reg = l2_penalty_ * (W1.squaredNorm() + W2.squaredNorm());

    const VectorXd dpred = 2.0 * err / n;
    dW2 = dpred.transpose() * h;
    dW2 += 2.0 * l2_penalty_ * W2;
    db2 = dpred.sum();
    MatrixXd dh = dpred * W2;
    dh = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    dW1 = dh.transpose() * x;
    dW1 += 2.0 * l2_penalty_ * W1;
    db1 = dh.colwise().sum().transpose();
    return data_loss + reg;
}

void MlpRegressor::train(const std::vector<std::vector<double>>& x,
                         const std::vector<double>& y,
                         const std::vector<std::vector<double>>& x_val,
                         const std::vector<double>& y_val,
                         const RegressorConfig& config) {
    config.validate();
    if (x.empty() || x.size() != y.size())
        throw ValidationError("regressor: empty or mismatched training set");
    if (x_val.size() != y_val.size())
        throw ValidationError("regressor: mismatched validation set");
    const Eigen::Index d = static_cast<Eigen::Index>(x[0].size());

    // Canonical sample order: summation and full-batch gradients become
    // independent of the order the caller supplied the training set in.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (y[a] != y[b]) return y[a] < y[b];
        return x[a] < x[b];
    });

    // Standardization statistics from the training set only.
    feat_mean_ = VectorXd::Zero(d);
    feat_sd_ = VectorXd::Ones(d);
    for (std::size_t i : order)
        for (Eigen::Index j = 0; j < d; ++j)
            feat_mean_(j) += x[i][static_cast<std::size_t>(j)];
    feat_mean_ /= static_cast<double>(x.size());
    VectorXd var = VectorXd::Zero(d);
    for (std::size_t i : order)
        for (Eigen::Index j = 0; j < d; ++j) {
            const double c = x[i][static_cast<std::size_t>(j)] - feat_mean_(j);
            var(j) += c * c;
        }
    var /= static_cast<double>(x.size());
    for (Eigen::Index j = 0; j < d; ++j) feat_sd_(j) = var(j) > 0 ? std::sqrt(var(j)) : 1.0;

    target_mean_ = 0;
    for (std::size_t i : order) target_mean_ += y[i];
    target_mean_ /= static_cast<double>(y.size());
    double tvar = 0;
    for (std::size_t i : order) tvar += (y[i] - target_mean_) * (y[i] - target_mean_);
    tvar /= static_cast<double>(y.size());
    target_sd_ = tvar > 0 ? std::sqrt(tvar) : 1.0;

    MatrixXd X(static_cast<Eigen::Index>(x.size()), d);
    VectorXd Y(static_cast<Eigen::Index>(x.size()));
    {
        std::vector<std::vector<double>> xs;
        xs.reserve(x.size());
        for (std::size_t i : order) xs.push_back(x[i]);
        X = standardize_rows(xs);
        for (std::size_t i = 0; i < order.size(); ++i)
            Y(static_cast<Eigen::Index>(i)) = (y[order[i]] - target_mean_) / target_sd_;
    }

    const int hdim = config.hidden_units;
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(static_cast<double>(d)),
                                              1.0 / std::sqrt(static_cast<double>(d)));
    std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(static_cast<double>(hdim)),
                                              1.0 / std::sqrt(static_cast<double>(hdim)));
    W1.resize(hdim, d);
    for (Eigen::Index j = 0; j < W1.cols(); ++j)
        for (Eigen::Index i = 0; i < W1.rows(); ++i) W1(i, j) = u1(rng);
    b1 = VectorXd::Zero(hdim);
    W2.resize(1, hdim);
    for (Eigen::Index i = 0; i < W2.cols(); ++i) W2(0, i) = u2(rng);
    b2 = 0;
    l2_penalty_ = config.l2_penalty;
    trained_ = true;  // predict() usable for validation below

    MatrixXd Xv;
    VectorXd Yv;
    const bool has_val = !x_val.empty();
    if (has_val) {
        Xv = standardize_rows(x_val);
        Yv.resize(static_cast<Eigen::Index>(y_val.size()));
        for (std::size_t i = 0; i < y_val.size(); ++i)
            Yv(static_cast<Eigen::Index>(i)) = (y_val[i] - target_mean_) / target_sd_;
    }

    double lr = config.lr;
    double best_val = std::numeric_limits<double>::infinity();
    int stall = 0;
    MatrixXd bestW1 = W1;
    VectorXd bestb1 = b1;
    RowVectorXd bestW2 = W2;
    double bestb2 = b2;

    MatrixXd dW1;
    VectorXd db1;
    RowVectorXd dW2;
    double db2 = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double loss = loss_and_gradients(X, Y, dW1, db1, dW2, db2);
        if (!std::isfinite(loss))
            throw std::runtime_error("regressor training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch));
        W1 -= lr * dW1;
        b1 -= lr * db1;
        W2 -= lr * dW2;
        b2 -= lr * db2;

        double score;
        if (has_val) {
            const MatrixXd hv = ((Xv * W1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
            const VectorXd pv = (hv * W2.transpose()).col(0).array() + b2;
            score = (pv - Yv).squaredNorm() / static_cast<double>(Yv.size());
        } else {
            score = loss;
        }
        if (score < best_val - 1e-12) {
            best_val = score;
            stall = 0;
            bestW1 = W1;
            bestb1 = b1;
            bestW2 = W2;
            bestb2 = b2;
        } else if (++stall >= config.lr_patience) {
            lr *= 0.5;
            stall = 0;
            if (lr < 1e-9) break;
        }
    }
    W1 = bestW1;
    b1 = bestb1;
    W2 = bestW2;
    b2 = bestb2;
}

double MlpRegressor::predict(const std::vector<double>& features) const {
    if (!trained_) throw ValidationError("regressor: predict before train");
    if (static_cast<Eigen::Index>(features.size()) != feat_mean_.size())
        throw ValidationError("regressor: feature length mismatch");
    VectorXd xz(feat_mean_.size());
    for (Eigen::Index j = 0; j < xz.size(); ++j)
        xz(j) = (features[static_cast<std::size_t>(j)] - feat_mean_(j)) / feat_sd_(j);
    const VectorXd h = (W1 * xz + b1).cwiseMax(0.0);
    const double z = (W2 * h)(0) + b2;
    return std::max(0.0, z * target_sd_ + target_mean_);
}

std::vector<double> MlpRegressor::predict_batch(
    const std::vector<std::vector<double>>& x) const {
    std::vector<double> out;
    out.reserve(x.size());
    for (const auto& row : x) out.push_back(predict(row));
    return out;
}

void MlpRegressor::save(const std::filesystem::path& path) const {
    if (!trained_) throw ValidationError("regressor: save before train");
    json j;
    j["hidden_units"] = W1.rows();
    j["input_dim"] = W1.cols();
    j["l2_penalty"] = l2_penalty_;
    j["target_mean"] = target_mean_;
    j["target_sd"] = target_sd_;
    auto dump = [](const double* p, Eigen::Index n) {
        return std::vector<double>(p, p + n);
    };
    j["feat_mean"] = dump(feat_mean_.data(), feat_mean_.size());
    j["feat_sd"] = dump(feat_sd_.data(), feat_sd_.size());
    j["W1"] = dump(W1.data(), W1.size());
    j["b1"] = dump(b1.data(), b1.size());
    j["W2"] = dump(W2.data(), W2.size());
    j["b2"] = b2;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

MlpRegressor MlpRegressor::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing file: " + path.string());
    json j;
    in >> j;
    MlpRegressor m;
    const Eigen::Index h = j.at("hidden_units").get<Eigen::Index>();
    const Eigen::Index d = j.at("input_dim").get<Eigen::Index>();
    auto fill = [&](const char* key, double* p, Eigen::Index n) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != n)
            throw ValidationError("regressor bundle: bad array size for " + std::string(key));
        std::copy(v.begin(), v.end(), p);
    };
    m.W1.resize(h, d);
    m.b1.resize(h);
    m.W2.resize(1, h);
    m.feat_mean_.resize(d);
    m.feat_sd_.resize(d);
    fill("W1", m.W1.data(), m.W1.size());
    fill("b1", m.b1.data(), m.b1.size());
    fill("W2", m.W2.data(), m.W2.size());
    fill("feat_mean", m.feat_mean_.data(), d);
    fill("feat_sd", m.feat_sd_.data(), d);
    m.b2 = j.at("b2").get<double>();
    m.l2_penalty_ = j.at("l2_penalty").get<double>();
    m.target_mean_ = j.at("target_mean").get<double>();
    m.target_sd_ = j.at("target_sd").get<double>();
    m.trained_ = true;
    return m;
}

}  // namespace kindsleep
