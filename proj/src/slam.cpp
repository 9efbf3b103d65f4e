#include "kindsleep/slam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace kindsleep {

namespace {
constexpr int kConcepts = 10;
constexpr int kSecondsPerMinute = 60;
}  // namespace

void SlamConfig::validate() const {
    if (input_len <= 0) throw ValidationError("SlamConfig: input_len must be positive");
    if (n_conv_blocks <= 0) throw ValidationError("SlamConfig: n_conv_blocks must be positive");
    if (static_cast<int>(filters_per_block.size()) != n_conv_blocks ||
        static_cast<int>(kernel_sizes.size()) != n_conv_blocks)
        throw ValidationError("SlamConfig: per-block lists must match n_conv_blocks");
    for (int f : filters_per_block)
        if (f <= 0) throw ValidationError("SlamConfig: filters must be positive");
    for (int k : kernel_sizes)
        if (k <= 0) throw ValidationError("SlamConfig: kernel sizes must be positive");
    if (pool_size <= 0 || pool_stride <= 0)
        throw ValidationError("SlamConfig: pool size/stride must be positive");
    if (dropout < 0 || dropout >= 1) throw ValidationError("SlamConfig: dropout must be in [0,1)");
    if (leaky_slope < 0) throw ValidationError("SlamConfig: leaky_slope must be >= 0");
    if (lstm_hidden <= 0 || attention_units <= 0)
        throw ValidationError("SlamConfig: hidden sizes must be positive");
    if (lr <= 0) throw ValidationError("SlamConfig: lr must be > 0");
    if (weight_decay < 0) throw ValidationError("SlamConfig: weight_decay must be >= 0");
    if (epochs <= 0 || batch_size <= 0)
        throw ValidationError("SlamConfig: epochs and batch_size must be positive");
}

SlamModel::SlamModel(const SlamConfig& config)
    : config_(config),
      dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ull),
      drop_(config.dropout),
      attn_(1, 1, 1, dropout_rng_),  // placeholder, rebuilt below
      head_(1, 1, dropout_rng_) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    dropout_rng_.seed(config.seed ^ 0x9e3779b97f4a7c15ull);

    int t = config.input_len;
    int in_ch = 1;
    for (int i = 0; i < config.n_conv_blocks; ++i) {
        const int out_ch = config.filters_per_block[static_cast<std::size_t>(i)];
        convs_.emplace_back(in_ch, out_ch, config.kernel_sizes[static_cast<std::size_t>(i)], rng);
        bns_.emplace_back(out_ch);
        acts_.emplace_back(config.leaky_slope);
        pools_.emplace_back(config.pool_size, config.pool_stride);
        t = nn::MaxPool1d::output_len(t, config.pool_size, config.pool_stride);
        if (t <= 0) throw ValidationError("SlamConfig: pooling exhausts the sequence");
        in_ch = out_ch;
    }
    pooled_len_ = t;

    lstms_.emplace_back(in_ch, config.lstm_hidden, rng);
    lstms_.emplace_back(2 * config.lstm_hidden, config.lstm_hidden, rng);
    attn_ = nn::Attention(pooled_len_, 2 * config.lstm_hidden, config.attention_units, rng);
    head_ = nn::Dense(2 * config.lstm_hidden, kConcepts, rng);

    target_mean = VectorXd::Zero(kConcepts);
    target_sd = VectorXd::Ones(kConcepts);
}

std::vector<nn::Param*> SlamModel::params() {
    std::vector<nn::Param*> out;
    auto add = [&](std::vector<nn::Param*> ps) {
        out.insert(out.end(), ps.begin(), ps.end());
    };
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        add(convs_[i].params());
        add(bns_[i].params());
    }
    for (auto& l : lstms_) add(l.params());
    add(attn_.params());
    add(head_.params());
    return out;
}

nn::Vector SlamModel::forward(const std::vector<double>& signal, bool training) {
    if (static_cast<int>(signal.size()) != config_.input_len)
        throw ValidationError("SlamModel: signal length mismatch");
    nn::Matrix x(config_.input_len, 1);
    for (int i = 0; i < config_.input_len; ++i) x(i, 0) = signal[static_cast<std::size_t>(i)];
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        x = convs_[i].forward(x);
        x = bns_[i].forward(x, training);
        x = acts_[i].forward(x);
        x = pools_[i].forward(x);
    }
    conv_out_ = x;
    x = lstms_[0].forward(x);
    x = lstms_[1].forward(x);
    x = drop_.forward(x, training, dropout_rng_);
    const nn::Vector context = attn_.forward(x);
    const nn::Matrix y = head_.forward(context.transpose());
    return y.row(0).transpose();
}

nn::Matrix SlamModel::backward(const nn::Vector& dloss, bool through_conv) {
    nn::Matrix d = head_.backward(dloss.transpose());
    nn::Matrix dx = attn_.backward(d.row(0).transpose());
    dx = drop_.backward(dx);
    dx = lstms_[1].backward(dx);
    dx = lstms_[0].backward(dx);
    if (!through_conv) return dx;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        dx = pools_[i].backward(dx);
        dx = acts_[i].backward(dx);
        dx = bns_[i].backward(dx);
        dx = convs_[i].backward(dx);
    }
    return dx;
}

SlamModel train_slam(const std::vector<std::vector<double>>& signals,
                     const std::vector<ConceptVector>& targets,
                     const std::vector<std::vector<double>>& val_signals,
                     const std::vector<ConceptVector>& val_targets,
                     const SlamConfig& config) {
    config.validate();
    if (signals.empty() || signals.size() != targets.size())
        throw ValidationError("train_slam: empty or mismatched training set");
    if (val_signals.size() != val_targets.size())
        throw ValidationError("train_slam: mismatched validation set");

    SlamModel model(config);

    // Per-concept target standardization from the training set.
    const auto n = static_cast<double>(targets.size());
    for (const auto& t : targets) {
        const auto arr = t.to_array();
        for (int k = 0; k < kConcepts; ++k) model.target_mean(k) += arr[static_cast<std::size_t>(k)];
    }
    model.target_mean /= n;
    VectorXd var = VectorXd::Zero(kConcepts);
    for (const auto& t : targets) {
        const auto arr = t.to_array();
        for (int k = 0; k < kConcepts; ++k) {
            const double c = arr[static_cast<std::size_t>(k)] - model.target_mean(k);
            var(k) += c * c;
        }
    }
    var /= n;
    for (int k = 0; k < kConcepts; ++k)
        model.target_sd(k) = var(k) > 0 ? std::sqrt(var(k)) : 1.0;

    auto scaled = [&](const ConceptVector& t) {
        const auto arr = t.to_array();
        VectorXd y(kConcepts);
        for (int k = 0; k < kConcepts; ++k)
            y(k) = (arr[static_cast<std::size_t>(k)] - model.target_mean(k)) / model.target_sd(k);
        return y;
    };

    nn::AdamOptimizer opt({config.lr});
    const auto params = model.params();
    std::mt19937_64 shuffle_rng(config.seed + 1);

    std::vector<std::size_t> order(signals.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val = std::numeric_limits<double>::infinity();
    SlamModel best = model;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double train_loss_sum = 0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            const double batch_n = static_cast<double>(batch_end - pos);
            for (auto* p : params) p->zero_grad();
            for (std::size_t b = pos; b < batch_end; ++b) {
                const std::size_t idx = order[b];
                const nn::Vector pred = model.forward(signals[idx], true);
                const nn::Vector y = scaled(targets[idx]);
                const double loss = nn::mae_loss(pred, y);
                if (!std::isfinite(loss))
                    throw std::runtime_error(
                        "train_slam diverged: non-finite loss at epoch " + std::to_string(epoch));
                train_loss_sum += loss;
                model.backward(nn::mae_loss_grad(pred, y) / batch_n, true);
            }
            if (config.weight_decay > 0)
                for (auto* p : params) p->grad += config.weight_decay * p->value;
            opt.step(params);
            pos = batch_end;
        }

        EpochStats stats;
        stats.train_mae = train_loss_sum / static_cast<double>(order.size());
        if (!val_signals.empty()) {
            double val_sum = 0;
            for (std::size_t i = 0; i < val_signals.size(); ++i)
                val_sum += nn::mae_loss(model.forward(val_signals[i], false),
                                        scaled(val_targets[i]));
            stats.val_mae = val_sum / static_cast<double>(val_signals.size());
        } else {
            stats.val_mae = stats.train_mae;
        }
        model.history_.push_back(stats);
        if (stats.val_mae < best_val) {
            best_val = stats.val_mae;
            best = model;
        }
    }
    best.history_ = model.history_;
    best.trained_ = true;
    return best;
}

ConceptVector predict_concepts(SlamModel& model, const std::vector<double>& signal) {
    const nn::Vector y = model.forward(signal, false);
    std::array<double, 10> arr{};
    for (int k = 0; k < kConcepts; ++k)
        arr[static_cast<std::size_t>(k)] = y(k) * model.target_sd(k) + model.target_mean(k);
    // Clamp rates at 0 and saturations to the physical range.
    for (int k : rate_concept_indices())
        arr[static_cast<std::size_t>(k)] = std::max(0.0, arr[static_cast<std::size_t>(k)]);
    arr[4] = std::clamp(arr[4], 0.0, 100.0);  // avgsat
    arr[5] = std::clamp(arr[5], 0.0, 100.0);  // minsat
    return ConceptVector::from_array(arr);
}

std::vector<double> attention_saliency(SlamModel& model, const std::vector<double>& signal) {
    const nn::Vector y = model.forward(signal, false);
    (void)y;
    // d(sum of unscaled concept outputs)/d(scaled output k) = target_sd(k).
    const MatrixXd dfeat = model.backward(model.target_sd, false);
    const MatrixXd& feat = model.conv_features();

    // Channel-averaged gradients weight the feature map (per-sequence CAM).
    const VectorXd w = dfeat.colwise().mean().transpose();
    VectorXd s = (feat * w).cwiseMax(0.0);

    // Linear upsample from pooled resolution to the input grid.
    const int tp = static_cast<int>(s.size());
    const int d = model.config().input_len;
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        if (tp == 1) {
            out[static_cast<std::size_t>(i)] = s(0);
            continue;
        }
        const double p = static_cast<double>(i) * static_cast<double>(tp - 1) /
                         static_cast<double>(d - 1);
        const int lo = std::min(tp - 2, static_cast<int>(std::floor(p)));
        const double frac = p - lo;
        out[static_cast<std::size_t>(i)] = (1.0 - frac) * s(lo) + frac * s(lo + 1);
    }
    const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
    const double span = *mx - *mn;
    for (auto& v : out) v = span > 0 ? (v - *mn) / span : 0.0;
    return out;
}

std::vector<double> summary_features(const std::vector<double>& signal) {
    if (signal.size() < kSecondsPerMinute)
        throw ValidationError("summary_features: signal shorter than one minute");
    const std::size_t n_min = signal.size() / kSecondsPerMinute;
    std::vector<double> out(n_min);
    for (std::size_t m = 0; m < n_min; ++m) {
        double sum = 0;
        for (int j = 0; j < kSecondsPerMinute; ++j)
            sum += signal[m * kSecondsPerMinute + static_cast<std::size_t>(j)];
        out[m] = sum / kSecondsPerMinute;
    }
    return out;
}

void RidgeModel::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                     double lambda) {
    if (x.empty() || x.size() != y.size())
        throw ValidationError("ridge: empty or mismatched training set");
    if (lambda < 0) throw ValidationError("ridge: lambda must be >= 0");
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    const Eigen::Index d = static_cast<Eigen::Index>(x[0].size());
    MatrixXd X(n, d + 1);
    VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(x[static_cast<std::size_t>(i)].size()) != d)
            throw ValidationError("ridge: ragged feature rows");
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        X(i, d) = 1.0;
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    MatrixXd A = X.transpose() * X;
    for (Eigen::Index j = 0; j < d; ++j) A(j, j) += lambda;  // intercept unpenalized
    if (lambda == 0) {
        Eigen::FullPivLU<MatrixXd> lu(A);
        if (!lu.isInvertible())
            throw ValidationError("ridge: singular normal equations; use lambda > 0");
        beta_ = lu.solve(X.transpose() * Y);
    } else {
        beta_ = A.ldlt().solve(X.transpose() * Y);
    }
}

double RidgeModel::predict(const std::vector<double>& x) const {
    if (static_cast<Eigen::Index>(x.size()) + 1 != beta_.size())
        throw ValidationError("ridge: feature length mismatch");
    double z = beta_(beta_.size() - 1);
    for (Eigen::Index j = 0; j + 1 < beta_.size(); ++j)
        z += beta_(j) * x[static_cast<std::size_t>(j)];
    return z;
}

std::vector<RidgeBaselineRow> ridge_concept_baseline(
    const std::vector<std::vector<double>>& train_signals,
    const std::vector<ConceptVector>& train_targets,
    const std::vector<std::vector<double>>& test_signals,
    const std::vector<ConceptVector>& test_targets, double lambda) {
    if (train_signals.size() != train_targets.size() ||
        test_signals.size() != test_targets.size())
        throw ValidationError("ridge_concept_baseline: mismatched inputs");
    std::vector<std::vector<double>> xtr, xte;
    xtr.reserve(train_signals.size());
    xte.reserve(test_signals.size());
    for (const auto& s : train_signals) xtr.push_back(summary_features(s));
    for (const auto& s : test_signals) xte.push_back(summary_features(s));

    std::vector<RidgeBaselineRow> rows;
    const auto& names = ConceptVector::names();
    for (int k = 0; k < kConcepts; ++k) {
        std::vector<double> ytr;
        ytr.reserve(train_targets.size());
        for (const auto& t : train_targets)
            ytr.push_back(t.to_array()[static_cast<std::size_t>(k)]);
        RidgeModel m;
        m.fit(xtr, ytr, lambda);
        double abs_sum = 0, sq_sum = 0;
        for (std::size_t i = 0; i < xte.size(); ++i) {
            const double err =
                m.predict(xte[i]) - test_targets[i].to_array()[static_cast<std::size_t>(k)];
            abs_sum += std::abs(err);
            sq_sum += err * err;
        }
        const double nt = std::max<std::size_t>(1, xte.size());
        rows.push_back({names[static_cast<std::size_t>(k)], abs_sum / static_cast<double>(nt),
                        std::sqrt(sq_sum / static_cast<double>(nt))});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Serialization: u64 little-endian manifest length, JSON manifest, then raw
// little-endian f64 arrays in the declared order.
// ---------------------------------------------------------------------------

namespace {

struct NamedArray {
    std::string name;
    const double* data;
    Eigen::Index rows, cols;
};

std::vector<NamedArray> model_arrays(SlamModel& m, std::vector<nn::Param*>& params_out) {
    params_out = m.params();
    std::vector<NamedArray> arrays;
    int i = 0;
    for (auto* p : params_out) {
        arrays.push_back({"param_" + std::to_string(i++), p->value.data(), p->value.rows(),
                          p->value.cols()});
    }
    return arrays;
}

}  // namespace

void SlamModel::save(const std::filesystem::path& path) const {
    auto& self = const_cast<SlamModel&>(*this);
    std::vector<nn::Param*> params;
    auto arrays = model_arrays(self, params);
    for (std::size_t i = 0; i < bns_.size(); ++i) {
        arrays.push_back({"bn" + std::to_string(i) + "_running_mean",
                          bns_[i].running_mean.data(), bns_[i].running_mean.size(), 1});
        arrays.push_back({"bn" + std::to_string(i) + "_running_var",
                          bns_[i].running_var.data(), bns_[i].running_var.size(), 1});
    }
    arrays.push_back({"target_mean", target_mean.data(), target_mean.size(), 1});
    arrays.push_back({"target_sd", target_sd.data(), target_sd.size(), 1});

    json j;
    j["format"] = "kindsleep-slam-v1";
    j["trained"] = trained_;
    j["config"] = {{"input_len", config_.input_len},
                   {"n_conv_blocks", config_.n_conv_blocks},
                   {"filters_per_block", config_.filters_per_block},
                   {"kernel_sizes", config_.kernel_sizes},
                   {"pool_size", config_.pool_size},
                   {"pool_stride", config_.pool_stride},
                   {"leaky_slope", config_.leaky_slope},
                   {"lstm_hidden", config_.lstm_hidden},
                   {"dropout", config_.dropout},
                   {"attention_units", config_.attention_units},
                   {"lr", config_.lr},
                   {"weight_decay", config_.weight_decay},
                   {"epochs", config_.epochs},
                   {"batch_size", config_.batch_size},
                   {"seed", config_.seed}};
    json arr = json::array();
    for (const auto& a : arrays)
        arr.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
    j["arrays"] = arr;
    json hist = json::array();
    for (const auto& h : history_) hist.push_back({{"train_mae", h.train_mae}, {"val_mae", h.val_mae}});
    j["history"] = hist;

    const std::string manifest = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const std::uint64_t len = manifest.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(lenbuf, 8);
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    for (const auto& a : arrays)
        out.write(reinterpret_cast<const char*>(a.data),
                  static_cast<std::streamsize>(sizeof(double)) * a.rows * a.cols);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

SlamModel SlamModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("missing file: " + path.string());
    char lenbuf[8];
    in.read(lenbuf, 8);
    if (!in) throw ValidationError("truncated model bundle: " + path.string());
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i)
        len |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string manifest(len, '\0');
    in.read(manifest.data(), static_cast<std::streamsize>(len));
    if (!in) throw ValidationError("truncated model bundle: " + path.string());
    json j = json::parse(manifest);
    if (j.value("format", "") != "kindsleep-slam-v1")
        throw ValidationError("unrecognized model bundle format");

    SlamConfig cfg;
    const auto& c = j.at("config");
    cfg.input_len = c.at("input_len").get<int>();
    cfg.n_conv_blocks = c.at("n_conv_blocks").get<int>();
    cfg.filters_per_block = c.at("filters_per_block").get<std::vector<int>>();
    cfg.kernel_sizes = c.at("kernel_sizes").get<std::vector<int>>();
    cfg.pool_size = c.at("pool_size").get<int>();
    cfg.pool_stride = c.at("pool_stride").get<int>();
    cfg.leaky_slope = c.at("leaky_slope").get<double>();
    cfg.lstm_hidden = c.at("lstm_hidden").get<int>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.attention_units = c.at("attention_units").get<int>();
    cfg.lr = c.at("lr").get<double>();
    cfg.weight_decay = c.at("weight_decay").get<double>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();

    SlamModel model(cfg);
    std::vector<nn::Param*> params = model.params();
    std::vector<std::pair<double*, Eigen::Index>> slots;
    for (std::size_t i = 0; i < params.size(); ++i)
        slots.push_back({params[i]->value.data(), params[i]->value.size()});
    for (auto& bn : model.bns_) {
        slots.push_back({bn.running_mean.data(), bn.running_mean.size()});
        slots.push_back({bn.running_var.data(), bn.running_var.size()});
    }
    slots.push_back({model.target_mean.data(), model.target_mean.size()});
    slots.push_back({model.target_sd.data(), model.target_sd.size()});

    const auto& decl = j.at("arrays");
    if (decl.size() != slots.size())
        throw ValidationError("model bundle: array count mismatch");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const Eigen::Index want =
            decl[i].at("rows").get<Eigen::Index>() * decl[i].at("cols").get<Eigen::Index>();
        if (want != slots[i].second)
            throw ValidationError("model bundle: array size mismatch at index " +
                                  std::to_string(i));
        in.read(reinterpret_cast<char*>(slots[i].first),
                static_cast<std::streamsize>(sizeof(double)) * slots[i].second);
        if (!in) throw ValidationError("truncated model bundle: " + path.string());
    }
    model.trained_ = j.value("trained", false);
    for (const auto& h : j.value("history", json::array()))
        model.history_.push_back({h.at("train_mae").get<double>(), h.at("val_mae").get<double>()});
    return model;
}

}  // namespace kindsleep
