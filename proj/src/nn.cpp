#include "kindsleep/nn.hpp"

#include <cmath>

namespace kindsleep::nn {

void AdamOptimizer::step(const std::vector<Param*>& params) {
    ++step_count;
    const double b1 = config.beta1, b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
    for (Param* p : params) {
        if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
            throw ValidationError("adam_step: gradient shape mismatch for " + p->name);
        p->m = b1 * p->m + (1.0 - b1) * p->grad;
        p->v = b2 * p->v + (1.0 - b2) * p->grad.cwiseProduct(p->grad);
        p->value.array() -=
            config.lr * (p->m.array() / bc1) /
            ((p->v.array() / bc2).sqrt() + config.eps);
    }
}

void uniform_init(Matrix& m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

Vector softmax(const Vector& e) {
    const double mx = e.maxCoeff();
    Vector out = (e.array() - mx).exp();
    out /= out.sum();
    return out;
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(int in_ch_, int out_ch_, int kernel_, std::mt19937_64& rng)
    : W("conv.W", out_ch_, static_cast<Eigen::Index>(in_ch_) * kernel_),
      b("conv.b", out_ch_, 1),
      in_ch(in_ch_),
      out_ch(out_ch_),
      kernel(kernel_) {
    if (kernel_ <= 0 || kernel_ % 2 == 0)
        throw ValidationError("Conv1d: kernel must be odd and positive");
    uniform_init(W.value, 1.0 / std::sqrt(static_cast<double>(in_ch_ * kernel_)), rng);
}

Matrix Conv1d::forward(const Matrix& x) {
    if (x.cols() != in_ch) throw ValidationError("Conv1d: channel mismatch");
    const Eigen::Index T = x.rows();
    const int pad = kernel / 2;
    cols_.setZero(T, static_cast<Eigen::Index>(in_ch) * kernel);
    for (int j = 0; j < kernel; ++j) {
        const int shift = j - pad;
        const Eigen::Index src_lo = std::max<Eigen::Index>(0, shift);
        const Eigen::Index src_hi = std::min<Eigen::Index>(T, T + shift);
        if (src_hi <= src_lo) continue;
        const Eigen::Index dst_lo = src_lo - shift;
        cols_.block(dst_lo, static_cast<Eigen::Index>(j) * in_ch, src_hi - src_lo, in_ch) =
            x.block(src_lo, 0, src_hi - src_lo, in_ch);
    }
    in_rows_ = T;
    Matrix y = cols_ * W.value.transpose();
    y.rowwise() += b.value.col(0).transpose();
    return y;
}

Matrix Conv1d::backward(const Matrix& upstream) {
    if (upstream.rows() != in_rows_ || upstream.cols() != out_ch)
        throw ValidationError("Conv1d: upstream shape mismatch");
    W.grad.noalias() += upstream.transpose() * cols_;
    b.grad.col(0) += upstream.colwise().sum().transpose();
    const Matrix dcols = upstream * W.value;
    const Eigen::Index T = in_rows_;
    const int pad = kernel / 2;
    Matrix dx = Matrix::Zero(T, in_ch);
    for (int j = 0; j < kernel; ++j) {
        const int shift = j - pad;
        const Eigen::Index src_lo = std::max<Eigen::Index>(0, shift);
        const Eigen::Index src_hi = std::min<Eigen::Index>(T, T + shift);
        if (src_hi <= src_lo) continue;
        const Eigen::Index dst_lo = src_lo - shift;
        dx.block(src_lo, 0, src_hi - src_lo, in_ch) +=
            dcols.block(dst_lo, static_cast<Eigen::Index>(j) * in_ch, src_hi - src_lo, in_ch);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm1d
// ---------------------------------------------------------------------------

BatchNorm1d::BatchNorm1d(int channels, double momentum_, double eps_)
    : gamma("bn.gamma", channels, 1),
      beta("bn.beta", channels, 1),
      running_mean(Vector::Zero(channels)),
      running_var(Vector::Ones(channels)),
      momentum(momentum_),
      eps(eps_) {
    gamma.value.setOnes();
}

Matrix BatchNorm1d::forward(const Matrix& x, bool training) {
    if (x.cols() != gamma.value.rows()) throw ValidationError("BatchNorm1d: channel mismatch");
    const double n = static_cast<double>(x.rows());
    if (training) {
        batch_mean_ = x.colwise().mean().transpose();
        Vector var = (x.rowwise() - batch_mean_.transpose())
                         .array()
                         .square()
                         .colwise()
                         .sum()
                         .transpose() /
                     n;
        batch_inv_sd_ = (var.array() + eps).rsqrt();
        running_mean = momentum * running_mean + (1.0 - momentum) * batch_mean_;
        running_var = momentum * running_var + (1.0 - momentum) * var;
        xhat_ = ((x.rowwise() - batch_mean_.transpose()).array().rowwise() *
                 batch_inv_sd_.transpose().array())
                    .matrix();
        Matrix y = (xhat_.array().rowwise() * gamma.value.col(0).transpose().array()).matrix();
        y.rowwise() += beta.value.col(0).transpose();
        return y;
    }
    const Vector inv_sd = (running_var.array() + eps).rsqrt();
    Matrix xhat = ((x.rowwise() - running_mean.transpose()).array().rowwise() *
                   inv_sd.transpose().array())
                      .matrix();
    Matrix y = (xhat.array().rowwise() * gamma.value.col(0).transpose().array()).matrix();
    y.rowwise() += beta.value.col(0).transpose();
    return y;
}

Matrix BatchNorm1d::backward(const Matrix& upstream) {
    const double n = static_cast<double>(upstream.rows());
    gamma.grad.col(0) += upstream.cwiseProduct(xhat_).colwise().sum().transpose();
    beta.grad.col(0) += upstream.colwise().sum().transpose();

    const Vector sum_dy = upstream.colwise().sum().transpose();
    const Vector sum_dy_xhat = upstream.cwiseProduct(xhat_).colwise().sum().transpose();
    Matrix dx = n * upstream;
    dx.rowwise() -= sum_dy.transpose();
    dx -= (xhat_.array().rowwise() * sum_dy_xhat.transpose().array()).matrix();
    dx.array().rowwise() *=
        (gamma.value.col(0).cwiseProduct(batch_inv_sd_) / n).transpose().array();
    return dx;
}

// ---------------------------------------------------------------------------
// Activations / pooling / dropout / dense
// ---------------------------------------------------------------------------

Matrix LeakyRelu::forward(const Matrix& x) {
    mask_ = (x.array() > 0).select(Matrix::Ones(x.rows(), x.cols()),
                                   Matrix::Constant(x.rows(), x.cols(), slope_));
    return x.cwiseProduct(mask_);
}

Matrix LeakyRelu::backward(const Matrix& upstream) { return upstream.cwiseProduct(mask_); }

MaxPool1d::MaxPool1d(int pool, int stride) : pool_(pool), stride_(stride) {
    if (pool <= 0 || stride <= 0) throw ValidationError("MaxPool1d: bad pool/stride");
}

int MaxPool1d::output_len(int input_len, int pool, int stride) {
    if (input_len < pool) throw ValidationError("MaxPool1d: input shorter than pool");
    return (input_len - pool) / stride + 1;
}

Matrix MaxPool1d::forward(const Matrix& x) {
    const int T = static_cast<int>(x.rows());
    const int C = static_cast<int>(x.cols());
    const int To = output_len(T, pool_, stride_);
    in_rows_ = T;
    argmax_.assign(static_cast<std::size_t>(To) * C, 0);
    Matrix y(To, C);
    for (int o = 0; o < To; ++o) {
        const int lo = o * stride_;
        for (int c = 0; c < C; ++c) {
            int best = lo;
            double bv = x(lo, c);
            for (int t = lo + 1; t < lo + pool_; ++t) {
                if (x(t, c) > bv) {
                    bv = x(t, c);
                    best = t;
                }
            }
            y(o, c) = bv;
            argmax_[static_cast<std::size_t>(o) * C + c] = best;
        }
    }
    return y;
}

Matrix MaxPool1d::backward(const Matrix& upstream) {
    const int C = static_cast<int>(upstream.cols());
    Matrix dx = Matrix::Zero(in_rows_, C);
    for (int o = 0; o < upstream.rows(); ++o)
        for (int c = 0; c < C; ++c)
            dx(argmax_[static_cast<std::size_t>(o) * C + c], c) += upstream(o, c);
    return dx;
}

Matrix Dropout::forward(const Matrix& x, bool training, std::mt19937_64& rng) {
    if (!training || rate_ <= 0.0) {
        identity_ = true;
        return x;
    }
    identity_ = false;
    const double keep = 1.0 - rate_;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            mask_(i, j) = u(rng) < keep ? 1.0 / keep : 0.0;
    return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& upstream) {
    if (identity_) return upstream;
    return upstream.cwiseProduct(mask_);
}

Dense::Dense(int in_dim, int out_dim, std::mt19937_64& rng)
    : W("dense.W", out_dim, in_dim), b("dense.b", out_dim, 1) {
    uniform_init(W.value, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
}

Matrix Dense::forward(const Matrix& x) {
    if (x.cols() != W.value.cols()) throw ValidationError("Dense: input width mismatch");
    x_ = x;
    Matrix y = x * W.value.transpose();
    y.rowwise() += b.value.col(0).transpose();
    return y;
}

Matrix Dense::backward(const Matrix& upstream) {
    W.grad.noalias() += upstream.transpose() * x_;
    b.grad.col(0) += upstream.colwise().sum().transpose();
    return upstream * W.value;
}

// ---------------------------------------------------------------------------
// LSTM / BiLSTM
// ---------------------------------------------------------------------------

namespace {
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

Lstm::Lstm(int in_dim_, int hidden_, std::mt19937_64& rng, bool reverse_)
    : Wx("lstm.Wx", 4 * hidden_, in_dim_),
      Wh("lstm.Wh", 4 * hidden_, hidden_),
      b("lstm.b", 4 * hidden_, 1),
      in_dim(in_dim_),
      hidden(hidden_),
      reverse(reverse_) {
    uniform_init(Wx.value, 1.0 / std::sqrt(static_cast<double>(in_dim_)), rng);
    uniform_init(Wh.value, 1.0 / std::sqrt(static_cast<double>(hidden_)), rng);
    // Forget-gate bias starts at 1.
    b.value.block(hidden_, 0, hidden_, 1).setOnes();
}

Matrix Lstm::forward(const Matrix& x_in) {
    if (x_in.cols() != in_dim) throw ValidationError("Lstm: input width mismatch");
    x_ = reverse ? Matrix(x_in.colwise().reverse()) : x_in;
    const Eigen::Index T = x_.rows();
    const int h = hidden;

    const Matrix xw = x_ * Wx.value.transpose();  // (T, 4h)
    gates_.resize(T, 4 * h);
    cells_.resize(T, h);
    cell_tanh_.resize(T, h);
    hidden_states_.resize(T, h);

    Vector hprev = Vector::Zero(h), cprev = Vector::Zero(h);
    for (Eigen::Index t = 0; t < T; ++t) {
        Vector z = xw.row(t).transpose() + Wh.value * hprev + b.value.col(0);
        for (int j = 0; j < h; ++j) {
            const double i_g = sigmoid(z(j));
            const double f_g = sigmoid(z(h + j));
            const double g_g = std::tanh(z(2 * h + j));
            const double o_g = sigmoid(z(3 * h + j));
            const double c = f_g * cprev(j) + i_g * g_g;
            const double ct = std::tanh(c);
            gates_(t, j) = i_g;
            gates_(t, h + j) = f_g;
            gates_(t, 2 * h + j) = g_g;
            gates_(t, 3 * h + j) = o_g;
            cells_(t, j) = c;
            cell_tanh_(t, j) = ct;
            hidden_states_(t, j) = o_g * ct;
        }
        hprev = hidden_states_.row(t).transpose();
        cprev = cells_.row(t).transpose();
    }
    return reverse ? Matrix(hidden_states_.colwise().reverse()) : hidden_states_;
}

Matrix Lstm::backward(const Matrix& upstream_in) {
    const Matrix upstream =
        reverse ? Matrix(upstream_in.colwise().reverse()) : upstream_in;
    const Eigen::Index T = x_.rows();
    const int h = hidden;

    Matrix dz_all = Matrix::Zero(T, 4 * h);
    Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        Vector dh = upstream.row(t).transpose() + dh_next;
        Vector dz(4 * h);
        Vector dc_prev(h);
        for (int j = 0; j < h; ++j) {
            const double i_g = gates_(t, j);
            const double f_g = gates_(t, h + j);
            const double g_g = gates_(t, 2 * h + j);
            const double o_g = gates_(t, 3 * h + j);
            const double ct = cell_tanh_(t, j);
            const double cprev = t > 0 ? cells_(t - 1, j) : 0.0;

            const double dog = dh(j) * ct;
            double dc = dc_next(j) + dh(j) * o_g * (1.0 - ct * ct);
            const double dig = dc * g_g;
            const double dgg = dc * i_g;
            const double dfg = dc * cprev;
            dc_prev(j) = dc * f_g;

            dz(j) = dig * i_g * (1.0 - i_g);
            dz(h + j) = dfg * f_g * (1.0 - f_g);
            dz(2 * h + j) = dgg * (1.0 - g_g * g_g);
            dz(3 * h + j) = dog * o_g * (1.0 - o_g);
        }
        dz_all.row(t) = dz.transpose();
        if (t > 0) Wh.grad.noalias() += dz * hidden_states_.row(t - 1);
        b.grad.col(0) += dz;
        dh_next = Wh.value.transpose() * dz;
        dc_next = dc_prev;
    }
    Wx.grad.noalias() += dz_all.transpose() * x_;
    Matrix dx = dz_all * Wx.value;
    return reverse ? Matrix(dx.colwise().reverse()) : dx;
}

BiLstm::BiLstm(int in_dim, int hidden, std::mt19937_64& rng)
    : fw(in_dim, hidden, rng, false), bw(in_dim, hidden, rng, true) {
    fw.Wx.name = "bilstm.fw.Wx";
    fw.Wh.name = "bilstm.fw.Wh";
    fw.b.name = "bilstm.fw.b";
    bw.Wx.name = "bilstm.bw.Wx";
    bw.Wh.name = "bilstm.bw.Wh";
    bw.b.name = "bilstm.bw.b";
}

Matrix BiLstm::forward(const Matrix& x) {
    const Matrix hf = fw.forward(x);
    const Matrix hb = bw.forward(x);
    Matrix out(x.rows(), hf.cols() + hb.cols());
    out << hf, hb;
    return out;
}

Matrix BiLstm::backward(const Matrix& upstream) {
    const Eigen::Index h = upstream.cols() / 2;
    Matrix dx = fw.backward(upstream.leftCols(h));
    dx += bw.backward(upstream.rightCols(h));
    return dx;
}

std::vector<Param*> BiLstm::params() {
    return {&fw.Wx, &fw.Wh, &fw.b, &bw.Wx, &bw.Wh, &bw.b};
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

Attention::Attention(int seq_len_, int in_dim_, int units_, std::mt19937_64& rng)
    : W("attn.W", in_dim_, units_),
      Wc("attn.Wc", units_, 1),
      b("attn.b", seq_len_, units_),
      seq_len(seq_len_),
      in_dim(in_dim_),
      units(units_) {
    uniform_init(W.value, 1.0 / std::sqrt(static_cast<double>(in_dim_)), rng);
    uniform_init(Wc.value, 1.0 / std::sqrt(static_cast<double>(units_)), rng);
}

Vector Attention::forward(const Matrix& x) {
    if (x.rows() != seq_len || x.cols() != in_dim)
        throw ValidationError("Attention: input shape mismatch");
    x_ = x;
    features_ = ((x * W.value) + b.value).array().tanh().matrix();
    const Vector e = features_ * Wc.value;
    alpha_ = softmax(e);
    return x.transpose() * alpha_;
}

Matrix Attention::backward(const Vector& upstream) {
    if (x_.rows() == 0) throw ValidationError("Attention: backward before forward");
    // Through the context sum.
    const Vector dalpha = x_ * upstream;
    Matrix dx = alpha_ * upstream.transpose();
    // Softmax Jacobian.
    const double dot = alpha_.dot(dalpha);
    const Vector de = alpha_.cwiseProduct((dalpha.array() - dot).matrix());
    Wc.grad.noalias() += features_.transpose() * de;
    const Matrix dpre = (de * Wc.value.transpose())
                            .cwiseProduct((1.0 - features_.array().square()).matrix());
    W.grad.noalias() += x_.transpose() * dpre;
    b.grad += dpre;
    dx.noalias() += dpre * W.value.transpose();
    return dx;
}

// ---------------------------------------------------------------------------
// Loss + gradient checking
// ---------------------------------------------------------------------------

double mae_loss(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size()) throw ValidationError("mae_loss: length mismatch");
    return (pred - target).cwiseAbs().mean();
}

Vector mae_loss_grad(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size()) throw ValidationError("mae_loss: length mismatch");
    const double n = static_cast<double>(pred.size());
    Vector g(pred.size());
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const double d = pred(i) - target(i);
        g(i) = d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0);
    }
    return g;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const std::vector<Param*>& params,
                           double tolerance,
                           double h) {
    for (Param* p : params) p->zero_grad();
    backward();
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
            for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
                const double saved = p->value(i, j);
                p->value(i, j) = saved + h;
                const double lp = loss();
                p->value(i, j) = saved - h;
                const double lm = loss();
                p->value(i, j) = saved;
                const double fd = (lp - lm) / (2.0 * h);
                const double an = analytic[pi](i, j);
                const double rel =
                    std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
                ++report.n_checked;
                if (rel > report.max_rel_err) {
                    report.max_rel_err = rel;
                    report.worst_param = p->name + "(" + std::to_string(i) + "," +
                                         std::to_string(j) + ")";
                }
            }
        }
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

}  // namespace kindsleep::nn
