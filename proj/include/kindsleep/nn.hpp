#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kindsleep/types.hpp"

namespace kindsleep::nn {

using Matrix = Eigen::MatrixXd;  // time x channels, row-major semantics via (T, C)
using Vector = Eigen::VectorXd;

// A named parameter with its gradient and Adam moment buffers.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix m;  // first moment
    Matrix v;  // second moment

    Param() = default;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)),
          value(Matrix::Zero(rows, cols)),
          grad(Matrix::Zero(rows, cols)),
          m(Matrix::Zero(rows, cols)),
          v(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a set of parameters; step_count shared.
struct AdamOptimizer {
    AdamConfig config;
    long step_count = 0;

    explicit AdamOptimizer(AdamConfig cfg = {}) : config(cfg) {}
    void step(const std::vector<Param*>& params);
};

void uniform_init(Matrix& m, double bound, std::mt19937_64& rng);

Vector softmax(const Vector& e);

// ---------------------------------------------------------------------------
// Layers. Each caches what backward needs; backward consumes the upstream
// gradient and returns the input gradient while accumulating into Param::grad.
// ---------------------------------------------------------------------------

class Conv1d {
public:
    // Same padding, stride 1. W is (out_ch, in_ch * kernel), b is (out_ch, 1).
    Conv1d(int in_ch, int out_ch, int kernel, std::mt19937_64& rng);

    Matrix forward(const Matrix& x);          // (T, in_ch) -> (T, out_ch)
    Matrix backward(const Matrix& upstream);  // (T, out_ch) -> (T, in_ch)

    std::vector<Param*> params() { return {&W, &b}; }

    Param W, b;
    int in_ch, out_ch, kernel;

private:
    Matrix cols_;  // cached im2col matrix (T, in_ch * kernel)
    Eigen::Index in_rows_ = 0;
};

class BatchNorm1d {
public:
    explicit BatchNorm1d(int channels, double momentum = 0.9, double eps = 1e-5);

    Matrix forward(const Matrix& x, bool training);
    Matrix backward(const Matrix& upstream);

    std::vector<Param*> params() { return {&gamma, &beta}; }

    Param gamma, beta;
    Vector running_mean, running_var;
    double momentum, eps;

private:
    Matrix xhat_;
    Vector batch_mean_, batch_inv_sd_;
};

class LeakyRelu {
public:
    explicit LeakyRelu(double slope = 0.01) : slope_(slope) {}
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& upstream);

private:
    double slope_;
    Matrix mask_;
};

class MaxPool1d {
public:
    MaxPool1d(int pool, int stride);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& upstream);
    static int output_len(int input_len, int pool, int stride);

private:
    int pool_, stride_;
    Eigen::Index in_rows_ = 0;
    std::vector<int> argmax_;  // flattened (T_out, C)
};

class Dropout {
public:
    explicit Dropout(double rate) : rate_(rate) {}
    Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng);
    Matrix backward(const Matrix& upstream);

private:
    double rate_;
    Matrix mask_;
    bool identity_ = true;
};

class Dense {
public:
    // y = x * W^T + b, applied row-wise. W is (out, in), b is (out, 1).
    Dense(int in_dim, int out_dim, std::mt19937_64& rng);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& upstream);
    std::vector<Param*> params() { return {&W, &b}; }

    Param W, b;

private:
    Matrix x_;
};

// Single-direction LSTM with standard input/forget/output gates and tanh
// candidate. Gate weights pack as [i; f; g; o] along rows.
class Lstm {
public:
    Lstm(int in_dim, int hidden, std::mt19937_64& rng, bool reverse = false);

    Matrix forward(const Matrix& x);          // (T, in) -> (T, hidden)
    Matrix backward(const Matrix& upstream);  // (T, hidden) -> (T, in)

    std::vector<Param*> params() { return {&Wx, &Wh, &b}; }

    Param Wx, Wh, b;  // (4h, in), (4h, h), (4h, 1)
    int in_dim, hidden;
    bool reverse;

private:
    Matrix x_, gates_, cells_, cell_tanh_, hidden_states_;
};

class BiLstm {
public:
    BiLstm(int in_dim, int hidden, std::mt19937_64& rng);

    Matrix forward(const Matrix& x);          // (T, in) -> (T, 2h)
    Matrix backward(const Matrix& upstream);  // (T, 2h) -> (T, in)

    std::vector<Param*> params();

    Lstm fw, bw;
};

// Softmax temporal attention producing a context vector over channels.
class Attention {
public:
    Attention(int seq_len, int in_dim, int units, std::mt19937_64& rng);

    // Returns the context vector (in_dim). Attention weights are in alpha().
    Vector forward(const Matrix& x);
    Matrix backward(const Vector& upstream);  // gradient w.r.t. x

    std::vector<Param*> params() { return {&W, &Wc, &b}; }
    const Vector& alpha() const { return alpha_; }

    Param W;   // (in_dim, units)
    Param Wc;  // (units, 1)
    Param b;   // (seq_len, units)
    int seq_len, in_dim, units;

private:
    Matrix x_, features_;
    Vector alpha_;
};

// Mean absolute error with subgradient 0 at exact ties.
double mae_loss(const Vector& pred, const Vector& target);
Vector mae_loss_grad(const Vector& pred, const Vector& target);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0;
    std::string worst_param;
    std::size_t n_checked = 0;
    bool pass = false;
};

// `loss` runs a forward pass and returns the scalar loss; `backward` runs
// forward + backward, leaving analytic gradients in each Param::grad. The
// checked elements are every entry of every listed parameter.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const std::vector<Param*>& params,
                           double tolerance = 1e-4,
                           double h = 1e-5);

}  // namespace kindsleep::nn
