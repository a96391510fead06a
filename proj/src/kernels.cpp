#include "vitray/kernels.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include <omp.h>

namespace vitray::kernels {

namespace {

constexpr std::size_t kParallelThreshold = 1u << 16;
constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double phi_cdf(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2));
}

inline double phi_pdf(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// One softmax slice; strided so the same body serves any axis.
inline void softmax_one(const double* in, double* out, std::size_t len, std::size_t stride) {
    double mx = in[0];
    for (std::size_t k = 1; k < len; ++k) {
        double v = in[k * stride];
        if (v > mx) mx = v;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        double e = std::exp(in[k * stride] - mx);
        out[k * stride] = e;
        total += e;
    }
    double inv = 1.0 / total;
    for (std::size_t k = 0; k < len; ++k) out[k * stride] *= inv;
}

inline void softmax_backward_one(const double* y, const double* dy, double* dx,
                                 std::size_t len, std::size_t stride) {
    double dot = 0.0;
    for (std::size_t k = 0; k < len; ++k) dot += dy[k * stride] * y[k * stride];
    for (std::size_t k = 0; k < len; ++k) {
        dx[k * stride] = y[k * stride] * (dy[k * stride] - dot);
    }
}

inline void layer_norm_row(const double* x, const double* gamma, const double* beta,
                           double eps, double* y, double* mean_out, double* rstd_out,
                           std::size_t r, std::size_t cols) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        double d = xr[j] - mean;
        var += d * d;
    }
    var /= static_cast<double>(cols);
    double rstd = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
        yr[j] = (xr[j] - mean) * rstd * gamma[j] + beta[j];
    }
    if (mean_out) mean_out[r] = mean;
    if (rstd_out) rstd_out[r] = rstd;
}

// dxhat = dy * gamma; dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
inline void layer_norm_backward_row(const double* x, const double* gamma,
                                    const double* mean, const double* rstd,
                                    const double* dy, double* dx,
                                    std::size_t r, std::size_t cols) {
    const double* xr = x + r * cols;
    const double* dyr = dy + r * cols;
    double* dxr = dx + r * cols;
    double mu = mean[r];
    double rs = rstd[r];
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        double xhat = (xr[j] - mu) * rs;
        double dxhat = dyr[j] * gamma[j];
        s1 += dxhat;
        s2 += dxhat * xhat;
    }
    double inv_cols = 1.0 / static_cast<double>(cols);
    s1 *= inv_cols;
    s2 *= inv_cols;
    for (std::size_t j = 0; j < cols; ++j) {
        double xhat = (xr[j] - mu) * rs;
        double dxhat = dyr[j] * gamma[j];
        dxr[j] = rs * (dxhat - s1 - xhat * s2);
    }
}

} // namespace

bool should_parallelize(std::size_t work) {
    return work >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
}

// ---------------------------------------------------------------------------
// Serial references
// ---------------------------------------------------------------------------

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        double* cp = c + p * n;
        for (std::size_t j = 0; j < n; ++j) cp[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double aip = a[i * k + p];
            const double* bi = b + i * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_bias_rows(const double* a, const double* bias, double* out,
                   std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* ai = a + i * cols;
        double* oi = out + i * cols;
        for (std::size_t j = 0; j < cols; ++j) oi[j] = ai[j] + bias[j];
    }
}

void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
        out[j] = acc;
    }
}

void softmax_slices(const double* in, double* out,
                    std::size_t outer, std::size_t len, std::size_t inner) {
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t base = o * len * inner + i;
            softmax_one(in + base, out + base, len, inner);
        }
    }
}

void softmax_backward_slices(const double* y, const double* dy, double* dx,
                             std::size_t outer, std::size_t len, std::size_t inner) {
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t base = o * len * inner + i;
            softmax_backward_one(y + base, dy + base, dx + base, len, inner);
        }
    }
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* mean_out, double* rstd_out,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        layer_norm_row(x, gamma, beta, eps, y, mean_out, rstd_out, r, cols);
    }
}

void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* mean, const double* rstd,
                              const double* dy, double* dx, double* dgamma,
                              double* dbeta, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        layer_norm_backward_row(x, gamma, mean, rstd, dy, dx, r, cols);
    }
    // dgamma[j] = sum_r dy[r][j] * xhat[r][j]; dbeta[j] = sum_r dy[r][j]
    for (std::size_t j = 0; j < cols; ++j) {
        double dg = 0.0;
        double db = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            double xhat = (x[r * cols + j] - mean[r]) * rstd[r];
            dg += dy[r * cols + j] * xhat;
            db += dy[r * cols + j];
        }
        dgamma[j] += dg;
        dbeta[j] += db;
    }
}

void gelu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * phi_cdf(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        dx[i] = dy[i] * (phi_cdf(x[i]) + x[i] * phi_pdf(x[i]));
    }
}

} // namespace serial

// ---------------------------------------------------------------------------
// Parallel front ends
// ---------------------------------------------------------------------------

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    if (!should_parallelize(m * n * k)) {
        serial::matmul(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    if (!should_parallelize(m * n * k)) {
        serial::matmul_nt(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    if (!should_parallelize(m * n * k)) {
        serial::matmul_tn(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(k); ++pp) {
        auto p = static_cast<std::size_t>(pp);
        double* cp = c + p * n;
        for (std::size_t j = 0; j < n; ++j) cp[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double aip = a[i * k + p];
            const double* bi = b + i * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::add(a, b, out, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        out[i] = a[i] + b[i];
    }
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::mul(a, b, out, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        out[i] = a[i] * b[i];
    }
}

void scale(const double* a, double s, double* out, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::scale(a, s, out, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        out[i] = a[i] * s;
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::axpy(alpha, x, y, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] += alpha * x[i];
    }
}

void add_bias_rows(const double* a, const double* bias, double* out,
                   std::size_t rows, std::size_t cols) {
    if (!should_parallelize(rows * cols)) {
        serial::add_bias_rows(a, bias, out, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(rows); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        const double* ai = a + i * cols;
        double* oi = out + i * cols;
        for (std::size_t j = 0; j < cols; ++j) oi[j] = ai[j] + bias[j];
    }
}

void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
    if (!should_parallelize(rows * cols)) {
        serial::col_sum(a, out, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(cols); ++jj) {
        auto j = static_cast<std::size_t>(jj);
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
        out[j] = acc;
    }
}

void softmax_slices(const double* in, double* out,
                    std::size_t outer, std::size_t len, std::size_t inner) {
    if (!should_parallelize(outer * len * inner)) {
        serial::softmax_slices(in, out, outer, len, inner);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(outer); ++o) {
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(inner); ++i) {
            std::size_t base = static_cast<std::size_t>(o) * len * inner + static_cast<std::size_t>(i);
            softmax_one(in + base, out + base, len, inner);
        }
    }
}

void softmax_backward_slices(const double* y, const double* dy, double* dx,
                             std::size_t outer, std::size_t len, std::size_t inner) {
    if (!should_parallelize(outer * len * inner)) {
        serial::softmax_backward_slices(y, dy, dx, outer, len, inner);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(outer); ++o) {
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(inner); ++i) {
            std::size_t base = static_cast<std::size_t>(o) * len * inner + static_cast<std::size_t>(i);
            softmax_backward_one(y + base, dy + base, dx + base, len, inner);
        }
    }
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* mean_out, double* rstd_out,
                     std::size_t rows, std::size_t cols) {
    if (!should_parallelize(rows * cols)) {
        serial::layer_norm_rows(x, gamma, beta, eps, y, mean_out, rstd_out, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
        layer_norm_row(x, gamma, beta, eps, y, mean_out, rstd_out,
                       static_cast<std::size_t>(r), cols);
    }
}

void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* mean, const double* rstd,
                              const double* dy, double* dx, double* dgamma,
                              double* dbeta, std::size_t rows, std::size_t cols) {
    if (!should_parallelize(rows * cols)) {
        serial::layer_norm_backward_rows(x, gamma, mean, rstd, dy, dx, dgamma, dbeta,
                                         rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
        layer_norm_backward_row(x, gamma, mean, rstd, dy, dx,
                                static_cast<std::size_t>(r), cols);
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(cols); ++jj) {
        auto j = static_cast<std::size_t>(jj);
        double dg = 0.0;
        double db = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            double xhat = (x[r * cols + j] - mean[r]) * rstd[r];
            dg += dy[r * cols + j] * xhat;
            db += dy[r * cols + j];
        }
        dgamma[j] += dg;
        dbeta[j] += db;
    }
}

void gelu(const double* x, double* y, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::gelu(x, y, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] = x[i] * phi_cdf(x[i]);
    }
}

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
    if (!should_parallelize(n)) {
        serial::gelu_backward(x, dy, dx, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        dx[i] = dy[i] * (phi_cdf(x[i]) + x[i] * phi_pdf(x[i]));
    }
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

} // namespace vitray::kernels
