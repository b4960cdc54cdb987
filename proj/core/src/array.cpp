#include "isa/array.hpp"

#include <algorithm>
#include <cmath>

#include "isa/rng.hpp"

namespace isa {

namespace {
void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}
}  // namespace

Array2::Array2(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    require(data.size() == static_cast<size_t>(r) * c, "Array2: data length does not match shape");
}

Array2 Array2::full(int r, int c, double v) {
    Array2 a(r, c);
    std::fill(a.data.begin(), a.data.end(), v);
    return a;
}

Array2 Array2::identity(int n) {
    Array2 a(n, n);
    for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;
    return a;
}

Array2 Array2::from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
    int r = static_cast<int>(rows_in.size());
    int c = r > 0 ? static_cast<int>(rows_in.begin()->size()) : 0;
    Array2 a(r, c);
    int i = 0;
    for (const auto& row : rows_in) {
        require(static_cast<int>(row.size()) == c, "from_rows: ragged rows");
        int j = 0;
        for (double v : row) a.at(i, j++) = v;
        ++i;
    }
    return a;
}

bool Array2::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const Array2& a) {
    return std::to_string(a.rows) + "x" + std::to_string(a.cols);
}

Array2 matmul(const Array2& a, const Array2& b) {
    require(a.cols == b.rows, "matmul: " + shape_str(a) + " * " + shape_str(b));
    Array2 out(a.rows, b.cols);
    const int n = a.rows, k = a.cols, m = b.cols;
    for (int i = 0; i < n; ++i) {
        const double* ai = &a.data[static_cast<size_t>(i) * k];
        double* oi = &out.data[static_cast<size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = &b.data[static_cast<size_t>(p) * m];
            for (int j = 0; j < m; ++j) oi[j] += av * bp[j];
        }
    }
    return out;
}

Array2 transpose(const Array2& a) {
    Array2 out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Array2 add(const Array2& a, const Array2& b) {
    require(a.same_shape(b), "add: " + shape_str(a) + " vs " + shape_str(b));
    Array2 out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Array2 sub(const Array2& a, const Array2& b) {
    require(a.same_shape(b), "sub: " + shape_str(a) + " vs " + shape_str(b));
    Array2 out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Array2 scale(const Array2& a, double c) {
    Array2 out = a;
    for (double& v : out.data) v *= c;
    return out;
}

Array2 add_row(const Array2& a, const Array2& row) {
    require(row.rows == 1 && row.cols == a.cols, "add_row: " + shape_str(a) + " + " + shape_str(row));
    Array2 out = a;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(i, j) += row.at(0, j);
    return out;
}

Array2 softmax_over(const Array2& a, Axis axis) {
    Array2 out(a.rows, a.cols);
    if (axis == Axis::cols) {
        for (int i = 0; i < a.rows; ++i) {
            double m = a.at(i, 0);
            for (int j = 1; j < a.cols; ++j) m = std::max(m, a.at(i, j));
            double s = 0.0;
            for (int j = 0; j < a.cols; ++j) {
                out.at(i, j) = std::exp(a.at(i, j) - m);
                s += out.at(i, j);
            }
            for (int j = 0; j < a.cols; ++j) out.at(i, j) /= s;
        }
    } else {
        for (int j = 0; j < a.cols; ++j) {
            double m = a.at(0, j);
            for (int i = 1; i < a.rows; ++i) m = std::max(m, a.at(i, j));
            double s = 0.0;
            for (int i = 0; i < a.rows; ++i) {
                out.at(i, j) = std::exp(a.at(i, j) - m);
                s += out.at(i, j);
            }
            for (int i = 0; i < a.rows; ++i) out.at(i, j) /= s;
        }
    }
    return out;
}

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
}

double gelu_grad_scalar(double x) {
    double phi_cdf = 0.5 * (1.0 + std::erf(x * 0.70710678118654752440));
    double phi_pdf = 0.39894228040143267794 * std::exp(-0.5 * x * x);
    return phi_cdf + x * phi_pdf;
}

Array2 activation(const Array2& a) {
    Array2 out = a;
    for (double& v : out.data) v = gelu_scalar(v);
    return out;
}

Array2 sigmoid(const Array2& a) {
    Array2 out = a;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Array2 l2_normalize(const Array2& a) {
    Array2 out = a;
    for (int i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += a.at(i, j) * a.at(i, j);
        double n = std::sqrt(s);
        if (n <= 0.0)
            throw DegenerateInputError("l2_normalize: zero row " + std::to_string(i));
        for (int j = 0; j < a.cols; ++j) out.at(i, j) /= n;
    }
    return out;
}

Array2 l1_normalize_rows(const Array2& a) {
    Array2 out = a;
    for (int i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += a.at(i, j);
        s = std::max(s, 1e-30);
        for (int j = 0; j < a.cols; ++j) out.at(i, j) /= s;
    }
    return out;
}

double cross_entropy(const Array2& p, const Array2& y) {
    require(p.same_shape(y), "cross_entropy: " + shape_str(p) + " vs " + shape_str(y));
    double acc = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        if (y.data[i] != 0.0) acc -= y.data[i] * std::log(std::max(p.data[i], kLogEps));
    }
    return acc / p.rows;
}

double binary_cross_entropy(const Array2& p, const Array2& y) {
    require(p.same_shape(y), "binary_cross_entropy: " + shape_str(p) + " vs " + shape_str(y));
    double acc = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        double pi = std::min(std::max(p.data[i], kLogEps), 1.0 - kLogEps);
        acc -= y.data[i] * std::log(pi) + (1.0 - y.data[i]) * std::log(1.0 - pi);
    }
    return acc / static_cast<double>(p.data.size());
}

Array2 vcat(const Array2& a, const Array2& b) {
    require(a.cols == b.cols, "vcat: " + shape_str(a) + " over " + shape_str(b));
    Array2 out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

Array2 im2col3x3(const Array2& a, int h, int w) {
    require(a.rows == h * w, "im2col3x3: rows != h*w");
    const int c = a.cols;
    Array2 out(h * w, 9 * c);
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            int pix = r * w + col;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    int o = (dr + 1) * 3 + (dc + 1);
                    int rr = r + dr, cc = col + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    int src = rr * w + cc;
                    for (int k = 0; k < c; ++k) out.at(pix, o * c + k) = a.at(src, k);
                }
            }
        }
    }
    return out;
}

Array2 mean_rows(const Array2& a) {
    Array2 out(1, a.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(0, j) += a.at(i, j);
    for (int j = 0; j < a.cols; ++j) out.at(0, j) /= a.rows;
    return out;
}

double dot(const Array2& a, const Array2& b) {
    require(a.same_shape(b), "dot: " + shape_str(a) + " vs " + shape_str(b));
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double frobenius_norm(const Array2& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

Array2 random_uniform(int r, int c, double lo, double hi, Rng& rng) {
    Array2 a(r, c);
    for (double& v : a.data) v = rng.uniform(lo, hi);
    return a;
}

Array2 random_normal(int r, int c, double sigma, Rng& rng) {
    Array2 a(r, c);
    for (double& v : a.data) v = sigma * rng.normal();
    return a;
}

}  // namespace isa
