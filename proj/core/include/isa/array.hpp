#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "isa/errors.hpp"

namespace isa {

class Rng;

/// Dense row-major 2-d array of doubles. The only numeric container in the
/// project; vectors are 1xN or Nx1.
struct Array2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Array2() = default;
    Array2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    Array2(int r, int c, std::vector<double> d);

    static Array2 zeros(int r, int c) { return Array2(r, c); }
    static Array2 full(int r, int c, double v);
    static Array2 identity(int n);
    static Array2 from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Array2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

enum class Axis {
    rows,  // normalization runs down each column (column sums become 1)
    cols,  // normalization runs across each row (row sums become 1)
};

// ---- value-level kernels (the forward table; the graph reuses these) ----

Array2 matmul(const Array2& a, const Array2& b);
Array2 transpose(const Array2& a);
Array2 add(const Array2& a, const Array2& b);
Array2 sub(const Array2& a, const Array2& b);
Array2 scale(const Array2& a, double c);
/// a + row broadcast over every row of a; row must be 1 x a.cols.
Array2 add_row(const Array2& a, const Array2& row);
/// Numerically stable softmax along `axis` (max subtraction).
Array2 softmax_over(const Array2& a, Axis axis);
/// Element-wise GELU, erf form: x * Phi(x).
Array2 activation(const Array2& a);
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
Array2 sigmoid(const Array2& a);
/// Rows scaled to unit Euclidean norm. Throws DegenerateInputError on a zero row.
Array2 l2_normalize(const Array2& a);
/// Rows divided by their sums; defined for nonnegative input (attention mass).
Array2 l1_normalize_rows(const Array2& a);
/// Mean over rows of -sum_j y_ij * log(max(p_ij, kLogEps)). y is one-hot rows.
double cross_entropy(const Array2& p, const Array2& y);
/// Mean over entries of the binary cross entropy of probabilities p against
/// labels y in {0,1}, with the same epsilon clamp as cross_entropy.
double binary_cross_entropy(const Array2& p, const Array2& y);
Array2 vcat(const Array2& a, const Array2& b);
/// 3x3 same-padded patch extraction over an h*w grid stored row-major:
/// (h*w) x c -> (h*w) x 9c, zero rows at the border.
Array2 im2col3x3(const Array2& a, int h, int w);
Array2 mean_rows(const Array2& a);  // 1 x cols
double dot(const Array2& a, const Array2& b);
double frobenius_norm(const Array2& a);

inline constexpr double kLogEps = 1e-12;

Array2 random_uniform(int r, int c, double lo, double hi, Rng& rng);
Array2 random_normal(int r, int c, double sigma, Rng& rng);

std::string shape_str(const Array2& a);

}  // namespace isa
