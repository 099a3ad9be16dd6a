#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ceg::ad {

// Dense row-major array. Vectors are rows x 1.
struct Array {
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::vector<double> data;

    Array() = default;
    Array(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Array(std::size_t r, std::size_t c, std::vector<double> d)
        : rows(r), cols(c), data(std::move(d)) {}
    static Array vector(std::vector<double> d) {
        const std::size_t n = d.size();
        return Array(n, 1, std::move(d));
    }
    static Array scalar(double v) { return Array(1, 1, {v}); }

    std::size_t size() const { return data.size(); }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Handle into a Tape; valid only for the tape that created it.
struct Var {
    std::uint32_t idx = 0;
};

// Define-by-run reverse-mode tape over dense arrays. Nodes are created in
// topological order by construction; backward() replays them in exact
// reverse creation order and accumulates gradients (multiple consumers sum).
class Tape {
public:
    // Leaf holding a constant or parameter value. Gradients of leaves are
    // readable after backward().
    Var leaf(Array value);
    Var leaf(std::span<const double> value);

    const Array& value(Var v) const { return nodes_[v.idx].value; }
    const Array& grad(Var v) const { return nodes_[v.idx].grad; }
    double scalar(Var v) const { return nodes_[v.idx].value.data[0]; }
    std::size_t size() const { return nodes_.size(); }

    // Elementwise binary ops (shapes must match exactly).
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);

    // Matrix product: (m x k) * (k x n) -> (m x n).
    Var matmul(Var a, Var b);
    // w * x + b for a matrix w (m x k), vector x (k x 1), vector b (m x 1).
    Var affine(Var w, Var x, Var b);
    // m (R x C) + row-broadcast bias b (C x 1).
    Var add_row_bias(Var m, Var b);
    // Vector v (n x 1) repeated as R identical rows -> (R x n).
    Var repeat_rows(Var v, std::size_t r);
    // Horizontal concatenation of equal-row matrices.
    Var concat_cols(Var a, Var b);
    // Vertical concatenation of vectors.
    Var concat(Var a, Var b);
    Var transpose(Var m);
    // Column / row slices, half-open ranges.
    Var slice_cols(Var m, std::size_t c0, std::size_t c1);
    Var slice_rows(Var m, std::size_t r0, std::size_t r1);

    // Elementwise unary ops.
    Var softplus(Var a); // max(x,0) + log1p(exp(-|x|))
    Var relu(Var a);     // gradient at exactly 0 is 0
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var exp(Var a);
    Var log(Var a);
    // log(max(x, floor)); gradient is 0 where x < floor.
    Var log_floor(Var a, double floor);
    Var square(Var a);
    Var neg(Var a);

    // Constant (non-differentiated) scaling / shifting.
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var cmul(Var a, Array c); // elementwise multiply by a constant array
    Var cadd(Var a, Array c);

    // Reductions to 1 x 1.
    Var sum(Var a);
    Var mean(Var a);

    // Seeds d(loss)/d(loss) = 1 and propagates. loss must be scalar.
    void backward(Var loss);

private:
    struct Node {
        Array value;
        Array grad;
        std::function<void(Tape&)> backward_fn; // null for leaves
    };

    Var emit(Array value, std::function<void(Tape&)> backward_fn);
    Array& grad_mut(Var v) { return nodes_[v.idx].grad; }

    std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central difference| relative error,
// where the analytic gradient is supplied by the caller and the central
// difference uses the given eps. Denominator floored at 1e-8.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x, std::span<const double> analytic_grad,
                  double eps);

} // namespace ceg::ad
