#include "ceg/autodiff.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "ceg/errors.hpp"

namespace ceg::ad {

namespace {

std::string shape_str(const Array& a) {
    return std::to_string(a.rows) + "x" + std::to_string(a.cols);
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw NumericError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                           shape_str(b));
    }
}

} // namespace

Var Tape::emit(Array value, std::function<void(Tape&)> backward_fn) {
    Node node;
    node.grad = Array(value.rows, value.cols);
    node.value = std::move(value);
    node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Array value) {
    return emit(std::move(value), nullptr);
}

Var Tape::leaf(std::span<const double> value) {
    return leaf(Array::vector(std::vector<double>(value.begin(), value.end())));
}

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Array out = value(a);
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, b, self](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Array out = value(a);
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, b, self](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Array out = value(a);
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, b, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        const auto& bv2 = t.value(b).data;
        auto& ga = t.grad_mut(a).data;
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av[i];
        }
    });
}

Var Tape::matmul(Var a, Var b) {
    const Array& av = value(a);
    const Array& bv = value(b);
    if (av.cols != bv.rows) {
        throw NumericError("matmul: shape mismatch " + shape_str(av) + " vs " + shape_str(bv));
    }
    Array out(av.rows, bv.cols);
    for (std::size_t i = 0; i < av.rows; ++i) {
        for (std::size_t k = 0; k < av.cols; ++k) {
            const double aik = av(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < bv.cols; ++j) out(i, j) += aik * bv(k, j);
        }
    }
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, b, self](Tape& t) {
        const Array& g = t.grad(self);
        const Array& av2 = t.value(a);
        const Array& bv2 = t.value(b);
        Array& ga = t.grad_mut(a);
        Array& gb = t.grad_mut(b);
        // dA = G * B^T
        for (std::size_t i = 0; i < ga.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) {
                const double gij = g(i, j);
                if (gij == 0.0) continue;
                for (std::size_t k = 0; k < ga.cols; ++k) ga(i, k) += gij * bv2(k, j);
            }
        // dB = A^T * G
        for (std::size_t i = 0; i < av2.rows; ++i)
            for (std::size_t k = 0; k < gb.rows; ++k) {
                const double aik = av2(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < gb.cols; ++j) gb(k, j) += aik * g(i, j);
            }
    });
}

Var Tape::affine(Var w, Var x, Var b) {
    return add(matmul(w, x), b);
}

Var Tape::add_row_bias(Var m, Var b) {
    const Array& mv = value(m);
    const Array& bv = value(b);
    if (bv.rows != mv.cols || bv.cols != 1) {
        throw NumericError("add_row_bias: shape mismatch " + shape_str(mv) + " vs " +
                           shape_str(bv));
    }
    Array out = mv;
    for (std::size_t i = 0; i < mv.rows; ++i)
        for (std::size_t j = 0; j < mv.cols; ++j) out(i, j) += bv.data[j];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [m, b, self](Tape& t) {
        const Array& g = t.grad(self);
        Array& gm = t.grad_mut(m);
        Array& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) {
                gm(i, j) += g(i, j);
                gb.data[j] += g(i, j);
            }
    });
}

Var Tape::repeat_rows(Var v, std::size_t r) {
    const Array& vv = value(v);
    if (vv.cols != 1) throw NumericError("repeat_rows: expected vector, got " + shape_str(vv));
    Array out(r, vv.rows);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < vv.rows; ++j) out(i, j) = vv.data[j];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [v, self](Tape& t) {
        const Array& g = t.grad(self);
        Array& gv = t.grad_mut(v);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) gv.data[j] += g(i, j);
    });
}

Var Tape::concat_cols(Var a, Var b) {
    const Array& av = value(a);
    const Array& bv = value(b);
    if (av.rows != bv.rows) {
        throw NumericError("concat_cols: shape mismatch " + shape_str(av) + " vs " +
                           shape_str(bv));
    }
    Array out(av.rows, av.cols + bv.cols);
    for (std::size_t i = 0; i < av.rows; ++i) {
        for (std::size_t j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
        for (std::size_t j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
    }
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    const std::size_t a_cols = av.cols;
    return emit(std::move(out), [a, b, self, a_cols](Tape& t) {
        const Array& g = t.grad(self);
        Array& ga = t.grad_mut(a);
        Array& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t j = 0; j < a_cols; ++j) ga(i, j) += g(i, j);
            for (std::size_t j = a_cols; j < g.cols; ++j) gb(i, j - a_cols) += g(i, j);
        }
    });
}

Var Tape::concat(Var a, Var b) {
    const Array& av = value(a);
    const Array& bv = value(b);
    if (av.cols != 1 || bv.cols != 1) {
        throw NumericError("concat: expected vectors, got " + shape_str(av) + " and " +
                           shape_str(bv));
    }
    Array out(av.rows + bv.rows, 1);
    for (std::size_t i = 0; i < av.rows; ++i) out.data[i] = av.data[i];
    for (std::size_t i = 0; i < bv.rows; ++i) out.data[av.rows + i] = bv.data[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    const std::size_t a_rows = av.rows;
    return emit(std::move(out), [a, b, self, a_rows](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < a_rows; ++i) ga[i] += g[i];
        for (std::size_t i = a_rows; i < g.size(); ++i) gb[i - a_rows] += g[i];
    });
}

Var Tape::transpose(Var m) {
    const Array& mv = value(m);
    Array out(mv.cols, mv.rows);
    for (std::size_t i = 0; i < mv.rows; ++i)
        for (std::size_t j = 0; j < mv.cols; ++j) out(j, i) = mv(i, j);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [m, self](Tape& t) {
        const Array& g = t.grad(self);
        Array& gm = t.grad_mut(m);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) gm(j, i) += g(i, j);
    });
}

Var Tape::slice_cols(Var m, std::size_t c0, std::size_t c1) {
    const Array& mv = value(m);
    if (c1 > mv.cols || c0 >= c1) throw NumericError("slice_cols: bad range");
    Array out(mv.rows, c1 - c0);
    for (std::size_t i = 0; i < mv.rows; ++i)
        for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = mv(i, j);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [m, self, c0](Tape& t) {
        const Array& g = t.grad(self);
        Array& gm = t.grad_mut(m);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) gm(i, c0 + j) += g(i, j);
    });
}

Var Tape::slice_rows(Var m, std::size_t r0, std::size_t r1) {
    const Array& mv = value(m);
    if (r1 > mv.rows || r0 >= r1) throw NumericError("slice_rows: bad range");
    Array out(r1 - r0, mv.cols);
    for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = 0; j < mv.cols; ++j) out(i - r0, j) = mv(i, j);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [m, self, r0](Tape& t) {
        const Array& g = t.grad(self);
        Array& gm = t.grad_mut(m);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) gm(r0 + i, j) += g(i, j);
    });
}

namespace {
double softplus_val(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
double sigmoid_val(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
} // namespace

Var Tape::softplus(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = softplus_val(v);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid_val(av[i]);
    });
}

Var Tape::relu(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av[i] > 0.0) ga[i] += g[i];
    });
}

Var Tape::tanh(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = std::tanh(v);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& yv = t.value(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
}

Var Tape::sigmoid(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = sigmoid_val(v);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& yv = t.value(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
    });
}

Var Tape::exp(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = std::exp(v);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& yv = t.value(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    });
}

Var Tape::log(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = std::log(v);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
    });
}

Var Tape::log_floor(Var a, double floor) {
    Array out = value(a);
    for (double& v : out.data) v = std::log(std::max(v, floor));
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self, floor](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av[i] > floor) ga[i] += g[i] / av[i];
    });
}

Var Tape::square(Var a) {
    Array out = value(a);
    for (double& v : out.data) v = v * v;
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        const auto& av = t.value(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * av[i];
    });
}

Var Tape::neg(Var a) {
    return scale(a, -1.0);
}

Var Tape::scale(Var a, double c) {
    Array out = value(a);
    for (double& v : out.data) v *= c;
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self, c](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
}

Var Tape::add_const(Var a, double c) {
    Array out = value(a);
    for (double& v : out.data) v += c;
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var Tape::cmul(Var a, Array c) {
    require_same_shape(value(a), c, "cmul");
    Array out = value(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= c.data[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    auto cv = std::make_shared<Array>(std::move(c));
    return emit(std::move(out), [a, self, cv](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * cv->data[i];
    });
}

Var Tape::cadd(Var a, Array c) {
    require_same_shape(value(a), c, "cadd");
    Array out = value(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(std::move(out), [a, self](Tape& t) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : value(a).data) s += v;
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return emit(Array::scalar(s), [a, self](Tape& t) {
        const double g = t.grad(self).data[0];
        auto& ga = t.grad_mut(a).data;
        for (double& v : ga) v += g;
    });
}

Var Tape::mean(Var a) {
    const double n = static_cast<double>(value(a).size());
    return scale(sum(a), 1.0 / n);
}

void Tape::backward(Var loss) {
    if (value(loss).size() != 1) {
        throw NumericError("backward: loss must be scalar, got " + shape_str(value(loss)));
    }
    grad_mut(loss).data[0] = 1.0;
    for (std::size_t i = loss.idx + 1; i-- > 0;) {
        if (nodes_[i].backward_fn) nodes_[i].backward_fn(*this);
    }
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x, std::span<const double> analytic_grad,
                  double eps) {
    std::vector<double> xp(x.begin(), x.end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < xp.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + eps;
        const double fp = f(xp);
        xp[i] = orig - eps;
        const double fm = f(xp);
        xp[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        const double fd = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(analytic_grad[i] - fd) / std::max(1e-8, std::abs(fd));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace ceg::ad
