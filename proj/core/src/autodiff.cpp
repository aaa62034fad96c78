#include "koopman/autodiff.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>

#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

const Matrix& Var::value() const {
    if (!tape_) throw StateError("Var: unbound variable");
    return tape_->value(id_);
}

void Tape::check_live() const {
    if (consumed_) throw StateError("tape already consumed by backward()");
}

Var Tape::variable(Matrix value) {
    check_live();
    nodes_.push_back(Node{std::move(value), {}, true, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
    check_live();
    nodes_.push_back(Node{std::move(value), {}, false, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
    check_live();
    bool rg = false;
    for (const Var& p : parents) {
        if (p.tape() != this) throw StateError("operands recorded on different tapes");
        rg = rg || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, rg, rg ? std::move(backward) : Backward{}});
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty())
        n.grad = g;
    else
        n.grad += g;
}

void Tape::backward(const Var& loss) {
    check_live();
    if (loss.tape() != this) throw StateError("backward: loss recorded on a different tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw DimensionError("backward: loss must be 1x1, got " + shape_string(loss.value()));
    consumed_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.backward) continue;
        n.backward(*this, i);
    }
}

Matrix Tape::grad(const Var& v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

namespace {

Tape& tape_of(const Var& a) {
    if (!a.tape()) throw StateError("unbound variable");
    return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
    if (a.tape() != b.tape()) throw StateError("operands recorded on different tapes");
    return tape_of(a);
}

template <typename F>
Matrix map(const Matrix& x, F f) {
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return y;
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double swish(double x) { return x * sigmoid(x); }

double swish_prime(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

double swish_second(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(matmul(a.value(), b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, matmul_nt(g, tp.value(ib)));
        if (tp.requires_grad(ib)) tp.accumulate(ib, matmul_tn(tp.value(ia), g));
    });
}

Var add(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(add(a.value(), b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.upstream(self));
        tp.accumulate(ib, tp.upstream(self));
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(sub(a.value(), b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.upstream(self));
        if (tp.requires_grad(ib)) tp.accumulate(ib, scale(tp.upstream(self), -1.0));
    });
}

Var scale(const Var& a, double s) {
    Tape& t = tape_of(a);
    const std::size_t ia = a.id();
    return t.push(scale(a.value(), s), {a}, [ia, s](Tape& tp, std::size_t self) {
        tp.accumulate(ia, scale(tp.upstream(self), s));
    });
}

Var hadamard(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(hadamard(a.value(), b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, hadamard(g, tp.value(ib)));
        if (tp.requires_grad(ib)) tp.accumulate(ib, hadamard(g, tp.value(ia)));
    });
}

Var identity_like(const Var& a) { return tape_of(a).constant(identity_like(a.value())); }

Var solve(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    Matrix x = solve(a.value(), b.value());
    return t.push(std::move(x), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
        const Matrix gb = solve(tp.value(ia).transpose(), tp.upstream(self));
        if (tp.requires_grad(ia)) tp.accumulate(ia, scale(matmul_nt(gb, tp.value(self)), -1.0));
        tp.accumulate(ib, gb);
    });
}

Var transpose(const Var& a) {
    Tape& t = tape_of(a);
    const std::size_t ia = a.id();
    return t.push(a.value().transpose(), {a}, [ia](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.upstream(self).transpose());
    });
}

Var add_scalar(const Var& a, double c) {
    Tape& t = tape_of(a);
    const std::size_t ia = a.id();
    return t.push(map(a.value(), [c](double x) { return x + c; }), {a},
                  [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.upstream(self)); });
}

Var add_row_bias(const Var& x, const Var& bias) {
    Tape& t = tape_of(x, bias);
    if (bias.rows() != 1 || bias.cols() != x.cols())
        throw DimensionError("add_row_bias: " + shape_string(x.value()) + " + " + shape_string(bias.value()));
    Matrix y = x.value();
    const Matrix& b = bias.value();
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[c];
    const std::size_t ix = x.id(), ib = bias.id();
    return t.push(std::move(y), {x, bias}, [ix, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        tp.accumulate(ix, g);
        if (tp.requires_grad(ib)) {
            Matrix gb(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
            tp.accumulate(ib, gb);
        }
    });
}

Var mul_row(const Var& x, const Var& row) {
    Tape& t = tape_of(x, row);
    if (row.rows() != 1 || row.cols() != x.cols())
        throw DimensionError("mul_row: " + shape_string(x.value()) + " * " + shape_string(row.value()));
    Matrix y = x.value();
    const Matrix& w = row.value();
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) *= w[c];
    const std::size_t ix = x.id(), iw = row.id();
    return t.push(std::move(y), {x, row}, [ix, iw](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        const Matrix& wv = tp.value(iw);
        if (tp.requires_grad(ix)) {
            Matrix gx = g;
            for (std::size_t r = 0; r < gx.rows(); ++r)
                for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) *= wv[c];
            tp.accumulate(ix, gx);
        }
        if (tp.requires_grad(iw)) {
            Matrix gw(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gw[c] += g(r, c) * xv(r, c);
            tp.accumulate(iw, gw);
        }
    });
}

Var scale_rows(const Var& x, std::span<const double> weights) {
    Tape& t = tape_of(x);
    if (weights.size() != x.rows()) throw DimensionError("scale_rows: weight count mismatch");
    std::vector<double> w(weights.begin(), weights.end());
    Matrix y = x.value();
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) *= w[r];
    const std::size_t ix = x.id();
    return t.push(std::move(y), {x}, [ix, w = std::move(w)](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) *= w[r];
        tp.accumulate(ix, g);
    });
}

Var swish(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return swish(v); }), {x}, [ix](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= swish_prime(xv[i]);
        tp.accumulate(ix, g);
    });
}

Var swish_prime(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return swish_prime(v); }), {x}, [ix](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= swish_second(xv[i]);
        tp.accumulate(ix, g);
    });
}

Var square(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return v * v; }), {x}, [ix](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 2.0 * xv[i];
        tp.accumulate(ix, g);
    });
}

Var exp(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return std::exp(v); }), {x}, [ix](Tape& tp, std::size_t self) {
        tp.accumulate(ix, hadamard(tp.upstream(self), tp.value(self)));
    });
}

Var log(const Var& x) {
    Tape& t = tape_of(x);
    for (double v : x.value().values())
        if (!(v > 0.0)) throw DomainError("log: nonpositive argument");
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return std::log(v); }), {x}, [ix](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] /= xv[i];
        tp.accumulate(ix, g);
    });
}

Var lgamma(const Var& x) {
    Tape& t = tape_of(x);
    for (double v : x.value().values())
        if (!(v > 0.0)) throw DomainError("lgamma: nonpositive argument");
    const std::size_t ix = x.id();
    return t.push(map(x.value(), [](double v) { return std::lgamma(v); }), {x}, [ix](Tape& tp, std::size_t self) {
        Matrix g = tp.upstream(self);
        const Matrix& xv = tp.value(ix);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= boost::math::digamma(xv[i]);
        tp.accumulate(ix, g);
    });
}

Var sum(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(Matrix(1, 1, x.value().sum()), {x}, [ix](Tape& tp, std::size_t self) {
        const Matrix& xv = tp.value(ix);
        tp.accumulate(ix, Matrix(xv.rows(), xv.cols(), tp.upstream(self)[0]));
    });
}

Var sum_sq(const Var& x) {
    Tape& t = tape_of(x);
    double s = 0.0;
    for (double v : x.value().values()) s += v * v;
    const std::size_t ix = x.id();
    return t.push(Matrix(1, 1, s), {x}, [ix](Tape& tp, std::size_t self) {
        tp.accumulate(ix, scale(tp.value(ix), 2.0 * tp.upstream(self)[0]));
    });
}

Var vstack(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("vstack: no parts");
    Tape& t = tape_of(parts.front());
    std::vector<Matrix> values;
    values.reserve(parts.size());
    std::vector<std::pair<std::size_t, std::size_t>> layout;  // (id, rows)
    for (const Var& p : parts) {
        values.push_back(p.value());
        layout.emplace_back(p.id(), p.rows());
    }
    return t.push(vstack(values), parts, [layout = std::move(layout)](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        std::size_t r = 0;
        for (const auto& [id, nr] : layout) {
            if (tp.requires_grad(id)) tp.accumulate(id, g.block(r, 0, nr, g.cols()));
            r += nr;
        }
    });
}

Var slice_rows(const Var& x, std::size_t r0, std::size_t n) {
    Tape& t = tape_of(x);
    const std::size_t ix = x.id();
    return t.push(x.value().block(r0, 0, n, x.cols()), {x}, [ix, r0](Tape& tp, std::size_t self) {
        const Matrix& xv = tp.value(ix);
        Matrix g(xv.rows(), xv.cols());
        g.set_block(r0, 0, tp.upstream(self));
        tp.accumulate(ix, g);
    });
}

Var tridiagonal_skew(const Var& zeta, const Var& diag) {
    Tape& t = tape_of(zeta, diag);
    const std::size_t d = diag.cols();
    if (diag.rows() != 1 || zeta.rows() != 1 || zeta.cols() + 1 != d)
        throw DimensionError("tridiagonal_skew: zeta " + shape_string(zeta.value()) + ", diag " +
                             shape_string(diag.value()));
    Matrix k(d, d);
    for (std::size_t i = 0; i < d; ++i) k(i, i) = diag.value()[i];
    for (std::size_t i = 0; i + 1 < d; ++i) {
        k(i, i + 1) = zeta.value()[i];
        k(i + 1, i) = -zeta.value()[i];
    }
    const std::size_t iz = zeta.id(), id = diag.id();
    return t.push(std::move(k), {zeta, diag}, [iz, id, d](Tape& tp, std::size_t self) {
        const Matrix& g = tp.upstream(self);
        if (tp.requires_grad(id)) {
            Matrix gd(1, d);
            for (std::size_t i = 0; i < d; ++i) gd[i] = g(i, i);
            tp.accumulate(id, gd);
        }
        if (tp.requires_grad(iz)) {
            Matrix gz(1, d - 1);
            for (std::size_t i = 0; i + 1 < d; ++i) gz[i] = g(i, i + 1) - g(i + 1, i);
            tp.accumulate(iz, gz);
        }
    });
}

Var matexp(const Var& a, double t) {
    require_square(a.value(), "matexp");
    require_finite(a.value(), "matexp");
    if (!std::isfinite(t)) throw DomainError("matexp: non-finite time");
    const Var ta = scale(a, t);
    return expm_pade13(ta, expm_scaling_exponent(ta.value().norm1()));
}

}  // namespace koopman
