#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "cglp/errors.hpp"
#include "cglp/matrix.hpp"
#include "cglp/rng.hpp"

namespace cglp {

// Reverse-mode tape over dense matrices. A tape lives for one forward/backward
// pass; leaves carry parameter values in and gradients out. Instantiated with
// float for training and double for the finite-difference check suites.
template <class T>
class Tape {
public:
    using Var = int;

    Var leaf(Matrix<T> value) { return push(std::move(value), {}, nullptr); }

    // Constants participate in forward math only; their gradients are
    // computed but never harvested.
    Var constant(Matrix<T> value) { return leaf(std::move(value)); }

    const Matrix<T>& val(Var v) const { return nodes_[v].value; }
    const Matrix<T>& grad(Var v) const { return nodes_[v].grad; }

    size_t num_nodes() const { return nodes_.size(); }

    Var add(Var a, Var b) {
        require_same_shape(a, b, "add");
        Matrix<T> out = val(a);
        out.add_inplace(val(b));
        return push(std::move(out), {a, b}, [](Tape& t, Var o, const std::vector<Var>& in) {
            t.nodes_[in[0]].grad.add_inplace(t.nodes_[o].grad);
            t.nodes_[in[1]].grad.add_inplace(t.nodes_[o].grad);
        });
    }

    Var sub(Var a, Var b) {
        require_same_shape(a, b, "sub");
        Matrix<T> out = val(a);
        out.axpy_inplace(T(-1), val(b));
        return push(std::move(out), {a, b}, [](Tape& t, Var o, const std::vector<Var>& in) {
            t.nodes_[in[0]].grad.add_inplace(t.nodes_[o].grad);
            t.nodes_[in[1]].grad.axpy_inplace(T(-1), t.nodes_[o].grad);
        });
    }

    Var mul(Var a, Var b) {
        require_same_shape(a, b, "mul");
        Matrix<T> out(val(a).rows(), val(a).cols());
        kernels::mul(val(a).data(), val(b).data(), out.data(), out.size());
        return push(std::move(out), {a, b}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            const auto& av = t.nodes_[in[0]].value;
            const auto& bv = t.nodes_[in[1]].value;
            auto& ga = t.nodes_[in[0]].grad;
            auto& gb = t.nodes_[in[1]].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                ga.data()[i] += g.data()[i] * bv.data()[i];
                gb.data()[i] += g.data()[i] * av.data()[i];
            }
        });
    }

    Var scale(Var a, T c) {
        Matrix<T> out = val(a);
        out.scale_inplace(c);
        return push(std::move(out), {a}, [c](Tape& t, Var o, const std::vector<Var>& in) {
            t.nodes_[in[0]].grad.axpy_inplace(c, t.nodes_[o].grad);
        });
    }

    // out = a * s where s is a 1x1 var.
    Var scale_by(Var a, Var s) {
        if (val(s).size() != 1) throw ShapeError("scale_by: scalar var must be 1x1");
        Matrix<T> out = val(a);
        out.scale_inplace(val(s)(0, 0));
        return push(std::move(out), {a, s}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            const auto& av = t.nodes_[in[0]].value;
            T s = t.nodes_[in[1]].value(0, 0);
            t.nodes_[in[0]].grad.axpy_inplace(s, g);
            t.nodes_[in[1]].grad(0, 0) += kernels::dot(g.data(), av.data(), g.size());
        });
    }

    // Broadcast a 1xC row vector over every row of a.
    Var add_rowvec(Var a, Var b) {
        if (val(b).rows() != 1 || val(b).cols() != val(a).cols())
            throw ShapeError("add_rowvec: " + val(a).shape_str() + " + " + val(b).shape_str());
        Matrix<T> out = val(a);
        for (size_t r = 0; r < out.rows(); ++r)
            kernels::axpy(T(1), val(b).data(), out.row(r), out.cols());
        return push(std::move(out), {a, b}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            t.nodes_[in[0]].grad.add_inplace(g);
            auto& gb = t.nodes_[in[1]].grad;
            for (size_t r = 0; r < g.rows(); ++r)
                kernels::axpy(T(1), g.row(r), gb.data(), g.cols());
        });
    }

    Var matmul(Var a, Var b) {
        Matrix<T> out = val(a).matmul(val(b));
        return push(std::move(out), {a, b}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            const auto& av = t.nodes_[in[0]].value;
            const auto& bv = t.nodes_[in[1]].value;
            // ga += g * b^T ; gb += a^T * g
            auto& ga = t.nodes_[in[0]].grad;
            for (size_t i = 0; i < av.rows(); ++i)
                for (size_t k = 0; k < av.cols(); ++k)
                    ga(i, k) += kernels::dot(g.row(i), bv.row(k), g.cols());
            auto& gb = t.nodes_[in[1]].grad;
            for (size_t i = 0; i < av.rows(); ++i)
                for (size_t k = 0; k < av.cols(); ++k)
                    kernels::axpy(av(i, k), g.row(i), gb.row(k), g.cols());
        });
    }

    Var transpose(Var a) {
        return push(val(a).transposed(), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            t.nodes_[in[0]].grad.add_inplace(t.nodes_[o].grad.transposed());
        });
    }

    Var gather_rows(Var a, std::vector<int> idx) {
        Matrix<T> out(idx.size(), val(a).cols());
        for (size_t i = 0; i < idx.size(); ++i)
            kernels::add(val(a).row(idx[i]), out.row(i), out.row(i), out.cols());
        return push(std::move(out), {a},
                    [idx = std::move(idx)](Tape& t, Var o, const std::vector<Var>& in) {
                        const auto& g = t.nodes_[o].grad;
                        auto& ga = t.nodes_[in[0]].grad;
                        for (size_t i = 0; i < idx.size(); ++i)
                            kernels::axpy(T(1), g.row(i), ga.row(idx[i]), g.cols());
                    });
    }

    // out has n_rows rows; row dst[i] accumulates row i of a.
    Var scatter_add_rows(Var a, std::vector<int> dst, size_t n_rows) {
        if (dst.size() != val(a).rows()) throw ShapeError("scatter_add_rows: index count mismatch");
        Matrix<T> out(n_rows, val(a).cols());
        for (size_t i = 0; i < dst.size(); ++i)
            kernels::axpy(T(1), val(a).row(i), out.row(dst[i]), out.cols());
        return push(std::move(out), {a},
                    [dst = std::move(dst)](Tape& t, Var o, const std::vector<Var>& in) {
                        const auto& g = t.nodes_[o].grad;
                        auto& ga = t.nodes_[in[0]].grad;
                        for (size_t i = 0; i < dst.size(); ++i)
                            kernels::axpy(T(1), g.row(dst[i]), ga.row(i), ga.cols());
                    });
    }

    Var concat_cols(Var a, Var b) {
        if (val(a).rows() != val(b).rows()) throw ShapeError("concat_cols: row mismatch");
        size_t ca = val(a).cols(), cb = val(b).cols();
        Matrix<T> out(val(a).rows(), ca + cb);
        for (size_t r = 0; r < out.rows(); ++r) {
            std::copy(val(a).row(r), val(a).row(r) + ca, out.row(r));
            std::copy(val(b).row(r), val(b).row(r) + cb, out.row(r) + ca);
        }
        return push(std::move(out), {a, b}, [ca, cb](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            auto& ga = t.nodes_[in[0]].grad;
            auto& gb = t.nodes_[in[1]].grad;
            for (size_t r = 0; r < g.rows(); ++r) {
                kernels::axpy(T(1), g.row(r), ga.row(r), ca);
                kernels::axpy(T(1), g.row(r) + ca, gb.row(r), cb);
            }
        });
    }

    Var concat_rows(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: empty");
        size_t cols = val(parts[0]).cols(), rows = 0;
        for (Var p : parts) {
            if (val(p).cols() != cols) throw ShapeError("concat_rows: col mismatch");
            rows += val(p).rows();
        }
        Matrix<T> out(rows, cols);
        size_t r = 0;
        for (Var p : parts) {
            std::copy(val(p).data(), val(p).data() + val(p).size(), out.row(r));
            r += val(p).rows();
        }
        return push(std::move(out), parts, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            size_t r = 0;
            for (Var p : in) {
                auto& gp = t.nodes_[p].grad;
                kernels::axpy(T(1), g.row(r), gp.data(), gp.size());
                r += gp.rows();
            }
        });
    }

    Var slice_rows(Var a, size_t r0, size_t r1) {
        if (r1 > val(a).rows() || r0 > r1) throw ShapeError("slice_rows: bad range");
        Matrix<T> out(r1 - r0, val(a).cols());
        std::copy(val(a).row(r0), val(a).row(r0) + out.size(), out.data());
        return push(std::move(out), {a}, [r0](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            auto& ga = t.nodes_[in[0]].grad;
            kernels::axpy(T(1), g.data(), ga.row(r0), g.size());
        });
    }

    Var slice_cols(Var a, size_t c0, size_t c1) {
        if (c1 > val(a).cols() || c0 > c1) throw ShapeError("slice_cols: bad range");
        Matrix<T> out(val(a).rows(), c1 - c0);
        for (size_t r = 0; r < out.rows(); ++r)
            std::copy(val(a).row(r) + c0, val(a).row(r) + c1, out.row(r));
        return push(std::move(out), {a}, [c0](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            auto& ga = t.nodes_[in[0]].grad;
            for (size_t r = 0; r < g.rows(); ++r)
                kernels::axpy(T(1), g.row(r), ga.row(r) + c0, g.cols());
        });
    }

    Var tanh_(Var a) {
        Matrix<T> out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
        return push(std::move(out), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            const auto& y = t.nodes_[o].value;
            auto& ga = t.nodes_[in[0]].grad;
            for (size_t i = 0; i < g.size(); ++i)
                ga.data()[i] += g.data()[i] * (T(1) - y.data()[i] * y.data()[i]);
        });
    }

    Var relu(Var a) {
        Matrix<T> out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(out.data()[i], T(0));
        return push(std::move(out), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            const auto& g = t.nodes_[o].grad;
            const auto& x = t.nodes_[in[0]].value;
            auto& ga = t.nodes_[in[0]].grad;
            for (size_t i = 0; i < g.size(); ++i)
                if (x.data()[i] > T(0)) ga.data()[i] += g.data()[i];
        });
    }

    // Row-wise softmax; columns where allowed[c]==0 get probability 0.
    // An empty mask allows every column.
    Var softmax_rows(Var a, std::vector<uint8_t> allowed = {}) {
        const auto& x = val(a);
        if (!allowed.empty() && allowed.size() != x.cols())
            throw ShapeError("softmax_rows: mask size mismatch");
        Matrix<T> out(x.rows(), x.cols());
        for (size_t r = 0; r < x.rows(); ++r) {
            T m = -std::numeric_limits<T>::infinity();
            for (size_t c = 0; c < x.cols(); ++c)
                if (allowed.empty() || allowed[c]) m = std::max(m, x(r, c));
            T s = T(0);
            for (size_t c = 0; c < x.cols(); ++c)
                if (allowed.empty() || allowed[c]) {
                    out(r, c) = std::exp(x(r, c) - m);
                    s += out(r, c);
                }
            for (size_t c = 0; c < x.cols(); ++c) out(r, c) /= s;
        }
        return push(std::move(out), {a},
                    [allowed = std::move(allowed)](Tape& t, Var o, const std::vector<Var>& in) {
                        const auto& g = t.nodes_[o].grad;
                        const auto& p = t.nodes_[o].value;
                        auto& ga = t.nodes_[in[0]].grad;
                        for (size_t r = 0; r < g.rows(); ++r) {
                            T dot = kernels::dot(g.row(r), p.row(r), g.cols());
                            for (size_t c = 0; c < g.cols(); ++c)
                                if (allowed.empty() || allowed[c])
                                    ga(r, c) += (g(r, c) - dot) * p(r, c);
                        }
                    });
    }

    Var layer_norm_rows(Var x, Var gain, Var bias, T eps = T(1e-5)) {
        const auto& xv = val(x);
        size_t c = xv.cols();
        if (val(gain).cols() != c || val(bias).cols() != c)
            throw ShapeError("layer_norm_rows: gain/bias size mismatch");
        Matrix<T> out(xv.rows(), c);
        Matrix<T> xhat(xv.rows(), c);
        std::vector<T> inv_std(xv.rows());
        for (size_t r = 0; r < xv.rows(); ++r) {
            T mu = kernels::sum(xv.row(r), c) / static_cast<T>(c);
            T var = T(0);
            for (size_t j = 0; j < c; ++j) {
                T d = xv(r, j) - mu;
                var += d * d;
            }
            var /= static_cast<T>(c);
            T inv = T(1) / std::sqrt(var + eps);
            inv_std[r] = inv;
            for (size_t j = 0; j < c; ++j) {
                xhat(r, j) = (xv(r, j) - mu) * inv;
                out(r, j) = xhat(r, j) * val(gain)(0, j) + val(bias)(0, j);
            }
        }
        return push(std::move(out), {x, gain, bias},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std)](
                        Tape& t, Var o, const std::vector<Var>& in) {
                        const auto& g = t.nodes_[o].grad;
                        const auto& gainv = t.nodes_[in[1]].value;
                        auto& gx = t.nodes_[in[0]].grad;
                        auto& ggain = t.nodes_[in[1]].grad;
                        auto& gbias = t.nodes_[in[2]].grad;
                        size_t c = g.cols();
                        for (size_t r = 0; r < g.rows(); ++r) {
                            T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                            for (size_t j = 0; j < c; ++j) {
                                T dxh = g(r, j) * gainv(0, j);
                                mean_dxhat += dxh;
                                mean_dxhat_xhat += dxh * xhat(r, j);
                                ggain(0, j) += g(r, j) * xhat(r, j);
                                gbias(0, j) += g(r, j);
                            }
                            mean_dxhat /= static_cast<T>(c);
                            mean_dxhat_xhat /= static_cast<T>(c);
                            for (size_t j = 0; j < c; ++j) {
                                T dxh = g(r, j) * gainv(0, j);
                                gx(r, j) += inv_std[r] *
                                            (dxh - mean_dxhat - xhat(r, j) * mean_dxhat_xhat);
                            }
                        }
                    });
    }

    Var l2_normalize_rows(Var a, T eps = T(1e-12)) {
        const auto& x = val(a);
        Matrix<T> out(x.rows(), x.cols());
        std::vector<T> norms(x.rows());
        for (size_t r = 0; r < x.rows(); ++r) {
            T n = std::sqrt(kernels::sum_sq(x.row(r), x.cols()) + eps);
            norms[r] = n;
            for (size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / n;
        }
        return push(std::move(out), {a},
                    [norms = std::move(norms)](Tape& t, Var o, const std::vector<Var>& in) {
                        const auto& g = t.nodes_[o].grad;
                        const auto& y = t.nodes_[o].value;
                        auto& ga = t.nodes_[in[0]].grad;
                        for (size_t r = 0; r < g.rows(); ++r) {
                            T yg = kernels::dot(y.row(r), g.row(r), g.cols());
                            for (size_t c = 0; c < g.cols(); ++c)
                                ga(r, c) += (g(r, c) - y(r, c) * yg) / norms[r];
                        }
                    });
    }

    // Mean cross-entropy of row-wise logits against integer targets.
    Var ce_mean(Var logits, std::vector<int> targets) {
        const auto& x = val(logits);
        if (targets.size() != x.rows()) throw ShapeError("ce_mean: target count mismatch");
        Matrix<T> probs(x.rows(), x.cols());
        T loss = T(0);
        for (size_t r = 0; r < x.rows(); ++r) {
            std::copy(x.row(r), x.row(r) + x.cols(), probs.row(r));
            T m = kernels::max(probs.row(r), x.cols());
            T s = kernels::exp_shift_sum(probs.row(r), x.cols(), m);
            kernels::scale(T(1) / s, probs.row(r), x.cols());
            loss -= std::log(std::max(probs(r, targets[r]),
                                      std::numeric_limits<T>::min()));
        }
        loss /= static_cast<T>(x.rows());
        Matrix<T> out(1, 1);
        out(0, 0) = loss;
        return push(std::move(out), {logits},
                    [probs = std::move(probs), targets = std::move(targets)](
                        Tape& t, Var o, const std::vector<Var>& in) {
                        T g = t.nodes_[o].grad(0, 0) / static_cast<T>(probs.rows());
                        auto& ga = t.nodes_[in[0]].grad;
                        for (size_t r = 0; r < probs.rows(); ++r) {
                            for (size_t c = 0; c < probs.cols(); ++c)
                                ga(r, c) += g * probs(r, c);
                            ga(r, targets[r]) -= g;
                        }
                    });
    }

    // Sum of squared entries, as a 1x1.
    Var sum_sq(Var a) {
        Matrix<T> out(1, 1);
        out(0, 0) = kernels::sum_sq(val(a).data(), val(a).size());
        return push(std::move(out), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            T g = t.nodes_[o].grad(0, 0);
            t.nodes_[in[0]].grad.axpy_inplace(T(2) * g, t.nodes_[in[0]].value);
        });
    }

    Var sum_all(Var a) {
        Matrix<T> out(1, 1);
        out(0, 0) = kernels::sum(val(a).data(), val(a).size());
        return push(std::move(out), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            T g = t.nodes_[o].grad(0, 0);
            auto& ga = t.nodes_[in[0]].grad;
            for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
        });
    }

    // exp of a 1x1, clamped to [lo, hi]; gradient flows only inside the open
    // interval.
    Var exp_clamp(Var a, T lo, T hi) {
        if (val(a).size() != 1) throw ShapeError("exp_clamp: expects 1x1");
        T e = std::exp(val(a)(0, 0));
        T y = std::clamp(e, lo, hi);
        Matrix<T> out(1, 1);
        out(0, 0) = y;
        bool inside = e > lo && e < hi;
        return push(std::move(out), {a}, [e, inside](Tape& t, Var o, const std::vector<Var>& in) {
            if (inside) t.nodes_[in[0]].grad(0, 0) += t.nodes_[o].grad(0, 0) * e;
        });
    }

    Var reciprocal(Var a) {
        if (val(a).size() != 1) throw ShapeError("reciprocal: expects 1x1");
        Matrix<T> out(1, 1);
        out(0, 0) = T(1) / val(a)(0, 0);
        return push(std::move(out), {a}, [](Tape& t, Var o, const std::vector<Var>& in) {
            T y = t.nodes_[o].value(0, 0);
            t.nodes_[in[0]].grad(0, 0) -= t.nodes_[o].grad(0, 0) * y * y;
        });
    }

    // Inverted dropout; identity when p == 0. Consumes one rng draw per entry
    // so rng sequencing stays deterministic.
    Var dropout(Var a, T p, Rng& rng) {
        if (p <= T(0)) return a;
        Matrix<T> mask(val(a).rows(), val(a).cols());
        T keep = T(1) - p;
        for (size_t i = 0; i < mask.size(); ++i)
            mask.data()[i] = rng.next_double() < static_cast<double>(p) ? T(0) : T(1) / keep;
        Var m = constant(std::move(mask));
        return mul(a, m);
    }

    void backward(Var root) {
        if (val(root).size() != 1) throw ShapeError("backward: root must be 1x1");
        for (auto& n : nodes_)
            if (n.grad.empty() || !n.grad.same_shape(n.value)) n.grad = Matrix<T>::zeros_like(n.value);
        nodes_[root].grad(0, 0) = T(1);
        for (int i = root; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, i, nodes_[i].inputs);
    }

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        std::vector<Var> inputs;
        std::function<void(Tape&, Var, const std::vector<Var>&)> back;
    };

    Var push(Matrix<T> value, std::vector<Var> inputs,
             std::function<void(Tape&, Var, const std::vector<Var>&)> back) {
        nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(back)});
        return static_cast<Var>(nodes_.size() - 1);
    }

    void require_same_shape(Var a, Var b, const char* what) const {
        if (!val(a).same_shape(val(b)))
            throw ShapeError(std::string(what) + ": " + val(a).shape_str() + " vs " +
                             val(b).shape_str());
    }

    std::vector<Node> nodes_;
};

}  // namespace cglp
