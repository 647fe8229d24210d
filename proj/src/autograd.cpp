#include "wk/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace wk::ag {

namespace {

Var make(Mat v, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>(std::move(v));
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return n;
}

void ensure_grad(Var& v) {
    if (v->grad.rows == 0) v->grad = Mat(v->val.rows, v->val.cols);
}

void accum(const Var& p, const Mat& g) {
    if (!p->requires_grad) return;
    Var q = p;
    ensure_grad(q);
    add_inplace(q->grad, g);
}

}  // namespace

Var leaf(Mat v, bool requires_grad) {
    auto n = std::make_shared<Node>(std::move(v));
    n->requires_grad = requires_grad;
    return n;
}

Var constant(Mat v) { return leaf(std::move(v), false); }

Var constant_row(const Vec& v) { return constant(Mat::from_vec(v)); }

Var matmul(const Var& a, const Var& b) {
    Mat out = wk::matmul(a->val, b->val);
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) accum(a, wk::matmul_nt(n.grad, b->val));
        if (b->requires_grad) accum(b, wk::matmul_tn(a->val, n.grad));
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    Mat out = wk::matmul_nt(a->val, b->val);
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) accum(a, wk::matmul(n.grad, b->val));
        if (b->requires_grad) accum(b, wk::matmul_tn(n.grad, a->val));
    });
}

Var add(const Var& a, const Var& b) {
    Mat out = a->val;
    add_inplace(out, b->val);
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        accum(a, n.grad);
        accum(b, n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    Mat out = a->val;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] -= b->val.a[i];
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        accum(a, n.grad);
        if (b->requires_grad) {
            Mat g = n.grad;
            for (auto& x : g.a) x = -x;
            accum(b, g);
        }
    });
}

Var add_rowvec(const Var& a, const Var& row) {
    Mat out = a->val;
    for (int i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        const double* v = row->val.row(0);
        for (int j = 0; j < out.cols; ++j) r[j] += v[j];
    }
    return make(std::move(out), {a, row}, [a, row](Node& n) {
        accum(a, n.grad);
        if (row->requires_grad) {
            Mat g(1, n.grad.cols);
            for (int i = 0; i < n.grad.rows; ++i) {
                const double* r = n.grad.row(i);
                for (int j = 0; j < n.grad.cols; ++j) g.a[j] += r[j];
            }
            accum(row, g);
        }
    });
}

Var scale(const Var& a, double s) {
    Mat out = a->val;
    for (auto& x : out.a) x *= s;
    return make(std::move(out), {a}, [a, s](Node& n) {
        Mat g = n.grad;
        for (auto& x : g.a) x *= s;
        accum(a, g);
    });
}

Var hadamard(const Var& a, const Var& b) {
    Mat out = a->val;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] *= b->val.a[i];
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            Mat g = n.grad;
            for (size_t i = 0; i < g.a.size(); ++i) g.a[i] *= b->val.a[i];
            accum(a, g);
        }
        if (b->requires_grad) {
            Mat g = n.grad;
            for (size_t i = 0; i < g.a.size(); ++i) g.a[i] *= a->val.a[i];
            accum(b, g);
        }
    });
}

Var tanh_(const Var& a) {
    Mat out = a->val;
    for (auto& x : out.a) x = std::tanh(x);
    return make(std::move(out), {a}, [a](Node& node) {
        Mat g = node.grad;
        for (size_t i = 0; i < g.a.size(); ++i) {
            const double t = node.val.a[i];
            g.a[i] *= (1.0 - t * t);
        }
        accum(a, g);
    });
}

Var gelu(const Var& a) {
    Mat out = a->val;
    for (auto& x : out.a) x = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    return make(std::move(out), {a}, [a](Node& n) {
        Mat g = n.grad;
        constexpr double inv_sqrt2pi = 0.3989422804014327;
        for (size_t i = 0; i < g.a.size(); ++i) {
            const double x = a->val.a[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            g.a[i] *= cdf + x * pdf;
        }
        accum(a, g);
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    int rows = 0;
    const int cols = parts.front()->val.cols;
    for (const auto& p : parts) rows += p->val.rows;
    Mat out(rows, cols);
    int r = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p->val.rows; ++i)
            for (int j = 0; j < cols; ++j) out.at(r + i, j) = p->val.at(i, j);
        r += p->val.rows;
    }
    return make(std::move(out), parts, [parts](Node& n) {
        int r = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                Mat g(p->val.rows, p->val.cols);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) g.at(i, j) = n.grad.at(r + i, j);
                accum(p, g);
            }
            r += p->val.rows;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    const int rows = parts.front()->val.rows;
    int cols = 0;
    for (const auto& p : parts) cols += p->val.cols;
    Mat out(rows, cols);
    int c = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p->val.cols; ++j) out.at(i, c + j) = p->val.at(i, j);
        c += p->val.cols;
    }
    return make(std::move(out), parts, [parts](Node& n) {
        int c = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                Mat g(p->val.rows, p->val.cols);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) g.at(i, j) = n.grad.at(i, c + j);
                accum(p, g);
            }
            c += p->val.cols;
        }
    });
}

Var slice_rows(const Var& a, int r0, int r1) {
    Mat out(r1 - r0, a->val.cols);
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i - r0, j) = a->val.at(i, j);
    return make(std::move(out), {a}, [a, r0](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < n.grad.rows; ++i)
            for (int j = 0; j < n.grad.cols; ++j) g.at(r0 + i, j) = n.grad.at(i, j);
        accum(a, g);
    });
}

Var slice_cols(const Var& a, int c0, int c1) {
    Mat out(a->val.rows, c1 - c0);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a->val.at(i, c0 + j);
    return make(std::move(out), {a}, [a, c0](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < n.grad.rows; ++i)
            for (int j = 0; j < n.grad.cols; ++j) g.at(i, c0 + j) = n.grad.at(i, j);
        accum(a, g);
    });
}

Var mean_rows(const Var& a) {
    Mat out(1, a->val.cols);
    for (int i = 0; i < a->val.rows; ++i)
        for (int j = 0; j < a->val.cols; ++j) out.a[j] += a->val.at(i, j);
    const double inv = 1.0 / a->val.rows;
    for (auto& x : out.a) x *= inv;
    return make(std::move(out), {a}, [a, inv](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) g.at(i, j) = n.grad.a[j] * inv;
        accum(a, g);
    });
}

Var softmax_rows(const Var& a, bool causal, int shift) {
    Mat out = a->val;
    for (int i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        const int lim = causal ? std::min(out.cols, i + shift + 1) : out.cols;
        double mx = -1e300;
        for (int j = 0; j < lim; ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (int j = 0; j < lim; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (int j = 0; j < lim; ++j) r[j] /= sum;
        for (int j = lim; j < out.cols; ++j) r[j] = 0.0;
    }
    return make(std::move(out), {a}, [a](Node& node) {
        Mat g(node.val.rows, node.val.cols);
        for (int i = 0; i < g.rows; ++i) {
            const double* p = node.val.row(i);
            const double* dp = node.grad.row(i);
            double acc = 0.0;
            for (int j = 0; j < g.cols; ++j) acc += p[j] * dp[j];
            double* gr = g.row(i);
            for (int j = 0; j < g.cols; ++j) gr[j] = p[j] * (dp[j] - acc);
        }
        accum(a, g);
    });
}

Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
    const int R = a->val.rows, C = a->val.cols;
    Mat out(R, C);
    Mat xhat(R, C);
    std::vector<double> inv_std(R);
    for (int i = 0; i < R; ++i) {
        const double* x = a->val.row(i);
        double mu = 0.0;
        for (int j = 0; j < C; ++j) mu += x[j];
        mu /= C;
        double var = 0.0;
        for (int j = 0; j < C; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= C;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < C; ++j) {
            xhat.at(i, j) = (x[j] - mu) * is;
            out.at(i, j) = xhat.at(i, j) * gamma->val.a[j] + beta->val.a[j];
        }
    }
    return make(std::move(out), {a, gamma, beta},
                [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                    const int R = n.grad.rows, C = n.grad.cols;
                    if (gamma->requires_grad) {
                        Mat gg(1, C);
                        for (int i = 0; i < R; ++i)
                            for (int j = 0; j < C; ++j) gg.a[j] += n.grad.at(i, j) * xhat.at(i, j);
                        accum(gamma, gg);
                    }
                    if (beta->requires_grad) {
                        Mat gb(1, C);
                        for (int i = 0; i < R; ++i)
                            for (int j = 0; j < C; ++j) gb.a[j] += n.grad.at(i, j);
                        accum(beta, gb);
                    }
                    if (a->requires_grad) {
                        Mat ga(R, C);
                        for (int i = 0; i < R; ++i) {
                            double sum_dy = 0.0, sum_dy_xhat = 0.0;
                            for (int j = 0; j < C; ++j) {
                                const double dy = n.grad.at(i, j) * gamma->val.a[j];
                                sum_dy += dy;
                                sum_dy_xhat += dy * xhat.at(i, j);
                            }
                            for (int j = 0; j < C; ++j) {
                                const double dy = n.grad.at(i, j) * gamma->val.a[j];
                                ga.at(i, j) = inv_std[i] / C *
                                              (C * dy - sum_dy - xhat.at(i, j) * sum_dy_xhat);
                            }
                        }
                        accum(a, ga);
                    }
                });
}

Var loss_one_minus_cosine(const Var& pred, const Vec& target) {
    const Vec& p = pred->val.a;
    const double np = std::sqrt(dot(p, p));
    const double nt = norm2(target);
    if (np < 1e-12 || nt < 1e-12)
        fail(Err::ZeroVector, "loss_one_minus_cosine: degenerate vector");
    const double d = dot(p, target);
    Mat out(1, 1);
    out.a[0] = 1.0 - d / (np * nt);
    return make(std::move(out), {pred}, [pred, target, np, nt, d](Node& n) {
        const double g0 = n.grad.a[0];
        Mat g(1, static_cast<int>(target.size()));
        const double inv = 1.0 / (np * nt);
        const double coef = d / (np * np * np * nt);
        for (size_t i = 0; i < target.size(); ++i)
            g.a[i] = g0 * (-(target[i] * inv) + pred->val.a[i] * coef);
        accum(pred, g);
    });
}

Var loss_mse(const Var& pred, const Vec& target) {
    const Vec& p = pred->val.a;
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += (p[i] - target[i]) * (p[i] - target[i]);
    Mat out(1, 1);
    out.a[0] = s / static_cast<double>(p.size());
    return make(std::move(out), {pred}, [pred, target](Node& n) {
        const double g0 = n.grad.a[0];
        const double inv = 2.0 / static_cast<double>(target.size());
        Mat g(1, static_cast<int>(target.size()));
        for (size_t i = 0; i < target.size(); ++i)
            g.a[i] = g0 * inv * (pred->val.a[i] - target[i]);
        accum(pred, g);
    });
}

Var add_scalars(const std::vector<Var>& xs) {
    Mat out(1, 1);
    for (const auto& x : xs) out.a[0] += x->val.a[0];
    return make(std::move(out), xs, [xs](Node& n) {
        Mat g(1, 1);
        g.a[0] = n.grad.a[0];
        for (const auto& x : xs) accum(x, g);
    });
}

Var mean_scalars(const std::vector<Var>& xs) {
    return scale(add_scalars(xs), 1.0 / static_cast<double>(xs.size()));
}

void backward(const Var& root) {
    // Iterative post-order topo sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Var, size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root.get());
    std::vector<Var> keep;  // hold shared ownership during traversal
    keep.push_back(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Var child = node->parents[idx++];
            if (child->requires_grad && !seen.count(child.get())) {
                seen.insert(child.get());
                keep.push_back(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    root->grad = Mat(root->val.rows, root->val.cols);
    root->grad.a.assign(root->grad.a.size(), 0.0);
    root->grad.a[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back && n->grad.rows != 0) n->back(*n);
    }
}

}  // namespace wk::ag
