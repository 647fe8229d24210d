#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wk/mat.hpp"

namespace wk::ag {

// Reverse-mode autodiff over Mat-valued nodes. Graphs are rebuilt per step;
// backward() walks the reverse topological order. Construction order is
// deterministic, so gradient accumulation order is too.
struct Node {
    Mat val;
    Mat grad;  // allocated lazily by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;  // scatter this->grad into parents

    explicit Node(Mat v) : val(std::move(v)) {}
};

using Var = std::shared_ptr<Node>;

Var leaf(Mat v, bool requires_grad = true);
Var constant(Mat v);
Var constant_row(const Vec& v);

Var matmul(const Var& a, const Var& b);     // a(m,k) * b(k,n)
Var matmul_nt(const Var& a, const Var& b);  // a(m,k) * b(n,k)^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& row);  // broadcast 1 x c over rows
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var tanh_(const Var& a);
Var gelu(const Var& a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int r1);
Var slice_cols(const Var& a, int c0, int c1);
Var mean_rows(const Var& a);  // 1 x c
// Row-wise softmax; if causal, entry (i, j) for j > i + shift is masked out.
Var softmax_rows(const Var& a, bool causal, int shift = 0);
Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);

// Scalar (1x1) losses against a constant target row vector.
Var loss_one_minus_cosine(const Var& pred, const Vec& target);
Var loss_mse(const Var& pred, const Vec& target);

Var add_scalars(const std::vector<Var>& xs);
Var mean_scalars(const std::vector<Var>& xs);

// Runs backward from a scalar root (grad seeded with 1).
void backward(const Var& root);

}  // namespace wk::ag
