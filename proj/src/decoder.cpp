#include "wk/decoder.hpp"

#include <cmath>

#include <json.hpp>

namespace wk {

using ag::Var;

namespace {
constexpr double kInitStd = 0.08;

const char* space_name(Space s) { return s == Space::unified ? "unified" : "render"; }

// Symmetric Jacobi eigendecomposition; A is overwritten with rotations
// applied, eigenvectors returned in V columns.
void jacobi_eig(Mat A, Vec& eigvals, Mat& V) {
    const int n = A.rows;
    V = Mat(n, n);
    for (int i = 0; i < n; ++i) V.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += A.at(i, j) * A.at(i, j);
        if (off < 1e-26) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = A.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (A.at(q, q) - A.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A.at(k, p), akq = A.at(k, q);
                    A.at(k, p) = c * akp - s * akq;
                    A.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A.at(p, k), aqk = A.at(q, k);
                    A.at(p, k) = c * apk - s * aqk;
                    A.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V.at(k, p), vkq = V.at(k, q);
                    V.at(k, p) = c * vkp - s * vkq;
                    V.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(n);
    for (int i = 0; i < n; ++i) eigvals[i] = A.at(i, i);
}

}  // namespace

SignalHead SignalHead::init(Modality m, Space space, const ModelConfig& cfg, Rng& rng) {
    SignalHead h;
    h.modality = m;
    h.space = space;
    const std::string p =
        std::string("head.") + modality_name(m) + "." + space_name(space);
    const std::string comp =
        space == Space::unified ? "heads_unified" : "heads_render";
    h.ln_g.init(p + ".ln.g", comp, Mat(1, cfg.d_model, 1.0));
    h.ln_b.init(p + ".ln.b", comp, Mat(1, cfg.d_model));
    h.wq.init(p + ".wq", comp, Mat::randn(cfg.d_model, cfg.d_model, kInitStd, rng));
    h.wk_.init(p + ".wk", comp, Mat::randn(cfg.d_model, cfg.d_model, kInitStd, rng));
    h.wv.init(p + ".wv", comp, Mat::randn(cfg.d_model, cfg.d_model, kInitStd, rng));
    h.wo.init(p + ".wo", comp, Mat::randn(cfg.d_model, cfg.d_model, kInitStd, rng));
    h.out_w.init(p + ".out.w", comp, Mat::randn(cfg.d_model, cfg.d_enc, kInitStd, rng));
    h.out_b.init(p + ".out.b", comp, Mat(1, cfg.d_enc));
    return h;
}

void SignalHead::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    fn(ln_g); fn(ln_b);
    fn(wq); fn(wk_); fn(wv); fn(wo);
    fn(out_w); fn(out_b);
}

Var head_forward(SignalHead& head, VarCache& c, const Var& signal_hidden) {
    if (signal_hidden->val.cols != head.wq.value.rows)
        fail(Err::DimensionMismatch, "head_forward: hidden width != d_model");
    Var hl = ag::layernorm_rows(signal_hidden, c.of(head.ln_g), c.of(head.ln_b));
    Var q = ag::matmul(hl, c.of(head.wq));
    Var k = ag::matmul(hl, c.of(head.wk_));
    Var v = ag::matmul(hl, c.of(head.wv));
    const double scale = 1.0 / std::sqrt(static_cast<double>(head.wq.value.cols));
    Var p = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), scale), false);
    Var o = ag::matmul(ag::matmul(p, v), c.of(head.wo));
    Var mixed = ag::add(signal_hidden, o);
    Var pooled = ag::mean_rows(mixed);
    return ag::add_rowvec(ag::matmul(pooled, c.of(head.out_w)), c.of(head.out_b));
}

Vec AgentProjector::apply(const Vec& x) const {
    Vec y(b);
    for (size_t j = 0; j < y.size(); ++j) {
        double s = b[j];
        for (size_t i = 0; i < x.size(); ++i) s += x[i] * W.at(static_cast<int>(i), static_cast<int>(j));
        y[j] = s;
    }
    return y;
}

AgentProjector fit_agent_projector(const std::vector<std::pair<Vec, Vec>>& pairs) {
    if (pairs.empty()) fail(Err::InvalidConfig, "fit_agent_projector: no pairs");
    const int d_in = static_cast<int>(pairs.front().first.size());
    const int d_out = static_cast<int>(pairs.front().second.size());
    const int n = static_cast<int>(pairs.size());
    const int da = d_in + 1;  // augmented with the bias column

    Mat X(n, da), Y(n, d_out);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(pairs[i].first.size()) != d_in ||
            static_cast<int>(pairs[i].second.size()) != d_out)
            fail(Err::DimensionMismatch, "fit_agent_projector: inconsistent pair dims");
        for (int j = 0; j < d_in; ++j) X.at(i, j) = pairs[i].first[j];
        X.at(i, d_in) = 1.0;
        for (int j = 0; j < d_out; ++j) Y.at(i, j) = pairs[i].second[j];
    }
    Mat XtX = matmul_tn(X, X);
    Mat XtY = matmul_tn(X, Y);

    Vec eig;
    Mat V;
    jacobi_eig(XtX, eig, V);
    double max_eig = 0.0;
    for (double e : eig) max_eig = std::max(max_eig, std::fabs(e));
    const double tol = std::max(max_eig, 1.0) * 1e-12;

    AgentProjector out;
    for (double e : eig)
        if (std::fabs(e) < tol) out.rank_deficient = true;

    // Theta = V diag(1/eig) V^T XtY, dropping null directions.
    Mat VtXtY = matmul_tn(V, XtY);
    for (int i = 0; i < da; ++i) {
        const double e = eig[i];
        const double inv = (std::fabs(e) < tol) ? 0.0 : 1.0 / e;
        for (int j = 0; j < d_out; ++j) VtXtY.at(i, j) *= inv;
    }
    Mat theta = matmul(V, VtXtY);  // da x d_out

    out.W = Mat(d_in, d_out);
    for (int i = 0; i < d_in; ++i)
        for (int j = 0; j < d_out; ++j) out.W.at(i, j) = theta.at(i, j);
    out.b.resize(d_out);
    for (int j = 0; j < d_out; ++j) out.b[j] = theta.at(d_in, j);

    KahanSum err;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d_out; ++j) {
            double p = theta.at(d_in, j);
            for (int k2 = 0; k2 < d_in; ++k2) p += X.at(i, k2) * out.W.at(k2, j);
            const double d = p - Y.at(i, j);
            err.add(d * d);
        }
    }
    out.residual = err.sum / (static_cast<double>(n) * d_out);
    return out;
}

std::string projector_to_json(const AgentProjector& p) {
    nlohmann::json j;
    j["d_in"] = p.W.rows;
    j["d_out"] = p.W.cols;
    j["W"] = p.W.a;
    j["b"] = p.b;
    j["residual"] = p.residual;
    j["rank_deficient"] = p.rank_deficient;
    return j.dump();
}

AgentProjector projector_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AgentProjector p;
    p.W = Mat(j.at("d_in").get<int>(), j.at("d_out").get<int>());
    p.W.a = j.at("W").get<Vec>();
    p.b = j.at("b").get<Vec>();
    p.residual = j.at("residual").get<double>();
    p.rank_deficient = j.at("rank_deficient").get<bool>();
    return p;
}

}  // namespace wk
