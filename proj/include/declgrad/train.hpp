#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "declgrad/nodes.hpp"

namespace declgrad::train {

enum class Problem { sphere, ot, eigen };
enum class EigenSetting { all, largest, largest_negdef, largest_rank2 };
enum class GradMode { exact, approx };

inline const char* to_string(Problem p) {
    switch (p) {
        case Problem::sphere: return "sphere";
        case Problem::ot: return "ot";
        default: return "eigen";
    }
}

inline const char* to_string(EigenSetting s) {
    switch (s) {
        case EigenSetting::all: return "all";
        case EigenSetting::largest: return "largest";
        case EigenSetting::largest_negdef: return "largest_negdef";
        default: return "largest_rank2";
    }
}

inline const char* to_string(GradMode m) { return m == GradMode::exact ? "exact" : "approx"; }

struct ExperimentConfig {
    Problem problem = Problem::sphere;
    EigenSetting eigen_setting = EigenSetting::largest;
    std::size_t d = 5;
    std::size_t m = 10;
    std::size_t n = 10;  // OT plan columns; kept equal to m by default
    std::size_t batch = 10;
    std::size_t iterations = 500;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
    GradMode grad_mode = GradMode::approx;
    double gamma = 1.0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 64;
    double sinkhorn_tol = 1e-9;
    std::size_t sinkhorn_max_iter = 10000;
};

// ---------------------------------------------------------------------------
// Three-layer MLP with ReLU after layers 1 and 2.
// ---------------------------------------------------------------------------

struct Mlp {
    Matrix W1;
    Vector b1;
    Matrix W2;
    Vector b2;
    Matrix W3;
    Vector b3;

    std::size_t param_count() const {
        return W1.size() + b1.dim() + W2.size() + b2.dim() + W3.size() + b3.dim();
    }
};

struct MlpCache {
    Vector z, a1, h1, a2, h2;
};

struct MlpGrads {
    Matrix W1;
    Vector b1;
    Matrix W2;
    Vector b2;
    Matrix W3;
    Vector b3;

    static MlpGrads zeros_like(const Mlp& mlp) {
        return {Matrix(mlp.W1.rows(), mlp.W1.cols()), Vector(mlp.b1.dim()),
                Matrix(mlp.W2.rows(), mlp.W2.cols()), Vector(mlp.b2.dim()),
                Matrix(mlp.W3.rows(), mlp.W3.cols()), Vector(mlp.b3.dim())};
    }

    void accumulate(const MlpGrads& other) {
        W1 = W1 + other.W1;
        b1 = b1 + other.b1;
        W2 = W2 + other.W2;
        b2 = b2 + other.b2;
        W3 = W3 + other.W3;
        b3 = b3 + other.b3;
    }
};

// He-initialized weights, zero biases.
inline Mlp mlp_init(std::size_t d, std::size_t h1, std::size_t h2, std::size_t out, Rng rng) {
    if (d < 1 || h1 < 1 || h2 < 1 || out < 1) throw DimensionError("mlp_init: dims must be >= 1");
    auto he = [&](std::size_t rows, std::size_t cols) {
        Matrix W(rows, cols);
        double sd = std::sqrt(2.0 / static_cast<double>(cols));
        for (std::size_t i = 0; i < W.size(); ++i) W.data()[i] = sd * rng.gaussian();
        return W;
    };
    return {he(h1, d), Vector(h1), he(h2, h1), Vector(h2), he(out, h2), Vector(out)};
}

inline Vector relu(const Vector& a) {
    Vector r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] > 0 ? a[i] : 0.0;
    return r;
}

inline Vector mlp_forward(const Mlp& mlp, const Vector& z, MlpCache* cache = nullptr) {
    if (z.dim() != mlp.W1.cols()) throw DimensionError("mlp_forward: input dimension mismatch");
    Vector a1 = matvec(mlp.W1, z) + mlp.b1;
    Vector h1 = relu(a1);
    Vector a2 = matvec(mlp.W2, h1) + mlp.b2;
    Vector h2 = relu(a2);
    Vector x = matvec(mlp.W3, h2) + mlp.b3;
    if (cache) *cache = {z, a1, h1, a2, h2};
    return x;
}

inline MlpGrads mlp_backward(const Mlp& mlp, const MlpCache& cache, const Vector& dx) {
    if (dx.dim() != mlp.W3.rows()) throw DimensionError("mlp_backward: gradient dimension mismatch");
    MlpGrads g = MlpGrads::zeros_like(mlp);
    g.W3 = outer(dx, cache.h2);
    g.b3 = dx;
    Vector dh2 = matvec_t(mlp.W3, dx);
    Vector da2(dh2.dim());
    for (std::size_t i = 0; i < da2.dim(); ++i) da2[i] = cache.a2[i] > 0 ? dh2[i] : 0.0;
    g.W2 = outer(da2, cache.h1);
    g.b2 = da2;
    Vector dh1 = matvec_t(mlp.W2, da2);
    Vector da1(dh1.dim());
    for (std::size_t i = 0; i < da1.dim(); ++i) da1[i] = cache.a1[i] > 0 ? dh1[i] : 0.0;
    g.W1 = outer(da1, cache.z);
    g.b1 = da1;
    return g;
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay.
// ---------------------------------------------------------------------------

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    static AdamWState for_model(const Mlp& mlp, const ExperimentConfig& cfg) {
        AdamWState s;
        s.m.assign(mlp.param_count(), 0.0);
        s.v.assign(mlp.param_count(), 0.0);
        s.lr = cfg.lr;
        s.beta1 = cfg.beta1;
        s.beta2 = cfg.beta2;
        s.eps = cfg.eps;
        s.weight_decay = cfg.weight_decay;
        return s;
    }
};

namespace detail {

struct Block {
    double* param;
    const double* grad;
    std::size_t size;
};

inline std::vector<Block> blocks(Mlp& mlp, const MlpGrads& g) {
    return {{mlp.W1.data(), g.W1.data(), mlp.W1.size()}, {mlp.b1.data(), g.b1.data(), mlp.b1.dim()},
            {mlp.W2.data(), g.W2.data(), mlp.W2.size()}, {mlp.b2.data(), g.b2.data(), mlp.b2.dim()},
            {mlp.W3.data(), g.W3.data(), mlp.W3.size()}, {mlp.b3.data(), g.b3.data(), mlp.b3.dim()}};
}

}  // namespace detail

inline void adamw_step(AdamWState& state, Mlp& mlp, const MlpGrads& grads) {
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t k = 0;
    for (auto& blk : detail::blocks(mlp, grads)) {
        for (std::size_t i = 0; i < blk.size; ++i, ++k) {
            double g = blk.grad[i];
            state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
            state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
            double mhat = state.m[k] / bc1;
            double vhat = state.v[k] / bc2;
            blk.param[i] -=
                state.lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * blk.param[i]);
        }
    }
}

// ---------------------------------------------------------------------------
// Losses. Both return the batch loss and per-element gradients w.r.t. y.
// ---------------------------------------------------------------------------

struct BatchLoss {
    double loss;
    std::vector<Vector> d_dy;
};

inline BatchLoss loss_mse(const std::vector<Vector>& y, const std::vector<Vector>& target) {
    if (y.size() != target.size() || y.empty()) throw DimensionError("loss_mse: batch mismatch");
    double B = static_cast<double>(y.size());
    BatchLoss out{0.0, {}};
    out.d_dy.reserve(y.size());
    for (std::size_t b = 0; b < y.size(); ++b) {
        Vector diff = y[b] - target[b];
        out.loss += dot(diff, diff) / B;
        out.d_dy.push_back((2.0 / B) * diff);
    }
    return out;
}

// Sign-invariant alignment loss (1/B) sum_b mean_k (1 - |y_k^T y*_k|); each
// element's vector is `chunks` concatenated unit eigenvectors.
inline BatchLoss loss_eigen_align(const std::vector<Vector>& y, const std::vector<Vector>& target,
                                  std::size_t chunks = 1) {
    if (y.size() != target.size() || y.empty()) throw DimensionError("loss_eigen_align: batch mismatch");
    double B = static_cast<double>(y.size());
    double K = static_cast<double>(chunks);
    BatchLoss out{0.0, {}};
    for (std::size_t b = 0; b < y.size(); ++b) {
        if (y[b].dim() != target[b].dim() || y[b].dim() % chunks != 0)
            throw DimensionError("loss_eigen_align: element dimension mismatch");
        std::size_t dim = y[b].dim() / chunks;
        Vector grad(y[b].dim());
        for (std::size_t k = 0; k < chunks; ++k) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) d += y[b][k * dim + i] * target[b][k * dim + i];
            out.loss += (1.0 - std::abs(d)) / (B * K);
            double sgn = d >= 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < dim; ++i)
                grad[k * dim + i] = -sgn * target[b][k * dim + i] / (B * K);
        }
        out.d_dy.push_back(std::move(grad));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment pipeline: MLP -> declarative node -> loss.
// ---------------------------------------------------------------------------

struct CurveRecord {
    std::size_t run;
    std::size_t iteration;
    double loss;
    double cos_sim_mean;
    double cos_sim_min;
    double descent_fraction;
};

class Pipeline {
public:
    explicit Pipeline(const ExperimentConfig& cfg) : cfg_(cfg) {
        if (cfg.problem == Problem::ot && cfg.n != cfg.m)
            ot_marginals_ok();  // unequal m, n allowed; marginals stay uniform
    }

    // Flattened MLP output size for the configured problem.
    std::size_t raw_dim() const {
        switch (cfg_.problem) {
            case Problem::sphere: return cfg_.m;
            case Problem::ot: return cfg_.m * cfg_.n;
            default:
                switch (cfg_.eigen_setting) {
                    case EigenSetting::largest_negdef: return cfg_.m * cfg_.m;
                    case EigenSetting::largest_rank2: return 2 * cfg_.m;
                    default: return cfg_.m * (cfg_.m + 1) / 2;
                }
        }
    }

    struct Batch {
        std::vector<Vector> z;
        std::vector<Vector> target;
    };

    Batch make_batch(Rng rng) const {
        Batch batch;
        for (std::size_t b = 0; b < cfg_.batch; ++b) {
            Rng sub = rng.substream(b);
            batch.z.push_back(sample_gaussian(sub, cfg_.d));
            batch.target.push_back(make_target(sub));
        }
        return batch;
    }

    struct StepEval {
        double loss;
        MlpGrads grads;
        double cos_sim_mean;
        double cos_sim_min;
        double descent_fraction;
        std::size_t defined_count;
    };

    StepEval evaluate(const Mlp& mlp, const Batch& batch, GradMode mode,
                      bool want_similarity) const {
        const std::size_t B = batch.z.size();
        std::vector<MlpCache> caches(B);
        std::vector<Vector> raws, ys;
        std::vector<ForwardState> states;
        for (std::size_t b = 0; b < B; ++b) {
            raws.push_back(mlp_forward(mlp, batch.z[b], &caches[b]));
            states.push_back(node_forward(raws.back()));
            ys.push_back(states.back().y);
        }

        BatchLoss bl = compute_loss(ys, batch.target);

        StepEval out{bl.loss, MlpGrads::zeros_like(mlp), 0.0,
                     std::numeric_limits<double>::infinity(), 0.0, 0};
        for (std::size_t b = 0; b < B; ++b) {
            Vector gx_exact = node_backward(states[b], bl.d_dy[b], GradMode::exact);
            Vector gx_approx = node_backward(states[b], bl.d_dy[b], GradMode::approx);
            if (want_similarity) {
                auto rep = nodes::make_report(gx_exact, gx_approx);
                if (rep.defined) {
                    ++out.defined_count;
                    out.cos_sim_mean += rep.cos_sim;
                    out.cos_sim_min = std::min(out.cos_sim_min, rep.cos_sim);
                    if (rep.descent) out.descent_fraction += 1.0;
                }
            }
            const Vector& gx = mode == GradMode::exact ? gx_exact : gx_approx;
            Vector draw = chain_to_raw(states[b], gx);
            out.grads.accumulate(mlp_backward(mlp, caches[b], draw));
        }
        if (want_similarity && out.defined_count > 0) {
            out.cos_sim_mean /= static_cast<double>(out.defined_count);
            out.descent_fraction /= static_cast<double>(B);
        } else {
            out.cos_sim_mean = 0.0;
            out.cos_sim_min = 0.0;
        }
        return out;
    }

    double loss_only(const Mlp& mlp, const Batch& batch) const {
        std::vector<Vector> ys;
        for (const auto& z : batch.z) ys.push_back(node_forward(mlp_forward(mlp, z)).y);
        return compute_loss(ys, batch.target).loss;
    }

    const ExperimentConfig& config() const { return cfg_; }

private:
    struct ForwardState {
        Vector raw;                              // MLP output
        Vector y;                                // node output, flattened
        std::optional<nodes::TransportPlan> plan;
        std::optional<SymEigResult> eig;
        Matrix X;  // eigen node input
    };

    static void ot_marginals_ok() {}

    Vector uniform_marginal(std::size_t k) const {
        return Vector(k, 1.0 / static_cast<double>(k));
    }

    // Build the symmetric node input from the raw MLP output.
    Matrix parametrize_eigen(const Vector& raw) const {
        const std::size_t m = cfg_.m;
        switch (cfg_.eigen_setting) {
            case EigenSetting::largest_negdef: {
                Matrix L = reshape(raw, m, m);
                Matrix X = matmul(L, transpose(L)) + 0.1 * Matrix::identity(m);
                return -1.0 * X;
            }
            case EigenSetting::largest_rank2: {
                Vector w1(m), w2(m);
                for (std::size_t i = 0; i < m; ++i) {
                    w1[i] = raw[i];
                    w2[i] = raw[m + i];
                }
                return outer(w1, w1) + outer(w2, w2);
            }
            default: {
                Matrix X(m, m);
                std::size_t idx = 0;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = i; j < m; ++j) X(i, j) = X(j, i) = raw[idx++];
                return X;
            }
        }
    }

    // Pull a gradient on the symmetric node input back to the raw output.
    Vector eigen_chain_to_raw(const ForwardState& st, const Matrix& G) const {
        const std::size_t m = cfg_.m;
        switch (cfg_.eigen_setting) {
            case EigenSetting::largest_negdef: {
                Matrix L = reshape(st.raw, m, m);
                return flatten(-2.0 * matmul(G, L));
            }
            case EigenSetting::largest_rank2: {
                Vector w1(m), w2(m);
                for (std::size_t i = 0; i < m; ++i) {
                    w1[i] = st.raw[i];
                    w2[i] = st.raw[m + i];
                }
                Vector g1 = 2.0 * matvec(G, w1);
                Vector g2 = 2.0 * matvec(G, w2);
                Vector out(2 * m);
                for (std::size_t i = 0; i < m; ++i) {
                    out[i] = g1[i];
                    out[m + i] = g2[i];
                }
                return out;
            }
            default: {
                Vector out(raw_dim());
                std::size_t idx = 0;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = i; j < m; ++j) out[idx++] = (i == j) ? G(i, i) : 2.0 * G(i, j);
                return out;
            }
        }
    }

    std::vector<std::size_t> requested_eigen_indices() const {
        const std::size_t m = cfg_.m;
        if (cfg_.eigen_setting == EigenSetting::all) {
            std::vector<std::size_t> idx(m);
            for (std::size_t k = 0; k < m; ++k) idx[k] = k;
            return idx;
        }
        return {m - 1};
    }

    void check_simple(const SymEigResult& e, const std::vector<std::size_t>& indices) const {
        double scale = std::max(norm_inf(e.eigenvalues), 1e-300);
        for (std::size_t k : indices) {
            double gap = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < e.eigenvalues.dim(); ++j)
                if (j != k) gap = std::min(gap, std::abs(e.eigenvalues[j] - e.eigenvalues[k]));
            if (gap <= 1e-8 * scale)
                throw DegeneracyError("eigenvalue " + std::to_string(k) +
                                      " degenerate at training time");
        }
    }

    Vector eigvec_column(const SymEigResult& e, std::size_t k) const {
        Vector q(e.eigenvalues.dim());
        for (std::size_t i = 0; i < q.dim(); ++i) q[i] = e.eigenvectors(i, k);
        return nodes::fix_eigvec_sign(std::move(q));
    }

    ForwardState node_forward(const Vector& raw) const {
        ForwardState st;
        st.raw = raw;
        switch (cfg_.problem) {
            case Problem::sphere:
                st.y = nodes::sphere_forward(raw);
                break;
            case Problem::ot: {
                Matrix M = reshape(raw, cfg_.m, cfg_.n);
                st.plan = nodes::sinkhorn_forward(M, uniform_marginal(cfg_.m),
                                                  uniform_marginal(cfg_.n), cfg_.gamma,
                                                  cfg_.sinkhorn_tol, cfg_.sinkhorn_max_iter);
                st.y = flatten(st.plan->P);
                break;
            }
            case Problem::eigen: {
                st.X = parametrize_eigen(raw);
                st.eig = sym_eig(st.X);
                auto indices = requested_eigen_indices();
                check_simple(*st.eig, indices);
                Vector y(indices.size() * cfg_.m);
                for (std::size_t k = 0; k < indices.size(); ++k) {
                    Vector q = eigvec_column(*st.eig, indices[k]);
                    for (std::size_t i = 0; i < cfg_.m; ++i) y[k * cfg_.m + i] = q[i];
                }
                st.y = std::move(y);
                break;
            }
        }
        return st;
    }

    BatchLoss compute_loss(const std::vector<Vector>& ys, const std::vector<Vector>& targets) const {
        if (cfg_.problem == Problem::eigen) {
            std::size_t chunks = cfg_.eigen_setting == EigenSetting::all ? cfg_.m : 1;
            return loss_eigen_align(ys, targets, chunks);
        }
        return loss_mse(ys, targets);
    }

    // Gradient of the loss w.r.t. the node input, flattened.
    Vector node_backward(const ForwardState& st, const Vector& d_dy, GradMode mode) const {
        switch (cfg_.problem) {
            case Problem::sphere:
                return mode == GradMode::exact ? nodes::sphere_backward_exact(st.raw, d_dy)
                                               : nodes::sphere_backward_approx(st.raw, d_dy);
            case Problem::ot: {
                Matrix v = reshape(d_dy, cfg_.m, cfg_.n);
                Matrix g = mode == GradMode::exact ? nodes::ot_backward_exact(*st.plan, v)
                                                   : nodes::ot_backward_approx(*st.plan, v);
                return flatten(g);
            }
            default: {
                auto indices = requested_eigen_indices();
                Matrix G(cfg_.m, cfg_.m);
                for (std::size_t k = 0; k < indices.size(); ++k) {
                    Vector v(cfg_.m);
                    for (std::size_t i = 0; i < cfg_.m; ++i) v[i] = d_dy[k * cfg_.m + i];
                    nodes::EigenPair pair{st.eig->eigenvalues[indices[k]],
                                          eigvec_column(*st.eig, indices[k]), indices[k]};
                    Matrix Gk = mode == GradMode::exact
                                    ? nodes::eigen_backward_exact(*st.eig, pair, v)
                                    : nodes::eigen_backward_approx(*st.eig, pair, v);
                    G = G + Gk;
                }
                return flatten(G);
            }
        }
    }

    Vector chain_to_raw(const ForwardState& st, const Vector& gx) const {
        if (cfg_.problem == Problem::eigen)
            return eigen_chain_to_raw(st, reshape(gx, cfg_.m, cfg_.m));
        return gx;
    }

    Vector make_target(Rng& rng) const {
        switch (cfg_.problem) {
            case Problem::sphere:
                return normalized(sample_gaussian(rng, cfg_.m));
            case Problem::ot: {
                Matrix M(cfg_.m, cfg_.n);
                for (std::size_t i = 0; i < M.size(); ++i) M.data()[i] = rng.gaussian();
                auto plan = nodes::sinkhorn_forward(M, uniform_marginal(cfg_.m),
                                                    uniform_marginal(cfg_.n), cfg_.gamma,
                                                    cfg_.sinkhorn_tol, cfg_.sinkhorn_max_iter);
                return flatten(plan.P);
            }
            default: {
                // eigenvectors of a matrix drawn from the same ensemble as the
                // node inputs; a degenerate draw is resampled once
                auto indices = requested_eigen_indices();
                for (int attempt = 0; attempt < 2; ++attempt) {
                    Vector t = sample_gaussian(rng, raw_dim());
                    SymEigResult e = sym_eig(parametrize_eigen(t));
                    try {
                        check_simple(e, indices);
                    } catch (const DegeneracyError&) {
                        if (attempt == 0) continue;
                        throw;
                    }
                    Vector y(indices.size() * cfg_.m);
                    for (std::size_t k = 0; k < indices.size(); ++k) {
                        Vector q = eigvec_column(e, indices[k]);
                        for (std::size_t i = 0; i < cfg_.m; ++i) y[k * cfg_.m + i] = q[i];
                    }
                    return y;
                }
                throw DegeneracyError("unreachable");
            }
        }
    }

    ExperimentConfig cfg_;
};

struct ExperimentResult {
    std::vector<CurveRecord> records;
    std::vector<Mlp> final_models;
};

inline ExperimentResult run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const CurveRecord&)>& on_record = nullptr) {
    Pipeline pipeline(cfg);
    ExperimentResult result;
    Rng base(cfg.seed);
    for (std::size_t run = 0; run < cfg.repeats; ++run) {
        Rng run_rng = base.substream(run);
        Pipeline::Batch batch = pipeline.make_batch(run_rng.substream(0));
        Mlp mlp = mlp_init(cfg.d, cfg.hidden1, cfg.hidden2, pipeline.raw_dim(), run_rng.substream(1));
        AdamWState opt = AdamWState::for_model(mlp, cfg);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            Pipeline::StepEval eval;
            try {
                eval = pipeline.evaluate(mlp, batch, cfg.grad_mode, true);
            } catch (const std::exception& e) {
                throw std::runtime_error("run " + std::to_string(run) + " iteration " +
                                         std::to_string(it) + ": " + e.what());
            }
            if (!std::isfinite(eval.loss))
                throw std::runtime_error("run " + std::to_string(run) + " iteration " +
                                         std::to_string(it) + ": non-finite loss");
            result.records.push_back({run, it, eval.loss, eval.cos_sim_mean, eval.cos_sim_min,
                                      eval.descent_fraction});
            if (on_record) on_record(result.records.back());
            adamw_step(opt, mlp, eval.grads);
        }
        result.final_models.push_back(std::move(mlp));
    }
    return result;
}

}  // namespace declgrad::train
