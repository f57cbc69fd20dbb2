// Value-and-gradient implementations of the SoftTriple loss family:
// normalized SoftMax, its smoothed-triplet dual, triplet hinge, HardTriple,
// SoftTriple, ProxyNCA (+ hinge), the pairwise center regularizer, and the
// batch objective.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "softtriple/linalg.hpp"

namespace softtriple {

// C classes x K centers x d dims of unit-norm vectors, stored flat so the
// optimizer can treat the bank as one parameter tensor.
struct CenterBank {
    std::size_t num_classes = 0;
    std::size_t centers_per_class = 0;
    std::size_t dim = 0;
    std::vector<double> data;  // [(c*K + k)*d + i]

    CenterBank() = default;
    CenterBank(std::size_t C, std::size_t K, std::size_t d)
        : num_classes(C), centers_per_class(K), dim(d), data(C * K * d, 0.0) {}

    std::span<double> center(std::size_t c, std::size_t k) {
        return {data.data() + (c * centers_per_class + k) * dim, dim};
    }
    std::span<const double> center(std::size_t c, std::size_t k) const {
        return {data.data() + (c * centers_per_class + k) * dim, dim};
    }
};

struct HyperParams {
    double lambda = 20.0;  // logit scale
    double gamma = 0.1;    // within-class temperature
    double delta = 0.01;   // margin on the positive class
    double tau = 0.2;      // regularizer weight
    std::size_t centers_per_class = 10;
};

struct LossEval {
    double value = 0.0;
    Vector grad_x;             // d
    std::vector<double> grad_W;  // same flat layout as CenterBank::data
};

struct ClassSimilarity {
    double value = 0.0;
};

inline double clamp_pos(double v) { return v > 0.0 ? v : 0.0; }

inline double triplet_hinge(const UnitEmbedding& xi, const UnitEmbedding& xj,
                            const UnitEmbedding& xk, double delta) {
    return clamp_pos(delta + dot(xi.values, xk.values) - dot(xi.values, xj.values));
}

namespace detail {

inline void require_single_center(const CenterBank& bank, const char* who) {
    if (bank.centers_per_class != 1)
        throw std::invalid_argument(std::string(who) + ": requires K = 1");
}

inline void require_class(const CenterBank& bank, std::size_t label, const char* who) {
    if (label >= bank.num_classes)
        throw std::invalid_argument(std::string(who) + ": class id out of range");
}

inline Vector class_logits_k1(const UnitEmbedding& x, const CenterBank& bank) {
    Vector s(bank.num_classes);
    for (std::size_t c = 0; c < bank.num_classes; ++c) {
        auto w = bank.center(c, 0);
        double acc = 0.0;
        for (std::size_t i = 0; i < bank.dim; ++i) acc += w[i] * x.values[i];
        s[c] = acc;
    }
    return s;
}

}  // namespace detail

// -log( exp(λ w_y·x) / Σ_j exp(λ w_j·x) ), exact analytic gradients.
inline LossEval softmax_norm_loss(const UnitEmbedding& x, std::size_t label,
                                  const CenterBank& bank, double lambda) {
    detail::require_single_center(bank, "softmax_norm_loss");
    detail::require_class(bank, label, "softmax_norm_loss");
    Vector s = detail::class_logits_k1(x, bank);
    LossEval out;
    out.value = log_sum_exp(scaled(s, lambda)) - lambda * s[label];
    Simplex p = softmax(s, lambda);
    out.grad_x.assign(bank.dim, 0.0);
    out.grad_W.assign(bank.data.size(), 0.0);
    for (std::size_t c = 0; c < bank.num_classes; ++c) {
        double coef = lambda * (p.weights[c] - (c == label ? 1.0 : 0.0));
        auto w = bank.center(c, 0);
        for (std::size_t i = 0; i < bank.dim; ++i) {
            out.grad_x[i] += coef * w[i];
            out.grad_W[c * bank.dim + i] = coef * x.values[i];
        }
    }
    return out;
}

// max_p λ Σ_j p_j x·(w_j - w_y) + H(p), evaluated at the closed-form p.
// Exists as the independent equivalence oracle for the smoothed-triplet view
// of the normalized SoftMax loss.
inline double smoothed_triplet_dual(const UnitEmbedding& x, std::size_t label,
                                    const CenterBank& bank, double lambda) {
    detail::require_single_center(bank, "smoothed_triplet_dual");
    detail::require_class(bank, label, "smoothed_triplet_dual");
    Vector s = detail::class_logits_k1(x, bank);
    Vector margins(bank.num_classes);
    for (std::size_t c = 0; c < bank.num_classes; ++c)
        margins[c] = s[c] - s[label];
    Simplex p = softmax(margins, lambda);
    double obj = 0.0;
    for (std::size_t c = 0; c < bank.num_classes; ++c)
        obj += lambda * p.weights[c] * margins[c];
    return obj + entropy(p);
}

// max_j x·w_j - x·w_y; zero exactly when w_y is the nearest center.
inline double max_violation_loss(const UnitEmbedding& x, std::size_t label,
                                 const CenterBank& bank) {
    detail::require_single_center(bank, "max_violation_loss");
    detail::require_class(bank, label, "max_violation_loss");
    Vector s = detail::class_logits_k1(x, bank);
    double best = s[0];
    for (double v : s) best = std::max(best, v);
    return best - s[label];
}

// S_{i,c} = max_k x·w_c^k
inline ClassSimilarity class_similarity_hard(const UnitEmbedding& x,
                                             const CenterBank& bank, std::size_t c) {
    double best = -2.0;
    for (std::size_t k = 0; k < bank.centers_per_class; ++k) {
        auto w = bank.center(c, k);
        double acc = 0.0;
        for (std::size_t i = 0; i < bank.dim; ++i) acc += w[i] * x.values[i];
        best = std::max(best, acc);
    }
    return ClassSimilarity{best};
}

// S'_{i,c} = Σ_k q_k x·w_c^k with q_k ∝ exp(x·w_c^k / γ).
inline ClassSimilarity class_similarity_relaxed(const UnitEmbedding& x,
                                                const CenterBank& bank,
                                                std::size_t c, double gamma) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("class_similarity_relaxed: gamma must be > 0");
    Vector s(bank.centers_per_class);
    for (std::size_t k = 0; k < bank.centers_per_class; ++k) {
        auto w = bank.center(c, k);
        double acc = 0.0;
        for (std::size_t i = 0; i < bank.dim; ++i) acc += w[i] * x.values[i];
        s[k] = acc;
    }
    Simplex q = softmax(s, 1.0 / gamma);
    double out = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) out += q.weights[k] * s[k];
    return ClassSimilarity{out};
}

namespace detail {

// Shared outer structure of HardTriple/SoftTriple: given per-class
// similarities S_c and dL/dS_c, assemble the margin cross-entropy
//   L = lse(z) - z_y,  z_y = λ(S_y - δ),  z_j = λ S_j (j != y).
// Fills dL/dS into sim_grad; returns the loss value.
inline double margin_cross_entropy(const Vector& sims, std::size_t label,
                                   double lambda, double delta, Vector& sim_grad) {
    Vector logits(sims.size());
    for (std::size_t c = 0; c < sims.size(); ++c)
        logits[c] = lambda * (sims[c] - (c == label ? delta : 0.0));
    double value = log_sum_exp(logits) - logits[label];
    Simplex p = softmax(logits, 1.0);
    sim_grad.assign(sims.size(), 0.0);
    for (std::size_t c = 0; c < sims.size(); ++c)
        sim_grad[c] = lambda * (p.weights[c] - (c == label ? 1.0 : 0.0));
    return value;
}

}  // namespace detail

// HardTriple: exact within-class max. Subgradient goes to the lowest-index
// maximizing center of each class.
inline LossEval hard_triple_loss(const UnitEmbedding& x, std::size_t label,
                                 const CenterBank& bank, const HyperParams& hp) {
    detail::require_class(bank, label, "hard_triple_loss");
    std::size_t C = bank.num_classes, K = bank.centers_per_class, d = bank.dim;
    Vector sims(C);
    std::vector<std::size_t> argmax(C, 0);
    for (std::size_t c = 0; c < C; ++c) {
        double best = -2.0;
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < K; ++k) {
            auto w = bank.center(c, k);
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += w[i] * x.values[i];
            if (acc > best) {  // strict: ties keep the lowest index
                best = acc;
                best_k = k;
            }
        }
        sims[c] = best;
        argmax[c] = best_k;
    }
    LossEval out;
    Vector sim_grad;
    out.value = detail::margin_cross_entropy(sims, label, hp.lambda, hp.delta, sim_grad);
    out.grad_x.assign(d, 0.0);
    out.grad_W.assign(bank.data.size(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        auto w = bank.center(c, argmax[c]);
        std::size_t off = (c * K + argmax[c]) * d;
        for (std::size_t i = 0; i < d; ++i) {
            out.grad_x[i] += sim_grad[c] * w[i];
            out.grad_W[off + i] = sim_grad[c] * x.values[i];
        }
    }
    return out;
}

// SoftTriple: entropy-smoothed within-class max, fully differentiated
// through the center weights q (no gradient stopping).
inline LossEval soft_triple_loss(const UnitEmbedding& x, std::size_t label,
                                 const CenterBank& bank, const HyperParams& hp) {
    detail::require_class(bank, label, "soft_triple_loss");
    if (!(hp.gamma > 0.0))
        throw std::invalid_argument("soft_triple_loss: gamma must be > 0");
    std::size_t C = bank.num_classes, K = bank.centers_per_class, d = bank.dim;
    Vector sims(C);
    std::vector<Vector> inner(C, Vector(K));   // s_{c,k} = x·w_c^k
    std::vector<Vector> weights(C);            // q per class
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < K; ++k) {
            auto w = bank.center(c, k);
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += w[i] * x.values[i];
            inner[c][k] = acc;
        }
        Simplex q = softmax(inner[c], 1.0 / hp.gamma);
        double sprime = 0.0;
        for (std::size_t k = 0; k < K; ++k) sprime += q.weights[k] * inner[c][k];
        sims[c] = sprime;
        weights[c] = std::move(q.weights);
    }
    LossEval out;
    Vector sim_grad;
    out.value = detail::margin_cross_entropy(sims, label, hp.lambda, hp.delta, sim_grad);
    out.grad_x.assign(d, 0.0);
    out.grad_W.assign(bank.data.size(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        // dS'_c/ds_{c,k} = q_k (1 + (s_{c,k} - S'_c)/γ), then chain to x and w.
        for (std::size_t k = 0; k < K; ++k) {
            double ds = weights[c][k] * (1.0 + (inner[c][k] - sims[c]) / hp.gamma);
            double coef = sim_grad[c] * ds;
            auto w = bank.center(c, k);
            std::size_t off = (c * K + k) * d;
            for (std::size_t i = 0; i < d; ++i) {
                out.grad_x[i] += coef * w[i];
                out.grad_W[off + i] = coef * x.values[i];
            }
        }
    }
    return out;
}

// -log( exp(λ w_y·x) / Σ_{j≠y} exp(λ w_j·x) ); can go negative.
inline double proxy_nca_loss(const UnitEmbedding& x, std::size_t label,
                             const CenterBank& bank, double lambda) {
    detail::require_single_center(bank, "proxy_nca_loss");
    detail::require_class(bank, label, "proxy_nca_loss");
    if (bank.num_classes < 2)
        throw std::invalid_argument("proxy_nca_loss: needs C >= 2");
    Vector s = detail::class_logits_k1(x, bank);
    Vector negatives;
    negatives.reserve(s.size() - 1);
    for (std::size_t c = 0; c < s.size(); ++c)
        if (c != label) negatives.push_back(lambda * s[c]);
    return log_sum_exp(negatives) - lambda * s[label];
}

inline double proxy_nca_hinge(const UnitEmbedding& x, std::size_t label,
                              const CenterBank& bank, double lambda) {
    return clamp_pos(proxy_nca_loss(x, label, bank, lambda));
}

// Gradient-carrying ProxyNCA for the trainer. The hinge variant zeroes the
// gradient wherever the loss clamps.
inline LossEval proxy_nca_loss_eval(const UnitEmbedding& x, std::size_t label,
                                    const CenterBank& bank, double lambda,
                                    bool hinge = false) {
    detail::require_single_center(bank, "proxy_nca_loss_eval");
    detail::require_class(bank, label, "proxy_nca_loss_eval");
    if (bank.num_classes < 2)
        throw std::invalid_argument("proxy_nca_loss_eval: needs C >= 2");
    Vector s = detail::class_logits_k1(x, bank);
    std::size_t d = bank.dim;
    Vector negatives;
    negatives.reserve(s.size() - 1);
    for (std::size_t c = 0; c < s.size(); ++c)
        if (c != label) negatives.push_back(s[c]);
    LossEval out;
    out.value = log_sum_exp(scaled(negatives, lambda)) - lambda * s[label];
    out.grad_x.assign(d, 0.0);
    out.grad_W.assign(bank.data.size(), 0.0);
    if (hinge && out.value <= 0.0) {
        out.value = 0.0;
        return out;
    }
    Simplex p = softmax(negatives, lambda);
    std::size_t ni = 0;
    for (std::size_t c = 0; c < s.size(); ++c) {
        double coef = c == label ? -lambda : lambda * p.weights[ni++];
        auto w = bank.center(c, 0);
        for (std::size_t i = 0; i < d; ++i) {
            out.grad_x[i] += coef * w[i];
            out.grad_W[c * d + i] = coef * x.values[i];
        }
    }
    return out;
}

// Pairwise-distance regularizer over one class's centers:
//   Σ_{t<s} sqrt(2 - 2 w^s·w^t + ε),  ε = 1e-12 keeps the gradient defined
// at coincident centers.
struct RegularizerEval {
    double value = 0.0;
    std::vector<Vector> grad;  // K gradients of dim d
};

inline constexpr double kRegularizerSmoothing = 1e-12;

inline RegularizerEval center_regularizer(const CenterBank& bank, std::size_t c) {
    std::size_t K = bank.centers_per_class, d = bank.dim;
    RegularizerEval out;
    out.grad.assign(K, Vector(d, 0.0));
    for (std::size_t t = 0; t < K; ++t) {
        auto wt = bank.center(c, t);
        for (std::size_t s = t + 1; s < K; ++s) {
            auto ws = bank.center(c, s);
            double ip = 0.0;
            for (std::size_t i = 0; i < d; ++i) ip += ws[i] * wt[i];
            double dist = std::sqrt(std::max(2.0 - 2.0 * ip, 0.0) + kRegularizerSmoothing);
            out.value += dist;
            for (std::size_t i = 0; i < d; ++i) {
                out.grad[s][i] += -wt[i] / dist;
                out.grad[t][i] += -ws[i] / dist;
            }
        }
    }
    return out;
}

struct LabeledEmbedding {
    UnitEmbedding embedding;
    std::size_t label = 0;
};

// Mean SoftTriple loss over the batch plus
// τ Σ_j R(w_j) / (C K (K-1)). Gradients accumulate in fixed index order.
inline LossEval total_objective(const std::vector<LabeledEmbedding>& batch,
                                const CenterBank& bank, const HyperParams& hp) {
    if (batch.empty())
        throw std::invalid_argument("total_objective: empty batch");
    std::size_t C = bank.num_classes, K = bank.centers_per_class, d = bank.dim;
    if (hp.tau > 0.0 && K < 2)
        throw std::invalid_argument(
            "total_objective: tau > 0 requires K >= 2 (regularizer denominator)");
    LossEval out;
    out.grad_x.assign(d, 0.0);  // unused aggregate slot; per-example grads
                                // flow back through the model instead
    out.grad_W.assign(bank.data.size(), 0.0);
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        LossEval e = soft_triple_loss(ex.embedding, ex.label, bank, hp);
        out.value += inv_n * e.value;
        for (std::size_t i = 0; i < e.grad_W.size(); ++i)
            out.grad_W[i] += inv_n * e.grad_W[i];
    }
    if (hp.tau > 0.0) {
        double denom = static_cast<double>(C) * static_cast<double>(K) *
                       static_cast<double>(K - 1);
        double coef = hp.tau / denom;
        for (std::size_t c = 0; c < C; ++c) {
            RegularizerEval reg = center_regularizer(bank, c);
            out.value += coef * reg.value;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < d; ++i)
                    out.grad_W[(c * K + k) * d + i] += coef * reg.grad[k][i];
        }
    }
    return out;
}

// Per-example SoftTriple gradient w.r.t. the embedding, scaled for batch-mean
// accumulation. Used by the trainer to backpropagate into the model.
inline Vector batch_embedding_grad(const UnitEmbedding& x, std::size_t label,
                                   const CenterBank& bank, const HyperParams& hp,
                                   std::size_t batch_size) {
    LossEval e = soft_triple_loss(x, label, bank, hp);
    return scaled(e.grad_x, 1.0 / static_cast<double>(batch_size));
}

}  // namespace softtriple
