// Small trainable embedding map: identity passthrough, affine, or
// affine -> relu -> affine, always followed by output normalization.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "softtriple/linalg.hpp"

namespace softtriple {

enum class ModelKind { identity, affine, mlp };

// Parameters live in one flat vector so the optimizer can treat the model
// as a single tensor. Layouts:
//   affine: W (d x D) row-major, then b (d)
//   mlp:    W1 (H x D), b1 (H), W2 (d x H), b2 (d)
//   identity: empty
struct EmbeddingModel {
    ModelKind kind = ModelKind::identity;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t hidden_dim = 0;  // only for mlp
    std::vector<double> params;

    static EmbeddingModel identity(std::size_t dim) {
        EmbeddingModel m;
        m.kind = ModelKind::identity;
        m.input_dim = m.output_dim = dim;
        return m;
    }

    static EmbeddingModel affine(std::size_t D, std::size_t d, Rng& rng) {
        EmbeddingModel m;
        m.kind = ModelKind::affine;
        m.input_dim = D;
        m.output_dim = d;
        m.params.assign(d * D + d, 0.0);
        init_layer(m.params.data(), d, D, rng);
        return m;
    }

    static EmbeddingModel mlp(std::size_t D, std::size_t d, std::size_t hidden, Rng& rng) {
        if (hidden == 0)
            throw std::invalid_argument("EmbeddingModel::mlp: hidden width must be > 0");
        EmbeddingModel m;
        m.kind = ModelKind::mlp;
        m.input_dim = D;
        m.output_dim = d;
        m.hidden_dim = hidden;
        m.params.assign(hidden * D + hidden + d * hidden + d, 0.0);
        init_layer(m.params.data(), hidden, D, rng);
        init_layer(m.params.data() + hidden * D + hidden, d, hidden, rng);
        return m;
    }

    std::size_t param_count() const { return params.size(); }

private:
    // Glorot uniform for the weight block, zero bias.
    static void init_layer(double* block, std::size_t out, std::size_t in, Rng& rng) {
        double a = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t i = 0; i < out * in; ++i) block[i] = rng.uniform(-a, a);
        for (std::size_t i = 0; i < out; ++i) block[out * in + i] = 0.0;
    }
};

// Intermediate activations kept for the backward pass.
struct ForwardTrace {
    Vector input;
    Vector hidden_pre;   // mlp only, before relu
    Vector pre_norm;     // network output before normalization
    UnitEmbedding embedding;
};

namespace detail {

inline Vector affine_apply(const double* W, const double* b, const Vector& in,
                           std::size_t out_dim) {
    std::size_t in_dim = in.size();
    Vector out(out_dim);
    for (std::size_t i = 0; i < out_dim; ++i) {
        double acc = b[i];
        const double* row = W + i * in_dim;
        for (std::size_t j = 0; j < in_dim; ++j) acc += row[j] * in[j];
        out[i] = acc;
    }
    return out;
}

}  // namespace detail

inline ForwardTrace forward_trace(const EmbeddingModel& m, const Vector& feat) {
    if (feat.size() != m.input_dim)
        throw std::invalid_argument("forward: feature dimension mismatch");
    ForwardTrace t;
    t.input = feat;
    switch (m.kind) {
        case ModelKind::identity:
            t.pre_norm = feat;
            break;
        case ModelKind::affine: {
            const double* W = m.params.data();
            const double* b = W + m.output_dim * m.input_dim;
            t.pre_norm = detail::affine_apply(W, b, feat, m.output_dim);
            break;
        }
        case ModelKind::mlp: {
            std::size_t H = m.hidden_dim;
            const double* W1 = m.params.data();
            const double* b1 = W1 + H * m.input_dim;
            const double* W2 = b1 + H;
            const double* b2 = W2 + m.output_dim * H;
            t.hidden_pre = detail::affine_apply(W1, b1, feat, H);
            Vector act(H);
            for (std::size_t i = 0; i < H; ++i)
                act[i] = t.hidden_pre[i] > 0.0 ? t.hidden_pre[i] : 0.0;
            t.pre_norm = detail::affine_apply(W2, b2, act, m.output_dim);
            break;
        }
    }
    t.embedding = normalize(t.pre_norm);  // throws on zero-norm network output
    return t;
}

inline UnitEmbedding forward(const EmbeddingModel& m, const Vector& feat) {
    return forward_trace(m, feat).embedding;
}

struct BackwardResult {
    std::vector<double> grad_params;  // flat, same layout as params
    Vector grad_feat;
};

inline BackwardResult backward(const EmbeddingModel& m, const ForwardTrace& t,
                               const Vector& grad_at_embedding) {
    if (grad_at_embedding.size() != m.output_dim)
        throw std::invalid_argument("backward: gradient dimension mismatch");
    // Through the normalization: g_pre = J g_emb, J symmetric.
    Matrix jac = normalize_jacobian(t.pre_norm);
    Vector g_pre(m.output_dim, 0.0);
    for (std::size_t i = 0; i < m.output_dim; ++i)
        for (std::size_t j = 0; j < m.output_dim; ++j)
            g_pre[i] += jac(i, j) * grad_at_embedding[j];

    BackwardResult out;
    out.grad_params.assign(m.params.size(), 0.0);
    switch (m.kind) {
        case ModelKind::identity:
            out.grad_feat = g_pre;
            break;
        case ModelKind::affine: {
            const double* W = m.params.data();
            double* gW = out.grad_params.data();
            double* gb = gW + m.output_dim * m.input_dim;
            out.grad_feat.assign(m.input_dim, 0.0);
            for (std::size_t i = 0; i < m.output_dim; ++i) {
                gb[i] = g_pre[i];
                for (std::size_t j = 0; j < m.input_dim; ++j) {
                    gW[i * m.input_dim + j] = g_pre[i] * t.input[j];
                    out.grad_feat[j] += g_pre[i] * W[i * m.input_dim + j];
                }
            }
            break;
        }
        case ModelKind::mlp: {
            std::size_t H = m.hidden_dim;
            const double* W1 = m.params.data();
            const double* W2 = W1 + H * m.input_dim + H;
            double* gW1 = out.grad_params.data();
            double* gb1 = gW1 + H * m.input_dim;
            double* gW2 = gb1 + H;
            double* gb2 = gW2 + m.output_dim * H;
            Vector act(H), g_act(H, 0.0);
            for (std::size_t i = 0; i < H; ++i)
                act[i] = t.hidden_pre[i] > 0.0 ? t.hidden_pre[i] : 0.0;
            for (std::size_t i = 0; i < m.output_dim; ++i) {
                gb2[i] = g_pre[i];
                for (std::size_t j = 0; j < H; ++j) {
                    gW2[i * H + j] = g_pre[i] * act[j];
                    g_act[j] += g_pre[i] * W2[i * H + j];
                }
            }
            out.grad_feat.assign(m.input_dim, 0.0);
            for (std::size_t i = 0; i < H; ++i) {
                double g_h = t.hidden_pre[i] > 0.0 ? g_act[i] : 0.0;
                gb1[i] = g_h;
                for (std::size_t j = 0; j < m.input_dim; ++j) {
                    gW1[i * m.input_dim + j] = g_h * t.input[j];
                    out.grad_feat[j] += g_h * W1[i * m.input_dim + j];
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace softtriple
