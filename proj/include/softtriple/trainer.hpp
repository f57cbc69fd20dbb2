// Mini-batch training loop: Adam with separate learning rates for the model
// and the center bank, step decay, and unit-norm projection of centers after
// every step.
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "softtriple/data.hpp"
#include "softtriple/eval.hpp"
#include "softtriple/losses.hpp"
#include "softtriple/model.hpp"

namespace softtriple {

enum class LossKind { softmax_norm, hard_triple, soft_triple, proxy_nca, proxy_nca_hinge };

inline LossKind loss_kind_from_name(const std::string& name) {
    if (name == "softmax") return LossKind::softmax_norm;
    if (name == "hardtriple") return LossKind::hard_triple;
    if (name == "softtriple") return LossKind::soft_triple;
    if (name == "proxynca") return LossKind::proxy_nca;
    if (name == "proxynca-hinge") return LossKind::proxy_nca_hinge;
    throw std::invalid_argument("unknown loss '" + name + "'");
}

inline LossEval per_example_loss(LossKind kind, const UnitEmbedding& x,
                                 std::size_t label, const CenterBank& bank,
                                 const HyperParams& hp) {
    switch (kind) {
        case LossKind::softmax_norm: {
            // identical code path as SoftTriple with K=1, delta=0
            HyperParams h = hp;
            h.delta = 0.0;
            return soft_triple_loss(x, label, bank, h);
        }
        case LossKind::hard_triple:
            return hard_triple_loss(x, label, bank, hp);
        case LossKind::soft_triple:
            return soft_triple_loss(x, label, bank, hp);
        case LossKind::proxy_nca:
            return proxy_nca_loss_eval(x, label, bank, hp.lambda, false);
        case LossKind::proxy_nca_hinge:
            return proxy_nca_loss_eval(x, label, bank, hp.lambda, true);
    }
    throw std::logic_error("per_example_loss: unreachable");
}

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    double lr_model = 1e-4;
    double lr_centers = 1e-2;
    std::vector<std::size_t> lr_decay_epochs = {20, 40};
    double lr_decay_factor = 10.0;
    std::uint64_t seed = 0;
    HyperParams hp;
    LossKind loss = LossKind::soft_triple;
    // metric evaluation during training: 0 disables
    std::size_t eval_every = 0;

    void validate() const {
        if (batch_size == 0 || !(lr_model >= 0.0) || !(lr_centers >= 0.0) ||
            !(lr_decay_factor > 0.0))
            throw std::invalid_argument("TrainConfig: nonpositive rates or batch size");
        for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
            if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1])
                throw std::invalid_argument("TrainConfig: decay epochs must increase");
            if (lr_decay_epochs[i] >= epochs && epochs > 0)
                throw std::invalid_argument("TrainConfig: decay epoch past end of training");
        }
        if (hp.tau > 0.0 && hp.centers_per_class < 2)
            throw std::invalid_argument("TrainConfig: K=1 with tau > 0 is invalid");
    }
};

// Standard Adam, one instance per parameter tensor.
class Adam {
public:
    explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
    static constexpr double beta1_ = 0.9;
    static constexpr double beta2_ = 0.999;
    static constexpr double eps_ = 1e-8;
};

inline CenterBank init_centers(std::size_t C, std::size_t K, std::size_t d,
                               std::uint64_t seed) {
    if (C == 0 || K == 0 || d == 0)
        throw std::invalid_argument("init_centers: C, K, d must be >= 1");
    CenterBank bank(C, K, d);
    Rng rng = Rng::split(seed, 3);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) {
            UnitEmbedding u = rng.random_unit(d);
            auto dst = bank.center(c, k);
            for (std::size_t i = 0; i < d; ++i) dst[i] = u.values[i];
        }
    return bank;
}

inline void project_unit(CenterBank& bank) {
    for (std::size_t c = 0; c < bank.num_classes; ++c)
        for (std::size_t k = 0; k < bank.centers_per_class; ++k) {
            auto w = bank.center(c, k);
            double n = 0.0;
            for (double v : w) n += v * v;
            n = std::sqrt(n);
            if (!(n > 0.0))
                throw std::domain_error("project_unit: zero-norm center");
            for (double& v : w) v /= n;
        }
}

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double lr_model = 0.0;
    double lr_centers = 0.0;
    std::optional<RetrievalMetrics> metrics;
    std::optional<std::vector<std::size_t>> unique_centers_per_class;
};

struct TrainResult {
    EmbeddingModel model;
    CenterBank centers;
    std::vector<EpochRecord> log;
};

inline double decayed_lr(double base, const TrainConfig& cfg, std::size_t epoch) {
    double lr = base;
    for (std::size_t d : cfg.lr_decay_epochs)
        if (epoch > d) lr /= cfg.lr_decay_factor;
    return lr;
}

namespace detail {

inline RetrievalMetrics evaluate_embeddings(const EmbeddingModel& model,
                                            const DatasetView& view,
                                            const std::vector<std::size_t>& ks,
                                            std::uint64_t seed) {
    std::vector<UnitEmbedding> embs;
    embs.reserve(view.features.size());
    std::vector<Vector> raw;
    raw.reserve(view.features.size());
    for (const auto& f : view.features) {
        embs.push_back(forward(model, f));
        raw.push_back(embs.back().values);
    }
    RetrievalMetrics m;
    m.recall_at = recall_at_k(embs, view.labels, ks);
    ClusterAssignment ca = kmeans_best_of(raw, view.num_classes, seed);
    m.nmi = nmi(ca.assignment, view.labels);
    return m;
}

}  // namespace detail

// Epochs are numbered 1..epochs in the log. Deterministic given the seed:
// shuffling, batching, and gradient accumulation all run in fixed order.
inline TrainResult train(const DatasetView& data, EmbeddingModel model,
                         CenterBank centers, const TrainConfig& cfg,
                         const DatasetView* eval_data = nullptr,
                         const std::vector<std::size_t>& eval_ks = {1, 2, 4, 8}) {
    cfg.validate();
    if (data.features.empty())
        throw std::invalid_argument("train: empty dataset");
    for (std::size_t lab : data.labels)
        if (lab >= centers.num_classes)
            throw std::invalid_argument("train: label out of range of center bank");

    Adam opt_model(model.params.size());
    Adam opt_centers(centers.data.size());
    std::size_t n = data.features.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double lr_m = decayed_lr(cfg.lr_model, cfg, epoch);
        double lr_c = decayed_lr(cfg.lr_centers, cfg, epoch);
        Rng shuffle_rng = Rng::split(cfg.seed, 1000 + epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, n);
            double inv_b = 1.0 / static_cast<double>(end - start);
            std::vector<double> grad_model(model.params.size(), 0.0);
            std::vector<double> grad_centers(centers.data.size(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < end; ++bi) {
                std::size_t idx = order[bi];
                ForwardTrace trace = forward_trace(model, data.features[idx]);
                LossEval e = per_example_loss(cfg.loss, trace.embedding,
                                              data.labels[idx], centers, cfg.hp);
                batch_loss += inv_b * e.value;
                for (std::size_t i = 0; i < grad_centers.size(); ++i)
                    grad_centers[i] += inv_b * e.grad_W[i];
                if (!model.params.empty()) {
                    BackwardResult back = backward(model, trace, e.grad_x);
                    for (std::size_t i = 0; i < grad_model.size(); ++i)
                        grad_model[i] += inv_b * back.grad_params[i];
                }
            }
            if (cfg.hp.tau > 0.0) {
                std::size_t C = centers.num_classes, K = centers.centers_per_class;
                double coef = cfg.hp.tau / (static_cast<double>(C) *
                                            static_cast<double>(K) *
                                            static_cast<double>(K - 1));
                for (std::size_t c = 0; c < C; ++c) {
                    RegularizerEval reg = center_regularizer(centers, c);
                    batch_loss += coef * reg.value;
                    for (std::size_t k = 0; k < K; ++k)
                        for (std::size_t i = 0; i < centers.dim; ++i)
                            grad_centers[(c * K + k) * centers.dim + i] +=
                                coef * reg.grad[k][i];
                }
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batches) + ", value " +
                    std::to_string(batch_loss));
            if (!model.params.empty()) opt_model.step(model.params, grad_model, lr_m);
            opt_centers.step(centers.data, grad_centers, lr_c);
            project_unit(centers);
            // weight by batch size so the partial last batch does not skew
            // the epoch average
            epoch_loss += batch_loss * static_cast<double>(end - start);
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss / static_cast<double>(n);
        rec.lr_model = lr_m;
        rec.lr_centers = lr_c;
        if (eval_data && cfg.eval_every > 0 &&
            (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
            rec.metrics = detail::evaluate_embeddings(model, *eval_data, eval_ks, cfg.seed);
            rec.unique_centers_per_class = count_unique_centers(centers, 0.01);
        }
        result.log.push_back(std::move(rec));
    }
    result.model = std::move(model);
    result.centers = std::move(centers);
    return result;
}

}  // namespace softtriple
