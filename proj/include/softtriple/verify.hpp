// Randomized self-verification suites: the smoothed-triplet equivalence,
// finite-difference gradient checks, limit reductions, the similarity
// sandwich, margin monotonicity, and the center-to-example margin transfer.
// The finite-difference oracle here is independent of the analytic gradient
// paths it checks.
#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "softtriple/losses.hpp"
#include "softtriple/model.hpp"
#include "softtriple/trainer.hpp"

namespace softtriple {

struct SuiteResult {
    std::string name;
    std::size_t trials = 0;
    std::size_t failures = 0;
    std::string first_failure;

    bool passed() const { return failures == 0; }
};

namespace fd {

inline constexpr double kStep = 1e-6;

// Central differences over a flat parameter vector.
inline std::vector<double> gradient(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x, double h = kStep) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + h;
        double fp = f(x);
        x[i] = orig - h;
        double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Relative error with a floor so finite-difference roundoff on tiny entries
// does not dominate.
inline double rel_err(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
    return std::abs(analytic - numeric) / denom;
}

inline double max_rel_err(const std::vector<double>& analytic,
                          const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    return worst;
}

}  // namespace fd

namespace detail {

inline CenterBank random_bank(Rng& rng, std::size_t C, std::size_t K, std::size_t d) {
    CenterBank bank(C, K, d);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) {
            UnitEmbedding u = rng.random_unit(d);
            auto dst = bank.center(c, k);
            for (std::size_t i = 0; i < d; ++i) dst[i] = u.values[i];
        }
    return bank;
}

// Smallest gap between the best and second-best within-class inner product,
// over all classes. Used to stay away from hard-max ties.
inline double min_argmax_gap(const UnitEmbedding& x, const CenterBank& bank) {
    double worst = 1e9;
    for (std::size_t c = 0; c < bank.num_classes; ++c) {
        if (bank.centers_per_class < 2) continue;
        double best = -2.0, second = -2.0;
        for (std::size_t k = 0; k < bank.centers_per_class; ++k) {
            double ip = 0.0;
            auto w = bank.center(c, k);
            for (std::size_t i = 0; i < bank.dim; ++i) ip += w[i] * x.values[i];
            if (ip > best) {
                second = best;
                best = ip;
            } else if (ip > second) {
                second = ip;
            }
        }
        worst = std::min(worst, best - second);
    }
    return worst;
}

template <typename Fail>
void record(SuiteResult& suite, bool ok, Fail&& describe) {
    ++suite.trials;
    if (!ok) {
        ++suite.failures;
        if (suite.first_failure.empty()) suite.first_failure = describe();
    }
}

}  // namespace detail

// |softmax_norm_loss - smoothed_triplet_dual| <= 1e-10 over random instances.
inline SuiteResult verify_equivalence(std::uint64_t seed, std::size_t trials = 1000) {
    SuiteResult suite{"prop1-equivalence"};
    Rng rng = Rng::split(seed, 21);
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t C = 2 + rng.next_index(9);
        std::size_t d = 1 + rng.next_index(8);
        double lambda = rng.uniform(0.1, 50.0);
        CenterBank bank = detail::random_bank(rng, C, 1, d);
        UnitEmbedding x = rng.random_unit(d);
        std::size_t label = rng.next_index(C);
        double primal = softmax_norm_loss(x, label, bank, lambda).value;
        double dual = smoothed_triplet_dual(x, label, bank, lambda);
        detail::record(suite, std::abs(primal - dual) <= 1e-10, [&] {
            std::ostringstream os;
            os << "C=" << C << " d=" << d << " lambda=" << lambda
               << " expected " << primal << " got " << dual;
            return os.str();
        });
    }
    return suite;
}

// Analytic gradients of every loss against central finite differences.
inline std::vector<SuiteResult> verify_gradients(std::uint64_t seed,
                                                 std::size_t trials = 100,
                                                 double tol = 1e-5) {
    std::vector<SuiteResult> suites;
    Rng rng = Rng::split(seed, 22);

    auto check_xw = [&](const char* name, auto eval, bool avoid_ties) {
        SuiteResult suite{name};
        std::size_t done = 0;
        while (done < trials) {
            std::size_t C = 2 + rng.next_index(4);
            std::size_t K = suite.name == "grad-softmax-norm" || suite.name == "grad-proxynca"
                                ? 1
                                : 1 + rng.next_index(4);
            std::size_t d = 3 + rng.next_index(6);
            CenterBank bank = detail::random_bank(rng, C, K, d);
            UnitEmbedding x = rng.random_unit(d);
            std::size_t label = rng.next_index(C);
            if (avoid_ties && detail::min_argmax_gap(x, bank) < 1e-4) continue;
            ++done;
            LossEval e = eval(x, label, bank);
            std::vector<double> fd_x = fd::gradient(
                [&](const std::vector<double>& xv) {
                    return eval(UnitEmbedding{xv}, label, bank).value;
                },
                x.values);
            std::vector<double> fd_w = fd::gradient(
                [&](const std::vector<double>& wv) {
                    CenterBank b2 = bank;
                    b2.data = wv;
                    return eval(x, label, b2).value;
                },
                bank.data);
            double err = std::max(fd::max_rel_err(e.grad_x, fd_x),
                                  fd::max_rel_err(e.grad_W, fd_w));
            detail::record(suite, err <= tol, [&] {
                std::ostringstream os;
                os << "C=" << C << " K=" << K << " d=" << d << " rel err " << err;
                return os.str();
            });
        }
        suites.push_back(std::move(suite));
    };

    HyperParams hp;
    hp.lambda = 15.0;
    hp.gamma = 0.2;
    hp.delta = 0.05;
    check_xw("grad-softmax-norm",
             [&](const UnitEmbedding& x, std::size_t y, const CenterBank& b) {
                 return softmax_norm_loss(x, y, b, hp.lambda);
             },
             false);
    check_xw("grad-softtriple",
             [&](const UnitEmbedding& x, std::size_t y, const CenterBank& b) {
                 return soft_triple_loss(x, y, b, hp);
             },
             false);
    check_xw("grad-hardtriple",
             [&](const UnitEmbedding& x, std::size_t y, const CenterBank& b) {
                 return hard_triple_loss(x, y, b, hp);
             },
             true);
    check_xw("grad-proxynca",
             [&](const UnitEmbedding& x, std::size_t y, const CenterBank& b) {
                 return proxy_nca_loss_eval(x, y, b, hp.lambda);
             },
             false);

    {
        SuiteResult suite{"grad-regularizer"};
        for (std::size_t t = 0; t < trials; ++t) {
            std::size_t K = 2 + rng.next_index(5);
            std::size_t d = 3 + rng.next_index(6);
            CenterBank bank = detail::random_bank(rng, 1, K, d);
            RegularizerEval reg = center_regularizer(bank, 0);
            std::vector<double> analytic;
            for (const auto& g : reg.grad)
                analytic.insert(analytic.end(), g.begin(), g.end());
            std::vector<double> numeric = fd::gradient(
                [&](const std::vector<double>& wv) {
                    CenterBank b2 = bank;
                    b2.data = wv;
                    return center_regularizer(b2, 0).value;
                },
                bank.data);
            double err = fd::max_rel_err(analytic, numeric);
            detail::record(suite, err <= tol, [&] {
                std::ostringstream os;
                os << "K=" << K << " d=" << d << " rel err " << err;
                return os.str();
            });
        }
        suites.push_back(std::move(suite));
    }

    {
        // total_objective center gradients plus end-to-end model-parameter
        // gradients through a small mlp.
        SuiteResult suite{"grad-total-objective"};
        for (std::size_t t = 0; t < trials; ++t) {
            std::size_t C = 3, K = 2, d = 4, D = 5;
            HyperParams hp2 = hp;
            hp2.centers_per_class = K;
            hp2.tau = 0.2;
            CenterBank bank = detail::random_bank(rng, C, K, d);
            EmbeddingModel model = EmbeddingModel::mlp(D, d, 6, rng);
            std::vector<Vector> feats;
            std::vector<std::size_t> labels;
            for (std::size_t i = 0; i < 4; ++i) {
                // resample inputs that land in the relu dead zone, where the
                // network output has zero norm and normalization is undefined
                Vector f;
                for (;;) {
                    f = rng.normal_vector(D);
                    try {
                        forward(model, f);
                        break;
                    } catch (const std::domain_error&) {
                    }
                }
                feats.push_back(std::move(f));
                labels.push_back(rng.next_index(C));
            }
            auto objective = [&](const EmbeddingModel& m, const CenterBank& b) {
                std::vector<LabeledEmbedding> batch;
                for (std::size_t i = 0; i < feats.size(); ++i)
                    batch.push_back({forward(m, feats[i]), labels[i]});
                return total_objective(batch, b, hp2).value;
            };

            // analytic: centers from total_objective, model params via backward
            std::vector<LabeledEmbedding> batch;
            std::vector<ForwardTrace> traces;
            for (std::size_t i = 0; i < feats.size(); ++i) {
                traces.push_back(forward_trace(model, feats[i]));
                batch.push_back({traces.back().embedding, labels[i]});
            }
            LossEval e = total_objective(batch, bank, hp2);
            std::vector<double> grad_model(model.params.size(), 0.0);
            for (std::size_t i = 0; i < feats.size(); ++i) {
                Vector gx = batch_embedding_grad(traces[i].embedding, labels[i], bank,
                                                 hp2, feats.size());
                BackwardResult back = backward(model, traces[i], gx);
                for (std::size_t j = 0; j < grad_model.size(); ++j)
                    grad_model[j] += back.grad_params[j];
            }

            std::vector<double> fd_w = fd::gradient(
                [&](const std::vector<double>& wv) {
                    CenterBank b2 = bank;
                    b2.data = wv;
                    return objective(model, b2);
                },
                bank.data);
            std::vector<double> fd_m = fd::gradient(
                [&](const std::vector<double>& pv) {
                    EmbeddingModel m2 = model;
                    m2.params = pv;
                    return objective(m2, bank);
                },
                model.params);
            double err = std::max(fd::max_rel_err(e.grad_W, fd_w),
                                  fd::max_rel_err(grad_model, fd_m));
            detail::record(suite, err <= tol, [&] {
                std::ostringstream os;
                os << "trial " << t << " rel err " << err;
                return os.str();
            });
        }
        suites.push_back(std::move(suite));
    }
    return suites;
}

// SoftTriple(K=1, delta=0) = HardTriple(K=1, delta=0) = normalized SoftMax
// to 1e-12, plus the similarity sandwich S_hard - gamma ln K <= S' <= S_hard.
inline SuiteResult verify_reductions(std::uint64_t seed, std::size_t trials = 1000) {
    SuiteResult suite{"reductions-and-sandwich"};
    Rng rng = Rng::split(seed, 23);
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t C = 2 + rng.next_index(6);
        std::size_t d = 2 + rng.next_index(7);
        double lambda = rng.uniform(0.5, 30.0);
        HyperParams hp;
        hp.lambda = lambda;
        hp.gamma = rng.uniform(0.05, 1.0);
        hp.delta = 0.0;
        CenterBank k1 = detail::random_bank(rng, C, 1, d);
        UnitEmbedding x = rng.random_unit(d);
        std::size_t label = rng.next_index(C);
        double ref = softmax_norm_loss(x, label, k1, lambda).value;
        double soft = soft_triple_loss(x, label, k1, hp).value;
        double hard = hard_triple_loss(x, label, k1, hp).value;
        bool ok = std::abs(soft - ref) <= 1e-12 && std::abs(hard - ref) <= 1e-12;

        std::size_t K = 2 + rng.next_index(5);
        CenterBank multi = detail::random_bank(rng, C, K, d);
        for (std::size_t c = 0; c < C; ++c) {
            double s_hard = class_similarity_hard(x, multi, c).value;
            double s_soft = class_similarity_relaxed(x, multi, c, hp.gamma).value;
            double lower = s_hard - hp.gamma * std::log(static_cast<double>(K));
            ok = ok && s_soft <= s_hard + 1e-12 && s_soft >= lower - 1e-12;
        }
        detail::record(suite, ok, [&] {
            std::ostringstream os;
            os << "C=" << C << " d=" << d << " lambda=" << lambda;
            return os.str();
        });
    }
    return suite;
}

// soft_triple_loss is nondecreasing in the margin delta.
inline SuiteResult verify_margin_monotonicity(std::uint64_t seed,
                                              std::size_t trials = 200) {
    SuiteResult suite{"margin-monotonicity"};
    Rng rng = Rng::split(seed, 24);
    const double deltas[] = {0.0, 0.01, 0.1};
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t C = 2 + rng.next_index(5);
        std::size_t K = 1 + rng.next_index(4);
        std::size_t d = 3 + rng.next_index(6);
        CenterBank bank = detail::random_bank(rng, C, K, d);
        UnitEmbedding x = rng.random_unit(d);
        std::size_t label = rng.next_index(C);
        HyperParams hp;
        hp.lambda = rng.uniform(1.0, 30.0);
        hp.gamma = 0.1;
        double prev = -1.0;
        bool ok = true;
        for (double delta : deltas) {
            hp.delta = delta;
            double v = soft_triple_loss(x, label, bank, hp).value;
            ok = ok && v >= prev - 1e-12;
            prev = v;
        }
        detail::record(suite, ok, [&] { return std::string("monotonicity broken"); });
    }
    return suite;
}

// Center-to-example margin transfer: instances built to satisfy the
// near-center preconditions must obey x_i·x_j - x_i·x_k >= delta - 2 eps.
inline SuiteResult verify_margin_transfer(std::uint64_t seed,
                                          std::size_t trials = 10000) {
    SuiteResult suite{"margin-transfer"};
    Rng rng = Rng::split(seed, 25);
    const std::size_t d = 8;
    const double eps = 0.05;
    const double delta = 0.01;
    auto near_center = [&](const UnitEmbedding& w) {
        for (;;) {
            Vector v = w.values;
            axpy(rng.uniform(0.0, eps * 0.7), rng.random_unit(d).values, v);
            UnitEmbedding x = normalize(v);
            Vector diff = x.values;
            axpy(-1.0, w.values, diff);
            if (norm2(diff) <= eps) return x;
        }
    };
    std::size_t done = 0;
    while (done < trials) {
        UnitEmbedding w_pos = rng.random_unit(d);
        UnitEmbedding w_neg = rng.random_unit(d);
        UnitEmbedding xi = near_center(w_pos);
        UnitEmbedding xj = near_center(w_pos);
        UnitEmbedding xk = near_center(w_neg);
        // precondition: the center-level triplet constraint holds for x_i
        if (dot(xi.values, w_pos.values) - dot(xi.values, w_neg.values) < delta)
            continue;
        ++done;
        double margin = dot(xi.values, xj.values) - dot(xi.values, xk.values);
        detail::record(suite, margin >= delta - 2.0 * eps, [&] {
            std::ostringstream os;
            os << "margin " << margin << " below " << delta - 2.0 * eps;
            return os.str();
        });
    }
    return suite;
}

inline std::vector<SuiteResult> run_verification(std::uint64_t seed) {
    std::vector<SuiteResult> out;
    out.push_back(verify_equivalence(seed));
    for (auto& s : verify_gradients(seed)) out.push_back(std::move(s));
    out.push_back(verify_reductions(seed));
    out.push_back(verify_margin_monotonicity(seed));
    out.push_back(verify_margin_transfer(seed));
    return out;
}

}  // namespace softtriple
