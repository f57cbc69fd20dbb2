// Dense vector/matrix helpers, stable softmax/log-sum-exp, and seeded RNG.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace softtriple {

using Vector = std::vector<double>;

// Row-major dense matrix, just enough for Jacobians and layer weights.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline void axpy(double alpha, const Vector& x, Vector& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector scaled(const Vector& v, double alpha) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = alpha * v[i];
    return out;
}

// Unit-norm embedding. Construction goes through normalize() so the
// invariant |‖v‖-1| <= 1e-9 holds by construction.
struct UnitEmbedding {
    Vector values;
};

inline UnitEmbedding normalize(const Vector& v) {
    double n = norm2(v);
    if (!(n > 0.0))
        throw std::domain_error("normalize: zero-norm input");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return UnitEmbedding{std::move(out)};
}

// J = I/‖v‖ - v v^T/‖v‖^3. Satisfies J v = 0.
inline Matrix normalize_jacobian(const Vector& v) {
    double n = norm2(v);
    if (!(n > 0.0))
        throw std::domain_error("normalize_jacobian: zero-norm input");
    std::size_t d = v.size();
    double n3 = n * n * n;
    Matrix jac(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            jac(i, j) = -v[i] * v[j] / n3;
        jac(i, i) += 1.0 / n;
    }
    return jac;
}

inline double log_sum_exp(const Vector& s) {
    if (s.empty())
        throw std::invalid_argument("log_sum_exp: empty input");
    double m = s[0];
    for (double x : s) m = std::max(m, x);
    double acc = 0.0;
    for (double x : s) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Probability vector: nonnegative entries summing to one.
struct Simplex {
    Vector weights;
};

inline Simplex softmax(const Vector& s, double scale = 1.0) {
    if (s.empty())
        throw std::invalid_argument("softmax: empty input");
    double m = scale * s[0];
    for (double x : s) m = std::max(m, scale * x);
    Vector w(s.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        w[i] = std::exp(scale * s[i] - m);
        acc += w[i];
    }
    for (double& x : w) x /= acc;
    return Simplex{std::move(w)};
}

// Shannon entropy in nats, with 0 ln 0 := 0.
inline double entropy(const Simplex& p) {
    double h = 0.0;
    for (double x : p.weights)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

// All randomness flows through explicitly seeded engines. Sub-streams are
// derived by mixing the base seed with a stream id so modules never share
// or race a generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng split(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 finalizer as the mixing function
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    std::uint64_t next_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    Vector normal_vector(std::size_t d) {
        Vector v(d);
        for (double& x : v) x = normal();
        return v;
    }

    UnitEmbedding random_unit(std::size_t d) {
        Vector v;
        do {
            v = normal_vector(d);
        } while (!(norm2(v) > 1e-12));
        return normalize(v);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[next_index(i)]);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace softtriple
