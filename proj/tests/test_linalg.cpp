#include <catch2/catch_amalgamated.hpp>

#include "softtriple/linalg.hpp"

using namespace softtriple;

TEST_CASE("normalize basic cases") {
    UnitEmbedding u = normalize({3.0, 4.0});
    CHECK(u.values[0] == Catch::Approx(0.6).epsilon(1e-12));
    CHECK(u.values[1] == Catch::Approx(0.8).epsilon(1e-12));

    UnitEmbedding e = normalize({1.0, 0.0});
    CHECK(e.values[0] == 1.0);
    CHECK(e.values[1] == 0.0);

    CHECK_THROWS_AS(normalize({0.0, 0.0}), std::domain_error);
}

TEST_CASE("normalize is idempotent") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        Vector v = rng.normal_vector(6);
        if (!(norm2(v) > 1e-9)) continue;
        UnitEmbedding once = normalize(v);
        UnitEmbedding twice = normalize(once.values);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(std::abs(once.values[i] - twice.values[i]) <= 1e-12);
    }
}

TEST_CASE("normalize_jacobian closed form and scale invariance") {
    Matrix j = normalize_jacobian({1.0, 0.0});
    CHECK(j(0, 0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(j(0, 1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(j(1, 0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(j(1, 1) == Catch::Approx(1.0).epsilon(1e-12));

    Rng rng(3);
    Vector v = rng.normal_vector(5);
    Matrix jac = normalize_jacobian(v);
    // J v = 0
    for (std::size_t i = 0; i < 5; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 5; ++k) acc += jac(i, k) * v[k];
        CHECK(std::abs(acc) <= 1e-12);
    }
    CHECK_THROWS_AS(normalize_jacobian({0.0, 0.0}), std::domain_error);
}

TEST_CASE("normalize_jacobian matches central differences") {
    Rng rng(11);
    Vector v = rng.normal_vector(5);
    Matrix jac = normalize_jacobian(v);
    const double h = 1e-6;
    for (std::size_t col = 0; col < 5; ++col) {
        Vector vp = v, vm = v;
        vp[col] += h;
        vm[col] -= h;
        UnitEmbedding up = normalize(vp), um = normalize(vm);
        for (std::size_t row = 0; row < 5; ++row) {
            double fd = (up.values[row] - um.values[row]) / (2.0 * h);
            double denom = std::max({std::abs(jac(row, col)), std::abs(fd), 1e-2});
            CHECK(std::abs(jac(row, col) - fd) / denom <= 1e-6);
        }
    }
}

TEST_CASE("log_sum_exp values and stability") {
    CHECK(log_sum_exp({0.0, 0.0}) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(log_sum_exp({1000.0, 0.0}) == Catch::Approx(1000.0).margin(1e-9));
    CHECK(log_sum_exp({1.0, 2.0, 3.0}) ==
          Catch::Approx(3.4076059644443803).epsilon(1e-14));
    CHECK_THROWS_AS(log_sum_exp({}), std::invalid_argument);

    Vector s = {0.3, -1.2, 2.5};
    double lse = log_sum_exp(s);
    double mx = 2.5;
    CHECK(lse >= mx);
    CHECK(lse <= mx + std::log(3.0));
}

TEST_CASE("softmax values") {
    Simplex uni = softmax({4.0, 4.0, 4.0});
    for (double w : uni.weights) CHECK(w == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

    Simplex p = softmax({10.0, 0.0});
    CHECK(p.weights[0] == Catch::Approx(0.9999546021312976).epsilon(1e-12));
    CHECK(p.weights[1] == Catch::Approx(4.5397868702434395e-05).epsilon(1e-10));

    Simplex zero_scale = softmax({3.0, -7.0, 100.0}, 0.0);
    for (double w : zero_scale.weights)
        CHECK(w == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        Vector s = rng.normal_vector(6);
        Vector shifted = s;
        double c = rng.uniform(-10.0, 10.0);
        for (double& x : shifted) x += c;
        Simplex a = softmax(s, 2.5), b = softmax(shifted, 2.5);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(std::abs(a.weights[i] - b.weights[i]) <= 1e-12);
    }
}

TEST_CASE("entropy values") {
    CHECK(entropy(Simplex{{1.0, 0.0, 0.0}}) == 0.0);
    CHECK(entropy(Simplex{{0.25, 0.25, 0.25, 0.25}}) ==
          Catch::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(entropy(Simplex{{0.5, 0.5}}) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax/entropy/log_sum_exp identity") {
    // sum_j p_j * scale * s_j + H(p) = log sum_j exp(scale * s_j)
    Rng rng(29);
    for (int t = 0; t < 100; ++t) {
        std::size_t m = 2 + rng.next_index(7);
        Vector s = rng.normal_vector(m);
        double scale = rng.uniform(0.1, 20.0);
        Simplex p = softmax(s, scale);
        double lhs = entropy(p);
        for (std::size_t j = 0; j < m; ++j) lhs += p.weights[j] * scale * s[j];
        CHECK(std::abs(lhs - log_sum_exp(scaled(s, scale))) <= 1e-10);
    }
}

TEST_CASE("rng split streams are reproducible and distinct") {
    Rng a = Rng::split(99, 0);
    Rng b = Rng::split(99, 0);
    Rng c = Rng::split(99, 1);
    double va = a.normal(), vb = b.normal(), vc = c.normal();
    CHECK(va == vb);
    CHECK(va != vc);
}
