#include <catch2/catch_amalgamated.hpp>

#include "softtriple/trainer.hpp"

using namespace softtriple;

namespace {

DatasetView toy_view(std::uint64_t seed, std::size_t classes = 2,
                     std::size_t per_class = 20, std::size_t dim = 6) {
    ClusterSpec spec;
    spec.num_classes = classes;
    spec.clusters_per_class = 1;
    spec.points_per_cluster = per_class;
    spec.input_dim = dim;
    spec.placement_scale = 3.0;
    spec.stddev = 0.3;
    spec.seed = seed;
    LabeledDataset ds = generate_synthetic(spec);
    DatasetView v;
    v.features = ds.features;
    v.labels = ds.labels;
    v.num_classes = ds.num_classes;
    return v;
}

}  // namespace

TEST_CASE("init_centers") {
    CenterBank bank = init_centers(5, 4, 8, 7);
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t k = 0; k < 4; ++k) {
            double n = 0.0;
            for (double v : bank.center(c, k)) n += v * v;
            CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-9);
        }
    CenterBank again = init_centers(5, 4, 8, 7);
    CHECK(bank.data == again.data);
    CHECK_THROWS_AS(init_centers(0, 1, 2, 0), std::invalid_argument);

    // directions are unbiased: mean of many 2-d unit centers is near zero
    CenterBank big = init_centers(1, 1000, 2, 11);
    Vector mean(2, 0.0);
    for (std::size_t k = 0; k < 1000; ++k) {
        mean[0] += big.center(0, k)[0] / 1000.0;
        mean[1] += big.center(0, k)[1] / 1000.0;
    }
    CHECK(norm2(mean) <= 0.1);
}

TEST_CASE("project_unit") {
    CenterBank bank = init_centers(2, 2, 3, 1);
    CenterBank before = bank;
    project_unit(bank);
    for (std::size_t i = 0; i < bank.data.size(); ++i)
        CHECK(std::abs(bank.data[i] - before.data[i]) <= 1e-12);  // idempotent

    bank.center(0, 0)[0] = 2.0;
    bank.center(0, 0)[1] = 0.0;
    bank.center(0, 0)[2] = 0.0;
    project_unit(bank);
    CHECK(bank.center(0, 0)[0] == 1.0);

    for (double& v : bank.center(1, 1)) v = 0.0;
    CHECK_THROWS_AS(project_unit(bank), std::domain_error);
}

TEST_CASE("learning rate step decay") {
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.lr_decay_epochs = {20, 40};
    cfg.lr_decay_factor = 10.0;
    CHECK(decayed_lr(1e-2, cfg, 1) == 1e-2);
    CHECK(decayed_lr(1e-2, cfg, 20) == 1e-2);
    CHECK(decayed_lr(1e-2, cfg, 21) == Catch::Approx(1e-3).epsilon(1e-12));
    CHECK(decayed_lr(1e-2, cfg, 41) == Catch::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.lr_decay_epochs = {40, 20};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.lr_decay_epochs = {20, 60};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.lr_decay_epochs = {20, 40};
    cfg.hp.centers_per_class = 1;
    cfg.hp.tau = 0.2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero learning rates leave parameters untouched") {
    DatasetView data = toy_view(3);
    Rng rng = Rng::split(3, 42);
    EmbeddingModel model = EmbeddingModel::mlp(6, 4, 8, rng);
    CenterBank centers = init_centers(2, 2, 4, 3);
    std::vector<double> params0 = model.params;
    std::vector<double> centers0 = centers.data;

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr_model = 0.0;
    cfg.lr_centers = 0.0;
    cfg.lr_decay_epochs = {};
    cfg.seed = 3;
    cfg.hp.centers_per_class = 2;
    TrainResult r = train(data, std::move(model), std::move(centers), cfg);
    CHECK(r.model.params == params0);
    for (std::size_t i = 0; i < centers0.size(); ++i)
        CHECK(std::abs(r.centers.data[i] - centers0[i]) <= 1e-12);
    CHECK(r.log[0].loss == Catch::Approx(r.log[2].loss).epsilon(1e-12));
}

TEST_CASE("training reduces the loss on a separable toy set") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        DatasetView data = toy_view(seed);
        Rng rng = Rng::split(seed, 42);
        EmbeddingModel model = EmbeddingModel::mlp(6, 4, 8, rng);
        CenterBank centers = init_centers(2, 2, 4, seed);
        TrainConfig cfg;
        cfg.epochs = 10;
        cfg.lr_decay_epochs = {};
        cfg.lr_model = 1e-3;
        cfg.seed = seed;
        cfg.hp.centers_per_class = 2;
        TrainResult r = train(data, std::move(model), std::move(centers), cfg);
        CHECK(r.log.back().loss < r.log.front().loss);
        for (const auto& rec : r.log) CHECK(std::isfinite(rec.loss));
    }
}

TEST_CASE("centers stay unit norm through training") {
    DatasetView data = toy_view(7);
    Rng rng = Rng::split(7, 42);
    EmbeddingModel model = EmbeddingModel::affine(6, 4, rng);
    CenterBank centers = init_centers(2, 3, 4, 7);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr_decay_epochs = {};
    cfg.seed = 7;
    cfg.hp.centers_per_class = 3;
    TrainResult r = train(data, std::move(model), std::move(centers), cfg);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < 3; ++k) {
            double n = 0.0;
            for (double v : r.centers.center(c, k)) n += v * v;
            CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-9);
        }
}

TEST_CASE("training is bit-deterministic given the seed") {
    auto run = [] {
        DatasetView data = toy_view(11, 3, 15);
        Rng rng = Rng::split(11, 42);
        EmbeddingModel model = EmbeddingModel::mlp(6, 4, 8, rng);
        CenterBank centers = init_centers(3, 2, 4, 11);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.lr_decay_epochs = {};
        cfg.seed = 11;
        cfg.hp.centers_per_class = 2;
        return train(data, std::move(model), std::move(centers), cfg);
    };
    TrainResult a = run();
    TrainResult b = run();
    CHECK(a.model.params == b.model.params);
    CHECK(a.centers.data == b.centers.data);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i)
        CHECK(a.log[i].loss == b.log[i].loss);
}

TEST_CASE("loss dispatch covers every kind") {
    Rng rng(13);
    CenterBank bank = init_centers(3, 1, 4, 5);
    UnitEmbedding x = rng.random_unit(4);
    HyperParams hp;
    for (LossKind kind : {LossKind::softmax_norm, LossKind::hard_triple,
                          LossKind::soft_triple, LossKind::proxy_nca,
                          LossKind::proxy_nca_hinge}) {
        HyperParams h = hp;
        h.centers_per_class = 1;
        LossEval e = per_example_loss(kind, x, 0, bank, h);
        CHECK(std::isfinite(e.value));
        CHECK(e.grad_x.size() == 4);
    }
    CHECK(loss_kind_from_name("softtriple") == LossKind::soft_triple);
    CHECK_THROWS_AS(loss_kind_from_name("nope"), std::invalid_argument);
}
