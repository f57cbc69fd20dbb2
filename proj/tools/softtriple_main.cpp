// Command-line front end: dataset generation, training, evaluation, center
// analysis, and self-verification.
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "softtriple/checkpoint.hpp"
#include "softtriple/data.hpp"
#include "softtriple/eval.hpp"
#include "softtriple/losses.hpp"
#include "softtriple/model.hpp"
#include "softtriple/trainer.hpp"
#include "softtriple/verify.hpp"

namespace st = softtriple;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "softtriple 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // usage or verification failure
constexpr int kExitIo = 2;

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path + " for hashing");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("SOFTTRIPLE_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

void write_manifest(const std::string& path, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["tool_version"] = kToolVersion;
    m["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    m["config"] = config;
    json digests = json::object();
    for (const auto& in : inputs) {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a_file(in)));
        digests[in] = hex;
    }
    m["input_digests"] = digests;
    m["artifacts"] = outputs;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write manifest " + path);
    out << m.dump(2) << '\n';
}

json metrics_to_json(const st::EpochRecord& rec) {
    json j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    j["lr_model"] = rec.lr_model;
    j["lr_centers"] = rec.lr_centers;
    if (rec.metrics) {
        json ra = json::object();
        for (auto& [k, v] : rec.metrics->recall_at) ra[std::to_string(k)] = v;
        j["recall_at"] = ra;
        j["nmi"] = rec.metrics->nmi;
    }
    if (rec.unique_centers_per_class)
        j["unique_centers_per_class"] = *rec.unique_centers_per_class;
    return j;
}

struct TrainFlags {
    std::string data_path;
    std::string loss = "softtriple";
    std::size_t K = 10;
    double tau = 0.2, gamma = 0.1, delta = 0.01, lambda = 20.0;
    std::size_t batch = 32, epochs = 50;
    double lr_model = 1e-4, lr_centers = 1e-2;
    std::string decay = "20,40";
    std::uint64_t seed = default_seed();
    std::size_t embed_dim = 16;
    long hidden = 64;  // -1 identity, 0 affine, >0 mlp width
    double train_fraction = 0.5;
    std::size_t eval_every = 0;
    std::string ckpt_path = "model.ckpt";
    std::string metrics_path = "metrics.jsonl";
};

std::vector<std::size_t> parse_decay(const std::string& s) {
    std::vector<std::size_t> out;
    if (s.empty() || s == "none") return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    return out;
}

int run_train(const TrainFlags& f) {
    st::TrainConfig cfg;
    cfg.batch_size = f.batch;
    cfg.epochs = f.epochs;
    cfg.lr_model = f.lr_model;
    cfg.lr_centers = f.lr_centers;
    cfg.lr_decay_epochs = parse_decay(f.decay);
    cfg.seed = f.seed;
    cfg.eval_every = f.eval_every;
    cfg.loss = st::loss_kind_from_name(f.loss);
    cfg.hp.lambda = f.lambda;
    cfg.hp.gamma = f.gamma;
    cfg.hp.delta = f.delta;
    cfg.hp.tau = f.tau;
    cfg.hp.centers_per_class = f.K;
    if (cfg.loss == st::LossKind::softmax_norm) {
        // --loss softmax is the K=1, delta=0, tau=0 special case
        cfg.hp.centers_per_class = 1;
        cfg.hp.delta = 0.0;
        cfg.hp.tau = 0.0;
    }
    if (cfg.hp.centers_per_class == 1 && cfg.hp.tau > 0.0) {
        std::cerr << "error: --K 1 together with --tau > 0 is invalid (the center "
                     "regularizer needs K >= 2); pass --tau 0\n";
        return kExitFailure;
    }

    st::LabeledDataset ds = st::load_csv(f.data_path);
    ds = st::split_by_class(std::move(ds), f.train_fraction, f.seed);
    st::DatasetView train_view = st::select_split(ds, st::Split::train);
    st::DatasetView test_view = st::select_split(ds, st::Split::test);

    st::Rng model_rng = st::Rng::split(f.seed, 42);
    st::EmbeddingModel model =
        f.hidden < 0   ? st::EmbeddingModel::identity(ds.dim())
        : f.hidden == 0 ? st::EmbeddingModel::affine(ds.dim(), f.embed_dim, model_rng)
                        : st::EmbeddingModel::mlp(ds.dim(), f.embed_dim,
                                                  static_cast<std::size_t>(f.hidden),
                                                  model_rng);
    st::CenterBank centers = st::init_centers(
        train_view.num_classes, cfg.hp.centers_per_class, model.output_dim, f.seed);

    st::TrainResult result =
        st::train(train_view, std::move(model), std::move(centers), cfg, &test_view);

    st::save_checkpoint({result.model, result.centers}, f.ckpt_path);
    std::ofstream mout(f.metrics_path);
    if (!mout)
        throw std::runtime_error("cannot write metrics " + f.metrics_path);
    for (const auto& rec : result.log) mout << metrics_to_json(rec).dump() << '\n';
    mout.close();

    json config = {{"command", "train"},      {"data", f.data_path},
                   {"loss", f.loss},          {"K", cfg.hp.centers_per_class},
                   {"tau", cfg.hp.tau},       {"gamma", cfg.hp.gamma},
                   {"delta", cfg.hp.delta},   {"lambda", cfg.hp.lambda},
                   {"batch", f.batch},        {"epochs", f.epochs},
                   {"lr_model", f.lr_model},  {"lr_centers", f.lr_centers},
                   {"decay", f.decay},        {"seed", f.seed},
                   {"embed_dim", f.embed_dim},{"hidden", f.hidden},
                   {"train_fraction", f.train_fraction}};
    write_manifest(f.ckpt_path + ".manifest.json", config, {f.data_path},
                   {f.ckpt_path, f.metrics_path});
    std::cout << "wrote " << f.ckpt_path << " and " << f.metrics_path << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SoftTriple metric-learning losses: train, evaluate, analyze"};
    app.require_subcommand(1);

    // gen
    st::ClusterSpec spec;
    spec.seed = default_seed();
    std::string gen_out = "dataset.csv";
    auto* gen = app.add_subcommand("gen", "generate a synthetic clustered dataset");
    gen->add_option("--classes", spec.num_classes)->check(CLI::PositiveNumber);
    gen->add_option("--clusters", spec.clusters_per_class)->check(CLI::PositiveNumber);
    gen->add_option("--per-cluster", spec.points_per_cluster)->check(CLI::PositiveNumber);
    gen->add_option("--dim", spec.input_dim)->check(CLI::PositiveNumber);
    gen->add_option("--sigma", spec.stddev)->check(CLI::PositiveNumber);
    gen->add_option("--scale", spec.placement_scale)->check(CLI::PositiveNumber);
    gen->add_option("--seed", spec.seed);
    gen->add_option("--out", gen_out);

    // train
    TrainFlags tf;
    auto* train = app.add_subcommand("train", "train embeddings and centers");
    train->add_option("--data", tf.data_path)->required();
    train->add_option("--loss", tf.loss)
        ->check(CLI::IsMember({"softmax", "hardtriple", "softtriple", "proxynca",
                               "proxynca-hinge"}));
    train->add_option("--K", tf.K)->check(CLI::PositiveNumber);
    train->add_option("--tau", tf.tau);
    train->add_option("--gamma", tf.gamma)->check(CLI::PositiveNumber);
    train->add_option("--delta", tf.delta);
    train->add_option("--lambda", tf.lambda)->check(CLI::PositiveNumber);
    train->add_option("--batch", tf.batch)->check(CLI::PositiveNumber);
    train->add_option("--epochs", tf.epochs);
    train->add_option("--lr-model", tf.lr_model);
    train->add_option("--lr-centers", tf.lr_centers);
    train->add_option("--decay", tf.decay);
    train->add_option("--seed", tf.seed);
    train->add_option("--embed-dim", tf.embed_dim)->check(CLI::PositiveNumber);
    train->add_option("--hidden", tf.hidden,
                      "-1 identity passthrough, 0 affine, >0 hidden width");
    train->add_option("--train-fraction", tf.train_fraction);
    train->add_option("--eval-every", tf.eval_every);
    train->add_option("--ckpt", tf.ckpt_path);
    train->add_option("--metrics", tf.metrics_path);

    // eval
    std::string eval_ckpt, eval_data;
    std::uint64_t eval_seed = default_seed();
    double eval_fraction = 0.5;
    std::vector<std::size_t> eval_ks = {1, 2, 4, 8};
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--ckpt", eval_ckpt)->required();
    eval->add_option("--data", eval_data)->required();
    eval->add_option("--seed", eval_seed);
    eval->add_option("--train-fraction", eval_fraction);
    eval->add_option("--ks", eval_ks);

    // analyze-centers
    std::string ac_ckpt;
    double merge_eps = 0.01;
    auto* analyze = app.add_subcommand("analyze-centers",
                                       "count unique centers per class");
    analyze->add_option("--ckpt", ac_ckpt)->required();
    analyze->add_option("--merge-eps", merge_eps)->check(CLI::PositiveNumber);

    // verify
    std::uint64_t verify_seed = default_seed();
    auto* verify = app.add_subcommand("verify", "run the property self-checks");
    verify->add_option("--seed", verify_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitFailure;
    }

    try {
        if (gen->parsed()) {
            st::LabeledDataset ds = st::generate_synthetic(spec);
            st::save_csv(ds, gen_out);
            st::save_cluster_ids(ds, gen_out + ".clusters");
            json config = {{"command", "gen"},
                           {"classes", spec.num_classes},
                           {"clusters", spec.clusters_per_class},
                           {"per_cluster", spec.points_per_cluster},
                           {"dim", spec.input_dim},
                           {"sigma", spec.stddev},
                           {"scale", spec.placement_scale},
                           {"seed", spec.seed}};
            write_manifest(gen_out + ".manifest.json", config, {},
                           {gen_out, gen_out + ".clusters"});
            std::cout << "wrote " << ds.size() << " rows to " << gen_out << '\n';
            return kExitOk;
        }
        if (train->parsed()) {
            return run_train(tf);
        }
        if (eval->parsed()) {
            st::Checkpoint ck = st::load_checkpoint(eval_ckpt);
            st::LabeledDataset ds = st::load_csv(eval_data);
            if (ds.dim() != ck.model.input_dim) {
                std::cerr << "error: dataset dimension " << ds.dim()
                          << " does not match checkpoint input dimension "
                          << ck.model.input_dim << '\n';
                return kExitFailure;
            }
            ds = st::split_by_class(std::move(ds), eval_fraction, eval_seed);
            st::DatasetView test_view = st::select_split(ds, st::Split::test);
            st::RetrievalMetrics m = st::detail::evaluate_embeddings(
                ck.model, test_view, eval_ks, eval_seed);
            json out;
            json ra = json::object();
            for (auto& [k, v] : m.recall_at) ra[std::to_string(k)] = v;
            out["recall_at"] = ra;
            out["nmi"] = m.nmi;
            std::cout << out.dump() << '\n';
            return kExitOk;
        }
        if (analyze->parsed()) {
            st::Checkpoint ck = st::load_checkpoint(ac_ckpt);
            std::vector<std::size_t> counts =
                st::count_unique_centers(ck.centers, merge_eps);
            std::map<std::size_t, std::size_t> hist;
            std::cout << "class unique_centers\n";
            for (std::size_t c = 0; c < counts.size(); ++c) {
                std::cout << c << ' ' << counts[c] << '\n';
                ++hist[counts[c]];
            }
            std::cout << "histogram (count: classes)\n";
            for (auto& [k, v] : hist) std::cout << k << ": " << v << '\n';
            return kExitOk;
        }
        if (verify->parsed()) {
            auto suites = st::run_verification(verify_seed);
            bool all_ok = true;
            for (const auto& s : suites) {
                std::cout << (s.passed() ? "PASS " : "FAIL ") << s.name << " ("
                          << s.trials << " trials";
                if (!s.passed())
                    std::cout << ", " << s.failures
                              << " failures, first: " << s.first_failure;
                std::cout << ")\n";
                all_ok = all_ok && s.passed();
            }
            return all_ok ? kExitOk : kExitFailure;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitOk;
}
