// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.
// argv[1] (optional) is the path to the CLI binary, needed for the
// determinism criterion.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "softtriple/data.hpp"
#include "softtriple/eval.hpp"
#include "softtriple/losses.hpp"
#include "softtriple/model.hpp"
#include "softtriple/trainer.hpp"
#include "softtriple/verify.hpp"

namespace st = softtriple;

namespace {

int g_failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what
              << " (" << detail << ")\n";
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Default synthetic benchmark: 20 classes, 3 clusters each, 34 points per
// cluster, 32-d inputs, disjoint-class 50/50 split.
st::LabeledDataset benchmark_dataset(std::uint64_t seed) {
    st::ClusterSpec spec;
    spec.seed = seed;
    return st::split_by_class(st::generate_synthetic(spec), 0.5, seed);
}

struct RunOutcome {
    double recall1 = 0.0;
    double mean_unique_centers = 0.0;
};

RunOutcome run_benchmark(std::uint64_t seed, st::LossKind loss, std::size_t K,
                         double tau) {
    st::LabeledDataset ds = benchmark_dataset(seed);
    st::DatasetView train_view = st::select_split(ds, st::Split::train);
    st::DatasetView test_view = st::select_split(ds, st::Split::test);

    st::TrainConfig cfg;
    cfg.seed = seed;
    cfg.loss = loss;
    // A larger model lr than the library default lets the small MLP actually
    // fit in 50 epochs, and a moderate scale keeps the pull toward centers
    // strong instead of saturating once classes are barely separated.  The
    // strong pull is what exposes the difference between one center per class
    // and several.
    cfg.lr_model = 1e-3;
    cfg.hp.lambda = 7.0;
    cfg.hp.centers_per_class = K;
    cfg.hp.tau = tau;
    if (loss == st::LossKind::softmax_norm) {
        cfg.hp.centers_per_class = 1;
        cfg.hp.delta = 0.0;
        cfg.hp.tau = 0.0;
    }

    st::Rng model_rng = st::Rng::split(seed, 42);
    st::EmbeddingModel model = st::EmbeddingModel::mlp(32, 16, 64, model_rng);
    st::CenterBank centers =
        st::init_centers(train_view.num_classes, cfg.hp.centers_per_class, 16, seed);
    st::TrainResult r =
        st::train(train_view, std::move(model), std::move(centers), cfg);

    std::vector<st::UnitEmbedding> embs;
    for (const auto& f : test_view.features) embs.push_back(st::forward(r.model, f));
    RunOutcome out;
    out.recall1 = st::recall_at_k(embs, test_view.labels, {1}).at(1);
    auto counts = st::count_unique_centers(r.centers, 0.01);
    for (std::size_t c : counts)
        out.mean_unique_centers += static_cast<double>(c) / counts.size();
    return out;
}

// Independent full-sort recall oracle for criterion 7.
std::map<std::size_t, double> brute_recall(const std::vector<st::UnitEmbedding>& embs,
                                           const std::vector<std::size_t>& labels,
                                           const std::vector<std::size_t>& ks) {
    std::map<std::size_t, double> out;
    std::size_t n = embs.size();
    for (std::size_t k : ks) {
        double hits = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::pair<double, std::size_t>> all;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    all.emplace_back(st::dot(embs[i].values, embs[j].values), j);
            std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t r = 0; r < k; ++r)
                if (labels[all[r].second] == labels[i]) {
                    hits += 1.0;
                    break;
                }
        }
        out[k] = hits / static_cast<double>(n);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism(const std::string& cli) {
    namespace fs = std::filesystem;
    fs::path work = fs::temp_directory_path() / "softtriple_acceptance";
    fs::create_directories(work);
    std::string data = (work / "data.csv").string();
    auto sh = [&](const std::string& cmd) { return std::system(cmd.c_str()); };
    std::string quiet = " > /dev/null 2>&1";
    int rc = sh(cli + " gen --classes 8 --clusters 2 --per-cluster 8 --dim 8 --seed 4 --out " +
                data + quiet);
    if (rc != 0) {
        report(8, "determinism of train invocations", false, "gen failed");
        return;
    }
    std::string train_flags =
        " train --data " + data +
        " --loss softtriple --K 3 --epochs 6 --decay none --seed 4 --embed-dim 6"
        " --hidden 16 --eval-every 3";
    std::string ck1 = (work / "a.ckpt").string(), ck2 = (work / "b.ckpt").string();
    std::string m1 = (work / "a.jsonl").string(), m2 = (work / "b.jsonl").string();
    rc = sh(cli + train_flags + " --ckpt " + ck1 + " --metrics " + m1 + quiet);
    rc |= sh(cli + train_flags + " --ckpt " + ck2 + " --metrics " + m2 + quiet);
    if (rc != 0) {
        report(8, "determinism of train invocations", false, "train failed");
        return;
    }
    bool ok = read_file(ck1) == read_file(ck2) && !read_file(ck1).empty() &&
              read_file(m1) == read_file(m2) && !read_file(m1).empty();
    report(8, "determinism of train invocations", ok,
           ok ? "checkpoints and metrics logs byte-identical" : "outputs differ");
}

}  // namespace

int main(int argc, char** argv) {
    const std::uint64_t seed = 20210419;

    {
        auto t0 = std::chrono::steady_clock::now();
        st::SuiteResult s = st::verify_equivalence(seed, 1000);
        double dt = seconds_since(t0);
        std::ostringstream d;
        d << s.trials << " instances, max runtime 5s, took " << dt << "s";
        report(1, "smoothed-triplet equivalence within 1e-10", s.passed() && dt < 5.0,
               d.str());
    }
    {
        auto t0 = std::chrono::steady_clock::now();
        auto suites = st::verify_gradients(seed, 100, 1e-5);
        double dt = seconds_since(t0);
        bool ok = dt < 30.0;
        std::string first;
        for (const auto& s : suites) {
            ok = ok && s.passed();
            if (!s.passed() && first.empty()) first = s.name + ": " + s.first_failure;
        }
        std::ostringstream d;
        d << suites.size() << " gradient suites x 100 instances, took " << dt << "s";
        if (!first.empty()) d << ", first failure " << first;
        report(2, "analytic gradients match finite differences at 1e-5", ok, d.str());
    }
    {
        st::SuiteResult s = st::verify_reductions(seed, 1000);
        report(3, "K=1 reductions at 1e-12 and similarity sandwich", s.passed(),
               std::to_string(s.trials) + " instances" +
                   (s.passed() ? "" : ", first failure " + s.first_failure));
    }
    {
        st::SuiteResult s = st::verify_margin_transfer(seed, 10000);
        report(4, "center-to-example margin transfer, zero violations", s.passed(),
               std::to_string(s.trials) + " constructed instances, " +
                   std::to_string(s.failures) + " violations");
    }
    {
        auto t0 = std::chrono::steady_clock::now();
        double soft_sum = 0.0, base_sum = 0.0;
        double k5_recall[5];
        for (std::uint64_t s = 0; s < 5; ++s) {
            RunOutcome soft = run_benchmark(s + 1, st::LossKind::soft_triple, 5, 0.2);
            RunOutcome base = run_benchmark(s + 1, st::LossKind::softmax_norm, 1, 0.0);
            soft_sum += soft.recall1;
            base_sum += base.recall1;
            k5_recall[s] = soft.recall1;
        }
        double dt = seconds_since(t0);
        double gap = (soft_sum - base_sum) / 5.0 * 100.0;
        std::ostringstream d;
        d << "mean test R@1 " << soft_sum / 5.0 * 100.0 << "% (K=5) vs "
          << base_sum / 5.0 * 100.0 << "% (SoftMax), gap " << gap
          << " points over 5 seeds, took " << dt << "s";
        report(5, "SoftTriple beats normalized SoftMax by >= 3 points",
               gap >= 3.0 && dt < 120.0, d.str());

        // criterion 6 reuses the K=5 recalls
        auto t1 = std::chrono::steady_clock::now();
        double reg_centers = 0.0, noreg_centers = 0.0, k20_recall_sum = 0.0,
               k5_recall_sum = 0.0;
        for (std::uint64_t s = 0; s < 5; ++s) {
            RunOutcome reg = run_benchmark(s + 1, st::LossKind::soft_triple, 20, 0.2);
            RunOutcome noreg = run_benchmark(s + 1, st::LossKind::soft_triple, 20, 0.0);
            reg_centers += reg.mean_unique_centers / 5.0;
            noreg_centers += noreg.mean_unique_centers / 5.0;
            k20_recall_sum += reg.recall1 / 5.0;
            k5_recall_sum += k5_recall[s] / 5.0;
        }
        double dt6 = seconds_since(t1);
        bool fewer = reg_centers < noreg_centers;
        double drift = std::abs(k20_recall_sum - k5_recall_sum) * 100.0;
        std::ostringstream d6;
        d6 << "mean unique centers " << reg_centers << " (tau=0.2) vs " << noreg_centers
           << " (tau=0); R@1 drift K=20 vs K=5 " << drift << " points; took " << dt6
           << "s";
        report(6, "regularizer shrinks unique centers and keeps R@1 stable",
               fewer && drift <= 2.0, d6.str());
    }
    {
        st::Rng rng(404);
        std::vector<std::size_t> ks = {1, 2, 4, 8};
        bool ok = true;
        for (int t = 0; t < 50 && ok; ++t) {
            std::vector<st::UnitEmbedding> embs;
            std::vector<std::size_t> labels;
            for (int i = 0; i < 20; ++i) {
                embs.push_back(rng.random_unit(4));
                labels.push_back(rng.next_index(4));
            }
            auto fast = st::recall_at_k(embs, labels, ks);
            auto slow = brute_recall(embs, labels, ks);
            for (std::size_t k : ks) ok = ok && fast.at(k) == slow.at(k);
        }
        // NMI edge behavior
        ok = ok && std::abs(st::nmi({0, 0, 1, 1}, {1, 1, 0, 0}) - 1.0) <= 1e-12;
        ok = ok && std::abs(st::nmi({0, 0, 1, 1}, {0, 1, 0, 1})) <= 1e-12;
        std::vector<std::size_t> a, b;
        for (int i = 0; i < 40; ++i) {
            a.push_back(rng.next_index(4));
            b.push_back(rng.next_index(3));
        }
        ok = ok && std::abs(st::nmi(a, b) - st::nmi(b, a)) <= 1e-12;
        std::vector<std::size_t> renamed;
        for (std::size_t v : a) renamed.push_back(99 - v);
        ok = ok && std::abs(st::nmi(a, b) - st::nmi(renamed, b)) <= 1e-12;
        report(7, "recall@k matches brute force; NMI edge cases exact", ok,
               "50 random 20-point sets, k in {1,2,4,8}");
    }
    if (argc > 1) {
        criterion_determinism(argv[1]);
    } else {
        report(8, "determinism of train invocations", false,
               "CLI path not supplied as argv[1]");
    }

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                  : std::to_string(g_failures) + " CRITERIA FAILED")
              << '\n';
    return g_failures == 0 ? 0 : 1;
}
