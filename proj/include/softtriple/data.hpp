// Synthetic multi-cluster dataset generation and CSV ingestion with
// deterministic disjoint-class splits.
#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "softtriple/linalg.hpp"

namespace softtriple {

struct ClusterSpec {
    std::size_t num_classes = 20;
    std::size_t clusters_per_class = 3;
    std::size_t points_per_cluster = 34;
    std::size_t input_dim = 32;
    double placement_scale = 1.0;
    // Absolute per-dimension noise; defaults assume placement_scale = 1.
    // In D=32 the expected noise norm is stddev * sqrt(D) ~ 0.9, comparable to
    // the unit placement scale, which gives mildly overlapping clusters.
    double stddev = 0.16;
    std::uint64_t seed = 0;
};

enum class Split : std::uint8_t { train, test };

struct LabeledDataset {
    std::vector<Vector> features;
    std::vector<std::size_t> labels;
    std::vector<Split> split;                 // empty until split_by_class
    std::vector<std::size_t> cluster_ids;     // synthetic ground truth, optional
    std::size_t num_classes = 0;

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }
};

inline LabeledDataset generate_synthetic(const ClusterSpec& spec) {
    if (spec.num_classes == 0 || spec.clusters_per_class == 0 ||
        spec.points_per_cluster == 0 || spec.input_dim == 0 || !(spec.stddev > 0.0))
        throw std::invalid_argument("generate_synthetic: all spec fields must be positive");
    LabeledDataset ds;
    ds.num_classes = spec.num_classes;
    Rng place = Rng::split(spec.seed, 0);
    Rng noise = Rng::split(spec.seed, 1);
    std::size_t global_cluster = 0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t g = 0; g < spec.clusters_per_class; ++g, ++global_cluster) {
            Vector mean = scaled(place.random_unit(spec.input_dim).values,
                                 spec.placement_scale);
            for (std::size_t p = 0; p < spec.points_per_cluster; ++p) {
                Vector x(mean);
                for (double& v : x) v += spec.stddev * noise.normal();
                ds.features.push_back(std::move(x));
                ds.labels.push_back(c);
                ds.cluster_ids.push_back(global_cluster);
            }
        }
    }
    return ds;
}

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) {
        // trim surrounding whitespace
        std::size_t a = tok.find_first_not_of(" \t\r");
        std::size_t b = tok.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : tok.substr(a, b - a + 1));
    }
    return out;
}

}  // namespace detail

// Rows are `label,feat_1,...,feat_D`. Labels are re-indexed densely to
// [0, C) in first-appearance order. An optional header line is detected by
// a non-numeric first field.
inline LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_csv: cannot open " + path);
    LabeledDataset ds;
    std::map<long long, std::size_t> relabel;
    std::vector<long long> raw_labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t expect_dim = 0;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto toks = detail::split_csv_line(line);
        if (toks.empty()) continue;
        double probe;
        if (first_data_row && !detail::parse_double(toks[0], probe))
            continue;  // header
        if (toks.size() < 2)
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                     ": expected label plus at least one feature");
        if (first_data_row) {
            expect_dim = toks.size() - 1;
            first_data_row = false;
        } else if (toks.size() - 1 != expect_dim) {
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                     ": ragged row (" + std::to_string(toks.size() - 1) +
                                     " features, expected " + std::to_string(expect_dim) + ")");
        }
        double lab;
        if (!detail::parse_double(toks[0], lab))
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                     ": non-numeric label '" + toks[0] + "'");
        Vector feat(expect_dim);
        for (std::size_t i = 0; i < expect_dim; ++i) {
            if (!detail::parse_double(toks[i + 1], feat[i]))
                throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                         ": non-numeric field '" + toks[i + 1] + "'");
        }
        raw_labels.push_back(static_cast<long long>(lab));
        ds.features.push_back(std::move(feat));
    }
    if (ds.features.empty())
        throw std::runtime_error("load_csv: " + path + " has no data rows");
    for (long long raw : raw_labels) {
        auto it = relabel.find(raw);
        if (it == relabel.end())
            it = relabel.emplace(raw, relabel.size()).first;
        ds.labels.push_back(it->second);
    }
    ds.num_classes = relabel.size();
    return ds;
}

inline void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_csv: cannot write " + path);
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (double v : ds.features[i]) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("save_csv: write failure on " + path);
}

inline void save_cluster_ids(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_cluster_ids: cannot write " + path);
    for (std::size_t id : ds.cluster_ids) out << id << '\n';
}

// Partition classes (not examples): train and test class sets are disjoint,
// so evaluation on the test side is zero-shot.
inline LabeledDataset split_by_class(LabeledDataset ds, double train_fraction,
                                     std::uint64_t seed) {
    if (ds.num_classes < 2)
        throw std::invalid_argument("split_by_class: needs C >= 2");
    std::vector<std::size_t> order(ds.num_classes);
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    Rng rng = Rng::split(seed, 7);
    rng.shuffle(order);
    std::size_t n_train = static_cast<std::size_t>(train_fraction *
                                                   static_cast<double>(ds.num_classes));
    if (n_train == 0 || n_train == ds.num_classes)
        throw std::invalid_argument("split_by_class: fraction leaves one side empty");
    std::vector<bool> is_train(ds.num_classes, false);
    for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
    ds.split.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        ds.split[i] = is_train[ds.labels[i]] ? Split::train : Split::test;
    return ds;
}

// View of one side of a split, with labels re-indexed densely.
struct DatasetView {
    std::vector<Vector> features;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;
};

inline DatasetView select_split(const LabeledDataset& ds, Split side) {
    if (ds.split.size() != ds.size())
        throw std::invalid_argument("select_split: dataset has no split metadata");
    DatasetView v;
    std::map<std::size_t, std::size_t> relabel;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.split[i] != side) continue;
        auto it = relabel.find(ds.labels[i]);
        if (it == relabel.end())
            it = relabel.emplace(ds.labels[i], relabel.size()).first;
        v.features.push_back(ds.features[i]);
        v.labels.push_back(it->second);
    }
    v.num_classes = relabel.size();
    return v;
}

}  // namespace softtriple
