// Text checkpoint for model parameters and the center bank.
//
// Layout:
//   softtriple-ckpt v1 D d C K hidden
//   section <name> <rows> <cols>
//   <rows lines of cols space-separated %.17g values>
//   ...
// hidden encodes the model kind: -1 identity, 0 affine, >0 mlp width.
// Values round-trip exactly at 17 significant digits.
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "softtriple/losses.hpp"
#include "softtriple/model.hpp"

namespace softtriple {

struct Checkpoint {
    EmbeddingModel model;
    CenterBank centers;
};

namespace detail {

inline void write_section(std::ostream& out, const std::string& name,
                          const double* data, std::size_t rows, std::size_t cols) {
    out << "section " << name << ' ' << rows << ' ' << cols << '\n';
    char buf[64];
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", data[r * cols + c]);
            if (c) out << ' ';
            out << buf;
        }
        out << '\n';
    }
}

inline void read_section(std::istream& in, const std::string& expect_name,
                         double* data, std::size_t rows, std::size_t cols) {
    std::string tag, name;
    std::size_t r = 0, c = 0;
    if (!(in >> tag >> name >> r >> c) || tag != "section" || name != expect_name ||
        r != rows || c != cols)
        throw std::runtime_error("checkpoint: bad or missing section '" + expect_name + "'");
    for (std::size_t i = 0; i < rows * cols; ++i)
        if (!(in >> data[i]))
            throw std::runtime_error("checkpoint: truncated section '" + expect_name + "'");
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot write " + path);
    const EmbeddingModel& m = ck.model;
    long hidden = m.kind == ModelKind::identity ? -1
                  : m.kind == ModelKind::affine ? 0
                                                : static_cast<long>(m.hidden_dim);
    out << "softtriple-ckpt v1 " << m.input_dim << ' ' << m.output_dim << ' '
        << ck.centers.num_classes << ' ' << ck.centers.centers_per_class << ' '
        << hidden << '\n';
    switch (m.kind) {
        case ModelKind::identity:
            break;
        case ModelKind::affine: {
            const double* W = m.params.data();
            detail::write_section(out, "W", W, m.output_dim, m.input_dim);
            detail::write_section(out, "b", W + m.output_dim * m.input_dim, 1, m.output_dim);
            break;
        }
        case ModelKind::mlp: {
            std::size_t H = m.hidden_dim;
            const double* p = m.params.data();
            detail::write_section(out, "W1", p, H, m.input_dim);
            detail::write_section(out, "b1", p + H * m.input_dim, 1, H);
            detail::write_section(out, "W2", p + H * m.input_dim + H, m.output_dim, H);
            detail::write_section(out, "b2",
                                  p + H * m.input_dim + H + m.output_dim * H, 1,
                                  m.output_dim);
            break;
        }
    }
    detail::write_section(out, "centers", ck.centers.data.data(),
                          ck.centers.num_classes * ck.centers.centers_per_class,
                          ck.centers.dim);
    if (!out)
        throw std::runtime_error("save_checkpoint: write failure on " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic, version;
    std::size_t D = 0, d = 0, C = 0, K = 0;
    long hidden = 0;
    if (!(in >> magic >> version >> D >> d >> C >> K >> hidden) ||
        magic != "softtriple-ckpt" || version != "v1")
        throw std::runtime_error("load_checkpoint: bad header in " + path);
    Checkpoint ck;
    EmbeddingModel& m = ck.model;
    m.input_dim = D;
    m.output_dim = d;
    if (hidden < 0) {
        m.kind = ModelKind::identity;
    } else if (hidden == 0) {
        m.kind = ModelKind::affine;
        m.params.assign(d * D + d, 0.0);
        double* W = m.params.data();
        detail::read_section(in, "W", W, d, D);
        detail::read_section(in, "b", W + d * D, 1, d);
    } else {
        m.kind = ModelKind::mlp;
        m.hidden_dim = static_cast<std::size_t>(hidden);
        std::size_t H = m.hidden_dim;
        m.params.assign(H * D + H + d * H + d, 0.0);
        double* p = m.params.data();
        detail::read_section(in, "W1", p, H, D);
        detail::read_section(in, "b1", p + H * D, 1, H);
        detail::read_section(in, "W2", p + H * D + H, d, H);
        detail::read_section(in, "b2", p + H * D + H + d * H, 1, d);
    }
    ck.centers = CenterBank(C, K, d);
    detail::read_section(in, "centers", ck.centers.data.data(), C * K, d);
    return ck;
}

}  // namespace softtriple
