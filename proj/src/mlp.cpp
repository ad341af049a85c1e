#include "charfac/mlp.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/rng.hpp"

#include <cmath>

namespace charfac {

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool MlpParams::all_finite() const {
    for (const auto& l : layers)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    z.leaky_slope = leaky_slope;
    for (const auto& l : layers) z.layers.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
    return z;
}

bool MlpParams::operator==(const MlpParams& o) const {
    if (leaky_slope != o.leaky_slope || layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = o.layers[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.weight != b.weight ||
            a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

void MlpParams::save(BinaryWriter& w) const {
    w.f64(leaky_slope);
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        w.mat(l.weight);
        w.vec(l.bias);
    }
}

MlpParams MlpParams::load(BinaryReader& r) {
    MlpParams p;
    p.leaky_slope = r.f64();
    const auto n = r.u32();
    if (n == 0 || n > 64) throw FormatError("mlp: layer count out of range");
    for (std::uint32_t i = 0; i < n; ++i) {
        Linear l;
        l.weight = r.mat();
        l.bias = r.vec();
        if (l.bias.size() != l.weight.rows()) throw FormatError("mlp: bias does not match weight rows");
        if (i > 0 && l.weight.cols() != p.layers.back().weight.rows()) throw FormatError("mlp: layer widths do not chain");
        p.layers.push_back(std::move(l));
    }
    return p;
}

MlpParams init_mlp(const std::vector<int>& widths, Rng& rng, double leaky_slope) {
    if (widths.size() < 2) throw Error("init_mlp: need at least input and output widths");
    MlpParams p;
    p.leaky_slope = leaky_slope;
    const double gain = std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const int in = widths[i];
        const int out = widths[i + 1];
        if (in <= 0 || out <= 0) throw Error("init_mlp: widths must be positive");
        const bool last = i + 2 == widths.size();
        const double std = (last ? 1.0 : gain) / std::sqrt(static_cast<double>(in));
        Linear l{Mat(out, in), Vec::Zero(out)};
        for (Eigen::Index c = 0; c < in; ++c)
            for (Eigen::Index r = 0; r < out; ++r) l.weight(r, c) = std * rng.normal();
        p.layers.push_back(std::move(l));
    }
    return p;
}

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpTrace* trace) {
    if (x.size() != p.input_width()) throw MismatchError("mlp_forward: input width mismatch");
    if (trace) {
        trace->inputs.clear();
        trace->pre_acts.clear();
    }
    Vec h = x;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        Vec pre = l.weight * h + l.bias;
        if (trace) {
            trace->inputs.push_back(h);
            trace->pre_acts.push_back(pre);
        }
        if (i + 1 < p.layers.size()) {
            h = pre.unaryExpr([s = p.leaky_slope](double u) { return u > 0 ? u : s * u; });
        } else {
            h = std::move(pre);
        }
    }
    return h;
}

Vec mlp_backward(const MlpParams& p, const MlpTrace& trace, const Vec& d_out, MlpParams* grads) {
    if (trace.inputs.size() != p.layers.size()) throw Error("mlp_backward: trace does not match network");
    Vec g = d_out;
    for (std::size_t i = p.layers.size(); i-- > 0;) {
        const auto& l = p.layers[i];
        if (i + 1 < p.layers.size()) {
            const Vec& pre = trace.pre_acts[i];
            for (Eigen::Index k = 0; k < g.size(); ++k) g[k] *= pre[k] > 0 ? 1.0 : p.leaky_slope;
        }
        if (grads) {
            grads->layers[i].weight.noalias() += g * trace.inputs[i].transpose();
            grads->layers[i].bias += g;
        }
        g = l.weight.transpose() * g;
    }
    return g;
}

}  // namespace charfac
