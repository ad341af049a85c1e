#include "charfac/text_encoder.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"
#include "charfac/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace charfac {

namespace {

constexpr std::uint32_t kEncoderVersion = 1;

Mat layer_norm(const Mat& x, const LayerNormParams& p, double eps, Mat* hat_out, Vec* inv_std_out) {
    const Eigen::Index n = x.cols();
    Mat hat(x.rows(), n);
    Vec inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        hat.row(r) = (x.row(r).array() - mean) * inv_std[r];
    }
    Mat y = (hat.array().rowwise() * p.gamma.transpose().array()).rowwise() + p.beta.transpose().array();
    if (hat_out) *hat_out = std::move(hat);
    if (inv_std_out) *inv_std_out = std::move(inv_std);
    return y;
}

Mat layer_norm_backward(const Mat& dy, const Mat& hat, const Vec& inv_std, const LayerNormParams& p) {
    const double n = static_cast<double>(hat.cols());
    Mat dhat = dy.array().rowwise() * p.gamma.transpose().array();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dhat.row(r).sum() / n;
        const double m2 = dhat.row(r).dot(hat.row(r)) / n;
        dx.row(r) = inv_std[r] * (dhat.row(r).array() - m1 - hat.row(r).array() * m2);
    }
    return dx;
}

Mat affine(const Mat& x, const Mat& w, const Vec& b) {
    Mat y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(Activation a, double x) {
    switch (a) {
        case Activation::QuickGelu: return x * sigmoid(1.702 * x);
        case Activation::Gelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
    }
    return x;
}

double activate_grad(Activation a, double x) {
    switch (a) {
        case Activation::QuickGelu: {
            const double s = sigmoid(1.702 * x);
            return s + 1.702 * x * s * (1.0 - s);
        }
        case Activation::Gelu: {
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * pdf;
        }
    }
    return 1.0;
}

void write_ln(BinaryWriter& w, const LayerNormParams& p) {
    w.vec(p.gamma);
    w.vec(p.beta);
}

LayerNormParams read_ln(BinaryReader& r) {
    LayerNormParams p;
    p.gamma = r.vec();
    p.beta = r.vec();
    return p;
}

}  // namespace

TextEncoder::TextEncoder(TextEncoderConfig config, Mat token_embedding, Mat position_embedding,
                         std::vector<EncoderBlock> blocks, LayerNormParams final_ln)
    : config_(config),
      token_embedding_(std::move(token_embedding)),
      position_embedding_(std::move(position_embedding)),
      blocks_(std::move(blocks)),
      final_ln_(std::move(final_ln)) {
    const Eigen::Index d = config_.dim;
    if (d <= 0 || config_.heads <= 0 || d % config_.heads != 0) {
        throw FormatError("TextEncoder: dim must be a positive multiple of heads");
    }
    if (token_embedding_.cols() != d || position_embedding_.cols() != d) {
        throw MismatchError("TextEncoder: embedding tables do not match dim");
    }
    if (position_embedding_.rows() != config_.max_positions) {
        throw MismatchError("TextEncoder: position table does not match max_positions");
    }
    if (static_cast<int>(blocks_.size()) != config_.layers) {
        throw MismatchError("TextEncoder: block count does not match layers");
    }
    for (const auto& b : blocks_) {
        if (b.wq.rows() != d || b.wq.cols() != d || b.wo.rows() != d || b.w_up.cols() != d ||
            b.w_up.rows() != config_.mlp_width || b.w_down.rows() != d) {
            throw MismatchError("TextEncoder: block weight shape mismatch");
        }
    }
    if (config_.final_layer_norm && final_ln_.gamma.size() != d) {
        throw MismatchError("TextEncoder: final layer norm shape mismatch");
    }
}

Mat TextEncoder::lookup(std::span<const TokenId> ids) const {
    Mat out(static_cast<Eigen::Index>(ids.size()), config_.dim);
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = lookup(ids[i]).transpose();
    return out;
}

Vec TextEncoder::lookup(TokenId id) const {
    if (id < 0 || id >= token_embedding_.rows()) throw Error("TextEncoder: token id out of range");
    return token_embedding_.row(id).transpose();
}

Mat TextEncoder::attention(const EncoderBlock& b, const Mat& x, EncoderTrace::Block* t) const {
    const Eigen::Index len = x.rows();
    const int heads = config_.heads;
    const Eigen::Index dh = config_.dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat q = affine(x, b.wq, b.bq);
    Mat k = affine(x, b.wk, b.bk);
    Mat v = affine(x, b.wv, b.bv);
    Mat concat(len, config_.dim);
    for (int h = 0; h < heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        Mat scores = (qh * kh.transpose()) * scale;
        Mat probs = Mat::Zero(len, len);
        for (Eigen::Index i = 0; i < len; ++i) {
            // Causal: position i sees positions 0..i.
            const double mx = scores.row(i).head(i + 1).maxCoeff();
            double z = 0.0;
            for (Eigen::Index j = 0; j <= i; ++j) {
                probs(i, j) = std::exp(scores(i, j) - mx);
                z += probs(i, j);
            }
            probs.row(i).head(i + 1) /= z;
        }
        concat.middleCols(h * dh, dh) = probs * v.middleCols(h * dh, dh);
        if (t) t->probs.push_back(std::move(probs));
    }
    if (t) {
        t->q = std::move(q);
        t->k = std::move(k);
        t->v = std::move(v);
    }
    return affine(concat, b.wo, b.bo);
}

Mat TextEncoder::transform(const Mat& words) const {
    EncoderTrace unused;
    return transform(words, unused);
}

Mat TextEncoder::transform(const Mat& words, EncoderTrace& trace) const {
    const Eigen::Index len = words.rows();
    if (words.cols() != config_.dim) throw MismatchError("TextEncoder::transform: width does not match dim");
    if (len == 0 || len > config_.max_positions) {
        throw Error("TextEncoder::transform: sequence length " + std::to_string(len) + " outside [1, " +
                    std::to_string(config_.max_positions) + "]");
    }
    trace = EncoderTrace{};
    trace.blocks.resize(blocks_.size());
    Mat x = words + position_embedding_.topRows(len);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        auto& t = trace.blocks[i];
        const Mat a_in = layer_norm(x, b.ln1, config_.layer_norm_eps, &t.ln1_hat, &t.ln1_inv_std);
        x += attention(b, a_in, &t);
        const Mat m_in = layer_norm(x, b.ln2, config_.layer_norm_eps, &t.ln2_hat, &t.ln2_inv_std);
        t.pre_act = affine(m_in, b.w_up, b.b_up);
        const Mat act = t.pre_act.unaryExpr([a = config_.activation](double u) { return activate(a, u); });
        x += affine(act, b.w_down, b.b_down);
    }
    if (config_.final_layer_norm) {
        return layer_norm(x, final_ln_, config_.layer_norm_eps, &trace.final_hat, &trace.final_inv_std);
    }
    return x;
}

Mat TextEncoder::backward(const EncoderTrace& trace, const Mat& d_output) const {
    if (trace.blocks.size() != blocks_.size()) throw Error("TextEncoder::backward: trace from another encoder");
    Mat dx = config_.final_layer_norm
                 ? layer_norm_backward(d_output, trace.final_hat, trace.final_inv_std, final_ln_)
                 : d_output;
    const int heads = config_.heads;
    const Eigen::Index dh = config_.dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        const auto& b = blocks_[i];
        const auto& t = trace.blocks[i];
        // MLP branch: x += down(act(up(ln2(x)))).
        Mat d_act = dx * b.w_down;
        Mat d_pre = d_act.array() * t.pre_act.unaryExpr([a = config_.activation](double u) {
            return activate_grad(a, u);
        }).array();
        Mat d_m_in = d_pre * b.w_up;
        dx += layer_norm_backward(d_m_in, t.ln2_hat, t.ln2_inv_std, b.ln2);

        // Attention branch: x += attn(ln1(x)).
        Mat d_concat = dx * b.wo;
        Mat dq(dx.rows(), config_.dim), dk(dx.rows(), config_.dim), dv(dx.rows(), config_.dim);
        for (int h = 0; h < heads; ++h) {
            const Mat& probs = t.probs[static_cast<std::size_t>(h)];
            const auto d_oh = d_concat.middleCols(h * dh, dh);
            Mat d_probs = d_oh * t.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = probs.transpose() * d_oh;
            Mat d_scores = probs.array() * (d_probs.colwise() - (probs.array() * d_probs.array()).rowwise().sum().matrix()).array();
            dq.middleCols(h * dh, dh) = d_scores * t.k.middleCols(h * dh, dh) * scale;
            dk.middleCols(h * dh, dh) = d_scores.transpose() * t.q.middleCols(h * dh, dh) * scale;
        }
        Mat d_a_in = dq * b.wq + dk * b.wk + dv * b.wv;
        dx += layer_norm_backward(d_a_in, t.ln1_hat, t.ln1_inv_std, b.ln1);
    }
    return dx;
}

std::string TextEncoder::parameter_hash() const {
    Sha256 h;
    h.update(token_embedding_).update(position_embedding_);
    for (const auto& b : blocks_) {
        h.update(b.ln1.gamma).update(b.ln1.beta);
        h.update(b.wq).update(b.wk).update(b.wv).update(b.wo);
        h.update(b.bq).update(b.bk).update(b.bv).update(b.bo);
        h.update(b.ln2.gamma).update(b.ln2.beta);
        h.update(b.w_up).update(b.b_up).update(b.w_down).update(b.b_down);
    }
    if (config_.final_layer_norm) h.update(final_ln_.gamma).update(final_ln_.beta);
    return h.hex_digest();
}

void TextEncoder::save(BinaryWriter& w) const {
    w.magic("CFTE");
    w.u32(kEncoderVersion);
    w.u32(static_cast<std::uint32_t>(config_.dim));
    w.u32(static_cast<std::uint32_t>(config_.layers));
    w.u32(static_cast<std::uint32_t>(config_.heads));
    w.u32(static_cast<std::uint32_t>(config_.mlp_width));
    w.u32(static_cast<std::uint32_t>(config_.max_positions));
    w.u32(config_.final_layer_norm ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(config_.activation));
    w.f64(config_.layer_norm_eps);
    w.mat(token_embedding_);
    w.mat(position_embedding_);
    for (const auto& b : blocks_) {
        write_ln(w, b.ln1);
        w.mat(b.wq); w.mat(b.wk); w.mat(b.wv); w.mat(b.wo);
        w.vec(b.bq); w.vec(b.bk); w.vec(b.bv); w.vec(b.bo);
        write_ln(w, b.ln2);
        w.mat(b.w_up); w.vec(b.b_up); w.mat(b.w_down); w.vec(b.b_down);
    }
    if (config_.final_layer_norm) write_ln(w, final_ln_);
}

TextEncoder TextEncoder::load(BinaryReader& r) {
    r.expect_magic("CFTE");
    if (const auto v = r.u32(); v != kEncoderVersion) {
        throw FormatError("text encoder: unsupported version " + std::to_string(v));
    }
    TextEncoderConfig c;
    c.dim = static_cast<int>(r.u32());
    c.layers = static_cast<int>(r.u32());
    c.heads = static_cast<int>(r.u32());
    c.mlp_width = static_cast<int>(r.u32());
    c.max_positions = static_cast<int>(r.u32());
    c.final_layer_norm = r.u32() != 0;
    const auto act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::Gelu)) throw FormatError("text encoder: unknown activation");
    c.activation = static_cast<Activation>(act);
    c.layer_norm_eps = r.f64();
    Mat tok = r.mat();
    Mat pos = r.mat();
    std::vector<EncoderBlock> blocks(static_cast<std::size_t>(c.layers));
    for (auto& b : blocks) {
        b.ln1 = read_ln(r);
        b.wq = r.mat(); b.wk = r.mat(); b.wv = r.mat(); b.wo = r.mat();
        b.bq = r.vec(); b.bk = r.vec(); b.bv = r.vec(); b.bo = r.vec();
        b.ln2 = read_ln(r);
        b.w_up = r.mat(); b.b_up = r.vec(); b.w_down = r.mat(); b.b_down = r.vec();
    }
    LayerNormParams fin;
    if (c.final_layer_norm) fin = read_ln(r);
    return TextEncoder(c, std::move(tok), std::move(pos), std::move(blocks), std::move(fin));
}

TextEncoder make_random_encoder(const RandomEncoderSpec& spec, Eigen::Index vocab_size, std::uint64_t seed) {
    const auto& c = spec.config;
    Rng rng(seed);
    auto gaussian = [&rng](Eigen::Index r, Eigen::Index cols, double std) {
        Mat m(r, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = std * rng.normal();
        return m;
    };
    const double fan_d = 1.0 / std::sqrt(static_cast<double>(c.dim));
    const double fan_m = 1.0 / std::sqrt(static_cast<double>(c.mlp_width));
    Mat tok = gaussian(vocab_size, c.dim, spec.token_scale);
    Mat pos = gaussian(c.max_positions, c.dim, spec.position_scale);
    std::vector<EncoderBlock> blocks(static_cast<std::size_t>(c.layers));
    for (auto& b : blocks) {
        b.ln1 = {Vec::Ones(c.dim), Vec::Zero(c.dim)};
        b.ln2 = {Vec::Ones(c.dim), Vec::Zero(c.dim)};
        b.wq = gaussian(c.dim, c.dim, spec.attention_gain * fan_d);
        b.wk = gaussian(c.dim, c.dim, spec.attention_gain * fan_d);
        b.wv = gaussian(c.dim, c.dim, spec.value_gain * fan_d);
        b.wo = gaussian(c.dim, c.dim, spec.value_gain * fan_d);
        b.bq = Vec::Zero(c.dim);
        b.bk = Vec::Zero(c.dim);
        b.bv = Vec::Zero(c.dim);
        b.bo = Vec::Zero(c.dim);
        b.w_up = gaussian(c.mlp_width, c.dim, spec.mlp_gain * fan_d);
        b.b_up = Vec::Zero(c.mlp_width);
        b.w_down = gaussian(c.dim, c.mlp_width, spec.mlp_gain * fan_m);
        b.b_down = Vec::Zero(c.dim);
    }
    LayerNormParams fin{Vec::Ones(c.dim), Vec::Zero(c.dim)};
    return TextEncoder(c, std::move(tok), std::move(pos), std::move(blocks), std::move(fin));
}

}  // namespace charfac
