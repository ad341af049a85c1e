#pragma once

#include "charfac/common.hpp"
#include "charfac/tokenizer.hpp"

#include <span>
#include <string>
#include <vector>

namespace charfac {

class BinaryWriter;
class BinaryReader;

enum class Activation { QuickGelu, Gelu };

struct TextEncoderConfig {
    int dim = 1024;
    int layers = 23;
    int heads = 16;
    int mlp_width = 4096;
    int max_positions = 77;
    bool final_layer_norm = true;
    Activation activation = Activation::Gelu;
    double layer_norm_eps = 1e-5;
};

struct LayerNormParams {
    Vec gamma;
    Vec beta;
};

struct EncoderBlock {
    LayerNormParams ln1;
    Mat wq, wk, wv, wo;  // (dim x dim), applied as x * W^T
    Vec bq, bk, bv, bo;
    LayerNormParams ln2;
    Mat w_up;  // (mlp_width x dim)
    Vec b_up;
    Mat w_down;  // (dim x mlp_width)
    Vec b_down;
};

/// Intermediates of one forward pass, consumed by TextEncoder::backward.
struct EncoderTrace {
    struct Block {
        Mat ln1_hat;
        Vec ln1_inv_std;
        Mat q, k, v;
        std::vector<Mat> probs;  // per head, (L x L)
        Mat ln2_hat;
        Vec ln2_inv_std;
        Mat pre_act;  // (L x mlp_width)
    };
    std::vector<Block> blocks;
    Mat final_hat;
    Vec final_inv_std;
};

/// Frozen causal text transformer (CLIP-style): token and position embedding
/// tables, pre-norm attention/MLP blocks and an optional final layer norm.
///
/// Parameters are never modified after construction. `backward` propagates
/// an output cotangent to the word-embedding inputs only.
class TextEncoder {
public:
    TextEncoder(TextEncoderConfig config, Mat token_embedding, Mat position_embedding,
                std::vector<EncoderBlock> blocks, LayerNormParams final_ln);

    const TextEncoderConfig& config() const { return config_; }
    int dim() const { return config_.dim; }
    Eigen::Index vocab_size() const { return token_embedding_.rows(); }

    /// Embedding-layer lookup (no transformer pass): one row per token.
    Mat lookup(std::span<const TokenId> ids) const;
    Vec lookup(TokenId id) const;

    /// Contextual embeddings of a word-embedding sequence (L x dim).
    Mat transform(const Mat& words) const;
    Mat transform(const Mat& words, EncoderTrace& trace) const;

    /// Gradient w.r.t. the word embeddings given the gradient w.r.t. the output.
    Mat backward(const EncoderTrace& trace, const Mat& d_output) const;

    /// SHA-256 over every parameter; stable across runs.
    std::string parameter_hash() const;

    void save(BinaryWriter& w) const;
    static TextEncoder load(BinaryReader& r);

private:
    Mat attention(const EncoderBlock& b, const Mat& x, EncoderTrace::Block* t) const;

    TextEncoderConfig config_;
    Mat token_embedding_;
    Mat position_embedding_;
    std::vector<EncoderBlock> blocks_;
    LayerNormParams final_ln_;
};

/// Random CLIP-shaped encoder for tests and desk-scale runs.
struct RandomEncoderSpec {
    TextEncoderConfig config;
    double token_scale = 1.0;       // std of token embedding entries
    double position_scale = 0.1;    // std of position embedding entries
    double attention_gain = 1.0;    // multiplies the fan-in std of q/k projections
    double value_gain = 1.0;        // multiplies the fan-in std of v/o projections
    double mlp_gain = 1.0;
};
TextEncoder make_random_encoder(const RandomEncoderSpec& spec, Eigen::Index vocab_size, std::uint64_t seed);

}  // namespace charfac
