#pragma once

#include "charfac/adain.hpp"
#include "charfac/common.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/mlp.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace charfac {

class Rng;

/// Latent input of the generator.
struct LatentCode {
    Vec values;

    LatentCode() = default;
    explicit LatentCode(Vec v) : values(std::move(v)) {}
    Eigen::Index dim() const { return values.size(); }
    bool operator==(const LatentCode& o) const { return values.size() == o.values.size() && values == o.values; }

    static LatentCode sample(Eigen::Index z_dim, Rng& rng);
};

struct IdentityMetadata {
    std::string base_model_id;
    std::string checkpoint_id;
    std::string name_list_hash;
    std::int64_t created_unix = 0;
};

/// A generated pair of word embeddings for one new character.
struct PseudoIdentity {
    EmbeddingPair embeddings;
    LatentCode latent;
    IdentityMetadata metadata;
};

struct GanShape {
    int z_dim = 64;
    int dim = 1024;                       // word-embedding width d
    int generator_hidden = 2048;          // z -> hidden -> 2d
    std::array<int, 2> discriminator_hidden = {512, 256};  // 2d -> h1 -> h2 -> 1
    double leaky_slope = 0.2;
};

/// Two affine layers z -> hidden -> 2d followed by AdaIN per name slot.
struct GeneratorParams {
    MlpParams mlp;

    Eigen::Index z_dim() const { return mlp.input_width(); }
    Eigen::Index dim() const { return mlp.output_width() / 2; }
};

/// Three affine layers 2d -> h1 -> h2 -> 1, squashed by a logistic sigmoid.
struct DiscriminatorParams {
    MlpParams mlp;

    Eigen::Index dim() const { return mlp.input_width() / 2; }
};

GeneratorParams init_generator(const GanShape& shape, Rng& rng);
DiscriminatorParams init_discriminator(const GanShape& shape, Rng& rng);

struct GeneratorTrace {
    MlpTrace mlp;
    Vec raw;  // [v'1; v'2]
    std::array<AdainTrace, 2> adain;
};

/// MLP output [v'1, v'2], then AdaIN with the bank statistics per slot.
EmbeddingPair generator_forward(const LatentCode& z, const GeneratorParams& g, const EmbeddingStats& stats,
                                GeneratorTrace* trace = nullptr);

PseudoIdentity generate_identity(const LatentCode& z, const GeneratorParams& g, const EmbeddingStats& stats);

/// Back-propagates d(loss)/d(embeddings) into generator parameter gradients.
void generator_backward(const GeneratorParams& g, const EmbeddingStats& stats, const GeneratorTrace& trace,
                        const Vec& d_embeddings, MlpParams& grads);

struct DiscriminatorOutput {
    double logit = 0.0;
    double probability = 0.5;
};

DiscriminatorOutput discriminator_forward(const EmbeddingPair& pair, const DiscriminatorParams& d,
                                          MlpTrace* trace = nullptr);

/// Gradient of a loss w.r.t. the discriminator input given d(loss)/d(logit).
Vec discriminator_backward(const DiscriminatorParams& d, const MlpTrace& trace, double d_logit, MlpParams* grads);

enum class GeneratorLossForm {
    NonSaturating,  // -log D(G(z))
    Minimax,        // +log(1 - D(G(z)))
};

inline constexpr double kProbabilityEpsilon = 1e-7;

struct AdversarialLosses {
    double discriminator = 0.0;
    double generator = 0.0;
};

/// loss_D = -[log d_real + log(1 - d_fake)]; loss_G per `form`. Inputs are
/// clamped to [eps, 1 - eps] before the logs.
AdversarialLosses adversarial_losses(double d_real, double d_fake,
                                     GeneratorLossForm form = GeneratorLossForm::NonSaturating);

/// d loss_D / d d_real and d loss_D / d d_fake.
std::array<double, 2> discriminator_loss_grad(double d_real, double d_fake);
/// d loss_G / d d_fake.
double generator_loss_grad(double d_fake, GeneratorLossForm form);

/// Logit-space derivatives used for back-propagation. They equal the
/// probability-space derivatives times p(1 - p) and stay informative when
/// the probability saturates past the clamp.
std::array<double, 2> discriminator_loss_logit_grad(double logit_real, double logit_fake);
double generator_loss_logit_grad(double logit_fake, GeneratorLossForm form);

/// Numerically stable logistic function.
double sigmoid(double logit);

}  // namespace charfac
