#include "charfac/ide_gan.hpp"

#include "charfac/rng.hpp"

#include <algorithm>
#include <cmath>

namespace charfac {

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

// Zero outside the clamp window, where the clamped value is constant.
double clamp_slope(double p) { return (p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon) ? 0.0 : 1.0; }

}  // namespace

LatentCode LatentCode::sample(Eigen::Index z_dim, Rng& rng) { return LatentCode(rng.normal_vector(z_dim)); }

GeneratorParams init_generator(const GanShape& shape, Rng& rng) {
    return {init_mlp({shape.z_dim, shape.generator_hidden, 2 * shape.dim}, rng, shape.leaky_slope)};
}

DiscriminatorParams init_discriminator(const GanShape& shape, Rng& rng) {
    return {init_mlp({2 * shape.dim, shape.discriminator_hidden[0], shape.discriminator_hidden[1], 1}, rng,
                     shape.leaky_slope)};
}

EmbeddingPair generator_forward(const LatentCode& z, const GeneratorParams& g, const EmbeddingStats& stats,
                                GeneratorTrace* trace) {
    if (z.dim() != g.z_dim()) throw MismatchError("generator_forward: latent width does not match generator");
    if (!z.values.allFinite()) throw Error("generator_forward: non-finite latent");
    const Eigen::Index d = g.dim();
    if (stats.dim() != d) throw MismatchError("generator_forward: statistics width does not match generator");
    GeneratorTrace local;
    GeneratorTrace& t = trace ? *trace : local;
    t.raw = mlp_forward(g.mlp, z.values, &t.mlp);
    const Vec v1 = adain(t.raw.head(d), stats.mean[0], stats.std[0], &t.adain[0]);
    const Vec v2 = adain(t.raw.tail(d), stats.mean[1], stats.std[1], &t.adain[1]);
    return EmbeddingPair(v1, v2);
}

PseudoIdentity generate_identity(const LatentCode& z, const GeneratorParams& g, const EmbeddingStats& stats) {
    PseudoIdentity id;
    id.embeddings = generator_forward(z, g, stats);
    id.latent = z;
    return id;
}

void generator_backward(const GeneratorParams& g, const EmbeddingStats& stats, const GeneratorTrace& trace,
                        const Vec& d_embeddings, MlpParams& grads) {
    const Eigen::Index d = g.dim();
    if (d_embeddings.size() != 2 * d) throw MismatchError("generator_backward: gradient width mismatch");
    Vec d_raw(2 * d);
    d_raw.head(d) = adain_backward(trace.adain[0], stats.std[0], d_embeddings.head(d));
    d_raw.tail(d) = adain_backward(trace.adain[1], stats.std[1], d_embeddings.tail(d));
    mlp_backward(g.mlp, trace.mlp, d_raw, &grads);
}

DiscriminatorOutput discriminator_forward(const EmbeddingPair& pair, const DiscriminatorParams& d, MlpTrace* trace) {
    if (pair.values.size() != d.mlp.input_width()) {
        throw MismatchError("discriminator_forward: pair width " + std::to_string(pair.values.size()) +
                            " does not match discriminator input " + std::to_string(d.mlp.input_width()));
    }
    if (!pair.values.allFinite()) throw Error("discriminator_forward: non-finite input");
    DiscriminatorOutput out;
    out.logit = mlp_forward(d.mlp, pair.values, trace)[0];
    out.probability = sigmoid(out.logit);
    return out;
}

Vec discriminator_backward(const DiscriminatorParams& d, const MlpTrace& trace, double d_logit, MlpParams* grads) {
    Vec g(1);
    g[0] = d_logit;
    return mlp_backward(d.mlp, trace, g, grads);
}

double sigmoid(double logit) {
    return logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
}

std::array<double, 2> discriminator_loss_logit_grad(double logit_real, double logit_fake) {
    return {-sigmoid(-logit_real), sigmoid(logit_fake)};
}

double generator_loss_logit_grad(double logit_fake, GeneratorLossForm form) {
    return form == GeneratorLossForm::NonSaturating ? -sigmoid(-logit_fake) : -sigmoid(logit_fake);
}

AdversarialLosses adversarial_losses(double d_real, double d_fake, GeneratorLossForm form) {
    if (!(d_real >= 0.0 && d_real <= 1.0 && d_fake >= 0.0 && d_fake <= 1.0)) {
        throw Error("adversarial_losses: probabilities must lie in [0, 1]");
    }
    const double r = clamp_probability(d_real);
    const double f = clamp_probability(d_fake);
    AdversarialLosses l;
    l.discriminator = -(std::log(r) + std::log1p(-f));
    l.generator = form == GeneratorLossForm::NonSaturating ? -std::log(f) : std::log1p(-f);
    return l;
}

std::array<double, 2> discriminator_loss_grad(double d_real, double d_fake) {
    const double r = clamp_probability(d_real);
    const double f = clamp_probability(d_fake);
    return {-clamp_slope(d_real) / r, clamp_slope(d_fake) / (1.0 - f)};
}

double generator_loss_grad(double d_fake, GeneratorLossForm form) {
    const double f = clamp_probability(d_fake);
    const double s = clamp_slope(d_fake);
    return form == GeneratorLossForm::NonSaturating ? -s / f : -s / (1.0 - f);
}

}  // namespace charfac
