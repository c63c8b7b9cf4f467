#include "sphseg/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sphseg {

void GaussianLatent::validate() const {
    if (mu.size() != sigma.size())
        throw std::invalid_argument("latent mu and sigma must have equal length");
    if (mu.empty())
        throw std::invalid_argument("latent must have at least one dimension");
    for (double s : sigma)
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("latent sigma must be strictly positive and finite");
}

double soft_dice_loss(std::span<const double> pred_probs, std::span<const std::uint8_t> target,
                      double epsilon) {
    if (pred_probs.size() != target.size())
        throw std::invalid_argument("soft_dice_loss: dims do not match");
    double inter = 0.0, sum_p2 = 0.0, sum_t2 = 0.0;
    for (std::size_t n = 0; n < pred_probs.size(); ++n) {
        const double p = pred_probs[n];
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("prediction probability outside [0, 1]");
        const double t = target[n] ? 1.0 : 0.0;
        inter += p * t;
        sum_p2 += p * p;
        sum_t2 += t;
    }
    return 1.0 - 2.0 * inter / (sum_p2 + sum_t2 + epsilon);
}

double soft_dice_loss(const Volume3D& pred_probs, const BinaryMask& target, double epsilon) {
    if (!(pred_probs.dims() == target.dims()))
        throw std::invalid_argument("soft_dice_loss: dims do not match");
    return soft_dice_loss(pred_probs.data(), target.values(), epsilon);
}

double l2_loss(std::span<const double> recon, std::span<const double> input) {
    if (recon.size() != input.size() || recon.empty())
        throw std::invalid_argument("l2_loss: dims do not match");
    double acc = 0.0;
    for (std::size_t n = 0; n < recon.size(); ++n) {
        const double d = recon[n] - input[n];
        acc += d * d;
    }
    return acc / double(recon.size());
}

double l2_loss(const Volume3D& recon, const Volume3D& input) {
    if (!(recon.dims() == input.dims()))
        throw std::invalid_argument("l2_loss: dims do not match");
    return l2_loss(recon.data(), input.data());
}

double kl_gaussian(const GaussianLatent& latent) {
    latent.validate();
    const std::size_t n = latent.mu.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = latent.mu[i];
        const double s2 = latent.sigma[i] * latent.sigma[i];
        acc += mu * mu + s2 - std::log(s2) - 1.0;
    }
    return acc / double(n);
}

std::pair<std::vector<double>, std::vector<double>> kl_gaussian_gradient(const GaussianLatent& latent) {
    latent.validate();
    const std::size_t n = latent.mu.size();
    std::vector<double> dmu(n), dsigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        dmu[i] = 2.0 * latent.mu[i] / double(n);
        dsigma[i] = (2.0 * latent.sigma[i] - 2.0 / latent.sigma[i]) / double(n);
    }
    return {std::move(dmu), std::move(dsigma)};
}

double composite_loss(double l_dice, double l_l2, double l_kl, const LossWeights& weights) {
    if (weights.w_l2 < 0.0 || weights.w_kl < 0.0)
        throw std::invalid_argument("loss weights must be non-negative");
    return l_dice + weights.w_l2 * l_l2 + weights.w_kl * l_kl;
}

} // namespace sphseg
