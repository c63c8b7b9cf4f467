#pragma once

#include "sphseg/volume.hpp"

#include <span>
#include <utility>
#include <vector>

namespace sphseg {

struct LossWeights {
    double w_l2 = 0.1;
    double w_kl = 0.1;

    /// Variant trained with the KL coefficient lowered to 1e-4.
    static LossWeights bis_cartesian() { return LossWeights{0.1, 0.0001}; }
};

/// Diagonal Gaussian latent: per-dimension mean and standard deviation.
struct GaussianLatent {
    std::vector<double> mu;
    std::vector<double> sigma;

    void validate() const;
};

/// 1 - 2*sum(p*t) / (sum(p^2) + sum(t^2) + epsilon).
double soft_dice_loss(std::span<const double> pred_probs, std::span<const std::uint8_t> target,
                      double epsilon = 1e-7);
double soft_dice_loss(const Volume3D& pred_probs, const BinaryMask& target, double epsilon = 1e-7);

/// Mean squared element-wise difference.
double l2_loss(const Volume3D& recon, const Volume3D& input);
double l2_loss(std::span<const double> recon, std::span<const double> input);

/// KL penalty to the standard normal, normalized per latent dimension:
/// (1/N) * sum_i (mu_i^2 + sigma_i^2 - ln sigma_i^2 - 1). This is twice the
/// exact KL divergence, matching the usual VAE regularizer.
double kl_gaussian(const GaussianLatent& latent);

/// Analytic gradient of kl_gaussian: d/dmu_i = 2 mu_i / N,
/// d/dsigma_i = (2 sigma_i - 2 / sigma_i) / N.
std::pair<std::vector<double>, std::vector<double>> kl_gaussian_gradient(const GaussianLatent& latent);

/// L = L_dice + w_l2 * L_l2 + w_kl * L_kl.
double composite_loss(double l_dice, double l_l2, double l_kl, const LossWeights& weights = {});

} // namespace sphseg
