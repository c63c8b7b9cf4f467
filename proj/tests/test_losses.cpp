#include "sphseg/losses.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

using namespace sphseg;

TEST_SUITE_BEGIN("losses");

TEST_CASE("soft dice loss endpoints") {
    const std::vector<double> perfect{1, 0, 1, 0};
    const std::vector<std::uint8_t> target{1, 0, 1, 0};
    CHECK(soft_dice_loss(perfect, target) == doctest::Approx(0.0).epsilon(1e-6));

    const std::vector<double> zeros{0, 0, 0, 0};
    CHECK(soft_dice_loss(zeros, target) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("soft dice hand arithmetic") {
    const std::vector<double> p{0.5, 0.5};
    const std::vector<std::uint8_t> t{1, 0};
    // 1 - 2*0.5 / (0.5 + 1 + eps)
    CHECK(soft_dice_loss(p, t) == doctest::Approx(1.0 - 1.0 / 1.5).epsilon(1e-6));
}

TEST_CASE("soft dice rejects probabilities outside [0,1]") {
    CHECK_THROWS_AS(soft_dice_loss(std::vector<double>{1.2}, std::vector<std::uint8_t>{1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(soft_dice_loss(std::vector<double>{-0.1}, std::vector<std::uint8_t>{0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(soft_dice_loss(std::vector<double>{0.5, 0.5}, std::vector<std::uint8_t>{1}),
                    std::invalid_argument);
}

TEST_CASE("soft dice decreases along the path toward the target") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> target(64);
    std::vector<double> start(64);
    for (std::size_t i = 0; i < 64; ++i) {
        target[i] = u(rng) < 0.4 ? 1 : 0;
        start[i] = u(rng);
    }
    double prev = 2.0;
    for (int s = 0; s <= 4; ++s) {
        const double alpha = double(s) / 4.0;
        std::vector<double> p(64);
        for (std::size_t i = 0; i < 64; ++i)
            p[i] = (1.0 - alpha) * start[i] + alpha * double(target[i]);
        const double loss = soft_dice_loss(p, target);
        CHECK(loss <= prev + 1e-12);
        CHECK(loss >= 0.0 - 1e-9);
        CHECK(loss <= 1.0 + 1e-6);
        prev = loss;
    }
}

TEST_CASE("l2 loss") {
    Volume3D a(Dims3{2, 2, 2}, Spacing3{1, 1, 1}, 3.0);
    Volume3D b(Dims3{2, 2, 2}, Spacing3{1, 1, 1}, 5.0);
    CHECK(l2_loss(a, a) == 0.0);
    CHECK(l2_loss(a, b) == doctest::Approx(4.0));

    std::mt19937_64 rng(2);
    const Volume3D x = oracle::random_volume(Dims3{2, 2, 2}, Spacing3{1, 1, 1}, rng);
    const Volume3D y = oracle::random_volume(Dims3{2, 2, 2}, Spacing3{1, 1, 1}, rng);
    double acc = 0.0;
    for (std::size_t n = 0; n < 8; ++n)
        acc += (x.data()[n] - y.data()[n]) * (x.data()[n] - y.data()[n]);
    CHECK(l2_loss(x, y) == doctest::Approx(acc / 8.0).epsilon(1e-12));

    CHECK_THROWS_AS(l2_loss(a, Volume3D(Dims3{2, 2, 1}, Spacing3{1, 1, 1}, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("kl of the standard normal is zero") {
    CHECK(kl_gaussian(GaussianLatent{{0, 0, 0}, {1, 1, 1}}) == doctest::Approx(0.0));
    CHECK(kl_gaussian(GaussianLatent{{0}, {1}}) == 0.0);
}

TEST_CASE("kl formula value and quadrature oracle") {
    // mu=1, sigma=1, N=1: formula gives 1.0 (twice the exact KL of 0.5)
    CHECK(kl_gaussian(GaussianLatent{{1}, {1}}) == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> um(-2.0, 2.0);
    std::uniform_real_distribution<double> us(0.3, 3.0);
    for (int t = 0; t < 5; ++t) {
        const double mu = um(rng), sigma = us(rng);
        const double exact_kl = oracle::kl_univariate_quadrature(mu, sigma);
        CHECK(kl_gaussian(GaussianLatent{{mu}, {sigma}}) ==
              doctest::Approx(2.0 * exact_kl).epsilon(1e-6));
    }
}

TEST_CASE("kl is non-negative, zero only at the standard normal") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> um(-3.0, 3.0);
    std::uniform_real_distribution<double> us(0.1, 4.0);
    for (int t = 0; t < 200; ++t) {
        GaussianLatent latent{{um(rng), um(rng)}, {us(rng), us(rng)}};
        const double v = kl_gaussian(latent);
        CHECK(v >= -1e-12);
    }
    // grows with sigma
    double prev = kl_gaussian(GaussianLatent{{0}, {1}});
    for (double s : {2.0, 4.0, 8.0}) {
        const double v = kl_gaussian(GaussianLatent{{0}, {s}});
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(kl_gaussian(GaussianLatent{{0}, {0}}), std::invalid_argument);
    CHECK_THROWS_AS(kl_gaussian(GaussianLatent{{0}, {-1}}), std::invalid_argument);
}

TEST_CASE("kl analytic gradient matches central finite differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> um(-2.0, 2.0);
    std::uniform_real_distribution<double> us(0.5, 2.5);
    GaussianLatent latent{{um(rng), um(rng), um(rng)}, {us(rng), us(rng), us(rng)}};
    const auto [dmu, dsigma] = kl_gaussian_gradient(latent);
    const double h = 1e-6;
    for (std::size_t i = 0; i < latent.mu.size(); ++i) {
        GaussianLatent up = latent, down = latent;
        up.mu[i] += h;
        down.mu[i] -= h;
        const double fd = (kl_gaussian(up) - kl_gaussian(down)) / (2.0 * h);
        CHECK(std::abs(dmu[i] - fd) / std::max(std::abs(fd), 1e-10) < 1e-6);

        up = latent;
        down = latent;
        up.sigma[i] += h;
        down.sigma[i] -= h;
        const double fds = (kl_gaussian(up) - kl_gaussian(down)) / (2.0 * h);
        CHECK(std::abs(dsigma[i] - fds) / std::max(std::abs(fds), 1e-10) < 1e-6);
    }
}

TEST_CASE("composite loss weighting") {
    CHECK(composite_loss(0.5, 1.0, 2.0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(composite_loss(0.5, 1.0, 2.0, LossWeights::bis_cartesian()) ==
          doctest::Approx(0.6002).epsilon(1e-12));
    CHECK(composite_loss(0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("composite loss is linear in each component") {
    const LossWeights w{0.3, 0.7};
    const double base = composite_loss(1.0, 2.0, 3.0, w);
    CHECK(composite_loss(2.0, 2.0, 3.0, w) - base == doctest::Approx(1.0));
    CHECK(composite_loss(1.0, 4.0, 3.0, w) - base == doctest::Approx(0.6));
    CHECK(composite_loss(1.0, 2.0, 5.0, w) - base == doctest::Approx(1.4));
}

TEST_SUITE_END();
