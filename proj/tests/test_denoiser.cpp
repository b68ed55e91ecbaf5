#include "sdd/denoiser.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using sdd::Denoiser;
using sdd::ForwardCache;
using sdd::GradientSet;
using sdd::Matrix;
using sdd::Rng;
using sdd::TimeEmbedding;

// Scalar probe: L = sum(pred * cot) is linear in the output, so the upstream
// gradient is exactly `cot` and finite differences of L check the whole
// backward pass.
double probe_loss(const Denoiser& net, const Matrix& x_t, const std::vector<double>& t,
                  const Matrix& x_sc, const Matrix& cot) {
    const Matrix out = net.forward(x_t, t, x_sc);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * cot.data()[i];
    return s;
}

TEST(Denoiser, InitWidths) {
    Rng rng(1);
    const Denoiser net = Denoiser::init(rng, 8, {32, 32}, 16);  // d=4 -> width 2d=8
    EXPECT_EQ(net.input_width(), 16u);
    EXPECT_EQ(net.width(), 8u);
    EXPECT_EQ(net.weights().front().rows(), 16u);
    EXPECT_EQ(net.weights().back().cols(), 8u);
    // Dense skip: second hidden layer sees [h | input].
    EXPECT_EQ(net.weights()[1].rows(), 32u + 16u);
}

TEST(Denoiser, InitDeterminism) {
    Rng a(7), b(7);
    EXPECT_TRUE(Denoiser::init(a, 6, {8, 8}, 4) == Denoiser::init(b, 6, {8, 8}, 4));
}

TEST(Denoiser, ForwardFiniteOnZeros) {
    Rng rng(2);
    const Denoiser net = Denoiser::init(rng, 6, {16}, 8);
    const Matrix x(3, 6), x_sc(3, 6);
    const Matrix out = net.forward(x, {0.0, 0.5, 1.0}, x_sc);
    EXPECT_TRUE(out.all_finite());
}

TEST(Denoiser, ZeroWeightsOutputEqualsBias) {
    Rng rng(3);
    Denoiser net = Denoiser::init(rng, 4, {8}, 4);
    for (Matrix* p : net.params())
        for (std::size_t i = 0; i < p->size(); ++i) p->data()[i] = 0.0;
    net.biases().back()(0, 2) = 1.25;
    Rng rng2(4);
    const Matrix x = Matrix::gaussian(rng2, 5, 4);
    const Matrix out = net.forward(x, std::vector<double>(5, 0.3), Matrix(5, 4));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) ASSERT_DOUBLE_EQ(out(i, j), j == 2 ? 1.25 : 0.0);
}

TEST(Denoiser, BatchRowsIndependent) {
    Rng rng(5);
    const Denoiser net = Denoiser::init(rng, 6, {12, 12}, 8);
    Rng rng2(6);
    const Matrix x2 = Matrix::gaussian(rng2, 2, 6);
    const Matrix sc2 = Matrix::gaussian(rng2, 2, 6);
    const Matrix out2 = net.forward(x2, {0.2, 0.8}, sc2);

    Matrix xr(1, 6), scr(1, 6);
    for (std::size_t j = 0; j < 6; ++j) {
        xr(0, j) = x2(0, j);
        scr(0, j) = sc2(0, j);
    }
    const Matrix out1 = net.forward(xr, {0.2}, scr);
    for (std::size_t j = 0; j < 6; ++j) ASSERT_DOUBLE_EQ(out1(0, j), out2(0, j));
}

TEST(Denoiser, DeterministicForward) {
    Rng rng(8);
    const Denoiser net = Denoiser::init(rng, 4, {8}, 4);
    Rng rng2(9);
    const Matrix x = Matrix::gaussian(rng2, 3, 4);
    const Matrix sc = Matrix::gaussian(rng2, 3, 4);
    const std::vector<double> t = {0.1, 0.5, 0.9};
    EXPECT_TRUE(net.forward(x, t, sc) == net.forward(x, t, sc));
}

TEST(Denoiser, BackwardZeroUpstreamGivesZeroGrads) {
    Rng rng(10);
    const Denoiser net = Denoiser::init(rng, 4, {8, 8}, 4);
    Rng rng2(11);
    const Matrix x = Matrix::gaussian(rng2, 3, 4);
    ForwardCache cache;
    net.forward(x, {0.2, 0.4, 0.6}, Matrix(3, 4), &cache);
    const GradientSet gs = net.backward(cache, Matrix(3, 4));
    for (const Matrix& g : gs.grads)
        for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(g.data()[i], 0.0);
}

TEST(Denoiser, BackwardWithoutForwardThrows) {
    Rng rng(12);
    const Denoiser net = Denoiser::init(rng, 4, {8}, 4);
    ForwardCache cache;  // never filled
    EXPECT_THROW(net.backward(cache, Matrix(3, 4)), sdd::StateError);
}

TEST(Denoiser, GradientsMatchFiniteDifferences) {
    Rng rng(13);
    Denoiser net = Denoiser::init(rng, 6, {8}, 4);  // d=3
    Rng rng2(14);
    const Matrix x_t = Matrix::gaussian(rng2, 4, 6);
    const Matrix x_sc = Matrix::gaussian(rng2, 4, 6);
    const Matrix cot = Matrix::gaussian(rng2, 4, 6);
    const std::vector<double> t = {0.05, 0.35, 0.65, 0.95};

    ForwardCache cache;
    net.forward(x_t, t, x_sc, &cache);
    const GradientSet gs = net.backward(cache, cot);

    const double h = 1e-5;
    auto params = net.params();
    ASSERT_EQ(params.size(), gs.grads.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p.data()[i];
            p.data()[i] = keep + h;
            const double up = probe_loss(net, x_t, t, x_sc, cot);
            p.data()[i] = keep - h;
            const double dn = probe_loss(net, x_t, t, x_sc, cot);
            p.data()[i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double an = gs.grads[k](i / p.cols(), i % p.cols());
            const double rel = std::fabs(fd - an) / std::max(1.0, std::fabs(fd));
            worst = std::max(worst, rel);
        }
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Denoiser, InputJacobianMatchesFiniteDifferences) {
    Rng rng(15);
    const Denoiser net = Denoiser::init(rng, 4, {6, 6}, 4);  // width 4, input 8
    Rng rng2(16);
    Matrix x_t = Matrix::gaussian(rng2, 1, 4);
    Matrix x_sc = Matrix::gaussian(rng2, 1, 4);
    const std::vector<double> t = {0.4};

    // Full Jacobian rows via backward with unit cotangents.
    Matrix jac(4, 8);  // d out_k / d input_j
    for (std::size_t k = 0; k < 4; ++k) {
        ForwardCache cache;
        net.forward(x_t, t, x_sc, &cache);
        Matrix cot(1, 4);
        cot(0, k) = 1.0;
        Matrix d_input;
        net.backward(cache, cot, &d_input);
        for (std::size_t j = 0; j < 8; ++j) jac(k, j) = d_input(0, j);
    }

    const double h = 1e-6;
    for (std::size_t j = 0; j < 8; ++j) {
        Matrix xp = Matrix::hcat(x_t, x_sc);
        auto eval = [&](double delta) {
            Matrix xt2 = x_t, sc2 = x_sc;
            if (j < 4)
                xt2(0, j) += delta;
            else
                sc2(0, j - 4) += delta;
            return net.forward(xt2, t, sc2);
        };
        const Matrix up = eval(h), dn = eval(-h);
        for (std::size_t k = 0; k < 4; ++k) {
            const double fd = (up(0, k) - dn(0, k)) / (2.0 * h);
            ASSERT_NEAR(fd, jac(k, j), 1e-6 * std::max(1.0, std::fabs(fd)));
        }
    }
}

TEST(Denoiser, LinearNetMatchesClosedFormLeastSquares) {
    // No hidden layers: out = X W + b. With upstream 2 (XW - Y) / n the
    // weight gradient is the least-squares closed form 2 X^T (XW - Y) / n.
    Rng rng(17);
    Denoiser net = Denoiser::init(rng, 3, {}, 4);
    Rng rng2(18);
    const std::size_t n = 5;
    const Matrix x_t = Matrix::gaussian(rng2, n, 3);
    const Matrix x_sc = Matrix::gaussian(rng2, n, 3);
    const Matrix y = Matrix::gaussian(rng2, n, 3);
    const std::vector<double> t(n, 0.5);

    ForwardCache cache;
    const Matrix pred = net.forward(x_t, t, x_sc, &cache);
    const Matrix resid = sub(pred, y);
    const Matrix upstream = scale(resid, 2.0 / static_cast<double>(n));
    const GradientSet gs = net.backward(cache, upstream);

    const Matrix x_full = Matrix::hcat(x_t, x_sc);
    const Matrix closed = scale(matmul_at(x_full, resid), 2.0 / static_cast<double>(n));
    ASSERT_EQ(gs.grads.size(), 2u);  // W, b
    for (std::size_t i = 0; i < closed.size(); ++i)
        ASSERT_NEAR(gs.grads[0].data()[i], closed.data()[i],
                    1e-12 * std::max(1.0, std::fabs(closed.data()[i])));
}

TEST(Denoiser, TimeEmbeddingSmoothAndDeterministic) {
    const TimeEmbedding emb(16);
    const Matrix a = emb.embed({0.5});
    const Matrix b = emb.embed({0.5});
    EXPECT_TRUE(a == b);
    const Matrix c = emb.embed({0.5 + 1e-7});
    for (std::size_t j = 0; j < 16; ++j) ASSERT_NEAR(a(0, j), c(0, j), 1e-3);
    EXPECT_THROW(TimeEmbedding(3), sdd::DomainError);
}

TEST(Denoiser, ShapeErrors) {
    Rng rng(19);
    const Denoiser net = Denoiser::init(rng, 4, {8}, 4);
    EXPECT_THROW(net.forward(Matrix(2, 6), {0.1, 0.2}, Matrix(2, 6)), sdd::ShapeError);
    EXPECT_THROW(net.forward(Matrix(2, 4), {0.1}, Matrix(2, 4)), sdd::ShapeError);
    EXPECT_THROW(net.forward(Matrix(2, 4), {0.1, 0.2}, Matrix(2, 6)), sdd::ShapeError);
}

}  // namespace
