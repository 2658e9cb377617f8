#include <doctest.h>

#include <numbers>

#include "msseg/energy.hpp"
#include "support.hpp"

using namespace msseg;
using namespace testsupport;

namespace {

Tensor constant_one_hot(std::size_t N, std::size_t cls, std::size_t h, std::size_t w) {
    Tensor t({N, h, w});
    for (std::size_t p = 0; p < h * w; ++p) t[cls * h * w + p] = 1.0;
    return t;
}

Tensor disk_field(std::size_t n, double r) {
    Tensor v({2, n, n});
    const double c = n / 2.0;
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double dy = y + 0.5 - c, dx = x + 0.5 - c;
            const bool in = dx * dx + dy * dy <= r * r;
            v.at(1, y, x) = in;
            v.at(0, y, x) = !in;
        }
    return v;
}

// Term-by-term evaluation with plain loops, independent of the library.
EnergyTerms oracle_terms(const Tensor& u, const Tensor& v, const Tensor& f_hat, const Tensor& anchor, double lambda,
                         double alpha, double eps, double sigma) {
    const std::size_t N = v.channels(), C = u.channels(), I = C / N, P = u.plane();
    EnergyTerms t;
    const Tensor g = naive_gradient(u);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t p = 0; p < P; ++p) {
                const std::size_t c = n * I + i;
                const double d = f_hat[c * P + p] - u[c * P + p];
                const double gx = g[c * P + p], gy = g[(C + c) * P + p];
                t.fidelity += 0.5 * d * d * v[n * P + p];
                t.smoothness += 0.5 * lambda * v[n * P + p] * (gx * gx + gy * gy);
            }
    Tensor one_minus_2a(anchor.shape()), one_minus_a(anchor.shape());
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        one_minus_2a[i] = 1.0 - 2.0 * anchor[i];
        one_minus_a[i] = 1.0 - anchor[i];
    }
    const Tensor k2 = naive_gaussian_blur(one_minus_2a, sigma);
    const Tensor k1 = naive_gaussian_blur(one_minus_a, sigma);
    for (std::size_t i = 0; i < v.size(); ++i) {
        t.linearized += alpha * k2[i] * (v[i] - anchor[i]);
        t.entropy += eps * v[i] * std::log(std::max(v[i], 1e-12));
        t.anchor += alpha * anchor[i] * k1[i];
    }
    return t;
}

}  // namespace

TEST_CASE("EnergyParams validation") {
    EnergyParams p;
    CHECK_NOTHROW(p.validate());
    p.epsilon = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.sigma = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("Gaussian kernel construction") {
    CHECK(make_gaussian_kernel(0.2).values()[4] > 0.99);
    for (double sigma : {0.2, 0.7, 1.0, 2.0, 3.3}) {
        const GaussianKernel k(sigma);
        CHECK(k.radius() == static_cast<std::size_t>(std::ceil(3.0 * sigma)));
        const Tensor& v = k.values();
        const std::size_t d = 2 * k.radius() + 1;
        REQUIRE(v.size() == d * d);
        CHECK(std::abs(sum(v) - 1.0) < 1e-12);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(v[i] >= 0.0);
            CHECK(v[i] == v[v.size() - 1 - i]);
        }
    }
    const GaussianKernel k1(1.0);
    const std::size_t r = k1.radius(), d = 2 * r + 1;
    const double centre = k1.values()[r * d + r], edge = k1.values()[r * d + r + 1];
    CHECK(centre / edge == doctest::Approx(std::exp(0.5)).epsilon(1e-13));
    CHECK_THROWS_AS(GaussianKernel(0.0), std::invalid_argument);
    CHECK_THROWS_AS(GaussianKernel(-2.0), std::invalid_argument);
}

TEST_CASE("Gaussian apply matches the formula oracle") {
    std::mt19937_64 rng(21);
    const Tensor x = random_tensor({2, 9, 11}, rng);
    for (double sigma : {0.6, 1.5})
        CHECK(max_abs_diff(GaussianKernel(sigma).apply(x), naive_gaussian_blur(x, sigma)) < 1e-12);
}

TEST_CASE("LabelField validation") {
    CHECK_NOTHROW(LabelField{Tensor({2, 2, 2}, 0.5)});
    CHECK_THROWS_AS(LabelField{Tensor({2, 2, 2}, 0.6)}, std::invalid_argument);
    Tensor neg({2, 1, 1}, std::vector<double>{-0.1, 1.1});
    CHECK_THROWS_AS(LabelField{neg}, std::invalid_argument);
    const LabelField r = LabelField::renormalized(neg);
    CHECK(r.values()[0] == 0.0);
    CHECK(r.values()[1] == 1.0);
    CHECK(on_simplex(LabelField::renormalized(Tensor({3, 2, 2}, 0.0)).values()));
}

TEST_CASE("regularity operators") {
    std::mt19937_64 rng(22);
    const GradOp grad;
    const ZeroOp zero;
    for (int t = 0; t < 10; ++t) {
        const Tensor x = random_tensor({3, 7, 6}, rng);
        const Tensor y = random_tensor({6, 7, 6}, rng);
        CHECK(rel_diff(inner_product(grad.forward(x), y), inner_product(x, grad.adjoint(y))) < 1e-10);
        CHECK(max_abs_diff(grad.forward(x), naive_gradient(x)) < 1e-15);
        CHECK(max_abs_diff(grad.adjoint(y), naive_gradient_adjoint(y)) < 1e-14);
        const Tensor z = random_tensor({3, 7, 6}, rng);
        CHECK(inner_product(zero.forward(x), z) == 0.0);
        CHECK(inner_product(x, zero.adjoint(z)) == 0.0);
    }
    const GradOp coarse(4.0);
    const Tensor x = random_tensor({1, 5, 5}, rng);
    CHECK(max_abs_diff(coarse.forward(x), naive_gradient(x, 4.0)) < 1e-15);
    CHECK(grad.forward(Tensor({1, 4, 4}, 3.0)) == Tensor({2, 4, 4}, 0.0));
}

TEST_CASE("td_regularizer closed forms") {
    const GaussianKernel k(2.0);
    const Tensor e = Tensor::ones({1, 16, 16});
    CHECK(td_regularizer(LabelField(constant_one_hot(3, 1, 16, 16)), k, e, 1.0) == 0.0);
    for (std::size_t N : {2u, 3u, 5u}) {
        const LabelField u = LabelField::uniform(N, 16, 20);
        const double want = 0.8 * 16 * 20 * (1.0 - 1.0 / N);
        CHECK(std::abs(td_regularizer(u, k, Tensor::ones({1, 16, 20}), 0.8) - want) < 1e-12 * want);
    }
}

TEST_CASE("td_regularizer approximates the disk perimeter") {
    const double sigma = 2.0, r = 20.0;
    const double value = td_regularizer(LabelField(disk_field(128, r)), GaussianKernel(sigma),
                                        Tensor::ones({1, 128, 128}), 1.0);
    // Both classes see the same interface, so one boundary is half the sum.
    const double scaled = std::sqrt(std::numbers::pi / sigma) * value / 2.0;
    CHECK(std::abs(scaled - 2.0 * std::numbers::pi * r) < 0.08 * 2.0 * std::numbers::pi * r);
}

TEST_CASE("td_regularizer is invariant to class permutation") {
    std::mt19937_64 rng(23);
    const Tensor v = random_simplex(3, 10, 10, rng);
    Tensor perm(v.shape());
    const std::size_t P = 100;
    const std::size_t order[3] = {2, 0, 1};
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t p = 0; p < P; ++p) perm[n * P + p] = v[order[n] * P + p];
    const GaussianKernel k(1.0);
    const Tensor e = Tensor::ones({1, 10, 10});
    CHECK(rel_diff(td_regularizer(LabelField(v), k, e, 1.0), td_regularizer(LabelField(perm), k, e, 1.0)) < 1e-13);
}

TEST_CASE("subgradient_p") {
    const GaussianKernel k(1.5);
    Tensor half({2, 8, 8}, 0.5);
    const Tensor p = subgradient_p(LabelField(half), k, 2.0);
    for (double x : p.data()) CHECK(std::abs(x) < 1e-15);
    const Tensor q = subgradient_p(LabelField(constant_one_hot(2, 0, 8, 8)), k, 0.7);
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(std::abs(q[i] + 0.7) < 1e-14);
        CHECK(std::abs(q[64 + i] - 0.7) < 1e-14);
    }
    std::mt19937_64 rng(24);
    const Tensor v = random_simplex(3, 9, 7, rng);
    Tensor arg(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) arg[i] = 1.0 - 2.0 * v[i];
    const Tensor want = scale(naive_gaussian_blur(arg, 1.5), 1.3);
    CHECK(max_abs_diff(subgradient_p(LabelField(v), k, 1.3), want) < 1e-12);
}

TEST_CASE("entropy_term") {
    CHECK(entropy_term(LabelField(constant_one_hot(3, 2, 5, 5)), 0.1) == 0.0);
    const double u = entropy_term(LabelField::uniform(4, 6, 7), 0.2);
    CHECK(u == doctest::Approx(-0.2 * 42 * std::log(4.0)).epsilon(1e-14));
    std::mt19937_64 rng(25);
    for (int t = 0; t < 5; ++t) {
        const Tensor v = random_simplex(3, 6, 6, rng);
        double want = 0.0;
        for (double x : v.data()) want += x * std::log(x);
        const double got = entropy_term(LabelField(v), 0.3);
        CHECK(rel_diff(got, 0.3 * want) < 1e-13);
        CHECK(got < 0.0);
    }
}

TEST_CASE("edge_weight") {
    const Tensor flat = edge_weight(Tensor({1, 6, 6}, 0.4), 3.0);
    for (double x : flat.data()) CHECK(x == 1.0);
    std::mt19937_64 rng(26);
    const Tensor off = edge_weight(random_tensor({1, 6, 6}, rng), 0.0);
    for (double x : off.data()) CHECK(x == 1.0);
    Tensor step({1, 4, 8});
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 4; x < 8; ++x) step.at(0, y, x) = 1.0;
    const Tensor e = edge_weight(step, 1.0);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 8; ++x) CHECK(e.at(0, y, x) == (x == 3 ? 0.5 : 1.0));
}

TEST_CASE("total_energy special cases") {
    std::mt19937_64 rng(27);
    const Tensor f = random_tensor({2, 8, 8}, rng);
    const LabelField one_hot(constant_one_hot(2, 1, 8, 8));
    EnergyParams p;
    CHECK(total_energy(f, one_hot, f, one_hot, ZeroOp(), p) == 0.0);

    const Tensor u = random_tensor({4, 8, 8}, rng), fh = random_tensor({4, 8, 8}, rng);
    const LabelField v(random_simplex(2, 8, 8, rng));
    CHECK(energy_terms(u, v, fh, v, GradOp(), p, GaussianKernel(p.sigma)).linearized == 0.0);
}

TEST_CASE("total_energy matches the term-by-term oracle") {
    std::mt19937_64 rng(28);
    for (std::size_t I : {1u, 2u}) {
        const std::size_t N = 3;
        const Tensor u = random_tensor({N * I, 9, 8}, rng), fh = random_tensor({N * I, 9, 8}, rng);
        const Tensor v = random_simplex(N, 9, 8, rng), a = random_simplex(N, 9, 8, rng);
        EnergyParams p;
        p.lambda = 0.3;
        p.alpha = 0.9;
        p.epsilon = 0.2;
        p.sigma = 1.2;
        const EnergyTerms got = energy_terms(u, LabelField(v), fh, LabelField(a), GradOp(), p, GaussianKernel(1.2));
        const EnergyTerms want = oracle_terms(u, v, fh, a, 0.3, 0.9, 0.2, 1.2);
        CHECK(rel_diff(got.fidelity, want.fidelity) < 1e-12);
        CHECK(rel_diff(got.smoothness, want.smoothness) < 1e-12);
        CHECK(std::abs(got.linearized - want.linearized) < 1e-11);
        CHECK(rel_diff(got.entropy, want.entropy) < 1e-12);
        CHECK(rel_diff(got.anchor, want.anchor) < 1e-12);
        CHECK(std::abs(total_energy(u, LabelField(v), fh, LabelField(a), GradOp(), p) - want.total()) < 1e-10);
    }
}

TEST_CASE("smoothness term penalises oscillation") {
    std::mt19937_64 rng(29);
    const Tensor fh = random_tensor({2, 8, 8}, rng, 0.0, 1.0);
    const LabelField v(random_simplex(2, 8, 8, rng));
    Tensor checker({2, 8, 8}), flat({2, 8, 8}, 0.5);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x) checker.at(c, y, x) = (x + y) % 2 ? 1.0 : 0.0;
    EnergyParams p;
    p.lambda = 0.5;
    const GaussianKernel k(p.sigma);
    const auto ec = energy_terms(checker, v, fh, v, GradOp(), p, k);
    const auto ef = energy_terms(flat, v, fh, v, GradOp(), p, k);
    CHECK(ec.smoothness > ef.smoothness);
    CHECK(ef.smoothness == 0.0);
}
