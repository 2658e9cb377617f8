#include <doctest.h>

#include <functional>

#include "msseg/autodiff.hpp"
#include "support.hpp"

using namespace msseg;
using namespace testsupport;
using ad::NodeId;
using ad::Tape;

namespace {

using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

// Largest |analytic - central difference| / max(1, |analytic|, |numeric|)
// over every entry of every input, for the scalar <seed, output>.
double gradient_error(const Builder& build, std::vector<Tensor> inputs, std::mt19937_64& rng) {
    Tape tape;
    std::vector<NodeId> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x, true));
    const NodeId out = build(tape, leaves);
    const Tensor seed = random_tensor(tape.value(out).shape(), rng);
    const auto grads = tape.backward(out, seed);

    auto objective = [&](const std::vector<Tensor>& xs) {
        Tape t;
        std::vector<NodeId> ls;
        for (const auto& x : xs) ls.push_back(t.leaf(x, true));
        return inner_product(seed, t.value(build(t, ls)));
    };
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k][i];
            inputs[k][i] = x0 + h;
            const double fp = objective(inputs);
            inputs[k][i] = x0 - h;
            const double fm = objective(inputs);
            inputs[k][i] = x0;
            const double num = (fp - fm) / (2.0 * h);
            const double an = grads[leaves[k]] ? (*grads[leaves[k]])[i] : 0.0;
            worst = std::max(worst, std::abs(num - an) / std::max({1.0, std::abs(num), std::abs(an)}));
        }
    }
    return worst;
}

// Values bounded away from zero so the relu kink is never crossed.
Tensor away_from_zero(Shape s, std::mt19937_64& rng) {
    Tensor t = random_tensor(std::move(s), rng, 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& e : t.data())
        if (sign(rng)) e = -e;
    return t;
}

constexpr double kTol = 1e-7;

}  // namespace

TEST_CASE("conv2d gradients for every stride and padding") {
    std::mt19937_64 rng(61);
    for (Padding pad : {Padding::SameZero, Padding::SameReplicate, Padding::Valid})
        for (std::size_t stride : {1u, 2u}) {
            const Builder with_bias = [&](Tape& t, const std::vector<NodeId>& l) {
                return t.conv2d(l[0], l[1], l[2], stride, pad);
            };
            const Builder no_bias = [&](Tape& t, const std::vector<NodeId>& l) {
                return t.conv2d(l[0], l[1], std::nullopt, stride, pad);
            };
            CHECK(gradient_error(with_bias,
                                 {random_tensor({2, 7, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                                  random_tensor({3}, rng)},
                                 rng) < kTol);
            CHECK(gradient_error(no_bias, {random_tensor({2, 6, 6}, rng), random_tensor({2, 2, 3, 3}, rng)}, rng) <
                  kTol);
        }
}

TEST_CASE("transpose conv gradients") {
    std::mt19937_64 rng(62);
    for (std::size_t stride : {1u, 2u}) {
        const std::size_t oh = stride == 1 ? 5 : 9, ow = stride == 1 ? 4 : 8;
        const Builder b = [&](Tape& t, const std::vector<NodeId>& l) {
            return t.transpose_conv2d(l[0], l[1], oh, ow, stride, Padding::SameZero);
        };
        CHECK(gradient_error(b, {random_tensor({3, 5, 4}, rng), random_tensor({3, 2, 3, 3}, rng)}, rng) < kTol);
    }
}

TEST_CASE("pointwise op gradients") {
    std::mt19937_64 rng(63);
    const Shape s{2, 4, 3};
    auto two = [&] { return std::vector<Tensor>{random_tensor(s, rng), random_tensor(s, rng)}; };
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.add(l[0], l[1]); }, two(), rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.sub(l[0], l[1]); }, two(), rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.mul(l[0], l[1]); }, two(), rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.square(l[0]); }, {random_tensor(s, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.exp(l[0]); }, {random_tensor(s, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.scale(l[0], -2.5); }, {random_tensor(s, rng)}, rng) <
          kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.affine(l[0], 0.3, 1.7); }, {random_tensor(s, rng)},
                         rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.scale_by(l[0], l[1]); },
                         {random_tensor(s, rng), random_tensor({1}, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.relu(l[0]); }, {away_from_zero(s, rng)}, rng) < kTol);
    // the same input feeding two branches accumulates both contributions
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.mul(l[0], t.exp(l[0])); }, {random_tensor(s, rng)},
                         rng) < kTol);
}

TEST_CASE("relu subgradient at zero is zero") {
    Tape t;
    const NodeId x = t.leaf(Tensor({1, 1, 3}, std::vector<double>{-1.0, 0.0, 2.0}), true);
    const NodeId y = t.relu(x);
    const auto g = t.backward(y, Tensor({1, 1, 3}, 1.0));
    CHECK((*g[x])[0] == 0.0);
    CHECK((*g[x])[1] == 0.0);
    CHECK((*g[x])[2] == 1.0);
}

TEST_CASE("layout op gradients") {
    std::mt19937_64 rng(64);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.replicate_classes(l[0], 3); },
                         {random_tensor({2, 3, 3}, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.expand_labels(l[0], 2); },
                         {random_tensor({3, 3, 3}, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.reduce_groups(l[0], 2); },
                         {random_tensor({6, 3, 3}, rng)}, rng) < kTol);
}

TEST_CASE("softmax, pooling and prolongation gradients") {
    std::mt19937_64 rng(65);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.softmax(l[0]); },
                         {random_tensor({3, 4, 4}, rng, -3.0, 3.0)}, rng) < kTol);
    for (std::size_t n : {6u, 7u})
        CHECK(gradient_error([](Tape& t, const auto& l) { return t.average_pool(l[0]); },
                             {random_tensor({2, n, n + 1}, rng)}, rng) < kTol);
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.prolong(l[0], 8, 7); },
                         {random_tensor({2, 4, 4}, rng)}, rng) < kTol);
}

TEST_CASE("renormalize gradient inside and outside the clamp range") {
    std::mt19937_64 rng(66);
    Tensor x = random_tensor({3, 4, 4}, rng, 0.05, 0.95);
    x[0] = 1.4;    // clamped from above
    x[17] = -0.3;  // clamped from below
    CHECK(gradient_error([](Tape& t, const auto& l) { return t.renormalize(l[0]); }, {x}, rng) < kTol);
}

TEST_CASE("a composite graph") {
    std::mt19937_64 rng(67);
    const Builder b = [](Tape& t, const std::vector<NodeId>& l) {
        const NodeId h = t.relu(t.conv2d(l[0], l[1], l[2]));
        const NodeId z = t.reduce_groups(t.square(t.sub(h, t.replicate_classes(l[0], 2))), 2);
        const NodeId v = t.softmax(t.scale_by(z, l[3]));
        return t.renormalize(t.prolong(t.average_pool(v), 7, 7));
    };
    CHECK(gradient_error(b,
                         {random_tensor({2, 7, 7}, rng), random_tensor({4, 2, 3, 3}, rng), random_tensor({4}, rng),
                          random_tensor({1}, rng, 0.5, 1.5)},
                         rng) < 1e-6);
}

TEST_CASE("constant leaves receive no gradient") {
    Tape t;
    std::mt19937_64 rng(68);
    const NodeId a = t.leaf(random_tensor({1, 2, 2}, rng), true);
    const NodeId c = t.leaf(random_tensor({1, 2, 2}, rng), false);
    const NodeId unused = t.leaf(random_tensor({1, 2, 2}, rng), true);
    const NodeId y = t.mul(a, c);
    const auto g = t.backward(y, Tensor({1, 2, 2}, 1.0));
    CHECK(g[a].has_value());
    CHECK_FALSE(g[c].has_value());
    CHECK_FALSE(g[unused].has_value());
    CHECK(max_abs_diff(*g[a], t.value(c)) == 0.0);
}

TEST_CASE("replay reproduces every node") {
    std::mt19937_64 rng(69);
    Tape t;
    const NodeId x = t.leaf(random_tensor({2, 6, 6}, rng), true);
    const NodeId w = t.leaf(random_tensor({2, 2, 3, 3}, rng), true);
    const NodeId y = t.softmax(t.conv2d(t.exp(x), w, std::nullopt, 2));
    (void)y;
    const auto values = t.replay();
    REQUIRE(values.size() == t.size());
    for (NodeId i = 0; i < t.size(); ++i) CHECK(values[i] == t.value(i));
}

TEST_CASE("tape argument errors") {
    Tape t;
    const NodeId x = t.leaf(Tensor({1, 2, 2}), true);
    CHECK_THROWS_AS(t.add(x, 7), std::out_of_range);
    CHECK_THROWS_AS(t.backward(x, Tensor({1, 3, 3})), std::invalid_argument);
    CHECK_THROWS_AS(t.scale_by(x, x), std::invalid_argument);
}
