#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <unordered_set>

#include "vitray/tensor.hpp"
#include "testutil.hpp"

using namespace vitray;
using testutil::random_tensor;
using testutil::rel_err;

namespace {

/// Central finite difference of `loss_fn` with respect to one slot.
double central_diff(double* slot, const std::function<double()>& loss_fn,
                    double step = 1e-5) {
    const double orig = *slot;
    *slot = orig + step;
    const double up = loss_fn();
    *slot = orig - step;
    const double down = loss_fn();
    *slot = orig;
    return (up - down) / (2.0 * step);
}

void check_gradients(std::vector<Tensor>& leaves, const std::function<Tensor()>& build,
                     double tol = 1e-4) {
    Tensor loss = build();
    for (Tensor& leaf : leaves) leaf.clear_grad();
    backward(loss);
    auto loss_value = [&] { return build().item(); };
    for (Tensor& leaf : leaves) {
        REQUIRE(leaf.has_grad());
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            double numeric = central_diff(leaf.mutable_data() + i, loss_value);
            double analytic = leaf.grad()[i];
            INFO("leaf element ", i, ": analytic ", analytic, " numeric ", numeric);
            CHECK(rel_err(analytic, numeric) < tol);
        }
    }
}

} // namespace

TEST_CASE("construction validates shape and finiteness") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}, false), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, std::nan("")}, false), NumericError);
    CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, INFINITY}, false), NumericError);
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, false);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t(1, 2) == 6.0);
}

TEST_CASE("matmul examples") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4}, false);
    Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8}, false);
    Tensor c = matmul(a, b);
    CHECK(c.values() == std::vector<double>{19, 22, 43, 50});

    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1}, false);
    CHECK(matmul(eye, b).values() == b.values());
    Tensor zero = Tensor::zeros({2, 2});
    CHECK(matmul(a, zero).values() == std::vector<double>{0, 0, 0, 0});

    Tensor bad = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH_AS(matmul(a, bad), doctest::Contains("[2 x 2]"), ShapeError);
    CHECK_THROWS_WITH_AS(matmul(a, bad), doctest::Contains("[3 x 2]"), ShapeError);
}

TEST_CASE("softmax examples and invariants") {
    Tensor x = Tensor::from_data({1, 3}, {0, 0, 0}, false);
    Tensor y = softmax(x, 1);
    for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3.0));

    Tensor z = Tensor::from_data({1, 2}, {0.0, std::log(3.0)}, false);
    Tensor sz = softmax(z, 1);
    CHECK(sz.values()[0] == doctest::Approx(0.25));
    CHECK(sz.values()[1] == doctest::Approx(0.75));

    SplitMix64 rng(5);
    Tensor r = random_tensor({6, 5}, rng);
    Tensor sr = softmax(r, 1);
    std::vector<double> shifted = r.values();
    for (double& v : shifted) v += 3.25;
    Tensor sshift = softmax(Tensor::from_data({6, 5}, shifted, false), 1);
    for (std::size_t i = 0; i < sr.size(); ++i) {
        CHECK(std::fabs(sr.values()[i] - sshift.values()[i]) <= 1e-12);
    }

    CHECK_THROWS_AS(softmax(r, 2), ContractError);
}

TEST_CASE("layer_norm examples") {
    Tensor gamma = Tensor::full({3}, 1.0);
    Tensor beta = Tensor::zeros({3});

    Tensor constant = Tensor::full({1, 3}, 4.2);
    Tensor cn = layer_norm(constant, gamma, beta, 1e-6);
    for (double v : cn.values()) CHECK(std::fabs(v) < 1e-9);

    // A row that is already zero-mean unit-variance is (nearly) fixed.
    Tensor fixed = Tensor::from_data(
        {1, 3}, {-std::sqrt(1.5), 0.0, std::sqrt(1.5)}, false);
    Tensor fn = layer_norm(fixed, gamma, beta, 1e-12);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fn.values()[i] == doctest::Approx(fixed.values()[i]).epsilon(1e-6));
    }

    Tensor gamma2 = Tensor::full({2}, 1.0);
    Tensor beta2 = Tensor::zeros({2});
    Tensor two = Tensor::from_data({1, 2}, {1, 3}, false);
    Tensor tn = layer_norm(two, gamma2, beta2, 1e-12);
    CHECK(tn.values()[0] == doctest::Approx(-1.0));
    CHECK(tn.values()[1] == doctest::Approx(1.0));

    CHECK_THROWS_AS(layer_norm(two, gamma, beta, 1e-6), ShapeError);
    CHECK_THROWS_AS(layer_norm(two, gamma2, beta2, 0.0), ContractError);
}

TEST_CASE("gelu examples") {
    Tensor x = Tensor::from_data({3}, {0.0, 1.0, 10.0}, false);
    Tensor y = gelu(x);
    CHECK(y.values()[0] == 0.0);
    CHECK(y.values()[1] == doctest::Approx(0.841345).epsilon(1e-6));
    CHECK(std::fabs(y.values()[2] - 10.0) < 1e-6);
}

TEST_CASE("structural ops round trip") {
    SplitMix64 rng(9);
    Tensor a = random_tensor({3, 4}, rng);

    CHECK(transpose(transpose(a)).values() == a.values());
    CHECK(reshape(a, {4, 3}).values() == a.values());
    CHECK_THROWS_AS(reshape(a, {5, 3}), ShapeError);

    Tensor top = slice_rows(a, 0, 1);
    Tensor rest = slice_rows(a, 1, 3);
    CHECK(concat_rows({top, rest}).values() == a.values());
    CHECK_THROWS_AS(slice_rows(a, 2, 2), ContractError);

    Tensor left = slice_cols(a, 0, 2);
    Tensor right = slice_cols(a, 2, 4);
    CHECK(concat_cols({left, right}).values() == a.values());
    CHECK_THROWS_AS(slice_cols(a, 0, 5), ContractError);

    Tensor b = random_tensor({2, 3}, rng);
    CHECK_THROWS_AS(concat_rows(std::vector<Tensor>{a, b}), ShapeError);
}

TEST_CASE("log clamps at 1e-12") {
    Tensor x = Tensor::from_data({3}, {1.0, 1e-15, 0.0}, false);
    Tensor y = log(x);
    CHECK(y.values()[0] == 0.0);
    CHECK(y.values()[1] == doctest::Approx(std::log(1e-12)));
    CHECK(y.values()[2] == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives all-ones gradient") {
        SplitMix64 rng(3);
        Tensor x = random_tensor({2, 3}, rng, true);
        backward(sum(x));
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    SUBCASE("x^2 at 3 gives 6") {
        Tensor x = Tensor::scalar(3.0, true);
        backward(sum(mul(x, x)));
        CHECK(x.grad()[0] == doctest::Approx(6.0));
    }
    SUBCASE("non-scalar loss is rejected") {
        Tensor x = Tensor::zeros({2, 2}, true);
        CHECK_THROWS_AS(backward(x), ContractError);
    }
    SUBCASE("diamond reuse accumulates once per path") {
        // y = x * x reuses x twice; d/dx (x*x + x*x) structure via add.
        Tensor x = Tensor::scalar(1.5, true);
        Tensor y = mul(x, x);
        backward(sum(add(y, y)));
        CHECK(x.grad()[0] == doctest::Approx(2.0 * 2.0 * 1.5));
    }
}

TEST_CASE("compute graph order is a topological visit of unique nodes") {
    SplitMix64 rng(21);
    Tensor a = random_tensor({2, 2}, rng, true);
    Tensor b = random_tensor({2, 2}, rng, true);
    Tensor shared = matmul(a, b);
    Tensor loss = sum(add(mul(shared, shared), shared));
    ComputeGraph graph(loss);
    std::unordered_set<const detail::Node*> seen;
    for (const detail::Node* node : graph.order()) {
        for (const auto& parent : node->parents) {
            INFO("parent must be ordered before its consumer");
            CHECK(seen.count(parent.get()) == 1);
        }
        CHECK(seen.insert(node).second);
    }
    CHECK(seen.count(loss.node().get()) == 1);
}

TEST_CASE("gradients match finite differences per op") {
    SplitMix64 rng(33);

    SUBCASE("matmul") {
        std::vector<Tensor> leaves{random_tensor({2, 3}, rng, true),
                                   random_tensor({3, 2}, rng, true)};
        check_gradients(leaves, [&] { return mean(matmul(leaves[0], leaves[1])); });
    }
    SUBCASE("add_bias_row") {
        std::vector<Tensor> leaves{random_tensor({3, 4}, rng, true),
                                   random_tensor({4}, rng, true)};
        check_gradients(leaves, [&] { return mean(add_bias_row(leaves[0], leaves[1])); });
    }
    SUBCASE("softmax + log") {
        std::vector<Tensor> leaves{random_tensor({2, 5}, rng, true)};
        check_gradients(leaves, [&] { return mean(log(softmax(leaves[0], 1))); });
    }
    SUBCASE("softmax axis 0") {
        std::vector<Tensor> leaves{random_tensor({4, 3}, rng, true)};
        // Weight the columns so the loss is not the constant mean of
        // column-stochastic slices.
        Tensor weights = random_tensor({4, 3}, rng);
        check_gradients(leaves, [&] { return mean(mul(softmax(leaves[0], 0), weights)); });
    }
    SUBCASE("layer_norm") {
        std::vector<Tensor> leaves{random_tensor({3, 6}, rng, true),
                                   random_tensor({6}, rng, true, 0.5, 1.5),
                                   random_tensor({6}, rng, true)};
        check_gradients(leaves, [&] {
            return mean(layer_norm(leaves[0], leaves[1], leaves[2], 1e-6));
        });
    }
    SUBCASE("gelu") {
        std::vector<Tensor> leaves{random_tensor({3, 3}, rng, true)};
        check_gradients(leaves, [&] { return mean(gelu(leaves[0])); });
    }
    SUBCASE("structural mix") {
        std::vector<Tensor> leaves{random_tensor({4, 4}, rng, true)};
        check_gradients(leaves, [&] {
            Tensor t = transpose(leaves[0]);
            Tensor s = concat_cols({slice_cols(t, 0, 2), slice_cols(t, 2, 4)});
            Tensor r = concat_rows({slice_rows(s, 0, 3), slice_rows(s, 3, 4)});
            return mean(mul(reshape(r, {2, 8}), reshape(r, {2, 8})));
        });
    }
    SUBCASE("scale and sum") {
        std::vector<Tensor> leaves{random_tensor({5}, rng, true)};
        check_gradients(leaves, [&] { return scale(sum(gelu(leaves[0])), -0.7); });
    }
}

TEST_CASE("randomly generated graphs match finite differences") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        SplitMix64 structure_rng(seed * 1000 + 7);
        std::vector<Tensor> leaves{
            random_tensor({2, 3}, structure_rng, true),
            random_tensor({3, 4}, structure_rng, true),
            random_tensor({2, 3}, structure_rng, true),
            random_tensor({3}, structure_rng, true),
            random_tensor({3}, structure_rng, true, 0.5, 1.5),
        };

        // Replaying the op choices with a fixed seed rebuilds the identical
        // graph structure over the (possibly perturbed) leaf values.
        auto build = [&leaves, seed]() -> Tensor {
            SplitMix64 rng(seed);
            std::vector<Tensor> pool{leaves[0], leaves[1], leaves[2]};
            for (int step = 0; step < 14; ++step) {
                const std::uint64_t op = rng.next_below(10);
                const Tensor& t = pool[rng.next_below(pool.size())];
                const Tensor& u = pool[rng.next_below(pool.size())];
                switch (op) {
                    case 0:
                        if (t.cols() == u.rows()) pool.push_back(matmul(t, u));
                        break;
                    case 1:
                        if (t.shape() == u.shape()) pool.push_back(add(t, u));
                        break;
                    case 2:
                        if (t.shape() == u.shape()) pool.push_back(mul(t, u));
                        break;
                    case 3:
                        pool.push_back(scale(t, -1.5 + 3.0 * rng.next_double()));
                        break;
                    case 4:
                        pool.push_back(transpose(t));
                        break;
                    case 5:
                        pool.push_back(gelu(t));
                        break;
                    case 6:
                        pool.push_back(softmax(t, 1));
                        break;
                    case 7:
                        pool.push_back(log(softmax(t, 1)));
                        break;
                    case 8:
                        if (t.cols() == 3) {
                            pool.push_back(add_bias_row(t, leaves[3]));
                        }
                        break;
                    case 9:
                        if (t.cols() == 3) {
                            pool.push_back(layer_norm(t, leaves[4], leaves[3], 1e-6));
                        }
                        break;
                }
            }
            Tensor loss = mean(pool[0]);
            for (std::size_t i = 1; i < pool.size(); ++i) {
                loss = add(loss, mean(pool[i]));
            }
            // Pull every leaf into the graph even when the sampled ops never
            // touched the bias/gamma tensors.
            loss = add(loss, mean(add_bias_row(leaves[2], leaves[3])));
            loss = add(loss, mean(layer_norm(leaves[0], leaves[4], leaves[3], 1e-6)));
            loss = add(loss, mean(matmul(leaves[0], leaves[1])));
            return loss;
        };
        check_gradients(leaves, build);
    }
}

TEST_CASE("finite random inputs never produce non-finite op outputs") {
    SplitMix64 rng(77);
    for (int iter = 0; iter < 50; ++iter) {
        Tensor a = random_tensor({4, 4}, rng);
        Tensor b = random_tensor({4, 4}, rng);
        Tensor c = gelu(matmul(softmax(a, 1), add(b, b)));
        Tensor d = log(softmax(c, 0));
        for (double v : d.values()) CHECK(std::isfinite(v));
    }
}
