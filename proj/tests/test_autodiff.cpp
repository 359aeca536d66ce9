#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "sadga/errors.hpp"
#include "sadga/gradcheck.hpp"
#include "sadga/ops.hpp"
#include "sadga/optim.hpp"
#include "sadga/parameters.hpp"
#include "test_util.hpp"

using namespace sadga;
using namespace sadga::ad;
using testing_util::probe;
using testing_util::random_tensor;

namespace {

void expect_gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                      std::vector<Tensor> inputs, double tol = 1e-6) {
    std::vector<std::pair<std::string, Tensor>> named;
    for (std::size_t i = 0; i < inputs.size(); ++i) named.emplace_back("in" + std::to_string(i), inputs[i]);
    auto report = gradcheck([&] { return probe(op(inputs), 99); }, named, {1e-5, tol, 1e-6});
    for (const auto& e : report.entries) {
        EXPECT_TRUE(e.passed) << e.name << " rel=" << e.max_rel_error << " analytic=" << e.analytic
                              << " numeric=" << e.numeric;
    }
}

}  // namespace

TEST(TensorInit, ZerosScheme) {
    Tensor t = tensor_init({2, 2}, InitScheme::Zeros, 7);
    for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(TensorInit, GlorotIsDeterministic) {
    Tensor a = tensor_init({1}, InitScheme::GlorotUniform, 123);
    Tensor b = tensor_init({1}, InitScheme::GlorotUniform, 123);
    EXPECT_EQ(a.values()[0], b.values()[0]);
}

TEST(TensorInit, GlorotBound) {
    const double bound = std::sqrt(6.0 / 8.0);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Tensor t = tensor_init({4, 4}, InitScheme::GlorotUniform, seed);
        for (double v : t.values()) {
            EXPECT_LE(std::abs(v), bound);
        }
    }
}

TEST(TensorInit, RejectsZeroDimension) {
    EXPECT_THROW(tensor_init({2, 0}, InitScheme::Zeros, 1), InvalidShapeError);
    EXPECT_THROW(tensor_init({}, InitScheme::Zeros, 1), InvalidShapeError);
}

TEST(Softmax, UniformLogits) {
    Tensor y = softmax(Tensor::from({3}, {0, 0, 0}), 0);
    for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, Singleton) {
    Tensor y = softmax(Tensor::from({1}, {5.0}), 0);
    EXPECT_EQ(y.values()[0], 1.0);
}

TEST(Softmax, ClosedForm) {
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    Tensor y = softmax(Tensor::from({3}, {1, 2, 3}), 0);
    EXPECT_NEAR(y.values()[0], std::exp(1.0) / z, 1e-15);
    EXPECT_NEAR(y.values()[1], std::exp(2.0) / z, 1e-15);
    EXPECT_NEAR(y.values()[2], std::exp(3.0) / z, 1e-15);
    EXPECT_NEAR(y.values()[0], 0.09003057, 1e-8);
    EXPECT_NEAR(y.values()[1], 0.24472847, 1e-8);
    EXPECT_NEAR(y.values()[2], 0.66524096, 1e-8);
}

TEST(Softmax, MaskedPositionsAreExactlyZero) {
    std::vector<std::uint8_t> mask{1, 0, 1};
    Tensor y = softmax(Tensor::from({3}, {1, 50, 3}), 0, mask);
    EXPECT_EQ(y.values()[1], 0.0);
    EXPECT_NEAR(y.values()[0] + y.values()[2], 1.0, 1e-15);
}

TEST(Softmax, AllMaskedSliceThrows) {
    std::vector<std::uint8_t> mask{0, 0};
    EXPECT_THROW(softmax(Tensor::from({2}, {1, 2}), 0, mask), DegenerateSliceError);
}

TEST(Softmax, NonLastAxis) {
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 0, -1});
    Tensor y = softmax(x, 0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y.at(0, j) + y.at(1, j), 1.0, 1e-15);
    EXPECT_NEAR(y.at(0, 0), 1.0 / (1.0 + std::exp(3.0)), 1e-15);
    EXPECT_THROW(softmax(x, 2), ContractError);
}

TEST(Softmax, RowsSumToOneProperty) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t r = dim(rng), c = dim(rng);
        Tensor x = random_tensor({r, c}, rng, -30, 30);
        Tensor y = softmax_rows(x);
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < c; ++j) {
                EXPECT_GE(y.at(i, j), 0.0);
                s += y.at(i, j);
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(Backward, LinearMapGradientIsBroadcastInput) {
    Tensor w = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    w.set_requires_grad(true);
    Tensor x = Tensor::from({3, 1}, {0.5, -1.0, 2.0});
    backward(sum(matmul(w, x)));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(w.grad()[i * 3 + j], x.values()[j]);
}

TEST(Backward, SigmoidAtZero) {
    Tensor z = Tensor::from({1}, {0.0});
    z.set_requires_grad(true);
    const double c = 3.0;
    backward(scale(sigmoid(z), c));
    EXPECT_DOUBLE_EQ(z.grad()[0], 0.25 * c);
}

TEST(Backward, NonScalarLossIsContractError) {
    Tensor w = Tensor::from({2}, {1, 2});
    w.set_requires_grad(true);
    EXPECT_THROW(backward(scale(w, 2.0)), ContractError);
}

TEST(Backward, UnreachableParametersGetZeroGrad) {
    ParameterStore store(1);
    Tensor a = store.create("a", {2}, InitScheme::GlorotUniform);
    store.create("b", {3}, InitScheme::GlorotUniform);
    backward(sum(a), &store);
    Tensor b = store.get("b");
    ASSERT_TRUE(b.has_grad());
    for (double g : b.grad()) EXPECT_EQ(g, 0.0);
    for (double g : a.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, RandomThreeLayerCompositionMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    ParameterStore store(3);
    store.create("w1", {4, 5}, InitScheme::GlorotUniform);
    store.create("b1", {5}, InitScheme::GlorotUniform);
    store.create("w2", {5, 5}, InitScheme::GlorotUniform);
    store.create("w3", {5, 2}, InitScheme::GlorotUniform);
    Tensor x = random_tensor({3, 4}, rng);
    auto f = [&] {
        Tensor h1 = tanh(add_row(matmul(x, store.get("w1")), store.get("b1")));
        Tensor h2 = sigmoid(matmul(h1, store.get("w2")));
        return probe(matmul(h2, store.get("w3")), 4);
    };
    auto report = gradcheck(f, store, {1e-5, 1e-6, 1e-6});
    EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(OpGradients, Elementwise) {
    std::mt19937_64 rng(1);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    expect_gradcheck([](auto& in) { return add(in[0], in[1]); }, {a, b});
    expect_gradcheck([](auto& in) { return sub(in[0], in[1]); }, {a, b});
    expect_gradcheck([](auto& in) { return mul(in[0], in[1]); }, {a, b});
    expect_gradcheck([](auto& in) { return scale(in[0], -1.7); }, {a});
    expect_gradcheck([](auto& in) { return add_scalar(in[0], 0.3); }, {a});
    expect_gradcheck([](auto& in) { return one_minus(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return sigmoid(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return tanh(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return exp(in[0]); }, {a});
    Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0);
    expect_gradcheck([](auto& in) { return log(in[0]); }, {pos});
    // keep relu inputs away from the kink
    Tensor away = Tensor::from({4}, {-0.7, 0.4, 1.2, -0.2});
    expect_gradcheck([](auto& in) { return relu(in[0]); }, {away});
}

TEST(OpGradients, Broadcasts) {
    std::mt19937_64 rng(2);
    Tensor a = random_tensor({3, 4}, rng), row = random_tensor({4}, rng), col = random_tensor({3, 1}, rng);
    expect_gradcheck([](auto& in) { return add_row(in[0], in[1]); }, {a, row});
    expect_gradcheck([](auto& in) { return mul_row(in[0], in[1]); }, {a, row});
    expect_gradcheck([](auto& in) { return mul_col(in[0], in[1]); }, {a, col});
}

TEST(OpGradients, MatrixProducts) {
    std::mt19937_64 rng(3);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), c = random_tensor({5, 4}, rng);
    expect_gradcheck([](auto& in) { return matmul(in[0], in[1]); }, {a, b});
    expect_gradcheck([](auto& in) { return matmul_nt(in[0], in[1]); }, {a, c});
    expect_gradcheck([](auto& in) { return transpose(in[0]); }, {a});
}

TEST(OpGradients, Reductions) {
    std::mt19937_64 rng(4);
    Tensor a = random_tensor({3, 4}, rng);
    expect_gradcheck([](auto& in) { return sum(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return sum_rows(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return mean_rows(in[0]); }, {a});
    expect_gradcheck([](auto& in) { return layer_norm_rows(in[0]); }, {a});
}

TEST(OpGradients, Softmaxes) {
    std::mt19937_64 rng(5);
    Tensor a = random_tensor({3, 4}, rng, -2, 2);
    std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 0, 0, 1, 1, 1, 1, 1};
    std::vector<std::uint8_t> with_empty{1, 0, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1};
    expect_gradcheck([](auto& in) { return softmax_rows(in[0]); }, {a});
    expect_gradcheck([&](auto& in) { return softmax_rows(in[0], mask); }, {a});
    expect_gradcheck([&](auto& in) { return softmax_rows(in[0], with_empty, true); }, {a});
    expect_gradcheck([](auto& in) { return log_softmax_rows(in[0]); }, {a});
    expect_gradcheck([&](auto& in) { return pick(log_softmax_rows(in[0], mask), 3); }, {a});
    expect_gradcheck([](auto& in) { return softmax(in[0], 0); }, {a});
}

TEST(OpGradients, IndexingAndLayout) {
    std::mt19937_64 rng(6);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor e = random_tensor({5, 4}, rng);
    Tensor w = random_tensor({2, 3}, rng);
    Tensor x = random_tensor({6, 4}, rng);
    expect_gradcheck([](auto& in) { return gather_rows(in[0], {2, 0, 2, 1}); }, {a});
    expect_gradcheck([](auto& in) { return scatter_add_rows(in[0], {1, 0, 1, 3, 1}, 4); }, {e});
    expect_gradcheck([](auto& in) { return gather_cols_per_row(in[0], {0, 3, 3, 1, 1, 2}, 2); }, {a});
    expect_gradcheck([](auto& in) { return scatter_cols_per_row(in[0], {0, 2, 0, 1, 1, 1, 2, 0, 2, 2, 0, 1}, 3); }, {a});
    expect_gradcheck([](auto& in) { return slice_rows(in[0], 1, 2); }, {a});
    expect_gradcheck([](auto& in) { return slice_cols(in[0], 1, 2); }, {a});
    expect_gradcheck([](auto& in) { return concat_rows({in[0], in[1]}); }, {a, e});
    expect_gradcheck([](auto& in) { return concat_cols({in[0], in[1]}); }, {a, transpose(w).detach()});
    expect_gradcheck([](auto& in) { return tile_rows(in[0], 3); }, {a});
    expect_gradcheck([](auto& in) { return repeat_rows(in[0], 2); }, {a});
    expect_gradcheck([](auto& in) { return block_weighted_sum(in[0], in[1]); }, {w, x});
    expect_gradcheck([](auto& in) { return reshape(in[0], {2, 6}); }, {a});
    expect_gradcheck([](auto& in) { return pick(in[0], 5); }, {a});
}

TEST(LayerNorm, StandardizesRows) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor x = random_tensor({4, 16}, rng, -5, 5);
        Tensor y = layer_norm_rows(x, 1e-12);
        for (std::size_t i = 0; i < 4; ++i) {
            double mu = 0, var = 0;
            for (std::size_t j = 0; j < 16; ++j) mu += y.at(i, j);
            mu /= 16;
            for (std::size_t j = 0; j < 16; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
            var /= 16;
            EXPECT_LT(std::abs(mu), 1e-9);
            EXPECT_NEAR(var, 1.0, 1e-6);
        }
    }
}

TEST(Dropout, InvertedScalingAndIdentityAtEval) {
    std::mt19937_64 rng(1);
    Tensor x = Tensor::full({1, 1000}, 1.0);
    Tensor y = dropout(x, 0.5, rng, true);
    for (double v : y.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
    Tensor z = dropout(x, 0.5, rng, false);
    EXPECT_EQ(z.node(), x.node());
}

TEST(Gradcheck, QuadraticIsExact) {
    ParameterStore store(9);
    store.create("theta", {6}, InitScheme::GlorotUniform);
    auto f = [&] {
        Tensor t = store.get("theta");
        return scale(sum(mul(t, t)), 0.5);
    };
    auto report = gradcheck(f, store);
    EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(Gradcheck, DropoutIsNondeterministic) {
    ParameterStore store(9);
    store.create("theta", {6}, InitScheme::GlorotUniform);
    std::mt19937_64 rng(1);
    auto f = [&] { return sum(dropout(store.get("theta"), 0.5, rng, true)); };
    EXPECT_THROW(gradcheck(f, store), NondeterminismError);
}

TEST(Adam, ZeroGradsLeaveParametersUnchanged) {
    ParameterStore store(1);
    Tensor w = store.create("w", {3}, InitScheme::GlorotUniform);
    std::vector<double> before(w.values().begin(), w.values().end());
    store.ensure_grads();
    OptimizerState opt;
    adam_step(store, opt, 0.1);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w.values()[i], before[i]);
    EXPECT_FALSE(w.has_grad());
}

TEST(Adam, FirstStepIsSignLike) {
    ParameterStore store(1);
    Tensor w = store.create("w", {2}, InitScheme::Zeros);
    auto g = w.mutable_grad();
    g[0] = 0.5;
    g[1] = -2.0;
    OptimizerState opt;
    const double lr = 0.1;
    adam_step(store, opt, lr);
    // m_hat = g, v_hat = g^2 after bias correction at step 1
    EXPECT_DOUBLE_EQ(w.values()[0], -lr * 0.5 / (0.5 + 1e-8));
    EXPECT_DOUBLE_EQ(w.values()[1], lr * 2.0 / (2.0 + 1e-8));
    EXPECT_EQ(opt.step, 1u);
}

TEST(Adam, MissingGradIsContractError) {
    ParameterStore store(1);
    store.create("w", {2}, InitScheme::Zeros);
    OptimizerState opt;
    EXPECT_THROW(adam_step(store, opt, 0.1), ContractError);
}

TEST(Adam, DeterministicAcrossRuns) {
    auto run = [] {
        ParameterStore store(42);
        store.create("w", {3, 3}, InitScheme::GlorotUniform);
        OptimizerState opt;
        Tensor x = Tensor::from({1, 3}, {0.2, -0.4, 0.9});
        for (int s = 0; s < 5; ++s) {
            backward(sum(tanh(matmul(x, store.get("w")))), &store);
            adam_step(store, opt, 0.01);
        }
        auto v = store.get("w").values();
        return std::vector<double>(v.begin(), v.end());
    };
    EXPECT_EQ(run(), run());
}

TEST(LrSchedule, RampAndDecay) {
    EXPECT_EQ(lr_schedule(0, 7.44e-4, 2000, 40000), 0.0);
    EXPECT_DOUBLE_EQ(lr_schedule(2000, 7.44e-4, 2000, 40000), 7.44e-4);
    EXPECT_DOUBLE_EQ(lr_schedule(1000, 7.44e-4, 2000, 40000), 3.72e-4);
    EXPECT_NEAR(lr_schedule(21000, 7.44e-4, 2000, 40000), 7.44e-4 * std::sqrt(0.5), 1e-18);
    EXPECT_NEAR(lr_schedule(21000, 7.44e-4, 2000, 40000), 5.261e-4, 5e-8);
    EXPECT_EQ(lr_schedule(40000, 7.44e-4, 2000, 40000), 0.0);
}

TEST(LrSchedule, ClampsBeyondMaxSteps) {
    EXPECT_EQ(lr_schedule(40001, 7.44e-4, 2000, 40000), 0.0);
    EXPECT_THROW(lr_schedule(1, 1e-3, 10, 10), ContractError);
}

TEST(Checkpoint, RoundTripPreservesBits) {
    ParameterStore a(5), b(6);
    for (auto* s : {&a, &b}) {
        s->create("enc.w", {3, 2}, InitScheme::GlorotUniform);
        s->create("emb", {4, 3}, InitScheme::EmbeddingNormal);
    }
    auto path = std::filesystem::temp_directory_path() / "sadga_ckpt_test.bin";
    save_checkpoint(path, a, "meta=1");
    EXPECT_EQ(load_checkpoint(path, b), "meta=1");
    for (const auto& name : a.names()) {
        auto va = a.get(name).values(), vb = b.get(name).values();
        EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
    }
    std::filesystem::remove(path);
}

TEST(ParameterStore, SeedDeterminesInitialization) {
    ParameterStore a(77), b(77), c(78);
    for (auto* s : {&a, &b, &c}) s->create("w", {4, 4}, InitScheme::GlorotUniform);
    auto va = a.get("w").values(), vb = b.get("w").values(), vc = c.get("w").values();
    EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
    EXPECT_FALSE(std::equal(va.begin(), va.end(), vc.begin()));
    EXPECT_THROW(a.create("w", {1}, InitScheme::Zeros), ContractError);
}
