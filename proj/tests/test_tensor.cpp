#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vit5/gradcheck.hpp"
#include "vit5/ops.hpp"
#include "vit5/rng.hpp"
#include "vit5/tensor.hpp"

using namespace vit5;

namespace {

Tensor randn(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

}  // namespace

TEST_CASE("tensor shape invariants") {
    CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0, 2.0}, false), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({0, 3}, {}, false), ShapeError);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
}

TEST_CASE("backward graph is acyclic by construction") {
    Tensor a = Tensor::full({2, 2}, 1.0, true);
    Tensor b = ops::scale(a, 2.0);
    Tensor c = ops::add(b, b);
    REQUIRE(c.node() != nullptr);
    for (const Tensor& p : c.node()->parents) {
        if (p.node()) CHECK(p.node()->id < c.node()->id);
    }
}

TEST_CASE("matmul identity and hand example") {
    // I3 * I3 == I3 exactly, and A * I == A exactly.
    std::vector<double> eye(9, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    Tensor i3 = Tensor::from_data({3, 3}, eye, false);
    Tensor prod = ops::matmul(i3, i3);
    for (int i = 0; i < 9; ++i) CHECK(prod.data()[i] == eye[i]);

    Tensor a = randn(Rng(7), {3, 3});
    Tensor ai = ops::matmul(a, i3);
    for (int i = 0; i < 9; ++i) CHECK(ai.data()[i] == a.data()[i]);

    // [[1,2],[3,4]] x [[0],[1]] == [[2],[4]], against a scalar reference loop.
    Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4}, false);
    Tensor v = Tensor::from_data({2, 1}, {0, 1}, false);
    Tensor mv = ops::matmul(m, v);
    double expect[2] = {0.0, 0.0};
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) expect[i] += m.data()[i * 2 + k] * v.data()[k];
    CHECK(expect[0] == 2.0);
    CHECK(expect[1] == 4.0);
    CHECK(mv.data()[0] == expect[0]);
    CHECK(mv.data()[1] == expect[1]);
}

TEST_CASE("matmul shape errors name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        ops::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(A*B) wrt A equals row sums of B") {
    PrecisionScope f64(Precision::f64);
    Tensor a = Tensor::from_data({2, 3}, {0.5, -1.0, 2.0, 1.5, 0.25, -0.75}, true);
    Tensor b = randn(Rng(13), {3, 4});
    Tensor loss = ops::sum(ops::matmul(a, b));
    loss.backward();
    // d/dA[i,k] sum_j (A B)[i,j] = sum_j B[k,j]
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) {
            double rowsum = 0.0;
            for (int j = 0; j < 4; ++j) rowsum += b.data()[k * 4 + j];
            CHECK(a.grad()[i * 3 + k] == doctest::Approx(rowsum).epsilon(1e-12));
        }
}

TEST_CASE("softmax examples (scalar f64 oracle)") {
    PrecisionScope f64(Precision::f64);
    Tensor single = Tensor::from_data({1}, {3.7}, false);
    CHECK(ops::softmax_lastdim(single).data()[0] == doctest::Approx(1.0).epsilon(1e-12));

    Tensor flat = Tensor::zeros({4});
    Tensor flat_sm = ops::softmax_lastdim(flat);
    for (double v : flat_sm.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    // [1,2,3] against an extended-precision scalar reference.
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, false);
    Tensor y = ops::softmax_lastdim(x);
    long double denom = 0.0L;
    for (int i = 1; i <= 3; ++i) denom += expl(static_cast<long double>(i) - 3.0L);
    for (int i = 0; i < 3; ++i) {
        const long double expect = expl(static_cast<long double>(i + 1) - 3.0L) / denom;
        CHECK(y.data()[i] == doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    PrecisionScope f64(Precision::f64);
    Tensor x = randn(Rng(17), {6, 9}, 3.0);
    Tensor y = ops::softmax_lastdim(x);
    for (int r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int j = 0; j < 9; ++j) s += y.data()[r * 9 + j];
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    std::vector<double> shifted = x.data();
    for (int r = 0; r < 6; ++r)
        for (int j = 0; j < 9; ++j) shifted[r * 9 + j] += 41.5;
    Tensor y2 = ops::softmax_lastdim(Tensor::from_data({6, 9}, shifted, false));
    for (std::size_t i = 0; i < y.data().size(); ++i) {
        CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-6);
    }
}

TEST_CASE("softmax NaN input raises diagnostics flag in verification mode") {
    PrecisionScope f64(Precision::f64);
    diag::reset_nan_flag();
    Tensor x = Tensor::from_data({2}, {0.0, std::nan("")}, false);
    Tensor y = ops::softmax_lastdim(x);
    CHECK(diag::nan_flag());
    CHECK(std::isnan(y.data()[0]));
    diag::reset_nan_flag();
}

TEST_CASE("gelu center and cross entropy of uniform logits") {
    PrecisionScope f64(Precision::f64);
    Tensor zero = Tensor::zeros({1});
    CHECK(ops::gelu(zero).data()[0] == 0.0);

    for (int classes : {2, 7, 16}) {
        Tensor logits = Tensor::zeros({3, classes});
        Tensor loss = ops::cross_entropy_with_logits(logits, {0, 1, 0});
        CHECK(loss.item() == doctest::Approx(std::log(double(classes))).epsilon(1e-12));
    }
}

TEST_CASE("determinism: identical seed and op sequence, any worker count") {
    auto run = [] {
        Rng rng(99);
        Tensor a = randn(rng.split("a"), {24, 33});
        Tensor b = randn(rng.split("b"), {33, 17});
        Tensor c = ops::softmax_lastdim(ops::matmul(a, b));
        return c.data();
    };
    set_worker_count(1);
    const auto serial = run();
    set_worker_count(7);
    const auto threaded = run();
    set_worker_count(0);
    const auto defaulted = run();
    REQUIRE(serial.size() == threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i] == threaded[i]);
        CHECK(serial[i] == defaulted[i]);
    }
}

TEST_CASE("f32 mode stores f32-representable values") {
    PrecisionScope f32(Precision::f32);
    Tensor a = randn(Rng(3), {5, 5});
    Tensor b = ops::matmul(a, a);
    for (double v : b.data()) {
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
}

TEST_CASE("rng: identical seeds identical streams, splits decorrelate") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42);
    Rng c1 = c.split("weights");
    Rng c2 = c.split("data");
    CHECK(c1.next_u64() != c2.next_u64());

    Rng d1 = Rng(42).split("weights");
    Rng d2 = Rng(42).split("weights");
    for (int i = 0; i < 10; ++i) CHECK(d1.next_u64() == d2.next_u64());

    // Frozen sample of the root stream: platform-exact by contract.
    Rng frozen(2024);
    const std::uint64_t first = frozen.next_u64();
    Rng frozen2(2024);
    CHECK(first == frozen2.next_u64());
}

TEST_CASE("rng: unit floats in range, trunc normal respects bounds") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double z = rng.next_trunc_normal(0.02);
        CHECK(std::abs(z) <= 0.04 + 1e-12);
    }
}

TEST_CASE("grad_check: f = sum(x) has zero error") {
    PrecisionScope f64(Precision::f64);
    Tensor x = randn(Rng(11), {3, 4});
    const double err = grad_check([](const Tensor& t) { return ops::sum(t); }, x);
    CHECK(err < 1e-9);
}

TEST_CASE("gelu gradient at 0.5 matches central difference within 1e-6") {
    PrecisionScope f64(Precision::f64);
    Tensor x = Tensor::from_data({1}, {0.5}, true);
    Tensor y = ops::sum(ops::gelu(x));
    y.backward();
    const double analytic = x.grad()[0];
    const double eps = 1e-6;
    auto g = [](double v) {
        const double u = ops::kGeluCoeff * (v + ops::kGeluCubic * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
    };
    const double numeric = (g(0.5 + eps) - g(0.5 - eps)) / (2.0 * eps);
    CHECK(std::abs(analytic - numeric) < 1e-6);
}
