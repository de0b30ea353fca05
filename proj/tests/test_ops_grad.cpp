#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vit5/gradcheck.hpp"

using namespace vit5;

// Every registered differentiable op must match central finite differences
// (f64, eps=1e-5) with relative error < 1e-4 on random inputs of >= 3 shapes.
TEST_CASE("all registered ops pass finite-difference checks") {
    PrecisionScope f64(Precision::f64);
    const auto cases = op_grad_cases(20240917);
    CHECK(cases.size() >= 15);
    const auto reports = run_grad_cases(cases, 1e-4);
    for (const auto& r : reports) {
        INFO(r.name << " max_rel_err=" << r.max_rel_err);
        CHECK(r.ok);
    }
}
