#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vit5/tensor.hpp"

namespace vit5 {

// Central-difference verification of reverse-mode gradients. f must be a
// deterministic scalar-valued function; runs in f64 mode only. Returns
// max over coordinates of |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double eps = 1e-5);

struct GradCase {
    std::string name;
    std::function<double()> run;  // max relative error over >= 3 input shapes
};

std::vector<GradCase> op_grad_cases(std::uint64_t seed);
std::vector<GradCase> component_grad_cases(std::uint64_t seed);
std::vector<GradCase> model_grad_cases(std::uint64_t seed);

struct GradReport {
    std::string name;
    double max_rel_err;
    bool ok;
};

std::vector<GradReport> run_grad_cases(const std::vector<GradCase>& cases, double threshold = 1e-4);

}  // namespace vit5
