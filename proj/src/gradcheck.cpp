#include "vit5/gradcheck.hpp"

#include <cmath>
#include <set>

#include "vit5/ops.hpp"
#include "vit5/rng.hpp"

namespace vit5 {

namespace {

std::string op_chain(const Tensor& out) {
    std::set<std::string> names;
    std::vector<const Node*> stack;
    if (out.node()) stack.push_back(out.node().get());
    std::set<const Node*> seen;
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        names.insert(n->op);
        for (const Tensor& p : n->parents) {
            if (p.node()) stack.push_back(p.node().get());
        }
    }
    std::string joined;
    for (const auto& s : names) {
        if (!joined.empty()) joined += ",";
        joined += s;
    }
    return joined;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double eps) {
    if (precision() != Precision::f64) {
        throw std::runtime_error("grad_check: requires f64 verification mode");
    }
    Tensor probe = Tensor::from_data(x.shape(), x.data(), true);
    Tensor out = f(probe);
    if (out.numel() != 1) throw std::runtime_error("grad_check: f must be scalar-valued");
    out.backward();
    std::vector<double> analytic = probe.grad();
    for (double g : analytic) {
        if (!std::isfinite(g)) {
            throw std::runtime_error("grad_check: non-finite analytic gradient through ops [" +
                                     op_chain(out) + "]");
        }
    }

    NoGradScope ng;
    double worst = 0.0;
    auto& data = probe.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + eps;
        const double plus = f(probe).item();
        data[i] = saved - eps;
        const double minus = f(probe).item();
        data[i] = saved;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// op registry
// ---------------------------------------------------------------------------

namespace {

Tensor random_tensor(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

// Scalarizes an op output against a fixed random weighting so every output
// coordinate contributes a distinct gradient signal.
Tensor weighted(const Tensor& y, const Tensor& r) { return ops::sum(ops::mul(y, r)); }

using CaseFn = std::function<Tensor(const Tensor&)>;

double check_over(const std::vector<std::pair<Tensor, CaseFn>>& probes, double eps = 1e-5) {
    double worst = 0.0;
    for (auto& [x, f] : probes) {
        Tensor probe = x;
        worst = std::max(worst, grad_check(f, probe, eps));
    }
    return worst;
}

}  // namespace

std::vector<GradCase> op_grad_cases(std::uint64_t seed) {
    std::vector<GradCase> cases;
    auto add_case = [&](std::string name, std::function<double()> run) {
        cases.push_back({std::move(name), std::move(run)});
    };
    const std::vector<Shape> row_shapes = {{2, 3}, {4, 5}, {1, 7}};
    const std::vector<Shape> any_shapes = {{6}, {2, 3, 2}, {5, 4}};

    add_case("add", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("add");
        for (const auto& s : any_shapes) {
            Tensor b = random_tensor(rng.split("b"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("a"), s),
                              [b, r](const Tensor& x) { return weighted(ops::add(x, b), r); }});
            probes.push_back({random_tensor(rng.split("a2"), s),
                              [b, r](const Tensor& x) { return weighted(ops::add(b, x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("mul", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("mul");
        for (const auto& s : any_shapes) {
            Tensor b = random_tensor(rng.split("b"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("a"), s),
                              [b, r](const Tensor& x) { return weighted(ops::mul(x, b), r); }});
            probes.push_back({random_tensor(rng.split("a2"), s),
                              [b, r](const Tensor& x) { return weighted(ops::mul(b, x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("scale", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("scale");
        for (const auto& s : any_shapes) {
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("x"), s),
                              [r](const Tensor& x) { return weighted(ops::scale(x, -1.7), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("add_rowvec", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("add_rowvec");
        for (const auto& s : row_shapes) {
            Tensor v = random_tensor(rng.split("v"), {s.back()});
            Tensor x0 = random_tensor(rng.split("x"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({x0, [v, r](const Tensor& x) { return weighted(ops::add_rowvec(x, v), r); }});
            probes.push_back({v, [x0, r](const Tensor& v2) { return weighted(ops::add_rowvec(x0, v2), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("mul_rowvec", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("mul_rowvec");
        for (const auto& s : row_shapes) {
            Tensor v = random_tensor(rng.split("v"), {s.back()});
            Tensor x0 = random_tensor(rng.split("x"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({x0, [v, r](const Tensor& x) { return weighted(ops::mul_rowvec(x, v), r); }});
            probes.push_back({v, [x0, r](const Tensor& v2) { return weighted(ops::mul_rowvec(x0, v2), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("matmul", [=] {
        struct Dims { Shape a, b; };
        const std::vector<Dims> dims = {
            {{2, 3}, {3, 2}}, {{4, 1}, {1, 5}}, {{2, 3, 4}, {2, 4, 2}}, {{2, 3, 4}, {4, 5}}};
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("matmul");
        for (const auto& dm : dims) {
            Tensor a0 = random_tensor(rng.split("a"), dm.a);
            Tensor b0 = random_tensor(rng.split("b"), dm.b);
            Tensor r = random_tensor(rng.split("r"), ops::matmul(a0, b0).shape());
            probes.push_back({a0, [b0, r](const Tensor& a) { return weighted(ops::matmul(a, b0), r); }});
            probes.push_back({b0, [a0, r](const Tensor& b) { return weighted(ops::matmul(a0, b), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("softmax_lastdim", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("softmax");
        for (const auto& s : row_shapes) {
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("x"), s, 2.0),
                              [r](const Tensor& x) { return weighted(ops::softmax_lastdim(x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("gelu", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("gelu");
        for (const auto& s : any_shapes) {
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("x"), s, 1.5),
                              [r](const Tensor& x) { return weighted(ops::gelu(x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("silu", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("silu");
        for (const auto& s : any_shapes) {
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("x"), s, 1.5),
                              [r](const Tensor& x) { return weighted(ops::silu(x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("reshape", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("reshape");
        const std::vector<std::pair<Shape, Shape>> views = {
            {{2, 3}, {6}}, {{4, 5}, {2, 10}}, {{2, 3, 2}, {3, 4}}};
        for (const auto& [from, to] : views) {
            Tensor r = random_tensor(rng.split("r"), to);
            probes.push_back({random_tensor(rng.split("x"), from),
                              [to, r](const Tensor& x) { return weighted(ops::reshape(x, to), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("transpose_last2", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("transpose");
        const std::vector<Shape> shapes = {{2, 3}, {2, 3, 4}, {1, 5, 2}};
        for (const auto& s : shapes) {
            Shape ts = s;
            std::swap(ts[ts.size() - 1], ts[ts.size() - 2]);
            Tensor r = random_tensor(rng.split("r"), ts);
            probes.push_back({random_tensor(rng.split("x"), s),
                              [r](const Tensor& x) { return weighted(ops::transpose_last2(x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("permute", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("permute");
        struct P { Shape s; std::vector<int> axes; };
        const std::vector<P> ps = {
            {{2, 3, 4}, {2, 0, 1}}, {{2, 3, 2, 2}, {0, 2, 1, 3}}, {{3, 4}, {1, 0}}};
        for (const auto& p : ps) {
            Shape os(p.axes.size());
            for (std::size_t i = 0; i < p.axes.size(); ++i) os[i] = p.s[p.axes[i]];
            Tensor r = random_tensor(rng.split("r"), os);
            auto axes = p.axes;
            probes.push_back({random_tensor(rng.split("x"), p.s),
                              [axes, r](const Tensor& x) { return weighted(ops::permute(x, axes), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("concat_tokens", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("concat");
        const std::vector<std::array<std::int64_t, 4>> dims = {
            {2, 1, 3, 3}, {1, 2, 4, 2}, {3, 3, 1, 2}};  // B, T1, T2, d
        for (const auto& dm : dims) {
            Tensor a0 = random_tensor(rng.split("a"), {dm[0], dm[1], dm[3]});
            Tensor b0 = random_tensor(rng.split("b"), {dm[0], dm[2], dm[3]});
            Tensor r = random_tensor(rng.split("r"), {dm[0], dm[1] + dm[2], dm[3]});
            probes.push_back({a0, [b0, r](const Tensor& a) {
                                  return weighted(ops::concat_tokens({a, b0}), r);
                              }});
            probes.push_back({b0, [a0, r](const Tensor& b) {
                                  return weighted(ops::concat_tokens({a0, b}), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("slice_tokens", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("slice");
        struct S { Shape s; std::int64_t start, len; };
        const std::vector<S> ss = {{{2, 5, 3}, 1, 2}, {{1, 4, 2}, 0, 4}, {{3, 3, 2}, 2, 1}};
        for (const auto& sc : ss) {
            Tensor r = random_tensor(rng.split("r"), {sc.s[0], sc.len, sc.s[2]});
            auto start = sc.start;
            auto len = sc.len;
            probes.push_back({random_tensor(rng.split("x"), sc.s),
                              [start, len, r](const Tensor& x) {
                                  return weighted(ops::slice_tokens(x, start, len), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("mean_tokens", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("mean_tokens");
        const std::vector<Shape> shapes = {{2, 5, 3}, {1, 4, 2}, {3, 1, 4}};
        for (const auto& s : shapes) {
            Tensor r = random_tensor(rng.split("r"), {s[0], s[2]});
            probes.push_back({random_tensor(rng.split("x"), s),
                              [r](const Tensor& x) { return weighted(ops::mean_tokens(x), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("mean_lastdims", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("mean_lastdims");
        struct M { Shape s; int nd; Shape os; };
        const std::vector<M> ms = {{{2, 3, 4}, 2, {2}}, {{4, 5}, 1, {4}}, {{2, 3}, 2, {1}}};
        for (const auto& m : ms) {
            Tensor r = random_tensor(rng.split("r"), m.os);
            int nd = m.nd;
            probes.push_back({random_tensor(rng.split("x"), m.s),
                              [nd, r](const Tensor& x) { return weighted(ops::mean_lastdims(x, nd), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("gather_rows", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("gather");
        struct G { Shape s; std::vector<std::int64_t> rows; };
        const std::vector<G> gs = {
            {{4, 3}, {0, 2, 2}}, {{5, 2}, {4, 0, 1, 1}}, {{3, 2, 2}, {2, 2, 2}}};
        for (const auto& g : gs) {
            Shape os = g.s;
            os[0] = static_cast<std::int64_t>(g.rows.size());
            Tensor r = random_tensor(rng.split("r"), os);
            auto rows = g.rows;
            probes.push_back({random_tensor(rng.split("x"), g.s),
                              [rows, r](const Tensor& x) { return weighted(ops::gather_rows(x, rows), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("sum", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("sum");
        for (const auto& s : any_shapes) {
            probes.push_back({random_tensor(rng.split("x"), s),
                              [](const Tensor& x) { return ops::sum(x); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("cross_entropy_with_logits", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("xent");
        const std::vector<Shape> shapes = {{2, 3}, {4, 5}, {1, 7}};
        Rng lrng = Rng(seed).split("labels");
        for (const auto& s : shapes) {
            std::vector<std::int64_t> labels(static_cast<std::size_t>(s[0]));
            for (auto& l : labels) l = static_cast<std::int64_t>(lrng.next_below(static_cast<std::uint64_t>(s[1])));
            probes.push_back({random_tensor(rng.split("x"), s, 2.0),
                              [labels](const Tensor& x) {
                                  return ops::cross_entropy_with_logits(x, labels);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("rmsnorm", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("rmsnorm");
        for (const auto& s : row_shapes) {
            Tensor g0 = random_tensor(rng.split("g"), {s.back()});
            Tensor x0 = random_tensor(rng.split("x"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({x0, [g0, r](const Tensor& x) {
                                  return weighted(ops::rmsnorm(x, g0, 1e-6), r);
                              }});
            probes.push_back({g0, [x0, r](const Tensor& g) {
                                  return weighted(ops::rmsnorm(x0, g, 1e-6), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("rmsnorm_per_head", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("rmsnorm_ph");
        const std::vector<Shape> shapes = {{1, 2, 3, 4}, {2, 3, 1, 2}, {1, 1, 4, 6}};
        for (const auto& s : shapes) {
            Tensor g0 = random_tensor(rng.split("g"), {s[1], s[3]});
            Tensor x0 = random_tensor(rng.split("x"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({x0, [g0, r](const Tensor& x) {
                                  return weighted(ops::rmsnorm_per_head(x, g0, 1e-6), r);
                              }});
            probes.push_back({g0, [x0, r](const Tensor& g) {
                                  return weighted(ops::rmsnorm_per_head(x0, g, 1e-6), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("layernorm", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("layernorm");
        for (const auto& s : row_shapes) {
            Tensor g0 = random_tensor(rng.split("g"), {s.back()});
            Tensor b0 = random_tensor(rng.split("b"), {s.back()});
            Tensor x0 = random_tensor(rng.split("x"), s);
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({x0, [g0, b0, r](const Tensor& x) {
                                  return weighted(ops::layernorm(x, g0, b0, 1e-6), r);
                              }});
            probes.push_back({g0, [x0, b0, r](const Tensor& g) {
                                  return weighted(ops::layernorm(x0, g, b0, 1e-6), r);
                              }});
            probes.push_back({b0, [x0, g0, r](const Tensor& b) {
                                  return weighted(ops::layernorm(x0, g0, b, 1e-6), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("rope_rotate", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("rope");
        const std::vector<Shape> shapes = {{1, 2, 3, 4}, {2, 1, 2, 8}, {3, 4}};
        for (const auto& s : shapes) {
            const std::int64_t T = s[s.size() - 2], dh = s.back();
            auto cs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(T * dh / 2));
            auto sn = std::make_shared<std::vector<double>>(cs->size());
            Rng arng = rng.split("angles");
            for (std::size_t i = 0; i < cs->size(); ++i) {
                const double a = arng.next_unit() * 6.28318530717958647;
                (*cs)[i] = std::cos(a);
                (*sn)[i] = std::sin(a);
            }
            Tensor r = random_tensor(rng.split("r"), s);
            probes.push_back({random_tensor(rng.split("x"), s),
                              [cs, sn, r](const Tensor& x) {
                                  return weighted(ops::rope_rotate(x, cs, sn), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("extract_patches", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("patches");
        struct E { Shape s; std::int64_t p; };
        const std::vector<E> es = {{{1, 1, 4, 4}, 2}, {{2, 2, 2, 2}, 1}, {{1, 3, 6, 4}, 2}};
        for (const auto& e : es) {
            const std::int64_t T = (e.s[2] / e.p) * (e.s[3] / e.p);
            Tensor r = random_tensor(rng.split("r"), {e.s[0], T, e.s[1] * e.p * e.p});
            auto p = e.p;
            probes.push_back({random_tensor(rng.split("x"), e.s),
                              [p, r](const Tensor& x) {
                                  return weighted(ops::extract_patches(x, p), r);
                              }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    add_case("tile_batch", [=] {
        std::vector<std::pair<Tensor, CaseFn>> probes;
        Rng rng = Rng(seed).split("tile");
        struct T2 { Shape s; std::int64_t b; };
        const std::vector<T2> ts = {{{3, 2}, 2}, {{1, 4}, 3}, {{5, 1}, 1}};
        for (const auto& t : ts) {
            Tensor r = random_tensor(rng.split("r"), {t.b, t.s[0], t.s[1]});
            auto b = t.b;
            probes.push_back({random_tensor(rng.split("x"), t.s),
                              [b, r](const Tensor& x) { return weighted(ops::tile_batch(x, b), r); }});
            rng = rng.split("next");
        }
        return check_over(probes);
    });

    return cases;
}

std::vector<GradReport> run_grad_cases(const std::vector<GradCase>& cases, double threshold) {
    std::vector<GradReport> reports;
    reports.reserve(cases.size());
    for (const auto& c : cases) {
        const double err = c.run();
        reports.push_back({c.name, err, err < threshold});
    }
    return reports;
}

}  // namespace vit5
