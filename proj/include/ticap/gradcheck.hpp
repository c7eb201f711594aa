#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ticap/capsule.hpp"
#include "ticap/layers.hpp"
#include "ticap/model.hpp"

namespace ticap {

/// Outcome of one layer's analytic-vs-central-difference comparison.
struct GradCheckReport {
    std::string layer;
    std::size_t instances = 0;  // independently randomized graphs
    std::size_t probes = 0;     // finite-difference coordinates compared
    double max_rel_err = 0.0;
    bool passed = false;
};

/// Central-difference gradient checker, double precision. A loss builder is
/// re-run with one leaf coordinate displaced by +-h and the quotient is
/// compared against the recorded analytic gradient.
class GradChecker {
public:
    double h = 1e-5;
    double tolerance = 1e-4;
    double denom_floor = 1e-5;  // treat gradients this small as zero-scale

    /// Max relative error over `probes_per_leaf` random coordinates of every
    /// leaf. `corrupt` perturbs the analytic gradient first (harness
    /// self-test hook).
    double check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> leaves, Rng& rng,
                 std::size_t probes_per_leaf, std::size_t* probe_count = nullptr, bool corrupt = false) {
        Tensor<double> loss = loss_fn();
        for (auto& l : leaves) l.zero_grad();
        GradTape<double> tape(loss);
        tape.backward();
        std::vector<std::vector<double>> analytic;
        analytic.reserve(leaves.size());
        for (auto& l : leaves) analytic.push_back(l.grad());
        if (corrupt && !analytic.empty() && !analytic[0].empty()) analytic[0][0] = analytic[0][0] * 1.05 + 0.01;

        double worst = 0.0;
        for (std::size_t li = 0; li < leaves.size(); ++li) {
            auto& vals = leaves[li].raw_value();
            const std::size_t n = vals.size();
            const std::size_t probes = std::min<std::size_t>(probes_per_leaf, n);
            for (std::size_t p = 0; p < probes; ++p) {
                const std::size_t i = n <= probes_per_leaf ? p : static_cast<std::size_t>(rng.below(n));
                const double saved = vals[i];
                vals[i] = saved + h;
                const double up = loss_fn().item();
                vals[i] = saved - h;
                const double down = loss_fn().item();
                vals[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double a = analytic[li][i];
                const double denom = std::max({std::abs(a), std::abs(fd), denom_floor});
                worst = std::max(worst, std::abs(a - fd) / denom);
                if (probe_count) ++(*probe_count);
            }
        }
        return worst;
    }
};

namespace detail {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>::param(std::move(shape), std::move(v));
}

}  // namespace detail

/// Runs the whole gradient suite. Each entry rebuilds ≥`instances` fresh
/// randomized graphs and compares analytic gradients against central
/// differences at tolerance 1e-4. `inject_fault` corrupts the analytic
/// gradient of the named layer so the harness's failure path can be
/// exercised deliberately.
inline std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed, const std::string& inject_fault = "",
                                                    std::size_t instances = 100,
                                                    std::size_t model_instances = 2,
                                                    std::size_t model_probes = 50) {
    using detail::random_tensor;
    GradChecker checker;
    std::vector<GradCheckReport> reports;
    Rng root(seed);

    auto run = [&](const std::string& name, std::size_t count,
                   const std::function<double(Rng&, std::size_t&, bool)>& instance) {
        GradCheckReport rep;
        rep.layer = name;
        rep.instances = count;
        Rng rng = root.fork(std::hash<std::string>{}(name));
        const bool corrupt = inject_fault == name;
        for (std::size_t k = 0; k < count; ++k)
            rep.max_rel_err = std::max(rep.max_rel_err, instance(rng, rep.probes, corrupt && k == 0));
        rep.passed = rep.max_rel_err < checker.tolerance;
        reports.push_back(rep);
    };

    run("matmul", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
        auto a = random_tensor({m, k}, rng);
        auto b = random_tensor({k, n}, rng);
        auto w = random_tensor({m * n}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(matmul(a, b)), w), {1, m * n}),
                                        Tensor<double>::ones({m * n})); };
        return checker.check(loss, {a, b, w}, rng, 3, &probes, corrupt);
    });

    run("elementwise", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        auto a = random_tensor({2, 3}, rng);
        auto b = random_tensor({3}, rng);
        auto loss = [&] {
            auto x = add(a, b);                       // broadcast add
            auto y = mul(sigmoid(x), tanh_op(sub(a, b)));
            return matmul(reshape(y, {1, 6}), Tensor<double>::ones({6}));
        };
        return checker.check(loss, {a, b}, rng, 4, &probes, corrupt);
    });

    run("relu", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        // keep pre-activations away from the kink
        std::vector<double> v(6);
        for (double& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
        auto a = Tensor<double>::param({6}, std::move(v));
        auto w = random_tensor({6}, rng);
        auto loss = [&] { return matmul(reshape(relu(a), {1, 6}), w); };
        return checker.check(loss, {a}, rng, 4, &probes, corrupt);
    });

    run("softmax", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t r = 2 + rng.below(3), c = 2 + rng.below(3);
        auto a = random_tensor({r, c}, rng, -2.0, 2.0);
        auto w = random_tensor({r * c}, rng);
        auto loss = [&] { return matmul(reshape(mul(softmax_axis(a, 1), reshape(w, {r, c})), {1, r * c}),
                                        Tensor<double>::ones({r * c})); };
        return checker.check(loss, {a, w}, rng, 4, &probes, corrupt);
    });

    run("concat_stack", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        auto a = random_tensor({3}, rng);
        auto b = random_tensor({2}, rng);
        auto w = random_tensor({10}, rng);
        auto loss = [&] {
            auto row = concat_last<double>({a, b});
            auto m = stack_rows<double>({row, row});
            return matmul(reshape(mul(flatten(m), w), {1, 10}), Tensor<double>::ones({10}));
        };
        return checker.check(loss, {a, b, w}, rng, 4, &probes, corrupt);
    });

    run("dense", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t in = 2 + rng.below(4), out = 1 + rng.below(3);
        auto x = random_tensor({in}, rng);
        auto W = random_tensor({out, in}, rng);
        auto b = random_tensor({out}, rng);
        auto loss = [&] { return matmul(reshape(dense(x, W, b), {1, out}), Tensor<double>::ones({out})); };
        return checker.check(loss, {x, W, b}, rng, 4, &probes, corrupt);
    });

    run("gru_cell", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        Rng prng = rng.fork(1);
        GruParams<double> p(3, 2, prng);
        auto x = random_tensor({3}, rng);
        auto h = random_tensor({2}, rng);
        auto loss = [&] { return matmul(reshape(gru_cell(x, h, p), {1, 2}), Tensor<double>::ones({2})); };
        auto leaves = p.tensors();
        leaves.push_back(x);
        leaves.push_back(h);
        return checker.check(loss, leaves, rng, 2, &probes, corrupt);
    });

    run("bigru", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        Rng prng = rng.fork(2);
        GruParams<double> f(3, 2, prng), b(3, 2, prng);
        auto X = random_tensor({4, 3}, rng);
        auto w = random_tensor({4 * 4}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(bigru_sequence(X, f, b)), w), {1, 16}),
                                        Tensor<double>::ones({16})); };
        std::vector<Tensor<double>> leaves{X, f.Wz, f.Un, f.bh, b.Wr, b.Uz, b.bz};
        return checker.check(loss, leaves, rng, 2, &probes, corrupt);
    });

    run("lstm_cell", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        Rng prng = rng.fork(3);
        LstmParams<double> p(3, 2, prng);
        auto x = random_tensor({3}, rng);
        auto h = random_tensor({2}, rng);
        auto c = random_tensor({2}, rng);
        auto loss = [&] {
            auto s = lstm_cell(x, LstmState<double>{h, c}, p);
            return matmul(reshape(concat_last<double>({s.h, s.c}), {1, 4}), Tensor<double>::ones({4}));
        };
        auto leaves = p.tensors();
        leaves.push_back(x);
        leaves.push_back(h);
        leaves.push_back(c);
        return checker.check(loss, leaves, rng, 2, &probes, corrupt);
    });

    run("conv2d", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        Rng prng = rng.fork(4);
        const std::size_t H = 5 + rng.below(3), k = 2 + rng.below(2), stride = 1 + rng.below(2);
        ConvParams<double> p(2, k, 2, stride, prng);
        auto x = random_tensor({H, H, 2}, rng);
        const std::size_t out_elems = conv_output_extent(H, k, stride) * conv_output_extent(H, k, stride) * 2;
        auto w = random_tensor({out_elems}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(conv2d_valid(x, p)), w), {1, out_elems}),
                                        Tensor<double>::ones({out_elems})); };
        return checker.check(loss, {x, p.weights, p.bias, w}, rng, 3, &probes, corrupt);
    });

    run("squash", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t N = 1 + rng.below(4), D = 2 + rng.below(4);
        const double scl = std::pow(10.0, rng.uniform(-2.0, 2.0));
        auto s = random_tensor({N, D}, rng, -scl, scl);
        auto w = random_tensor({N * D}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(squash_rows(s)), w), {1, N * D}),
                                        Tensor<double>::ones({N * D})); };
        return checker.check(loss, {s, w}, rng, 4, &probes, corrupt);
    });

    run("predict_vectors", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t I = 2 + rng.below(3), J = 1 + rng.below(3);
        auto h = random_tensor({I, 3}, rng);
        auto W = random_tensor({I, J, 2, 3}, rng);
        auto w = random_tensor({I * J * 2}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(predict_vectors(h, W)), w), {1, I * J * 2}),
                                        Tensor<double>::ones({I * J * 2})); };
        return checker.check(loss, {h, W, w}, rng, 4, &probes, corrupt);
    });

    run("routing_3iter", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        const std::size_t I = 2 + rng.below(3), J = 2, D = 2 + rng.below(2);
        auto u = random_tensor({I, J, D}, rng);
        auto w = random_tensor({J * D}, rng);
        auto loss = [&] {
            auto [v, state] = dynamic_routing(u, 3);
            (void)state;
            return matmul(reshape(mul(flatten(v), w), {1, J * D}), Tensor<double>::ones({J * D}));
        };
        return checker.check(loss, {u, w}, rng, 4, &probes, corrupt);
    });

    run("embedding", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        auto table = random_tensor({6, 3}, rng);
        std::vector<int> ids{0, static_cast<int>(1 + rng.below(5)), static_cast<int>(rng.below(6))};
        auto w = random_tensor({9}, rng);
        auto loss = [&] { return matmul(reshape(mul(flatten(embedding_gather(table, ids)), w), {1, 9}),
                                        Tensor<double>::ones({9})); };
        return checker.check(loss, {table, w}, rng, 4, &probes, corrupt);
    });

    run("colmax_bce", instances, [&](Rng& rng, std::size_t& probes, bool corrupt) {
        auto x = random_tensor({4, 3}, rng);
        auto W = random_tensor({1, 3}, rng);
        auto b = random_tensor({1}, rng);
        const double target = rng.uniform() < 0.5 ? 0.0 : 1.0;
        auto loss = [&] { return bce_loss(sigmoid(dense(colmax(x), W, b)), target); };
        return checker.check(loss, {x, W, b}, rng, 4, &probes, corrupt);
    });

    // full desk-profile model: image + text + numeric fused, loss probed at
    // random parameter coordinates of every named tensor group
    {
        GradCheckReport rep;
        rep.layer = "ti_capsule_desk";
        rep.instances = model_instances;
        Rng rng = root.fork(0xf00d);
        const bool corrupt = inject_fault == rep.layer;
        for (std::size_t inst = 0; inst < model_instances; ++inst) {
            ModelSpec ms;
            ms.kind = ModelKind::ti_capsule;
            ms.profile = ScaleProfile::desk();
            Model<double> m = Model<double>::build_dims(ms, 24, 12, rng.next_u64());
            const std::size_t is = ms.profile.image_size;
            std::vector<double> image(is * is);
            for (double& v : image) v = rng.uniform();
            std::vector<int> ids(ms.n, 0);
            for (std::size_t i = 0; i < 12; ++i) ids[i] = static_cast<int>(rng.below(24));
            std::array<double, 7> numeric{};
            for (auto& v : numeric) v = rng.uniform();
            const double target = rng.uniform() < 0.5 ? 0.0 : 1.0;
            ModelInput in;
            in.token_ids = &ids;
            in.image = &image;
            in.image_h = is;
            in.image_w = is;
            in.numeric = &numeric;
            auto loss_fn = [&] { return bce_loss(m.forward(in, false, nullptr), target); };

            Tensor<double> loss = loss_fn();
            m.zero_grads();
            GradTape<double> tape(loss);
            tape.backward();
            GradChecker chk;
            for (std::size_t p = 0; p < model_probes; ++p) {
                auto& par = m.params()[rng.below(m.params().size())];
                auto& vals = par.tensor.raw_value();
                const std::size_t i = static_cast<std::size_t>(rng.below(vals.size()));
                double a = par.tensor.grad()[i];
                if (corrupt && p == 0) a = a * 1.05 + 0.01;
                const double saved = vals[i];
                vals[i] = saved + chk.h;
                const double up = loss_fn().item();
                vals[i] = saved - chk.h;
                const double down = loss_fn().item();
                vals[i] = saved;
                const double fd = (up - down) / (2.0 * chk.h);
                const double denom = std::max({std::abs(a), std::abs(fd), chk.denom_floor});
                rep.max_rel_err = std::max(rep.max_rel_err, std::abs(a - fd) / denom);
                ++rep.probes;
            }
        }
        rep.passed = rep.max_rel_err < checker.tolerance;
        reports.push_back(rep);
    }

    return reports;
}

}  // namespace ticap
