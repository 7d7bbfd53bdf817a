// g2hf command-line tool: forward inference, self verification, gradient
// checking, single-image toy training, and saliency-map evaluation.
//
// Exit codes: 0 success, 1 check failure, 2 malformed image,
//             3 weight-file error, 4 precondition violation.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "g2hf/g2hf.hpp"

using namespace g2hf;
namespace fs = std::filesystem;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitBadImage = 2;
constexpr int kExitBadWeights = 3;
constexpr int kExitPrecondition = 4;

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform_symmetric(scale);
    return t;
}

Tensor rand_binary(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    return t;
}

Tensor rand_soft(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) t[i] = 0.1 + 0.8 * rng.uniform();
    return t;
}

template <class F>
ParamStore seeded_params(std::uint64_t seed, F&& fn) {
    ParamStore store;
    Rng rng(seed);
    store.attach_init_rng(&rng);
    Tape t;
    t.grad_enabled = false;
    Ctx c{t, store, "", nullptr};
    fn(c, t);
    store.attach_init_rng(nullptr);
    return store;
}

// [c, n*c, k, k] Dirac stack selecting channel o from each group with `scale`
Tensor dirac_groups(int c, int n, int k, double scale) {
    Tensor w({c, n * c, k, k});
    for (int o = 0; o < c; ++o)
        for (int j = 0; j < n; ++j) w.at(o, j * c + o, k / 2, k / 2) = scale;
    return w;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

ParamStore g_no_params;

// finite-difference check over input leaves only
double input_gradcheck(std::uint64_t seed, std::vector<Tensor> inputs,
                       std::function<Var(Tape&, const std::vector<Var>&)> f) {
    GradCheck gc;
    gc.weights = &g_no_params;
    gc.check_params = false;
    gc.seed = seed;
    gc.inputs = std::move(inputs);
    gc.build = [f](Ctx c, const std::vector<Var>& in) { return f(c.tape, in); };
    return gc.max_rel_err();
}

// loss = sum(y .* r) so every output coordinate carries a distinct adjoint
Var readout(Tape& t, Var y, const Tensor& r) { return sum(t, mul(t, y, t.leaf(r))); }

struct Check {
    std::string name;
    std::function<bool()> fn;
};

std::vector<Check> build_checks() {
    std::vector<Check> cs;
    auto add = [&](const std::string& n, std::function<bool()> f) { cs.push_back({n, std::move(f)}); };

    add("conv.identity_kernel", [] {
        Rng rng(1);
        Tensor x = rand_tensor({3, 5, 5}, rng);
        Tensor w({3, 3, 1, 1});
        for (int o = 0; o < 3; ++o) w.at(o, o, 0, 0) = 1.0;
        return conv2d_fwd(x, w, Tensor({3}), 1, 0).max_abs_diff(x) == 0.0;
    });
    add("conv.ones_kernel_tap_count", [] {
        Tensor x = Tensor::full({1, 4, 4}, 2.0);
        Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
        Tensor y = conv2d_fwd(x, w, Tensor({1}), 1, 1);
        return y.at(0, 1, 1) == 18.0 && y.at(0, 0, 0) == 8.0;
    });
    add("conv.gradcheck", [] {
        Rng rng(2);
        Tensor r = rand_tensor({2, 4, 4}, rng);
        double e = input_gradcheck(
            3, {rand_tensor({3, 4, 4}, rng), rand_tensor({2, 3, 3, 3}, rng), rand_tensor({2}, rng)},
            [r](Tape& t, const std::vector<Var>& in) {
                return readout(t, conv2d(t, in[0], in[1], in[2], 1, 1), r);
            });
        return e < 1e-4;
    });
    add("unshuffle.block_example", [] {
        Tensor x({1, 2, 2}, {1, 2, 3, 4});
        Tensor y = pixel_unshuffle_fwd(x, 2);
        return y.shape() == std::vector<int>{4, 1, 1} && y[0] == 1 && y[1] == 2 && y[2] == 3 &&
               y[3] == 4;
    });
    add("shuffle.block_example", [] {
        Tensor x({4, 1, 1}, {1, 2, 3, 4});
        Tensor y = pixel_shuffle_fwd(x, 2);
        return y.shape() == std::vector<int>{1, 2, 2} && y.at(0, 0, 0) == 1 && y.at(0, 0, 1) == 2 &&
               y.at(0, 1, 0) == 3 && y.at(0, 1, 1) == 4;
    });
    add("unshuffle.roundtrip_200", [] {
        Rng rng(4);
        for (int i = 0; i < 200; ++i) {
            const int r = std::vector<int>{1, 2, 4, 6}[rng.next_u64() % 4];
            const int c = 1 + static_cast<int>(rng.next_u64() % 3);
            const int s = r * (1 + static_cast<int>(rng.next_u64() % 3));
            Tensor x = rand_tensor({c, s, s}, rng);
            if (pixel_shuffle_fwd(pixel_unshuffle_fwd(x, r), r).max_abs_diff(x) != 0.0) return false;
        }
        return true;
    });
    add("unshuffle.gradcheck", [] {
        Rng rng(5);
        Tensor r = rand_tensor({8, 3, 3}, rng);
        double e = input_gradcheck(6, {rand_tensor({2, 6, 6}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, pixel_unshuffle(t, in[0], 2), r);
                                   });
        return e < 1e-4;
    });
    add("shuffle.gradcheck", [] {
        Rng rng(7);
        Tensor r = rand_tensor({2, 6, 6}, rng);
        double e = input_gradcheck(8, {rand_tensor({8, 3, 3}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, pixel_shuffle(t, in[0], 2), r);
                                   });
        return e < 1e-4;
    });
    add("pool.max_example", [] {
        Tensor x({3, 1, 1}, {-1.0, 0.0, 3.0});
        return channel_max_pool_fwd(x)[0] == 3.0 &&
               std::abs(channel_avg_pool_fwd(x)[0] - 2.0 / 3.0) < 1e-15;
    });
    add("pool.avg_times_c_is_sum", [] {
        Rng rng(9);
        Tensor x = rand_tensor({7, 4, 4}, rng);
        Tensor a = channel_avg_pool_fwd(x);
        double acc = 0.0;
        for (long long i = 0; i < a.numel(); ++i) acc += a[i] * 7.0;
        return std::abs(acc - x.sum()) < 1e-10;
    });
    add("pool.max_gradcheck", [] {
        Rng rng(10);
        Tensor r = rand_tensor({1, 4, 4}, rng);
        double e = input_gradcheck(11, {rand_tensor({5, 4, 4}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, channel_max_pool(t, in[0]), r);
                                   });
        return e < 1e-4;
    });
    add("pool.avg_gradcheck", [] {
        Rng rng(12);
        Tensor r = rand_tensor({1, 4, 4}, rng);
        double e = input_gradcheck(13, {rand_tensor({5, 4, 4}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, channel_avg_pool(t, in[0]), r);
                                   });
        return e < 1e-4;
    });
    add("resize.identity", [] {
        Rng rng(14);
        Tensor x = rand_tensor({2, 5, 5}, rng);
        return resize_bilinear_fwd(x, 5, 5).max_abs_diff(x) == 0.0;
    });
    add("resize.constant_preserved", [] {
        Tensor x = Tensor::full({2, 4, 4}, 0.37);
        Tensor y = resize_bilinear_fwd(x, 7, 3);
        for (long long i = 0; i < y.numel(); ++i)
            if (std::abs(y[i] - 0.37) > 1e-12) return false;
        return true;
    });
    add("resize.gradcheck", [] {
        Rng rng(15);
        Tensor r = rand_tensor({2, 6, 6}, rng);
        double e = input_gradcheck(16, {rand_tensor({2, 4, 4}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, resize_bilinear(t, in[0], 6, 6), r);
                                   });
        return e < 1e-4;
    });
    add("matmul.identity", [] {
        Rng rng(17);
        Tensor a = rand_tensor({4, 4}, rng);
        Tensor eye({4, 4});
        for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
        return matmul_fwd(a, eye).max_abs_diff(a) == 0.0;
    });
    add("matmul.scalar_case", [] {
        Tensor a({1, 1}, {3.0}), b({1, 1}, {-2.0});
        return matmul_fwd(a, b)[0] == -6.0;
    });
    add("matmul.gradcheck", [] {
        Rng rng(18);
        Tensor r = rand_tensor({3, 5}, rng);
        double e = input_gradcheck(19, {rand_tensor({3, 4}, rng), rand_tensor({4, 5}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, matmul(t, in[0], in[1]), r);
                                   });
        return e < 1e-4;
    });
    add("sigmoid.gradcheck", [] {
        Rng rng(20);
        Tensor r = rand_tensor({2, 4, 4}, rng);
        double e = input_gradcheck(21, {rand_tensor({2, 4, 4}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, sigmoid(t, in[0]), r);
                                   });
        return e < 1e-4;
    });
    add("relu.gradcheck", [] {
        Rng rng(22);
        Tensor x = rand_tensor({2, 4, 4}, rng);
        for (long long i = 0; i < x.numel(); ++i) x[i] += x[i] >= 0 ? 0.1 : -0.1; // avoid the kink
        Tensor r = rand_tensor({2, 4, 4}, rng);
        double e = input_gradcheck(23, {x}, [r](Tape& t, const std::vector<Var>& in) {
            return readout(t, relu(t, in[0]), r);
        });
        return e < 1e-4;
    });
    add("mul_bc.gradcheck", [] {
        Rng rng(24);
        Tensor r = rand_tensor({3, 4, 4}, rng);
        double e = input_gradcheck(25, {rand_tensor({3, 4, 4}, rng), rand_tensor({1, 4, 4}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       return readout(t, mul_bc(t, in[0], in[1]), r);
                                   });
        return e < 1e-4;
    });
    add("concat_slice.gradcheck", [] {
        Rng rng(26);
        Tensor r = rand_tensor({2, 3, 3}, rng);
        double e = input_gradcheck(27, {rand_tensor({2, 3, 3}, rng), rand_tensor({3, 3, 3}, rng)},
                                   [r](Tape& t, const std::vector<Var>& in) {
                                       Var cat = concat_channels(t, {in[0], in[1]});
                                       return readout(t, slice_channels(t, cat, 1, 3), r);
                                   });
        return e < 1e-4;
    });
    add("tape.sum_gradient_is_ones", [] {
        Rng rng(28);
        Tape t;
        Var x = t.leaf(rand_tensor({3, 4, 4}, rng));
        t.backward(sum(t, x));
        const Tensor& g = t.grad(x);
        for (long long i = 0; i < g.numel(); ++i)
            if (g[i] != 1.0) return false;
        return true;
    });
    add("tape.permutation_gradient_is_ones", [] {
        Rng rng(29);
        Tape t;
        Var x = t.leaf(rand_tensor({2, 6, 6}, rng));
        t.backward(sum(t, pixel_unshuffle(t, x, 2)));
        const Tensor& g = t.grad(x);
        for (long long i = 0; i < g.numel(); ++i)
            if (g[i] != 1.0) return false;
        return true;
    });
    add("psa.identity_reduction", [] {
        const int c = 4;
        const std::vector<int> factors{1, 2, 4, 6};
        ParamStore store;
        for (int f : factors) {
            store.tensors.emplace("psa.fuse" + std::to_string(f) + ".weight", Tensor({1, 2, 1, 1}));
            store.tensors.emplace("psa.fuse" + std::to_string(f) + ".bias", Tensor({1}));
        }
        store.tensors.emplace("psa.merge.weight", dirac_groups(c, 4, 3, 0.25));
        store.tensors.emplace("psa.merge.bias", Tensor({c}));
        Rng rng(30);
        Tensor x = rand_tensor({c, 12, 12}, rng);
        Tape t;
        t.grad_enabled = false;
        Ctx ctx{t, store, "", nullptr};
        return t.val(psa_forward(ctx.sub("psa"), t.leaf(x), factors)).max_abs_diff(x) <= 1e-12;
    });
    add("psa.gradcheck", [] {
        auto store = seeded_params(31, [](Ctx c, Tape& t) {
            psa_forward(c.sub("psa"), t.leaf(Tensor({4, 12, 12})), {1, 2, 4, 6});
        });
        Rng rng(32);
        GradCheck gc;
        gc.weights = &store;
        gc.inputs = {rand_tensor({4, 12, 12}, rng, 0.5)};
        gc.build = [](Ctx c, const std::vector<Var>& in) {
            return sum(c.tape, psa_forward(c.sub("psa"), in[0], {1, 2, 4, 6}));
        };
        return gc.max_rel_err() < 1e-4;
    });
    add("pca.gradcheck", [] {
        auto store = seeded_params(33, [](Ctx c, Tape& t) {
            pca_forward(c.sub("pca"), t.leaf(Tensor({4, 6, 6})), 2, {1, 2});
        });
        Rng rng(34);
        GradCheck gc;
        gc.weights = &store;
        gc.inputs = {rand_tensor({4, 6, 6}, rng, 0.5)};
        gc.build = [](Ctx c, const std::vector<Var>& in) {
            return sum(c.tape, pca_forward(c.sub("pca"), in[0], 2, {1, 2}));
        };
        return gc.max_rel_err() < 1e-4;
    });
    add("granular.dirac_cascade_2_5x", [] {
        const int c = 4;
        ParamStore store;
        for (int k : {1, 3, 5, 7}) {
            store.tensors.emplace("gran.f" + std::to_string(k) + ".weight",
                                  dirac_groups(c, 1, k, 1.0));
            store.tensors.emplace("gran.f" + std::to_string(k) + ".bias", Tensor({c}));
        }
        store.tensors.emplace("gran.merge.weight", dirac_groups(c, 4, 1, 0.25));
        store.tensors.emplace("gran.merge.bias", Tensor({c}));
        Rng rng(35);
        Tensor x = rand_tensor({c, 8, 8}, rng);
        Tape t;
        t.grad_enabled = false;
        Ctx ctx{t, store, "", nullptr};
        Tensor y = t.val(granular_branch(ctx.sub("gran"), t.leaf(x)));
        for (long long i = 0; i < x.numel(); ++i)
            if (std::abs(y[i] - 2.5 * x[i]) > 1e-12) return false;
        return true;
    });
    add("location.basis_identity", [] {
        const int c = 3;
        ParamStore store;
        for (const char* n : {"q", "k", "v"}) {
            store.tensors.emplace(std::string("loc.") + n + ".weight", dirac_groups(c, 1, 1, 1.0));
            store.tensors.emplace(std::string("loc.") + n + ".bias", Tensor({c}));
        }
        for (int j = 0; j < c; ++j) {
            Tensor x({c, 1, 1});
            x[j] = 1.0;
            Tape t;
            t.grad_enabled = false;
            Ctx ctx{t, store, "", nullptr};
            if (t.val(location_sensing(ctx.sub("loc"), t.leaf(x))).max_abs_diff(x) != 0.0)
                return false;
        }
        return true;
    });
    add("location.gradcheck", [] {
        auto store = seeded_params(36, [](Ctx c, Tape& t) {
            location_sensing(c.sub("loc"), t.leaf(Tensor({3, 4, 4})));
        });
        Rng rng(37);
        GradCheck gc;
        gc.weights = &store;
        gc.inputs = {rand_tensor({3, 4, 4}, rng, 0.5)};
        gc.build = [](Ctx c, const std::vector<Var>& in) {
            return sum(c.tape, location_sensing(c.sub("loc"), in[0]));
        };
        return gc.max_rel_err() < 1e-4;
    });
    add("interaction.sigma_zero_is_1_5x", [] {
        const int c = 4;
        ParamStore store;
        store.tensors.emplace("inter.conv.weight", Tensor({1, 2 * c, 1, 1}));
        store.tensors.emplace("inter.conv.bias", Tensor({1}));
        Rng rng(38);
        Tensor fs = rand_tensor({c, 6, 6}, rng);
        Tensor fd = rand_tensor({c, 6, 6}, rng);
        Tape t;
        t.grad_enabled = false;
        Ctx ctx{t, store, "", nullptr};
        auto [es, ed] = geo_gran_interaction(ctx.sub("inter"), t.leaf(fs), t.leaf(fd));
        for (long long i = 0; i < fs.numel(); ++i) {
            if (std::abs(t.val(es)[i] - 1.5 * fs[i]) > 1e-12) return false;
            if (std::abs(t.val(ed)[i] - 1.5 * fd[i]) > 1e-12) return false;
        }
        return true;
    });
    add("lgf.zero_gate_identity", [] {
        ParamStore store;
        store.tensors.emplace("lgf.low.weight", Tensor({4, 4, 3, 3}));
        store.tensors.emplace("lgf.low.bias", Tensor({4}));
        store.tensors.emplace("lgf.high.weight", Tensor({4, 4, 3, 3}));
        store.tensors.emplace("lgf.high.bias", Tensor({4}));
        Rng rng(39);
        Tensor hi = rand_tensor({4, 4, 4}, rng);
        Tape t;
        t.grad_enabled = false;
        Ctx ctx{t, store, "", nullptr};
        Var y = lgf_forward(ctx.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(hi));
        Tensor up = resize_bilinear_fwd(hi, 8, 8);
        return t.val(y).max_abs_diff(up) == 0.0;
    });
    add("lgf.gradcheck", [] {
        auto store = seeded_params(40, [](Ctx c, Tape& t) {
            lgf_forward(c.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({4, 4, 4})));
        });
        Rng rng(41);
        GradCheck gc;
        gc.weights = &store;
        gc.inputs = {rand_tensor({4, 8, 8}, rng, 0.5), rand_tensor({4, 4, 4}, rng, 0.5)};
        gc.build = [](Ctx c, const std::vector<Var>& in) {
            return sum(c.tape, lgf_forward(c.sub("lgf"), in[0], in[1]));
        };
        return gc.max_rel_err() < 1e-4;
    });
    add("loss.bce_identities", [] {
        Rng rng(42);
        Tensor g = rand_binary({1, 8, 8}, rng);
        return bce_loss_value(g, g) <= 1e-6 &&
               std::abs(bce_loss_value(Tensor::full({1, 8, 8}, 0.5), g) - std::log(2.0)) <= 1e-9;
    });
    add("loss.iou_identities", [] {
        Rng rng(43);
        Tensor g = rand_binary({1, 8, 8}, rng);
        return iou_loss_value(g, g) <= 1e-7 &&
               std::abs(iou_loss_value(Tensor::full({1, 8, 8}, 1.0), Tensor({1, 8, 8})) - 1.0) <=
                   1e-7;
    });
    add("loss.fm_identities", [] {
        Rng rng(44);
        Tensor g = rand_binary({1, 8, 8}, rng);
        return fm_loss_value(g, g) <= 1e-7 &&
               std::abs(fm_loss_value(Tensor({1, 8, 8}), Tensor::full({1, 8, 8}, 1.0)) - 1.0) <=
                   1e-7;
    });
    add("loss.gradchecks", [] {
        Rng rng(45);
        Tensor s = rand_soft({1, 6, 6}, rng);
        Tensor g = rand_binary({1, 6, 6}, rng);
        auto e = [&](std::function<Var(Tape&, Var)> make) {
            return input_gradcheck(46, {s}, [make](Tape& t, const std::vector<Var>& in) {
                return make(t, in[0]);
            });
        };
        return e([&](Tape& t, Var v) { return bce_loss(t, v, g); }) < 1e-4 &&
               e([&](Tape& t, Var v) { return iou_loss(t, v, g); }) < 1e-4 &&
               e([&](Tape& t, Var v) { return fm_loss(t, v, g); }) < 1e-4;
    });
    add("optimizer.scalar_oracle", [] {
        ParamStore w;
        w.tensors.emplace("w", Tensor::scalar(1.0));
        RmsState st;
        rmsprop_step(w, {{"w", Tensor::scalar(1.0)}}, st);
        const double m = 1.0 / std::sqrt(0.1 + 1e-8);
        return std::abs(w.tensors.at("w")[0] - (1.0 - 1e-4 * m)) <= 1e-15;
    });
    add("optimizer.lr_schedule", [] {
        return lr_schedule(0) == 1e-4 && lr_schedule(29) == 1e-4 &&
               std::abs(lr_schedule(30) - 0.7e-4) <= 1e-18 &&
               std::abs(lr_schedule(42) - 0.49e-4) <= 1e-18;
    });
    add("metrics.sanity", [] {
        Rng rng(47);
        Tensor g = rand_binary({1, 16, 16}, rng);
        if (g.sum() == 0.0) g[0] = 1.0;
        return mae_metric(g, g) == 0.0 && std::abs(f_measure(g, g).f_beta - 1.0) <= 1e-12 &&
               mae_metric(Tensor({1, 4, 4}), Tensor::full({1, 4, 4}, 1.0)) == 1.0;
    });
    add("config.default_constants", [] {
        NetConfig cfg;
        return cfg.channels == 64 && cfg.grid_k == 8 &&
               cfg.psa_factors == std::vector<int>{1, 2, 4, 6} &&
               cfg.pca_factors == std::vector<int>{1, 2, 4} &&
               cfg.mde_kernels == std::vector<int>{1, 3, 5, 7} && cfg.input_size == 384 &&
               cfg.lr == 1e-4;
    });
    return cs;
}

int cmd_selftest(const std::string& filter) {
    int ran = 0, failed = 0;
    for (const Check& c : build_checks()) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        ++ran;
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::cerr << c.name << ": exception: " << e.what() << "\n";
        }
        std::cout << (ok ? "PASS " : "FAIL ") << c.name << "\n";
        if (!ok) ++failed;
    }
    if (ran == 0) {
        std::cerr << "no checks match filter '" << filter << "'\n";
        return kExitCheckFailed;
    }
    std::cout << ran - failed << "/" << ran << " checks passed\n";
    return failed == 0 ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed) {
    NetConfig toy = NetConfig::toy();
    struct ModuleCheck {
        std::string name;
        std::function<double()> run;
    };
    auto module_err = [&](std::uint64_t s, std::vector<Tensor> inputs,
                          std::function<void(Ctx, Tape&)> init,
                          std::function<Var(Ctx, const std::vector<Var>&)> build) {
        auto store = seeded_params(s, init);
        GradCheck gc;
        gc.weights = &store;
        gc.seed = s + 1;
        gc.inputs = std::move(inputs);
        gc.build = std::move(build);
        return gc.max_rel_err();
    };
    Rng rng(seed);
    std::vector<ModuleCheck> mods;
    mods.push_back({"psa", [&, x = rand_tensor({4, 12, 12}, rng, 0.5)] {
                        return module_err(
                            seed + 1, {x},
                            [](Ctx c, Tape& t) {
                                psa_forward(c.sub("m"), t.leaf(Tensor({4, 12, 12})), {1, 2, 4, 6});
                            },
                            [](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, psa_forward(c.sub("m"), in[0], {1, 2, 4, 6}));
                            });
                    }});
    mods.push_back({"pca", [&, x = rand_tensor({4, 6, 6}, rng, 0.5)] {
                        return module_err(
                            seed + 2, {x},
                            [](Ctx c, Tape& t) {
                                pca_forward(c.sub("m"), t.leaf(Tensor({4, 6, 6})), 2, {1, 2});
                            },
                            [](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, pca_forward(c.sub("m"), in[0], 2, {1, 2}));
                            });
                    }});
    mods.push_back({"mde", [&, x = rand_tensor({4, 12, 12}, rng, 0.5)] {
                        return module_err(
                            seed + 3, {x},
                            [&](Ctx c, Tape& t) {
                                mde_forward(c.sub("m"), t.leaf(Tensor({4, 12, 12})), toy);
                            },
                            [&](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, mde_forward(c.sub("m"), in[0], toy));
                            });
                    }});
    mods.push_back({"granular", [&, x = rand_tensor({4, 8, 8}, rng, 0.5)] {
                        return module_err(
                            seed + 4, {x},
                            [](Ctx c, Tape& t) { granular_branch(c.sub("m"), t.leaf(Tensor({4, 8, 8}))); },
                            [](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, granular_branch(c.sub("m"), in[0]));
                            });
                    }});
    mods.push_back({"geometric", [&, x = rand_tensor({4, 8, 8}, rng, 0.5)] {
                        return module_err(
                            seed + 5, {x},
                            [&](Ctx c, Tape& t) {
                                geometric_branch(c.sub("m"), t.leaf(Tensor({4, 8, 8})), toy);
                            },
                            [&](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, geometric_branch(c.sub("m"), in[0], toy));
                            });
                    }});
    mods.push_back({"interaction",
                    [&, a = rand_tensor({4, 6, 6}, rng, 0.5), b = rand_tensor({4, 6, 6}, rng, 0.5)] {
                        return module_err(
                            seed + 6, {a, b},
                            [](Ctx c, Tape& t) {
                                geo_gran_interaction(c.sub("m"), t.leaf(Tensor({4, 6, 6})),
                                                     t.leaf(Tensor({4, 6, 6})));
                            },
                            [](Ctx c, const std::vector<Var>& in) {
                                auto [es, ed] = geo_gran_interaction(c.sub("m"), in[0], in[1]);
                                return add(c.tape, sum(c.tape, es), sum(c.tape, ed));
                            });
                    }});
    mods.push_back({"dgc", [&, x = rand_tensor({4, 12, 12}, rng, 0.5)] {
                        return module_err(
                            seed + 7, {x},
                            [&](Ctx c, Tape& t) {
                                dgc_forward(c.sub("m"), t.leaf(Tensor({4, 12, 12})), toy);
                            },
                            [&](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, dgc_forward(c.sub("m"), in[0], toy));
                            });
                    }});
    mods.push_back({"dsp", [&, x = rand_tensor({4, 3, 3}, rng, 0.5)] {
                        return module_err(
                            seed + 8, {x},
                            [](Ctx c, Tape& t) { dsp_forward(c.sub("m"), t.leaf(Tensor({4, 3, 3}))); },
                            [](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, dsp_forward(c.sub("m"), in[0]));
                            });
                    }});
    mods.push_back({"lgf", [&, a = rand_tensor({4, 8, 8}, rng, 0.5), b = rand_tensor({4, 4, 4}, rng, 0.5)] {
                        return module_err(
                            seed + 9, {a, b},
                            [](Ctx c, Tape& t) {
                                lgf_forward(c.sub("m"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({4, 4, 4})));
                            },
                            [](Ctx c, const std::vector<Var>& in) {
                                return sum(c.tape, lgf_forward(c.sub("m"), in[0], in[1]));
                            });
                    }});
    mods.push_back({"losses", [&, s = rand_soft({1, 6, 6}, rng), g = rand_binary({1, 6, 6}, rng)] {
                        GradCheck gc;
                        gc.weights = &g_no_params;
                        gc.check_params = false;
                        gc.seed = seed + 10;
                        gc.inputs = {s};
                        gc.build = [g](Ctx c, const std::vector<Var>& in) {
                            Tape& t = c.tape;
                            return add(t, add(t, bce_loss(t, in[0], g), iou_loss(t, in[0], g)),
                                       fm_loss(t, in[0], g));
                        };
                        return gc.max_rel_err();
                    }});

    bool all_ok = true;
    for (auto& m : mods) {
        double err = 0.0;
        bool ok = false;
        std::string note;
        try {
            err = m.run();
            if (std::isnan(err)) note = " (NaN in " + m.name + ")";
            else ok = err < 1e-4;
        } catch (const std::exception& e) {
            note = std::string(" (exception: ") + e.what() + ")";
        }
        std::cout << m.name << ": max_rel_err=" << err << (ok ? " PASS" : " FAIL") << note << "\n";
        if (!ok) all_ok = false;
    }
    return all_ok ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// forward / train-toy / eval
// ---------------------------------------------------------------------------

struct ForwardArgs {
    std::string image, weights, out, all_heads;
};

int cmd_forward(const ForwardArgs& a, std::uint64_t seed, bool toy) {
    NetConfig cfg = toy ? NetConfig::toy() : NetConfig{};
    Tensor img;
    try {
        img = load_pnm(a.image);
    } catch (const image_error& e) {
        std::cerr << "image error: " << e.what() << "\n";
        return kExitBadImage;
    }
    try {
        ParamStore store = a.weights.empty() ? init_weights(seed, cfg) : load_weights(a.weights);
        Tape t;
        t.grad_enabled = false;
        std::map<std::string, Var> bound;
        Ctx c{t, store, "", &bound};
        SaliencyOutputs outs = net_forward(c, t.leaf(img), cfg);
        check_all_bound(store, bound);
        save_pgm(t.val(outs.s[0]), a.out);
        if (!a.all_heads.empty()) {
            fs::create_directories(a.all_heads);
            for (int i = 0; i < 5; ++i)
                save_pgm(t.val(outs.s[static_cast<std::size_t>(i)]),
                         (fs::path(a.all_heads) / ("head" + std::to_string(i + 1) + ".pgm")).string());
        }
    } catch (const weight_file_error& e) {
        std::cerr << "weight error: " << e.what() << "\n";
        return kExitBadWeights;
    } catch (const image_error& e) {
        std::cerr << "image error: " << e.what() << "\n";
        return kExitBadImage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "precondition violated: " << e.what() << "\n";
        return kExitPrecondition;
    }
    return 0;
}

struct TrainArgs {
    std::string image, mask, out;
    int steps = 300;
};

int cmd_train_toy(const TrainArgs& a, std::uint64_t seed) {
    NetConfig cfg = NetConfig::toy();
    Tensor img, mask;
    try {
        img = load_pnm(a.image);
        mask = load_pnm(a.mask);
    } catch (const image_error& e) {
        std::cerr << "image error: " << e.what() << "\n";
        return kExitBadImage;
    }
    if (img.ndim() != 3 || img.size(0) != 3) {
        std::cerr << "precondition violated: training image must be a PPM\n";
        return kExitPrecondition;
    }
    if (mask.size(0) != 1 || mask.size(1) != img.size(1) || mask.size(2) != img.size(2)) {
        std::cerr << "precondition violated: mask must be a PGM matching the image size\n";
        return kExitPrecondition;
    }
    try {
        ParamStore store = init_weights(seed, cfg);
        RmsState st;
        RmsHyper hp;
        hp.lr = cfg.lr;
        std::cout << "step,bce,iou,fm,total\n";
        for (int step = 1; step <= a.steps; ++step) {
            Tape t;
            std::map<std::string, Var> bound;
            Ctx c{t, store, "", &bound};
            SaliencyOutputs outs = net_forward(c, t.leaf(img), cfg);
            Var loss = supervision_loss(t, outs.s, mask);
            std::vector<Tensor> heads;
            for (Var s : outs.s) heads.push_back(t.val(s));
            LossBreakdown lb = total_loss({heads}, {mask});
            std::cout << step << "," << lb.bce << "," << lb.iou << "," << lb.fm << "," << lb.total
                      << "\n";
            t.backward(loss);
            std::map<std::string, Tensor> grads;
            for (const auto& [name, v] : bound)
                if (t.has_grad(v)) grads.emplace(name, t.grad(v));
            rmsprop_step(store, grads, st, hp);
        }
        save_weights(store, a.out);
    } catch (const weight_file_error& e) {
        std::cerr << "weight error: " << e.what() << "\n";
        return kExitBadWeights;
    } catch (const std::invalid_argument& e) {
        std::cerr << "precondition violated: " << e.what() << "\n";
        return kExitPrecondition;
    }
    return 0;
}

struct EvalArgs {
    std::string pred, gt, report;
};

int cmd_eval(const EvalArgs& a) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.gt))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    std::ofstream report(a.report);
    if (!report) {
        std::cerr << "cannot open report '" << a.report << "'\n";
        return kExitCheckFailed;
    }
    report << "name,mae,fbeta\n";
    int matched = 0;
    double mae_sum = 0.0, fb_sum = 0.0;
    for (const std::string& name : names) {
        const fs::path pp = fs::path(a.pred) / name;
        if (!fs::exists(pp)) {
            std::cerr << "unmatched (no prediction): " << name << "\n";
            continue;
        }
        Tensor s, g;
        try {
            s = load_pnm(pp.string());
            g = load_pnm((fs::path(a.gt) / name).string());
        } catch (const image_error& e) {
            std::cerr << "image error: " << e.what() << "\n";
            return kExitBadImage;
        }
        EvalResult r;
        try {
            r = f_measure(s, g);
        } catch (const std::invalid_argument& e) {
            std::cerr << "precondition violated: " << e.what() << "\n";
            return kExitPrecondition;
        }
        report << name << "," << r.mae << "," << r.f_beta << "\n";
        mae_sum += r.mae;
        fb_sum += r.f_beta;
        ++matched;
    }
    for (const auto& entry : fs::directory_iterator(a.pred)) {
        const std::string name = entry.path().filename().string();
        if (!fs::exists(fs::path(a.gt) / name))
            std::cerr << "unmatched (no ground truth): " << name << "\n";
    }
    if (matched == 0) {
        std::cerr << "no matching prediction/ground-truth pairs\n";
        return kExitBadImage;
    }
    report << "mean," << mae_sum / matched << "," << fb_sum / matched << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"G2HF salient-object-detection reference implementation"};
    app.require_subcommand(1);

    std::uint64_t seed = 42;
    bool toy = false;
    int threads = 0;
    app.add_option("--seed", seed, "RNG seed for weight initialization");
    app.add_flag("--toy", toy, "toy configuration: C=4, 192x192 input, PCA factors {1,2}");
    app.add_option("--threads", threads, "worker threads for kernels (0 = auto)");

    ForwardArgs fa;
    CLI::App* fwd = app.add_subcommand("forward", "run inference on one image");
    fwd->add_option("--image", fa.image, "input PPM (P6)")->required();
    fwd->add_option("--weights", fa.weights, "weight file (omit to use seed-initialized weights)");
    fwd->add_option("--out", fa.out, "output saliency PGM")->required();
    fwd->add_option("--all-heads", fa.all_heads, "directory for all five head outputs");

    std::string filter;
    CLI::App* self = app.add_subcommand("selftest", "run the built-in invariant suite");
    self->add_option("--filter", filter, "only run checks whose name contains this substring");

    CLI::App* gchk = app.add_subcommand("gradcheck", "finite-difference gradient audit per module");

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train-toy", "single-image overfit at toy scale");
    train->add_option("--image", ta.image, "training PPM (P6), 192x192")->required();
    train->add_option("--mask", ta.mask, "ground-truth PGM (P5)")->required();
    train->add_option("--steps", ta.steps, "optimizer steps");
    train->add_option("--out", ta.out, "output weight file")->required();

    EvalArgs ea;
    CLI::App* ev = app.add_subcommand("eval", "MAE / F-measure over prediction and gt directories");
    ev->add_option("--pred", ea.pred, "directory of predicted PGMs")->required();
    ev->add_option("--gt", ea.gt, "directory of ground-truth PGMs")->required();
    ev->add_option("--report", ea.report, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    // the documented precedence: G2HF_THREADS env var wins over --threads
    if (const char* env = std::getenv("G2HF_THREADS")) set_threads(std::atoi(env));
    else if (threads > 0) set_threads(threads);

    try {
        if (fwd->parsed()) return cmd_forward(fa, seed, toy);
        if (self->parsed()) return cmd_selftest(filter);
        if (gchk->parsed()) return cmd_gradcheck(seed);
        if (train->parsed()) return cmd_train_toy(ta, seed);
        if (ev->parsed()) return cmd_eval(ea);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return 0;
}
