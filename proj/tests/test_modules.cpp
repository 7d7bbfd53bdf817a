#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "g2hf/g2hf.hpp"
#include "oracle.hpp"
#include "util.hpp"

using namespace g2hf;
using testutil::rand_tensor;
using testutil::seeded_params;

namespace {

void zero_all(ParamStore& store) {
    for (auto& [name, t] : store.tensors)
        for (long long i = 0; i < t.numel(); ++i) t[i] = 0.0;
}

// [c, n*c, k, k] picking channel o out of group j with weight `scale`
Tensor dirac_groups(int c, int n, int k, double scale) {
    Tensor w({c, n * c, k, k});
    for (int o = 0; o < c; ++o)
        for (int j = 0; j < n; ++j) w.at(o, j * c + o, k / 2, k / 2) = scale;
    return w;
}

template <class F>
Tensor run_module(ParamStore& store, const Tensor& x, F&& fn) {
    Tape t;
    t.grad_enabled = false;
    Ctx c{t, store, "", nullptr};
    Var out = fn(c, t.leaf(x));
    return t.val(out);
}

} // namespace

// ---------------------------------------------------------------- MDE

TEST_CASE("mde: zero input maps to zero (freshly initialized biases are zero)") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(41, [&](Ctx c, Tape& t) {
        mde_forward(c.sub("mde"), t.leaf(Tensor({cfg.channels, 24, 24})), cfg);
    });
    Tensor y = run_module(store, Tensor({cfg.channels, 24, 24}),
                          [&](Ctx c, Var x) { return mde_forward(c.sub("mde"), x, cfg); });
    CHECK(y.max_abs_diff(Tensor({cfg.channels, 24, 24})) == 0.0);
}

TEST_CASE("mde: level-1 shape contract at default width") {
    NetConfig cfg;
    auto store = seeded_params(42, [&](Ctx c, Tape& t) {
        mde_forward(c.sub("mde"), t.leaf(Tensor({64, 96, 96})), cfg);
    });
    Rng rng(43);
    Tensor x = rand_tensor({64, 96, 96}, rng, 0.1);
    Tensor y = run_module(store, x, [&](Ctx c, Var v) { return mde_forward(c.sub("mde"), v, cfg); });
    CHECK(y.shape() == std::vector<int>{64, 96, 96});
    CHECK(y.all_finite());
}

TEST_CASE("mde matches the independent transcription oracle") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(44, [&](Ctx c, Tape& t) {
        mde_forward(c.sub("mde"), t.leaf(Tensor({4, 24, 24})), cfg);
    });
    Rng rng(45);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = rand_tensor({4, 24, 24}, rng);
        Tensor got =
            run_module(store, x, [&](Ctx c, Var v) { return mde_forward(c.sub("mde"), v, cfg); });
        Tensor want = oracle::mde(store, "mde.", x, cfg);
        CHECK(got.max_abs_diff(want) <= 1e-10);
    }
}

TEST_CASE("mde: Dirac outer convs + zeroed inner path reduce to the identity") {
    // Per branch: convA = identity, inner/convB = 0 so the U-path vanishes and
    // F^i = x; PSA/PCA/fuse/merge are built as averaging Dirac stacks so the
    // attention pair and the final merge pass x through unchanged.
    NetConfig cfg = NetConfig::toy();
    const int c = cfg.channels;
    ParamStore store;
    auto put = [&](const std::string& n, Tensor t) { store.tensors.emplace(n, std::move(t)); };
    for (std::size_t i = 0; i < cfg.mde_kernels.size(); ++i) {
        const int k = cfg.mde_kernels[i];
        const std::string bp = "mde.branch" + std::to_string(i + 1) + ".";
        put(bp + "convA.weight", dirac_groups(c, 1, k, 1.0));
        put(bp + "convA.bias", Tensor({c}));
        put(bp + "inner.weight", Tensor({c, c, 3, 3}));
        put(bp + "inner.bias", Tensor({c}));
        put(bp + "convB.weight", Tensor({c, c, k, k}));
        put(bp + "convB.bias", Tensor({c}));
        for (int f : cfg.psa_factors) {
            put(bp + "psa.fuse" + std::to_string(f) + ".weight", Tensor({1, 2, 1, 1}));
            put(bp + "psa.fuse" + std::to_string(f) + ".bias", Tensor({1}));
        }
        put(bp + "psa.merge.weight",
            dirac_groups(c, static_cast<int>(cfg.psa_factors.size()), 3,
                         1.0 / static_cast<double>(cfg.psa_factors.size())));
        put(bp + "psa.merge.bias", Tensor({c}));
        for (int f : cfg.pca_factors) {
            put(bp + "pca.fuse" + std::to_string(f) + ".weight", Tensor({1, 2, 1, 1}));
            put(bp + "pca.fuse" + std::to_string(f) + ".bias", Tensor({1}));
        }
        Tensor pm({1, static_cast<int>(cfg.pca_factors.size()), 3, 3});
        for (int j = 0; j < pm.size(1); ++j)
            pm.at(0, j, 1, 1) = 1.0 / static_cast<double>(pm.size(1));
        put(bp + "pca.merge.weight", std::move(pm));
        put(bp + "pca.merge.bias", Tensor({1}));
        put(bp + "fuse.weight", dirac_groups(c, 2, 3, 0.5));
        put(bp + "fuse.bias", Tensor({c}));
    }
    put("mde.merge.weight", dirac_groups(c, 4, 3, 0.25));
    put("mde.merge.bias", Tensor({c}));

    Rng rng(46);
    Tensor x = rand_tensor({c, 24, 24}, rng);
    Tensor y = run_module(store, x, [&](Ctx cc, Var v) { return mde_forward(cc.sub("mde"), v, cfg); });
    CHECK(y.max_abs_diff(x) <= 1e-12);
}

TEST_CASE("mde: module-level gradient check") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(47, [&](Ctx c, Tape& t) {
        mde_forward(c.sub("mde"), t.leaf(Tensor({4, 12, 12})), cfg);
    });
    Rng rng(48);
    GradCheck gc;
    gc.weights = &store;
    gc.inputs = {rand_tensor({4, 12, 12}, rng, 0.5)};
    gc.build = [&](Ctx c, const std::vector<Var>& in) {
        return sum(c.tape, mde_forward(c.sub("mde"), in[0], cfg));
    };
    CHECK(gc.max_rel_err() < 1e-4);
}

// ---------------------------------------------------------------- granular

TEST_CASE("granular: zero params give zero output") {
    auto store = seeded_params(49, [](Ctx c, Tape& t) {
        granular_branch(c.sub("gran"), t.leaf(Tensor({4, 8, 8})));
    });
    zero_all(store);
    Rng rng(50);
    Tensor x = rand_tensor({4, 8, 8}, rng);
    Tensor y = run_module(store, x, [](Ctx c, Var v) { return granular_branch(c.sub("gran"), v); });
    CHECK(y.max_abs_diff(Tensor({4, 8, 8})) == 0.0);
}

TEST_CASE("granular: Dirac cascade gives In_i = i*x, averaged to 2.5x") {
    const int c = 4;
    ParamStore store;
    for (int k : {1, 3, 5, 7}) {
        store.tensors.emplace("gran.f" + std::to_string(k) + ".weight", dirac_groups(c, 1, k, 1.0));
        store.tensors.emplace("gran.f" + std::to_string(k) + ".bias", Tensor({c}));
    }
    store.tensors.emplace("gran.merge.weight", dirac_groups(c, 4, 1, 0.25));
    store.tensors.emplace("gran.merge.bias", Tensor({c}));
    Rng rng(51);
    Tensor x = rand_tensor({c, 8, 8}, rng);
    Tensor y = run_module(store, x, [](Ctx cc, Var v) { return granular_branch(cc.sub("gran"), v); });
    Tensor want(x.shape());
    for (long long i = 0; i < x.numel(); ++i) want[i] = 2.5 * x[i];
    CHECK(y.max_abs_diff(want) <= 1e-12);
}

TEST_CASE("granular matches the independent transcription oracle") {
    auto store = seeded_params(52, [](Ctx c, Tape& t) {
        granular_branch(c.sub("gran"), t.leaf(Tensor({4, 8, 8})));
    });
    Rng rng(53);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rand_tensor({4, 8, 8}, rng);
        Tensor got =
            run_module(store, x, [](Ctx c, Var v) { return granular_branch(c.sub("gran"), v); });
        Tensor want = oracle::granular(store, "gran.", x);
        CHECK(got.max_abs_diff(want) <= 1e-10);
    }
}

// ---------------------------------------------------------------- location sensing

TEST_CASE("location sensing: zero input gives zero output") {
    auto store = seeded_params(54, [](Ctx c, Tape& t) {
        location_sensing(c.sub("loc"), t.leaf(Tensor({3, 4, 4})));
    });
    Tensor y = run_module(store, Tensor({3, 4, 4}),
                          [](Ctx c, Var v) { return location_sensing(c.sub("loc"), v); });
    CHECK(y.max_abs_diff(Tensor({3, 4, 4})) == 0.0);
}

TEST_CASE("location sensing: basis-vector identity at H=W=1 with identity projections") {
    const int c = 3;
    ParamStore store;
    for (const char* n : {"q", "k", "v"}) {
        store.tensors.emplace(std::string("loc.") + n + ".weight", dirac_groups(c, 1, 1, 1.0));
        store.tensors.emplace(std::string("loc.") + n + ".bias", Tensor({c}));
    }
    for (int j = 0; j < c; ++j) {
        Tensor x({c, 1, 1});
        x[j] = 1.0;
        Tensor y = run_module(store, x, [](Ctx cc, Var v) { return location_sensing(cc.sub("loc"), v); });
        CHECK(y.max_abs_diff(x) == 0.0);
    }
}

TEST_CASE("location sensing matches the nested-loop oracle") {
    auto store = seeded_params(55, [](Ctx c, Tape& t) {
        location_sensing(c.sub("loc"), t.leaf(Tensor({3, 4, 4})));
    });
    Rng rng(56);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rand_tensor({3, 4, 4}, rng);
        Tensor got =
            run_module(store, x, [](Ctx c, Var v) { return location_sensing(c.sub("loc"), v); });
        Tensor want = oracle::location(store, "loc.", x);
        CHECK(got.max_abs_diff(want) <= 1e-10);
    }
}

TEST_CASE("location sensing: gradient check") {
    auto store = seeded_params(57, [](Ctx c, Tape& t) {
        location_sensing(c.sub("loc"), t.leaf(Tensor({3, 4, 4})));
    });
    Rng rng(58);
    GradCheck gc;
    gc.weights = &store;
    gc.inputs = {rand_tensor({3, 4, 4}, rng, 0.5)};
    gc.build = [](Ctx c, const std::vector<Var>& in) {
        return sum(c.tape, location_sensing(c.sub("loc"), in[0]));
    };
    CHECK(gc.max_rel_err() < 1e-4);
}

// ---------------------------------------------------------------- geometric

TEST_CASE("geometric: zero input gives zero output") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(59, [&](Ctx c, Tape& t) {
        geometric_branch(c.sub("geo"), t.leaf(Tensor({4, 8, 8})), cfg);
    });
    Tensor y = run_module(store, Tensor({4, 8, 8}),
                          [&](Ctx c, Var v) { return geometric_branch(c.sub("geo"), v, cfg); });
    CHECK(y.max_abs_diff(Tensor({4, 8, 8})) == 0.0);
}

TEST_CASE("geometric: level-4 shape contract at default width") {
    NetConfig cfg;
    auto store = seeded_params(60, [&](Ctx c, Tape& t) {
        geometric_branch(c.sub("geo"), t.leaf(Tensor({64, 24, 24})), cfg);
    });
    Rng rng(61);
    Tensor x = rand_tensor({64, 24, 24}, rng, 0.1);
    Tensor y =
        run_module(store, x, [&](Ctx c, Var v) { return geometric_branch(c.sub("geo"), v, cfg); });
    CHECK(y.shape() == std::vector<int>{64, 24, 24});
    CHECK(y.all_finite());
}

TEST_CASE("geometric: divisibility precondition") {
    NetConfig cfg;
    auto store = seeded_params(62, [&](Ctx c, Tape& t) {
        geometric_branch(c.sub("geo"), t.leaf(Tensor({4, 8, 8})), cfg);
    });
    Rng rng(63);
    Tensor x = rand_tensor({4, 6, 6}, rng);
    CHECK_THROWS_WITH_AS(
        run_module(store, x, [&](Ctx c, Var v) { return geometric_branch(c.sub("geo"), v, cfg); }),
        doctest::Contains("geometric divisibility"), std::invalid_argument);
}

TEST_CASE("geometric matches the independent transcription oracle") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(64, [&](Ctx c, Tape& t) {
        geometric_branch(c.sub("geo"), t.leaf(Tensor({4, 8, 8})), cfg);
    });
    Rng rng(65);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rand_tensor({4, 8, 8}, rng);
        Tensor got =
            run_module(store, x, [&](Ctx c, Var v) { return geometric_branch(c.sub("geo"), v, cfg); });
        Tensor want = oracle::geometric(store, "geo.", x, cfg);
        CHECK(got.max_abs_diff(want) <= 1e-10);
    }
}

// ---------------------------------------------------------------- interaction

TEST_CASE("interaction: zero conv gives a constant 0.5 weight map, so 1.5x outputs") {
    const int c = 4;
    ParamStore store;
    store.tensors.emplace("inter.conv.weight", Tensor({1, 2 * c, 1, 1}));
    store.tensors.emplace("inter.conv.bias", Tensor({1}));
    Rng rng(66);
    Tensor fs = rand_tensor({c, 6, 6}, rng);
    Tensor fd = rand_tensor({c, 6, 6}, rng);
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    auto [es, ed] = geo_gran_interaction(ctx.sub("inter"), t.leaf(fs), t.leaf(fd));
    Tensor want_s(fs.shape()), want_d(fd.shape());
    for (long long i = 0; i < fs.numel(); ++i) {
        want_s[i] = 1.5 * fs[i];
        want_d[i] = 1.5 * fd[i];
    }
    CHECK(t.val(es).max_abs_diff(want_s) <= 1e-12);
    CHECK(t.val(ed).max_abs_diff(want_d) <= 1e-12);
}

TEST_CASE("interaction: identical inputs produce identical outputs") {
    auto store = seeded_params(67, [](Ctx c, Tape& t) {
        geo_gran_interaction(c.sub("inter"), t.leaf(Tensor({4, 6, 6})), t.leaf(Tensor({4, 6, 6})));
    });
    Rng rng(68);
    Tensor f = rand_tensor({4, 6, 6}, rng);
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    auto [es, ed] = geo_gran_interaction(ctx.sub("inter"), t.leaf(f), t.leaf(f));
    CHECK(t.val(es).max_abs_diff(t.val(ed)) == 0.0);
}

TEST_CASE("interaction matches the transcription oracle and the (1+W) scaling law") {
    auto store = seeded_params(69, [](Ctx c, Tape& t) {
        geo_gran_interaction(c.sub("inter"), t.leaf(Tensor({4, 6, 6})), t.leaf(Tensor({4, 6, 6})));
    });
    Rng rng(70);
    Tensor fs = rand_tensor({4, 6, 6}, rng);
    Tensor fd = rand_tensor({4, 6, 6}, rng);
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    auto [es, ed] = geo_gran_interaction(ctx.sub("inter"), t.leaf(fs), t.leaf(fd));
    auto [os, od] = oracle::interaction(store, "inter.", fs, fd);
    CHECK(t.val(es).max_abs_diff(os) <= 1e-12);
    CHECK(t.val(ed).max_abs_diff(od) <= 1e-12);

    // out == in (.) (1 + W) with W in (0,1)
    Tensor wm = oracle::conv(store, "inter.conv", oracle::cat({fs, fd}));
    for (long long i = 0; i < wm.numel(); ++i) {
        wm[i] = 1.0 / (1.0 + std::exp(-wm[i]));
        CHECK(wm[i] > 0.0);
        CHECK(wm[i] < 1.0);
    }
    Tensor scaled(fs.shape());
    for (int cc = 0; cc < 4; ++cc)
        for (int ih = 0; ih < 6; ++ih)
            for (int iw = 0; iw < 6; ++iw)
                scaled.at(cc, ih, iw) = fs.at(cc, ih, iw) * (1.0 + wm.at(0, ih, iw));
    CHECK(t.val(es).max_abs_diff(scaled) <= 1e-12);
}

// ---------------------------------------------------------------- dgc

TEST_CASE("dgc: zero params give zero output") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(71, [&](Ctx c, Tape& t) {
        dgc_forward(c.sub("dgc"), t.leaf(Tensor({4, 24, 24})), cfg);
    });
    zero_all(store);
    Rng rng(72);
    Tensor x = rand_tensor({4, 24, 24}, rng);
    Tensor y = run_module(store, x, [&](Ctx c, Var v) { return dgc_forward(c.sub("dgc"), v, cfg); });
    CHECK(y.max_abs_diff(Tensor({4, 24, 24})) == 0.0);
}

TEST_CASE("dgc: level-3 shape contract at default width") {
    NetConfig cfg;
    auto store = seeded_params(73, [&](Ctx c, Tape& t) {
        dgc_forward(c.sub("dgc"), t.leaf(Tensor({64, 48, 48})), cfg);
    });
    Rng rng(74);
    Tensor x = rand_tensor({64, 48, 48}, rng, 0.1);
    Tensor y = run_module(store, x, [&](Ctx c, Var v) { return dgc_forward(c.sub("dgc"), v, cfg); });
    CHECK(y.shape() == std::vector<int>{64, 48, 48});
    CHECK(y.all_finite());
}

TEST_CASE("dgc matches the transcription oracle at toy configuration") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(75, [&](Ctx c, Tape& t) {
        dgc_forward(c.sub("dgc"), t.leaf(Tensor({4, 24, 24})), cfg);
    });
    Rng rng(76);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = rand_tensor({4, 24, 24}, rng);
        Tensor got =
            run_module(store, x, [&](Ctx c, Var v) { return dgc_forward(c.sub("dgc"), v, cfg); });
        Tensor want = oracle::dgc(store, "dgc.", x, cfg);
        CHECK(got.max_abs_diff(want) <= 1e-9);
    }
}

TEST_CASE("dgc: module-level gradient check") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(77, [&](Ctx c, Tape& t) {
        dgc_forward(c.sub("dgc"), t.leaf(Tensor({4, 12, 12})), cfg);
    });
    Rng rng(78);
    GradCheck gc;
    gc.weights = &store;
    gc.inputs = {rand_tensor({4, 12, 12}, rng, 0.5)};
    gc.build = [&](Ctx c, const std::vector<Var>& in) {
        return sum(c.tape, dgc_forward(c.sub("dgc"), in[0], cfg));
    };
    CHECK(gc.max_rel_err() < 1e-4);
}

// ---------------------------------------------------------------- dsp

TEST_CASE("dsp: zero input gives zero output") {
    auto store = seeded_params(79, [](Ctx c, Tape& t) {
        dsp_forward(c.sub("dsp"), t.leaf(Tensor({4, 3, 3})));
    });
    Tensor y = run_module(store, Tensor({4, 3, 3}),
                          [](Ctx c, Var v) { return dsp_forward(c.sub("dsp"), v); });
    CHECK(y.max_abs_diff(Tensor({4, 3, 3})) == 0.0);
}

TEST_CASE("dsp: top-level shape contract at default width") {
    auto store = seeded_params(80, [](Ctx c, Tape& t) {
        dsp_forward(c.sub("dsp"), t.leaf(Tensor({64, 12, 12})));
    });
    Rng rng(81);
    Tensor x = rand_tensor({64, 12, 12}, rng, 0.1);
    Tensor y = run_module(store, x, [](Ctx c, Var v) { return dsp_forward(c.sub("dsp"), v); });
    CHECK(y.shape() == std::vector<int>{64, 12, 12});
    CHECK(y.all_finite());
}

TEST_CASE("dsp matches the nested-loop oracle") {
    auto store = seeded_params(82, [](Ctx c, Tape& t) {
        dsp_forward(c.sub("dsp"), t.leaf(Tensor({4, 3, 3})));
    });
    Rng rng(83);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rand_tensor({4, 3, 3}, rng);
        Tensor got = run_module(store, x, [](Ctx c, Var v) { return dsp_forward(c.sub("dsp"), v); });
        Tensor want = oracle::location(store, "dsp.", x);
        CHECK(got.max_abs_diff(want) <= 1e-10);
    }
}

// ---------------------------------------------------------------- lgf / decode

TEST_CASE("lgf: zero gate convs reduce to up*low + up") {
    auto store = seeded_params(84, [](Ctx c, Tape& t) {
        lgf_forward(c.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({4, 4, 4})));
    });
    zero_all(store);
    Rng rng(85);
    Tensor lo = rand_tensor({4, 8, 8}, rng);
    Tensor hi = rand_tensor({4, 4, 4}, rng);
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    Var y = lgf_forward(ctx.sub("lgf"), t.leaf(lo), t.leaf(hi));
    Tensor up = oracle::resize_bilinear(hi, 8, 8);
    Tensor want(lo.shape());
    for (long long i = 0; i < want.numel(); ++i) want[i] = up[i] * lo[i] + up[i];
    CHECK(t.val(y).max_abs_diff(want) <= 1e-12);

    // f_low == 0: only the skip survives
    Var y0 = lgf_forward(ctx.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(hi));
    CHECK(t.val(y0).max_abs_diff(up) == 0.0);

    // f_low == 1: product doubles the skip
    Var y1 = lgf_forward(ctx.sub("lgf"), t.leaf(Tensor::full({4, 8, 8}, 1.0)), t.leaf(hi));
    Tensor twice(up.shape());
    for (long long i = 0; i < up.numel(); ++i) twice[i] = 2.0 * up[i];
    CHECK(t.val(y1).max_abs_diff(twice) <= 1e-12);
}

TEST_CASE("lgf: channel mismatch is rejected") {
    auto store = seeded_params(86, [](Ctx c, Tape& t) {
        lgf_forward(c.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({4, 4, 4})));
    });
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    CHECK_THROWS_WITH_AS(
        lgf_forward(ctx.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({8, 4, 4}))),
        doctest::Contains("channel mismatch"), std::invalid_argument);
}

TEST_CASE("lgf matches the transcription oracle") {
    auto store = seeded_params(87, [](Ctx c, Tape& t) {
        lgf_forward(c.sub("lgf"), t.leaf(Tensor({4, 8, 8})), t.leaf(Tensor({4, 4, 4})));
    });
    Rng rng(88);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor lo = rand_tensor({4, 8, 8}, rng);
        Tensor hi = rand_tensor({4, 4, 4}, rng);
        Tape t;
        t.grad_enabled = false;
        Ctx ctx{t, store, "", nullptr};
        Var y = lgf_forward(ctx.sub("lgf"), t.leaf(lo), t.leaf(hi));
        Tensor want = oracle::lgf(store, "lgf.", lo, hi);
        CHECK(t.val(y).max_abs_diff(want) <= 1e-10);
    }
}

TEST_CASE("decode: zero inputs and params give zero maps at the toy resolution ladder") {
    const std::vector<std::vector<int>> shapes{
        {4, 48, 48}, {4, 48, 48}, {4, 24, 24}, {4, 12, 12}, {4, 6, 6}};
    auto store = seeded_params(89, [&](Ctx c, Tape& t) {
        std::array<Var, 5> pyr;
        for (int i = 0; i < 5; ++i) pyr[static_cast<std::size_t>(i)] = t.leaf(Tensor(shapes[static_cast<std::size_t>(i)]));
        decode(c, pyr);
    });
    zero_all(store);
    Tape t;
    t.grad_enabled = false;
    Ctx ctx{t, store, "", nullptr};
    std::array<Var, 5> pyr;
    for (int i = 0; i < 5; ++i) pyr[static_cast<std::size_t>(i)] = t.leaf(Tensor(shapes[static_cast<std::size_t>(i)]));
    std::array<Var, 5> d = decode(ctx, pyr);
    for (int i = 0; i < 5; ++i) {
        const Tensor& di = t.val(d[static_cast<std::size_t>(i)]);
        CHECK(di.shape() == shapes[static_cast<std::size_t>(i)]);
        CHECK(di.max_abs_diff(Tensor(shapes[static_cast<std::size_t>(i)])) == 0.0);
    }
}

TEST_CASE("lgf/decode: gradient check through a two-level chain") {
    auto store = seeded_params(90, [](Ctx c, Tape& t) {
        Var d3 = lgf_forward(c.sub("lgf2"), t.leaf(Tensor({4, 4, 4})), t.leaf(Tensor({4, 2, 2})));
        lgf_forward(c.sub("lgf1"), t.leaf(Tensor({4, 8, 8})), d3);
    });
    Rng rng(91);
    GradCheck gc;
    gc.weights = &store;
    gc.inputs = {rand_tensor({4, 8, 8}, rng, 0.5), rand_tensor({4, 4, 4}, rng, 0.5),
                 rand_tensor({4, 2, 2}, rng, 0.5)};
    gc.build = [](Ctx c, const std::vector<Var>& in) {
        Var d3 = lgf_forward(c.sub("lgf2"), in[1], in[2]);
        return sum(c.tape, lgf_forward(c.sub("lgf1"), in[0], d3));
    };
    CHECK(gc.max_rel_err() < 1e-4);
}

TEST_CASE("dgc/dsp gradient sanity: granular + geometric + dsp composite") {
    NetConfig cfg = NetConfig::toy();
    auto store = seeded_params(92, [&](Ctx c, Tape& t) {
        granular_branch(c.sub("gran"), t.leaf(Tensor({4, 8, 8})));
        geometric_branch(c.sub("geo"), t.leaf(Tensor({4, 8, 8})), cfg);
        dsp_forward(c.sub("dsp"), t.leaf(Tensor({4, 3, 3})));
    });
    Rng rng(93);
    GradCheck gc;
    gc.weights = &store;
    gc.inputs = {rand_tensor({4, 8, 8}, rng, 0.5), rand_tensor({4, 3, 3}, rng, 0.5)};
    gc.build = [&](Ctx c, const std::vector<Var>& in) {
        Var a = sum(c.tape, granular_branch(c.sub("gran"), in[0]));
        Var b = sum(c.tape, geometric_branch(c.sub("geo"), in[0], cfg));
        Var d = sum(c.tape, dsp_forward(c.sub("dsp"), in[1]));
        return add(c.tape, add(c.tape, a, b), d);
    };
    CHECK(gc.max_rel_err() < 1e-4);
}
