#ifndef G2HF_NET_HPP
#define G2HF_NET_HPP

#include <array>
#include <string>

#include "g2hf/config.hpp"
#include "g2hf/dgc.hpp"
#include "g2hf/fusion.hpp"
#include "g2hf/mde.hpp"
#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"

namespace g2hf {

// The five encoder features, all at the working channel count.
// Resolutions: H/4, H/4, H/8, H/16, H/32.
using FeaturePyramid = std::array<Var, 5>;

struct SaliencyOutputs {
    std::array<Var, 5> s; // s[0] is the primary prediction, all [1,H,W] in [0,1]
};

inline void check_encode_preconditions(int h, int w, const NetConfig& cfg) {
    require(h % 32 == 0 && w % 32 == 0,
            "encode: input " + std::to_string(h) + "x" + std::to_string(w) +
                " not divisible by 32 (level 5)");
    for (int f : cfg.psa_factors)
        require((h / 16) % f == 0 && (w / 16) % f == 0,
                "encode: level-4 resolution " + std::to_string(h / 16) + "x" +
                    std::to_string(w / 16) + " not divisible by attention factor " +
                    std::to_string(f));
}

// Toy pyramid encoder standing in for a pretrained backbone: strided 3x3
// convs with ReLU, then a per-level 1x1 compression to C channels. Anything
// producing a FeaturePyramid with the same stride schedule is a valid
// substitute.
inline FeaturePyramid encode(Ctx c, Var image, const NetConfig& cfg) {
    Tape& t = c.tape;
    const Tensor& img = t.val(image);
    require(img.ndim() == 3 && img.size(0) == 3, "encode: expected [3,H,W] image");
    check_encode_preconditions(img.size(1), img.size(2), cfg);
    Ctx e = c.sub("enc");
    // He/Xavier gains keep feature variance roughly constant through the
    // stem so level-5 features are not vanishingly small at init
    const double relu_gain = std::sqrt(6.0), lin_gain = std::sqrt(3.0);
    auto strided = [&](Var x, const std::string& name, int co, int ci) {
        auto [w, b] = e.conv(name, co, ci, 3, relu_gain);
        return relu(t, conv2d(t, x, w, b, 2, 1));
    };
    auto same = [&](Var x, const std::string& name, int co, int ci) {
        auto [w, b] = e.conv(name, co, ci, 3, relu_gain);
        return relu(t, conv2d(t, x, w, b, 1, 1));
    };
    // the level-5 compression feeds the cubic, normalization-free DSP
    // attention; a hotter init keeps its output from collapsing toward zero
    auto compress = [&](Var x, const std::string& name, int ci, double gain) {
        auto [w, b] = e.conv(name, cfg.channels, ci, 1, gain);
        return conv2d(t, x, w, b, 1, 0);
    };
    Var t0 = strided(image, "stem1", 16, 3);   // H/2
    Var t1 = strided(t0, "stem2", 32, 16);     // H/4
    Var t2 = same(t1, "stem3", 32, 32);        // H/4
    Var t3 = strided(t2, "stem4", 48, 32);     // H/8
    Var t4 = strided(t3, "stem5", 64, 48);     // H/16
    Var t5 = strided(t4, "stem6", 64, 64);     // H/32
    // extra context at the coarsest level: cheap (H/32 maps) and the top
    // feature otherwise never sees its spatial neighbours
    Var t6 = same(t5, "stem7", 64, 64);        // H/32
    return {compress(t1, "compress1", 32, lin_gain), compress(t2, "compress2", 32, lin_gain),
            compress(t3, "compress3", 48, lin_gain), compress(t4, "compress4", 64, lin_gain),
            compress(t6, "compress5", 64, 2.0 * lin_gain)};
}

// scoped() for an array result: frees intermediates, keeps all five outputs.
template <class F>
std::array<Var, 5> scoped_array(Tape& t, F&& f) {
    if (t.grad_enabled) return f();
    const std::size_t start = t.num_values();
    std::array<Var, 5> out = f();
    t.free_values(start, std::vector<Var>(out.begin(), out.end()));
    return out;
}

// Full assembly: MDE on levels 1-2, DGC on levels 3-4, DSP on level 5,
// top-down LGF decoding, then a 1x1 head + upsample + sigmoid per level.
inline SaliencyOutputs net_forward(Ctx c, Var image, const NetConfig& cfg) {
    Tape& t = c.tape;
    const int h = t.val(image).size(1), w = t.val(image).size(2);
    FeaturePyramid feats = scoped_array(t, [&] { return encode(c, image, cfg); });
    std::array<Var, 5> refined;
    refined[0] = scoped(t, [&] { return mde_forward(c.sub("mde1"), feats[0], cfg); });
    refined[1] = scoped(t, [&] { return mde_forward(c.sub("mde2"), feats[1], cfg); });
    refined[2] = scoped(t, [&] { return dgc_forward(c.sub("dgc3"), feats[2], cfg); });
    refined[3] = scoped(t, [&] { return dgc_forward(c.sub("dgc4"), feats[3], cfg); });
    refined[4] = scoped(t, [&] { return dsp_forward(c.sub("dsp"), feats[4]); });
    std::array<Var, 5> dec = decode(c, refined);
    SaliencyOutputs out;
    for (int i = 0; i < 5; ++i) {
        Ctx hc = c.sub("head" + std::to_string(i + 1));
        out.s[static_cast<std::size_t>(i)] = scoped(t, [&] {
            // heads start near zero so every prediction begins at 0.5 and the
            // optimizer spends its budget on sign-aligned logit growth
            auto [hw, hb] = hc.conv("conv", 1, cfg.channels, 1, 0.01);
            Var logit = conv2d(t, dec[static_cast<std::size_t>(i)], hw, hb, 1, 0);
            return sigmoid(t, resize_bilinear(t, logit, h, w));
        });
    }
    return out;
}

// Weights fully determined by the seed: conv weights uniform(-b,b) with
// b = 1/sqrt(fan_in), biases zero, drawn in forward traversal order.
inline ParamStore init_weights(std::uint64_t seed, const NetConfig& cfg) {
    ParamStore store;
    Rng rng(seed);
    store.attach_init_rng(&rng);
    Tape tape;
    tape.grad_enabled = false;
    Ctx c{tape, store, "", nullptr};
    Var image = tape.leaf(Tensor({3, cfg.input_size, cfg.input_size}));
    net_forward(c, image, cfg);
    store.attach_init_rng(nullptr);
    return store;
}

} // namespace g2hf

#endif
