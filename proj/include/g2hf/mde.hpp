#ifndef G2HF_MDE_HPP
#define G2HF_MDE_HPP

#include <string>

#include "g2hf/attention.hpp"
#include "g2hf/config.hpp"
#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"

namespace g2hf {

// PSA and PCA applied to the same feature, concatenated and fused 2C -> C.
inline Var attn_pair_fuse(Ctx c, Var x, const NetConfig& cfg) {
    Tape& t = c.tape;
    const int ch = t.val(x).size(0);
    Var ps = psa_forward(c.sub("psa"), x, cfg.psa_factors);
    Var pc = pca_forward(c.sub("pca"), x, cfg.grid_k, cfg.pca_factors);
    Var cat = concat_channels(t, {ps, pc});
    auto [w, b] = c.conv("fuse", ch, 2 * ch, 3);
    return conv2d(t, cat, w, b, 1, 1);
}

// Multi-scale detail enhancement for the low-level features. Four simplified
// U-branches with kernels 1/3/5/7, each refined by the attention pair, then
// merged 4C -> C.
inline Var mde_forward(Ctx c, Var x, const NetConfig& cfg) {
    Tape& t = c.tape;
    const Tensor& xv = t.val(x);
    const int ch = xv.size(0), h = xv.size(1), w = xv.size(2);
    std::vector<Var> refined;
    for (std::size_t i = 0; i < cfg.mde_kernels.size(); ++i) {
        const int k = cfg.mde_kernels[i];
        Ctx bc = c.sub("branch" + std::to_string(i + 1));
        refined.push_back(scoped(t, [&] {
            auto [wa, ba] = bc.conv("convA", ch, ch, k);
            Var a = conv2d(t, x, wa, ba, 1, (k - 1) / 2);
            Var down = resize_bilinear(t, a, h / 2, w / 2);
            auto [wi, bi] = bc.conv("inner", ch, ch, 3);
            Var m = conv2d(t, down, wi, bi, 1, 1);
            auto [wb, bb] = bc.conv("convB", ch, ch, k);
            Var e = conv2d(t, m, wb, bb, 1, (k - 1) / 2);
            Var fi = add(t, resize_bilinear(t, e, h, w), a);
            return attn_pair_fuse(bc, fi, cfg);
        }));
    }
    Var cat = concat_channels(t, refined);
    auto [mw, mb] = c.conv("merge", ch, static_cast<int>(refined.size()) * ch, 3);
    return conv2d(t, cat, mw, mb, 1, 1);
}

} // namespace g2hf

#endif
