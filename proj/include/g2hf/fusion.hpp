#ifndef G2HF_FUSION_HPP
#define G2HF_FUSION_HPP

#include <array>
#include <string>

#include "g2hf/dgc.hpp"
#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"

namespace g2hf {

// Deep semantic perception: the top-level feature is small enough to run
// the channel-affinity attention at full scale, without unshuffling.
inline Var dsp_forward(Ctx c, Var f5) { return location_sensing(c, f5); }

// Local-global guidance fusion. The high-level feature is upsampled to the
// low feature's grid; both pass a residual 3x3 gate conv; the gated features
// are multiplied and the upsampled high feature is added back.
inline Var lgf_forward(Ctx c, Var f_low, Var f_high) {
    Tape& t = c.tape;
    // copy the dims: recording ops below may reallocate the tape's value
    // storage and invalidate references returned by val()
    const int ch = t.val(f_low).size(0), lo_h = t.val(f_low).size(1), lo_w = t.val(f_low).size(2);
    const int hi_h = t.val(f_high).size(1), hi_w = t.val(f_high).size(2);
    require(ch == t.val(f_high).size(0), "lgf: channel mismatch");
    require(hi_h <= lo_h && hi_w <= lo_w, "lgf: high feature coarser than low");
    Var up = resize_bilinear(t, f_high, lo_h, lo_w);
    auto [lw, lb] = c.conv("low", ch, ch, 3);
    Var lg = add(t, conv2d(t, f_low, lw, lb, 1, 1), f_low);
    auto [hw, hb] = c.conv("high", ch, ch, 3);
    Var hg = add(t, conv2d(t, up, hw, hb, 1, 1), up);
    return add(t, mul(t, hg, lg), up);
}

// Strict top-down decoder chain: D5 = F5^s, D_i = LGF(F_i, D_{i+1}).
inline std::array<Var, 5> decode(Ctx c, const std::array<Var, 5>& pyramid_out) {
    std::array<Var, 5> d;
    d[4] = pyramid_out[4];
    for (int i = 3; i >= 0; --i)
        d[static_cast<std::size_t>(i)] =
            lgf_forward(c.sub("lgf" + std::to_string(i + 1)), pyramid_out[static_cast<std::size_t>(i)],
                        d[static_cast<std::size_t>(i + 1)]);
    return d;
}

} // namespace g2hf

#endif
