#ifndef G2HF_OBJECTIVE_HPP
#define G2HF_OBJECTIVE_HPP

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"
#include "g2hf/tape.hpp"

namespace g2hf {

constexpr double kBceClamp = 1e-7;
constexpr double kLossEps = 1e-8;
constexpr double kFmBeta2 = 0.3;

// ---------------------------------------------------------------------------
// Plain (non-tape) losses and metrics
// ---------------------------------------------------------------------------

// Per-pixel mean binary cross entropy with an epsilon clamp on s.
inline double bce_loss_value(const Tensor& s, const Tensor& g) {
    require(s.same_shape(g), "bce: shape mismatch");
    double acc = 0.0;
    for (long long i = 0; i < s.numel(); ++i) {
        const double st = std::min(std::max(s[i], kBceClamp), 1.0 - kBceClamp);
        acc += -(g[i] * std::log(st) + (1.0 - g[i]) * std::log(1.0 - st));
    }
    return acc / static_cast<double>(s.numel());
}

inline double iou_loss_value(const Tensor& s, const Tensor& g) {
    require(s.same_shape(g), "iou: shape mismatch");
    double inter = 0.0, uni = 0.0;
    for (long long i = 0; i < s.numel(); ++i) {
        inter += s[i] * g[i];
        uni += s[i] + g[i] - s[i] * g[i];
    }
    if (inter == 0.0 && uni == 0.0) return 0.0; // both maps empty: perfect match
    return 1.0 - inter / (uni + kLossEps);
}

inline double fm_loss_value(const Tensor& s, const Tensor& g, double beta2 = kFmBeta2) {
    require(s.same_shape(g), "fm: shape mismatch");
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (long long i = 0; i < s.numel(); ++i) {
        tp += s[i] * g[i];
        fp += s[i] * (1.0 - g[i]);
        fn += (1.0 - s[i]) * g[i];
    }
    const double h = beta2 * (tp + fn) + (tp + fp);
    return 1.0 - (1.0 + beta2) * tp / (h + kLossEps);
}

struct LossBreakdown {
    double bce = 0.0, iou = 0.0, fm = 0.0, total = 0.0;
};

// Per image, sum the three losses over all supervised outputs; average over
// the batch.
inline LossBreakdown total_loss(const std::vector<std::vector<Tensor>>& outputs,
                                const std::vector<Tensor>& gts) {
    require(!outputs.empty(), "total_loss: empty batch");
    require(outputs.size() == gts.size(), "total_loss: batch size mismatch");
    LossBreakdown lb;
    for (std::size_t i = 0; i < outputs.size(); ++i)
        for (const Tensor& s : outputs[i]) {
            lb.bce += bce_loss_value(s, gts[i]);
            lb.iou += iou_loss_value(s, gts[i]);
            lb.fm += fm_loss_value(s, gts[i]);
        }
    const double n = static_cast<double>(outputs.size());
    lb.bce /= n;
    lb.iou /= n;
    lb.fm /= n;
    lb.total = lb.bce + lb.iou + lb.fm;
    return lb;
}

inline double mae_metric(const Tensor& s, const Tensor& g) {
    require(s.same_shape(g), "mae: shape mismatch");
    double acc = 0.0;
    for (long long i = 0; i < s.numel(); ++i) acc += std::abs(s[i] - g[i]);
    return acc / static_cast<double>(s.numel());
}

struct EvalResult {
    double mae = 0.0;
    double f_beta = 0.0;
    double threshold = 0.0;
};

// Adaptive-threshold F-measure: binarize at t = min(1, 2*mean(s)); a pixel
// counts as predicted-salient when s >= t and s > 0, so an all-zero
// prediction scores 0. 0/0 cases resolve to 0.
inline EvalResult f_measure(const Tensor& s, const Tensor& g, double beta2 = kFmBeta2) {
    require(s.same_shape(g), "f_measure: shape mismatch");
    const double t = std::min(1.0, 2.0 * s.sum() / static_cast<double>(s.numel()));
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (long long i = 0; i < s.numel(); ++i) {
        const bool pred = s[i] >= t && s[i] > 0.0;
        const bool gt = g[i] > 0.5;
        if (pred && gt) tp += 1.0;
        else if (pred) fp += 1.0;
        else if (gt) fn += 1.0;
    }
    EvalResult r;
    r.mae = mae_metric(s, g);
    r.threshold = t;
    const double p = (tp + fp > 0.0) ? tp / (tp + fp) : 0.0;
    const double rec = (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
    r.f_beta = (beta2 * p + rec > 0.0) ? (1.0 + beta2) * p * rec / (beta2 * p + rec) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Tape losses (ground truth is a constant)
// ---------------------------------------------------------------------------

inline Var bce_loss(Tape& t, Var s, const Tensor& g) {
    const double v = bce_loss_value(t.val(s), g);
    return t.record(Tensor::scalar(v), [s, g](Tape& tp, Var out) {
        const double go = tp.grad(out)[0];
        const Tensor& sv = tp.val(s);
        Tensor& gs = tp.grad(s);
        const double n = static_cast<double>(sv.numel());
        for (long long i = 0; i < sv.numel(); ++i) {
            if (sv[i] < kBceClamp || sv[i] > 1.0 - kBceClamp) continue; // clamped: flat
            gs[i] += go * (-g[i] / sv[i] + (1.0 - g[i]) / (1.0 - sv[i])) / n;
        }
    });
}

inline Var iou_loss(Tape& t, Var s, const Tensor& g) {
    const double v = iou_loss_value(t.val(s), g);
    return t.record(Tensor::scalar(v), [s, g](Tape& tp, Var out) {
        const double go = tp.grad(out)[0];
        const Tensor& sv = tp.val(s);
        Tensor& gs = tp.grad(s);
        double inter = 0.0, uni = 0.0;
        for (long long i = 0; i < sv.numel(); ++i) {
            inter += sv[i] * g[i];
            uni += sv[i] + g[i] - sv[i] * g[i];
        }
        if (inter == 0.0 && uni == 0.0) return;
        const double d = uni + kLossEps;
        for (long long i = 0; i < sv.numel(); ++i)
            gs[i] += go * (-(g[i] * d - inter * (1.0 - g[i])) / (d * d));
    });
}

inline Var fm_loss(Tape& t, Var s, const Tensor& g, double beta2 = kFmBeta2) {
    const double v = fm_loss_value(t.val(s), g, beta2);
    return t.record(Tensor::scalar(v), [s, g, beta2](Tape& tp, Var out) {
        const double go = tp.grad(out)[0];
        const Tensor& sv = tp.val(s);
        Tensor& gs = tp.grad(s);
        double tpc = 0.0, fpc = 0.0, fnc = 0.0;
        for (long long i = 0; i < sv.numel(); ++i) {
            tpc += sv[i] * g[i];
            fpc += sv[i] * (1.0 - g[i]);
            fnc += (1.0 - sv[i]) * g[i];
        }
        const double h = beta2 * (tpc + fnc) + (tpc + fpc) + kLossEps;
        // dTP/ds_i = g_i, dH/ds_i = 1
        for (long long i = 0; i < sv.numel(); ++i)
            gs[i] += go * (-(1.0 + beta2) * (g[i] * h - tpc) / (h * h));
    });
}

// Sum of the three losses over the five supervised outputs of one image.
inline Var supervision_loss(Tape& t, const std::array<Var, 5>& outputs, const Tensor& g) {
    Var total;
    for (Var s : outputs) {
        Var term = add(t, add(t, bce_loss(t, s, g), iou_loss(t, s, g)), fm_loss(t, s, g));
        total = total.valid() ? add(t, total, term) : term;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule
// ---------------------------------------------------------------------------

// RMSprop with momentum:
//   acc <- alpha*acc + (1-alpha)*g^2
//   m   <- momentum*m + g/sqrt(acc + eps)
//   w   <- w - lr*m
struct RmsState {
    std::map<std::string, Tensor> acc;
    std::map<std::string, Tensor> mom;
    long long step = 0;
};

struct RmsHyper {
    double lr = 1e-4;
    double alpha = 0.9;
    double momentum = 0.9;
    double eps = 1e-8;
};

inline void rmsprop_step(ParamStore& w, const std::map<std::string, Tensor>& grads,
                         RmsState& st, const RmsHyper& hp = {}) {
    for (auto& [name, param] : w.tensors) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        require(g.same_shape(param), "rmsprop: gradient shape mismatch for " + name);
        auto [ait, ignored1] = st.acc.try_emplace(name, Tensor(param.shape()));
        auto [mit, ignored2] = st.mom.try_emplace(name, Tensor(param.shape()));
        Tensor& acc = ait->second;
        Tensor& mom = mit->second;
        for (long long i = 0; i < param.numel(); ++i) {
            acc[i] = hp.alpha * acc[i] + (1.0 - hp.alpha) * g[i] * g[i];
            mom[i] = hp.momentum * mom[i] + g[i] / std::sqrt(acc[i] + hp.eps);
            param[i] -= hp.lr * mom[i];
        }
    }
    ++st.step;
}

// lr 1e-4 for the first 30 epochs, then multiplied by 0.7 after each
// completed 12-epoch span (epochs 30, 42, 54, ...).
inline double lr_schedule(int epoch, double base_lr = 1e-4) {
    if (epoch < 30) return base_lr;
    const int decays = (epoch - 30) / 12 + 1;
    return base_lr * std::pow(0.7, decays);
}

} // namespace g2hf

#endif
