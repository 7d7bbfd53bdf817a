#ifndef G2HF_TAPE_HPP
#define G2HF_TAPE_HPP

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "g2hf/tensor.hpp"

namespace g2hf {

// Handle into a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape. Values are recorded in topological order;
// each non-leaf carries a backward closure that scatters its output
// adjoint into the adjoints of its inputs.
class Tape {
public:
    bool grad_enabled = true;

    Var leaf(Tensor t) {
        vals_.push_back(std::move(t));
        bw_.emplace_back();
        grads_.emplace_back();
        return Var{static_cast<int>(vals_.size()) - 1};
    }

    // Records an op output. The backward closure receives the tape and the
    // output var whose adjoint it must scatter to its inputs.
    template <class F>
    Var record(Tensor out, F&& bw) {
        Var v = leaf(std::move(out));
        if (grad_enabled)
            bw_.back() = [f = std::forward<F>(bw), v](Tape& tp) { f(tp, v); };
        return v;
    }

    const Tensor& val(Var v) const { return vals_[static_cast<std::size_t>(v.id)]; }

    bool has_grad(Var v) const { return grads_[static_cast<std::size_t>(v.id)] != nullptr; }

    // Adjoint tensor, zero-initialized on first access.
    Tensor& grad(Var v) {
        auto& g = grads_[static_cast<std::size_t>(v.id)];
        if (!g) g = std::make_unique<Tensor>(val(v).shape());
        return *g;
    }

    void backward(Var loss) {
        if (!grad_enabled) throw std::logic_error("backward: gradients disabled on this tape");
        if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
        grad(loss)[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            auto& bw = bw_[static_cast<std::size_t>(id)];
            if (bw && grads_[static_cast<std::size_t>(id)]) bw(*this);
        }
    }

    std::size_t num_values() const { return vals_.size(); }

    // Drops stored values in [from, num_values()) except `keep`. Only legal
    // when gradients are disabled and the caller no longer references the
    // freed vars.
    void free_values(std::size_t from, Var keep) {
        for (std::size_t id = from; id < vals_.size(); ++id)
            if (static_cast<int>(id) != keep.id) vals_[id] = Tensor();
    }

    void free_values(std::size_t from, const std::vector<Var>& keep) {
        for (std::size_t id = from; id < vals_.size(); ++id) {
            bool kept = false;
            for (Var v : keep) kept = kept || v.id == static_cast<int>(id);
            if (!kept) vals_[id] = Tensor();
        }
    }

private:
    std::vector<Tensor> vals_;
    std::vector<std::unique_ptr<Tensor>> grads_;
    std::vector<std::function<void(Tape&)>> bw_;
};

// Runs f and, on a gradient-free tape, frees every intermediate value it
// produced except the result. Keeps inference memory bounded per module.
template <class F>
Var scoped(Tape& t, F&& f) {
    if (t.grad_enabled) return f();
    const std::size_t start = t.num_values();
    Var out = f();
    t.free_values(start, out);
    return out;
}

} // namespace g2hf

#endif
