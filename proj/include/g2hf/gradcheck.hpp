#ifndef G2HF_GRADCHECK_HPP
#define G2HF_GRADCHECK_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "g2hf/params.hpp"
#include "g2hf/rng.hpp"
#include "g2hf/tape.hpp"

namespace g2hf {

// Central finite-difference comparison against the tape's analytic
// gradients, over randomly sampled parameter and input coordinates.
struct GradCheck {
    // builds a scalar loss on the given context from the input leaves
    std::function<Var(Ctx, const std::vector<Var>&)> build;
    ParamStore* weights = nullptr;
    std::vector<Tensor> inputs;
    int samples = 64;
    double h = 1e-6;
    std::uint64_t seed = 1234;
    bool check_params = true;
    bool check_inputs = true;
    // absolute disagreement below this is treated as finite-difference noise
    // (the FD quotient cannot resolve gradients near the loss's rounding floor)
    double atol = 0.0;

    double max_rel_err() {
        // analytic pass
        Tape tape;
        std::map<std::string, Var> bound;
        Ctx ctx{tape, *weights, "", &bound};
        std::vector<Var> in_vars;
        for (const Tensor& t : inputs) in_vars.push_back(tape.leaf(t));
        Var loss = build(ctx, in_vars);
        tape.backward(loss);

        struct Coord {
            bool is_input;
            std::string name;
            std::size_t input_idx;
            long long flat;
        };
        std::vector<Coord> coords;
        if (check_params)
            for (const auto& [name, var] : bound)
                for (long long i = 0; i < weights->tensors.at(name).numel(); ++i)
                    coords.push_back({false, name, 0, i});
        if (check_inputs)
            for (std::size_t k = 0; k < inputs.size(); ++k)
                for (long long i = 0; i < inputs[k].numel(); ++i)
                    coords.push_back({true, "", k, i});

        Rng rng(seed);
        const int n = std::min<long long>(samples, static_cast<long long>(coords.size()));
        double worst = 0.0;
        for (int s = 0; s < n; ++s) {
            const Coord& c = coords[static_cast<std::size_t>(rng.next_u64() % coords.size())];
            double* slot = c.is_input ? &inputs[c.input_idx][c.flat]
                                      : &weights->tensors.at(c.name)[c.flat];
            const double orig = *slot;
            *slot = orig + h;
            const double lp = eval();
            *slot = orig - h;
            const double lm = eval();
            *slot = orig;
            const double fd = (lp - lm) / (2.0 * h);
            double analytic;
            if (c.is_input) analytic = tape.grad(in_vars[c.input_idx])[c.flat];
            else analytic = tape.has_grad(bound.at(c.name)) ? tape.grad(bound.at(c.name))[c.flat] : 0.0;
            if (std::abs(analytic - fd) <= atol) continue;
            const double rel = std::abs(analytic - fd) / (std::abs(fd) + 1e-8);
            worst = std::max(worst, rel);
        }
        return worst;
    }

private:
    double eval() {
        Tape tape;
        tape.grad_enabled = false;
        Ctx ctx{tape, *weights, "", nullptr};
        std::vector<Var> in_vars;
        for (const Tensor& t : inputs) in_vars.push_back(tape.leaf(t));
        return tape.val(build(ctx, in_vars))[0];
    }
};

} // namespace g2hf

#endif
