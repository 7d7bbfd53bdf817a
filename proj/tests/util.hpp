#ifndef G2HF_TESTS_UTIL_HPP
#define G2HF_TESTS_UTIL_HPP

#include <vector>

#include "g2hf/params.hpp"
#include "g2hf/rng.hpp"
#include "g2hf/tape.hpp"
#include "g2hf/tensor.hpp"

namespace testutil {

// runs fn once with an init rng attached so all parameters come into being
template <class F>
g2hf::ParamStore seeded_params(std::uint64_t seed, F&& fn) {
    g2hf::ParamStore store;
    g2hf::Rng rng(seed);
    store.attach_init_rng(&rng);
    g2hf::Tape t;
    t.grad_enabled = false;
    g2hf::Ctx c{t, store, "", nullptr};
    fn(c, t);
    store.attach_init_rng(nullptr);
    return store;
}

inline g2hf::Tensor rand_tensor(std::vector<int> shape, g2hf::Rng& rng, double scale = 1.0) {
    g2hf::Tensor t(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform_symmetric(scale);
    return t;
}

inline g2hf::Tensor rand_binary(std::vector<int> shape, g2hf::Rng& rng, double density = 0.5) {
    g2hf::Tensor t(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform() < density ? 1.0 : 0.0;
    return t;
}

} // namespace testutil

#endif
