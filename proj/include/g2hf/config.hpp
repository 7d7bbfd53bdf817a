#ifndef G2HF_CONFIG_HPP
#define G2HF_CONFIG_HPP

#include <vector>

namespace g2hf {

// Network-wide constants. Defaults are the full-size configuration;
// toy() shrinks everything enough for desk-scale training and
// finite-difference checks.
struct NetConfig {
    int channels = 64;                      // working channel count C
    int grid_k = 8;                         // channel grid side K, K^2 == C
    std::vector<int> psa_factors{1, 2, 4, 6};
    std::vector<int> pca_factors{1, 2, 4};
    std::vector<int> mde_kernels{1, 3, 5, 7};
    std::vector<int> geo_factors{1, 2, 4};
    int input_size = 384;
    double lr = 1e-4;

    static NetConfig toy() {
        NetConfig c;
        c.channels = 4;
        c.grid_k = 2;
        c.pca_factors = {1, 2};
        c.input_size = 192;
        return c;
    }
};

} // namespace g2hf

#endif
