#ifndef G2HF_PNM_HPP
#define G2HF_PNM_HPP

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2hf/tensor.hpp"

namespace g2hf {

class image_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int pnm_token(std::istream& is) {
    // skips whitespace and '#' comments
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            is.unget();
            break;
        }
    }
    int v;
    if (!(is >> v)) throw image_error("malformed PNM header");
    return v;
}

} // namespace detail

// Loads binary PGM (P5, -> [1,H,W]) or PPM (P6, -> [3,H,W]); samples are
// mapped to [0,1] by /255.
inline Tensor load_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw image_error("cannot open image '" + path + "'");
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    int channels;
    if (m0 == 'P' && m1 == '5') channels = 1;
    else if (m0 == 'P' && m1 == '6') channels = 3;
    else throw image_error("'" + path + "': not a binary PGM/PPM file");
    const int w = detail::pnm_token(is);
    const int h = detail::pnm_token(is);
    const int maxval = detail::pnm_token(is);
    if (w <= 0 || h <= 0) throw image_error("'" + path + "': bad dimensions");
    if (maxval != 255) throw image_error("'" + path + "': maxval must be 255");
    is.get(); // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw image_error("'" + path + "': truncated pixel data");
    Tensor t({channels, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                t.at(c, y, x) =
                    raw[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
    return t;
}

// Saves [1,H,W] as binary PGM; values are rounded to 8 bits and clamped.
inline void save_pgm(const Tensor& t, const std::string& path) {
    require(t.ndim() == 3 && t.size(0) == 1, "save_pgm: expected [1,H,W]");
    const int h = t.size(1), w = t.size(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw image_error("cannot open '" + path + "' for writing");
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = std::round(t.at(0, y, x) * 255.0);
            v = std::min(255.0, std::max(0.0, v));
            raw[static_cast<std::size_t>(y) * w + x] = static_cast<unsigned char>(v);
        }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw image_error("write failure on '" + path + "'");
}

inline void save_ppm(const Tensor& t, const std::string& path) {
    require(t.ndim() == 3 && t.size(0) == 3, "save_ppm: expected [3,H,W]");
    const int h = t.size(1), w = t.size(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw image_error("cannot open '" + path + "' for writing");
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::round(t.at(c, y, x) * 255.0);
                v = std::min(255.0, std::max(0.0, v));
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<unsigned char>(v);
            }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw image_error("write failure on '" + path + "'");
}

} // namespace g2hf

#endif
