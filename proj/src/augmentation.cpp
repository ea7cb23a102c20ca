#include "mkd/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mkd {

std::string to_string(AugStrategy s) { return s == AugStrategy::full ? "full" : "partial"; }

AugStrategy parse_aug_strategy(const std::string& s) {
    if (s == "full") return AugStrategy::full;
    if (s == "partial") return AugStrategy::partial;
    throw std::invalid_argument("unknown aug_strategy '" + s + "' (expected full or partial)");
}

namespace {

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r)
        h = (g - b) / d;
    else if (mx == g)
        h = 2.0 + (b - r) / d;
    else
        h = 4.0 + (r - g) / d;
    h = h / 6.0;
    h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double h6 = h * 6.0;
    const int i = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

void clamp01(std::span<Scalar> x) {
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
}

void jitter(std::span<Scalar> img, std::size_t C, std::size_t HW, const AugPolicy& p, Rng& rng) {
    const double fb = uniform_in(rng, std::max(0.0, 1 - p.brightness), 1 + p.brightness);
    const double fc = uniform_in(rng, std::max(0.0, 1 - p.contrast), 1 + p.contrast);
    const double fs = uniform_in(rng, std::max(0.0, 1 - p.saturation), 1 + p.saturation);
    const double fh = uniform_in(rng, -p.hue, p.hue);

    for (auto& v : img) v *= fb;
    clamp01(img);

    double mean = 0.0;
    if (C == 3)
        for (std::size_t i = 0; i < HW; ++i) mean += luma(img[i], img[HW + i], img[2 * HW + i]);
    else
        for (std::size_t i = 0; i < C * HW; ++i) mean += img[i] / static_cast<double>(C);
    mean /= static_cast<double>(HW);
    for (auto& v : img) v = fc * v + (1 - fc) * mean;
    clamp01(img);

    if (C != 3) return;
    for (std::size_t i = 0; i < HW; ++i) {
        const double g = luma(img[i], img[HW + i], img[2 * HW + i]);
        for (std::size_t c = 0; c < 3; ++c) img[c * HW + i] = fs * img[c * HW + i] + (1 - fs) * g;
    }
    clamp01(img);
    for (std::size_t i = 0; i < HW; ++i) {
        double h, s, v;
        rgb_to_hsv(img[i], img[HW + i], img[2 * HW + i], h, s, v);
        h += fh;
        h -= std::floor(h);
        hsv_to_rgb(h, s, v, img[i], img[HW + i], img[2 * HW + i]);
    }
    clamp01(img);
}

}  // namespace

Tensor augment(const Tensor& images, const AugPolicy& policy, Rng& rng) {
    if (images.rank() != 4) throw std::invalid_argument("augment expects [B, C, H, W], got " + images.shape_string());
    const std::size_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3), HW = H * W;
    const auto pad_h = static_cast<long>(std::lround(policy.crop_pad_fraction * static_cast<double>(H)));
    const auto pad_w = static_cast<long>(std::lround(policy.crop_pad_fraction * static_cast<double>(W)));
    const bool full = policy.strategy == AugStrategy::full;

    Tensor out(images.shape());
    for (std::size_t b = 0; b < B; ++b) {
        const auto src = images.row(b);
        auto dst = out.row(b);
        // Random crop of the zero-padded image at offset (dy, dx) in [-pad, pad].
        const long dy = pad_h > 0 ? static_cast<long>(uniform_index(rng, 2 * pad_h + 1)) - pad_h : 0;
        const long dx = pad_w > 0 ? static_cast<long>(uniform_index(rng, 2 * pad_w + 1)) - pad_w : 0;
        const bool flip = uniform01(rng) < policy.p_flip;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const long sy = static_cast<long>(y) + dy;
                    const long sx0 = static_cast<long>(flip ? W - 1 - x : x) + dx;
                    const bool inside = sy >= 0 && sy < static_cast<long>(H) && sx0 >= 0 && sx0 < static_cast<long>(W);
                    dst[c * HW + y * W + x] =
                        inside ? src[c * HW + static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx0)] : 0.0;
                }
        if (!full) continue;
        if (uniform01(rng) < policy.p_jitter) jitter(dst, C, HW, policy, rng);
        if (uniform01(rng) < policy.p_gray && C == 3) {
            for (std::size_t i = 0; i < HW; ++i) {
                const double g = luma(dst[i], dst[HW + i], dst[2 * HW + i]);
                dst[i] = dst[HW + i] = dst[2 * HW + i] = g;
            }
        }
        clamp01(dst);
    }
    return out;
}

}  // namespace mkd
