#pragma once

#include <string>

#include "mkd/rng.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

enum class AugStrategy { full, partial };

std::string to_string(AugStrategy s);
AugStrategy parse_aug_strategy(const std::string& s);

struct AugPolicy {
    AugStrategy strategy = AugStrategy::full;
    /// Zero padding for the random crop, as a fraction of the side length.
    double crop_pad_fraction = 0.125;
    double p_flip = 0.5;
    double p_jitter = 0.8;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.4;
    double hue = 0.1;
    double p_gray = 0.2;

    static AugPolicy full() { return {}; }
    static AugPolicy partial() {
        AugPolicy p;
        p.strategy = AugStrategy::partial;
        return p;
    }
    static AugPolicy for_strategy(AugStrategy s) { return s == AugStrategy::full ? full() : partial(); }
    /// No crop offset and every probability zero: augment() returns its input.
    static AugPolicy identity() {
        AugPolicy p;
        p.crop_pad_fraction = 0.0;
        p.p_flip = p.p_jitter = p.p_gray = 0.0;
        return p;
    }
};

/// Applies crop, flip, then (full strategy only) colour jitter and grayscale,
/// independently per image of a [B, C, H, W] batch with values in [0, 1].
/// Jitter draws brightness, contrast, saturation and hue factors and applies
/// them in that order; saturation, hue and grayscale act on 3-channel images
/// only. Output values are clamped to [0, 1].
Tensor augment(const Tensor& images, const AugPolicy& policy, Rng& rng);

}  // namespace mkd
