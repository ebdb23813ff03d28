#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"
#include "tfcl/wavelet/scalogram.hpp"

namespace tfcl::augment {

using wavelet::Scalogram;

enum class TimeFreqKind { ColorDistort, CropResize, Flip };

inline constexpr std::array kAllTimeFreqKinds = {TimeFreqKind::ColorDistort, TimeFreqKind::CropResize,
                                                 TimeFreqKind::Flip};

inline std::string to_string(TimeFreqKind k) {
    switch (k) {
        case TimeFreqKind::ColorDistort: return "color_distort";
        case TimeFreqKind::CropResize: return "crop_resize";
        case TimeFreqKind::Flip: return "flip";
    }
    return "?";
}

inline TimeFreqKind timefreq_kind_from_string(const std::string& s) {
    for (auto k : kAllTimeFreqKinds)
        if (to_string(k) == s) return k;
    fail(ErrorCode::ConfigInvalid, "unknown time-frequency transform '" + s + "'");
}

struct Range {
    double lo;
    double hi;
};

struct TimeFreqSpec {
    TimeFreqKind kind = TimeFreqKind::Flip;
    Range brightness{-0.9, 0.9};
    Range contrast{0.1, 1.9};
    Range saturation{0.1, 1.9};
    Range hue{-0.3, 0.3};
    double grayscale_prob = 0.2;
    Range crop_area{0.25, 1.0};
    Range crop_aspect{3.0 / 4.0, 4.0 / 3.0};

    void validate() const {
        for (const Range& r : {brightness, contrast, saturation, hue, crop_aspect})
            require(r.lo <= r.hi, ErrorCode::InvalidParams, "augmentation range must have lo <= hi");
        require(grayscale_prob >= 0.0 && grayscale_prob <= 1.0, ErrorCode::InvalidParams,
                "grayscale probability must lie in [0,1]");
        require(crop_area.lo > 0.0 && crop_area.lo <= crop_area.hi && crop_area.hi <= 1.0, ErrorCode::InvalidParams,
                "crop area fraction must lie in (0,1]");
        require(crop_aspect.lo > 0.0, ErrorCode::InvalidParams, "crop aspect must be positive");
    }
};

inline constexpr std::array<float, 3> kLumaWeights{0.299f, 0.587f, 0.114f};

inline void check_image_shape(const Scalogram& s) {
    require(s.planes.rank() == 3 && s.channels() == 3 && s.height() >= 2 && s.width() >= 2, ErrorCode::BadShape,
            "scalogram must be (3, H>=2, W>=2), got " + shape_string(s.planes.shape()));
}

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

inline Scalogram adjust_brightness(Scalogram s, float delta) {
    for (auto& v : s.planes.values()) v = clamp01(v + delta);
    return s;
}

/// Scales every channel around its own mean.
inline Scalogram adjust_contrast(Scalogram s, float factor) {
    const std::size_t plane = s.height() * s.width();
    for (std::size_t c = 0; c < s.channels(); ++c) {
        float* p = s.planes.data() + c * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        const auto m = static_cast<float>(mean / static_cast<double>(plane));
        for (std::size_t i = 0; i < plane; ++i) p[i] = clamp01(m + factor * (p[i] - m));
    }
    return s;
}

/// Scales every pixel around its own luma.
inline Scalogram adjust_saturation(Scalogram s, float factor) {
    const std::size_t plane = s.height() * s.width();
    float* r = s.planes.data();
    float* g = r + plane;
    float* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        const float gray = kLumaWeights[0] * r[i] + kLumaWeights[1] * g[i] + kLumaWeights[2] * b[i];
        r[i] = clamp01(gray + factor * (r[i] - gray));
        g[i] = clamp01(gray + factor * (g[i] - gray));
        b[i] = clamp01(gray + factor * (b[i] - gray));
    }
    return s;
}

namespace detail {

inline std::array<float, 3> rgb_to_hsv(float r, float g, float b) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    float h = 0.0f;
    if (d > 0.0f) {
        if (mx == r) h = std::fmod((g - b) / d, 6.0f);
        else if (mx == g) h = (b - r) / d + 2.0f;
        else h = (r - g) / d + 4.0f;
        h /= 6.0f;
        if (h < 0.0f) h += 1.0f;
    }
    return {h, mx > 0.0f ? d / mx : 0.0f, mx};
}

inline std::array<float, 3> hsv_to_rgb(float h, float s, float v) {
    const float h6 = h * 6.0f;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const float f = h6 - std::floor(h6);
    const float p = v * (1.0f - s), q = v * (1.0f - s * f), t = v * (1.0f - s * (1.0f - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

}  // namespace detail

/// Rotates the hue of every (x, y, z) -> (R, G, B) pixel by `shift` turns.
inline Scalogram adjust_hue(Scalogram s, float shift) {
    const std::size_t plane = s.height() * s.width();
    float* r = s.planes.data();
    float* g = r + plane;
    float* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        auto [h, sat, val] = detail::rgb_to_hsv(r[i], g[i], b[i]);
        h = h + shift;
        h -= std::floor(h);
        const auto rgb = detail::hsv_to_rgb(h, sat, val);
        r[i] = clamp01(rgb[0]);
        g[i] = clamp01(rgb[1]);
        b[i] = clamp01(rgb[2]);
    }
    return s;
}

inline Scalogram to_grayscale(Scalogram s) {
    const std::size_t plane = s.height() * s.width();
    float* r = s.planes.data();
    float* g = r + plane;
    float* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        const float gray = clamp01(kLumaWeights[0] * r[i] + kLumaWeights[1] * g[i] + kLumaWeights[2] * b[i]);
        r[i] = g[i] = b[i] = gray;
    }
    return s;
}

/// Reverses the time (width) axis.
inline Scalogram flip_horizontal(Scalogram s) {
    const std::size_t w = s.width();
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t y = 0; y < s.height(); ++y) {
            float* row = s.planes.data() + (c * s.height() + y) * w;
            std::reverse(row, row + w);
        }
    return s;
}

/// Bilinear resize of the crop [top, top+h) x [left, left+w) back to the
/// full image size. Output pixel centres map onto the crop's corner-aligned
/// grid, so a full-image crop reproduces the input exactly.
inline Scalogram crop_resize(const Scalogram& s, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    const std::size_t H = s.height(), W = s.width();
    require(h >= 1 && w >= 1 && top + h <= H && left + w <= W, ErrorCode::InvalidParams, "crop outside image");
    Scalogram out = wavelet::blank_scalogram(H, W, s.channels());
    const double sy = H > 1 ? static_cast<double>(h - 1) / static_cast<double>(H - 1) : 0.0;
    const double sx = W > 1 ? static_cast<double>(w - 1) / static_cast<double>(W - 1) : 0.0;
    for (std::size_t y = 0; y < H; ++y) {
        const double src_y = static_cast<double>(top) + static_cast<double>(y) * sy;
        const auto y0 = static_cast<std::size_t>(std::floor(src_y));
        const std::size_t y1 = std::min(y0 + 1, top + h - 1);
        const auto fy = static_cast<float>(src_y - static_cast<double>(y0));
        for (std::size_t x = 0; x < W; ++x) {
            const double src_x = static_cast<double>(left) + static_cast<double>(x) * sx;
            const auto x0 = static_cast<std::size_t>(std::floor(src_x));
            const std::size_t x1 = std::min(x0 + 1, left + w - 1);
            const auto fx = static_cast<float>(src_x - static_cast<double>(x0));
            for (std::size_t c = 0; c < s.channels(); ++c) {
                const float top_row = s.at(y0, x0, c) + fx * (s.at(y0, x1, c) - s.at(y0, x0, c));
                const float bottom_row = s.at(y1, x0, c) + fx * (s.at(y1, x1, c) - s.at(y1, x0, c));
                out.at(y, x, c) = clamp01(top_row + fy * (bottom_row - top_row));
            }
        }
    }
    return out;
}

struct CropBox {
    std::size_t top, left, height, width;
};

/// Random-resized-crop box: up to ten rejection attempts, then the full image.
inline CropBox sample_crop(std::size_t H, std::size_t W, Range area, Range aspect, RngStream& rng) {
    const double total = static_cast<double>(H * W);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = total * rng.uniform(area.lo, area.hi);
        const double ratio = std::exp(rng.uniform(std::log(aspect.lo), std::log(aspect.hi)));
        const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * ratio)));
        const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / ratio)));
        if (w >= 1 && h >= 1 && w <= W && h <= H) {
            const std::size_t top = rng.index(H - h + 1);
            const std::size_t left = rng.index(W - w + 1);
            return {top, left, h, w};
        }
    }
    return {0, 0, H, W};
}

inline Scalogram apply_timefreq(const Scalogram& s, const TimeFreqSpec& spec, RngStream& rng) {
    check_image_shape(s);
    spec.validate();
    switch (spec.kind) {
        case TimeFreqKind::ColorDistort: {
            const auto b = static_cast<float>(rng.uniform(spec.brightness.lo, spec.brightness.hi));
            const auto c = static_cast<float>(rng.uniform(spec.contrast.lo, spec.contrast.hi));
            const auto sat = static_cast<float>(rng.uniform(spec.saturation.lo, spec.saturation.hi));
            const auto h = static_cast<float>(rng.uniform(spec.hue.lo, spec.hue.hi));
            const bool gray = rng.bernoulli(spec.grayscale_prob);
            Scalogram out = adjust_hue(adjust_saturation(adjust_contrast(adjust_brightness(s, b), c), sat), h);
            return gray ? to_grayscale(std::move(out)) : out;
        }
        case TimeFreqKind::CropResize: {
            const CropBox box = sample_crop(s.height(), s.width(), spec.crop_area, spec.crop_aspect, rng);
            return crop_resize(s, box.top, box.left, box.height, box.width);
        }
        case TimeFreqKind::Flip: return flip_horizontal(s);
    }
    fail(ErrorCode::InvalidParams, "unhandled time-frequency transform");
}

}  // namespace tfcl::augment
