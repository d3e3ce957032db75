#include "fewstep/codec.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewstep {

void CodecConfig::validate() const {
    if (spatial_factor < 1) throw std::invalid_argument("CodecConfig: spatial_factor must be >= 1");
    if (temporal_factor != 8) throw std::invalid_argument("CodecConfig: temporal factor is fixed at 8");
    if (channel_expand < 1 || channel_expand > 4) {
        throw std::invalid_argument("CodecConfig: channel_expand must lie in 1..4");
    }
}

VideoClip::VideoClip(LatentTensor data, const CodecConfig& cfg) : frames(std::move(data)) {
    cfg.validate();
    const Shape& s = frames.shape();
    if (s.t < 1 || s.t % 8 != 1) {
        throw std::invalid_argument("VideoClip: frame count must be 8k + 1, got " +
                                    std::to_string(s.t));
    }
    if (!frames.all_finite()) throw std::invalid_argument("VideoClip: non-finite entries");
}

int latent_frames(int input_frames, const CodecConfig& cfg) {
    cfg.validate();
    if (input_frames < 1 || input_frames % 8 != 1) {
        throw std::invalid_argument("latent_frames: frame count must be 8k + 1");
    }
    return 1 + (input_frames - 1) / 8;
}

int pixels_per_latent(const CodecConfig& cfg) {
    cfg.validate();
    return cfg.spatial_factor * cfg.spatial_factor * 8;
}

Shape latent_shape(const Shape& video, const CodecConfig& cfg) {
    cfg.validate();
    if (video.h % cfg.spatial_factor != 0 || video.w % cfg.spatial_factor != 0) {
        throw std::invalid_argument("latent_shape: spatial extent not divisible by factor");
    }
    return Shape{latent_frames(video.t, cfg), video.h / cfg.spatial_factor,
                 video.w / cfg.spatial_factor, video.c * cfg.channel_expand};
}

namespace {

// Frame range [lo, hi) pooled into latent time g.
void group_range(int g, int* lo, int* hi) {
    if (g == 0) {
        *lo = 0;
        *hi = 1;
    } else {
        *lo = 8 * (g - 1) + 1;
        *hi = 8 * g + 1;
    }
}

}  // namespace

LatentTensor encode(const VideoClip& clip, const CodecConfig& cfg) {
    const Shape vs = clip.frames.shape();
    const Shape ls = latent_shape(vs, cfg);
    const int f = cfg.spatial_factor;
    LatentTensor latent(ls);

    // Centered coordinate second moments for the least-squares slopes.
    const double cbar = (f - 1) / 2.0;
    double sxx = 0.0;
    for (int i = 0; i < f; ++i) sxx += (i - cbar) * (i - cbar);

    for (int g = 0; g < ls.t; ++g) {
        int lo, hi;
        group_range(g, &lo, &hi);
        const int nt = hi - lo;
        const double tbar = (nt - 1) / 2.0;
        double stt = 0.0;
        for (int i = 0; i < nt; ++i) stt += (i - tbar) * (i - tbar);
        const double block = static_cast<double>(nt) * f * f;

        for (int yy = 0; yy < ls.h; ++yy) {
            for (int xx = 0; xx < ls.w; ++xx) {
                for (int c = 0; c < vs.c; ++c) {
                    double sum = 0.0, sx = 0.0, sy = 0.0, st = 0.0;
                    for (int tt = lo; tt < hi; ++tt) {
                        for (int dy = 0; dy < f; ++dy) {
                            for (int dx = 0; dx < f; ++dx) {
                                const double v = clip.frames.at(tt, yy * f + dy, xx * f + dx, c);
                                sum += v;
                                sx += (dx - cbar) * v;
                                sy += (dy - cbar) * v;
                                st += (tt - lo - tbar) * v;
                            }
                        }
                    }
                    const double denom_x = static_cast<double>(nt) * f * sxx;
                    const double denom_t = static_cast<double>(f) * f * stt;
                    double moments[4];
                    moments[0] = sum / block;
                    moments[1] = denom_x > 0.0 ? sx / denom_x : 0.0;
                    moments[2] = denom_x > 0.0 ? sy / denom_x : 0.0;
                    moments[3] = denom_t > 0.0 ? st / denom_t : 0.0;
                    for (int m = 0; m < cfg.channel_expand; ++m) {
                        latent.at(g, yy, xx, c * cfg.channel_expand + m) = moments[m];
                    }
                }
            }
        }
    }
    return latent;
}

VideoClip decode(const LatentTensor& latent, const CodecConfig& cfg) {
    cfg.validate();
    const Shape ls = latent.shape();
    if (ls.t < 1) throw std::invalid_argument("decode: empty latent");
    if (ls.c % cfg.channel_expand != 0) {
        throw std::invalid_argument("decode: channel count inconsistent with channel_expand");
    }
    const int f = cfg.spatial_factor;
    Shape vs{1 + 8 * (ls.t - 1), ls.h * f, ls.w * f, ls.c / cfg.channel_expand};
    LatentTensor video(vs);
    const double cbar = (f - 1) / 2.0;

    for (int g = 0; g < ls.t; ++g) {
        int lo, hi;
        group_range(g, &lo, &hi);
        const int nt = hi - lo;
        const double tbar = (nt - 1) / 2.0;
        for (int yy = 0; yy < ls.h; ++yy) {
            for (int xx = 0; xx < ls.w; ++xx) {
                for (int c = 0; c < vs.c; ++c) {
                    double moments[4] = {0.0, 0.0, 0.0, 0.0};
                    for (int m = 0; m < cfg.channel_expand; ++m) {
                        moments[m] = latent.at(g, yy, xx, c * cfg.channel_expand + m);
                    }
                    for (int tt = lo; tt < hi; ++tt) {
                        for (int dy = 0; dy < f; ++dy) {
                            for (int dx = 0; dx < f; ++dx) {
                                // zero-mean bases keep the block mean exact
                                video.at(tt, yy * f + dy, xx * f + dx, c) =
                                    moments[0] + moments[1] * (dx - cbar) +
                                    moments[2] * (dy - cbar) + moments[3] * (tt - lo - tbar);
                            }
                        }
                    }
                }
            }
        }
    }
    return VideoClip(std::move(video), cfg);
}

namespace {

// Separable Gaussian blur with clamped borders.
LatentTensor gaussian_blur(const LatentTensor& x, double sigma) {
    const Shape s = x.shape();
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        norm += k[i + radius];
    }
    for (double& v : k) v /= norm;

    auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    LatentTensor tmp(s), out(s);
    for (int t = 0; t < s.t; ++t) {
        for (int y = 0; y < s.h; ++y) {
            for (int xx = 0; xx < s.w; ++xx) {
                for (int c = 0; c < s.c; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        acc += k[i + radius] * x.at(t, y, clamp(xx + i, s.w), c);
                    }
                    tmp.at(t, y, xx, c) = acc;
                }
            }
        }
        for (int y = 0; y < s.h; ++y) {
            for (int xx = 0; xx < s.w; ++xx) {
                for (int c = 0; c < s.c; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        acc += k[i + radius] * tmp.at(t, clamp(y + i, s.h), xx, c);
                    }
                    out.at(t, y, xx, c) = acc;
                }
            }
        }
    }
    return out;
}

double cubic_weight(double t) {
    // Catmull-Rom (a = -0.5)
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

}  // namespace

VideoClip degrade(const VideoClip& clip, double strength, Rng& rng) {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw std::invalid_argument("degrade: strength must lie in [0, 1]");
    }
    if (strength == 0.0) return clip;
    const Shape s = clip.frames.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("degrade: spatial extents must be even");
    }

    LatentTensor blurred = gaussian_blur(clip.frames, 0.5 + 1.5 * strength);

    // 2x2 box downsample.
    Shape ds{s.t, s.h / 2, s.w / 2, s.c};
    LatentTensor down(ds);
    for (int t = 0; t < s.t; ++t) {
        for (int y = 0; y < ds.h; ++y) {
            for (int x = 0; x < ds.w; ++x) {
                for (int c = 0; c < s.c; ++c) {
                    down.at(t, y, x, c) =
                        0.25 * (blurred.at(t, 2 * y, 2 * x, c) + blurred.at(t, 2 * y, 2 * x + 1, c) +
                                blurred.at(t, 2 * y + 1, 2 * x, c) +
                                blurred.at(t, 2 * y + 1, 2 * x + 1, c));
                }
            }
        }
    }

    // Bicubic upsample back to the original size.
    auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    LatentTensor up(s);
    for (int t = 0; t < s.t; ++t) {
        for (int y = 0; y < s.h; ++y) {
            const double sy = (y + 0.5) / 2.0 - 0.5;
            const int y0 = static_cast<int>(std::floor(sy));
            for (int x = 0; x < s.w; ++x) {
                const double sx = (x + 0.5) / 2.0 - 0.5;
                const int x0 = static_cast<int>(std::floor(sx));
                for (int c = 0; c < s.c; ++c) {
                    double acc = 0.0, wsum = 0.0;
                    for (int j = -1; j <= 2; ++j) {
                        const double wy = cubic_weight(sy - (y0 + j));
                        for (int i = -1; i <= 2; ++i) {
                            const double wx = cubic_weight(sx - (x0 + i));
                            acc += wy * wx * down.at(t, clamp(y0 + j, ds.h), clamp(x0 + i, ds.w), c);
                            wsum += wy * wx;
                        }
                    }
                    up.at(t, y, x, c) = acc / wsum;
                }
            }
        }
    }

    const double noise_std = 0.1 * strength;
    for (std::int64_t i = 0; i < up.size(); ++i) up[i] += noise_std * rng.normal();
    return VideoClip(std::move(up), CodecConfig{});
}

}  // namespace fewstep
