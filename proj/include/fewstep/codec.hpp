#ifndef FEWSTEP_CODEC_HPP
#define FEWSTEP_CODEC_HPP

#include "fewstep/rng.hpp"
#include "fewstep/tensor.hpp"

namespace fewstep {

// Mock video latent codec. Frame 0 maps to latent frame 0 on its own; every
// following run of 8 frames collapses into one latent frame, so valid clips
// have F = 8k + 1 frames and produce k + 1 latent frames. Spatially each
// factor x factor block pools into one latent site. Both directions are
// linear maps.
struct CodecConfig {
    int spatial_factor = 4;
    int temporal_factor = 8;  // fixed by the frame-grouping contract
    // 1..4 latent channels per pixel channel: block mean, then least-squares
    // slopes along x, y, and time.
    int channel_expand = 4;

    void validate() const;
};

// Frames x height x width x channels with F congruent to 1 mod 8 enforced.
struct VideoClip {
    LatentTensor frames;

    VideoClip(LatentTensor data, const CodecConfig& cfg);
};

// Latent time extent for F input frames: 1 + (F - 1) / 8.
int latent_frames(int input_frames, const CodecConfig& cfg);

// Input pixels represented by one video-latent site: factor^2 * 8.
int pixels_per_latent(const CodecConfig& cfg);

Shape latent_shape(const Shape& video, const CodecConfig& cfg);

LatentTensor encode(const VideoClip& clip, const CodecConfig& cfg);

// First-order reconstruction from the pooled means and slopes; exact on the
// pooled block means by construction.
VideoClip decode(const LatentTensor& latent, const CodecConfig& cfg);

// Degradation stand-in for building low-quality conditioning inputs:
// Gaussian blur (width grows with strength), factor-2 subsample, bicubic
// upsample back, additive Gaussian noise (std grows with strength).
// strength = 0 is the identity.
VideoClip degrade(const VideoClip& clip, double strength, Rng& rng);

}  // namespace fewstep

#endif
