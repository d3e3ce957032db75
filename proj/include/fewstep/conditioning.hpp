#ifndef FEWSTEP_CONDITIONING_HPP
#define FEWSTEP_CONDITIONING_HPP

#include <optional>

#include "fewstep/codec.hpp"
#include "fewstep/rng.hpp"
#include "fewstep/tensor.hpp"

namespace fewstep {

// Statistics of the hidden state the condition is normalized against.
struct HiddenStats {
    double mean = 0.0;
    double std = 1.0;

    void validate() const;
};

// Floor applied to a condition's own standard deviation before dividing.
inline constexpr double kStdFloor = 1e-8;

// Rescale cond to match the target statistics:
// (cond - mean(cond)) / std(cond) * stats.std + stats.mean.
// A constant cond hits the 1e-8 std floor; *degenerate (if given) reports it.
LatentTensor cross_normalize(const LatentTensor& cond, const HiddenStats& stats,
                             bool* degenerate = nullptr);

// Whether the additive injection divides or multiplies by sqrt(2). Dividing
// keeps unit variance for independent unit-variance inputs; the multiply is
// the literal reading of "scale by sqrt(2)" kept for comparison.
enum class InjectScaling { divide_sqrt2, multiply_sqrt2 };

LatentTensor inject(const LatentTensor& hidden, const LatentTensor& cond_normalized,
                    InjectScaling scaling = InjectScaling::divide_sqrt2);

enum class CondTask { image_sr, video_sr };

struct ConditionPacket {
    LatentTensor cond_latent;
    CondTask task = CondTask::image_sr;
    bool dropped = false;
};

// Where video_sr gets its full-quality first frame: the ground-truth frame
// during training (teacher forcing) or a provided restored frame at
// inference.
enum class FirstFrameSource { ground_truth, predicted };

// image_sr: encode the degraded first frame alone. video_sr: position 0 is
// the encoded full-quality first frame, positions >= 1 are the video latents
// of the degraded clip. predicted_first_frame is a 1-frame clip tensor;
// required when source = predicted.
ConditionPacket assemble_condition(const VideoClip& clip, CondTask task, const CodecConfig& cfg,
                                   double degrade_strength, Rng& rng,
                                   FirstFrameSource source = FirstFrameSource::ground_truth,
                                   const std::optional<LatentTensor>& predicted_first_frame =
                                       std::nullopt);

// Variance-preserving noising of the condition latent:
// cond <- sqrt(alpha_bar(level)) * cond + sqrt(1 - alpha_bar(level)) * eps
// over a 1000-step cosine alpha-bar schedule; level 0 is the identity.
ConditionPacket noise_augment(const ConditionPacket& packet, int level, Rng& rng);

// Cumulative cosine schedule value at step `level` in [0, 1000].
double cosine_alpha_bar(int level);

// With probability p, replace the packet by the all-zeros dropped sentinel.
ConditionPacket maybe_drop(const ConditionPacket& packet, double p, Rng& rng);

}  // namespace fewstep

#endif
