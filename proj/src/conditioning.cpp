#include "fewstep/conditioning.hpp"

#include <cmath>
#include <stdexcept>

namespace fewstep {

void HiddenStats::validate() const {
    if (!(std > 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
        throw std::invalid_argument("HiddenStats: std must be positive and finite");
    }
}

LatentTensor cross_normalize(const LatentTensor& cond, const HiddenStats& stats,
                             bool* degenerate) {
    stats.validate();
    if (cond.size() == 0) throw std::invalid_argument("cross_normalize: empty tensor");
    const double mu = cond.mean();
    const double sd_raw = std::sqrt(cond.variance());
    const bool floored = !(sd_raw > kStdFloor);
    if (degenerate != nullptr) *degenerate = floored;
    const double sd = floored ? kStdFloor : sd_raw;

    LatentTensor out = cond;
    const double scale = stats.std / sd;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = (out[i] - mu) * scale + stats.mean;
    }
    return out;
}

LatentTensor inject(const LatentTensor& hidden, const LatentTensor& cond_normalized,
                    InjectScaling scaling) {
    require_same_shape(hidden, cond_normalized, "inject");
    const double gamma =
        scaling == InjectScaling::divide_sqrt2 ? 1.0 / std::sqrt(2.0) : std::sqrt(2.0);
    LatentTensor out = hidden;
    out += cond_normalized;
    return gamma * out;
}

ConditionPacket assemble_condition(const VideoClip& clip, CondTask task, const CodecConfig& cfg,
                                   double degrade_strength, Rng& rng, FirstFrameSource source,
                                   const std::optional<LatentTensor>& predicted_first_frame) {
    cfg.validate();
    ConditionPacket packet;
    packet.task = task;
    packet.dropped = false;

    if (task == CondTask::image_sr) {
        VideoClip first(clip.frames.frame(0), cfg);
        packet.cond_latent = encode(degrade(first, degrade_strength, rng), cfg);
        return packet;
    }

    // video_sr: full-quality first frame at position 0, degraded video
    // latents after it.
    LatentTensor first_frame;
    if (source == FirstFrameSource::ground_truth) {
        first_frame = clip.frames.frame(0);
    } else {
        if (!predicted_first_frame.has_value()) {
            throw std::invalid_argument(
                "assemble_condition: video_sr with predicted source needs a predicted first frame");
        }
        first_frame = *predicted_first_frame;
        if (first_frame.shape().t != 1) {
            throw std::invalid_argument("assemble_condition: predicted first frame must be 1 frame");
        }
    }
    LatentTensor clean = encode(VideoClip(first_frame, cfg), cfg);
    LatentTensor degraded = encode(degrade(clip, degrade_strength, rng), cfg);

    LatentTensor out = degraded;
    out.set_time_slice(0, clean);
    packet.cond_latent = std::move(out);
    return packet;
}

double cosine_alpha_bar(int level) {
    if (level < 0 || level > 1000) {
        throw std::invalid_argument("cosine_alpha_bar: level must lie in [0, 1000]");
    }
    const double s = 0.008;
    auto f = [s](double l) {
        const double v = std::cos((l / 1000.0 + s) / (1.0 + s) * M_PI / 2.0);
        return v * v;
    };
    return f(static_cast<double>(level)) / f(0.0);
}

ConditionPacket noise_augment(const ConditionPacket& packet, int level, Rng& rng) {
    if (level < 0 || level > 300) {
        throw std::invalid_argument("noise_augment: level must lie in [0, 300]");
    }
    if (level == 0 || packet.dropped) return packet;
    const double ab = cosine_alpha_bar(level);
    const double keep = std::sqrt(ab);
    const double mix = std::sqrt(1.0 - ab);
    ConditionPacket out = packet;
    for (std::int64_t i = 0; i < out.cond_latent.size(); ++i) {
        out.cond_latent[i] = keep * out.cond_latent[i] + mix * rng.normal();
    }
    return out;
}

ConditionPacket maybe_drop(const ConditionPacket& packet, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("maybe_drop: p must lie in [0, 1]");
    if (rng.uniform() < p) {
        ConditionPacket out;
        out.task = packet.task;
        out.dropped = true;
        out.cond_latent = LatentTensor::zeros(packet.cond_latent.shape());
        return out;
    }
    return packet;
}

}  // namespace fewstep
