#include "fewstep/data.hpp"

#include <cmath>
#include <stdexcept>

namespace fewstep {

GaussianMixture2D::GaussianMixture2D(std::vector<Eigen::Vector2d> means, double std_dev)
    : means_(std::move(means)), std_(std_dev) {
    if (means_.empty()) throw std::invalid_argument("GaussianMixture2D: no components");
    if (!(std_ > 0.0)) throw std::invalid_argument("GaussianMixture2D: std must be positive");
}

GaussianMixture2D GaussianMixture2D::two_modes() {
    return GaussianMixture2D({Eigen::Vector2d(1.2, 1.2), Eigen::Vector2d(-1.2, -1.2)}, 0.3);
}

Eigen::Vector2d GaussianMixture2D::draw_data(Rng& rng) const {
    const std::size_t comp = rng.uniform_int(means_.size());
    return means_[comp] + std_ * Eigen::Vector2d(rng.normal(), rng.normal());
}

std::pair<LatentTensor, LatentTensor> GaussianMixture2D::draw(Rng& rng) const {
    const Eigen::Vector2d x0 = draw_data(rng);
    const Shape shape{1, 1, 1, 2};
    LatentTensor data(shape), noise(shape);
    data[0] = x0[0];
    data[1] = x0[1];
    noise[0] = rng.normal();
    noise[1] = rng.normal();
    return {std::move(data), std::move(noise)};
}

VideoClip synth_moving_clip(int frames, int height, int width, int channels, Rng& rng) {
    Shape s{frames, height, width, channels};
    LatentTensor clip(s);
    CodecConfig cfg;  // only used to validate the frame-count congruence
    const double theta = 2.0 * M_PI * rng.uniform();
    const double freq = (1.0 + 2.0 * rng.uniform()) / width;
    const double kx = std::cos(theta) * freq;
    const double ky = std::sin(theta) * freq;
    const double phase = 2.0 * M_PI * rng.uniform();
    const double speed = 0.5 + rng.uniform();
    for (int c = 0; c < channels; ++c) {
        const double cphase = phase + c * 1.7;
        for (int t = 0; t < frames; ++t) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    clip.at(t, y, x, c) =
                        std::sin(2.0 * M_PI * (kx * x + ky * y) + cphase + speed * t);
                }
            }
        }
    }
    return VideoClip(std::move(clip), cfg);
}

}  // namespace fewstep
