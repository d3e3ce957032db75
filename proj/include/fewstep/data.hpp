#ifndef FEWSTEP_DATA_HPP
#define FEWSTEP_DATA_HPP

#include <Eigen/Dense>
#include <vector>

#include "fewstep/codec.hpp"
#include "fewstep/rng.hpp"
#include "fewstep/shortcut.hpp"
#include "fewstep/tensor.hpp"

namespace fewstep {

// Equal-weight mixture of isotropic 2-D Gaussians; draw() pairs a data point
// with a standard-normal noise point.
class GaussianMixture2D final : public PairSource {
public:
    GaussianMixture2D(std::vector<Eigen::Vector2d> means, double std_dev);

    // The toy target used by the sampling experiments: two components at
    // +/- (1.2, 1.2), std 0.3.
    static GaussianMixture2D two_modes();

    std::pair<LatentTensor, LatentTensor> draw(Rng& rng) const override;

    // One data draw as a flat 2-vector (for metric populations).
    Eigen::Vector2d draw_data(Rng& rng) const;

    const std::vector<Eigen::Vector2d>& means() const { return means_; }
    double std_dev() const { return std_; }

private:
    std::vector<Eigen::Vector2d> means_;
    double std_;
};

// Smoothly moving 2-D sinusoid clip: per-clip random orientation, frequency
// and drift, deterministic given the rng. Used as toy "video" content.
VideoClip synth_moving_clip(int frames, int height, int width, int channels, Rng& rng);

}  // namespace fewstep

#endif
