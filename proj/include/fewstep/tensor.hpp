#ifndef FEWSTEP_TENSOR_HPP
#define FEWSTEP_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fewstep {

// Dense 4-D shape: time x height x width x channels.
struct Shape {
    int t = 0;
    int h = 0;
    int w = 0;
    int c = 0;

    std::int64_t total() const {
        return static_cast<std::int64_t>(t) * h * w * c;
    }
    bool operator==(const Shape& o) const {
        return t == o.t && h == o.h && w == o.w && c == o.c;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

// Dense row-major double tensor, channels fastest. The universal value type:
// video clips, latents, condition packets and toy samples all live here.
class LatentTensor {
public:
    LatentTensor() = default;
    explicit LatentTensor(const Shape& shape, double fill = 0.0);

    static LatentTensor zeros(const Shape& shape) { return LatentTensor(shape); }
    static LatentTensor full(const Shape& shape, double v) { return LatentTensor(shape, v); }

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double& at(int t, int y, int x, int c) { return data_[index(t, y, x, c)]; }
    double at(int t, int y, int x, int c) const { return data_[index(t, y, x, c)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool all_finite() const;
    double mean() const;
    double variance() const;  // population variance
    double max_abs() const;

    // Frames [t0, t1) as a new clip-like tensor.
    LatentTensor time_slice(int t0, int t1) const;
    // Single frame as a 1-frame tensor.
    LatentTensor frame(int t) const { return time_slice(t, t + 1); }
    void set_time_slice(int t0, const LatentTensor& src);

    // Spatial crop over all times/channels.
    LatentTensor crop(int y0, int x0, int h, int w) const;
    void paste(int y0, int x0, const LatentTensor& src);

private:
    std::int64_t index(int t, int y, int x, int c) const;

    Shape shape_;
    std::vector<double> data_;
};

// Elementwise arithmetic; shapes must match (checked).
LatentTensor operator+(const LatentTensor& a, const LatentTensor& b);
LatentTensor operator-(const LatentTensor& a, const LatentTensor& b);
LatentTensor operator*(double s, const LatentTensor& a);
LatentTensor& operator+=(LatentTensor& a, const LatentTensor& b);
// a + s*b in place.
void axpy(LatentTensor& a, double s, const LatentTensor& b);

void require_same_shape(const LatentTensor& a, const LatentTensor& b, const char* where);

}  // namespace fewstep

#endif
