#include "fewstep/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fewstep {

std::string Shape::str() const {
    std::ostringstream os;
    os << t << "x" << h << "x" << w << "x" << c;
    return os.str();
}

LatentTensor::LatentTensor(const Shape& shape, double fill) : shape_(shape) {
    if (shape.t < 0 || shape.h < 0 || shape.w < 0 || shape.c < 0) {
        throw std::invalid_argument("LatentTensor: negative extent in shape " + shape.str());
    }
    data_.assign(static_cast<std::size_t>(shape.total()), fill);
}

std::int64_t LatentTensor::index(int t, int y, int x, int c) const {
    return ((static_cast<std::int64_t>(t) * shape_.h + y) * shape_.w + x) * shape_.c + c;
}

bool LatentTensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double LatentTensor::mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

double LatentTensor::variance() const {
    if (data_.empty()) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : data_) s += (v - m) * (v - m);
    return s / static_cast<double>(data_.size());
}

double LatentTensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

LatentTensor LatentTensor::time_slice(int t0, int t1) const {
    if (t0 < 0 || t1 > shape_.t || t0 >= t1) {
        throw std::invalid_argument("time_slice: bad range");
    }
    LatentTensor out(Shape{t1 - t0, shape_.h, shape_.w, shape_.c});
    const std::int64_t frame = static_cast<std::int64_t>(shape_.h) * shape_.w * shape_.c;
    std::copy(data_.begin() + t0 * frame, data_.begin() + t1 * frame, out.data_.begin());
    return out;
}

void LatentTensor::set_time_slice(int t0, const LatentTensor& src) {
    if (src.shape_.h != shape_.h || src.shape_.w != shape_.w || src.shape_.c != shape_.c ||
        t0 < 0 || t0 + src.shape_.t > shape_.t) {
        throw std::invalid_argument("set_time_slice: shape mismatch");
    }
    const std::int64_t frame = static_cast<std::int64_t>(shape_.h) * shape_.w * shape_.c;
    std::copy(src.data_.begin(), src.data_.end(), data_.begin() + t0 * frame);
}

LatentTensor LatentTensor::crop(int y0, int x0, int h, int w) const {
    if (y0 < 0 || x0 < 0 || y0 + h > shape_.h || x0 + w > shape_.w || h <= 0 || w <= 0) {
        throw std::invalid_argument("crop: rectangle outside tensor");
    }
    LatentTensor out(Shape{shape_.t, h, w, shape_.c});
    for (int t = 0; t < shape_.t; ++t)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < shape_.c; ++c)
                    out.at(t, y, x, c) = at(t, y0 + y, x0 + x, c);
    return out;
}

void LatentTensor::paste(int y0, int x0, const LatentTensor& src) {
    if (src.shape_.t != shape_.t || src.shape_.c != shape_.c ||
        y0 < 0 || x0 < 0 || y0 + src.shape_.h > shape_.h || x0 + src.shape_.w > shape_.w) {
        throw std::invalid_argument("paste: rectangle outside tensor");
    }
    for (int t = 0; t < shape_.t; ++t)
        for (int y = 0; y < src.shape_.h; ++y)
            for (int x = 0; x < src.shape_.w; ++x)
                for (int c = 0; c < shape_.c; ++c)
                    at(t, y0 + y, x0 + x, c) = src.at(t, y, x, c);
}

void require_same_shape(const LatentTensor& a, const LatentTensor& b, const char* where) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    }
}

LatentTensor operator+(const LatentTensor& a, const LatentTensor& b) {
    require_same_shape(a, b, "operator+");
    LatentTensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

LatentTensor operator-(const LatentTensor& a, const LatentTensor& b) {
    require_same_shape(a, b, "operator-");
    LatentTensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

LatentTensor operator*(double s, const LatentTensor& a) {
    LatentTensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

LatentTensor& operator+=(LatentTensor& a, const LatentTensor& b) {
    require_same_shape(a, b, "operator+=");
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

void axpy(LatentTensor& a, double s, const LatentTensor& b) {
    require_same_shape(a, b, "axpy");
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

}  // namespace fewstep
