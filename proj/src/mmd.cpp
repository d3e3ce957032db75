#include "fewstep/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fewstep {

double median_heuristic_bandwidth(const Eigen::MatrixXd& points, int max_points) {
    const int n = std::min<int>(static_cast<int>(points.cols()), max_points);
    if (n < 2) throw std::invalid_argument("median_heuristic_bandwidth: need >= 2 points");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            dists.push_back((points.col(i) - points.col(j)).norm());
        }
    }
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
    const double h = dists[mid];
    if (!(h > 0.0)) throw std::runtime_error("median_heuristic_bandwidth: degenerate point set");
    return h;
}

namespace {

double mean_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double inv_two_h2) {
    // |a_i - b_j|^2 = |a_i|^2 + |b_j|^2 - 2 a_i . b_j, via one GEMM
    Eigen::VectorXd na = a.colwise().squaredNorm();
    Eigen::VectorXd nb = b.colwise().squaredNorm();
    Eigen::MatrixXd g = a.transpose() * b;
    double total = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            const double d2 = std::max(0.0, na[i] + nb[j] - 2.0 * g(i, j));
            total += std::exp(-d2 * inv_two_h2);
        }
    }
    return total / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

}  // namespace

double mmd_biased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
    if (x.rows() != y.rows()) throw std::invalid_argument("mmd_biased: dimension mismatch");
    if (x.cols() < 1 || y.cols() < 1) throw std::invalid_argument("mmd_biased: empty sample set");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_biased: bandwidth must be positive");
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    const double v =
        mean_kernel(x, x, inv) + mean_kernel(y, y, inv) - 2.0 * mean_kernel(x, y, inv);
    return std::sqrt(std::max(0.0, v));
}

}  // namespace fewstep
