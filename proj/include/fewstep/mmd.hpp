#ifndef FEWSTEP_MMD_HPP
#define FEWSTEP_MMD_HPP

#include <Eigen/Dense>

namespace fewstep {

// Median pairwise distance of (a deterministic subset of) the columns;
// the shared bandwidth for every comparison against one reference set.
double median_heuristic_bandwidth(const Eigen::MatrixXd& points, int max_points = 2048);

// Biased (V-statistic) Gaussian-kernel MMD between column sets, reported on
// the distance scale: sqrt(max(0, mean k_xx + mean k_yy - 2 mean k_xy)) with
// k(a, b) = exp(-|a - b|^2 / (2 h^2)).
double mmd_biased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth);

}  // namespace fewstep

#endif
