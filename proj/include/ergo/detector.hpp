#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ergo/linalg.hpp"

namespace ergo {

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // normalized to (-pi, pi]
};

Pose2 make_pose(double x, double y, double theta);

struct ObservedPoint {
    Vector position;    // 2D or 3D
    Matrix covariance;  // matching dimension, PSD
};

struct ReferencePoint {
    Vector position;
    Vector normal;  // unit length
    double belief_h0 = 0.5;
    double belief_h1 = 0.5;
};

struct DetectorConfig {
    double epsilon = 20.0;    // allowable-deviation offset of the H1 plane
    double smoothing_c = 0.5; // keeps beliefs from collapsing on extreme evidence
    int neighborhood_k = 5;
    int dimension = 3;
};

// Transforms a locally observed 2D point into the global frame and propagates
// pose and mapping uncertainty through the rigid-transform Jacobians.
ObservedPoint propagate_covariance_2d(const Pose2& pose, const Matrix& pose_cov,
                                      const Vector& local_point, const Matrix& local_cov);

enum class HalfspaceSide { Inside, Outside };  // n.x <= n.p0  /  n.x >= n.p0

struct HalfspaceProjection {
    Vector mu;         // closest point of the halfspace in the Mahalanobis metric
    double d_squared;  // 0 when the point already lies inside
};

// Smallest squared Mahalanobis distance from a Gaussian point to a halfspace.
// Outside points solve the KKT system of the plane-constrained minimization.
HalfspaceProjection halfspace_projection(const ObservedPoint& point, const Vector& plane_point,
                                         const Vector& normal, HalfspaceSide side);

// P(chi^2_{d k} > sum D) for both hypothesis distance sums.
std::pair<double, double> hypothesis_likelihoods(double d0_sum, double d1_sum, int k,
                                                 int dimension);

// Recursive smoothed Bayes update; posterior beliefs are renormalized and
// clamped away from 0/1.
ReferencePoint bayes_update(const ReferencePoint& ref, double likelihood_h0,
                            double likelihood_h1, double smoothing_c);

// One observation batch: each reference point that is the nearest reference
// of at least one observation gathers its k nearest observations, sums the
// halfspace distances for both hypotheses and applies one Bayes update.
// Reference points update independently, so the parallel and serial paths are
// bit-identical.
void process_observation_batch(std::vector<ReferencePoint>& refs,
                               const std::vector<ObservedPoint>& observations,
                               const DetectorConfig& config, int jobs = 1);

namespace reference {
// Straight-line serial implementation kept for testing and benchmarking.
void process_observation_batch_serial(std::vector<ReferencePoint>& refs,
                                      const std::vector<ObservedPoint>& observations,
                                      const DetectorConfig& config);
}  // namespace reference

// max over reference points of the binary hypothesis entropy, in [0, ln 2].
double region_entropy(const std::vector<ReferencePoint>& refs);

// --- newline-delimited record files ------------------------------------------
// reference points: x y z nx ny nz [belief_h1]   (2D drops z and nz)
// observations:     x y z c11 c12 ... c33        (row-major covariance)

std::vector<ReferencePoint> load_reference_points(const std::string& path, int dimension);
void save_reference_points(const std::string& path, const std::vector<ReferencePoint>& refs);
std::vector<ObservedPoint> load_observations(const std::string& path, int dimension);
void save_observations(const std::string& path, const std::vector<ObservedPoint>& obs);

}  // namespace ergo
