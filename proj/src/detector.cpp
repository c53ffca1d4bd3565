#include "ergo/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ergo/parallel.hpp"

namespace ergo {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Pose2 make_pose(double x, double y, double theta) {
    double t = std::fmod(theta, 2.0 * kPi);
    if (t <= -kPi) t += 2.0 * kPi;
    if (t > kPi) t -= 2.0 * kPi;
    return Pose2{x, y, t};
}

ObservedPoint propagate_covariance_2d(const Pose2& pose, const Matrix& pose_cov,
                                      const Vector& local_point, const Matrix& local_cov) {
    if (local_point.size() != 2 || local_cov.rows != 2 || pose_cov.rows != 3)
        raise(ErrorCode::ValidationError, "propagate_covariance_2d is strictly 2D");
    // reject malformed covariance early
    try {
        (void)cholesky_psd(pose_cov);
        (void)cholesky_psd(local_cov);
    } catch (const Error&) {
        raise(ErrorCode::NotPSD, "input covariance is not positive semidefinite");
    }
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    const double px = local_point[0];
    const double py = local_point[1];

    Vector global{c * px - s * py + pose.x, s * px + c * py + pose.y};

    // dh/dX for h = R(theta) p + (x, y)
    Matrix J(2, 3, 0.0);
    J(0, 0) = 1.0;
    J(0, 2) = -px * s - py * c;
    J(1, 1) = 1.0;
    J(1, 2) = px * c - py * s;

    Matrix R(2, 2, 0.0);
    R(0, 0) = c;
    R(0, 1) = -s;
    R(1, 0) = s;
    R(1, 1) = c;

    Matrix cov = J * pose_cov * transpose(J) + R * local_cov * transpose(R);
    // symmetrize away roundoff
    for (int i = 0; i < 2; ++i)
        for (int j = i + 1; j < 2; ++j) {
            const double m = 0.5 * (cov(i, j) + cov(j, i));
            cov(i, j) = cov(j, i) = m;
        }
    return ObservedPoint{std::move(global), std::move(cov)};
}

HalfspaceProjection halfspace_projection(const ObservedPoint& point, const Vector& plane_point,
                                         const Vector& normal, HalfspaceSide side) {
    const int d = static_cast<int>(point.position.size());
    if (static_cast<int>(plane_point.size()) != d || static_cast<int>(normal.size()) != d)
        raise(ErrorCode::ValidationError, "halfspace_projection dimension mismatch");

    const double b = dot(normal, plane_point);
    const double np = dot(normal, point.position);
    const bool inside = side == HalfspaceSide::Inside ? (np <= b) : (np >= b);
    if (inside) return HalfspaceProjection{point.position, 0.0};

    Matrix sigma = point.covariance;
    for (int i = 0; i < d; ++i) sigma(i, i) += tol::cov_regularize;
    Matrix sigma_inv;
    try {
        sigma_inv = inverse(sigma);
    } catch (const Error&) {
        raise(ErrorCode::SingularCovariance, "covariance not invertible after regularization");
    }

    // KKT system of the plane-constrained Mahalanobis minimization
    Matrix kkt(d + 1, d + 1, 0.0);
    Vector rhs(d + 1, 0.0);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) kkt(i, j) = -2.0 * sigma_inv(i, j);
        kkt(i, d) = normal[i];
        kkt(d, i) = normal[i];
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += sigma_inv(i, j) * point.position[j];
        rhs[i] = -2.0 * s;
    }
    rhs[d] = b;
    Vector sol;
    try {
        sol = solve_linear(kkt, rhs);
    } catch (const Error&) {
        raise(ErrorCode::SingularCovariance, "KKT system is singular");
    }
    Vector mu(sol.begin(), sol.begin() + d);
    Vector diff(d);
    for (int i = 0; i < d; ++i) diff[i] = point.position[i] - mu[i];
    const double dsq = dot(diff, mul(sigma_inv, diff));
    return HalfspaceProjection{std::move(mu), std::max(dsq, 0.0)};
}

std::pair<double, double> hypothesis_likelihoods(double d0_sum, double d1_sum, int k,
                                                 int dimension) {
    if (k < 1 || (dimension != 2 && dimension != 3))
        raise(ErrorCode::ValidationError, "bad neighborhood size or dimension");
    const int dof = dimension * k;
    return {chi2_survival(d0_sum, dof), chi2_survival(d1_sum, dof)};
}

ReferencePoint bayes_update(const ReferencePoint& ref, double likelihood_h0,
                            double likelihood_h1, double smoothing_c) {
    ReferencePoint out = ref;
    const double a0 = (likelihood_h0 + smoothing_c) * ref.belief_h0;
    const double a1 = (likelihood_h1 + smoothing_c) * ref.belief_h1;
    const double s = a0 + a1;
    const double p0 = s > 0.0 ? a0 / s : ref.belief_h0;
    if (p0 < tol::belief_clamp) {
        out.belief_h0 = tol::belief_clamp;
        out.belief_h1 = 1.0 - tol::belief_clamp;
    } else if (p0 > 1.0 - tol::belief_clamp) {
        out.belief_h0 = 1.0 - tol::belief_clamp;
        out.belief_h1 = tol::belief_clamp;
    } else {
        out.belief_h0 = p0;
        out.belief_h1 = 1.0 - p0;
    }
    return out;
}

namespace {

double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void process_batch_impl(std::vector<ReferencePoint>& refs,
                        const std::vector<ObservedPoint>& observations,
                        const DetectorConfig& config, int jobs) {
    const int k = config.neighborhood_k;
    if (static_cast<int>(observations.size()) < k)
        raise(ErrorCode::ValidationError, "batch smaller than the neighborhood size");
    if (refs.empty()) raise(ErrorCode::EmptyStructure, "no reference points");

    const std::int64_t n_obs = static_cast<std::int64_t>(observations.size());
    const std::int64_t n_ref = static_cast<std::int64_t>(refs.size());

    // associate every observation with its nearest reference point
    std::vector<int> nearest_ref(n_obs);
    parallel_for(n_obs, jobs, [&](std::int64_t o) {
        int best = 0;
        double best_d = sq_dist(observations[o].position, refs[0].position);
        for (std::int64_t r = 1; r < n_ref; ++r) {
            const double d = sq_dist(observations[o].position, refs[r].position);
            if (d < best_d) {  // ties stay with the lower reference index
                best_d = d;
                best = static_cast<int>(r);
            }
        }
        nearest_ref[o] = best;
    });
    std::vector<char> touched(n_ref, 0);
    for (std::int64_t o = 0; o < n_obs; ++o) touched[nearest_ref[o]] = 1;

    parallel_for(n_ref, jobs, [&](std::int64_t r) {
        if (!touched[r]) return;
        ReferencePoint& ref = refs[r];

        // k nearest observations to this reference point
        std::vector<std::pair<double, int>> order(n_obs);
        for (std::int64_t o = 0; o < n_obs; ++o)
            order[o] = {sq_dist(observations[o].position, ref.position), static_cast<int>(o)};
        std::nth_element(order.begin(), order.begin() + (k - 1), order.end());
        std::sort(order.begin(), order.begin() + k);

        const Vector offset_plane = [&] {
            Vector p = ref.position;
            for (size_t i = 0; i < p.size(); ++i) p[i] += config.epsilon * ref.normal[i];
            return p;
        }();

        double d0 = 0.0, d1 = 0.0;
        for (int t = 0; t < k; ++t) {
            const ObservedPoint& obs = observations[order[t].second];
            d0 += halfspace_projection(obs, ref.position, ref.normal, HalfspaceSide::Inside)
                      .d_squared;
            d1 += halfspace_projection(obs, offset_plane, ref.normal, HalfspaceSide::Outside)
                      .d_squared;
        }
        const auto [l0, l1] = hypothesis_likelihoods(d0, d1, k, config.dimension);
        ref = bayes_update(ref, l0, l1, config.smoothing_c);
    });
}

}  // namespace

void process_observation_batch(std::vector<ReferencePoint>& refs,
                               const std::vector<ObservedPoint>& observations,
                               const DetectorConfig& config, int jobs) {
    process_batch_impl(refs, observations, config, jobs);
}

namespace reference {

void process_observation_batch_serial(std::vector<ReferencePoint>& refs,
                                      const std::vector<ObservedPoint>& observations,
                                      const DetectorConfig& config) {
    process_batch_impl(refs, observations, config, 1);
}

}  // namespace reference

double region_entropy(const std::vector<ReferencePoint>& refs) {
    if (refs.empty()) raise(ErrorCode::EmptyStructure, "region has no reference points");
    double h = 0.0;
    for (const ReferencePoint& r : refs) {
        const double p0 = std::clamp(r.belief_h0, tol::belief_clamp, 1.0 - tol::belief_clamp);
        const double p1 = 1.0 - p0;
        h = std::max(h, -p0 * std::log(p0) - p1 * std::log(p1));
    }
    return h;
}

// ---------------------------------------------------------------------------
// record files
// ---------------------------------------------------------------------------

namespace {

std::vector<Vector> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ParseError, "cannot open " + path);
    std::vector<Vector> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Vector row;
        double v;
        while (ss >> v) row.push_back(v);
        if (!ss.eof() && ss.fail())
            raise(ErrorCode::ParseError, "bad number in " + path + ": " + line);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<ReferencePoint> load_reference_points(const std::string& path, int dimension) {
    const size_t d = static_cast<size_t>(dimension);
    std::vector<ReferencePoint> refs;
    for (const Vector& row : read_rows(path)) {
        if (row.size() != 2 * d && row.size() != 2 * d + 1)
            raise(ErrorCode::ParseError, "reference record needs " + std::to_string(2 * d) +
                                             " or " + std::to_string(2 * d + 1) + " fields");
        ReferencePoint r;
        r.position.assign(row.begin(), row.begin() + d);
        r.normal.assign(row.begin() + d, row.begin() + 2 * d);
        const double nn = norm2(r.normal);
        if (std::fabs(nn - 1.0) > 1e-6)
            raise(ErrorCode::ValidationError, "reference normal is not unit length");
        for (double& x : r.normal) x /= nn;
        const double b1 = row.size() == 2 * d + 1 ? row.back() : 0.5;
        if (!(b1 > 0.0 && b1 < 1.0))
            raise(ErrorCode::ValidationError, "belief_h1 must lie in (0,1)");
        r.belief_h1 = b1;
        r.belief_h0 = 1.0 - b1;
        refs.push_back(std::move(r));
    }
    return refs;
}

void save_reference_points(const std::string& path, const std::vector<ReferencePoint>& refs) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::ValidationError, "cannot write " + path);
    for (const ReferencePoint& r : refs) {
        for (double v : r.position) out << fmt(v) << ' ';
        for (double v : r.normal) out << fmt(v) << ' ';
        out << fmt(r.belief_h1) << '\n';
    }
}

std::vector<ObservedPoint> load_observations(const std::string& path, int dimension) {
    const size_t d = static_cast<size_t>(dimension);
    std::vector<ObservedPoint> obs;
    for (const Vector& row : read_rows(path)) {
        if (row.size() != d + d * d)
            raise(ErrorCode::ParseError,
                  "observation record needs " + std::to_string(d + d * d) + " fields");
        ObservedPoint o;
        o.position.assign(row.begin(), row.begin() + d);
        o.covariance = Matrix(dimension, dimension);
        for (size_t i = 0; i < d * d; ++i) o.covariance.a[i] = row[d + i];
        for (int i = 0; i < dimension; ++i)
            for (int j = i + 1; j < dimension; ++j)
                if (std::fabs(o.covariance(i, j) - o.covariance(j, i)) > 1e-10)
                    raise(ErrorCode::ValidationError, "observation covariance not symmetric");
        obs.push_back(std::move(o));
    }
    return obs;
}

void save_observations(const std::string& path, const std::vector<ObservedPoint>& obs) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::ValidationError, "cannot write " + path);
    for (const ObservedPoint& o : obs) {
        for (double v : o.position) out << fmt(v) << ' ';
        for (size_t i = 0; i < o.covariance.a.size(); ++i) {
            out << fmt(o.covariance.a[i]);
            out << (i + 1 == o.covariance.a.size() ? '\n' : ' ');
        }
    }
}

}  // namespace ergo
