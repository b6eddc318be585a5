#include "multicam/pnp/pnp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <numeric>
#include <random>

#include "multicam/common/error.hpp"

namespace multicam {

namespace {

constexpr double kMaxLambda = 1e12;

void check_weights(std::span<const Correspondence> corrs) {
  for (const auto &c : corrs) {
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "correspondence weight outside [0, 1]");
    }
  }
}

bool all_in_front(const Pose &pose, std::span<const Correspondence> corrs) {
  for (const auto &c : corrs) {
    if (!((pose * c.point_3d).z() > 0.0)) return false;
  }
  return true;
}

void normal_equations(const Pose &pose, std::span<const Correspondence> corrs,
                      const CameraIntrinsics &K, Matrix6 &H, Vector6 &g,
                      double &cost) {
  H.setZero();
  g.setZero();
  cost = 0.0;
  for (const auto &c : corrs) {
    const Eigen::Vector3d p = pose * c.point_3d;
    const double iz = 1.0 / p.z();
    const double sw = std::sqrt(c.weight);
    const Eigen::Vector2d r = sw * (K.project(p) - c.point_2d);
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz,
             0.0, K.fy * iz, -K.fy * p.y() * iz * iz;
    Eigen::Matrix<double, 3, 6> dp;
    dp.leftCols<3>() = -skew(p);
    dp.rightCols<3>().setIdentity();
    const Eigen::Matrix<double, 2, 6> J = sw * dproj * dp;
    H.noalias() += J.transpose() * J;
    g.noalias() += J.transpose() * r;
    cost += 0.5 * r.squaredNorm();
  }
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0 || !(cx >= 0.0 && cx < width) ||
      !(cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidConfig, "principal point outside the image");
  }
}

Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics &K) {
  if (corrs.size() < kPnpMinimalSet) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "DLT needs at least 6 correspondences");
  }
  check_weights(corrs);

  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto &corr : corrs) c += corr.point_3d;
  c /= static_cast<double>(corrs.size());
  double mean_dist = 0.0;
  for (const auto &corr : corrs) mean_dist += (corr.point_3d - c).norm();
  mean_dist /= static_cast<double>(corrs.size());
  if (!(mean_dist > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all 3D points coincide");
  }
  const double s = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd A(2 * corrs.size(), 12);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto &corr = corrs[i];
    const Eigen::Vector3d X = s * (corr.point_3d - c);
    const double x = (corr.point_2d.x() - K.cx) / K.fx;
    const double y = (corr.point_2d.y() - K.cy) / K.fy;
    const double w = corr.weight;
    Eigen::Matrix<double, 1, 4> Xh(X.x(), X.y(), X.z(), 1.0);
    A.row(2 * i) << w * Xh, Eigen::Matrix<double, 1, 4>::Zero(), -w * x * Xh;
    A.row(2 * i + 1) << Eigen::Matrix<double, 1, 4>::Zero(), w * Xh, -w * y * Xh;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  if (sv.size() < 12 || !(sv(10) > 1e-9 * sv(0))) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "DLT design matrix is rank deficient");
  }
  const Eigen::Matrix<double, 12, 1> v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> Pn;
  Pn << v.segment<4>(0).transpose(), v.segment<4>(4).transpose(),
      v.segment<4>(8).transpose();

  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() *= s;
  T.topRightCorner<3, 1>() = -s * c;
  Eigen::Matrix<double, 3, 4> P = Pn * T;

  const double depth = (P.leftCols<3>() * c + P.col(3)).z();
  if (depth < 0.0) P = -P;

  const Eigen::Matrix3d M = P.leftCols<3>();
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = msvd.matrixU() * msvd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    D(2, 2) = -1.0;
    R = msvd.matrixU() * D * msvd.matrixV().transpose();
  }
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "DLT produced zero scale");
  }
  return {R, Eigen::Vector3d(P.col(3) / scale)};
}

double reprojection_cost(const Pose &pose, std::span<const Correspondence> corrs,
                         const CameraIntrinsics &K) {
  double cost = 0.0;
  for (const auto &c : corrs) {
    cost += 0.5 * c.weight * (K.project(pose * c.point_3d) - c.point_2d).squaredNorm();
  }
  return cost;
}

Vector6 reprojection_gradient(const Pose &pose,
                              std::span<const Correspondence> corrs,
                              const CameraIntrinsics &K) {
  Matrix6 H;
  Vector6 g;
  double cost;
  normal_equations(pose, corrs, K, H, g, cost);
  return g;
}

double reprojection_rmse(const Pose &pose, std::span<const Correspondence> corrs,
                         const CameraIntrinsics &K) {
  if (corrs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto &c : corrs) {
    sum += (K.project(pose * c.point_3d) - c.point_2d).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(corrs.size()));
}

Pose pnp_refine(const Pose &init, std::span<const Correspondence> corrs,
                const CameraIntrinsics &K, int iterations) {
  check_weights(corrs);
  if (!all_in_front(init, corrs)) {
    throw Error(ErrorCode::kNonFiniteResidual,
                "initial pose puts a point behind the camera");
  }
  Pose pose = init;
  double lambda = 1e-3;
  Matrix6 H;
  Vector6 g;
  double cost;
  normal_equations(pose, corrs, K, H, g, cost);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kNonFiniteResidual, "non-finite reprojection cost");
  }

  int accepted = 0;
  while (accepted < iterations && lambda < kMaxLambda) {
    if (g.norm() == 0.0) break;
    const Matrix6 damped = H + lambda * Matrix6::Identity();
    const Vector6 step = -damped.ldlt().solve(g);
    if (!step.allFinite()) {
      lambda *= 10.0;
      continue;
    }
    const Pose trial = se3_exp(step) * pose;
    if (!all_in_front(trial, corrs)) {
      lambda *= 10.0;
      continue;
    }
    const double trial_cost = reprojection_cost(trial, corrs, K);
    if (!(trial_cost < cost)) {
      lambda *= 10.0;
      continue;
    }
    pose = trial;
    lambda = std::max(lambda / 10.0, 1e-12);
    ++accepted;
    const double previous = cost;
    normal_equations(pose, corrs, K, H, g, cost);
    if (previous - cost <= 1e-15 * previous || step.norm() < 1e-14) break;
  }
  return pose;
}

RansacPnpResult ransac_pnp(std::span<const Correspondence> corrs,
                           const CameraIntrinsics &K,
                           const RansacPnpOptions &options) {
  const std::size_t n = corrs.size();
  if (n < kPnpMinimalSet) {
    throw Error(ErrorCode::kNoConsensus,
                "RANSAC PnP needs at least 6 correspondences, got " +
                    std::to_string(n));
  }
  check_weights(corrs);
  const double thresh2 = options.inlier_px * options.inlier_px;

  auto classify = [&](const Pose &pose, std::vector<bool> &mask) {
    std::size_t count = 0;
    mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p = pose * corrs[i].point_3d;
      if (!(p.z() > 0.0)) continue;
      if ((K.project(p) - corrs[i].point_2d).squaredNorm() < thresh2) {
        mask[i] = true;
        ++count;
      }
    }
    return count;
  };
  auto subset = [&](const std::vector<bool> &mask) {
    std::vector<Correspondence> out;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) out.push_back(corrs[i]);
    }
    return out;
  };

  // Enumerate every 6-subset when that is no more work than the sampling
  // budget; otherwise draw random subsets from a seeded engine.
  double combinations = 1.0;
  for (std::size_t i = 0; i < kPnpMinimalSet; ++i) {
    combinations *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  const bool exhaustive = combinations <= options.max_iterations;

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> pool(n);
  std::vector<std::size_t> sample(kPnpMinimalSet);
  std::iota(sample.begin(), sample.end(), 0);
  std::vector<Correspondence> minimal(kPnpMinimalSet);

  std::size_t best_count = 0;
  std::vector<bool> best_mask;
  std::vector<bool> mask;
  const int budget = exhaustive ? static_cast<int>(combinations) : options.max_iterations;
  for (int iter = 0; iter < budget; ++iter) {
    if (!exhaustive) {
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t k = 0; k < kPnpMinimalSet; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(pool[k], pool[pick(rng)]);
        sample[k] = pool[k];
      }
    }
    for (std::size_t k = 0; k < kPnpMinimalSet; ++k) minimal[k] = corrs[sample[k]];

    try {
      const Pose hypothesis = pnp_dlt(minimal, K);
      const std::size_t count = classify(hypothesis, mask);
      if (count > best_count) {
        best_count = count;
        best_mask = mask;
      }
    } catch (const Error &e) {
      if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
    }

    if (exhaustive && iter + 1 < budget) {
      // next lexicographic combination
      std::size_t k = kPnpMinimalSet;
      while (k-- > 0) {
        if (sample[k] < n - kPnpMinimalSet + k) {
          ++sample[k];
          for (std::size_t j = k + 1; j < kPnpMinimalSet; ++j) sample[j] = sample[j - 1] + 1;
          break;
        }
      }
    }
  }

  if (best_count < kPnpMinimalSet) {
    throw Error(ErrorCode::kNoConsensus, "no hypothesis reached 6 inliers");
  }

  RansacPnpResult result;
  auto fit = [&](const std::vector<bool> &inlier_mask) {
    const auto inliers = subset(inlier_mask);
    const Pose linear = pnp_dlt(inliers, K);
    return pnp_refine(linear, inliers, K, options.refine_iterations);
  };
  result.pose = fit(best_mask);
  result.inlier_count = classify(result.pose, result.inliers);
  if (result.inlier_count >= kPnpMinimalSet && result.inliers != best_mask) {
    const Pose refit = fit(result.inliers);
    std::vector<bool> refit_mask;
    const std::size_t refit_count = classify(refit, refit_mask);
    if (refit_count >= result.inlier_count) {
      result.pose = refit;
      result.inliers = std::move(refit_mask);
      result.inlier_count = refit_count;
    }
  } else if (result.inlier_count < kPnpMinimalSet) {
    result.inliers = best_mask;
    result.inlier_count = best_count;
  }
  return result;
}

}  // namespace multicam
