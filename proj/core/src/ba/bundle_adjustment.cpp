#include "multicam/ba/bundle_adjustment.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "multicam/common/error.hpp"

namespace multicam {

namespace {

const Pose &camera_pose(const std::map<std::string, Pose> &cameras, const std::string &id) {
  auto it = cameras.find(id);
  if (it == cameras.end())
    throw Error(ErrorCode::kUnanchoredCamera, "camera '" + id + "' has no world pose");
  return it->second;
}

const Pose &object_pose(const std::map<int, Pose> &objects, int id) {
  auto it = objects.find(id);
  if (it == objects.end())
    throw Error(ErrorCode::kInvalidArgument, "object " + std::to_string(id) + " has no pose");
  return it->second;
}

// rho and IRLS weight for a residual of norm n.
inline std::pair<double, double> huber(double n, double delta) {
  if (n <= delta) return {0.5 * n * n, 1.0};
  return {delta * (n - 0.5 * delta), delta / n};
}

double observation_energy(const ObservationSet &obs, const Pose &wc, const Pose &wo, double delta) {
  double e = 0.0;
  for (std::size_t k = 0; k < obs.surface_points.size(); ++k) {
    const Eigen::Vector3d r = wc * obs.surface_points[k] - wo * obs.model_points[k];
    e += huber(r.norm(), delta).first;
  }
  return e;
}

}  // namespace

void validate(const ObservationSet &obs) {
  if (obs.surface_points.size() != obs.model_points.size())
    throw Error(ErrorCode::kInvalidArgument, "observation point lists differ in size");
  if (obs.surface_points.size() < 3)
    throw Error(ErrorCode::kInvalidArgument, "observation needs at least 3 points");
}

double energy(std::span<const ObservationSet> observations,
              const std::map<std::string, Pose> &cameras,
              const std::map<int, Pose> &objects, double huber_delta) {
  double e = 0.0;
  for (const auto &obs : observations) {
    validate(obs);
    e += observation_energy(obs, camera_pose(cameras, obs.camera_id),
                            object_pose(objects, obs.instance_id), huber_delta);
  }
  return e;
}

ObjectTerm object_term(const ObservationSet &obs, const Pose &wc, const Pose &wo,
                       double delta) {
  validate(obs);
  ObjectTerm t;
  const Eigen::Matrix3d R = wo.rotation_matrix();
  Eigen::Matrix<double, 3, 6> J;
  for (std::size_t k = 0; k < obs.surface_points.size(); ++k) {
    const Eigen::Vector3d &P = obs.model_points[k];
    const Eigen::Vector3d r = wc * obs.surface_points[k] - wo * P;
    const auto [e, w] = huber(r.norm(), delta);
    t.energy += e;
    // d r / d theta for T_WO * exp(theta), rotation block first.
    J.leftCols<3>() = R * skew(P);
    J.rightCols<3>() = -R;
    t.g.noalias() += w * J.transpose() * r;
    t.H.noalias() += w * J.transpose() * J;
  }
  return t;
}

Matrix6 camera_jacobian(const Pose &object_in_world) {
  return -adjoint(object_in_world.inverse());
}

CameraSystem camera_system(const std::string &camera_id,
                           std::span<const ObservationSet> observations,
                           const std::map<std::string, Pose> &cameras,
                           const std::map<int, Pose> &objects, double huber_delta) {
  CameraSystem sys;
  const Pose &wc = camera_pose(cameras, camera_id);
  for (const auto &obs : observations) {
    if (obs.camera_id != camera_id || !obs.inlier) continue;
    const Pose &wo = object_pose(objects, obs.instance_id);
    const ObjectTerm term = object_term(obs, wc, wo, huber_delta);
    const Matrix6 J = camera_jacobian(wo);
    sys.g.noalias() += J.transpose() * term.g;
    sys.H.noalias() += J.transpose() * term.H * J;
    sys.energy += term.energy;
    ++sys.terms;
  }
  return sys;
}

Vector6 damped_step(const Matrix6 &H, const Vector6 &g, double lambda) {
  Matrix6 A = 0.5 * (H + H.transpose());
  A.diagonal().array() += lambda;
  Eigen::LLT<Matrix6> llt(A);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::kSingularHessian, "damped Hessian is not positive definite");
  Vector6 step = -llt.solve(g);
  if (!step.allFinite())
    throw Error(ErrorCode::kSingularHessian, "non-finite Gauss-Newton step");
  return step;
}

Vector6 camera_only_step(const std::string &camera_id,
                         std::span<const ObservationSet> observations,
                         const std::map<std::string, Pose> &cameras,
                         const std::map<int, Pose> &objects, double huber_delta,
                         double lambda) {
  const CameraSystem sys = camera_system(camera_id, observations, cameras, objects, huber_delta);
  return damped_step(sys.H, sys.g, lambda);
}

Vector6 object_only_step(int instance_id, std::span<const ObservationSet> observations,
                         const std::map<std::string, Pose> &cameras,
                         const std::map<int, Pose> &objects, double huber_delta,
                         double lambda) {
  const Pose &wo = object_pose(objects, instance_id);
  Vector6 g = Vector6::Zero();
  Matrix6 H = Matrix6::Zero();
  for (const auto &obs : observations) {
    if (obs.instance_id != instance_id) continue;
    const ObjectTerm t = object_term(obs, camera_pose(cameras, obs.camera_id), wo, huber_delta);
    g += t.g;
    H += t.H;
  }
  return adjoint(wo) * damped_step(H, g, lambda);
}

namespace {

// Levenberg-style damped solver state for one 6-dof block.
struct Damped {
  double lambda;
  bool stalled = false;
};

double escalate(double lambda) { return lambda > 0.0 ? lambda * 10.0 : 1e-9; }

// Accept/reject one damped step. `eval` returns the block energy at a
// candidate; returns the accepted step norm or a negative value.
template <class Solve, class Eval, class Commit>
double try_step(Damped &d, double current, const BaOptions &opt, Solve solve, Eval eval,
                Commit commit) {
  if (d.stalled) return -1.0;
  Vector6 step;
  for (;;) {
    try {
      step = solve(d.lambda);
      break;
    } catch (const Error &) {
      d.lambda = escalate(d.lambda);
      if (d.lambda > opt.max_lambda)
        throw Error(ErrorCode::kSingularHessian, "damping exhausted without a positive definite system");
    }
  }
  const double candidate = eval(step);
  if (std::isfinite(candidate) && candidate < current) {
    commit(step);
    d.lambda = std::max(d.lambda / 10.0, 1e-12);
    return step.norm();
  }
  d.lambda = escalate(d.lambda);
  if (d.lambda > opt.max_lambda) d.stalled = true;
  return -1.0;
}

// Object-only refinement of a relative pose with the camera frozen.
Pose refine_alone(const ObservationSet &obs, const Pose &wc, Pose wo, const BaOptions &opt) {
  Damped d{opt.initial_lambda};
  double e = observation_energy(obs, wc, wo, opt.huber_delta);
  for (int it = 0; it < opt.max_iterations && e > 0.0 && !d.stalled; ++it) {
    const double before = e;
    ObjectTerm term;
    const double n = try_step(
        d, e, opt,
        [&](double lambda) {
          term = object_term(obs, wc, wo, opt.huber_delta);
          return damped_step(term.H, term.g, lambda);
        },
        [&](const Vector6 &s) {
          return observation_energy(obs, wc, wo * se3_exp(s), opt.huber_delta);
        },
        [&](const Vector6 &s) {
          wo = wo * se3_exp(s);
          e = observation_energy(obs, wc, wo, opt.huber_delta);
        });
    if (n >= 0.0 && std::abs(before - e) <= opt.tolerance * before) break;
  }
  return wo;
}

}  // namespace

BaResult bundle_adjust(const BaProblem &problem, const BaOptions &opt) {
  if (opt.max_iterations < 0 || !(opt.tolerance >= 0) || !(opt.huber_delta > 0) ||
      !(opt.initial_lambda >= 0) || !(opt.max_lambda > 0))
    throw Error(ErrorCode::kInvalidConfig, "invalid bundle adjustment options");
  for (const auto &obs : problem.observations) {
    validate(obs);
    camera_pose(problem.cameras, obs.camera_id);
    object_pose(problem.objects, obs.instance_id);
  }

  BaResult res;
  res.cameras = problem.cameras;
  res.objects = problem.objects;

  // Split the problem. Coupled: inlier observations of objects that at
  // least two cameras see as inliers. Everything else is a relative pose
  // refined on its own and carried by its camera.
  std::map<int, std::set<std::string>> inlier_cams;
  for (const auto &obs : problem.observations)
    if (obs.inlier) inlier_cams[obs.instance_id].insert(obs.camera_id);
  std::vector<ObservationSet> coupled;
  struct Carried {
    const ObservationSet *obs;
    Pose camera_T_object;
    bool owns_node;  // false for outlier copies, whose result is dropped
  };
  std::vector<Carried> carried;
  for (const auto &obs : problem.observations) {
    const auto it = inlier_cams.find(obs.instance_id);
    const std::size_t n_views = it == inlier_cams.end() ? 0 : it->second.size();
    if (obs.inlier && n_views >= 2) {
      coupled.push_back(obs);
    } else {
      const Pose &wc = problem.cameras.at(obs.camera_id);
      const Pose &wo = problem.objects.at(obs.instance_id);
      carried.push_back({&obs, wc.inverse() * wo, obs.inlier || n_views == 0});
    }
  }

  std::map<int, Damped> obj_damp;
  for (const auto &obs : coupled) obj_damp.try_emplace(obs.instance_id, Damped{opt.initial_lambda});
  std::map<std::string, Damped> cam_damp;
  for (const auto &obs : coupled)
    if (!problem.fixed_cameras.count(obs.camera_id))
      cam_damp.try_emplace(obs.camera_id, Damped{opt.initial_lambda});

  auto carried_energy = [&]() {
    double e = 0.0;
    for (const auto &c : carried) {
      const Pose I;
      e += observation_energy(*c.obs, I, c.camera_T_object, opt.huber_delta);
    }
    return e;
  };
  auto coupled_energy = [&]() {
    return energy(coupled, res.cameras, res.objects, opt.huber_delta);
  };
  auto max_lambda_now = [&]() {
    double l = 0.0;
    for (const auto &[id, d] : cam_damp) l = std::max(l, d.lambda);
    if (cam_damp.empty())
      for (const auto &[id, d] : obj_damp) l = std::max(l, d.lambda);
    return l;
  };

  double e_coupled = coupled_energy();
  double e_carried = carried_energy();
  res.initial_energy = e_coupled + e_carried;
  res.trace.push_back({0, res.initial_energy, opt.initial_lambda, 0.0});
  // Residuals below a picometer are round-off; treat them as exact.
  std::size_t n_points = 0;
  for (const auto &obs : problem.observations) n_points += obs.model_points.size();
  const double energy_floor = 0.5e-24 * static_cast<double>(n_points);
  if (res.initial_energy <= energy_floor) {
    res.final_energy = res.initial_energy;
    res.converged = true;
    return res;
  }

  // Carried terms do not depend on anything else, so solve them once.
  bool carried_moved = false;
  for (auto &c : carried) {
    const Pose refined = refine_alone(*c.obs, Pose{}, c.camera_T_object, opt);
    carried_moved = carried_moved || !(refined.matrix() == c.camera_T_object.matrix());
    c.camera_T_object = refined;
  }
  e_carried = carried_energy();

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    const double e_before = e_coupled;
    double max_step = 0.0;
    bool accepted = carried_moved && iter == 1;

    // (a) objects, each against its own observations.
    for (auto &[inst, damp] : obj_damp) {
      std::vector<const ObservationSet *> mine;
      for (const auto &obs : coupled)
        if (obs.instance_id == inst) mine.push_back(&obs);
      Pose &wo = res.objects.at(inst);
      auto block_energy = [&](const Pose &candidate) {
        double e = 0.0;
        for (const auto *o : mine)
          e += observation_energy(*o, res.cameras.at(o->camera_id), candidate, opt.huber_delta);
        return e;
      };
      const double current = block_energy(wo);
      const double n = try_step(
          damp, current, opt,
          [&](double lambda) {
            Vector6 g = Vector6::Zero();
            Matrix6 H = Matrix6::Zero();
            for (const auto *o : mine) {
              const ObjectTerm t = object_term(*o, res.cameras.at(o->camera_id), wo, opt.huber_delta);
              g += t.g;
              H += t.H;
            }
            return damped_step(H, g, lambda);
          },
          [&](const Vector6 &s) { return block_energy(wo * se3_exp(s)); },
          [&](const Vector6 &s) { wo = wo * se3_exp(s); });
      if (n >= 0.0) {
        accepted = true;
        max_step = std::max(max_step, n);
      }
    }

    // (b) cameras, assembled from the per-object terms.
    for (auto &[cam, damp] : cam_damp) {
      Pose &wc = res.cameras.at(cam);
      auto block_energy = [&](const Pose &candidate) {
        double e = 0.0;
        for (const auto &o : coupled)
          if (o.camera_id == cam)
            e += observation_energy(o, candidate, res.objects.at(o.instance_id), opt.huber_delta);
        return e;
      };
      const double current = block_energy(wc);
      const double n = try_step(
          damp, current, opt,
          [&](double lambda) {
            const CameraSystem sys = camera_system(cam, coupled, res.cameras, res.objects, opt.huber_delta);
            return damped_step(sys.H, sys.g, lambda);
          },
          [&](const Vector6 &s) { return block_energy(se3_exp(s) * wc); },
          [&](const Vector6 &s) { wc = se3_exp(s) * wc; });
      if (n >= 0.0) {
        accepted = true;
        max_step = std::max(max_step, n);
      }
    }

    e_coupled = coupled_energy();
    res.iterations = iter;
    res.trace.push_back({iter, e_coupled + e_carried, max_lambda_now(), max_step});

    if (e_coupled <= energy_floor) {
      res.converged = true;
      break;
    }
    if (accepted && std::abs(e_before - e_coupled) <= opt.tolerance * e_before) {
      res.converged = true;
      break;
    }
    bool all_stalled = true;
    for (const auto &[k, d] : obj_damp) all_stalled = all_stalled && d.stalled;
    for (const auto &[k, d] : cam_damp) all_stalled = all_stalled && d.stalled;
    if (all_stalled) break;
  }

  // Re-attach carried objects to their (possibly moved) cameras.
  for (const auto &c : carried)
    if (c.owns_node) res.objects.at(c.obs->instance_id) = res.cameras.at(c.obs->camera_id) * c.camera_T_object;
  for (const auto &id : problem.fixed_cameras) {
    auto it = problem.cameras.find(id);
    if (it != problem.cameras.end()) res.cameras.at(id) = it->second;
  }
  res.final_energy = e_coupled + e_carried;
  return res;
}

std::string trace_to_csv(std::span<const BaTraceRow> trace) {
  std::ostringstream os;
  os << "iter,energy,lambda,max_step_norm\n";
  os << std::setprecision(17);
  for (const auto &r : trace)
    os << r.iteration << ',' << r.energy << ',' << r.lambda << ',' << r.max_step_norm << '\n';
  return os.str();
}

}  // namespace multicam
