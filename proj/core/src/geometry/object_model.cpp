#include "multicam/geometry/object_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>

#include "multicam/common/error.hpp"

namespace multicam {

namespace {

bool is_identity(const Pose &p) {
  return rotation_angle(p.rotation()) < 1e-12 && p.translation().norm() < 1e-12;
}

}  // namespace

std::vector<std::size_t> fps_indices(std::span<const Eigen::Vector3d> points,
                                     std::size_t k) {
  if (points.empty()) throw Error(ErrorCode::kInvalidModel, "empty point set");
  if (k == 0 || k > points.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "fps: k must lie in [1, " + std::to_string(points.size()) + "]");
  }

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto &p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::size_t seed = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      seed = i;
    }
  }

  std::vector<std::size_t> selected{seed};
  selected.reserve(k);
  std::vector<double> min_dist(points.size(),
                               std::numeric_limits<double>::infinity());
  while (selected.size() < k) {
    const auto &last = points[selected.back()];
    std::size_t next = 0;
    double next_dist = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      min_dist[i] = std::min(min_dist[i], (points[i] - last).squaredNorm());
      if (min_dist[i] > next_dist) {
        next_dist = min_dist[i];
        next = i;
      }
    }
    selected.push_back(next);
  }
  return selected;
}

PointCloud fps_keypoints(std::span<const Eigen::Vector3d> points,
                         std::size_t k) {
  PointCloud out;
  for (auto i : fps_indices(points, k)) out.push_back(points[i]);
  return out;
}

double model_diameter(std::span<const Eigen::Vector3d> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

std::vector<Pose> cyclic_symmetries(const Eigen::Vector3d &axis, int order) {
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "symmetry order < 1");
  std::vector<Pose> out;
  out.reserve(static_cast<std::size_t>(order));
  out.push_back(Pose::identity());
  const Eigen::Vector3d a = axis.normalized();
  for (int i = 1; i < order; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / order;
    out.push_back(Pose::from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, a))));
  }
  return out;
}

ObjectModel make_object_model(int category_id, PointCloud points,
                              std::vector<Pose> symmetries, std::string name) {
  if (points.empty()) {
    throw Error(ErrorCode::kInvalidModel,
                "category " + std::to_string(category_id) + " has no points");
  }
  ObjectModel model;
  model.category_id = category_id;
  model.name = std::move(name);
  model.points = std::move(points);
  model.diameter = model_diameter(model.points);
  if (!(model.diameter > 0.0)) {
    throw Error(ErrorCode::kInvalidModel, "model diameter must be positive");
  }
  model.keypoints = fps_keypoints(
      model.points, std::min(kDefaultKeypointCount, model.points.size()));

  model.symmetries.clear();
  model.symmetries.push_back(Pose::identity());
  for (const auto &s : symmetries) {
    if (!is_identity(s)) model.symmetries.push_back(s);
  }
  return model;
}

Pose resolve_symmetry(const Pose &object_in_camera, const ObjectModel &model,
                      const Eigen::Quaterniond &canonical) {
  Pose best = object_in_camera;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const auto &s : model.symmetries) {
    const Pose candidate = object_in_camera * s;
    const double angle =
        rotation_angle(canonical.conjugate() * candidate.rotation());
    if (angle < best_angle - 1e-12) {
      best_angle = angle;
      best = candidate;
    }
  }
  return best;
}

ObjectModel object_model_from_json(const nlohmann::json &doc) {
  try {
    PointCloud points;
    for (const auto &p : doc.at("points")) {
      points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                          p.at(2).get<double>());
    }
    std::vector<Pose> symmetries;
    if (doc.contains("symmetries")) {
      for (const auto &s : doc.at("symmetries")) {
        symmetries.push_back(pose_from_array(s.get<std::array<double, 7>>()));
      }
    }
    ObjectModel model = make_object_model(doc.at("category_id").get<int>(),
                                          std::move(points), symmetries,
                                          doc.value("name", std::string{}));
    if (doc.contains("diameter")) model.diameter = doc.at("diameter").get<double>();
    if (doc.contains("keypoints")) {
      model.keypoints.clear();
      for (const auto &p : doc.at("keypoints")) {
        model.keypoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                     p.at(2).get<double>());
      }
    }
    return model;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kInvalidModel, e.what());
  }
}

nlohmann::json object_model_to_json(const ObjectModel &model) {
  auto vec = [](const PointCloud &pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &p : pts) arr.push_back({p.x(), p.y(), p.z()});
    return arr;
  };
  nlohmann::json doc;
  doc["category_id"] = model.category_id;
  if (!model.name.empty()) doc["name"] = model.name;
  doc["points"] = vec(model.points);
  doc["diameter"] = model.diameter;
  doc["keypoints"] = vec(model.keypoints);
  doc["symmetries"] = nlohmann::json::array();
  for (const auto &s : model.symmetries) doc["symmetries"].push_back(to_array(s));
  return doc;
}

ModelRegistry::ModelRegistry(std::vector<ObjectModel> models) {
  for (auto &m : models) add(std::move(m));
}

void ModelRegistry::add(ObjectModel model) {
  const int id = model.category_id;
  models_.insert_or_assign(id, std::move(model));
}

const ObjectModel &ModelRegistry::at(int category_id) const {
  auto it = models_.find(category_id);
  if (it == models_.end()) {
    throw Error(ErrorCode::kInvalidModel,
                "unknown category " + std::to_string(category_id));
  }
  return it->second;
}

std::vector<int> ModelRegistry::categories() const {
  std::vector<int> out;
  for (const auto &[id, _] : models_) out.push_back(id);
  return out;
}

ModelRegistry load_models(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  ModelRegistry registry;
  if (doc.is_array()) {
    for (const auto &m : doc) registry.add(object_model_from_json(m));
  } else {
    registry.add(object_model_from_json(doc));
  }
  return registry;
}

void save_models(const std::filesystem::path &path,
                 const ModelRegistry &registry) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto &[_, model] : registry) doc.push_back(object_model_to_json(model));
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace multicam
