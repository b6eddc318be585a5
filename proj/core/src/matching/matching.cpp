#include "multicam/matching/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "multicam/common/error.hpp"
#include "multicam/geometry/metrics.hpp"

namespace multicam {

namespace {

struct Candidate {
  std::size_t a;  // positions in the canonical lists
  std::size_t b;
  int category;
  double priority;
};

struct Scored {
  Pose relative_pose;
  std::vector<PairMatch> inliers;
  double mean_distance = std::numeric_limits<double>::infinity();
};

// Canonical ordering of a camera's detections, independent of input order.
std::vector<std::size_t> canonical_order(std::span<const Detection> dets) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!dets[i].dynamic) idx.push_back(i);
  }
  auto key = [&](std::size_t i) {
    const auto &d = dets[i];
    const auto p = to_array(d.pose);
    return std::make_tuple(d.category_id, -d.confidence, p[4], p[5], p[6], p[0],
                           p[1], p[2], p[3]);
  };
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t l, std::size_t r) { return key(l) < key(r); });
  return idx;
}

Scored score_hypothesis(const Pose &relative, std::span<const Detection> dets_a,
                        std::span<const Detection> dets_b,
                        const std::vector<std::size_t> &order_a,
                        const std::vector<std::size_t> &order_b,
                        const std::vector<Candidate> &candidates,
                        const ModelRegistry &models, double threshold) {
  std::vector<std::pair<std::size_t, PairMatch>> gated;  // (candidate idx, match)
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto &cand = candidates[c];
    const Detection &da = dets_a[order_a[cand.a]];
    const Detection &db = dets_b[order_b[cand.b]];
    const auto m = symmetric_distance_within(da.pose, relative * db.pose,
                                             models.at(cand.category), threshold);
    if (!m || !(m->distance < threshold)) continue;
    gated.push_back({c, PairMatch{cand.a, cand.b, m->distance, m->symmetry}});
  }
  std::stable_sort(gated.begin(), gated.end(), [](const auto &l, const auto &r) {
    return std::tie(l.second.distance, l.first) < std::tie(r.second.distance, r.first);
  });

  Scored scored;
  scored.relative_pose = relative;
  std::vector<bool> used_a(order_a.size(), false), used_b(order_b.size(), false);
  double sum = 0.0;
  for (const auto &[_, match] : gated) {
    if (used_a[match.index_a] || used_b[match.index_b]) continue;
    used_a[match.index_a] = used_b[match.index_b] = true;
    scored.inliers.push_back(match);
    sum += match.distance;
  }
  if (!scored.inliers.empty()) {
    scored.mean_distance = sum / static_cast<double>(scored.inliers.size());
  }
  return scored;
}

std::optional<CameraPairHypothesis> match_directed(
    std::span<const Detection> dets_a, std::span<const Detection> dets_b,
    const ModelRegistry &models, const MatchingOptions &options) {
  const auto order_a = canonical_order(dets_a);
  const auto order_b = canonical_order(dets_b);

  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < order_a.size(); ++i) {
    const Detection &da = dets_a[order_a[i]];
    if (!models.contains(da.category_id)) continue;
    for (std::size_t j = 0; j < order_b.size(); ++j) {
      const Detection &db = dets_b[order_b[j]];
      if (db.category_id != da.category_id) continue;
      candidates.push_back({i, j, da.category_id, da.confidence * db.confidence});
    }
  }
  if (candidates.size() < options.min_inliers || candidates.empty()) {
    return std::nullopt;
  }

  // High-confidence generators first; the order only matters for exact ties.
  std::vector<std::size_t> generators(candidates.size());
  std::iota(generators.begin(), generators.end(), 0);
  std::stable_sort(generators.begin(), generators.end(),
                   [&](std::size_t l, std::size_t r) {
                     return candidates[l].priority > candidates[r].priority;
                   });

  Scored best;
  for (std::size_t g : generators) {
    const auto &cand = candidates[g];
    const Detection &da = dets_a[order_a[cand.a]];
    const Detection &db = dets_b[order_b[cand.b]];
    for (const auto &s : models.at(cand.category).symmetries) {
      Scored scored = score_hypothesis(hypothesis_from_pair(da, db, s), dets_a,
                                       dets_b, order_a, order_b, candidates,
                                       models, options.inlier_threshold);
      if (scored.inliers.size() > best.inliers.size() ||
          (scored.inliers.size() == best.inliers.size() &&
           scored.mean_distance < best.mean_distance)) {
        best = std::move(scored);
      }
    }
  }
  if (best.inliers.size() < options.min_inliers) return std::nullopt;

  CameraPairHypothesis out;
  out.camera_a = dets_a[order_a.front()].camera_id;
  out.camera_b = dets_b[order_b.front()].camera_id;
  out.relative_pose = best.relative_pose;
  out.score = best.mean_distance;

  std::vector<bool> used_a(order_a.size(), false), used_b(order_b.size(), false);
  for (auto m : best.inliers) {
    used_a[m.index_a] = used_b[m.index_b] = true;
    m.index_a = order_a[m.index_a];
    m.index_b = order_b[m.index_b];
    out.inliers.push_back(m);
  }
  std::sort(out.inliers.begin(), out.inliers.end(),
            [](const PairMatch &l, const PairMatch &r) {
              return std::tie(l.index_a, l.index_b) < std::tie(r.index_a, r.index_b);
            });

  auto count_category = [](std::span<const Detection> dets,
                           const std::vector<std::size_t> &order, int category) {
    return std::count_if(order.begin(), order.end(), [&](std::size_t i) {
      return dets[i].category_id == category;
    });
  };
  for (const auto &cand : candidates) {
    if (used_a[cand.a] || used_b[cand.b]) continue;
    if (count_category(dets_a, order_a, cand.category) != 1 ||
        count_category(dets_b, order_b, cand.category) != 1) {
      continue;
    }
    const Detection &da = dets_a[order_a[cand.a]];
    const Detection &db = dets_b[order_b[cand.b]];
    const auto m = symmetric_distance(da.pose, out.relative_pose * db.pose,
                                      models.at(cand.category));
    out.outliers.push_back({order_a[cand.a], order_b[cand.b], m.distance, m.symmetry});
  }
  return out;
}

}  // namespace

void validate(const Detection &d) {
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "detection confidence outside [0, 1]");
  }
  if (!(d.pose.translation().z() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "detected object is behind the camera");
  }
}

Pose hypothesis_from_pair(const Detection &a, const Detection &b,
                          const Pose &symmetry) {
  return a.pose * symmetry * b.pose.inverse();
}

Pose hypothesis_from_pair(const Detection &a, const Detection &b,
                          const ObjectModel &model) {
  if (a.category_id != b.category_id) {
    throw Error(ErrorCode::kCategoryMismatch,
                "categories " + std::to_string(a.category_id) + " and " +
                    std::to_string(b.category_id));
  }
  return hypothesis_from_pair(a, b, symmetric_distance(a.pose, b.pose, model).symmetry);
}

std::optional<CameraPairHypothesis> match_cameras(
    std::span<const Detection> dets_a, std::span<const Detection> dets_b,
    const ModelRegistry &models, const MatchingOptions &options) {
  if (dets_a.empty() || dets_b.empty()) return std::nullopt;
  // Always solve in camera-id order so that (a, b) and (b, a) agree exactly.
  const std::string &id_a = dets_a.front().camera_id;
  const std::string &id_b = dets_b.front().camera_id;
  if (id_b < id_a) {
    auto flipped = match_directed(dets_b, dets_a, models, options);
    if (!flipped) return std::nullopt;
    CameraPairHypothesis out;
    out.camera_a = flipped->camera_b;
    out.camera_b = flipped->camera_a;
    out.relative_pose = flipped->relative_pose.inverse();
    out.score = flipped->score;
    auto swap_match = [](const PairMatch &m) {
      return PairMatch{m.index_b, m.index_a, m.distance, m.symmetry.inverse()};
    };
    for (const auto &m : flipped->inliers) out.inliers.push_back(swap_match(m));
    for (const auto &m : flipped->outliers) out.outliers.push_back(swap_match(m));
    std::sort(out.inliers.begin(), out.inliers.end(),
              [](const PairMatch &l, const PairMatch &r) {
                return std::tie(l.index_a, l.index_b) < std::tie(r.index_a, r.index_b);
              });
    return out;
  }
  return match_directed(dets_a, dets_b, models, options);
}

std::vector<std::pair<std::string, std::string>> unique_pairs(
    std::span<const std::string> camera_ids) {
  std::set<std::string> ids(camera_ids.begin(), camera_ids.end());
  std::vector<std::string> sorted(ids.begin(), ids.end());
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      out.emplace_back(sorted[i], sorted[j]);
    }
  }
  return out;
}

}  // namespace multicam
