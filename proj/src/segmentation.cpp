#include "mdd/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mdd {

std::string to_string(MapKind kind) { return kind == MapKind::kmeans ? "kmeans" : "grid"; }

ServiceMap::ServiceMap(MapKind kind, Bounds bounds, std::vector<Point2D> depots, int neighbor_count)
    : kind_(kind), bounds_(bounds), depots_(std::move(depots)), neighbor_count_(neighbor_count) {
  if (depots_.empty()) throw std::invalid_argument("service map needs at least one depot");
  graph_ = area_adjacency(depots_, neighbor_count);
  if (kind_ == MapKind::grid) {
    grid_side_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(depots_.size()))));
    if (grid_side_ * grid_side_ != size()) throw std::invalid_argument("grid map needs a square count");
  }
}

int ServiceMap::area_of(const Point2D& p) const {
  if (kind_ == MapKind::grid) {
    const double cw = bounds_.width / grid_side_;
    const double ch = bounds_.height / grid_side_;
    const int col = std::clamp(static_cast<int>(std::floor(p.x() / cw)), 0, grid_side_ - 1);
    const int row = std::clamp(static_cast<int>(std::floor(p.y() / ch)), 0, grid_side_ - 1);
    return row * grid_side_ + col;
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < size(); ++n) {
    const double d = (depots_[static_cast<std::size_t>(n)] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

std::vector<int> ServiceMap::action_targets(int area) const {
  std::vector<int> out{area};
  const auto& near = graph_.nearest[static_cast<std::size_t>(area)];
  out.insert(out.end(), near.begin(), near.end());
  return out;
}

AreaGraph area_adjacency(std::span<const Point2D> depots, int k_neighbors) {
  const int n = static_cast<int>(depots.size());
  if (k_neighbors < 0 || k_neighbors >= n) {
    throw std::invalid_argument("area_adjacency: need 0 <= k < number of areas");
  }
  AreaGraph g;
  g.nearest.resize(static_cast<std::size_t>(n));
  g.adjacency.resize(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    std::vector<int> others;
    for (int b = 0; b < n; ++b) {
      if (b != a) others.push_back(b);
    }
    std::stable_sort(others.begin(), others.end(), [&](int l, int r) {
      return (depots[l] - depots[a]).squaredNorm() < (depots[r] - depots[a]).squaredNorm();
    });
    others.resize(static_cast<std::size_t>(k_neighbors));
    g.nearest[static_cast<std::size_t>(a)] = others;
  }
  for (int a = 0; a < n; ++a) {
    for (int b : g.nearest[static_cast<std::size_t>(a)]) {
      g.adjacency[static_cast<std::size_t>(a)].push_back(b);
      g.adjacency[static_cast<std::size_t>(b)].push_back(a);
    }
  }
  for (auto& list : g.adjacency) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

namespace {

double objective(std::span<const Point2D> points, const std::vector<Point2D>& centers,
                 const std::vector<int>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += (points[i] - centers[static_cast<std::size_t>(assignment[i])]).squaredNorm();
  }
  return total;
}

void require_non_increasing(std::vector<double>& history, double value) {
  if (!history.empty() && value > history.back() * (1.0 + 1e-12) + 1e-9) {
    throw std::logic_error("kmeans objective increased");
  }
  history.push_back(value);
}

}  // namespace

KMeansResult kmeans(std::span<const Point2D> points, int clusters, std::uint64_t seed,
                    int max_iterations) {
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  if (clusters < 1) throw std::invalid_argument("kmeans: need at least one cluster");

  std::vector<Point2D> distinct(points.begin(), points.end());
  const auto lex = [](const Point2D& a, const Point2D& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  };
  std::sort(distinct.begin(), distinct.end(), lex);
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<std::size_t>(clusters) > distinct.size()) {
    throw std::invalid_argument("kmeans: more clusters than distinct points");
  }

  Rng rng(seed);
  std::shuffle(distinct.begin(), distinct.end(), rng);

  KMeansResult res;
  res.centers.assign(distinct.begin(), distinct.begin() + clusters);
  res.assignment.assign(points.size(), -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double d = (points[i] - res.centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    require_non_increasing(res.objective_history, objective(points, res.centers, res.assignment));
    res.iterations = iter + 1;
    if (!changed) break;

    std::vector<Point2D> sums(static_cast<std::size_t>(clusters), Point2D::Zero());
    std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[static_cast<std::size_t>(res.assignment[i])] += points[i];
      ++counts[static_cast<std::size_t>(res.assignment[i])];
    }
    std::vector<char> taken(points.size(), 0);
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers[static_cast<std::size_t>(c)] =
            sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
      }
    }
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (taken[i]) continue;
        const double d =
            (points[i] - res.centers[static_cast<std::size_t>(res.assignment[i])]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[far] = 1;
      res.centers[static_cast<std::size_t>(c)] = points[far];
    }
    require_non_increasing(res.objective_history, objective(points, res.centers, res.assignment));
  }
  return res;
}

ServiceMap kmeans_segment(std::span<const Point2D> points, int num_depots, std::uint64_t seed,
                          const Bounds& bounds, int neighbor_count) {
  auto result = kmeans(points, num_depots, seed);
  return ServiceMap(MapKind::kmeans, bounds, std::move(result.centers), neighbor_count);
}

ServiceMap grid_segment(const Bounds& bounds, int num_depots, int neighbor_count) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(num_depots))));
  if (num_depots < 1 || side * side != num_depots) {
    throw std::invalid_argument("grid_segment: depot count must be a perfect square");
  }
  const double cw = bounds.width / side;
  const double ch = bounds.height / side;
  std::vector<Point2D> depots;
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) depots.emplace_back((col + 0.5) * cw, (row + 0.5) * ch);
  }
  return ServiceMap(MapKind::grid, bounds, std::move(depots), neighbor_count);
}

nlohmann::json to_json(const ServiceMap& map) {
  nlohmann::json j;
  j["kind"] = to_string(map.kind());
  j["bounds"] = {{"width", map.bounds().width}, {"height", map.bounds().height}};
  auto& depots = j["depots"] = nlohmann::json::array();
  for (const auto& d : map.depots()) depots.push_back({d.x(), d.y()});
  j["adjacency"] = map.graph().adjacency;
  j["action_neighbors"] = map.graph().nearest;
  return j;
}

}  // namespace mdd
