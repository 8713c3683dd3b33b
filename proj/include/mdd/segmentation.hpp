#pragma once

#include "mdd/core.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace mdd {

enum class MapKind { kmeans, grid };

std::string to_string(MapKind kind);

/// Area relations derived from depot positions.
struct AreaGraph {
  /// For each area, its `k` nearest other areas, nearest first (ties by lower index). These are
  /// the move targets of the flight-range action set.
  std::vector<std::vector<int>> nearest;
  /// Symmetric closure of `nearest`, each list sorted ascending.
  std::vector<std::vector<int>> adjacency;
};

/// Depots plus the total assignment of map points to service areas. K-means maps assign by
/// nearest depot (the perpendicular-bisector cells); grid maps by cell containment. Area index n
/// is always the area of depot n.
class ServiceMap {
 public:
  ServiceMap() = default;
  ServiceMap(MapKind kind, Bounds bounds, std::vector<Point2D> depots, int neighbor_count);

  MapKind kind() const { return kind_; }
  const Bounds& bounds() const { return bounds_; }
  int size() const { return static_cast<int>(depots_.size()); }
  const std::vector<Point2D>& depots() const { return depots_; }
  const Point2D& depot(int area) const { return depots_[static_cast<std::size_t>(area)]; }
  const AreaGraph& graph() const { return graph_; }
  int neighbor_count() const { return neighbor_count_; }

  int area_of(const Point2D& p) const;

  /// Area targets of the action set for a drone in `area`: index 0 is the area itself.
  std::vector<int> action_targets(int area) const;

 private:
  MapKind kind_ = MapKind::kmeans;
  Bounds bounds_;
  std::vector<Point2D> depots_;
  AreaGraph graph_;
  int neighbor_count_ = 0;
  int grid_side_ = 0;
};

/// k nearest depots per area, symmetrised. Throws std::invalid_argument if k >= number of areas.
AreaGraph area_adjacency(std::span<const Point2D> depots, int k_neighbors);
inline AreaGraph area_adjacency(const ServiceMap& map, int k_neighbors) {
  return area_adjacency(map.depots(), k_neighbors);
}

struct KMeansResult {
  std::vector<Point2D> centers;
  std::vector<int> assignment;
  /// Within-cluster sum of squared distances after every assignment and every update step.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// Lloyd iterations from randomly chosen distinct data points until the assignment is stable
/// (capped at `max_iterations`). Empty clusters are re-seeded at the point farthest from its center.
KMeansResult kmeans(std::span<const Point2D> points, int clusters, std::uint64_t seed,
                    int max_iterations = 500);

ServiceMap kmeans_segment(std::span<const Point2D> points, int num_depots, std::uint64_t seed,
                          const Bounds& bounds, int neighbor_count);

/// sqrt(N) x sqrt(N) equal cells, row-major from the lower-left corner, depots at cell centers.
ServiceMap grid_segment(const Bounds& bounds, int num_depots, int neighbor_count);

nlohmann::json to_json(const ServiceMap& map);

}  // namespace mdd
