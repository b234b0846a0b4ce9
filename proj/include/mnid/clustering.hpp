#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "mnid/core.hpp"
#include "mnid/ingest.hpp"

namespace mnid {

struct ClusterSet {
  std::size_t dim = 0;
  std::vector<std::vector<RowIndex>> members;  // ascending rows per cluster
  std::map<RowIndex, std::size_t> assignment;
  std::vector<double> centroids;  // k x dim
  double inertia = 0.0;
  // Inertia after every Lloyd update (k-means only).
  std::vector<double> inertia_trace;
  std::size_t iterations = 0;

  std::size_t k() const { return members.size(); }
  std::span<const double> centroid(std::size_t c) const {
    return {centroids.data() + c * dim, dim};
  }
};

double squared_distance(std::span<const double> a, std::span<const float> b);

// Fills centroids (member means) and inertia from `members`.
void recompute_geometry(ClusterSet& cs, const EmbeddingMatrix& X);

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

// k-means++ seeding then Lloyd iterations until the largest centroid shift
// drops below tol. Input order does not matter: rows are sorted first.
ClusterSet kmeans(std::span<const RowIndex> rows, const EmbeddingMatrix& X, std::size_t k,
                  std::uint64_t seed, const KMeansOptions& opts = {});

// Lowest-inertia result over `restarts` independently seeded runs.
ClusterSet kmeans_best_of(std::span<const RowIndex> rows, const EmbeddingMatrix& X,
                          std::size_t k, std::uint64_t seed, std::size_t restarts,
                          const KMeansOptions& opts = {});

enum class Linkage { Average, Complete };

std::string_view linkage_name(Linkage l);
Linkage parse_linkage(std::string_view name);

// Bottom-up merging on Euclidean distance until k clusters remain. Ties go
// to the pair whose smallest member rows are lowest.
ClusterSet agglomerative(std::span<const RowIndex> rows, const EmbeddingMatrix& X,
                         std::size_t k, Linkage linkage);

}  // namespace mnid
