#include "mnid/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnid/error.hpp"
#include "mnid/rng.hpp"

namespace mnid {

double squared_distance(std::span<const double> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - double(b[j]);
    s += t * t;
  }
  return s;
}

void recompute_geometry(ClusterSet& cs, const EmbeddingMatrix& X) {
  cs.dim = X.dim;
  cs.centroids.assign(cs.k() * X.dim, 0.0);
  cs.assignment.clear();
  for (std::size_t c = 0; c < cs.k(); ++c) {
    double* mu = cs.centroids.data() + c * X.dim;
    for (RowIndex r : cs.members[c]) {
      const auto x = X.row(r);
      for (std::size_t j = 0; j < X.dim; ++j) mu[j] += double(x[j]);
      cs.assignment[r] = c;
    }
    for (std::size_t j = 0; j < X.dim; ++j) mu[j] /= double(cs.members[c].size());
  }
  cs.inertia = 0.0;
  for (std::size_t c = 0; c < cs.k(); ++c) {
    for (RowIndex r : cs.members[c]) cs.inertia += squared_distance(cs.centroid(c), X.row(r));
  }
}

namespace {

std::vector<RowIndex> sorted_rows(std::span<const RowIndex> rows, const EmbeddingMatrix& X,
                                  std::size_t k) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no points to cluster");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be positive");
  if (k > rows.size()) {
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " exceeds " + std::to_string(rows.size()) + " points");
  }
  std::vector<RowIndex> out(rows.begin(), rows.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error(ErrorCode::InvalidConfig, "duplicate rows in clustering input");
  }
  if (out.back() >= X.rows) throw Error(ErrorCode::UnknownPoint, "row " + std::to_string(out.back()));
  return out;
}

void seed_plus_plus(const std::vector<RowIndex>& rows, const EmbeddingMatrix& X, std::size_t k,
                    Rng& rng, std::vector<double>& centroids) {
  const std::size_t n = rows.size();
  const std::size_t d = X.dim;
  centroids.assign(k * d, 0.0);
  auto place = [&](std::size_t c, std::size_t i) {
    const auto x = X.row(rows[i]);
    for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] = double(x[j]);
  };
  place(0, rng.below(n));
  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i) {
    best[i] = squared_distance({centroids.data(), d}, X.row(rows[i]));
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : best) total += v;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (best[i] > 0.0) pick = i;
    }
    if (total <= 0.0) {
      pick = rng.below(n);
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
    }
    place(c, pick);
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], squared_distance({centroids.data() + c * d, d}, X.row(rows[i])));
    }
  }
}

}  // namespace

ClusterSet kmeans(std::span<const RowIndex> input, const EmbeddingMatrix& X, std::size_t k,
                  std::uint64_t seed, const KMeansOptions& opts) {
  const auto rows = sorted_rows(input, X, k);
  const std::size_t n = rows.size();
  const std::size_t d = X.dim;
  Rng rng = Rng::stream(seed, "kmeans");

  std::vector<double> centroids;
  seed_plus_plus(rows, X, k, rng, centroids);

  std::vector<std::size_t> label(n, 0);
  std::vector<std::size_t> count(k, 0);
  std::vector<double> next(k * d);
  ClusterSet cs;
  cs.dim = d;

  auto centroid = [&](const std::vector<double>& cents, std::size_t c) {
    return std::span<const double>(cents.data() + c * d, d);
  };

  for (std::size_t it = 0; it < std::max<std::size_t>(opts.max_iter, 1); ++it) {
    // Assignment, ties to the lowest cluster index.
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = X.row(rows[i]);
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(centroid(centroids, c), x);
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      label[i] = arg;
      ++count[arg];
    }

    // Empty clusters take the point farthest from its current centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] != 0) continue;
      double far = -1.0;
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[label[i]] < 2) continue;
        const double dist = squared_distance(centroid(centroids, label[i]), X.row(rows[i]));
        if (dist > far) {
          far = dist;
          pick = i;
        }
      }
      --count[label[pick]];
      label[pick] = c;
      count[c] = 1;
      const auto x = X.row(rows[pick]);
      for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] = double(x[j]);
    }

    // Update; sums run in row order so results are reproducible.
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = X.row(rows[i]);
      double* mu = next.data() + label[i] * d;
      for (std::size_t j = 0; j < d; ++j) mu[j] += double(x[j]);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        next[c * d + j] /= double(count[c]);
        const double t = next[c * d + j] - centroids[c * d + j];
        s += t * t;
      }
      shift = std::max(shift, std::sqrt(s));
    }
    centroids.swap(next);

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inertia += squared_distance(centroid(centroids, label[i]), X.row(rows[i]));
    }
    cs.inertia_trace.push_back(inertia);
    cs.iterations = it + 1;
    if (shift < opts.tol) break;
  }

  cs.members.assign(k, {});
  for (std::size_t i = 0; i < n; ++i) cs.members[label[i]].push_back(rows[i]);
  recompute_geometry(cs, X);
  return cs;
}

ClusterSet kmeans_best_of(std::span<const RowIndex> rows, const EmbeddingMatrix& X,
                          std::size_t k, std::uint64_t seed, std::size_t restarts,
                          const KMeansOptions& opts) {
  ClusterSet best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    const std::uint64_t s = Rng::stream(seed, "kmeans-restart", r).next_u64();
    auto cs = kmeans(rows, X, k, s, opts);
    if (!have || cs.inertia < best.inertia) {
      best = std::move(cs);
      have = true;
    }
  }
  return best;
}

std::string_view linkage_name(Linkage l) {
  return l == Linkage::Average ? "average" : "complete";
}

Linkage parse_linkage(std::string_view name) {
  if (name == "average") return Linkage::Average;
  if (name == "complete") return Linkage::Complete;
  throw Error(ErrorCode::UnknownMethod, "linkage '" + std::string(name) + "'");
}

ClusterSet agglomerative(std::span<const RowIndex> input, const EmbeddingMatrix& X,
                         std::size_t k, Linkage linkage) {
  const auto rows = sorted_rows(input, X, k);
  const std::size_t n = rows.size();

  // Slot i holds the cluster whose smallest member is rows[i]; merging a < b
  // keeps slot a, so slot order is always smallest-member order.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto a = X.row(rows[i]);
      const auto b = X.row(rows[j]);
      double s = 0.0;
      for (std::size_t t = 0; t < X.dim; ++t) {
        const double u = double(a[t]) - double(b[t]);
        s += u * u;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }
  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::vector<RowIndex>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {rows[i]};

  // Per-slot nearest higher slot, ties to the lowest slot.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> nn_dist(n, kInf);
  std::vector<std::size_t> nn(n, n);
  auto refresh = [&](std::size_t i) {
    nn_dist[i] = kInf;
    nn[i] = n;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (active[j] && dist[i * n + j] < nn_dist[i]) {
        nn_dist[i] = dist[i * n + j];
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t a = n;
    double best = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] < n && nn_dist[i] < best) {
        best = nn_dist[i];
        a = i;
      }
    }
    const std::size_t b = nn[a];

    for (std::size_t t = 0; t < n; ++t) {
      if (!active[t] || t == a || t == b) continue;
      double& ab = dist[a * n + t];
      const double bt = dist[b * n + t];
      if (linkage == Linkage::Average) {
        ab = (double(size[a]) * ab + double(size[b]) * bt) / double(size[a] + size[b]);
      } else {
        ab = std::max(ab, bt);
      }
      dist[t * n + a] = ab;
    }
    active[b] = false;
    size[a] += size[b];
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    std::sort(members[a].begin(), members[a].end());
    members[b].clear();

    refresh(a);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || i == a) continue;
      if (nn[i] == a || nn[i] == b) {
        refresh(i);
      } else if (i < a) {
        const double v = dist[i * n + a];
        if (v < nn_dist[i] || (v == nn_dist[i] && a < nn[i])) {
          nn_dist[i] = v;
          nn[i] = a;
        }
      }
    }
  }

  ClusterSet cs;
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) cs.members.push_back(std::move(members[i]));
  }
  recompute_geometry(cs, X);
  return cs;
}

}  // namespace mnid
