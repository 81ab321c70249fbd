#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktc/vecset.hpp"

namespace ktc {

enum class ClusterMethod { KMeans, Som };
enum class AssignMetric { Euclidean, Cosine };

const char* cluster_method_name(ClusterMethod m);
const char* assign_metric_name(AssignMetric m);

/// k cluster representatives in embedding space. k-means codebooks assign
/// by Euclidean distance; SOM codebooks by cosine similarity.
struct Codebook {
    ClusterMethod method = ClusterMethod::KMeans;
    int k = 0;
    int dim = 0;
    int grid_rows = 0; // SOM only
    int grid_cols = 0;
    AssignMetric metric = AssignMetric::Euclidean;
    uint64_t seed = 0;
    std::vector<double> centers; // k * dim row-major

    const double* center(size_t i) const {
        return centers.data() + i * static_cast<size_t>(dim);
    }
    double* center(size_t i) { return centers.data() + i * static_cast<size_t>(dim); }
};

struct SomConfig {
    int k = 500;
    int grid_rows = 0; // 0 = derive near-square factor grid from k
    int grid_cols = 0;
    double learning_rate = 0.25;
    int epochs = 200;
    uint64_t seed = 0;
    double radius_start = -1.0; // < 0 = max(grid_rows, grid_cols) / 2
    double radius_end = 0.5;
};

/// Most-square factor pair (rows, cols) with rows * cols = k, rows >= cols.
std::pair<int, int> som_default_grid(int k);

struct KmeansStats {
    std::vector<double> objective_per_iter; // sum of squared distances
    int iterations = 0;
    bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments are
/// stable or after 300 iterations; empty clusters are re-seeded to the
/// point farthest from its assigned center. Deterministic in `seed`.
Codebook kmeans_fit(const VecSet& vectors, int k, uint64_t seed,
                    KmeansStats* stats = nullptr);

/// Kohonen map fit: unit weights start at k distinct sample vectors; each
/// epoch presents every vector in a reshuffled order; BMU by maximal cosine
/// similarity; update w += lr * theta * (x - w) with a Gaussian neighborhood
/// over grid distance whose radius decays linearly across epochs.
Codebook som_fit(const VecSet& vectors, const SomConfig& config);

/// Nearest center index (metric per codebook). Ties break to the lowest
/// index.
size_t assign(const Codebook& codebook, const double* v, int dim);

std::vector<uint32_t> assign_all(const Codebook& codebook, const VecSet& vectors, int jobs);

struct ClusterSizeReport {
    std::vector<size_t> sizes_sorted; // descending occupancy
    double zipf_l1 = 0.0;
    size_t total = 0;
};

/// Occupancy counts plus L1 divergence from the Zipf reference
/// q_r = (1/r) / H_k over descending-rank occupancies p_r.
ClusterSizeReport cluster_size_report(const Codebook& codebook, const VecSet& vectors,
                                      int jobs);

/// L1 distance between sizes (descending) normalized to probabilities and
/// the rank-r Zipf reference.
double zipf_l1_divergence(const std::vector<size_t>& sizes_sorted);

void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

void write_cluster_report_csv(const std::filesystem::path& path,
                              const ClusterSizeReport& report);

/// Uniform subsample without replacement down to `cap` rows (identity when
/// within the cap). Memory guard for the clustering pool.
VecSet subsample_pool(const VecSet& vectors, size_t cap, uint64_t seed);

} // namespace ktc
