#include "ktc/cluster.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "ktc/error.hpp"
#include "ktc/rng.hpp"
#include "ktc/simd.hpp"

namespace ktc {

namespace {

constexpr int kMaxLloydIterations = 300;

double center_distance_sq(const VecSet& v, size_t i, const double* c, int dim) {
    return simd::l2sq(v.row(i), c, static_cast<size_t>(dim));
}

// argmin over centers of squared Euclidean distance, ties to lowest index.
size_t nearest_euclidean(const double* x, const std::vector<double>& centers, int k, int dim) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
        const double d = simd::l2sq(x, centers.data() + static_cast<size_t>(c) * dim,
                                    static_cast<size_t>(dim));
        if (d < best_d) {
            best_d = d;
            best = static_cast<size_t>(c);
        }
    }
    return best;
}

// argmax over centers of cosine similarity, ties to lowest index.
size_t nearest_cosine(const double* x, double x_norm, const std::vector<double>& centers,
                      int k, int dim) {
    size_t best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
        double xw, ww;
        simd::dot_norm(x, centers.data() + static_cast<size_t>(c) * dim,
                       static_cast<size_t>(dim), xw, ww);
        const double s = xw / (x_norm * std::sqrt(ww));
        if (s > best_s) {
            best_s = s;
            best = static_cast<size_t>(c);
        }
    }
    return best;
}

double vec_norm(const double* x, int dim) {
    return std::sqrt(simd::dot(x, x, static_cast<size_t>(dim)));
}

void require_nonzero_norms(const VecSet& v) {
    for (size_t i = 0; i < v.count(); ++i)
        if (vec_norm(v.row(i), v.dim) == 0.0)
            raise(Errc::ZeroNormVector,
                  "vector " + std::to_string(i) + " has zero norm under cosine metric");
}

} // namespace

const char* cluster_method_name(ClusterMethod m) {
    return m == ClusterMethod::KMeans ? "kmeans" : "som";
}

const char* assign_metric_name(AssignMetric m) {
    return m == AssignMetric::Euclidean ? "euclidean" : "cosine";
}

std::pair<int, int> som_default_grid(int k) {
    int best_c = 1;
    for (int c = 1; c * c <= k; ++c)
        if (k % c == 0) best_c = c;
    return {k / best_c, best_c};
}

Codebook kmeans_fit(const VecSet& vectors, int k, uint64_t seed, KmeansStats* stats) {
    const size_t n = vectors.count();
    const int dim = vectors.dim;
    if (k < 1) raise(Errc::InvalidConfig, "k must be >= 1");
    if (n < static_cast<size_t>(k))
        raise(Errc::TooFewVectors, std::to_string(n) + " vectors for k=" + std::to_string(k));

    Rng rng(seed);
    std::vector<double> centers(static_cast<size_t>(k) * dim);

    // k-means++: first center uniform, then proportional to squared
    // distance from the nearest chosen center.
    std::memcpy(centers.data(), vectors.row(rng.below(n)), sizeof(double) * dim);
    std::vector<double> d2(n);
    for (size_t i = 0; i < n; ++i) d2[i] = center_distance_sq(vectors, i, centers.data(), dim);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) total += d2[i];
        size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        double* dst = centers.data() + static_cast<size_t>(c) * dim;
        std::memcpy(dst, vectors.row(pick), sizeof(double) * dim);
        for (size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], center_distance_sq(vectors, i, dst, dim));
    }

    std::vector<uint32_t> assign_idx(n, std::numeric_limits<uint32_t>::max());
    std::vector<double> sums(static_cast<size_t>(k) * dim);
    std::vector<size_t> counts(static_cast<size_t>(k));
    KmeansStats local;

    for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const size_t a = nearest_euclidean(vectors.row(i), centers, k, dim);
            objective += center_distance_sq(vectors, i,
                                            centers.data() + a * static_cast<size_t>(dim), dim);
            if (a != assign_idx[i]) {
                assign_idx[i] = static_cast<uint32_t>(a);
                changed = true;
            }
        }
        local.objective_per_iter.push_back(objective);
        local.iterations = iter + 1;
        if (!changed) {
            local.converged = true;
            break;
        }

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (size_t i = 0; i < n; ++i) {
            const size_t a = assign_idx[i];
            simd::axpy(1.0, vectors.row(i), sums.data() + a * static_cast<size_t>(dim),
                       static_cast<size_t>(dim));
            counts[a] += 1;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[c]);
            double* dst = centers.data() + static_cast<size_t>(c) * dim;
            const double* src = sums.data() + static_cast<size_t>(c) * dim;
            for (int j = 0; j < dim; ++j) dst[j] = src[j] * inv;
        }
        // Re-seed empty clusters to the point farthest from its center.
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            size_t far = 0;
            double far_d = -1.0;
            for (size_t i = 0; i < n; ++i) {
                if (counts[assign_idx[i]] <= 1) continue; // keep donors non-empty
                const double d = center_distance_sq(
                    vectors, i, centers.data() + assign_idx[i] * static_cast<size_t>(dim),
                    dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far_d < 0.0) continue;
            counts[assign_idx[far]] -= 1;
            assign_idx[far] = static_cast<uint32_t>(c);
            counts[c] = 1;
            std::memcpy(centers.data() + static_cast<size_t>(c) * dim, vectors.row(far),
                        sizeof(double) * dim);
        }
    }

    if (stats) *stats = std::move(local);

    Codebook cb;
    cb.method = ClusterMethod::KMeans;
    cb.metric = AssignMetric::Euclidean;
    cb.k = k;
    cb.dim = dim;
    cb.seed = seed;
    cb.centers = std::move(centers);
    return cb;
}

Codebook som_fit(const VecSet& vectors, const SomConfig& config) {
    const size_t n = vectors.count();
    const int dim = vectors.dim;
    const int k = config.k;
    if (k < 1) raise(Errc::InvalidConfig, "k must be >= 1");
    if (config.learning_rate <= 0.0) raise(Errc::InvalidConfig, "learning rate must be > 0");
    if (config.epochs < 1) raise(Errc::InvalidConfig, "epochs must be >= 1");
    if (n < static_cast<size_t>(k))
        raise(Errc::TooFewVectors, std::to_string(n) + " vectors for k=" + std::to_string(k));

    int rows = config.grid_rows, cols = config.grid_cols;
    if (rows <= 0 || cols <= 0) std::tie(rows, cols) = som_default_grid(k);
    if (rows * cols != k)
        raise(Errc::InvalidConfig, "grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                       " does not tile k=" + std::to_string(k));

    require_nonzero_norms(vectors);

    Rng rng(config.seed);
    std::vector<double> weights(static_cast<size_t>(k) * dim);
    const std::vector<size_t> init = rng.sample_distinct(n, static_cast<size_t>(k));
    for (int u = 0; u < k; ++u)
        std::memcpy(weights.data() + static_cast<size_t>(u) * dim, vectors.row(init[u]),
                    sizeof(double) * dim);

    std::vector<double> x_norm(n);
    for (size_t i = 0; i < n; ++i) x_norm[i] = vec_norm(vectors.row(i), dim);

    const double radius_start =
        config.radius_start > 0.0 ? config.radius_start : std::max(rows, cols) / 2.0;
    const double radius_end = config.radius_end;

    // Neighborhood factors below this threshold are skipped; with the
    // Gaussian kernel that bounds the update radius per epoch.
    constexpr double kThetaCutoff = 1e-12;

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double t = config.epochs > 1
                             ? static_cast<double>(epoch) / (config.epochs - 1)
                             : 0.0;
        const double sigma = radius_start + (radius_end - radius_start) * t;
        const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
        const int reach = static_cast<int>(
            std::ceil(std::sqrt(std::log(1.0 / kThetaCutoff) / inv_two_sigma_sq)));

        rng.shuffle(order);
        for (size_t pos = 0; pos < n; ++pos) {
            const size_t i = order[pos];
            const double* x = vectors.row(i);
            const size_t bmu = nearest_cosine(x, x_norm[i], weights, k, dim);
            const int br = static_cast<int>(bmu) / cols;
            const int bc = static_cast<int>(bmu) % cols;
            const int r_lo = std::max(0, br - reach), r_hi = std::min(rows - 1, br + reach);
            const int c_lo = std::max(0, bc - reach), c_hi = std::min(cols - 1, bc + reach);
            for (int r = r_lo; r <= r_hi; ++r) {
                for (int c = c_lo; c <= c_hi; ++c) {
                    const double grid_d2 = static_cast<double>((r - br) * (r - br) +
                                                               (c - bc) * (c - bc));
                    const double theta = std::exp(-grid_d2 * inv_two_sigma_sq);
                    if (theta < kThetaCutoff) continue;
                    double* w = weights.data() + (static_cast<size_t>(r) * cols + c) * dim;
                    simd::lerp_toward(w, x, config.learning_rate * theta,
                                      static_cast<size_t>(dim));
                }
            }
        }
    }

    Codebook cb;
    cb.method = ClusterMethod::Som;
    cb.metric = AssignMetric::Cosine;
    cb.k = k;
    cb.dim = dim;
    cb.grid_rows = rows;
    cb.grid_cols = cols;
    cb.seed = config.seed;
    cb.centers = std::move(weights);
    return cb;
}

size_t assign(const Codebook& codebook, const double* v, int dim) {
    if (dim != codebook.dim)
        raise(Errc::DimMismatch, "vector dim " + std::to_string(dim) + " vs codebook dim " +
                                     std::to_string(codebook.dim));
    if (codebook.metric == AssignMetric::Euclidean)
        return nearest_euclidean(v, codebook.centers, codebook.k, codebook.dim);
    const double norm = vec_norm(v, dim);
    if (norm == 0.0) raise(Errc::ZeroNormVector, "zero vector under cosine metric");
    return nearest_cosine(v, norm, codebook.centers, codebook.k, codebook.dim);
}

std::vector<uint32_t> assign_all(const Codebook& codebook, const VecSet& vectors, int jobs) {
    const size_t n = vectors.count();
    std::vector<uint32_t> out(n);
    if (n == 0) return out;
    const size_t workers = jobs > 1 ? std::min<size_t>(static_cast<size_t>(jobs), n) : 1;
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i)
            out[i] = static_cast<uint32_t>(assign(codebook, vectors.row(i), vectors.dim));
        return out;
    }
    std::atomic<size_t> next{0};
    constexpr size_t kBlock = 256;
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            try {
                for (;;) {
                    const size_t lo = next.fetch_add(kBlock);
                    if (lo >= n) return;
                    const size_t hi = std::min(n, lo + kBlock);
                    for (size_t i = lo; i < hi; ++i)
                        out[i] = static_cast<uint32_t>(
                            assign(codebook, vectors.row(i), vectors.dim));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& w : pool) w.join();
    if (error) std::rethrow_exception(error);
    return out;
}

double zipf_l1_divergence(const std::vector<size_t>& sizes_sorted) {
    const size_t k = sizes_sorted.size();
    if (k == 0) return 0.0;
    size_t total = 0;
    for (size_t s : sizes_sorted) total += s;
    if (total == 0) return 0.0;
    double harmonic = 0.0;
    for (size_t r = 1; r <= k; ++r) harmonic += 1.0 / static_cast<double>(r);
    double l1 = 0.0;
    for (size_t r = 1; r <= k; ++r) {
        const double p = static_cast<double>(sizes_sorted[r - 1]) / static_cast<double>(total);
        const double q = (1.0 / static_cast<double>(r)) / harmonic;
        l1 += std::abs(p - q);
    }
    return l1;
}

ClusterSizeReport cluster_size_report(const Codebook& codebook, const VecSet& vectors,
                                      int jobs) {
    ClusterSizeReport report;
    std::vector<size_t> sizes(static_cast<size_t>(codebook.k), 0);
    const std::vector<uint32_t> assigned = assign_all(codebook, vectors, jobs);
    for (uint32_t a : assigned) sizes[a] += 1;
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    report.total = assigned.size();
    report.sizes_sorted = std::move(sizes);
    report.zipf_l1 = zipf_l1_divergence(report.sizes_sorted);
    return report;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write codebook: " + path.string());
    nlohmann::json j;
    j["method"] = cluster_method_name(codebook.method);
    j["k"] = codebook.k;
    j["dim"] = codebook.dim;
    j["grid_rows"] = codebook.grid_rows;
    j["grid_cols"] = codebook.grid_cols;
    j["metric"] = assign_metric_name(codebook.metric);
    j["seed"] = codebook.seed;
    out << j.dump() << '\n';
    // Center block: k*dim f64le, same numeric layout as the kernel cache.
    std::string block;
    block.reserve(codebook.centers.size() * 8);
    for (double v : codebook.centers) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int b = 0; b < 8; ++b)
            block.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open codebook: " + path.string());
    std::string header;
    if (!std::getline(in, header))
        raise(Errc::FormatError, "codebook missing header: " + path.string());
    nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
    if (j.is_discarded()) raise(Errc::FormatError, "codebook header malformed: " + path.string());

    Codebook cb;
    const std::string method = j.at("method").get<std::string>();
    cb.method = method == "som" ? ClusterMethod::Som : ClusterMethod::KMeans;
    cb.k = j.at("k").get<int>();
    cb.dim = j.at("dim").get<int>();
    cb.grid_rows = j.value("grid_rows", 0);
    cb.grid_cols = j.value("grid_cols", 0);
    cb.metric = j.at("metric").get<std::string>() == "cosine" ? AssignMetric::Cosine
                                                              : AssignMetric::Euclidean;
    cb.seed = j.value("seed", 0ull);

    const size_t need = static_cast<size_t>(cb.k) * cb.dim;
    std::string block((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (block.size() != need * 8)
        raise(Errc::FormatError, "codebook center block size mismatch: " + path.string());
    cb.centers.resize(need);
    const auto* p = reinterpret_cast<const unsigned char*>(block.data());
    for (size_t i = 0; i < need; ++i) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(p[i * 8 + b]) << (8 * b);
        std::memcpy(&cb.centers[i], &bits, 8);
    }
    return cb;
}

void write_cluster_report_csv(const std::filesystem::path& path,
                              const ClusterSizeReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write report: " + path.string());
    out << "rank,size,p_r,q_r\n";
    const size_t k = report.sizes_sorted.size();
    double harmonic = 0.0;
    for (size_t r = 1; r <= k; ++r) harmonic += 1.0 / static_cast<double>(r);
    char buf[64];
    for (size_t r = 1; r <= k; ++r) {
        const double p = report.total
                             ? static_cast<double>(report.sizes_sorted[r - 1]) /
                                   static_cast<double>(report.total)
                             : 0.0;
        const double q = (1.0 / static_cast<double>(r)) / harmonic;
        out << r << ',' << report.sizes_sorted[r - 1] << ',';
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p, q);
        out << buf;
    }
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

VecSet subsample_pool(const VecSet& vectors, size_t cap, uint64_t seed) {
    const size_t n = vectors.count();
    if (n <= cap) return vectors;
    Rng rng(seed);
    std::vector<size_t> keep = rng.sample_distinct(n, cap);
    std::sort(keep.begin(), keep.end());
    VecSet out;
    out.dim = vectors.dim;
    out.data.reserve(cap * static_cast<size_t>(vectors.dim));
    for (size_t i : keep) out.append(vectors.row(i));
    return out;
}

} // namespace ktc
