#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ktc/cluster.hpp"
#include "ktc/kernel_matrix.hpp"
#include "ktc/vecset.hpp"

namespace ktc {

/// Bag-of-word-embeddings histogram: h[i] counts the document's token
/// vectors assigned to cluster i.
struct BoweHistogram {
    std::string doc_id;
    std::vector<int32_t> h;
};

BoweHistogram build_histogram(const DocTokenVectors& doc, const Codebook& codebook);

/// Rank-correlation (PQ) kernel between two count histograms:
/// sum over ordered pairs (i,j), i != j, of sign(h_i - h_j) * sign(g_i - g_j),
/// i.e. 2(P - Q) over unordered pairs. Exact integers, O(k log k) via
/// merge-sort inversion counting with three-way tie handling.
int64_t pq_kernel_value(std::span<const int32_t> h, std::span<const int32_t> g);

/// Square PQ-kernel matrix. Normalization maps K_ij to K_ij/sqrt(K_ii K_jj);
/// constant histograms (K_ii = 0) get unit self-similarity and zero
/// cross-similarity.
KernelMatrix pq_matrix(const std::vector<BoweHistogram>& histograms, bool normalize,
                       int jobs);

KernelMatrix pq_cross(const std::vector<BoweHistogram>& rows,
                      const std::vector<BoweHistogram>& cols, bool normalize, int jobs);

/// JSONL: {"doc_id": ..., "h": [...]} per line.
void save_histograms(const std::filesystem::path& path,
                     const std::vector<BoweHistogram>& histograms);
std::vector<BoweHistogram> load_histograms(const std::filesystem::path& path);

} // namespace ktc
