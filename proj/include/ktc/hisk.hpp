#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ktc/kernel_matrix.hpp"

namespace ktc {

/// Sparse character-n-gram histogram. Keys are UTF-8 encodings of exactly
/// n Unicode scalar values; counts are occurrence counts (always >= 1).
struct NgramHistogram {
    int n = 0;
    std::unordered_map<std::string, int64_t> counts;

    int64_t total() const;
};

/// Counts every contiguous window of n scalar values of `text`.
/// Shorter-than-n input yields an empty histogram.
NgramHistogram extract_ngrams(std::string_view text, int n);

/// Histogram-intersection value: sum over n in n_range, over shared
/// n-grams g, of min(#(x,g), #(y,g)). Exact integer arithmetic.
int64_t hisk_value(std::string_view x, std::string_view y, const std::vector<int>& n_range);

/// Self-similarity in closed form: min(c,c)=c, so k(x,x) is the total
/// window count sum over n in n_range.
int64_t hisk_self(std::string_view x, const std::vector<int>& n_range);

/// Square intersection-kernel matrix over `docs`. Lower triangle computed
/// and mirrored; per-document histograms built once. Entries are exact
/// integer counts converted to doubles (optionally normalized).
KernelMatrix hisk_matrix(const std::vector<std::string>& ids,
                         const std::vector<std::string>& docs,
                         const std::vector<int>& n_range, bool normalize, int jobs);

/// rows x cols block for distinct document sets (e.g. test x train). When
/// normalizing, self-similarities of both sides supply the scale.
KernelMatrix hisk_cross(const std::vector<std::string>& row_ids,
                        const std::vector<std::string>& row_docs,
                        const std::vector<std::string>& col_ids,
                        const std::vector<std::string>& col_docs,
                        const std::vector<int>& n_range, bool normalize, int jobs);

/// K'_ij = K_ij / sqrt(K_ii K_jj), square matrices only.
/// Any K_ii <= 0 is DegenerateDiagonal.
void normalize_kernel(KernelMatrix& k);

inline const std::vector<int>& default_ngram_range() {
    static const std::vector<int> r{3, 4, 5};
    return r;
}

} // namespace ktc
