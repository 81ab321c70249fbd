#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ktc {

/// Flat row-major set of equal-length real vectors.
struct VecSet {
    int dim = 0;
    std::vector<double> data;

    size_t count() const { return dim > 0 ? data.size() / static_cast<size_t>(dim) : 0; }
    const double* row(size_t i) const { return data.data() + i * static_cast<size_t>(dim); }
    double* row(size_t i) { return data.data() + i * static_cast<size_t>(dim); }

    void append(const double* v) { data.insert(data.end(), v, v + dim); }
};

/// Ordered per-token vectors of one document.
struct DocTokenVectors {
    std::string doc_id;
    VecSet vectors;
};

} // namespace ktc
