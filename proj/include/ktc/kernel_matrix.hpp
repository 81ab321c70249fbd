#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ktc {

/// Dense similarity matrix in dual form with sample-ID manifests. Square
/// matrices (row_ids == col_ids) are symmetric by construction; cross
/// blocks (e.g. test x train) carry distinct manifests.
struct KernelMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    std::vector<double> values; // row-major, rows() * cols()

    size_t rows() const { return row_ids.size(); }
    size_t cols() const { return col_ids.size(); }
    bool square() const { return row_ids == col_ids; }

    double& at(size_t i, size_t j) { return values[i * cols() + j]; }
    double at(size_t i, size_t j) const { return values[i * cols() + j]; }

    static KernelMatrix zeros(std::vector<std::string> row_ids,
                              std::vector<std::string> col_ids);
};

/// Cache file layout (bit-exact): "KMAT1", u32le rows, u32le cols,
/// rows*cols f64le row-major, then a UTF-8 JSON trailer
/// {"rows":[ids...],"cols":[ids...]} running to end of file.
void save_kmat(const std::filesystem::path& path, const KernelMatrix& k);
KernelMatrix load_kmat(const std::filesystem::path& path);

} // namespace ktc
