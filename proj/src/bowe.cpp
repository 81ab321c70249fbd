#include "ktc/bowe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "ktc/error.hpp"

namespace ktc {

namespace {

// Q = strict inversions of g after sorting by (h asc, g asc). Within an
// h-tie group g is ascending, so counted inversions are exactly the
// discordant pairs. Merge sort; equal elements are not inversions.
int64_t count_inversions(std::vector<int32_t>& g, std::vector<int32_t>& tmp, size_t lo,
                         size_t hi) {
    if (hi - lo < 2) return 0;
    const size_t mid = (lo + hi) / 2;
    int64_t inv = count_inversions(g, tmp, lo, mid) + count_inversions(g, tmp, mid, hi);
    size_t i = lo, j = mid, o = lo;
    while (i < mid && j < hi) {
        if (g[j] < g[i]) {
            inv += static_cast<int64_t>(mid - i);
            tmp[o++] = g[j++];
        } else {
            tmp[o++] = g[i++];
        }
    }
    while (i < mid) tmp[o++] = g[i++];
    while (j < hi) tmp[o++] = g[j++];
    std::copy(tmp.begin() + static_cast<ptrdiff_t>(lo), tmp.begin() + static_cast<ptrdiff_t>(o),
              g.begin() + static_cast<ptrdiff_t>(lo));
    return inv;
}

int64_t tie_pairs(int64_t run) { return run * (run - 1) / 2; }

} // namespace

BoweHistogram build_histogram(const DocTokenVectors& doc, const Codebook& codebook) {
    BoweHistogram out;
    out.doc_id = doc.doc_id;
    out.h.assign(static_cast<size_t>(codebook.k), 0);
    const size_t n = doc.vectors.count();
    if (n > 0 && doc.vectors.dim != codebook.dim)
        raise(Errc::DimMismatch, "token vectors dim " + std::to_string(doc.vectors.dim) +
                                     " vs codebook dim " + std::to_string(codebook.dim));
    for (size_t i = 0; i < n; ++i)
        out.h[assign(codebook, doc.vectors.row(i), doc.vectors.dim)] += 1;
    return out;
}

int64_t pq_kernel_value(std::span<const int32_t> h, std::span<const int32_t> g) {
    if (h.size() != g.size())
        raise(Errc::DimMismatch, "histogram lengths differ: " + std::to_string(h.size()) +
                                     " vs " + std::to_string(g.size()));
    const size_t k = h.size();
    if (k < 2) return 0;

    std::vector<uint32_t> order(k);
    for (size_t i = 0; i < k; ++i) order[i] = static_cast<uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (h[a] != h[b]) return h[a] < h[b];
        return g[a] < g[b];
    });

    const int64_t n0 = tie_pairs(static_cast<int64_t>(k)); // all unordered pairs
    int64_t n1 = 0;                                        // h-tied pairs
    int64_t n3 = 0;                                        // (h,g)-tied pairs
    {
        size_t i = 0;
        while (i < k) {
            size_t j = i;
            while (j < k && h[order[j]] == h[order[i]]) ++j;
            n1 += tie_pairs(static_cast<int64_t>(j - i));
            size_t a = i;
            while (a < j) {
                size_t b = a;
                while (b < j && g[order[b]] == g[order[a]]) ++b;
                n3 += tie_pairs(static_cast<int64_t>(b - a));
                a = b;
            }
            i = j;
        }
    }
    int64_t n2 = 0; // g-tied pairs
    {
        std::vector<int32_t> gs(g.begin(), g.end());
        std::sort(gs.begin(), gs.end());
        size_t i = 0;
        while (i < k) {
            size_t j = i;
            while (j < k && gs[j] == gs[i]) ++j;
            n2 += tie_pairs(static_cast<int64_t>(j - i));
            i = j;
        }
    }

    std::vector<int32_t> gseq(k);
    for (size_t i = 0; i < k; ++i) gseq[i] = g[order[i]];
    std::vector<int32_t> tmp(k);
    const int64_t discordant = count_inversions(gseq, tmp, 0, k);

    // concordant = n0 - n1 - n2 + n3 - discordant
    return 2 * (n0 - n1 - n2 + n3 - 2 * discordant);
}

namespace {

void run_rows(size_t n_rows, int jobs, const std::function<void(size_t)>& row_fn) {
    if (jobs <= 1) {
        for (size_t r = 0; r < n_rows; ++r) row_fn(r);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const size_t count = std::min<size_t>(static_cast<size_t>(jobs), n_rows);
    workers.reserve(count);
    for (size_t t = 0; t < count; ++t) {
        workers.emplace_back([&] {
            for (;;) {
                const size_t r = next.fetch_add(1);
                if (r >= n_rows) return;
                row_fn(r);
            }
        });
    }
    for (auto& w : workers) w.join();
}

std::vector<std::string> histogram_ids(const std::vector<BoweHistogram>& hs) {
    std::vector<std::string> ids;
    ids.reserve(hs.size());
    for (const auto& h : hs) ids.push_back(h.doc_id);
    return ids;
}

void check_uniform_length(const std::vector<BoweHistogram>& hs) {
    for (const auto& h : hs)
        if (h.h.size() != hs.front().h.size())
            raise(Errc::DimMismatch, "histogram lengths differ within set");
}

// Normalization with the degenerate rule: a constant histogram has
// pq(h,h) = 0; its row/column becomes 0 off-diagonal with K_ii = 1.
void normalize_square_pq(KernelMatrix& k, const std::vector<int64_t>& self) {
    const size_t n = k.rows();
    std::vector<double> scale(n);
    for (size_t i = 0; i < n; ++i)
        scale[i] = self[i] > 0 ? 1.0 / std::sqrt(static_cast<double>(self[i])) : 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) k.at(i, j) *= scale[i] * scale[j];
    for (size_t i = 0; i < n; ++i) k.at(i, i) = 1.0;
}

} // namespace

KernelMatrix pq_matrix(const std::vector<BoweHistogram>& histograms, bool normalize,
                       int jobs) {
    if (histograms.empty()) raise(Errc::InvalidConfig, "no histograms");
    check_uniform_length(histograms);
    KernelMatrix k = KernelMatrix::zeros(histogram_ids(histograms), histogram_ids(histograms));
    const size_t n = histograms.size();
    std::vector<int64_t> self(n);
    run_rows(n, jobs, [&](size_t r) {
        for (size_t c = 0; c < r; ++c) {
            const double v =
                static_cast<double>(pq_kernel_value(histograms[r].h, histograms[c].h));
            k.at(r, c) = v;
            k.at(c, r) = v;
        }
        self[r] = pq_kernel_value(histograms[r].h, histograms[r].h);
        k.at(r, r) = static_cast<double>(self[r]);
    });
    if (normalize) normalize_square_pq(k, self);
    return k;
}

KernelMatrix pq_cross(const std::vector<BoweHistogram>& rows,
                      const std::vector<BoweHistogram>& cols, bool normalize, int jobs) {
    if (rows.empty() || cols.empty()) raise(Errc::InvalidConfig, "no histograms");
    check_uniform_length(rows);
    check_uniform_length(cols);
    if (rows.front().h.size() != cols.front().h.size())
        raise(Errc::DimMismatch, "row/col histogram lengths differ");

    KernelMatrix k = KernelMatrix::zeros(histogram_ids(rows), histogram_ids(cols));
    run_rows(rows.size(), jobs, [&](size_t r) {
        for (size_t c = 0; c < cols.size(); ++c)
            k.at(r, c) = static_cast<double>(pq_kernel_value(rows[r].h, cols[c].h));
    });
    if (normalize) {
        std::vector<double> rs(rows.size()), cs(cols.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            const int64_t s = pq_kernel_value(rows[r].h, rows[r].h);
            rs[r] = s > 0 ? 1.0 / std::sqrt(static_cast<double>(s)) : 0.0;
        }
        for (size_t c = 0; c < cols.size(); ++c) {
            const int64_t s = pq_kernel_value(cols[c].h, cols[c].h);
            cs[c] = s > 0 ? 1.0 / std::sqrt(static_cast<double>(s)) : 0.0;
        }
        for (size_t r = 0; r < rows.size(); ++r)
            for (size_t c = 0; c < cols.size(); ++c) k.at(r, c) *= rs[r] * cs[c];
    }
    return k;
}

void save_histograms(const std::filesystem::path& path,
                     const std::vector<BoweHistogram>& histograms) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write histogram file: " + path.string());
    for (const auto& h : histograms) {
        nlohmann::json j;
        j["doc_id"] = h.doc_id;
        j["h"] = h.h;
        out << j.dump() << '\n';
    }
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

std::vector<BoweHistogram> load_histograms(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open histogram file: " + path.string());
    std::vector<BoweHistogram> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("doc_id") || !j.contains("h"))
            raise(Errc::FormatError,
                  path.string() + ":" + std::to_string(line_no) + ": bad histogram line");
        BoweHistogram h;
        h.doc_id = j["doc_id"].get<std::string>();
        h.h = j["h"].get<std::vector<int32_t>>();
        if (!out.empty() && h.h.size() != out.front().h.size())
            raise(Errc::FormatError, path.string() + ":" + std::to_string(line_no) +
                                         ": histogram length differs from first line");
        out.push_back(std::move(h));
    }
    return out;
}

} // namespace ktc
