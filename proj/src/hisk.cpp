#include "ktc/hisk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "ktc/error.hpp"

namespace ktc {

namespace {

// Decodes UTF-8 to scalar values; invalid bytes become U+FFFD. The
// preprocessing stage upstream already guarantees clean input in the
// normal pipeline, but raw-window counting must not crash on anything.
std::vector<uint32_t> decode_scalars(std::string_view s) {
    std::vector<uint32_t> cps;
    cps.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        if (b0 < 0x80) {
            cps.push_back(b0);
            ++i;
            continue;
        }
        int len;
        uint32_t cp;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            cps.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + static_cast<size_t>(len) > s.size()) {
            cps.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const unsigned char bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!ok) {
            cps.push_back(0xFFFD);
            ++i;
            continue;
        }
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

std::string encode_window(const uint32_t* cps, int n) {
    std::string out;
    for (int k = 0; k < n; ++k) {
        const uint32_t cp = cps[k];
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

// Compact per-document profile for matrix assembly: globally-interned
// n-gram ids with counts, sorted by id so pairwise evaluation is a merge.
struct DocProfile {
    std::vector<uint32_t> gram_ids;
    std::vector<int32_t> gram_counts;
    int64_t self = 0;
};

class GramInterner {
public:
    uint32_t intern(std::string&& key) {
        auto [it, inserted] = map_.try_emplace(std::move(key), next_);
        if (inserted) ++next_;
        return it->second;
    }

private:
    std::unordered_map<std::string, uint32_t> map_;
    uint32_t next_ = 0;
};

DocProfile build_profile(std::string_view doc, const std::vector<int>& n_range,
                         GramInterner& interner) {
    const std::vector<uint32_t> cps = decode_scalars(doc);
    std::unordered_map<uint32_t, int32_t> local;
    int64_t self = 0;
    for (int n : n_range) {
        if (n < 1) raise(Errc::InvalidConfig, "n-gram length must be >= 1");
        if (cps.size() < static_cast<size_t>(n)) continue;
        const size_t windows = cps.size() - static_cast<size_t>(n) + 1;
        self += static_cast<int64_t>(windows);
        for (size_t i = 0; i < windows; ++i)
            local[interner.intern(encode_window(cps.data() + i, n))] += 1;
    }
    DocProfile p;
    p.self = self;
    p.gram_ids.reserve(local.size());
    for (const auto& [id, _] : local) p.gram_ids.push_back(id);
    std::sort(p.gram_ids.begin(), p.gram_ids.end());
    p.gram_counts.resize(p.gram_ids.size());
    for (size_t i = 0; i < p.gram_ids.size(); ++i)
        p.gram_counts[i] = local[p.gram_ids[i]];
    return p;
}

// Sorted-merge intersection; exact 64-bit integer accumulation.
int64_t profile_intersection(const DocProfile& a, const DocProfile& b) {
    int64_t sum = 0;
    size_t i = 0, j = 0;
    const size_t na = a.gram_ids.size(), nb = b.gram_ids.size();
    while (i < na && j < nb) {
        const uint32_t ga = a.gram_ids[i], gb = b.gram_ids[j];
        if (ga < gb) {
            ++i;
        } else if (gb < ga) {
            ++j;
        } else {
            sum += std::min(a.gram_counts[i], b.gram_counts[j]);
            ++i;
            ++j;
        }
    }
    return sum;
}

std::vector<DocProfile> build_profiles(const std::vector<std::string>& docs,
                                       const std::vector<int>& n_range,
                                       GramInterner& interner) {
    std::vector<DocProfile> profiles;
    profiles.reserve(docs.size());
    for (const std::string& d : docs) profiles.push_back(build_profile(d, n_range, interner));
    return profiles;
}

void run_rows(size_t n_rows, int jobs, const std::function<void(size_t)>& row_fn) {
    if (jobs <= 1) {
        for (size_t r = 0; r < n_rows; ++r) row_fn(r);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int count = std::min<size_t>(static_cast<size_t>(jobs), n_rows);
    workers.reserve(count);
    for (int t = 0; t < count; ++t) {
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

} // namespace

int64_t NgramHistogram::total() const {
    int64_t t = 0;
    for (const auto& [_, c] : counts) t += c;
    return t;
}

NgramHistogram extract_ngrams(std::string_view text, int n) {
    if (n < 1) raise(Errc::InvalidConfig, "n-gram length must be >= 1");
    NgramHistogram h;
    h.n = n;
    const std::vector<uint32_t> cps = decode_scalars(text);
    if (cps.size() < static_cast<size_t>(n)) return h;
    for (size_t i = 0; i + static_cast<size_t>(n) <= cps.size(); ++i)
        h.counts[encode_window(cps.data() + i, n)] += 1;
    return h;
}

int64_t hisk_value(std::string_view x, std::string_view y, const std::vector<int>& n_range) {
    if (n_range.empty()) raise(Errc::InvalidConfig, "empty n-gram range");
    int64_t sum = 0;
    for (int n : n_range) {
        const NgramHistogram hx = extract_ngrams(x, n);
        const NgramHistogram hy = extract_ngrams(y, n);
        const NgramHistogram& small = hx.counts.size() <= hy.counts.size() ? hx : hy;
        const NgramHistogram& big = hx.counts.size() <= hy.counts.size() ? hy : hx;
        for (const auto& [gram, c] : small.counts) {
            auto it = big.counts.find(gram);
            if (it != big.counts.end()) sum += std::min(c, it->second);
        }
    }
    return sum;
}

int64_t hisk_self(std::string_view x, const std::vector<int>& n_range) {
    const std::vector<uint32_t> cps = decode_scalars(x);
    int64_t sum = 0;
    for (int n : n_range)
        if (cps.size() >= static_cast<size_t>(n))
            sum += static_cast<int64_t>(cps.size() - static_cast<size_t>(n) + 1);
    return sum;
}

KernelMatrix hisk_matrix(const std::vector<std::string>& ids,
                         const std::vector<std::string>& docs,
                         const std::vector<int>& n_range, bool normalize, int jobs) {
    if (docs.empty()) raise(Errc::InvalidConfig, "no documents");
    if (ids.size() != docs.size()) raise(Errc::ManifestMismatch, "ids/docs size mismatch");
    if (n_range.empty()) raise(Errc::InvalidConfig, "empty n-gram range");

    GramInterner interner;
    const std::vector<DocProfile> profiles = build_profiles(docs, n_range, interner);

    KernelMatrix k = KernelMatrix::zeros(ids, ids);
    const size_t n = docs.size();
    run_rows(n, jobs, [&](size_t r) {
        for (size_t c = 0; c < r; ++c) {
            const double v =
                static_cast<double>(profile_intersection(profiles[r], profiles[c]));
            k.at(r, c) = v;
            k.at(c, r) = v;
        }
        k.at(r, r) = static_cast<double>(profiles[r].self);
    });
    if (normalize) normalize_kernel(k);
    return k;
}

KernelMatrix hisk_cross(const std::vector<std::string>& row_ids,
                        const std::vector<std::string>& row_docs,
                        const std::vector<std::string>& col_ids,
                        const std::vector<std::string>& col_docs,
                        const std::vector<int>& n_range, bool normalize, int jobs) {
    if (row_docs.empty() || col_docs.empty()) raise(Errc::InvalidConfig, "no documents");
    if (row_ids.size() != row_docs.size() || col_ids.size() != col_docs.size())
        raise(Errc::ManifestMismatch, "ids/docs size mismatch");
    if (n_range.empty()) raise(Errc::InvalidConfig, "empty n-gram range");

    GramInterner interner;
    const std::vector<DocProfile> rows = build_profiles(row_docs, n_range, interner);
    const std::vector<DocProfile> cols = build_profiles(col_docs, n_range, interner);

    KernelMatrix k = KernelMatrix::zeros(row_ids, col_ids);
    run_rows(rows.size(), jobs, [&](size_t r) {
        for (size_t c = 0; c < cols.size(); ++c)
            k.at(r, c) = static_cast<double>(profile_intersection(rows[r], cols[c]));
    });
    if (normalize) {
        for (size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].self <= 0)
                raise(Errc::DegenerateDiagonal,
                      "document '" + row_ids[r] + "' has zero self-similarity");
        }
        for (size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].self <= 0)
                raise(Errc::DegenerateDiagonal,
                      "document '" + col_ids[c] + "' has zero self-similarity");
        }
        for (size_t r = 0; r < rows.size(); ++r) {
            const double sr = std::sqrt(static_cast<double>(rows[r].self));
            for (size_t c = 0; c < cols.size(); ++c)
                k.at(r, c) /= sr * std::sqrt(static_cast<double>(cols[c].self));
        }
    }
    return k;
}

void normalize_kernel(KernelMatrix& k) {
    if (!k.square()) raise(Errc::ManifestMismatch, "normalize_kernel expects a square matrix");
    const size_t n = k.rows();
    std::vector<double> scale(n);
    for (size_t i = 0; i < n; ++i) {
        const double d = k.at(i, i);
        if (!(d > 0.0))
            raise(Errc::DegenerateDiagonal,
                  "non-positive diagonal at sample '" + k.row_ids[i] + "'");
        scale[i] = 1.0 / std::sqrt(d);
    }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) k.at(i, j) *= scale[i] * scale[j];
}

} // namespace ktc
