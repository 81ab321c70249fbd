#include "ktc/kernel_matrix.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ktc/error.hpp"

namespace ktc {

namespace {

constexpr char kMagic[5] = {'K', 'M', 'A', 'T', '1'};

static_assert(sizeof(double) == 8);

void put_u32le(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

void put_f64le(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64le(const unsigned char* p) {
    // Shift-based assembly is endian-neutral; bytes on disk are LE.
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

KernelMatrix KernelMatrix::zeros(std::vector<std::string> row_ids,
                                 std::vector<std::string> col_ids) {
    KernelMatrix k;
    k.row_ids = std::move(row_ids);
    k.col_ids = std::move(col_ids);
    k.values.assign(k.rows() * k.cols(), 0.0);
    return k;
}

void save_kmat(const std::filesystem::path& path, const KernelMatrix& k) {
    if (k.values.size() != k.rows() * k.cols())
        raise(Errc::FormatError, "kernel matrix value count does not match manifests");
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write kernel file: " + path.string());

    std::string header(kMagic, sizeof(kMagic));
    put_u32le(header, static_cast<uint32_t>(k.rows()));
    put_u32le(header, static_cast<uint32_t>(k.cols()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string block;
    block.reserve(1 << 20);
    for (double v : k.values) {
        put_f64le(block, v);
        if (block.size() >= (1 << 20)) {
            out.write(block.data(), static_cast<std::streamsize>(block.size()));
            block.clear();
        }
    }
    out.write(block.data(), static_cast<std::streamsize>(block.size()));

    nlohmann::json trailer;
    trailer["rows"] = k.row_ids;
    trailer["cols"] = k.col_ids;
    const std::string tail = trailer.dump();
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

KernelMatrix load_kmat(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open kernel file: " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const size_t header = sizeof(kMagic) + 8;
    if (data.size() < header || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
        raise(Errc::FormatError, "not a kernel cache file: " + path.string());
    const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + sizeof(kMagic);
    const uint32_t rows = get_u32le(p);
    const uint32_t cols = get_u32le(p + 4);
    const size_t need = header + static_cast<size_t>(rows) * cols * 8;
    if (data.size() < need)
        raise(Errc::FormatError, "kernel cache truncated: " + path.string());

    KernelMatrix k;
    k.values.resize(static_cast<size_t>(rows) * cols);
    const auto* vp = reinterpret_cast<const unsigned char*>(data.data()) + header;
    for (size_t i = 0; i < k.values.size(); ++i) k.values[i] = get_f64le(vp + i * 8);

    nlohmann::json trailer = nlohmann::json::parse(data.substr(need), nullptr, false);
    if (trailer.is_discarded() || !trailer.contains("rows") || !trailer.contains("cols"))
        raise(Errc::FormatError, "kernel cache manifest trailer malformed: " + path.string());
    k.row_ids = trailer["rows"].get<std::vector<std::string>>();
    k.col_ids = trailer["cols"].get<std::vector<std::string>>();
    if (k.row_ids.size() != rows || k.col_ids.size() != cols)
        raise(Errc::FormatError, "kernel cache manifest sizes disagree with header");
    return k;
}

} // namespace ktc
