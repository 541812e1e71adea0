#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "toprank/dense.hpp"
#include "toprank/errors.hpp"

namespace toprank {

enum class KernelFamily { Linear, Gaussian };

struct KernelSpec {
    KernelFamily family = KernelFamily::Linear;
    double sigma = 1.0;  // Gaussian width; ignored for Linear

    KernelSpec() = default;
    KernelSpec(KernelFamily f, double s) : family(f), sigma(s) {
        if (family == KernelFamily::Gaussian && !(sigma > 0.0))
            throw invalid_spec("gaussian kernel sigma must be positive");
    }
    static KernelSpec linear() { return KernelSpec(KernelFamily::Linear, 1.0); }
    static KernelSpec gaussian(double sigma) { return KernelSpec(KernelFamily::Gaussian, sigma); }
};

inline const char* to_string(KernelFamily f) {
    return f == KernelFamily::Linear ? "linear" : "gaussian";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "linear") return KernelFamily::Linear;
    if (s == "gaussian") return KernelFamily::Gaussian;
    throw invalid_spec("unknown kernel family: " + s);
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> y) {
    if (x.size() != y.size())
        throw dimension_mismatch("kernel arguments have different dimensions");
    if (spec.family == KernelFamily::Linear) return dot(x, y);
    return std::exp(-spec.sigma * squared_distance(x, y));
}

namespace detail {

// FNV-1a over raw bytes; used as the cache-entry checksum.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr char kCacheMagic[8] = {'T', 'R', 'K', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kCacheVersion = 1;
constexpr std::size_t kCacheHeaderBytes = 64;

#pragma pack(push, 1)
struct CacheHeader {
    char magic[8];
    std::uint32_t version;
    std::uint32_t family;
    std::uint64_t n_pos;
    std::uint64_t n_neg;
    double sigma;
    std::uint64_t checksum;
    char pad[16];
};
#pragma pack(pop)
static_assert(sizeof(CacheHeader) == kCacheHeaderBytes);

struct FdCloser {
    void operator()(const int* fd) const {
        if (fd && *fd >= 0) ::close(*fd);
        delete fd;
    }
};

}  // namespace detail

// Signed block Gram matrix: entry(i,j) = sign(i)*sign(j)*k(x_i, x_j) with
// sign +1 for positive samples (indices [0, n_pos)) and -1 for negatives
// (indices [n_pos, n)). Immutable after construction; column reads are safe
// from multiple threads for both backends.
class KernelMatrix {
public:
    enum class Source { InMemory, DiskCache };

    static constexpr std::uint64_t kDefaultMemoryBudget = 4ULL << 30;  // 4 GiB

    KernelMatrix() = default;

    std::size_t n_pos() const { return n_pos_; }
    std::size_t n_neg() const { return n_neg_; }
    std::size_t size() const { return n_pos_ + n_neg_; }
    const KernelSpec& spec() const { return spec_; }
    Source source() const { return source_; }
    bool in_memory() const { return source_ == Source::InMemory; }
    const std::string& cache_path() const { return path_; }

    // Dense signed Gram matrix of the given positive/negative sample blocks.
    static KernelMatrix build(const KernelSpec& spec, const FeatureMatrix& pos,
                              const FeatureMatrix& neg,
                              std::uint64_t memory_budget = kDefaultMemoryBudget) {
        check_blocks(pos, neg);
        const std::size_t n = pos.rows() + neg.rows();
        if (static_cast<std::uint64_t>(n) * n * sizeof(double) > memory_budget)
            throw allocation_too_large(
                "kernel matrix of size " + std::to_string(n) + "x" + std::to_string(n) +
                " exceeds the memory budget; build a disk cache instead");
        KernelMatrix K;
        K.source_ = Source::InMemory;
        K.spec_ = spec;
        K.n_pos_ = pos.rows();
        K.n_neg_ = neg.rows();
        K.entries_.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = K.signed_eval(pos, neg, i, j);
                K.entries_[i * n + j] = v;
                K.entries_[j * n + i] = v;
            }
        K.diagonal_.resize(n);
        for (std::size_t i = 0; i < n; ++i) K.diagonal_[i] = K.entries_[i * n + i];
        return K;
    }

    // Streams the matrix row by row into a cache file; never holds more than
    // one row in memory. The checksum in the header is patched at the end.
    static void build_cache(const KernelSpec& spec, const FeatureMatrix& pos,
                            const FeatureMatrix& neg, const std::string& path) {
        check_blocks(pos, neg);
        const std::size_t n = pos.rows() + neg.rows();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open kernel cache for writing: " + path);
        detail::CacheHeader hdr = make_header(spec, pos.rows(), neg.rows(), 0);
        out.write(reinterpret_cast<const char*>(&hdr), sizeof hdr);
        std::uint64_t checksum = 0xcbf29ce484222325ULL;
        std::vector<double> rowbuf(n);
        KernelMatrix probe;  // only for signed_eval
        probe.spec_ = spec;
        probe.n_pos_ = pos.rows();
        probe.n_neg_ = neg.rows();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) rowbuf[j] = probe.signed_eval(pos, neg, i, j);
            checksum = detail::fnv1a(rowbuf.data(), n * sizeof(double), checksum);
            out.write(reinterpret_cast<const char*>(rowbuf.data()),
                      static_cast<std::streamsize>(n * sizeof(double)));
        }
        if (!out) throw io_error("short write while building kernel cache: " + path);
        hdr.checksum = checksum;
        out.seekp(0);
        out.write(reinterpret_cast<const char*>(&hdr), sizeof hdr);
        out.close();
        if (!out) throw io_error("failed to finalize kernel cache: " + path);
    }

    void write_cache(const std::string& path) const {
        if (source_ != Source::InMemory)
            throw io_error("write_cache requires an in-memory kernel matrix");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open kernel cache for writing: " + path);
        const std::uint64_t checksum =
            detail::fnv1a(entries_.data(), entries_.size() * sizeof(double));
        detail::CacheHeader hdr = make_header(spec_, n_pos_, n_neg_, checksum);
        out.write(reinterpret_cast<const char*>(&hdr), sizeof hdr);
        out.write(reinterpret_cast<const char*>(entries_.data()),
                  static_cast<std::streamsize>(entries_.size() * sizeof(double)));
        out.close();
        if (!out) throw io_error("short write of kernel cache: " + path);
    }

    // Loads a cache file fully into memory.
    static KernelMatrix read_cache(const std::string& path) {
        KernelMatrix K = open_cache(path);
        const std::size_t n = K.size();
        K.entries_.resize(n * n);
        for (std::size_t j = 0; j < n; ++j) K.read_row(j, {K.entries_.data() + j * n, n});
        K.source_ = Source::InMemory;
        K.fd_.reset();
        K.fetches_->store(0, std::memory_order_relaxed);
        return K;
    }

    // Opens a cache file for column-at-a-time access without loading it.
    // Header, file size and entry checksum are validated up front.
    static KernelMatrix open_cache(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot open kernel cache: " + path);
        detail::CacheHeader hdr{};
        in.read(reinterpret_cast<char*>(&hdr), sizeof hdr);
        if (!in || std::memcmp(hdr.magic, detail::kCacheMagic, sizeof hdr.magic) != 0)
            throw format_error("not a kernel cache file: " + path);
        if (hdr.version != detail::kCacheVersion)
            throw format_error("unsupported kernel cache version " + std::to_string(hdr.version));
        if (hdr.family > 1) throw format_error("corrupt kernel cache header (family)");
        if (hdr.n_pos == 0 || hdr.n_neg == 0)
            throw format_error("corrupt kernel cache header (empty class block)");
        const std::size_t n = hdr.n_pos + hdr.n_neg;
        in.seekg(0, std::ios::end);
        const auto file_size = static_cast<std::uint64_t>(in.tellg());
        const std::uint64_t expect =
            detail::kCacheHeaderBytes + static_cast<std::uint64_t>(n) * n * sizeof(double);
        if (file_size != expect)
            throw format_error("kernel cache size mismatch (truncated or wrong n): " + path);
        in.close();

        KernelMatrix K;
        K.source_ = Source::DiskCache;
        K.path_ = path;
        K.spec_ = KernelSpec(hdr.family == 0 ? KernelFamily::Linear : KernelFamily::Gaussian,
                             hdr.family == 0 ? 1.0 : hdr.sigma);
        K.n_pos_ = hdr.n_pos;
        K.n_neg_ = hdr.n_neg;
        int fd = ::open(path.c_str(), O_RDONLY);
        if (fd < 0) throw io_error("cannot open kernel cache: " + path);
        K.fd_ = std::unique_ptr<int, detail::FdCloser>(new int(fd));

        // Full checksum pass; harvests the diagonal on the way.
        K.diagonal_.assign(n, 0.0);
        std::vector<double> rowbuf(n);
        std::uint64_t checksum = 0xcbf29ce484222325ULL;
        for (std::size_t i = 0; i < n; ++i) {
            K.read_row(i, rowbuf);
            checksum = detail::fnv1a(rowbuf.data(), n * sizeof(double), checksum);
            K.diagonal_[i] = rowbuf[i];
        }
        if (checksum != hdr.checksum)
            throw format_error("kernel cache checksum mismatch: " + path);
        K.fetches_->store(0, std::memory_order_relaxed);
        return K;
    }

    double entry(std::size_t i, std::size_t j) const {
        if (i >= size() || j >= size()) throw index_out_of_range("kernel entry index out of range");
        if (source_ == Source::InMemory) return entries_[i * size() + j];
        double v = 0.0;
        pread_exact(&v, sizeof v,
                    detail::kCacheHeaderBytes + (static_cast<std::uint64_t>(i) * size() + j) * sizeof v);
        return v;
    }

    // Column j equals row j by symmetry; rows are contiguous on disk.
    void column_into(std::size_t j, std::span<double> out) const {
        if (j >= size()) throw index_out_of_range("kernel column index out of range");
        if (out.size() != size()) throw dimension_mismatch("column buffer has wrong length");
        fetches_->fetch_add(1, std::memory_order_relaxed);
        read_row(j, out);
    }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> out(size());
        column_into(j, out);
        return out;
    }

    const std::vector<double>& diagonal() const { return diagonal_; }

    // score = K * [alpha; beta] as one dense pass.
    std::vector<double> multiply(std::span<const double> v) const {
        if (v.size() != size()) throw dimension_mismatch("multiply vector has wrong length");
        const std::size_t n = size();
        std::vector<double> out(n, 0.0);
        if (source_ == Source::InMemory) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = entries_.data() + i * n;
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
                out[i] = acc;
            }
        } else {
            std::vector<double> rowbuf(n);
            for (std::size_t i = 0; i < n; ++i) {
                read_row(i, rowbuf);
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += rowbuf[j] * v[j];
                out[i] = acc;
            }
        }
        return out;
    }

    // Instrumentation: number of column fetches since construction/reset.
    std::uint64_t column_fetches() const { return fetches_->load(std::memory_order_relaxed); }
    void reset_column_fetches() const { fetches_->store(0, std::memory_order_relaxed); }

private:
    static void check_blocks(const FeatureMatrix& pos, const FeatureMatrix& neg) {
        if (pos.rows() == 0 || neg.rows() == 0)
            throw invalid_spec("kernel matrix needs at least one sample per class");
        if (pos.cols() != neg.cols())
            throw dimension_mismatch("positive and negative blocks have different feature dimensions");
    }

    static detail::CacheHeader make_header(const KernelSpec& spec, std::uint64_t np,
                                           std::uint64_t nn, std::uint64_t checksum) {
        detail::CacheHeader hdr{};
        std::memcpy(hdr.magic, detail::kCacheMagic, sizeof hdr.magic);
        hdr.version = detail::kCacheVersion;
        hdr.family = spec.family == KernelFamily::Linear ? 0 : 1;
        hdr.n_pos = np;
        hdr.n_neg = nn;
        hdr.sigma = spec.sigma;
        hdr.checksum = checksum;
        return hdr;
    }

    double signed_eval(const FeatureMatrix& pos, const FeatureMatrix& neg, std::size_t i,
                       std::size_t j) const {
        const bool ip = i < n_pos_;
        const bool jp = j < n_pos_;
        const auto xi = ip ? pos.row(i) : neg.row(i - n_pos_);
        const auto xj = jp ? pos.row(j) : neg.row(j - n_pos_);
        const double k = kernel_eval(spec_, xi, xj);
        return ip == jp ? k : -k;
    }

    void read_row(std::size_t i, std::span<double> out) const {
        const std::size_t n = size();
        if (source_ == Source::InMemory) {
            std::memcpy(out.data(), entries_.data() + i * n, n * sizeof(double));
            return;
        }
        pread_exact(out.data(), n * sizeof(double),
                    detail::kCacheHeaderBytes + static_cast<std::uint64_t>(i) * n * sizeof(double));
    }

    void pread_exact(void* dst, std::size_t bytes, std::uint64_t offset) const {
        auto* p = static_cast<char*>(dst);
        std::size_t done = 0;
        while (done < bytes) {
            const ssize_t got = ::pread(*fd_, p + done, bytes - done,
                                        static_cast<off_t>(offset + done));
            if (got < 0) throw io_error("kernel cache read failed: " + path_);
            if (got == 0) throw format_error("kernel cache truncated: " + path_);
            done += static_cast<std::size_t>(got);
        }
    }

    Source source_ = Source::InMemory;
    KernelSpec spec_;
    std::size_t n_pos_ = 0;
    std::size_t n_neg_ = 0;
    std::vector<double> entries_;   // in-memory backend
    std::vector<double> diagonal_;  // always resident
    std::string path_;
    std::unique_ptr<int, detail::FdCloser> fd_;
    std::shared_ptr<std::atomic<std::uint64_t>> fetches_ =
        std::make_shared<std::atomic<std::uint64_t>>(0);
};

}  // namespace toprank
