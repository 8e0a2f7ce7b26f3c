#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "prescale/rng.hpp"

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tpl =
            (std::filesystem::temp_directory_path() / "prescale_test_XXXXXX").string();
        if (!mkdtemp(tpl.data()))
            throw std::runtime_error("mkdtemp failed");
        path_ = tpl;
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string gzip_bytes(const std::string& plain) {
    z_stream strm{};
    if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw std::runtime_error("deflateInit2 failed");
    std::string out;
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(plain.data()));
    strm.avail_in = static_cast<uInt>(plain.size());
    char buf[1 << 14];
    int rc = Z_OK;
    do {
        strm.next_out = reinterpret_cast<Bytef*>(buf);
        strm.avail_out = sizeof(buf);
        rc = deflate(&strm, Z_FINISH);
        out.append(buf, sizeof(buf) - strm.avail_out);
    } while (rc != Z_STREAM_END);
    deflateEnd(&strm);
    return out;
}

/// ARMA(p,q) simulator for recovery tests: x[t] = sum phi x[t-i] + e[t] +
/// sum theta e[t-j], unit-variance Gaussian shocks, burn-in discarded.
inline std::vector<double> simulate_arma(const std::vector<double>& phi,
                                         const std::vector<double>& theta, std::size_t n,
                                         std::uint64_t seed, std::size_t burn = 500) {
    prescale::rng::SplitMix64 gen(seed);
    const std::size_t total = n + burn;
    std::vector<double> x(total, 0.0), e(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        e[t] = gen.next_gaussian();
        double acc = e[t];
        for (std::size_t i = 0; i < phi.size(); ++i)
            if (t > i)
                acc += phi[i] * x[t - 1 - i];
        for (std::size_t j = 0; j < theta.size(); ++j)
            if (t > j)
                acc += theta[j] * e[t - 1 - j];
        x[t] = acc;
    }
    return {x.begin() + static_cast<std::ptrdiff_t>(burn), x.end()};
}

} // namespace testutil
