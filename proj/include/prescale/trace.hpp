#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "prescale/errors.hpp"
#include "prescale/rng.hpp"
#include "prescale/time_series.hpp"

namespace prescale {

/// Requests observed in one hour of trace. hour_index counts hours since the
/// start of the series.
struct HourlyCount {
    std::int64_t hour_index = 0;
    std::uint64_t count = 0;
};

struct DisaggregationParams {
    double sigma = 1.0;          // log-normal shape; the trace source gives none
    std::uint64_t seed = 0;
    int consolidation_s = 5;     // must divide 3600

    void validate() const {
        if (!(sigma > 0.0))
            throw std::invalid_argument("DisaggregationParams: sigma must be > 0");
        if (consolidation_s <= 0 || 3600 % consolidation_s != 0)
            throw std::invalid_argument("DisaggregationParams: consolidation must divide 3600");
    }
};

struct ParseResult {
    std::uint64_t matched_count = 0;  // sum of counts on lines matching the project
    std::uint64_t lines = 0;          // non-empty lines seen
    std::uint64_t malformed = 0;      // lines not in `project title count bytes` form
};

namespace detail {

/// Pagecounts line: `project title count bytes`, single spaces. Returns the
/// count when the project field matches exactly, 0 when it does not, and
/// nullopt for malformed lines. Variant projects ("zh.m") never match "zh".
inline std::optional<std::uint64_t> pagecounts_line(std::string_view line,
                                                    std::string_view project) {
    const auto s1 = line.find(' ');
    if (s1 == std::string_view::npos || s1 == 0)
        return std::nullopt;
    const auto s2 = line.find(' ', s1 + 1);
    if (s2 == std::string_view::npos || s2 == s1 + 1)
        return std::nullopt;
    const auto s3 = line.find(' ', s2 + 1);
    if (s3 == std::string_view::npos || s3 == s2 + 1)
        return std::nullopt;
    const auto count_field = line.substr(s2 + 1, s3 - s2 - 1);
    const auto bytes_field = line.substr(s3 + 1);
    if (bytes_field.empty() || bytes_field.find(' ') != std::string_view::npos)
        return std::nullopt;

    std::uint64_t count = 0;
    auto [ptr, ec] = std::from_chars(count_field.data(),
                                     count_field.data() + count_field.size(), count);
    if (ec != std::errc() || ptr != count_field.data() + count_field.size())
        return std::nullopt;
    return line.substr(0, s1) == project ? count : 0;
}

/// Feeds decompressed (or raw) bytes line by line. Sniffs the gzip magic on
/// the first two bytes; plain text passes through untouched.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {
        int c0 = in_.get();
        int c1 = in_.get();
        gzip_ = (c0 == 0x1f && c1 == 0x8b);
        if (c0 != EOF)
            pending_.push_back(static_cast<char>(c0));
        if (c1 != EOF)
            pending_.push_back(static_cast<char>(c1));
        if (gzip_) {
            strm_.zalloc = Z_NULL;
            strm_.zfree = Z_NULL;
            strm_.opaque = Z_NULL;
            if (inflateInit2(&strm_, 16 + MAX_WBITS) != Z_OK)
                throw data_error("zlib: inflateInit failed");
        }
    }

    ~LineReader() {
        if (gzip_)
            inflateEnd(&strm_);
    }

    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next_line(std::string& line) {
        while (true) {
            const auto nl = buffer_.find('\n', scan_pos_);
            if (nl != std::string::npos) {
                line.assign(buffer_, 0, nl);
                buffer_.erase(0, nl + 1);
                scan_pos_ = 0;
                if (!line.empty() && line.back() == '\r')
                    line.pop_back();
                return true;
            }
            scan_pos_ = buffer_.size();
            if (!fill())
                break;
        }
        if (buffer_.empty())
            return false;
        line.swap(buffer_);
        buffer_.clear();
        scan_pos_ = 0;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return true;
    }

private:
    bool fill() {
        char raw[1 << 16];
        std::size_t got = 0;
        if (!pending_.empty()) {
            got = pending_.size();
            std::copy(pending_.begin(), pending_.end(), raw);
            pending_.clear();
        } else {
            in_.read(raw, sizeof(raw));
            got = static_cast<std::size_t>(in_.gcount());
            if (in_.bad())
                throw data_error("I/O error while reading trace stream");
        }
        if (got == 0)
            return false;
        if (!gzip_) {
            buffer_.append(raw, got);
            return true;
        }
        strm_.next_in = reinterpret_cast<Bytef*>(raw);
        strm_.avail_in = static_cast<uInt>(got);
        while (strm_.avail_in > 0) {
            char out[1 << 16];
            strm_.next_out = reinterpret_cast<Bytef*>(out);
            strm_.avail_out = sizeof(out);
            const int rc = inflate(&strm_, Z_NO_FLUSH);
            if (rc != Z_OK && rc != Z_STREAM_END)
                throw data_error("zlib: corrupt gzip stream");
            buffer_.append(out, sizeof(out) - strm_.avail_out);
            if (rc == Z_STREAM_END) {
                // Hourly dumps are single-member archives; trailing garbage
                // after the gzip member is ignored.
                return true;
            }
        }
        return true;
    }

    std::istream& in_;
    bool gzip_ = false;
    z_stream strm_{};
    std::string pending_;
    std::string buffer_;
    std::size_t scan_pos_ = 0;
};

} // namespace detail

/// Sums the count field over lines whose project equals project_code exactly.
/// Accepts plain text or gzip. Malformed lines are skipped and counted; more
/// than 50% malformed is treated as a corrupt file.
inline ParseResult parse_pagecounts(std::istream& stream, std::string_view project_code) {
    detail::LineReader reader(stream);
    ParseResult result;
    std::string line;
    while (reader.next_line(line)) {
        if (line.empty())
            continue;
        ++result.lines;
        const auto count = detail::pagecounts_line(line, project_code);
        if (!count) {
            ++result.malformed;
            continue;
        }
        result.matched_count += *count;
    }
    if (result.lines > 0 && result.malformed * 2 > result.lines)
        throw data_error("corrupt pagecounts input: " + std::to_string(result.malformed) +
                         " of " + std::to_string(result.lines) + " lines malformed");
    return result;
}

inline ParseResult parse_pagecounts_file(const std::string& path, std::string_view project_code) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open pagecounts file: " + path);
    return parse_pagecounts(in, project_code);
}

/// Converts hourly counts to a per-interval series. Each hour's total is
/// apportioned over its 3600 seconds with seeded log-normal weights: integer
/// per-second counts by the largest-remainder rule, so the output conserves
/// the input totals exactly, then consecutive blocks of consolidation_s
/// seconds are summed. The RNG stream for each hour is derived from
/// (seed, hour_index), so results do not depend on evaluation order.
inline TimeSeries disaggregate(const std::vector<HourlyCount>& hourly,
                               const DisaggregationParams& params,
                               std::int64_t base_epoch = 0) {
    params.validate();
    if (hourly.empty())
        throw std::invalid_argument("disaggregate: no hourly counts");
    for (std::size_t i = 1; i < hourly.size(); ++i)
        if (hourly[i].hour_index != hourly[i - 1].hour_index + 1)
            throw std::invalid_argument("disaggregate: hours must be contiguous");

    const int block = params.consolidation_s;
    const std::size_t blocks_per_hour = static_cast<std::size_t>(3600 / block);

    TimeSeries series;
    series.start_epoch = base_epoch + hourly.front().hour_index * 3600;
    series.interval_s = block;
    series.values.reserve(hourly.size() * blocks_per_hour);

    std::vector<double> weights(3600);
    std::vector<std::uint64_t> seconds(3600);
    std::vector<std::uint32_t> order(3600);
    for (const HourlyCount& hour : hourly) {
        if (hour.count == 0) {
            series.values.insert(series.values.end(), blocks_per_hour, 0.0);
            continue;
        }
        rng::SplitMix64 gen(rng::derive(params.seed, static_cast<std::uint64_t>(hour.hour_index)));
        double total_weight = 0.0;
        for (double& w : weights) {
            w = std::exp(params.sigma * gen.next_gaussian());
            total_weight += w;
        }
        const double scale = static_cast<double>(hour.count) / total_weight;
        std::uint64_t assigned = 0;
        for (std::size_t s = 0; s < 3600; ++s) {
            const double share = weights[s] * scale;
            seconds[s] = static_cast<std::uint64_t>(share);
            weights[s] = share - static_cast<double>(seconds[s]); // fractional remainder
            assigned += seconds[s];
        }
        // Largest-remainder apportionment; ties resolved by second index so
        // the result is independent of sort implementation details.
        std::int64_t residue = static_cast<std::int64_t>(hour.count) -
                               static_cast<std::int64_t>(assigned);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (weights[a] != weights[b])
                return weights[a] > weights[b];
            return a < b;
        });
        std::size_t cursor = 0;
        while (residue > 0) {
            ++seconds[order[cursor]];
            cursor = (cursor + 1) % order.size();
            --residue;
        }
        cursor = order.size();
        while (residue < 0) { // floating-point rounding can overshoot by a few units
            cursor = (cursor == 0) ? order.size() - 1 : cursor - 1;
            if (seconds[order[cursor]] > 0) {
                --seconds[order[cursor]];
                ++residue;
            }
        }
        for (std::size_t b = 0; b < blocks_per_hour; ++b) {
            std::uint64_t sum = 0;
            for (int s = 0; s < block; ++s)
                sum += seconds[b * static_cast<std::size_t>(block) + static_cast<std::size_t>(s)];
            series.values.push_back(static_cast<double>(sum));
        }
    }
    return series;
}

/// Seeded test workload: 24h-period sinusoid plus Gaussian noise, clipped at
/// zero. base_rate and amplitude are requests per second; stored values are
/// requests per interval as everywhere else.
inline TimeSeries synth_diurnal(int days, double base_rate, double amplitude,
                                double noise_sigma, std::uint64_t seed,
                                int interval_s = 5, std::int64_t start_epoch = 0) {
    if (days < 1)
        throw std::invalid_argument("synth_diurnal: days must be >= 1");
    if (!(amplitude >= 0.0) || !(base_rate > amplitude))
        throw std::invalid_argument("synth_diurnal: need base_rate > amplitude >= 0");
    if (!(noise_sigma >= 0.0))
        throw std::invalid_argument("synth_diurnal: noise_sigma must be >= 0");
    if (interval_s <= 0 || 86400 % interval_s != 0)
        throw std::invalid_argument("synth_diurnal: interval must divide 86400");

    const std::size_t per_day = static_cast<std::size_t>(86400 / interval_s);
    TimeSeries series;
    series.start_epoch = start_epoch;
    series.interval_s = interval_s;
    series.values.resize(per_day * static_cast<std::size_t>(days));

    rng::SplitMix64 gen(seed);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < series.values.size(); ++k) {
        const double t = static_cast<double>(k % per_day) * interval_s;
        double rate = base_rate + amplitude * std::sin(two_pi * t / 86400.0);
        if (noise_sigma > 0.0)
            rate += noise_sigma * gen.next_gaussian();
        series.values[k] = std::max(0.0, rate) * interval_s;
    }
    return series;
}

struct IngestedFile {
    std::string name;
    std::int64_t hour_index = 0;
    std::uint64_t count = 0;
    std::uint64_t lines = 0;
    std::uint64_t malformed = 0;
    bool corrupt = false; // file rejected by the >50% malformed rule
};

struct IngestReport {
    std::vector<IngestedFile> files;
    std::vector<std::int64_t> gap_hours; // missing hours filled with zero counts
    std::uint64_t total_count = 0;
    std::int64_t base_epoch = 0;
};

namespace detail {

/// pagecounts-YYYYMMDD-HHMMSS(.gz) → epoch seconds of that hour.
inline std::optional<std::int64_t> pagecounts_timestamp(std::string_view name) {
    const auto dash = name.find('-');
    if (dash == std::string_view::npos || name.size() < dash + 16)
        return std::nullopt;
    const auto date = name.substr(dash + 1, 8);
    if (name[dash + 9] != '-')
        return std::nullopt;
    const auto time = name.substr(dash + 10, 6);
    for (char c : date)
        if (c < '0' || c > '9')
            return std::nullopt;
    for (char c : time)
        if (c < '0' || c > '9')
            return std::nullopt;
    std::tm tm{};
    tm.tm_year = (date[0] - '0') * 1000 + (date[1] - '0') * 100 + (date[2] - '0') * 10 +
                 (date[3] - '0') - 1900;
    tm.tm_mon = (date[4] - '0') * 10 + (date[5] - '0') - 1;
    tm.tm_mday = (date[6] - '0') * 10 + (date[7] - '0');
    tm.tm_hour = (time[0] - '0') * 10 + (time[1] - '0');
    if (tm.tm_mon < 0 || tm.tm_mon > 11 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23)
        return std::nullopt;
    return static_cast<std::int64_t>(timegm(&tm));
}

} // namespace detail

/// Reads every regular file in `dir` (lexicographic order, one file per
/// hour), sums the project's counts per file, and returns contiguous hourly
/// counts. Hours are taken from pagecounts-style filename timestamps when
/// every file carries one, else from file order; gaps are filled with
/// zero-count hours and flagged in the report. A corrupt file is listed and
/// contributes zero rather than aborting the run.
inline std::pair<std::vector<HourlyCount>, IngestReport>
ingest_directory(const std::string& dir, std::string_view project_code) {
    namespace fs = std::filesystem;
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file())
            names.push_back(entry.path().filename().string());
    if (names.empty())
        throw data_error("no readable trace files in " + dir);
    std::sort(names.begin(), names.end());

    bool timestamps_ok = true;
    std::vector<std::int64_t> epochs(names.size(), 0);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto ts = detail::pagecounts_timestamp(names[i]);
        if (!ts) {
            timestamps_ok = false;
            break;
        }
        epochs[i] = *ts;
    }

    IngestReport report;
    report.base_epoch = timestamps_ok ? epochs.front() : 0;

    std::vector<HourlyCount> hours;
    std::int64_t next_hour = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::int64_t hour_index =
            timestamps_ok ? (epochs[i] - report.base_epoch) / 3600 : static_cast<std::int64_t>(i);
        if (hour_index < next_hour)
            throw data_error("duplicate trace hour in " + names[i]);
        while (next_hour < hour_index) {
            report.gap_hours.push_back(next_hour);
            hours.push_back({next_hour, 0});
            ++next_hour;
        }
        IngestedFile file;
        file.name = names[i];
        file.hour_index = hour_index;
        try {
            const ParseResult parsed =
                parse_pagecounts_file((fs::path(dir) / names[i]).string(), project_code);
            file.count = parsed.matched_count;
            file.lines = parsed.lines;
            file.malformed = parsed.malformed;
        } catch (const data_error&) {
            file.corrupt = true;
            file.count = 0;
        }
        hours.push_back({hour_index, file.count});
        report.total_count += file.count;
        report.files.push_back(std::move(file));
        next_hour = hour_index + 1;
    }
    return {std::move(hours), std::move(report)};
}

} // namespace prescale
