#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "prescale/errors.hpp"

namespace prescale {

namespace detail {

/// Shortest decimal representation that round-trips the double exactly.
/// Keeps CSV output byte-stable across runs.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw data_error("unparsable numeric field: '" + std::string(text) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view text) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw data_error("unparsable integer field: '" + std::string(text) + "'");
    return v;
}

} // namespace detail

/// Uniformly sampled request series. `values[i]` is the number of requests
/// that arrive in [start_epoch + i*interval_s, start_epoch + (i+1)*interval_s).
/// This is the universal currency between the pipeline stages; rates in
/// requests per second are always values[i] / interval_s.
struct TimeSeries {
    std::int64_t start_epoch = 0; // seconds
    int interval_s = 5;           // seconds per sample
    std::vector<double> values;   // requests per interval, all >= 0

    std::size_t size() const { return values.size(); }

    std::int64_t epoch_at(std::size_t i) const {
        return start_epoch + static_cast<std::int64_t>(i) * interval_s;
    }

    std::int64_t end_epoch() const { return epoch_at(values.size()); }

    double rate_at(std::size_t i) const { return values[i] / interval_s; }

    void validate() const {
        if (interval_s <= 0)
            throw data_error("TimeSeries: interval must be positive");
        if (values.empty())
            throw data_error("TimeSeries: empty series");
        for (double v : values)
            if (!(v >= 0.0))
                throw data_error("TimeSeries: negative or NaN value");
    }
};

/// Contiguous prefix/suffix split. The suffix keeps its original timestamps
/// so concatenation reproduces the input exactly.
inline std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& series,
                                                          double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_train_test: fraction must be in (0,1)");
    const auto n = static_cast<std::int64_t>(series.size());
    const std::int64_t n_train = std::llround(static_cast<double>(n) * train_fraction);
    if (n_train < 1 || n_train >= n)
        throw data_error("split_train_test: split would leave an empty side");

    TimeSeries train{series.start_epoch, series.interval_s,
                     {series.values.begin(), series.values.begin() + n_train}};
    TimeSeries test{series.epoch_at(static_cast<std::size_t>(n_train)), series.interval_s,
                    {series.values.begin() + n_train, series.values.end()}};
    return {std::move(train), std::move(test)};
}

/// Series file format: CSV, header `epoch,interval_s,value`, UTF-8, LF.
inline void write_series_csv(std::ostream& out, const TimeSeries& series) {
    out << "epoch,interval_s,value\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series.epoch_at(i) << ',' << series.interval_s << ','
            << detail::format_double(series.values[i]) << '\n';
    }
}

inline void write_series_csv(const std::string& path, const TimeSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open series file for writing: " + path);
    write_series_csv(out, series);
    if (!out)
        throw data_error("write failed: " + path);
}

inline TimeSeries read_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw data_error("series file: empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "epoch,interval_s,value")
        throw data_error("series file: unexpected header '" + line + "'");

    TimeSeries series;
    series.values.clear();
    bool first = true;
    std::int64_t prev_epoch = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw data_error("series file: malformed row '" + line + "'");
        const std::int64_t epoch = detail::parse_int(std::string_view(line).substr(0, c1));
        const std::int64_t interval =
            detail::parse_int(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
        const double value = detail::parse_double(std::string_view(line).substr(c2 + 1));
        if (first) {
            series.start_epoch = epoch;
            series.interval_s = static_cast<int>(interval);
            first = false;
        } else {
            if (interval != series.interval_s)
                throw data_error("series file: interval changes mid-file");
            if (epoch != prev_epoch + series.interval_s)
                throw data_error("series file: non-contiguous timestamps");
        }
        prev_epoch = epoch;
        series.values.push_back(value);
    }
    series.validate();
    return series;
}

inline TimeSeries read_series_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open series file: " + path);
    return read_series_csv(in);
}

} // namespace prescale
