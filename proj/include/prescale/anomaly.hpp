#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "prescale/errors.hpp"
#include "prescale/time_series.hpp"

namespace prescale {

struct BaselineCell {
    double mean = 0.0; // requests per second
    double stddev = 0.0;
    std::uint64_t count = 0;
    bool observed = false; // false: filled from the global statistics
};

/// Expected workload per (day-of-week, time-of-day slot), learned from
/// history. Day of week follows the Unix convention (0 = Sunday, UTC).
struct BaselineProfile {
    int slot_seconds = 300;
    double global_mean = 0.0;
    double global_std = 0.0;
    std::vector<BaselineCell> cells; // 7 * slots_per_day, row-major by day

    int slots_per_day() const { return 86400 / slot_seconds; }

    static int day_of_week(std::int64_t epoch) {
        const std::int64_t days = epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400;
        return static_cast<int>(((days + 4) % 7 + 7) % 7);
    }

    std::size_t cell_index(std::int64_t epoch) const {
        const std::int64_t in_day = ((epoch % 86400) + 86400) % 86400;
        return static_cast<std::size_t>(day_of_week(epoch)) *
                   static_cast<std::size_t>(slots_per_day()) +
               static_cast<std::size_t>(in_day / slot_seconds);
    }

    const BaselineCell& cell_for_epoch(std::int64_t epoch) const {
        return cells[cell_index(epoch)];
    }
};

/// Per-(weekday, slot) mean and dispersion of the observed rate. Cells the
/// history never visits are filled with the global statistics and left
/// unflagged as observed.
inline BaselineProfile build_baseline(const TimeSeries& history, int slot_seconds) {
    if (slot_seconds <= 0 || 86400 % slot_seconds != 0)
        throw std::invalid_argument("build_baseline: slot_seconds must divide 86400");
    history.validate();
    if (history.end_epoch() - history.start_epoch < slot_seconds)
        throw data_error("build_baseline: history shorter than one slot");

    BaselineProfile profile;
    profile.slot_seconds = slot_seconds;
    const std::size_t n_cells = 7u * static_cast<std::size_t>(profile.slots_per_day());
    std::vector<double> sum(n_cells, 0.0), sum_sq(n_cells, 0.0);
    std::vector<std::uint64_t> count(n_cells, 0);

    double global_sum = 0.0, global_sum_sq = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double rate = history.rate_at(i);
        const std::size_t cell = profile.cell_index(history.epoch_at(i));
        sum[cell] += rate;
        sum_sq[cell] += rate * rate;
        ++count[cell];
        global_sum += rate;
        global_sum_sq += rate * rate;
    }
    const double n = static_cast<double>(history.size());
    profile.global_mean = global_sum / n;
    profile.global_std =
        std::sqrt(std::max(0.0, global_sum_sq / n - profile.global_mean * profile.global_mean));

    profile.cells.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        BaselineCell& cell = profile.cells[c];
        if (count[c] == 0) {
            cell.mean = profile.global_mean;
            cell.stddev = profile.global_std;
            continue;
        }
        cell.observed = true;
        cell.count = count[c];
        cell.mean = sum[c] / static_cast<double>(count[c]);
        cell.stddev = std::sqrt(
            std::max(0.0, sum_sq[c] / static_cast<double>(count[c]) - cell.mean * cell.mean));
    }
    return profile;
}

enum class AlarmDirection { above, below };

inline const char* to_string(AlarmDirection d) {
    return d == AlarmDirection::above ? "above" : "below";
}

struct Alarm {
    std::int64_t timestamp = 0;
    double observed = 0.0;   // requests per second
    double expected = 0.0;   // cell mean at that time
    double severity = 0.0;   // signed z-score at emission
    double transiency = 1.0; // P(excursion ends within one provisioning cycle)
    AlarmDirection direction = AlarmDirection::above;
};

struct DetectParams {
    double k = 3.0;               // divergence margin in cell standard deviations
    int min_run = 2;              // consecutive anomalous samples before alarming
    int cycle_seconds = 300;      // provisioning cycle used by the transiency estimate
    double floor_std_factor = 1e-6; // floor_std = factor * global mean

    void validate() const {
        if (!(k > 0.0))
            throw std::invalid_argument("DetectParams: k must be > 0");
        if (min_run < 1)
            throw std::invalid_argument("DetectParams: min_run must be >= 1");
        if (cycle_seconds <= 0)
            throw std::invalid_argument("DetectParams: cycle_seconds must be > 0");
    }
};

/// Divergence alarms against the baseline. A sample is anomalous when
/// |observed - cell mean| > k * max(cell std, floor_std); alarms are emitted
/// at every anomalous sample once the current run reaches min_run, which
/// suppresses sub-min_run transients and keeps the alarm count monotone
/// non-increasing in k. Transiency is the fraction of completed excursions
/// that started in the same cell and ended within one provisioning cycle
/// (1.0 until any history exists).
inline std::vector<Alarm> detect(const TimeSeries& observed, const BaselineProfile& profile,
                                 const DetectParams& params = {}) {
    params.validate();
    observed.validate();
    const double floor_std = params.floor_std_factor * profile.global_mean;

    struct ExcursionStats {
        std::uint64_t completed = 0;
        std::uint64_t transient = 0;
    };
    std::unordered_map<std::size_t, ExcursionStats> history;

    std::vector<Alarm> alarms;
    int run = 0;
    std::size_t run_cell = 0;
    auto close_run = [&](int length) {
        auto& stats = history[run_cell];
        ++stats.completed;
        if (static_cast<std::int64_t>(length) * observed.interval_s < params.cycle_seconds)
            ++stats.transient;
    };

    for (std::size_t i = 0; i < observed.size(); ++i) {
        const std::int64_t epoch = observed.epoch_at(i);
        const std::size_t cell_idx = profile.cell_index(epoch);
        const BaselineCell& cell = profile.cells[cell_idx];
        const double rate = observed.rate_at(i);
        const double margin = std::max(cell.stddev, floor_std);
        const double sigma = std::max(margin, 1e-12); // keeps z-scores finite
        const double deviation = rate - cell.mean;
        const bool anomalous = std::abs(deviation) > params.k * margin;

        if (!anomalous) {
            if (run > 0)
                close_run(run);
            run = 0;
            continue;
        }
        if (run == 0)
            run_cell = cell_idx;
        ++run;
        if (run < params.min_run)
            continue;

        Alarm alarm;
        alarm.timestamp = epoch;
        alarm.observed = rate;
        alarm.expected = cell.mean;
        alarm.severity = deviation / sigma;
        alarm.direction = deviation > 0.0 ? AlarmDirection::above : AlarmDirection::below;
        const auto it = history.find(run_cell);
        if (it != history.end() && it->second.completed > 0)
            alarm.transiency = static_cast<double>(it->second.transient) /
                               static_cast<double>(it->second.completed);
        alarms.push_back(alarm);
    }
    // An excursion still open at end of stream has unknown duration and is
    // not recorded.
    return alarms;
}

inline std::vector<Alarm> detect(const TimeSeries& observed, const BaselineProfile& profile,
                                 double k, int min_run) {
    DetectParams params;
    params.k = k;
    params.min_run = min_run;
    return detect(observed, profile, params);
}

inline void to_json(nlohmann::json& j, const Alarm& alarm) {
    j = nlohmann::json{{"ts", alarm.timestamp},       {"observed", alarm.observed},
                       {"expected", alarm.expected},  {"severity", alarm.severity},
                       {"transiency", alarm.transiency},
                       {"direction", to_string(alarm.direction)}};
}

inline void from_json(const nlohmann::json& j, Alarm& alarm) {
    j.at("ts").get_to(alarm.timestamp);
    j.at("observed").get_to(alarm.observed);
    j.at("expected").get_to(alarm.expected);
    j.at("severity").get_to(alarm.severity);
    j.at("transiency").get_to(alarm.transiency);
    alarm.direction = j.at("direction").get<std::string>() == "above" ? AlarmDirection::above
                                                                      : AlarmDirection::below;
}

/// Alarms travel as JSON lines: one object per line, LF separated.
inline void write_alarms_jsonl(std::ostream& out, const std::vector<Alarm>& alarms) {
    for (const Alarm& alarm : alarms)
        out << nlohmann::json(alarm).dump() << '\n';
}

inline std::vector<Alarm> read_alarms_jsonl(std::istream& in) {
    std::vector<Alarm> alarms;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        try {
            alarms.push_back(nlohmann::json::parse(line).get<Alarm>());
        } catch (const nlohmann::json::exception& ex) {
            throw data_error(std::string("malformed alarm line: ") + ex.what());
        }
    }
    return alarms;
}

inline void to_json(nlohmann::json& j, const BaselineCell& cell) {
    j = nlohmann::json{{"mean", cell.mean},
                       {"std", cell.stddev},
                       {"count", cell.count},
                       {"observed", cell.observed}};
}

inline void from_json(const nlohmann::json& j, BaselineCell& cell) {
    j.at("mean").get_to(cell.mean);
    j.at("std").get_to(cell.stddev);
    j.at("count").get_to(cell.count);
    j.at("observed").get_to(cell.observed);
}

inline void to_json(nlohmann::json& j, const BaselineProfile& profile) {
    j = nlohmann::json{{"schema", 1},
                       {"slot_seconds", profile.slot_seconds},
                       {"global_mean", profile.global_mean},
                       {"global_std", profile.global_std},
                       {"cells", profile.cells}};
}

inline void from_json(const nlohmann::json& j, BaselineProfile& profile) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("BaselineProfile: unsupported schema version");
    j.at("slot_seconds").get_to(profile.slot_seconds);
    j.at("global_mean").get_to(profile.global_mean);
    j.at("global_std").get_to(profile.global_std);
    j.at("cells").get_to(profile.cells);
}

inline void save_profile(const std::string& path, const BaselineProfile& profile) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open profile file for writing: " + path);
    out << nlohmann::json(profile).dump(2) << '\n';
}

inline BaselineProfile load_profile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open profile file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<BaselineProfile>();
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("malformed profile file " + path + ": " + ex.what());
    }
}

} // namespace prescale
