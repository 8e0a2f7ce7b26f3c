#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prescale/anomaly.hpp"
#include "prescale/trace.hpp"
#include "test_util.hpp"

using namespace prescale;

namespace {

// Every cell filled uniformly; global stats to match.
BaselineProfile flat_profile(double mean, double stddev, int slot_seconds = 300) {
    BaselineProfile profile;
    profile.slot_seconds = slot_seconds;
    profile.global_mean = mean;
    profile.global_std = stddev;
    profile.cells.assign(7u * static_cast<std::size_t>(profile.slots_per_day()),
                         BaselineCell{mean, stddev, 10, true});
    return profile;
}

TimeSeries rate_series(const std::vector<double>& rates, int interval = 5,
                       std::int64_t start = 0) {
    TimeSeries series;
    series.start_epoch = start;
    series.interval_s = interval;
    series.values.resize(rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i)
        series.values[i] = rates[i] * interval;
    return series;
}

} // namespace

TEST_CASE("build_baseline on a constant series fills every cell with it") {
    TimeSeries history;
    history.interval_s = 60;
    history.values.assign(1440, 100.0 * 60); // one day at 100 req/s
    const BaselineProfile profile = build_baseline(history, 300);
    for (const BaselineCell& cell : profile.cells) {
        CHECK(cell.mean == Catch::Approx(100.0));
        CHECK(cell.stddev == Catch::Approx(0.0).margin(1e-9));
    }
    CHECK(profile.global_mean == Catch::Approx(100.0));
}

TEST_CASE("two identical days give per-cell means with zero dispersion") {
    TimeSeries history;
    history.interval_s = 300;
    for (int day = 0; day < 2; ++day)
        for (int slot = 0; slot < 288; ++slot)
            history.values.push_back((10.0 + slot % 7) * 300);
    const BaselineProfile profile = build_baseline(history, 300);
    int populated = 0;
    for (const BaselineCell& cell : profile.cells) {
        if (!cell.observed)
            continue;
        ++populated;
        CHECK(cell.count == 1);
        CHECK(cell.stddev == Catch::Approx(0.0).margin(1e-9));
    }
    CHECK(populated == 2 * 288);
}

TEST_CASE("baseline cells track a noiseless diurnal within slot quantization") {
    const double base = 100.0, amplitude = 50.0;
    const TimeSeries history = synth_diurnal(1, base, amplitude, 0.0, 1, 5);
    const int slot = 300;
    const BaselineProfile profile = build_baseline(history, slot);
    // Rate drifts by at most amplitude * 2*pi * slot / 86400 within one slot.
    const double quantization = amplitude * 6.2832 * slot / 86400.0;
    for (std::size_t i = 0; i < history.size(); i += 13) {
        const BaselineCell& cell = profile.cell_for_epoch(history.epoch_at(i));
        REQUIRE(cell.observed);
        CHECK(std::abs(cell.mean - history.rate_at(i)) <= quantization);
    }
}

TEST_CASE("build_baseline rejects history shorter than a slot") {
    TimeSeries tiny{0, 5, {1.0}};
    CHECK_THROWS_AS(build_baseline(tiny, 300), data_error);
}

TEST_CASE("detect is quiet when the stream equals the baseline means") {
    const BaselineProfile profile = flat_profile(100.0, 10.0);
    const TimeSeries stream = rate_series(std::vector<double>(500, 100.0));
    CHECK(detect(stream, profile, 3.0, 1).empty());
}

TEST_CASE("a single large spike alarms with its z-score") {
    const BaselineProfile profile = flat_profile(100.0, 10.0);
    std::vector<double> rates(20, 100.0);
    rates[10] = 200.0;
    const auto alarms = detect(rate_series(rates), profile, 3.0, 1);
    REQUIRE(alarms.size() == 1);
    CHECK(alarms[0].severity == Catch::Approx(10.0));
    CHECK(alarms[0].direction == AlarmDirection::above);
    CHECK(alarms[0].observed == Catch::Approx(200.0));
    CHECK(alarms[0].expected == Catch::Approx(100.0));
    CHECK(alarms[0].transiency == 1.0);
}

TEST_CASE("downward deviations are detected with negative severity") {
    const BaselineProfile profile = flat_profile(100.0, 5.0);
    std::vector<double> rates(10, 100.0);
    rates[4] = 40.0;
    const auto alarms = detect(rate_series(rates), profile, 3.0, 1);
    REQUIRE(alarms.size() == 1);
    CHECK(alarms[0].direction == AlarmDirection::below);
    CHECK(alarms[0].severity == Catch::Approx(-12.0));
}

TEST_CASE("short transients below min_run never alarm") {
    const BaselineProfile profile = flat_profile(100.0, 10.0);
    std::vector<double> rates(30, 100.0);
    rates[10] = 200.0;
    rates[11] = 200.0; // run of 2
    CHECK(detect(rate_series(rates), profile, 3.0, 3).empty());
    // Once the run reaches min_run, each further anomalous sample alarms.
    rates[12] = 200.0;
    rates[13] = 200.0;
    CHECK(detect(rate_series(rates), profile, 3.0, 3).size() == 2);
}

TEST_CASE("alarm count is monotone non-increasing in k") {
    const BaselineProfile profile = flat_profile(100.0, 10.0);
    rng::SplitMix64 gen(44);
    std::vector<double> rates(864);
    for (double& r : rates)
        r = 100.0 + 25.0 * gen.next_gaussian();
    std::size_t last = detect(rate_series(rates), profile, 0.5, 2).size();
    for (double k : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        const std::size_t count = detect(rate_series(rates), profile, k, 2).size();
        CHECK(count <= last);
        last = count;
    }
}

TEST_CASE("severity is invariant under a common rescaling") {
    BaselineProfile profile = flat_profile(100.0, 10.0);
    std::vector<double> rates(50, 100.0);
    rates[20] = 171.0;
    rates[21] = 169.0;
    const auto alarms = detect(rate_series(rates), profile, 3.0, 2);

    const double c = 7.33;
    BaselineProfile scaled = profile;
    scaled.global_mean *= c;
    scaled.global_std *= c;
    for (BaselineCell& cell : scaled.cells) {
        cell.mean *= c;
        cell.stddev *= c;
    }
    std::vector<double> scaled_rates(rates);
    for (double& r : scaled_rates)
        r *= c;
    const auto scaled_alarms = detect(rate_series(scaled_rates), scaled, 3.0, 2);
    REQUIRE(alarms.size() == scaled_alarms.size());
    for (std::size_t i = 0; i < alarms.size(); ++i)
        CHECK(alarms[i].severity == Catch::Approx(scaled_alarms[i].severity).epsilon(1e-9));
}

TEST_CASE("transiency reflects completed excursions from the same cell") {
    // Slot covers the whole day so every sample shares one cell per weekday.
    const BaselineProfile profile = flat_profile(100.0, 10.0, 86400);
    std::vector<double> rates(120, 100.0);
    rates[10] = 200.0; // 1-sample excursion: 5s < 300s cycle, transient
    rates[50] = 200.0;
    const auto alarms = detect(rate_series(rates), profile, 3.0, 1);
    REQUIRE(alarms.size() == 2);
    CHECK(alarms[0].transiency == 1.0); // no history yet
    CHECK(alarms[1].transiency == 1.0); // one completed excursion, transient

    // A long first excursion flips the estimate for the second one.
    std::vector<double> rates2(200, 100.0);
    for (int i = 10; i < 80; ++i) // 70 samples * 5s = 350s >= 300s cycle
        rates2[i] = 200.0;
    rates2[150] = 200.0;
    const auto alarms2 = detect(rate_series(rates2), profile, 3.0, 1);
    REQUIRE(!alarms2.empty());
    CHECK(alarms2.back().transiency == 0.0);
}

TEST_CASE("profile JSON round-trips") {
    const TimeSeries history = synth_diurnal(1, 50, 20, 2, 6, 300);
    const BaselineProfile profile = build_baseline(history, 300);
    testutil::TempDir dir;
    save_profile(dir.file("p.json"), profile);
    const BaselineProfile back = load_profile(dir.file("p.json"));
    CHECK(back.slot_seconds == profile.slot_seconds);
    CHECK(back.global_mean == profile.global_mean);
    REQUIRE(back.cells.size() == profile.cells.size());
    for (std::size_t i = 0; i < back.cells.size(); ++i) {
        CHECK(back.cells[i].mean == profile.cells[i].mean);
        CHECK(back.cells[i].stddev == profile.cells[i].stddev);
    }
}

TEST_CASE("alarms JSONL round-trips") {
    Alarm alarm;
    alarm.timestamp = 1234;
    alarm.observed = 55.5;
    alarm.expected = 40.0;
    alarm.severity = 3.875;
    alarm.transiency = 0.25;
    alarm.direction = AlarmDirection::above;
    std::stringstream io;
    write_alarms_jsonl(io, {alarm});
    const auto back = read_alarms_jsonl(io);
    REQUIRE(back.size() == 1);
    CHECK(back[0].timestamp == alarm.timestamp);
    CHECK(back[0].observed == alarm.observed);
    CHECK(back[0].severity == alarm.severity);
    CHECK(back[0].transiency == alarm.transiency);
    CHECK(back[0].direction == AlarmDirection::above);
}
