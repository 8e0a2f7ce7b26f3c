#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prescale/anomaly.hpp"
#include "prescale/arima.hpp"
#include "prescale/errors.hpp"
#include "prescale/markov.hpp"
#include "prescale/planner.hpp"
#include "prescale/rng.hpp"
#include "prescale/simulator.hpp"
#include "prescale/time_series.hpp"
#include "prescale/trace.hpp"

namespace prescale {

struct SyntheticSpec {
    int days = 4;
    double base_rate = 50.0;  // requests per second
    double amplitude = 30.0;
    double noise_sigma = 4.0;
    int interval_s = 5;
    std::int64_t start_epoch = 0;
};

struct TraceConfig {
    std::string source = "synthetic"; // "synthetic" | "pagecounts"
    std::string dir;                  // pagecounts input directory
    std::string project_code;
    SyntheticSpec synthetic;
};

struct DetectionConfig {
    double k = 3.0;
    int min_run = 2;
    int slot_seconds = 300;
    double anomaly_quantile = 0.9;
    int markov_states = 8;
};

/// One document binding the whole pipeline: trace source, disaggregation,
/// model grid, QoS, data center, simulation policy, and the master seed.
struct ExperimentConfig {
    TraceConfig trace;
    DisaggregationParams disaggregation;
    double train_fraction = 0.75;
    std::vector<ArimaOrder> grid = {{1, 1, 1}, {1, 2, 1}, {2, 1, 2}, {2, 2, 2}};
    QosPolicy qos;
    double headroom = 1.0;
    DataCenterSpec datacenter;
    SimPolicy sim;
    DetectionConfig detection;
    std::string catalog_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;

    void validate() const {
        if (trace.source != "synthetic" && trace.source != "pagecounts")
            throw data_error("config: trace.source must be 'synthetic' or 'pagecounts'");
        if (trace.source == "pagecounts") {
            if (trace.dir.empty() || !std::filesystem::is_directory(trace.dir))
                throw data_error("config: trace.dir is not a directory: " + trace.dir);
            if (trace.project_code.empty())
                throw data_error("config: trace.project_code required for pagecounts source");
        }
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw data_error("config: train_fraction must be in (0,1)");
        if (grid.empty())
            throw data_error("config: model grid must not be empty");
        for (const ArimaOrder& order : grid)
            order.validate();
        if (!(headroom >= 1.0))
            throw data_error("config: headroom must be >= 1");
        if (!catalog_path.empty() && !std::filesystem::is_regular_file(catalog_path))
            throw data_error("config: catalog file does not exist: " + catalog_path);
        disaggregation.validate();
        qos.validate();
        datacenter.validate();
        sim.validate();
    }
};

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.days = j.value("days", s.days);
    s.base_rate = j.value("base_rate", s.base_rate);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.interval_s = j.value("interval_s", s.interval_s);
    s.start_epoch = j.value("start_epoch", s.start_epoch);
}

inline void from_json(const nlohmann::json& j, TraceConfig& t) {
    t.source = j.value("source", t.source);
    t.dir = j.value("dir", t.dir);
    t.project_code = j.value("project_code", t.project_code);
    if (j.contains("synthetic"))
        j.at("synthetic").get_to(t.synthetic);
}

inline void from_json(const nlohmann::json& j, DetectionConfig& d) {
    d.k = j.value("k", d.k);
    d.min_run = j.value("min_run", d.min_run);
    d.slot_seconds = j.value("slot_seconds", d.slot_seconds);
    d.anomaly_quantile = j.value("anomaly_quantile", d.anomaly_quantile);
    d.markov_states = j.value("markov_states", d.markov_states);
}

inline void from_json(const nlohmann::json& j, DisaggregationParams& p) {
    p.sigma = j.value("sigma", p.sigma);
    p.consolidation_s = j.value("consolidation_s", p.consolidation_s);
}

inline void from_json(const nlohmann::json& j, QosPolicy& q) {
    q.service_time_s = j.value("service_time_s", q.service_time_s);
    q.response_target_s = j.value("response_target_s", q.response_target_s);
    q.cores_per_vm = j.value("cores_per_vm", q.cores_per_vm);
}

inline void from_json(const nlohmann::json& j, DataCenterSpec& d) {
    d.host_count = j.value("host_count", d.host_count);
    d.cores_per_host = j.value("cores_per_host", d.cores_per_host);
    d.ram_per_host_gb = j.value("ram_per_host_gb", d.ram_per_host_gb);
    d.storage_per_host_tb = j.value("storage_per_host_tb", d.storage_per_host_tb);
    d.vm_fraction_of_host = j.value("vm_fraction", d.vm_fraction_of_host);
}

inline void from_json(const nlohmann::json& j, SimPolicy& s) {
    s.provisioning_period_s = j.value("provisioning_period_s", s.provisioning_period_s);
    s.plan_horizon_s = j.value("plan_horizon_s", s.plan_horizon_s);
    s.vm_boot_delay_s = j.value("vm_boot_delay_s", s.vm_boot_delay_s);
    s.service_time_s = j.value("service_time_s", s.service_time_s);
    s.response_target_s = j.value("response_target_s", s.response_target_s);
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (j.contains("trace"))
        j.at("trace").get_to(c.trace);
    if (j.contains("disaggregation"))
        j.at("disaggregation").get_to(c.disaggregation);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    if (j.contains("grid")) {
        c.grid.clear();
        for (const auto& entry : j.at("grid")) {
            if (entry.is_array()) {
                if (entry.size() != 3)
                    throw data_error("config: grid entries must be [p,d,q] triples");
                c.grid.push_back({entry[0].get<int>(), entry[1].get<int>(), entry[2].get<int>()});
            } else {
                c.grid.push_back(entry.get<ArimaOrder>());
            }
        }
    }
    if (j.contains("qos"))
        j.at("qos").get_to(c.qos);
    c.headroom = j.contains("qos") ? j.at("qos").value("headroom", c.headroom) : c.headroom;
    if (j.contains("datacenter"))
        j.at("datacenter").get_to(c.datacenter);
    if (j.contains("sim"))
        j.at("sim").get_to(c.sim);
    if (j.contains("detection"))
        j.at("detection").get_to(c.detection);
    c.catalog_path = j.value("catalog", c.catalog_path);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("malformed config " + path + ": " + ex.what());
    }
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open for writing: " + path.string());
    out << content;
    if (!out)
        throw data_error("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline std::string order_slug(const ArimaOrder& order) {
    return "arima_" + std::to_string(order.p) + "_" + std::to_string(order.d) + "_" +
           std::to_string(order.q);
}

} // namespace detail

struct IngestOutcome {
    TimeSeries series;
    nlohmann::json report; // source-specific ingestion summary
};

/// Produces the working series: either the seeded synthetic generator or a
/// pagecounts directory parsed, gap-filled, and disaggregated. Per-stage
/// seeds are derived from the master seed by stage name.
inline IngestOutcome run_ingest(const ExperimentConfig& config) {
    IngestOutcome outcome;
    if (config.trace.source == "synthetic") {
        const SyntheticSpec& s = config.trace.synthetic;
        outcome.series = synth_diurnal(s.days, s.base_rate, s.amplitude, s.noise_sigma,
                                       rng::stage_seed(config.seed, "synth"), s.interval_s,
                                       s.start_epoch);
        outcome.report = {{"schema", 1},
                          {"source", "synthetic"},
                          {"days", s.days},
                          {"samples", outcome.series.size()}};
        return outcome;
    }
    auto [hours, report] = ingest_directory(config.trace.dir, config.trace.project_code);
    DisaggregationParams params = config.disaggregation;
    params.seed = rng::stage_seed(config.seed, "disaggregate");
    outcome.series = disaggregate(hours, params, report.base_epoch);

    nlohmann::json files = nlohmann::json::array();
    std::uint64_t lines = 0, skipped = 0;
    for (const IngestedFile& file : report.files) {
        files.push_back({{"name", file.name},
                         {"hour_index", file.hour_index},
                         {"count", file.count},
                         {"lines", file.lines},
                         {"malformed", file.malformed},
                         {"corrupt", file.corrupt}});
        lines += file.lines;
        skipped += file.malformed;
    }
    outcome.report = {{"schema", 1},
                      {"source", "pagecounts"},
                      {"project_code", config.trace.project_code},
                      {"files", files},
                      {"gap_hours", report.gap_hours},
                      {"lines_read", lines},
                      {"lines_skipped", skipped},
                      {"total_count", report.total_count},
                      {"samples", outcome.series.size()}};
    return outcome;
}

struct ExperimentOutcome {
    TimeSeries series;
    TimeSeries train;
    TimeSeries test;
    std::vector<GridEntry> ranked;       // MSE-ascending, same order as rows
    std::vector<ModelOutcome> outcomes;  // per-model simulated metrics
    std::vector<ProvisioningSchedule> schedules;
    SimMetrics static_metrics;
    std::vector<ComparisonRow> rows;
};

/// The full evaluation loop: split, fit the grid, forecast one provisioning
/// window ahead at every window start of the test span (fixed coefficients,
/// state advanced with the actuals), plan capacity, simulate each model and
/// the static baseline, and normalize into the comparison table.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config) {
    config.validate();

    ExperimentOutcome outcome;
    IngestOutcome ingested = run_ingest(config);
    outcome.series = std::move(ingested.series);
    auto [train, test] = split_train_test(outcome.series, config.train_fraction);
    outcome.train = std::move(train);
    outcome.test = std::move(test);

    outcome.ranked = grid_select(outcome.train.values, outcome.test.values, config.grid);

    const int interval = outcome.series.interval_s;
    if (config.sim.provisioning_period_s % interval != 0)
        throw data_error("config: series interval must divide the provisioning period");
    const std::size_t window_steps =
        static_cast<std::size_t>(config.sim.provisioning_period_s / interval);

    for (const GridEntry& entry : outcome.ranked) {
        std::vector<ResourceRequirement> requirements;
        std::vector<double> history(outcome.train.values);
        for (std::size_t begin = 0; begin < outcome.test.size(); begin += window_steps) {
            const std::size_t steps = std::min(window_steps, outcome.test.size() - begin);
            const ArimaModel at_window = advance_state(entry.model, history);
            ForecastResult fc = forecast(at_window, static_cast<int>(steps));

            TimeSeries window_forecast;
            window_forecast.start_epoch = outcome.test.epoch_at(begin);
            window_forecast.interval_s = interval;
            window_forecast.values = std::move(fc.values);
            requirements.push_back(plan_window(window_forecast, config.qos, {}, config.headroom,
                                               config.datacenter.ram_per_vm_gb()));

            history.insert(history.end(), outcome.test.values.begin() + static_cast<std::ptrdiff_t>(begin),
                           outcome.test.values.begin() + static_cast<std::ptrdiff_t>(begin + steps));
        }
        ProvisioningSchedule schedule = schedule_from_plans(requirements, config.sim);
        SimMetrics metrics = run(outcome.test, schedule, config.datacenter, config.sim);
        outcome.outcomes.push_back(
            {entry.report.order.label(), entry.report.mse, std::move(metrics)});
        outcome.schedules.push_back(std::move(schedule));
    }

    outcome.static_metrics = static_baseline(outcome.test, config.datacenter, config.sim);
    outcome.rows = compare_models(outcome.outcomes, outcome.static_metrics);
    return outcome;
}

/// Writes every intermediate artifact of an experiment run under out_dir so
/// each stage can be rerun or inspected independently. All content is a pure
/// function of config and seed; identical runs produce identical bytes.
inline void write_experiment_artifacts(const ExperimentConfig& config,
                                       const ExperimentOutcome& outcome,
                                       const nlohmann::json& ingest_report) {
    namespace fs = std::filesystem;
    const fs::path out(config.out_dir);
    fs::create_directories(out / "series");
    fs::create_directories(out / "models");
    fs::create_directories(out / "schedules");
    fs::create_directories(out / "metrics");
    fs::create_directories(out / "utilization");

    write_series_csv((out / "series" / "full.csv").string(), outcome.series);
    write_series_csv((out / "series" / "train.csv").string(), outcome.train);
    write_series_csv((out / "series" / "test.csv").string(), outcome.test);
    detail::write_json_file(out / "ingest.json", ingest_report);

    nlohmann::json summary_rows = nlohmann::json::array();
    for (std::size_t i = 0; i < outcome.ranked.size(); ++i) {
        const GridEntry& entry = outcome.ranked[i];
        const std::string slug = detail::order_slug(entry.report.order);
        detail::write_json_file(out / "models" / (slug + ".json"), entry.model);
        detail::write_json_file(out / "schedules" / (slug + ".json"), outcome.schedules[i]);

        SimMetrics with_norm = outcome.outcomes[i].metrics;
        with_norm.normalized_vm_hours = outcome.rows[i].norm_vm_hours;
        with_norm.normalized_rejections = outcome.rows[i].norm_rejections;
        detail::write_json_file(out / "metrics" / (slug + ".json"), with_norm);

        std::ofstream util((out / "utilization" / (slug + ".csv")).string(), std::ios::binary);
        write_utilization_csv(util, outcome.outcomes[i].metrics);

        summary_rows.push_back({{"model", outcome.rows[i].label},
                                {"order", entry.report.order},
                                {"holdout_mse", entry.report.mse},
                                {"converged", entry.report.converged},
                                {"iterations", entry.report.iterations},
                                {"vm_hours", outcome.rows[i].vm_hours},
                                {"rejected", outcome.rows[i].rejected},
                                {"norm_vm_hours", outcome.rows[i].norm_vm_hours},
                                {"norm_rejections", outcome.rows[i].norm_rejections}});
    }
    detail::write_json_file(out / "metrics" / "static.json", outcome.static_metrics);
    {
        std::ofstream util((out / "utilization" / "static.csv").string(), std::ios::binary);
        write_utilization_csv(util, outcome.static_metrics);
    }

    std::ostringstream table;
    write_comparison_csv(table, outcome.rows);
    detail::write_text_file(out / "table.csv", table.str());

    detail::write_json_file(out / "experiment.json",
                            {{"schema", 1},
                             {"seed", config.seed},
                             {"rows", summary_rows},
                             {"static",
                              {{"vm_hours", outcome.static_metrics.vm_hours},
                               {"served", outcome.static_metrics.served_requests}}}});
}

struct DetectOutcome {
    BaselineProfile profile;
    std::vector<Alarm> alarms;
};

/// Builds (or loads) the baseline profile and runs divergence detection over
/// the given stream.
inline DetectOutcome run_detect(const ExperimentConfig& config, const TimeSeries& stream,
                                const std::string& profile_path = {}) {
    DetectOutcome outcome;
    if (!profile_path.empty()) {
        outcome.profile = load_profile(profile_path);
    } else {
        IngestOutcome ingested = run_ingest(config);
        auto [train, test] = split_train_test(ingested.series, config.train_fraction);
        (void)test;
        outcome.profile = build_baseline(train, config.detection.slot_seconds);
    }
    DetectParams params;
    params.k = config.detection.k;
    params.min_run = config.detection.min_run;
    params.cycle_seconds = config.sim.provisioning_period_s;
    outcome.alarms = detect(stream, outcome.profile, params);
    return outcome;
}

} // namespace prescale
