#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prescale/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInternal = 4;
constexpr int kExitAlarmsRaised = 5;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Experiment config JSON");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides config)");
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
}

// Precedence: flags > config file > built-in defaults.
prescale::ExperimentConfig resolve_config(const CommonOpts& opts) {
    prescale::ExperimentConfig config;
    if (!opts.config_path.empty())
        config = prescale::load_config(opts.config_path);
    if (opts.seed)
        config.seed = *opts.seed;
    if (!opts.out_dir.empty())
        config.out_dir = opts.out_dir;
    return config;
}

int cmd_ingest(const CommonOpts& opts) {
    prescale::ExperimentConfig config = resolve_config(opts);
    config.validate();
    prescale::IngestOutcome outcome = prescale::run_ingest(config);
    const fs::path out(config.out_dir);
    fs::create_directories(out / "series");
    prescale::write_series_csv((out / "series" / "full.csv").string(), outcome.series);
    prescale::detail::write_json_file(out / "ingest.json", outcome.report);
    std::cout << "ingested " << outcome.series.size() << " samples at " << outcome.series.interval_s
              << "s -> " << (out / "series" / "full.csv").string() << "\n";
    return kExitOk;
}

int cmd_fit(const CommonOpts& opts) {
    prescale::ExperimentConfig config = resolve_config(opts);
    config.validate();
    prescale::IngestOutcome ingested = prescale::run_ingest(config);
    auto [train, test] = prescale::split_train_test(ingested.series, config.train_fraction);
    auto ranked = prescale::grid_select(train.values, test.values, config.grid);

    const fs::path out(config.out_dir);
    fs::create_directories(out / "models");
    json reports = json::array();
    for (const prescale::GridEntry& entry : ranked) {
        prescale::detail::write_json_file(
            out / "models" / (prescale::detail::order_slug(entry.report.order) + ".json"),
            entry.model);
        reports.push_back({{"order", entry.report.order},
                           {"holdout_mse", entry.report.mse},
                           {"converged", entry.report.converged},
                           {"iterations", entry.report.iterations}});
        std::cout << entry.report.order.label() << " holdout_mse=" << entry.report.mse
                  << (entry.report.converged ? "" : " (not converged)") << "\n";
    }
    prescale::detail::write_json_file(out / "fit.json", {{"schema", 1}, {"reports", reports}});
    return kExitOk;
}

int cmd_forecast(const CommonOpts& opts, const std::string& model_path,
                 const std::string& series_path, int horizon, bool trend,
                 const std::string& out_file) {
    prescale::TimeSeries series = prescale::read_series_csv(series_path);
    std::vector<double> values;
    if (trend) {
        values = prescale::linear_trend_baseline(series.values, horizon);
    } else {
        if (model_path.empty())
            throw prescale::data_error("forecast: need --model or --trend");
        prescale::ArimaModel model = prescale::load_model(model_path);
        values = prescale::forecast(prescale::advance_state(model, series.values), horizon).values;
    }
    prescale::TimeSeries out;
    out.start_epoch = series.end_epoch();
    out.interval_s = series.interval_s;
    out.values = std::move(values);
    if (out_file.empty()) {
        prescale::write_series_csv(std::cout, out);
    } else {
        prescale::write_series_csv(out_file, out);
        std::cout << "wrote " << horizon << "-step forecast to " << out_file << "\n";
    }
    (void)opts;
    return kExitOk;
}

int cmd_detect(const CommonOpts& opts, const std::string& series_path,
               const std::string& profile_path) {
    prescale::ExperimentConfig config = resolve_config(opts);
    prescale::TimeSeries stream = prescale::read_series_csv(series_path);
    prescale::DetectOutcome outcome = prescale::run_detect(config, stream, profile_path);

    const fs::path out(config.out_dir);
    fs::create_directories(out);
    prescale::save_profile((out / "profile.json").string(), outcome.profile);
    std::ofstream alarm_file((out / "alarms.jsonl").string(), std::ios::binary);
    prescale::write_alarms_jsonl(alarm_file, outcome.alarms);
    prescale::write_alarms_jsonl(std::cout, outcome.alarms);
    std::cerr << outcome.alarms.size() << " alarm(s)\n";
    return outcome.alarms.empty() ? kExitOk : kExitAlarmsRaised;
}

int cmd_plan(const CommonOpts& opts, const std::string& forecast_path,
             const std::string& alarms_path, const std::string& catalog_path) {
    prescale::ExperimentConfig config = resolve_config(opts);
    prescale::TimeSeries window = prescale::read_series_csv(forecast_path);
    std::vector<prescale::Alarm> alarms;
    if (!alarms_path.empty()) {
        std::ifstream in(alarms_path, std::ios::binary);
        if (!in)
            throw prescale::data_error("cannot open alarms file: " + alarms_path);
        alarms = prescale::read_alarms_jsonl(in);
    }
    prescale::ResourceRequirement req = prescale::plan_window(
        window, config.qos, alarms, config.headroom, config.datacenter.ram_per_vm_gb());

    json doc{{"schema", 1}, {"requirement", req}};
    const std::string catalog_file =
        !catalog_path.empty() ? catalog_path : config.catalog_path;
    if (!catalog_file.empty()) {
        auto catalog = prescale::load_catalog(catalog_file);
        prescale::ProvisioningPlan plan =
            prescale::select_offers(req, catalog, config.sim.vm_boot_delay_s);
        doc["plan"] = plan;
        std::cout << req.vm_count << " VM(s), total hourly cost " << plan.total_hourly_cost
                  << "\n";
    } else {
        std::cout << req.vm_count << " VM(s), no catalog given\n";
    }
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    prescale::detail::write_json_file(out / "plan.json", doc);
    return kExitOk;
}

int cmd_simulate(const CommonOpts& opts, const std::string& workload_path,
                 const std::string& schedule_path) {
    prescale::ExperimentConfig config = resolve_config(opts);
    prescale::TimeSeries workload = prescale::read_series_csv(workload_path);
    std::ifstream in(schedule_path, std::ios::binary);
    if (!in)
        throw prescale::data_error("cannot open schedule file: " + schedule_path);
    json j;
    in >> j;
    prescale::ProvisioningSchedule schedule = j.get<prescale::ProvisioningSchedule>();
    prescale::SimMetrics metrics =
        prescale::run(workload, schedule, config.datacenter, config.sim);

    const fs::path out(config.out_dir);
    fs::create_directories(out);
    prescale::detail::write_json_file(out / "sim_metrics.json", metrics);
    std::ofstream util((out / "utilization.csv").string(), std::ios::binary);
    prescale::write_utilization_csv(util, metrics);
    std::cout << "vm_hours=" << metrics.vm_hours << " served=" << metrics.served_requests
              << " rejected=" << metrics.rejected_requests << "\n";
    return kExitOk;
}

int cmd_experiment(const CommonOpts& opts) {
    prescale::ExperimentConfig config = resolve_config(opts);
    config.validate();

    // Series artifacts are written before the heavy stages so a failure
    // downstream still leaves the inputs on disk for inspection.
    prescale::IngestOutcome ingested = prescale::run_ingest(config);
    const fs::path out(config.out_dir);
    fs::create_directories(out / "series");
    prescale::write_series_csv((out / "series" / "full.csv").string(), ingested.series);
    prescale::detail::write_json_file(out / "ingest.json", ingested.report);

    prescale::ExperimentOutcome outcome = prescale::run_experiment(config);
    prescale::write_experiment_artifacts(config, outcome, ingested.report);

    std::ostringstream table;
    prescale::write_comparison_csv(table, outcome.rows);
    std::cout << table.str();
    return kExitOk;
}

int cmd_report(const CommonOpts& opts, const std::string& summary_path,
               const std::string& out_file) {
    std::ifstream in(summary_path, std::ios::binary);
    if (!in)
        throw prescale::data_error("cannot open summary file: " + summary_path);
    json summary;
    try {
        in >> summary;
    } catch (const json::exception& ex) {
        throw prescale::data_error(std::string("malformed summary: ") + ex.what());
    }
    std::vector<prescale::ComparisonRow> rows;
    for (const auto& entry : summary.at("rows")) {
        prescale::ComparisonRow row;
        row.label = entry.at("model").get<std::string>();
        row.mse = entry.at("holdout_mse").get<double>();
        row.vm_hours = entry.at("vm_hours").get<double>();
        row.rejected = entry.at("rejected").get<std::uint64_t>();
        row.norm_vm_hours = entry.at("norm_vm_hours").get<double>();
        row.norm_rejections = entry.at("norm_rejections").get<double>();
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw prescale::data_error("report: summary has no rows");
    std::ostringstream table;
    prescale::write_comparison_csv(table, rows);
    if (out_file.empty()) {
        std::cout << table.str();
    } else {
        prescale::detail::write_text_file(out_file, table.str());
        std::cout << "wrote " << out_file << "\n";
    }
    (void)opts;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"prescale: predictive autoscaling workbench"};
    app.require_subcommand(1);

    CommonOpts opts;

    CLI::App* ingest = app.add_subcommand("ingest", "Parse traces into a rate series");
    add_common(ingest, opts);

    CLI::App* fit = app.add_subcommand("fit", "Fit the configured model grid");
    add_common(fit, opts);

    std::string model_path, series_path, out_file;
    int horizon = 60;
    bool trend = false;
    CLI::App* forecast = app.add_subcommand("forecast", "Forecast ahead from a series");
    add_common(forecast, opts);
    forecast->add_option("--model", model_path, "Fitted model JSON");
    forecast->add_option("--series", series_path, "Input series CSV")->required();
    forecast->add_option("--horizon", horizon, "Steps ahead");
    forecast->add_flag("--trend", trend, "Use the linear-trend baseline instead of a model");
    forecast->add_option("--out-file", out_file, "Forecast CSV path (default stdout)");

    std::string profile_path;
    CLI::App* detect = app.add_subcommand("detect", "Raise divergence alarms over a stream");
    add_common(detect, opts);
    detect->add_option("--series", series_path, "Observed stream CSV")->required();
    detect->add_option("--profile", profile_path, "Baseline profile JSON (else built from config)");

    std::string alarms_path, catalog_path;
    CLI::App* plan = app.add_subcommand("plan", "Size capacity for a forecast window");
    add_common(plan, opts);
    plan->add_option("--forecast", series_path, "Forecast window CSV")->required();
    plan->add_option("--alarms", alarms_path, "Active alarms JSONL");
    plan->add_option("--catalog", catalog_path, "Provider offer catalog JSON");

    std::string workload_path, schedule_path;
    CLI::App* simulate = app.add_subcommand("simulate", "Replay a workload under a schedule");
    add_common(simulate, opts);
    simulate->add_option("--workload", workload_path, "Workload series CSV")->required();
    simulate->add_option("--schedule", schedule_path, "Provisioning schedule JSON")->required();

    CLI::App* experiment = app.add_subcommand("experiment", "Run the full evaluation pipeline");
    add_common(experiment, opts);

    std::string summary_path;
    CLI::App* report = app.add_subcommand("report", "Rebuild the comparison table");
    add_common(report, opts);
    report->add_option("--summary", summary_path, "experiment.json from a previous run")
        ->required();
    report->add_option("--out-file", out_file, "Table CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(ingest))
            return cmd_ingest(opts);
        if (app.got_subcommand(fit))
            return cmd_fit(opts);
        if (app.got_subcommand(forecast))
            return cmd_forecast(opts, model_path, series_path, horizon, trend, out_file);
        if (app.got_subcommand(detect))
            return cmd_detect(opts, series_path, profile_path);
        if (app.got_subcommand(plan))
            return cmd_plan(opts, series_path, alarms_path, catalog_path);
        if (app.got_subcommand(simulate))
            return cmd_simulate(opts, workload_path, schedule_path);
        if (app.got_subcommand(experiment))
            return cmd_experiment(opts);
        if (app.got_subcommand(report))
            return cmd_report(opts, summary_path, out_file);
        std::cerr << "no subcommand\n";
        return kExitUsage;
    } catch (const prescale::infeasible_error& ex) {
        std::cerr << "infeasible: " << ex.what() << "\n";
        return kExitInfeasible;
    } catch (const prescale::data_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitData;
    } catch (const std::exception& ex) {
        std::cerr << "internal error: " << ex.what() << "\n";
        return kExitInternal;
    }
}
