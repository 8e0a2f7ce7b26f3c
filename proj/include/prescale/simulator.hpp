#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prescale/errors.hpp"
#include "prescale/planner.hpp"
#include "prescale/time_series.hpp"

namespace prescale {

struct DataCenterSpec {
    int host_count = 500;
    int cores_per_host = 8;
    double ram_per_host_gb = 16.0;
    double storage_per_host_tb = 1.0;
    double vm_fraction_of_host = 0.125;

    void validate() const {
        if (host_count <= 0 || cores_per_host <= 0 || !(ram_per_host_gb > 0.0) ||
            !(storage_per_host_tb > 0.0) || !(vm_fraction_of_host > 0.0))
            throw std::invalid_argument("DataCenterSpec: all fields must be positive");
        const double cores = vm_fraction_of_host * cores_per_host;
        if (std::abs(cores - std::round(cores)) > 1e-9 || std::round(cores) < 1.0)
            throw std::invalid_argument(
                "DataCenterSpec: vm_fraction_of_host * cores_per_host must be a whole core count");
    }

    int cores_per_vm() const {
        return static_cast<int>(std::round(vm_fraction_of_host * cores_per_host));
    }

    int vms_per_host() const {
        return static_cast<int>(std::floor(1.0 / vm_fraction_of_host + 1e-9));
    }

    int vm_capacity() const { return host_count * vms_per_host(); }

    double ram_per_vm_gb() const { return ram_per_host_gb * vm_fraction_of_host; }
};

struct SimPolicy {
    int provisioning_period_s = 300;
    int plan_horizon_s = 300;
    int vm_boot_delay_s = 120;
    double service_time_s = 0.100;
    double response_target_s = 0.500;

    void validate() const {
        if (provisioning_period_s <= 0 || plan_horizon_s <= 0 || vm_boot_delay_s < 0)
            throw std::invalid_argument("SimPolicy: periods must be positive");
        if (vm_boot_delay_s > provisioning_period_s)
            throw std::invalid_argument(
                "SimPolicy: boot delay must fit within the provisioning period");
        if (!(service_time_s > 0.0) || !(service_time_s <= response_target_s))
            throw std::invalid_argument("SimPolicy: need 0 < service_time <= response_target");
    }
};

struct SchedulePoint {
    std::int64_t time = 0; // request time for scale-ups, effective time for scale-downs
    int target_vms = 0;
};

/// Timed VM-count targets. Points at or before the workload start are
/// pre-provisioned capacity, live immediately; later scale-ups become live
/// boot_delay after their point time, scale-downs apply at it.
struct ProvisioningSchedule {
    std::vector<SchedulePoint> points;

    void validate(int vm_capacity) const {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i > 0 && points[i].time < points[i - 1].time)
                throw std::invalid_argument("ProvisioningSchedule: times must be ordered");
            if (points[i].target_vms < 0)
                throw std::invalid_argument("ProvisioningSchedule: negative target");
            if (points[i].target_vms > vm_capacity)
                throw infeasible_error("ProvisioningSchedule: target " +
                                       std::to_string(points[i].target_vms) +
                                       " exceeds data-center capacity of " +
                                       std::to_string(vm_capacity) + " VMs");
        }
    }
};

struct UtilizationPoint {
    std::int64_t epoch = 0;
    int live_vms = 0;
    std::uint64_t offered = 0;
    std::uint64_t rejected = 0;
};

struct SimMetrics {
    double vm_hours = 0.0;
    std::uint64_t served_requests = 0;
    std::uint64_t rejected_requests = 0;
    std::uint64_t offered_requests = 0;
    double normalized_vm_hours = -1.0;  // filled by compare_models
    double normalized_rejections = -1.0;
    std::vector<UtilizationPoint> utilization;
};

namespace detail {

constexpr std::int64_t kMicros = 1000000;

inline std::int64_t to_micros_duration(double seconds) {
    return std::llround(seconds * static_cast<double>(kMicros));
}

} // namespace detail

/// Replays the workload against the provisioning schedule. Time advances in
/// workload intervals; each interval's requests arrive uniformly spaced. An
/// arrival joins the live VM with the shortest queue (lowest index on ties)
/// if its predicted response time (queue_length + 1) * service_time stays
/// within the response target, else it is rejected. Scale-downs drain: the
/// decommissioned VM takes no new work but finishes its queue. All
/// bookkeeping is in integer microseconds, so runs are exactly reproducible.
inline SimMetrics run(const TimeSeries& workload, const ProvisioningSchedule& schedule,
                      const DataCenterSpec& dc, const SimPolicy& policy) {
    workload.validate();
    dc.validate();
    policy.validate();
    schedule.validate(dc.vm_capacity());
    if (policy.provisioning_period_s % workload.interval_s != 0)
        throw std::invalid_argument("run: workload interval must divide the provisioning period");

    using detail::kMicros;
    const std::int64_t start_us = workload.start_epoch * kMicros;
    const std::int64_t end_us = workload.end_epoch() * kMicros;
    const std::int64_t service_us = detail::to_micros_duration(policy.service_time_s);
    const std::int64_t target_us = detail::to_micros_duration(policy.response_target_s);
    const std::int64_t boot_us = static_cast<std::int64_t>(policy.vm_boot_delay_s) * kMicros;

    // VM lifetimes from the target trajectory. Scale-downs decommission the
    // most recently booted VMs first, cancelling still-booting ones.
    struct VmLife {
        std::int64_t live_us;
        std::int64_t dead_us;
    };
    std::vector<VmLife> vms;
    std::vector<std::size_t> active;
    int current_target = 0;
    for (const SchedulePoint& point : schedule.points) {
        const std::int64_t t_us = point.time * kMicros;
        if (point.target_vms > current_target) {
            const std::int64_t live = t_us <= start_us ? start_us : t_us + boot_us;
            for (int c = current_target; c < point.target_vms; ++c) {
                active.push_back(vms.size());
                vms.push_back({live, std::numeric_limits<std::int64_t>::max()});
            }
        } else if (point.target_vms < current_target) {
            const std::int64_t dead = std::max(t_us, start_us);
            for (int c = point.target_vms; c < current_target; ++c) {
                vms[active.back()].dead_us = dead;
                active.pop_back();
            }
        }
        current_target = point.target_vms;
    }

    SimMetrics metrics;
    for (const VmLife& vm : vms) {
        const std::int64_t live = std::max(vm.live_us, start_us);
        const std::int64_t dead = std::min(vm.dead_us, end_us);
        if (dead > live)
            metrics.vm_hours += static_cast<double>(dead - live) / (3600.0 * kMicros);
    }

    struct VmEvent {
        std::int64_t time_us;
        std::size_t vm;
        bool up;
    };
    std::vector<VmEvent> events;
    for (std::size_t v = 0; v < vms.size(); ++v) {
        if (vms[v].dead_us <= vms[v].live_us)
            continue; // cancelled before its boot completed
        events.push_back({vms[v].live_us, v, true});
        if (vms[v].dead_us < std::numeric_limits<std::int64_t>::max())
            events.push_back({vms[v].dead_us, v, false});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const VmEvent& a, const VmEvent& b) { return a.time_us < b.time_us; });

    // Admission needs the live VM with the fewest pending requests (lowest
    // index on ties). Queue depths are capped by the response budget, so live
    // VMs are bucketed by depth: one ordered index set per depth.
    const int max_pending = static_cast<int>(target_us / service_us) - 1;
    std::vector<std::set<std::size_t>> by_depth(static_cast<std::size_t>(max_pending) + 2);
    std::vector<char> live(vms.size(), 0);
    std::vector<int> pending(vms.size(), 0);
    std::vector<std::int64_t> free_us(vms.size(), 0);
    int live_count = 0;
    std::size_t next_event = 0;

    using Completion = std::pair<std::int64_t, std::size_t>;
    std::priority_queue<Completion, std::vector<Completion>, std::greater<Completion>> completions;

    auto advance_to = [&](std::int64_t now_us) {
        while (next_event < events.size() && events[next_event].time_us <= now_us) {
            const VmEvent& event = events[next_event];
            const auto depth = static_cast<std::size_t>(pending[event.vm]);
            if (event.up) {
                live[event.vm] = 1;
                ++live_count;
                by_depth[depth].insert(event.vm);
            } else {
                live[event.vm] = 0;
                --live_count;
                by_depth[depth].erase(event.vm);
            }
            ++next_event;
        }
        while (!completions.empty() && completions.top().first <= now_us) {
            const std::size_t vm = completions.top().second;
            completions.pop();
            const auto depth = static_cast<std::size_t>(pending[vm]);
            if (live[vm]) {
                by_depth[depth].erase(vm);
                by_depth[depth - 1].insert(vm);
            }
            --pending[vm];
        }
    };

    const std::int64_t interval_us = static_cast<std::int64_t>(workload.interval_s) * kMicros;

    metrics.utilization.reserve(workload.size());
    for (std::size_t i = 0; i < workload.size(); ++i) {
        const std::int64_t interval_start_us =
            start_us + static_cast<std::int64_t>(i) * interval_us;
        advance_to(interval_start_us);

        UtilizationPoint util;
        util.epoch = workload.epoch_at(i);
        util.live_vms = live_count;

        const std::int64_t count = std::llround(workload.values[i]);
        util.offered = static_cast<std::uint64_t>(count);
        metrics.offered_requests += util.offered;
        for (std::int64_t r = 0; r < count; ++r) {
            const std::int64_t arrival_us = interval_start_us + (r * interval_us) / count;
            advance_to(arrival_us);

            std::size_t chosen = vms.size();
            for (int depth = 0; depth <= max_pending; ++depth) {
                if (!by_depth[static_cast<std::size_t>(depth)].empty()) {
                    chosen = *by_depth[static_cast<std::size_t>(depth)].begin();
                    break;
                }
            }
            if (chosen == vms.size()) { // every live VM would miss the target
                ++metrics.rejected_requests;
                ++util.rejected;
                continue;
            }
            ++metrics.served_requests;
            const auto depth = static_cast<std::size_t>(pending[chosen]);
            by_depth[depth].erase(chosen);
            by_depth[depth + 1].insert(chosen);
            ++pending[chosen];
            free_us[chosen] = std::max(free_us[chosen], arrival_us) + service_us;
            completions.emplace(free_us[chosen], chosen);
        }
        metrics.utilization.push_back(util);
    }
    return metrics;
}

/// Minimum constant VM count that serves the whole workload without a single
/// rejection, found by binary search over `run`; the normalization
/// denominator for elastic provisioning.
inline SimMetrics static_baseline(const TimeSeries& workload, const DataCenterSpec& dc,
                                  const SimPolicy& policy) {
    workload.validate();
    dc.validate();
    const int capacity = dc.vm_capacity();
    auto run_with = [&](int vm_count) {
        ProvisioningSchedule schedule{{{workload.start_epoch, vm_count}}};
        return run(workload, schedule, dc, policy);
    };
    SimMetrics at_capacity = run_with(capacity);
    if (at_capacity.rejected_requests > 0)
        throw infeasible_error("static_baseline: peak deficit: full capacity of " +
                               std::to_string(capacity) + " VMs still rejects " +
                               std::to_string(at_capacity.rejected_requests) + " requests");
    int lo = 0, hi = capacity;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (run_with(mid).rejected_requests == 0)
            hi = mid;
        else
            lo = mid + 1;
    }
    return run_with(lo);
}

/// Converts per-window requirements into a schedule, requesting scale-ups
/// boot_delay early so capacity is live at the window start. The first
/// window's request lands before the simulation starts and becomes
/// pre-provisioned capacity. Scale-downs take effect exactly at the window
/// boundary.
inline ProvisioningSchedule schedule_from_plans(const std::vector<ResourceRequirement>& plans,
                                                const SimPolicy& policy) {
    policy.validate();
    if (plans.empty())
        throw std::invalid_argument("schedule_from_plans: no plans");
    for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].valid_from >= plans[i].valid_until)
            throw std::invalid_argument("schedule_from_plans: empty window");
        if (i > 0) {
            if (plans[i].valid_from < plans[i - 1].valid_until)
                throw data_error("schedule_from_plans: overlapping windows");
            if (plans[i].valid_from > plans[i - 1].valid_until)
                throw data_error("schedule_from_plans: gap between windows");
        }
    }
    ProvisioningSchedule schedule;
    int current = -1;
    for (const ResourceRequirement& plan : plans) {
        if (plan.vm_count == current)
            continue;
        const bool up = plan.vm_count > current;
        const std::int64_t when =
            (current < 0 || up) ? plan.valid_from - policy.vm_boot_delay_s : plan.valid_from;
        schedule.points.push_back({when, plan.vm_count});
        current = plan.vm_count;
    }
    return schedule;
}

struct ModelOutcome {
    std::string label;
    double mse = 0.0;
    SimMetrics metrics;
};

struct ComparisonRow {
    std::string label;
    double mse = 0.0;
    double vm_hours = 0.0;
    std::uint64_t rejected = 0;
    double norm_vm_hours = 0.0;
    double norm_rejections = 0.0;
};

/// Normalizes each model's cost and quality: VM-hours against the static
/// baseline, rejections against the worst entry (so the worst row reads
/// exactly 1.00, and an all-zero column reads all zeros).
inline std::vector<ComparisonRow> compare_models(const std::vector<ModelOutcome>& outcomes,
                                                 const SimMetrics& baseline) {
    if (outcomes.empty())
        throw std::invalid_argument("compare_models: no entries");
    std::uint64_t max_rejections = 0;
    for (const ModelOutcome& outcome : outcomes)
        max_rejections = std::max(max_rejections, outcome.metrics.rejected_requests);

    std::vector<ComparisonRow> rows;
    rows.reserve(outcomes.size());
    for (const ModelOutcome& outcome : outcomes) {
        ComparisonRow row;
        row.label = outcome.label;
        row.mse = outcome.mse;
        row.vm_hours = outcome.metrics.vm_hours;
        row.rejected = outcome.metrics.rejected_requests;
        row.norm_vm_hours =
            baseline.vm_hours > 0.0 ? outcome.metrics.vm_hours / baseline.vm_hours : 0.0;
        row.norm_rejections =
            max_rejections > 0 ? static_cast<double>(outcome.metrics.rejected_requests) /
                                     static_cast<double>(max_rejections)
                               : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

} // namespace detail

/// Comparison table in the layout of the evaluation: model, one-step MSE,
/// normalized VM-hours (4 decimals), normalized rejections (2 decimals).
/// Model labels contain commas, so that field is always quoted.
inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
    out << "model,mse,norm_vm_hours,norm_rejections\n";
    for (const ComparisonRow& row : rows) {
        out << '"' << row.label << "\"," << detail::format_double(row.mse) << ','
            << detail::format_fixed(row.norm_vm_hours, 4) << ','
            << detail::format_fixed(row.norm_rejections, 2) << '\n';
    }
}

inline void write_utilization_csv(std::ostream& out, const SimMetrics& metrics) {
    out << "epoch,live_vms,offered,rejected\n";
    for (const UtilizationPoint& point : metrics.utilization)
        out << point.epoch << ',' << point.live_vms << ',' << point.offered << ','
            << point.rejected << '\n';
}

inline void to_json(nlohmann::json& j, const SchedulePoint& point) {
    j = nlohmann::json{{"time", point.time}, {"target_vms", point.target_vms}};
}

inline void from_json(const nlohmann::json& j, SchedulePoint& point) {
    j.at("time").get_to(point.time);
    j.at("target_vms").get_to(point.target_vms);
}

inline void to_json(nlohmann::json& j, const ProvisioningSchedule& schedule) {
    j = nlohmann::json{{"schema", 1}, {"points", schedule.points}};
}

inline void from_json(const nlohmann::json& j, ProvisioningSchedule& schedule) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("ProvisioningSchedule: unsupported schema version");
    j.at("points").get_to(schedule.points);
}

inline void to_json(nlohmann::json& j, const SimMetrics& metrics) {
    j = nlohmann::json{{"schema", 1},
                       {"vm_hours", metrics.vm_hours},
                       {"served", metrics.served_requests},
                       {"rejected", metrics.rejected_requests},
                       {"offered", metrics.offered_requests}};
    if (metrics.normalized_vm_hours >= 0.0)
        j["normalized_vm_hours"] = metrics.normalized_vm_hours;
    if (metrics.normalized_rejections >= 0.0)
        j["normalized_rejections"] = metrics.normalized_rejections;
}

inline void from_json(const nlohmann::json& j, SimMetrics& metrics) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("SimMetrics: unsupported schema version");
    j.at("vm_hours").get_to(metrics.vm_hours);
    j.at("served").get_to(metrics.served_requests);
    j.at("rejected").get_to(metrics.rejected_requests);
    j.at("offered").get_to(metrics.offered_requests);
    metrics.normalized_vm_hours = j.value("normalized_vm_hours", -1.0);
    metrics.normalized_rejections = j.value("normalized_rejections", -1.0);
}

} // namespace prescale
