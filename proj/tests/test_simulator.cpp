#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "prescale/simulator.hpp"
#include "prescale/trace.hpp"
#include "sim_oracle.hpp"
#include "test_util.hpp"

using namespace prescale;

namespace {

TimeSeries constant_workload(double rate, int seconds, int interval = 5) {
    TimeSeries series;
    series.interval_s = interval;
    series.values.assign(static_cast<std::size_t>(seconds / interval), rate * interval);
    return series;
}

DataCenterSpec small_dc() {
    DataCenterSpec dc;
    dc.host_count = 10;
    return dc;
}

} // namespace

TEST_CASE("an idle hour on ten VMs bills exactly ten VM-hours") {
    const TimeSeries workload = constant_workload(0.0, 3600);
    const ProvisioningSchedule schedule{{{0, 10}}};
    const SimMetrics metrics = run(workload, schedule, small_dc(), SimPolicy{});
    CHECK(metrics.vm_hours == Catch::Approx(10.0));
    CHECK(metrics.rejected_requests == 0);
    CHECK(metrics.offered_requests == 0);
}

TEST_CASE("one VM at exactly its service capacity rejects nothing") {
    const TimeSeries workload = constant_workload(10.0, 60);
    const ProvisioningSchedule schedule{{{0, 1}}};
    const SimMetrics metrics = run(workload, schedule, small_dc(), SimPolicy{});
    CHECK(metrics.rejected_requests == 0);
    CHECK(metrics.served_requests == 600);
}

TEST_CASE("an overloaded VM rejects exactly what the oracle replay rejects") {
    const TimeSeries workload = constant_workload(15.0, 60);
    const ProvisioningSchedule schedule{{{0, 1}}};
    const SimPolicy policy;
    const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
    const testutil::OracleOutcome oracle = testutil::oracle_replay(workload, schedule, policy);
    CHECK(metrics.rejected_requests == oracle.rejected);
    CHECK(metrics.served_requests == oracle.served);
    CHECK(metrics.rejected_requests > 0);
}

TEST_CASE("run matches the oracle across a scenario grid") {
    const SimPolicy policy;
    for (int vms : {1, 2, 3}) {
        for (double rate : {5.0, 12.0, 20.0, 30.0}) {
            // Constant load, a mid-run scale-up, and a mid-run scale-down.
            const TimeSeries workload = constant_workload(rate, 600);
            const std::vector<ProvisioningSchedule> schedules{
                {{{0, vms}}},
                {{{0, vms}, {300, vms + 1}}},
                {{{0, vms + 1}, {300, vms}}},
            };
            for (const ProvisioningSchedule& schedule : schedules) {
                const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
                const testutil::OracleOutcome oracle =
                    testutil::oracle_replay(workload, schedule, policy);
                REQUIRE(metrics.served_requests == oracle.served);
                REQUIRE(metrics.rejected_requests == oracle.rejected);
                REQUIRE(metrics.offered_requests == oracle.offered);
            }
        }
    }
}

TEST_CASE("run matches the oracle on a bursty spike pattern") {
    const SimPolicy policy;
    TimeSeries workload;
    workload.interval_s = 5;
    rng::SplitMix64 gen(99);
    for (int i = 0; i < 120; ++i) {
        const double spike = (i % 17 == 0) ? 140.0 : 0.0;
        workload.values.push_back(std::floor(25.0 + spike + 20.0 * gen.next_unit()));
    }
    const ProvisioningSchedule schedule{{{0, 2}, {200, 3}, {400, 1}}};
    const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
    const testutil::OracleOutcome oracle = testutil::oracle_replay(workload, schedule, policy);
    CHECK(metrics.served_requests == oracle.served);
    CHECK(metrics.rejected_requests == oracle.rejected);
}

TEST_CASE("served plus rejected always equals offered") {
    const TimeSeries workload = synth_diurnal(1, 30, 20, 5, 4, 300);
    const ProvisioningSchedule schedule{{{0, 2}}};
    SimPolicy policy;
    policy.provisioning_period_s = 300;
    const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
    CHECK(metrics.served_requests + metrics.rejected_requests == metrics.offered_requests);
    std::uint64_t offered = 0;
    for (double v : workload.values)
        offered += static_cast<std::uint64_t>(std::llround(v)); // the simulator's rounding
    CHECK(metrics.offered_requests == offered);
}

TEST_CASE("identical inputs give identical metrics") {
    const TimeSeries workload = synth_diurnal(1, 40, 25, 6, 11, 300);
    const ProvisioningSchedule schedule{{{0, 3}, {21600, 6}, {43200, 2}}};
    SimPolicy policy;
    const SimMetrics a = run(workload, schedule, small_dc(), policy);
    const SimMetrics b = run(workload, schedule, small_dc(), policy);
    CHECK(a.vm_hours == b.vm_hours);
    CHECK(a.served_requests == b.served_requests);
    CHECK(a.rejected_requests == b.rejected_requests);
    REQUIRE(a.utilization.size() == b.utilization.size());
    for (std::size_t i = 0; i < a.utilization.size(); ++i) {
        CHECK(a.utilization[i].live_vms == b.utilization[i].live_vms);
        CHECK(a.utilization[i].rejected == b.utilization[i].rejected);
    }
}

TEST_CASE("adding VMs to every schedule point never increases rejections") {
    SimPolicy policy;
    for (std::uint64_t seed : {1u, 5u, 9u}) {
        const TimeSeries workload = synth_diurnal(1, 35, 25, 8, seed, 300);
        ProvisioningSchedule schedule{{{0, 2}, {28800, 4}, {57600, 3}}};
        std::uint64_t last = std::numeric_limits<std::uint64_t>::max();
        for (int extra = 0; extra < 4; ++extra) {
            ProvisioningSchedule grown = schedule;
            for (SchedulePoint& point : grown.points)
                point.target_vms += extra;
            const std::uint64_t rejected =
                run(workload, grown, small_dc(), policy).rejected_requests;
            CHECK(rejected <= last);
            last = rejected;
        }
    }
}

TEST_CASE("boot delay keeps new capacity offline until it completes") {
    // Scale-up requested at t=100 becomes live at t=220.
    const TimeSeries workload = constant_workload(0.0, 600);
    ProvisioningSchedule schedule{{{0, 1}, {100, 3}}};
    SimPolicy policy;
    const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
    // 1 VM for 220s, then 3 VMs for 380s.
    CHECK(metrics.vm_hours == Catch::Approx((220.0 + 3 * 380.0) / 3600.0));
    for (const UtilizationPoint& point : metrics.utilization) {
        if (point.epoch < 220)
            CHECK(point.live_vms == 1);
        if (point.epoch >= 220)
            CHECK(point.live_vms == 3);
    }
}

TEST_CASE("scale-down takes effect immediately and drains") {
    const SimPolicy policy;
    const TimeSeries workload = constant_workload(10.0, 600);
    ProvisioningSchedule schedule{{{0, 2}, {300, 1}}};
    const SimMetrics metrics = run(workload, schedule, small_dc(), policy);
    // 2 VMs for 300s, 1 VM for 300s; one VM handles 10 req/s alone.
    CHECK(metrics.vm_hours == Catch::Approx((2 * 300.0 + 300.0) / 3600.0));
    CHECK(metrics.rejected_requests == 0);
    const testutil::OracleOutcome oracle = testutil::oracle_replay(workload, schedule, policy);
    CHECK(metrics.served_requests == oracle.served);
}

TEST_CASE("schedules above data-center capacity are rejected up front") {
    const TimeSeries workload = constant_workload(1.0, 60);
    DataCenterSpec dc = small_dc(); // 10 hosts * 8 VMs
    ProvisioningSchedule schedule{{{0, 81}}};
    CHECK_THROWS_AS(run(workload, schedule, dc, SimPolicy{}), infeasible_error);
}

TEST_CASE("static baseline finds the closed-form count for constant load") {
    const TimeSeries workload = constant_workload(50.0, 1800);
    const SimMetrics metrics = static_baseline(workload, small_dc(), SimPolicy{});
    CHECK(metrics.rejected_requests == 0);
    CHECK(metrics.vm_hours == Catch::Approx(5.0 * 0.5)); // 5 VMs for half an hour
}

TEST_CASE("static baseline of a zero workload is zero VMs") {
    const TimeSeries workload = constant_workload(0.0, 600);
    const SimMetrics metrics = static_baseline(workload, small_dc(), SimPolicy{});
    CHECK(metrics.vm_hours == 0.0);
    CHECK(metrics.rejected_requests == 0);
}

TEST_CASE("static baseline matches ceil(peak * service_time) on a smooth diurnal") {
    const TimeSeries workload = synth_diurnal(1, 100, 50, 0.0, 2, 5);
    DataCenterSpec dc;
    dc.host_count = 30;
    const SimMetrics metrics = static_baseline(workload, dc, SimPolicy{});
    CHECK(metrics.rejected_requests == 0);
    // Peak rate 150 req/s, service 100ms: 15 VMs for the whole day.
    CHECK(metrics.vm_hours == Catch::Approx(15.0 * 24.0));
}

TEST_CASE("static baseline is minimal: one fewer VM rejects") {
    const SimPolicy policy;
    for (std::uint64_t seed : {3u, 8u}) {
        const TimeSeries workload = synth_diurnal(1, 40, 20, 5, seed, 300);
        const SimMetrics metrics = static_baseline(workload, small_dc(), policy);
        CHECK(metrics.rejected_requests == 0);
        const int vms = static_cast<int>(
            std::llround(metrics.vm_hours / 24.0)); // constant count over one day
        REQUIRE(vms >= 1);
        ProvisioningSchedule fewer{{{workload.start_epoch, vms - 1}}};
        CHECK(run(workload, fewer, small_dc(), policy).rejected_requests > 0);
    }
}

TEST_CASE("static baseline reports a peak deficit when even full capacity rejects") {
    DataCenterSpec dc;
    dc.host_count = 1; // 8 VMs, 80 req/s ceiling
    const TimeSeries workload = constant_workload(200.0, 300);
    CHECK_THROWS_AS(static_baseline(workload, dc, SimPolicy{}), infeasible_error);
}

TEST_CASE("schedule_from_plans emits one entry for a constant requirement") {
    std::vector<ResourceRequirement> plans;
    for (int w = 0; w < 4; ++w) {
        ResourceRequirement req;
        req.vm_count = 5;
        req.valid_from = w * 300;
        req.valid_until = (w + 1) * 300;
        plans.push_back(req);
    }
    const ProvisioningSchedule schedule = schedule_from_plans(plans, SimPolicy{});
    REQUIRE(schedule.points.size() == 1);
    CHECK(schedule.points[0].time == -120);
    CHECK(schedule.points[0].target_vms == 5);
}

TEST_CASE("schedule_from_plans requests scale-ups a boot delay early") {
    std::vector<ResourceRequirement> plans(2);
    plans[0].vm_count = 5;
    plans[0].valid_from = 0;
    plans[0].valid_until = 600;
    plans[1].vm_count = 10;
    plans[1].valid_from = 600;
    plans[1].valid_until = 1200;
    const ProvisioningSchedule schedule = schedule_from_plans(plans, SimPolicy{});
    REQUIRE(schedule.points.size() == 2);
    CHECK(schedule.points[1].time == 480);
    CHECK(schedule.points[1].target_vms == 10);
}

TEST_CASE("schedule_from_plans applies scale-downs at the boundary") {
    std::vector<ResourceRequirement> plans(2);
    plans[0].vm_count = 10;
    plans[0].valid_from = 0;
    plans[0].valid_until = 600;
    plans[1].vm_count = 5;
    plans[1].valid_from = 600;
    plans[1].valid_until = 1200;
    const ProvisioningSchedule schedule = schedule_from_plans(plans, SimPolicy{});
    REQUIRE(schedule.points.size() == 2);
    CHECK(schedule.points[1].time == 600);
    CHECK(schedule.points[1].target_vms == 5);
}

TEST_CASE("schedule_from_plans rejects overlapping or gapped windows") {
    std::vector<ResourceRequirement> plans(2);
    plans[0].vm_count = 1;
    plans[0].valid_from = 0;
    plans[0].valid_until = 600;
    plans[1].vm_count = 1;
    plans[1].valid_from = 300;
    plans[1].valid_until = 900;
    CHECK_THROWS_AS(schedule_from_plans(plans, SimPolicy{}), data_error);
    plans[1].valid_from = 900;
    plans[1].valid_until = 1200;
    CHECK_THROWS_AS(schedule_from_plans(plans, SimPolicy{}), data_error);
}

TEST_CASE("compare_models normalizes rejections against the worst entry") {
    SimMetrics a, b, baseline;
    a.rejected_requests = 47;
    a.vm_hours = 60.0;
    b.rejected_requests = 50;
    b.vm_hours = 70.0;
    baseline.vm_hours = 100.0;
    const auto rows = compare_models({{"A", 1.0, a}, {"B", 2.0, b}}, baseline);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].norm_rejections == Catch::Approx(0.94));
    CHECK(rows[1].norm_rejections == Catch::Approx(1.00));
    CHECK(rows[0].norm_vm_hours == Catch::Approx(0.6));
    CHECK(rows[1].norm_vm_hours == Catch::Approx(0.7));
}

TEST_CASE("compare_models maps a single rejecting entry to one") {
    SimMetrics only, baseline;
    only.rejected_requests = 7;
    only.vm_hours = 10.0;
    baseline.vm_hours = 20.0;
    const auto rows = compare_models({{"only", 0.0, only}}, baseline);
    CHECK(rows[0].norm_rejections == 1.0);
}

TEST_CASE("compare_models maps an all-zero rejection column to zeros") {
    SimMetrics a, b, baseline;
    a.vm_hours = b.vm_hours = baseline.vm_hours = 10.0;
    const auto rows = compare_models({{"A", 0.0, a}, {"B", 0.0, b}}, baseline);
    CHECK(rows[0].norm_rejections == 0.0);
    CHECK(rows[1].norm_rejections == 0.0);
}

TEST_CASE("comparison CSV uses the documented layout") {
    std::vector<ComparisonRow> rows{{"ARIMA(1,2,1)", 55.75, 10.0, 46, 0.6518, 0.92}};
    std::ostringstream out;
    write_comparison_csv(out, rows);
    CHECK(out.str() ==
          "model,mse,norm_vm_hours,norm_rejections\n\"ARIMA(1,2,1)\",55.75,0.6518,0.92\n");
}

TEST_CASE("schedule JSON round-trips") {
    ProvisioningSchedule schedule{{{-120, 4}, {480, 9}}};
    const nlohmann::json j = schedule;
    const ProvisioningSchedule back = j.get<ProvisioningSchedule>();
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[0].time == -120);
    CHECK(back.points[1].target_vms == 9);
}
