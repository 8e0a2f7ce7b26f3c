#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "prescale/planner.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace prescale;
using testutil::brute_force_cost;
using testutil::random_catalog;

TEST_CASE("required_vms sizes by the deterministic capacity model") {
    const QosPolicy qos;
    CHECK(required_vms(0.0, qos) == 0);
    CHECK(required_vms(25.0, qos) == 3);       // ceil(2.5)
    CHECK(required_vms(50.0, qos) == 5);
    CHECK(required_vms(10.0, qos, 1.0) == 1);  // exactly on the boundary
    CHECK(required_vms(10.0, qos, 1.05) == 2); // headroom tips it over
    CHECK(required_vms(0.4, qos) == 1);        // min_vms floor
}

TEST_CASE("required_vms is monotone in rate and headroom") {
    const QosPolicy qos;
    int last = 0;
    for (double rate : {0.0, 3.0, 9.9, 10.0, 24.0, 25.1, 88.8, 250.0}) {
        const int vms = required_vms(rate, qos);
        CHECK(vms >= last);
        last = vms;
    }
    for (double rate : {7.0, 10.0, 33.3}) {
        int prev = 0;
        for (double headroom : {1.0, 1.1, 1.5, 2.0}) {
            const int vms = required_vms(rate, qos, headroom);
            CHECK(vms >= prev);
            prev = vms;
        }
    }
}

TEST_CASE("required_vms honors multi-core VMs") {
    QosPolicy qos;
    qos.cores_per_vm = 4;
    CHECK(required_vms(100.0, qos) == 3); // 10 cores / 4 per VM
}

TEST_CASE("plan_window sizes to the window maximum") {
    TimeSeries forecast{0, 5, std::vector<double>(60, 250.0)}; // 50 req/s
    const ResourceRequirement req = plan_window(forecast, QosPolicy{}, {});
    CHECK(req.vm_count == 5);
    CHECK(req.valid_from == 0);
    CHECK(req.valid_until == 300);
}

TEST_CASE("a persistent above alarm overrides a lower forecast") {
    TimeSeries forecast{0, 5, std::vector<double>(60, 250.0)}; // max 50 req/s
    Alarm alarm;
    alarm.observed = 120.0;
    alarm.direction = AlarmDirection::above;
    alarm.transiency = 0.2;
    CHECK(plan_window(forecast, QosPolicy{}, {alarm}).vm_count == 12);

    alarm.transiency = 0.9; // likely transient: forecast wins
    CHECK(plan_window(forecast, QosPolicy{}, {alarm}).vm_count == 5);

    alarm.transiency = 0.2;
    alarm.direction = AlarmDirection::below; // downward alarms never raise capacity
    CHECK(plan_window(forecast, QosPolicy{}, {alarm}).vm_count == 5);
}

TEST_CASE("plan_window keeps the forecast when the alarm rate is lower") {
    TimeSeries forecast{0, 5, std::vector<double>(60, 250.0)};
    Alarm alarm;
    alarm.observed = 30.0;
    alarm.direction = AlarmDirection::above;
    alarm.transiency = 0.0;
    CHECK(plan_window(forecast, QosPolicy{}, {alarm}).vm_count == 5);
}

TEST_CASE("plan_window rejects an empty forecast") {
    TimeSeries empty{0, 5, {}};
    CHECK_THROWS_AS(plan_window(empty, QosPolicy{}, {}), data_error);
}

TEST_CASE("capacity plan invariant holds without alarms") {
    const TimeSeries forecast{0, 5, {100, 260, 245, 180}};
    const QosPolicy qos;
    const ResourceRequirement req = plan_window(forecast, qos, {});
    double peak = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i)
        peak = std::max(peak, forecast.rate_at(i));
    CHECK(req.vm_count * (qos.cores_per_vm / qos.service_time_s) >= peak);
}

TEST_CASE("select_offers puts everything on a single qualifying offer") {
    ResourceRequirement req;
    req.vm_count = 4;
    const std::vector<ProviderOffer> catalog{{"a", 1, 2.0, 0.5, 60, 10}};
    const ProvisioningPlan plan = select_offers(req, catalog, 120);
    REQUIRE(plan.items.size() == 1);
    CHECK(plan.items[0].vm_count == 4);
    CHECK(plan.total_hourly_cost == Catch::Approx(2.0));
    CHECK(plan.exhaustive);
}

TEST_CASE("select_offers prefers the cheaper of two ample offers") {
    ResourceRequirement req;
    req.vm_count = 6;
    const std::vector<ProviderOffer> catalog{{"pricey", 1, 2.0, 2.0, 60, 100},
                                             {"value", 1, 2.0, 1.0, 60, 100}};
    const ProvisioningPlan plan = select_offers(req, catalog, 120);
    REQUIRE(plan.items.size() == 1);
    CHECK(plan.items[0].offer_id == "value");
    CHECK(plan.total_hourly_cost == Catch::Approx(6.0));
}

TEST_CASE("select_offers with availability limits matches brute force") {
    ResourceRequirement req;
    req.vm_count = 7;
    req.cores_per_vm = 1;
    req.ram_per_vm_gb = 2.0;
    const std::vector<ProviderOffer> catalog{{"a", 1, 4.0, 0.9, 30, 3},
                                             {"b", 2, 4.0, 0.6, 90, 3},
                                             {"c", 1, 2.0, 1.4, 10, 5}};
    const ProvisioningPlan plan = select_offers(req, catalog, 120);
    const double oracle = brute_force_cost(7, catalog, 1, 2.0, 120);
    CHECK(plan.total_hourly_cost == Catch::Approx(oracle));
    CHECK(plan.exhaustive);
    int total = 0;
    for (const PlanItem& item : plan.items)
        total += item.vm_count;
    CHECK(total == 7);
}

TEST_CASE("select_offers cost equals brute force on random capped catalogs") {
    rng::SplitMix64 gen(123);
    int solved = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto catalog = random_catalog(gen, 2 + gen.next_u64() % 4);
        ResourceRequirement req;
        req.vm_count = static_cast<int>(gen.next_u64() % 8);
        req.cores_per_vm = 1;
        req.ram_per_vm_gb = 2.0;
        const double oracle = brute_force_cost(req.vm_count, catalog, 1, 2.0, 150);
        if (oracle == std::numeric_limits<double>::infinity()) {
            CHECK_THROWS_AS(select_offers(req, catalog, 150), infeasible_error);
            continue;
        }
        const ProvisioningPlan plan = select_offers(req, catalog, 150);
        CHECK(plan.total_hourly_cost == Catch::Approx(oracle));
        for (const PlanItem& item : plan.items) {
            for (const ProviderOffer& offer : catalog)
                if (offer.id == item.offer_id) {
                    CHECK(item.vm_count <= offer.available_count);
                    CHECK(offer.boot_delay_s <= 150);
                }
        }
        ++solved;
    }
    CHECK(solved > 0);
}

TEST_CASE("select_offers names the binding constraint") {
    ResourceRequirement req;
    req.vm_count = 10;
    req.cores_per_vm = 2;
    const std::vector<ProviderOffer> catalog{{"small", 1, 8.0, 0.1, 10, 99},
                                             {"slow", 4, 8.0, 0.1, 900, 99}};
    try {
        select_offers(req, catalog, 120);
        FAIL("expected infeasible_error");
    } catch (const infeasible_error& ex) {
        const std::string what = ex.what();
        CHECK(what.find("deadline") != std::string::npos);
    }

    const std::vector<ProviderOffer> scarce{{"tiny", 2, 8.0, 0.1, 10, 3}};
    try {
        select_offers(req, scarce, 120);
        FAIL("expected infeasible_error");
    } catch (const infeasible_error& ex) {
        CHECK(std::string(ex.what()).find("capacity") != std::string::npos);
    }
}

TEST_CASE("select_offers requests VMs early enough to boot") {
    ResourceRequirement req;
    req.vm_count = 2;
    req.valid_from = 1000;
    const std::vector<ProviderOffer> catalog{{"a", 1, 2.0, 0.5, 60, 10}};
    const ProvisioningPlan plan = select_offers(req, catalog, 120);
    REQUIRE(plan.items.size() == 1);
    CHECK(plan.items[0].request_time == 940);
}

TEST_CASE("catalog and plan JSON round-trip") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("catalog.json"),
                         R"([{"id":"x","cores":2,"ram_gb":4.0,"price_per_vm_hour":0.25,)"
                         R"("boot_delay_s":45,"available":12}])");
    const auto catalog = load_catalog(dir.file("catalog.json"));
    REQUIRE(catalog.size() == 1);
    CHECK(catalog[0].id == "x");
    CHECK(catalog[0].cores == 2);
    CHECK(catalog[0].available_count == 12);

    ResourceRequirement req;
    req.vm_count = 3;
    const ProvisioningPlan plan = select_offers(req, catalog, 120);
    const nlohmann::json j = plan;
    const ProvisioningPlan back = j.get<ProvisioningPlan>();
    CHECK(back.total_hourly_cost == plan.total_hourly_cost);
    CHECK(back.items.size() == plan.items.size());
    CHECK(back.exhaustive == plan.exhaustive);
}
