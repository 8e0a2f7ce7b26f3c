#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "prescale/anomaly.hpp"
#include "prescale/errors.hpp"
#include "prescale/time_series.hpp"

namespace prescale {

struct QosPolicy {
    double service_time_s = 0.100;    // per request, one core
    double response_target_s = 0.500;
    int cores_per_vm = 1;

    void validate() const {
        if (!(service_time_s > 0.0) || !(service_time_s <= response_target_s))
            throw std::invalid_argument("QosPolicy: need 0 < service_time <= response_target");
        if (cores_per_vm < 1)
            throw std::invalid_argument("QosPolicy: cores_per_vm must be >= 1");
    }
};

/// Vendor-agnostic capacity requirement for one provisioning window.
struct ResourceRequirement {
    int vm_count = 0;
    int cores_per_vm = 1;
    double ram_per_vm_gb = 2.0;
    std::int64_t valid_from = 0;
    std::int64_t valid_until = 0;
};

struct ProviderOffer {
    std::string id;
    int cores = 1;
    double ram_gb = 1.0;
    double price_per_vm_hour = 0.0;
    int boot_delay_s = 0;
    int available_count = 0;
};

struct PlanItem {
    std::string offer_id;
    int vm_count = 0;
    std::int64_t request_time = 0; // early enough for boot to finish by valid_from
};

struct ProvisioningPlan {
    std::vector<PlanItem> items;
    double total_hourly_cost = 0.0;
    bool exhaustive = false; // true when the assignment is a proven optimum
};

/// Deterministic capacity model: one core serves 1/service_time requests per
/// second, so cores = headroom * rate * service_time, rounded up to whole
/// VMs. A nonzero rate always gets at least min_vms.
inline int required_vms(double peak_rate, const QosPolicy& qos, double headroom = 1.0,
                        int min_vms = 1) {
    qos.validate();
    if (!(peak_rate >= 0.0))
        throw std::invalid_argument("required_vms: peak_rate must be >= 0");
    if (!(headroom >= 1.0))
        throw std::invalid_argument("required_vms: headroom must be >= 1");
    if (peak_rate == 0.0)
        return 0;
    const double cores = headroom * peak_rate * qos.service_time_s;
    const int vms = static_cast<int>(std::ceil(cores / qos.cores_per_vm));
    return std::max(vms, min_vms);
}

/// Sizes one provisioning window to its maximum forecast rate. A live alarm
/// that is unlikely to be transient (transiency < 0.5, direction above)
/// overrides the forecast with the observed rate when that is larger — the
/// reactive second line of defense.
inline ResourceRequirement plan_window(const TimeSeries& forecast, const QosPolicy& qos,
                                       const std::vector<Alarm>& alarms,
                                       double headroom = 1.0, double ram_per_vm_gb = 2.0) {
    if (forecast.values.empty())
        throw data_error("plan_window: empty forecast window");
    forecast.validate();
    double peak_rate = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i)
        peak_rate = std::max(peak_rate, forecast.rate_at(i));
    for (const Alarm& alarm : alarms)
        if (alarm.direction == AlarmDirection::above && alarm.transiency < 0.5)
            peak_rate = std::max(peak_rate, alarm.observed);

    ResourceRequirement req;
    req.vm_count = required_vms(peak_rate, qos, headroom);
    req.cores_per_vm = qos.cores_per_vm;
    req.ram_per_vm_gb = ram_per_vm_gb;
    req.valid_from = forecast.start_epoch;
    req.valid_until = forecast.end_epoch();
    return req;
}

namespace detail {

struct OfferAssignment {
    std::vector<int> counts; // aligned with the qualifying-offer list
    double cost = std::numeric_limits<double>::infinity();
    int max_boot_delay = 0;

    bool better_than(const OfferAssignment& other) const {
        if (cost != other.cost)
            return cost < other.cost;
        if (max_boot_delay != other.max_boot_delay)
            return max_boot_delay < other.max_boot_delay;
        return counts > other.counts; // offers sorted by id: favor earlier ids
    }

    bool feasible() const {
        return cost < std::numeric_limits<double>::infinity();
    }
};

inline void enumerate_assignments(const std::vector<ProviderOffer>& offers, std::size_t index,
                                  int remaining, std::vector<int>& counts, double cost,
                                  int max_boot, OfferAssignment& best) {
    if (index + 1 == offers.size()) {
        if (remaining > offers[index].available_count)
            return;
        counts[index] = remaining;
        const double total = cost + remaining * offers[index].price_per_vm_hour;
        const int boot = remaining > 0 ? std::max(max_boot, offers[index].boot_delay_s) : max_boot;
        OfferAssignment candidate{counts, total, boot};
        if (candidate.better_than(best))
            best = candidate;
        counts[index] = 0;
        return;
    }
    const int cap = std::min(remaining, offers[index].available_count);
    for (int take = 0; take <= cap; ++take) {
        counts[index] = take;
        enumerate_assignments(offers, index + 1, remaining - take, counts,
                              cost + take * offers[index].price_per_vm_hour,
                              take > 0 ? std::max(max_boot, offers[index].boot_delay_s) : max_boot,
                              best);
    }
    counts[index] = 0;
}

} // namespace detail

/// Minimum-total-price assignment of the requirement's VMs to qualifying
/// offers (enough cores and RAM per VM, boot delay within the deadline,
/// availability respected). Instances whose assignment space is at most 1e5
/// combinations are solved exactly; larger ones greedily by price, reported
/// through the `exhaustive` flag. Cost ties break toward the smaller maximum
/// boot delay, then lexicographic provider id.
inline ProvisioningPlan select_offers(const ResourceRequirement& req,
                                      const std::vector<ProviderOffer>& catalog,
                                      int deadline_seconds) {
    if (catalog.empty())
        throw std::invalid_argument("select_offers: empty catalog");
    if (req.vm_count < 0)
        throw std::invalid_argument("select_offers: negative vm_count");

    std::vector<ProviderOffer> qualifying;
    int spec_rejected = 0, deadline_rejected = 0;
    for (const ProviderOffer& offer : catalog) {
        if (offer.cores < req.cores_per_vm || offer.ram_gb < req.ram_per_vm_gb) {
            ++spec_rejected;
            continue;
        }
        if (offer.boot_delay_s > deadline_seconds) {
            ++deadline_rejected;
            continue;
        }
        if (offer.available_count > 0)
            qualifying.push_back(offer);
    }
    std::sort(qualifying.begin(), qualifying.end(),
              [](const ProviderOffer& a, const ProviderOffer& b) { return a.id < b.id; });

    ProvisioningPlan plan;
    if (req.vm_count == 0) {
        plan.exhaustive = true;
        return plan;
    }
    if (qualifying.empty())
        throw infeasible_error(
            "select_offers: no qualifying offer (" + std::to_string(spec_rejected) +
            " fail cores/ram, " + std::to_string(deadline_rejected) + " exceed deadline of " +
            std::to_string(deadline_seconds) + "s)");
    long long total_available = 0;
    for (const ProviderOffer& offer : qualifying)
        total_available += offer.available_count;
    if (total_available < req.vm_count)
        throw infeasible_error("select_offers: capacity binding: " +
                               std::to_string(total_available) + " qualifying VMs available, " +
                               std::to_string(req.vm_count) + " required");

    // Assignment-space bound: product over offers of (cap+1).
    double combinations = 1.0;
    for (const ProviderOffer& offer : qualifying) {
        combinations *= static_cast<double>(std::min(offer.available_count, req.vm_count) + 1);
        if (combinations > 1e5)
            break;
    }

    std::vector<int> counts(qualifying.size(), 0);
    if (combinations <= 1e5) {
        detail::OfferAssignment best;
        detail::enumerate_assignments(qualifying, 0, req.vm_count, counts, 0.0, 0, best);
        counts = best.counts;
        plan.exhaustive = true;
    } else {
        std::vector<std::size_t> by_price(qualifying.size());
        for (std::size_t i = 0; i < by_price.size(); ++i)
            by_price[i] = i;
        std::sort(by_price.begin(), by_price.end(), [&](std::size_t a, std::size_t b) {
            const ProviderOffer& x = qualifying[a];
            const ProviderOffer& y = qualifying[b];
            if (x.price_per_vm_hour != y.price_per_vm_hour)
                return x.price_per_vm_hour < y.price_per_vm_hour;
            if (x.boot_delay_s != y.boot_delay_s)
                return x.boot_delay_s < y.boot_delay_s;
            return x.id < y.id;
        });
        int remaining = req.vm_count;
        for (std::size_t i : by_price) {
            const int take = std::min(remaining, qualifying[i].available_count);
            counts[i] = take;
            remaining -= take;
            if (remaining == 0)
                break;
        }
    }

    for (std::size_t i = 0; i < qualifying.size(); ++i) {
        if (counts[i] == 0)
            continue;
        plan.items.push_back({qualifying[i].id, counts[i],
                              req.valid_from - qualifying[i].boot_delay_s});
        plan.total_hourly_cost += counts[i] * qualifying[i].price_per_vm_hour;
    }
    return plan;
}

inline void to_json(nlohmann::json& j, const ProviderOffer& offer) {
    j = nlohmann::json{{"id", offer.id},
                       {"cores", offer.cores},
                       {"ram_gb", offer.ram_gb},
                       {"price_per_vm_hour", offer.price_per_vm_hour},
                       {"boot_delay_s", offer.boot_delay_s},
                       {"available", offer.available_count}};
}

inline void from_json(const nlohmann::json& j, ProviderOffer& offer) {
    j.at("id").get_to(offer.id);
    j.at("cores").get_to(offer.cores);
    j.at("ram_gb").get_to(offer.ram_gb);
    j.at("price_per_vm_hour").get_to(offer.price_per_vm_hour);
    j.at("boot_delay_s").get_to(offer.boot_delay_s);
    j.at("available").get_to(offer.available_count);
}

/// Catalog file: a JSON array of offers.
inline std::vector<ProviderOffer> load_catalog(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open catalog file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<std::vector<ProviderOffer>>();
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("malformed catalog file " + path + ": " + ex.what());
    }
}

inline void to_json(nlohmann::json& j, const PlanItem& item) {
    j = nlohmann::json{{"offer_id", item.offer_id},
                       {"vm_count", item.vm_count},
                       {"request_time", item.request_time}};
}

inline void from_json(const nlohmann::json& j, PlanItem& item) {
    j.at("offer_id").get_to(item.offer_id);
    j.at("vm_count").get_to(item.vm_count);
    j.at("request_time").get_to(item.request_time);
}

inline void to_json(nlohmann::json& j, const ProvisioningPlan& plan) {
    j = nlohmann::json{{"schema", 1},
                       {"items", plan.items},
                       {"total_hourly_cost", plan.total_hourly_cost},
                       {"exhaustive", plan.exhaustive}};
}

inline void from_json(const nlohmann::json& j, ProvisioningPlan& plan) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("ProvisioningPlan: unsupported schema version");
    j.at("items").get_to(plan.items);
    j.at("total_hourly_cost").get_to(plan.total_hourly_cost);
    j.at("exhaustive").get_to(plan.exhaustive);
}

inline void to_json(nlohmann::json& j, const ResourceRequirement& req) {
    j = nlohmann::json{{"vm_count", req.vm_count},
                       {"cores_per_vm", req.cores_per_vm},
                       {"ram_per_vm_gb", req.ram_per_vm_gb},
                       {"valid_from", req.valid_from},
                       {"valid_until", req.valid_until}};
}

inline void from_json(const nlohmann::json& j, ResourceRequirement& req) {
    j.at("vm_count").get_to(req.vm_count);
    j.at("cores_per_vm").get_to(req.cores_per_vm);
    j.at("ram_per_vm_gb").get_to(req.ram_per_vm_gb);
    j.at("valid_from").get_to(req.valid_from);
    j.at("valid_until").get_to(req.valid_until);
}

} // namespace prescale
