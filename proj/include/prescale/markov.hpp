#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prescale/errors.hpp"
#include "prescale/rng.hpp"
#include "prescale/time_series.hpp"

namespace prescale {

/// Workload-level Markov chain. States are rate bins: state s covers
/// [bin_edges[s-1], bin_edges[s]) with open ends below the first and above
/// the last edge, so any rate maps to a state and out-of-range rates clamp
/// naturally.
struct MarkovChain {
    std::vector<double> bin_edges;                 // strictly ascending, size S-1
    std::vector<std::vector<double>> transition;   // S x S, row-stochastic
    std::vector<int> anomalous_states;             // sorted state indices

    int states() const { return static_cast<int>(transition.size()); }

    int state_of(double rate) const {
        return static_cast<int>(
            std::upper_bound(bin_edges.begin(), bin_edges.end(), rate) - bin_edges.begin());
    }

    bool is_anomalous(int state) const {
        return std::binary_search(anomalous_states.begin(), anomalous_states.end(), state);
    }

    void validate() const {
        if (transition.empty())
            throw data_error("MarkovChain: no states");
        if (bin_edges.size() + 1 != transition.size())
            throw data_error("MarkovChain: edge/state count mismatch");
        for (std::size_t i = 1; i < bin_edges.size(); ++i)
            if (!(bin_edges[i] > bin_edges[i - 1]))
                throw data_error("MarkovChain: bin edges must be strictly ascending");
        for (const auto& row : transition) {
            if (row.size() != transition.size())
                throw data_error("MarkovChain: transition matrix must be square");
            double sum = 0.0;
            for (double p : row) {
                if (!(p >= 0.0))
                    throw data_error("MarkovChain: negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw data_error("MarkovChain: row does not sum to 1");
        }
        for (int s : anomalous_states)
            if (s < 0 || s >= states())
                throw data_error("MarkovChain: anomalous state out of range");
    }
};

struct AnomalyForecast {
    int horizon_steps = 0;
    double probability = 0.0; // first passage into any anomalous state
    double confidence = 0.0;  // 1 - normalized entropy of the current row
};

/// Builds the chain from history: bin edges at equal-count quantiles,
/// transition counts between consecutive samples with add-one smoothing,
/// and states at or above the anomaly_quantile rate marked anomalous.
/// Duplicate quantile edges (low-cardinality history) are dropped, which
/// shrinks the state count below n_states.
inline MarkovChain fit_markov(const TimeSeries& history, int n_states,
                              double anomaly_quantile) {
    if (n_states < 2)
        throw std::invalid_argument("fit_markov: need at least 2 states");
    if (!(anomaly_quantile > 0.0 && anomaly_quantile < 1.0))
        throw std::invalid_argument("fit_markov: anomaly_quantile must be in (0,1)");
    if (history.size() < 2)
        throw data_error("fit_markov: history must hold at least 2 samples");

    const std::size_t n = history.size();
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i)
        sorted[i] = history.rate_at(i);
    std::sort(sorted.begin(), sorted.end());

    MarkovChain chain;
    for (int k = 1; k < n_states; ++k) {
        const std::size_t idx = (n * static_cast<std::size_t>(k)) / static_cast<std::size_t>(n_states);
        const double edge = sorted[std::min(idx, n - 1)];
        if (chain.bin_edges.empty() || edge > chain.bin_edges.back())
            chain.bin_edges.push_back(edge);
    }
    const int S = static_cast<int>(chain.bin_edges.size()) + 1;

    std::vector<std::vector<double>> counts(static_cast<std::size_t>(S),
                                            std::vector<double>(static_cast<std::size_t>(S), 0.0));
    chain.transition = counts; // placeholder so state_of works below
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const int from = chain.state_of(history.rate_at(i));
        const int to = chain.state_of(history.rate_at(i + 1));
        counts[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)] += 1.0;
    }
    for (int i = 0; i < S; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < S; ++j) {
            counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += 1.0; // add-one
            row_sum += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < S; ++j)
            counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= row_sum;
    }
    chain.transition = std::move(counts);

    const std::size_t q_idx = std::min(
        n - 1, static_cast<std::size_t>(static_cast<double>(n) * anomaly_quantile));
    const double threshold = sorted[q_idx];
    for (int s = 1; s < S; ++s)
        if (chain.bin_edges[static_cast<std::size_t>(s - 1)] >= threshold)
            chain.anomalous_states.push_back(s);
    if (chain.anomalous_states.empty())
        chain.anomalous_states.push_back(chain.state_of(threshold)); // bin containing the quantile
    chain.validate();
    return chain;
}

/// First-passage probability into any anomalous state within the horizon:
/// anomalous states are made absorbing and the occupancy vector is pushed
/// through the modified matrix. Confidence is one minus the normalized
/// entropy of the current state's transition row (a peaked row predicts
/// confidently).
inline AnomalyForecast predict_anomaly(const MarkovChain& chain, double current_rate,
                                       int horizon_steps) {
    if (horizon_steps < 1)
        throw std::invalid_argument("predict_anomaly: horizon must be >= 1");
    chain.validate();
    const int S = chain.states();
    const int start = chain.state_of(current_rate);

    AnomalyForecast out;
    out.horizon_steps = horizon_steps;

    const auto& row = chain.transition[static_cast<std::size_t>(start)];
    if (S <= 1) {
        out.confidence = 1.0;
    } else {
        double entropy = 0.0;
        for (double p : row)
            if (p > 0.0)
                entropy -= p * std::log(p);
        out.confidence = 1.0 - entropy / std::log(static_cast<double>(S));
    }

    if (chain.is_anomalous(start)) {
        out.probability = 1.0;
        return out;
    }

    std::vector<double> occupancy(static_cast<std::size_t>(S), 0.0);
    occupancy[static_cast<std::size_t>(start)] = 1.0;
    std::vector<double> next(static_cast<std::size_t>(S), 0.0);
    for (int step = 0; step < horizon_steps; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < S; ++i) {
            const double mass = occupancy[static_cast<std::size_t>(i)];
            if (mass == 0.0)
                continue;
            if (chain.is_anomalous(i)) {
                next[static_cast<std::size_t>(i)] += mass; // absorbing
                continue;
            }
            const auto& r = chain.transition[static_cast<std::size_t>(i)];
            for (int j = 0; j < S; ++j)
                next[static_cast<std::size_t>(j)] += mass * r[static_cast<std::size_t>(j)];
        }
        occupancy.swap(next);
    }
    double prob = 0.0;
    for (int s : chain.anomalous_states)
        prob += occupancy[static_cast<std::size_t>(s)];
    out.probability = std::min(1.0, std::max(0.0, prob));
    return out;
}

/// Adds `boost` transition mass into each target state on every row and
/// renormalizes. boost 0 is the identity; large boosts concentrate every row
/// on the targets.
inline MarkovChain perturb_markov(const MarkovChain& chain, double boost,
                                  const std::vector<int>& target_states) {
    if (!(boost >= 0.0))
        throw std::invalid_argument("perturb_markov: boost must be >= 0");
    chain.validate();
    for (int t : target_states)
        if (t < 0 || t >= chain.states())
            throw std::invalid_argument("perturb_markov: target state out of range");
    MarkovChain out = chain;
    if (boost == 0.0 || target_states.empty())
        return out;
    for (auto& row : out.transition) {
        for (int t : target_states)
            row[static_cast<std::size_t>(t)] += boost;
        double sum = 0.0;
        for (double p : row)
            sum += p;
        for (double& p : row)
            p /= sum;
    }
    return out;
}

/// Seeded state-sequence sampler, for generating workloads that follow (or,
/// after perturbation, deviate from) a learned chain.
inline std::vector<int> sample_states(const MarkovChain& chain, std::size_t n,
                                      std::uint64_t seed, int start_state = 0) {
    chain.validate();
    if (start_state < 0 || start_state >= chain.states())
        throw std::invalid_argument("sample_states: start state out of range");
    rng::SplitMix64 gen(seed);
    std::vector<int> states;
    states.reserve(n);
    int current = start_state;
    for (std::size_t i = 0; i < n; ++i) {
        states.push_back(current);
        const auto& row = chain.transition[static_cast<std::size_t>(current)];
        const double u = gen.next_unit();
        double acc = 0.0;
        int next_state = chain.states() - 1;
        for (int j = 0; j < chain.states(); ++j) {
            acc += row[static_cast<std::size_t>(j)];
            if (u <= acc) {
                next_state = j;
                break;
            }
        }
        current = next_state;
    }
    return states;
}

inline void to_json(nlohmann::json& j, const MarkovChain& chain) {
    j = nlohmann::json{{"schema", 1},
                       {"bin_edges", chain.bin_edges},
                       {"transition", chain.transition},
                       {"anomalous_states", chain.anomalous_states}};
}

inline void from_json(const nlohmann::json& j, MarkovChain& chain) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("MarkovChain: unsupported schema version");
    j.at("bin_edges").get_to(chain.bin_edges);
    j.at("transition").get_to(chain.transition);
    j.at("anomalous_states").get_to(chain.anomalous_states);
    chain.validate();
}

inline void save_chain(const std::string& path, const MarkovChain& chain) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open chain file for writing: " + path);
    out << nlohmann::json(chain).dump(2) << '\n';
}

inline MarkovChain load_chain(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open chain file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<MarkovChain>();
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("malformed chain file " + path + ": " + ex.what());
    }
}

} // namespace prescale
