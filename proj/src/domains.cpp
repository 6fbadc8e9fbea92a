#include "varmdp/domains.hpp"

#include "varmdp/analysis.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace varmdp {

namespace {

size_t sas_index(int S, int A, int s, int a, int s_next) {
    return (static_cast<size_t>(s) * A + a) * S + s_next;
}

} // namespace

GeneratedDomain riverswim(Real gamma) {
    const int S = 5;
    const int A = 2; // 0 = left, 1 = right
    Vec probs(static_cast<size_t>(S) * A * S, 0.0);
    Vec rewards(static_cast<size_t>(S) * A * S, 0.0);

    for (int s = 0; s < S; ++s) {
        // Left: deterministic step toward the left bank.
        const int left_target = std::max(0, s - 1);
        probs[sas_index(S, A, s, 0, left_target)] = 1.0;

        // Right: stochastic progress against the current.
        if (s == 0) {
            probs[sas_index(S, A, s, 1, 0)] = 0.7;
            probs[sas_index(S, A, s, 1, 1)] = 0.3;
        } else if (s == S - 1) {
            probs[sas_index(S, A, s, 1, S - 1)] = 0.9;
            probs[sas_index(S, A, s, 1, S - 2)] = 0.1;
        } else {
            probs[sas_index(S, A, s, 1, s + 1)] = 0.3;
            probs[sas_index(S, A, s, 1, s)] = 0.6;
            probs[sas_index(S, A, s, 1, s - 1)] = 0.1;
        }
    }
    // Small consolation for staying on the left bank, large reward for
    // holding the right bank.
    rewards[sas_index(S, A, 0, 0, 0)] = 5.0;
    rewards[sas_index(S, A, S - 1, 1, S - 1)] = 1000.0;

    Vec p0(S, 0.0);
    p0[0] = 1.0; // the swimmer starts at the left bank

    GeneratedDomain out{TabularMdp(S, A, std::move(rewards), gamma, std::move(p0)),
                        TransitionModel(S, A, std::move(probs))};
    return out;
}

GeneratedDomain inventory(const InventoryParams& params) {
    if (params.capacity < 2) { throw InvalidInput("inventory: capacity must be >= 2"); }
    const int S = params.capacity; // inventory level 0 .. capacity-1
    const int A = params.capacity; // order quantity, clipped
    Vec probs(static_cast<size_t>(S) * A * S, 0.0);
    Vec rewards(static_cast<size_t>(S) * A * S, 0.0);

    // Demand distribution over {0, ..., S-1}: CDF-difference bins with the
    // tail mass folded into the end bins.
    const auto demand_dist = [&](Real mean, Real sd) {
        Vec q(S, 0.0);
        for (int d = 0; d < S; ++d) {
            const Real lo = (d == 0) ? -std::numeric_limits<Real>::infinity()
                                     : (d - 0.5 - mean) / sd;
            const Real hi = (d == S - 1) ? std::numeric_limits<Real>::infinity()
                                         : (d + 0.5 - mean) / sd;
            const Real cdf_lo = std::isinf(lo) ? 0.0 : std_normal_cdf(lo);
            const Real cdf_hi = std::isinf(hi) ? 1.0 : std_normal_cdf(hi);
            q[d] = cdf_hi - cdf_lo;
        }
        return q;
    };
    const Vec base_demand = demand_dist(params.sale_price / 4.0, params.sale_price / 6.0);

    for (int s = 0; s < S; ++s) {
        Vec demand = base_demand;
        if (params.state_dependent_demand) {
            const Real level = std::max<Real>(1.0, s);
            demand = demand_dist(level / 4.0, level / 6.0);
        }
        for (int a = 0; a < A; ++a) {
            const int stock = std::min(s + a, S - 1); // orders beyond capacity are clipped
            const int purchased = stock - s;
            for (int d = 0; d < S; ++d) {
                if (demand[d] <= 0.0) { continue; }
                const int next = std::max(stock - d, 0);
                const int sales = stock - next;
                probs[sas_index(S, A, s, a, next)] += demand[d];
                rewards[sas_index(S, A, s, a, next)] =
                    params.sale_price * sales - params.holding_cost * next -
                    params.purchase_cost * purchased;
            }
        }
    }

    Vec p0(S, 0.0);
    p0[0] = 1.0; // start with an empty warehouse

    GeneratedDomain out{TabularMdp(S, A, std::move(rewards), params.gamma, std::move(p0)),
                        TransitionModel(S, A, std::move(probs))};
    return out;
}

GeneratedDomain population_model(const PopulationParams& params) {
    if (params.size < 2 || params.actions < 1) {
        throw InvalidInput("population_model: need size >= 2 and actions >= 1");
    }
    const int S = params.size;
    const int A = params.actions;
    Vec probs(static_cast<size_t>(S) * A * S, 0.0);
    Vec rewards(static_cast<size_t>(S) * A * S, 0.0);

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            Real* row = probs.data() + sas_index(S, A, s, a, 0);
            if (s == 0) {
                // Near-extinct population: mostly stays extinct, with a small
                // chance of re-invasion.
                row[0] = params.extinction_floor;
                if (S >= 3) {
                    row[1] = 0.75 * (1.0 - params.extinction_floor);
                    row[2] = 0.25 * (1.0 - params.extinction_floor);
                } else {
                    row[1] = 1.0 - params.extinction_floor;
                }
            } else {
                // Ricker growth suppressed by the control action, lognormal
                // noise discretized onto the population bins.
                const Real suppression =
                    (A == 1) ? 1.0
                             : 1.0 - params.max_control_effect * static_cast<Real>(a) /
                                         static_cast<Real>(A - 1);
                const Real mean_next =
                    std::max(1e-3, static_cast<Real>(s) *
                                       std::exp(params.growth_rate *
                                                (1.0 - s / params.carrying_capacity)) *
                                       suppression);
                const Real sigma = params.noise_sd;
                const Real mu = std::log(mean_next) - 0.5 * sigma * sigma;
                for (int k = 0; k < S; ++k) {
                    const Real lo = (k == 0) ? -std::numeric_limits<Real>::infinity()
                                             : (std::log(k - 0.5) - mu) / sigma;
                    const Real hi = (k == S - 1) ? std::numeric_limits<Real>::infinity()
                                                 : (std::log(k + 0.5) - mu) / sigma;
                    const Real cdf_lo = std::isinf(lo) ? 0.0 : std_normal_cdf(lo);
                    const Real cdf_hi = std::isinf(hi) ? 1.0 : std_normal_cdf(hi);
                    row[k] = cdf_hi - cdf_lo;
                }
            }
            const Real reward = -(params.damage_cost * s + params.action_cost * a);
            for (int k = 0; k < S; ++k) {
                rewards[sas_index(S, A, s, a, k)] = reward;
            }
        }
    }

    Vec p0(S, 0.0);
    p0[std::min(S - 1, 10)] = 1.0; // a small established infestation

    GeneratedDomain out{TabularMdp(S, A, std::move(rewards), params.gamma, std::move(p0)),
                        TransitionModel(S, A, std::move(probs))};
    return out;
}

GeneratedDomain make_domain(const DomainSpec& spec) {
    const auto get = [&](const std::string& key, Real fallback) {
        const auto it = spec.parameters.find(key);
        return it == spec.parameters.end() ? fallback : it->second;
    };
    std::set<std::string> known;
    GeneratedDomain domain;
    if (spec.name == "riverswim") {
        known = {"gamma"};
        domain = riverswim(get("gamma", 0.95));
    } else if (spec.name == "inventory") {
        known = {"gamma", "capacity", "sale_price", "holding_cost", "purchase_cost",
                 "state_dependent_demand"};
        InventoryParams params;
        params.capacity = static_cast<int>(get("capacity", params.capacity));
        params.sale_price = get("sale_price", params.sale_price);
        params.holding_cost = get("holding_cost", params.holding_cost);
        params.purchase_cost = get("purchase_cost", params.purchase_cost);
        params.gamma = get("gamma", params.gamma);
        params.state_dependent_demand = get("state_dependent_demand", 0.0) != 0.0;
        domain = inventory(params);
    } else if (spec.name == "population") {
        known = {"gamma", "size", "actions", "growth_rate", "carrying_capacity",
                 "max_control_effect", "noise_sd", "damage_cost", "action_cost",
                 "extinction_floor"};
        PopulationParams params;
        params.size = static_cast<int>(get("size", params.size));
        params.actions = static_cast<int>(get("actions", params.actions));
        params.growth_rate = get("growth_rate", params.growth_rate);
        params.carrying_capacity = get("carrying_capacity", params.carrying_capacity);
        params.max_control_effect = get("max_control_effect", params.max_control_effect);
        params.noise_sd = get("noise_sd", params.noise_sd);
        params.damage_cost = get("damage_cost", params.damage_cost);
        params.action_cost = get("action_cost", params.action_cost);
        params.extinction_floor = get("extinction_floor", params.extinction_floor);
        params.gamma = get("gamma", params.gamma);
        domain = population_model(params);
    } else {
        throw InvalidInput("make_domain: unknown domain '" + spec.name + "'");
    }
    for (const auto& [key, value] : spec.parameters) {
        (void)value;
        if (!known.contains(key)) {
            throw InvalidInput("make_domain: unknown parameter '" + key + "' for domain '" +
                               spec.name + "'");
        }
    }
    return domain;
}

BatchDataset sample_dataset(const TabularMdp& mdp, const TransitionModel& true_model,
                            long n_tuples, uint64_t seed, int episode_len) {
    if (n_tuples < 1) { throw InvalidInput("sample_dataset: n_tuples must be >= 1"); }
    if (episode_len < 1) { throw InvalidInput("sample_dataset: episode_len must be >= 1"); }
    const int A = mdp.num_actions;

    RngStream rng = RngStream(seed).child({0x64617461ULL}); // "data"
    const auto sample_categorical = [&](std::span<const Real> dist) {
        const Real u = rng.uniform();
        Real acc = 0.0;
        for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
            acc += dist[i];
            if (u <= acc) { return i; }
        }
        return static_cast<int>(dist.size()) - 1;
    };

    BatchDataset dataset;
    dataset.tuples.reserve(n_tuples);
    int state = sample_categorical(mdp.initial_dist);
    int steps_in_episode = 0;
    while (static_cast<long>(dataset.tuples.size()) < n_tuples) {
        if (steps_in_episode == episode_len) {
            state = sample_categorical(mdp.initial_dist);
            steps_in_episode = 0;
        }
        const int action = static_cast<int>(rng.uniform_index(A));
        const int next = sample_categorical(true_model.row(state, action));
        dataset.tuples.push_back({state, action, mdp.reward(state, action, next), next});
        state = next;
        ++steps_in_episode;
    }
    return dataset;
}

} // namespace varmdp
