// Benchmark MDP generators and the batch-data sampler.
//
// Riverswim follows the standard five-state instantiation (stochastic right
// swim, deterministic left, small reward at the left bank, large at the
// right). Inventory uses sale price 3.99, holding cost 0.03, purchase cost
// 2.219 with normally distributed demand discretized by CDF-difference
// binning. The pest-population model is a documented reconstruction:
// Ricker-style stochastic growth with action-dependent suppression,
// lognormal noise discretized onto population bins, and costs for both
// damage and control.
#pragma once

#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"

#include <map>
#include <string>

namespace varmdp {

struct DomainSpec {
    std::string name; // riverswim | inventory | population
    std::map<std::string, Real> parameters;
    uint64_t seed = 0;
};

struct GeneratedDomain {
    TabularMdp mdp;
    TransitionModel true_model;
};

/// Five river positions, two actions (left = 0, right = 1).
/// Right succeeds with 0.3, stays with 0.6, slips back with 0.1 at interior
/// states; left is deterministic. Reward 5 for holding the left bank, 1000
/// for holding the right bank. gamma defaults to 0.95.
GeneratedDomain riverswim(Real gamma = 0.95);

struct InventoryParams {
    int capacity = 30;
    Real sale_price = 3.99;
    Real holding_cost = 0.03;
    Real purchase_cost = 2.219;
    Real gamma = 0.95;
    // Demand ~ Normal(sale_price/4, sale_price/6) by default. The flag below
    // switches to the alternative reading where the demand mean and sd scale
    // with the inventory level instead of the sale price.
    bool state_dependent_demand = false;
};
GeneratedDomain inventory(const InventoryParams& params = {});

struct PopulationParams {
    int size = 50;   // population bins 0 .. size-1
    int actions = 5; // control intensities
    Real growth_rate = 0.25;       // Ricker intrinsic growth
    Real carrying_capacity = 35.0;
    Real max_control_effect = 0.55; // strongest action multiplies growth by 1 - effect
    Real noise_sd = 0.3;            // lognormal dispersion of next population
    Real damage_cost = 10.0;        // per population unit per step
    Real action_cost = 30.0;        // per control-intensity unit per step
    Real extinction_floor = 0.9;    // P(stay at 0 | population 0)
    Real gamma = 0.95;
};
GeneratedDomain population_model(const PopulationParams& params = {});

/// Dispatch by DomainSpec.name; unknown keys in parameters are rejected.
GeneratedDomain make_domain(const DomainSpec& spec);

/// Uniform-random behavior policy, episodes of episode_len steps restarted
/// from p0, exactly n tuples; deterministic given seed.
BatchDataset sample_dataset(const TabularMdp& mdp, const TransitionModel& true_model,
                            long n_tuples, uint64_t seed, int episode_len = 50);

} // namespace varmdp
