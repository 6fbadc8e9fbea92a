// Core tabular MDP types shared by every solver in the library.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varmdp {

using Real = double;
using Vec = std::vector<Real>;

/// State-indexed value function (discounted-return units).
using ValueFunction = Vec;

/// Deterministic policy: one action index per state.
using DeterministicPolicy = std::vector<int>;

/// Tabular MDP with per-transition rewards R(s,a,s'), discount and initial
/// distribution. All fields are immutable after construction; operations on
/// MDPs are pure functions, so instances may be shared across threads.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    Vec rewards;       // flattened [s][a][s'], size S*A*S
    Real discount = 0; // gamma in [0, 1)
    Vec initial_dist;  // length S, on the simplex

    TabularMdp() = default;
    TabularMdp(int S, int A, Vec rewards_sas, Real gamma, Vec p0);

    Real reward(int s, int a, int s_next) const {
        return rewards[(static_cast<size_t>(s) * num_actions + a) * num_states + s_next];
    }
    /// Reward vector r_{s,a} over successor states.
    std::span<const Real> reward_row(int s, int a) const {
        return {rewards.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    /// max |R(s,a,s')|, the reward scale used by iteration bounds.
    Real reward_scale() const;

    void validate() const;
};

/// One complete transition kernel P, a point in (Delta^S)^(S x A).
struct TransitionModel {
    int num_states = 0;
    int num_actions = 0;
    Vec probs; // flattened [s][a][s'], size S*A*S

    TransitionModel() = default;
    TransitionModel(int S, int A) :
        num_states(S), num_actions(A),
        probs(static_cast<size_t>(S) * A * S, 0.0) {}
    TransitionModel(int S, int A, Vec probs_sas);

    Real prob(int s, int a, int s_next) const {
        return probs[(static_cast<size_t>(s) * num_actions + a) * num_states + s_next];
    }
    std::span<const Real> row(int s, int a) const {
        return {probs.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<Real> mutable_row(int s, int a) {
        return {probs.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }

    void validate() const;
};

/// Thrown on malformed inputs (bad shapes, invalid distributions, ...).
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {
/// Checks that v is a probability vector within tol; throws InvalidInput.
void check_distribution(std::span<const Real> v, Real tol, const std::string& what);
} // namespace detail

} // namespace varmdp
