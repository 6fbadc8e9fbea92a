// Dirichlet posterior over transition kernels: conjugate updates from batch
// data, ensemble sampling, and per-(s,a) moments.
//
// The posterior is SA-rectangular: rows for distinct (s,a) pairs are
// independent, and each row is sampled from its own derived random stream so
// results do not depend on sampling order.
#pragma once

#include "varmdp/rng.hpp"
#include "varmdp/types.hpp"

#include <cstdint>
#include <span>

namespace varmdp {

struct BatchDataset {
    struct Tuple {
        int s = 0;
        int a = 0;
        Real r = 0.0;
        int s_next = 0;
    };
    std::vector<Tuple> tuples;
};

/// Dirichlet concentrations alpha[s][a][s'], strictly positive.
struct DirichletPosterior {
    int num_states = 0;
    int num_actions = 0;
    Vec concentration; // flattened [s][a][s']

    DirichletPosterior() = default;
    DirichletPosterior(int S, int A, Real fill) :
        num_states(S), num_actions(A),
        concentration(static_cast<size_t>(S) * A * S, fill) {}

    std::span<const Real> row(int s, int a) const {
        return {concentration.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<Real> mutable_row(int s, int a) {
        return {concentration.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    /// Total concentration alpha_0 of a row.
    Real row_total(int s, int a) const;

    void validate() const;
};

/// M sampled transition kernels representing the posterior.
struct ModelEnsemble {
    std::vector<TransitionModel> models;
    uint64_t seed = 0;

    int size() const { return static_cast<int>(models.size()); }
    int num_states() const { return models.empty() ? 0 : models.front().num_states; }
    int num_actions() const { return models.empty() ? 0 : models.front().num_actions; }
};

/// Per-(s,a) mean vector and S x S covariance of transition probabilities.
struct PosteriorMoments {
    int num_states = 0;
    int num_actions = 0;
    Vec mean; // flattened [s][a][s']
    Vec cov;  // flattened [s][a][i][j], row-major S x S blocks

    std::span<const Real> mean_row(int s, int a) const {
        return {mean.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<const Real> cov_block(int s, int a) const {
        const size_t block = static_cast<size_t>(num_states) * num_states;
        return {cov.data() + (static_cast<size_t>(s) * num_actions + a) * block, block};
    }
    /// Quadratic form w^T Sigma_{s,a} w; tiny negatives from roundoff are
    /// clamped to zero, anything below -1e-10 throws.
    Real quadratic_form(int s, int a, std::span<const Real> w) const;
};

/// Conjugate update: alpha[s][a][s'] = prior_pseudocount + #(s,a,s') in data.
/// Out-of-range indices are rejected.
DirichletPosterior counts_from_dataset(const BatchDataset& dataset, int S, int A,
                                       Real prior_pseudocount);

/// Draws M kernels, each row independently Dirichlet; deterministic given seed.
ModelEnsemble sample_models(const DirichletPosterior& posterior, int M, uint64_t seed);

/// Analytic Dirichlet moments: mean alpha/alpha0, covariance
/// (diag(m) - m m^T)/(alpha0 + 1).
PosteriorMoments moments(const DirichletPosterior& posterior);

/// Empirical moments of an ensemble (sample mean, sample covariance with
/// M-1 normalization). A size-1 ensemble yields a zero covariance.
PosteriorMoments moments(const ModelEnsemble& ensemble);

/// Per-(s,a) observation counts n_{s,a} (dataset visits, prior excluded).
std::vector<long> visit_counts(const BatchDataset& dataset, int S, int A);

} // namespace varmdp
