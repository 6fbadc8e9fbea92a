#include "varmdp/posterior.hpp"

#include <cmath>
#include <string>

namespace varmdp {

Real DirichletPosterior::row_total(int s, int a) const {
    Real total = 0.0;
    for (Real c : row(s, a)) { total += c; }
    return total;
}

void DirichletPosterior::validate() const {
    if (num_states <= 0 || num_actions <= 0) {
        throw InvalidInput("DirichletPosterior: dimensions must be positive");
    }
    const size_t expected = static_cast<size_t>(num_states) * num_actions * num_states;
    if (concentration.size() != expected) {
        throw InvalidInput("DirichletPosterior: tensor has wrong size");
    }
    for (Real c : concentration) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw InvalidInput("DirichletPosterior: concentrations must be strictly positive");
        }
    }
}

Real PosteriorMoments::quadratic_form(int s, int a, std::span<const Real> w) const {
    const auto sigma = cov_block(s, a);
    const int S = num_states;
    Real acc = 0.0;
    for (int i = 0; i < S; ++i) {
        Real inner = 0.0;
        for (int j = 0; j < S; ++j) { inner += sigma[static_cast<size_t>(i) * S + j] * w[j]; }
        acc += w[i] * inner;
    }
    if (acc < 0.0) {
        if (acc < -1e-10) {
            throw std::runtime_error("PosteriorMoments: quadratic form is negative (" +
                                     std::to_string(acc) + ")");
        }
        acc = 0.0;
    }
    return acc;
}

DirichletPosterior counts_from_dataset(const BatchDataset& dataset, int S, int A,
                                       Real prior_pseudocount) {
    if (!(prior_pseudocount > 0.0)) {
        throw InvalidInput("counts_from_dataset: prior_pseudocount must be > 0");
    }
    DirichletPosterior posterior(S, A, prior_pseudocount);
    for (size_t i = 0; i < dataset.tuples.size(); ++i) {
        const auto& t = dataset.tuples[i];
        if (t.s < 0 || t.s >= S || t.a < 0 || t.a >= A || t.s_next < 0 || t.s_next >= S) {
            throw InvalidInput("counts_from_dataset: tuple " + std::to_string(i) +
                               " has out-of-range indices");
        }
        posterior.mutable_row(t.s, t.a)[t.s_next] += 1.0;
    }
    return posterior;
}

ModelEnsemble sample_models(const DirichletPosterior& posterior, int M, uint64_t seed) {
    posterior.validate();
    if (M < 1) { throw InvalidInput("sample_models: M must be >= 1"); }
    const int S = posterior.num_states;
    const int A = posterior.num_actions;

    ModelEnsemble ensemble;
    ensemble.seed = seed;
    ensemble.models.assign(M, TransitionModel(S, A));

    const RngStream root(seed);
    std::vector<double> concentration(S);
    std::vector<double> sample;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const auto alpha = posterior.row(s, a);
            concentration.assign(alpha.begin(), alpha.end());
            for (int m = 0; m < M; ++m) {
                // One stream per (s, a, m): row-wise independence and
                // schedule-free reproducibility.
                RngStream stream = root.child({static_cast<uint64_t>(s),
                                               static_cast<uint64_t>(a),
                                               static_cast<uint64_t>(m)});
                stream.dirichlet(concentration, sample);
                auto row = ensemble.models[m].mutable_row(s, a);
                for (int i = 0; i < S; ++i) { row[i] = sample[i]; }
            }
        }
    }
    return ensemble;
}

PosteriorMoments moments(const DirichletPosterior& posterior) {
    posterior.validate();
    const int S = posterior.num_states;
    const int A = posterior.num_actions;
    PosteriorMoments out;
    out.num_states = S;
    out.num_actions = A;
    out.mean.resize(static_cast<size_t>(S) * A * S);
    out.cov.resize(static_cast<size_t>(S) * A * S * S);

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const auto alpha = posterior.row(s, a);
            const Real alpha0 = posterior.row_total(s, a);
            Real* mean = out.mean.data() + (static_cast<size_t>(s) * A + a) * S;
            Real* cov = out.cov.data() + (static_cast<size_t>(s) * A + a) * S * S;
            for (int i = 0; i < S; ++i) { mean[i] = alpha[i] / alpha0; }
            for (int i = 0; i < S; ++i) {
                for (int j = 0; j < S; ++j) {
                    const Real diag = (i == j) ? mean[i] : 0.0;
                    cov[static_cast<size_t>(i) * S + j] = (diag - mean[i] * mean[j]) / (alpha0 + 1.0);
                }
            }
        }
    }
    return out;
}

PosteriorMoments moments(const ModelEnsemble& ensemble) {
    if (ensemble.models.empty()) { throw InvalidInput("moments: empty ensemble"); }
    const int S = ensemble.num_states();
    const int A = ensemble.num_actions();
    const int M = ensemble.size();

    PosteriorMoments out;
    out.num_states = S;
    out.num_actions = A;
    out.mean.assign(static_cast<size_t>(S) * A * S, 0.0);
    out.cov.assign(static_cast<size_t>(S) * A * S * S, 0.0);

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            Real* mean = out.mean.data() + (static_cast<size_t>(s) * A + a) * S;
            for (int m = 0; m < M; ++m) {
                const auto row = ensemble.models[m].row(s, a);
                for (int i = 0; i < S; ++i) { mean[i] += row[i]; }
            }
            for (int i = 0; i < S; ++i) { mean[i] /= M; }

            if (M == 1) { continue; } // covariance stays zero for a point ensemble
            Real* cov = out.cov.data() + (static_cast<size_t>(s) * A + a) * S * S;
            for (int m = 0; m < M; ++m) {
                const auto row = ensemble.models[m].row(s, a);
                for (int i = 0; i < S; ++i) {
                    const Real di = row[i] - mean[i];
                    for (int j = 0; j < S; ++j) {
                        cov[static_cast<size_t>(i) * S + j] += di * (row[j] - mean[j]);
                    }
                }
            }
            const Real norm = 1.0 / (M - 1);
            for (int i = 0; i < S * S; ++i) { cov[i] *= norm; }
        }
    }
    return out;
}

std::vector<long> visit_counts(const BatchDataset& dataset, int S, int A) {
    std::vector<long> counts(static_cast<size_t>(S) * A, 0);
    for (const auto& t : dataset.tuples) {
        if (t.s < 0 || t.s >= S || t.a < 0 || t.a >= A) {
            throw InvalidInput("visit_counts: tuple has out-of-range indices");
        }
        ++counts[static_cast<size_t>(t.s) * A + t.a];
    }
    return counts;
}

} // namespace varmdp
