// File formats.
//
// MDP / kernel / posterior: JSON documents whose doubles use shortest
// round-trip formatting, so load(save(x)) is bit-stable for finite values.
// Dataset: CSV with header "s,a,r,s_next". Ensemble: binary, little-endian,
// header (magic, S, A, M, seed) followed by M*S*A*S float64 values in
// row-major model-then-(s,a,s') order; round-trips bit-exactly.
#pragma once

#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"

#include <filesystem>
#include <string>

namespace varmdp {

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp load_mdp(const std::filesystem::path& path);

void save_kernel(const TransitionModel& model, const std::filesystem::path& path);
TransitionModel load_kernel(const std::filesystem::path& path);

void save_posterior(const DirichletPosterior& posterior, const std::filesystem::path& path);
DirichletPosterior load_posterior(const std::filesystem::path& path);

void save_dataset(const BatchDataset& dataset, const std::filesystem::path& path);
BatchDataset load_dataset(const std::filesystem::path& path);

void save_ensemble(const ModelEnsemble& ensemble, const std::filesystem::path& path);
ModelEnsemble load_ensemble(const std::filesystem::path& path);

/// Shortest exact decimal representation of a double (round-trips).
std::string format_double(Real value);

} // namespace varmdp
