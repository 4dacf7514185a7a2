#pragma once

// Named experiment settings: data generation for the two synthetic datasets
// and the per-dataset network sizes, activation and learning rate.

#include <optional>
#include <string>
#include <vector>

#include "dagsurv/errors.hpp"
#include "dagsurv/graph.hpp"
#include "dagsurv/model.hpp"
#include "dagsurv/synthgen.hpp"

namespace dagsurv {

struct SyntheticPreset {
  std::string name;
  std::size_t num_covariates;  // L; the DAG has L + 1 nodes
  double expected_degree = 3.0;
  double weight_low = 0.5;
  double weight_high = 2.0;
  std::size_t n_samples = 10000;
  double scale_c = 90.0;
  double censor_fraction = 0.5;
  // Seed of the DAG realization used by default. Among seeds 0..299, the
  // pinned one is the DAG whose target node is a sink with at least one
  // parent and whose generated data (seed 12345) has the maximum event time
  // closest to 377 for the small set, 395 for the large one.
  std::uint64_t dag_seed = 0;
};

struct TrainPreset {
  std::string name;
  ModelConfig model;
  double lr;
};

inline std::vector<SyntheticPreset> synthetic_presets() {
  SyntheticPreset small{"synthetic-small", 9};
  small.dag_seed = 56;
  SyntheticPreset large{"synthetic-large", 49};
  large.dag_seed = 197;
  return {small, large};
}

inline const SyntheticPreset& synthetic_preset(const std::string& name) {
  static const auto all = synthetic_presets();
  for (const auto& p : all)
    if (p.name == name) return p;
  throw ConfigError("unknown synthetic preset '" + name +
                    "' (expected synthetic-small or synthetic-large)");
}

inline std::vector<TrainPreset> train_presets() {
  auto make = [](const char* name, int el, int eh, int dl, int dh, Activation a, double lr) {
    ModelConfig m;
    m.encoder_layers = el;
    m.encoder_hidden = eh;
    m.decoder_layers = dl;
    m.decoder_hidden = dh;
    m.activation = a;
    return TrainPreset{name, m, lr};
  };
  return {
      make("synthetic-small", 5, 128, 3, 64, Activation::ReLU, 1e-4),
      make("synthetic-large", 5, 64, 4, 32, Activation::ReLU, 1e-5),
      make("metabric", 3, 256, 3, 64, Activation::SELU, 1e-5),
      make("gbsg", 3, 128, 3, 32, Activation::ReLU, 1e-5),
  };
}

inline const TrainPreset& train_preset(const std::string& name) {
  static const auto all = train_presets();
  for (const auto& p : all)
    if (p.name == name) return p;
  throw ConfigError("unknown training preset '" + name +
                    "' (expected synthetic-small, synthetic-large, metabric or gbsg)");
}

struct SyntheticData {
  Dag dag;
  SurvivalDataset data;  // censored and discretized
  std::vector<std::string> warnings;
};

struct SyntheticOptions {
  std::optional<std::uint64_t> dag_seed;  // unset: the preset's pinned DAG
  CensorMode censor_mode = CensorMode::ExactFraction;
  NoiseScale noise_kind = NoiseScale::Variance;
};

inline Dag sample_preset_dag(const SyntheticPreset& p, std::uint64_t dag_seed) {
  DagSampleConfig dc;
  dc.num_nodes = p.num_covariates + 1;
  dc.expected_degree = p.expected_degree;
  dc.weight_low = p.weight_low;
  dc.weight_high = p.weight_high;
  dc.seed = dag_seed;
  return sample_erdos_renyi_dag(dc);
}

// Generation, censoring and discretization with unit-width bins on a given
// DAG. Noise and censoring get distinct seeds derived from `seed`.
inline SyntheticData make_synthetic(const SyntheticPreset& p, const Dag& dag, std::uint64_t seed,
                                    const SyntheticOptions& opt = {}) {
  const auto mode = opt.censor_mode;
  const auto noise_kind = opt.noise_kind;

  GenConfig gc;
  gc.n_samples = p.n_samples;
  gc.scale_c = p.scale_c;
  gc.target_noise_kind = noise_kind;
  gc.seed = seed;
  std::vector<std::string> warnings;
  auto ds = generate(dag, gc, &warnings);
  ds = apply_censoring(std::move(ds), p.censor_fraction, seed + 2, mode);
  const int horizon = default_horizon(ds);
  ds = discretize(std::move(ds), horizon);
  return {dag, std::move(ds), std::move(warnings)};
}

inline SyntheticData make_synthetic(const SyntheticPreset& p, std::uint64_t seed,
                                    const SyntheticOptions& opt = {}) {
  return make_synthetic(p, sample_preset_dag(p, opt.dag_seed.value_or(p.dag_seed)), seed, opt);
}

}  // namespace dagsurv
