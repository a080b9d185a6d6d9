#pragma once

#include "termrel/synthetic.hpp"

// One shared corpus per benchmark binary run.
inline const termrel::SyntheticDataset& bench_dataset() {
  static const termrel::SyntheticDataset data = [] {
    termrel::SyntheticSpec spec;
    spec.level_names = {"cs", "ai", "ml"};
    spec.level_counts = {800, 300, 120};
    spec.background_terms = 800;
    spec.core_ratio = 0.5;
    spec.feature_dim = 32;
    spec.vocab_size = 2400;
    spec.noise = 0.1;
    return termrel::generate_synthetic_dataset(spec, 1);
  }();
  return data;
}
