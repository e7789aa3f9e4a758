#pragma once

// Small, fast fixtures shared by the unit tests. Results are cached per
// process so each codec is trained once.

#include "semcom/training.hpp"

namespace fixture {

inline semcom::SynthSignsOptions small_data_options() {
  semcom::SynthSignsOptions o;
  o.seed = 5;
  o.n_train = 800;
  o.n_test = 200;
  return o;
}

inline semcom::TrainOptions small_train_options(int epochs = 15) {
  semcom::TrainOptions o;
  o.epochs = epochs;
  return o;
}

inline const semcom::DatasetSplit& small_data() {
  static const semcom::DatasetSplit d = semcom::generate_synthsigns(small_data_options());
  return d;
}

inline const semcom::TrainedExpert& small_normal() {
  static const semcom::TrainedExpert e = semcom::train_normal(small_data(), small_train_options(), 3);
  return e;
}

}  // namespace fixture
