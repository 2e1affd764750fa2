#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lmmrec/errors.hpp"
#include "lmmrec/formula.hpp"
#include "lmmrec/observation.hpp"
#include "lmmrec/reml.hpp"

namespace lmmrec {

/// Mean absolute error (sum |p_i - a_i|) / n over two equal-length
/// vectors. Throws DataError on a length mismatch or empty input.
template <typename DerivedP, typename DerivedA>
double mae(const Eigen::MatrixBase<DerivedP>& predicted,
           const Eigen::MatrixBase<DerivedA>& actual) {
  if (predicted.size() != actual.size())
    throw DataError("mae: vector lengths differ");
  if (predicted.size() == 0) throw DataError("mae: empty vectors");
  return (predicted - actual).cwiseAbs().sum() /
         static_cast<double>(predicted.size());
}

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Seeded uniform partition without replacement: Fisher-Yates over the
/// row indices with the pinned Rng protocol, the first round(f*N) shuffled
/// indices become the training set, and both halves are restored to
/// ascending row order. Throws DataError when a side would be empty.
SplitIndices split_indices(Eigen::Index n_rows, double train_fraction,
                           std::uint64_t seed);

std::pair<ObservationTable, ObservationTable> split_train_test(
    const ObservationTable& t, double train_fraction, std::uint64_t seed);

struct EvalRepeat {
  int repeat = 0;
  std::uint64_t seed = 0;
  double mae = 0.0;
  double baseline_mae = 0.0;  // train-mean predictor on the same split
  Eigen::Index n_test = 0;
};

struct EvalReport {
  std::string model_label;
  double mae_mean = 0.0;
  double mae_min = 0.0;
  double mae_max = 0.0;
  double baseline_mean = 0.0;
  std::vector<EvalRepeat> repeats;
};

struct CrossValidateOptions {
  bool clip = false;  // clamp predictions into [1, 5] before scoring
  FitOptions fit;
};

/// Repeated random holdout: repeat r splits with seed + r, fits on the
/// training part, predicts the held-out part (unseen levels fall back to
/// the population-level prediction) and scores MAE next to the
/// global-train-mean baseline on the identical split. A failing repeat
/// propagates its error; nothing is skipped.
EvalReport cross_validate(const ModelFormula& f, const ObservationTable& t,
                          int repeats, double train_fraction,
                          std::uint64_t seed,
                          const CrossValidateOptions& opts = {});

}  // namespace lmmrec
