#include "lmmrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmmrec/rng.hpp"

namespace lmmrec {

SplitIndices split_indices(Eigen::Index n_rows, double train_fraction,
                           std::uint64_t seed) {
  if (n_rows < 2) throw DataError("split: need at least two rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DataError("split: train fraction must lie strictly in (0, 1)");

  const auto n_train = static_cast<Eigen::Index>(
      std::llround(train_fraction * static_cast<double>(n_rows)));
  if (n_train < 1 || n_train >= n_rows)
    throw DataError("split: too few rows for fraction " +
                    std::to_string(train_fraction));

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_rows));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.index(i + 1)]);

  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.test.assign(idx.begin() + n_train, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::pair<ObservationTable, ObservationTable> split_train_test(
    const ObservationTable& t, double train_fraction, std::uint64_t seed) {
  const SplitIndices s = split_indices(t.n_rows(), train_fraction, seed);
  return {t.select_rows(s.train), t.select_rows(s.test)};
}

EvalReport cross_validate(const ModelFormula& f, const ObservationTable& t,
                          int repeats, double train_fraction,
                          std::uint64_t seed,
                          const CrossValidateOptions& opts) {
  if (repeats < 1) throw DataError("cross_validate: repeats must be >= 1");

  EvalReport report;
  report.model_label = format_formula(f);
  report.mae_min = std::numeric_limits<double>::infinity();
  report.mae_max = -std::numeric_limits<double>::infinity();

  double mae_sum = 0.0;
  double baseline_sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t split_seed = seed + static_cast<std::uint64_t>(r);
    auto [train, test] = split_train_test(t, train_fraction, split_seed);

    auto train_ptr =
        std::make_shared<const ObservationTable>(std::move(train));
    const FitResult fit = fit_reml(f, train_ptr, opts.fit);

    Eigen::VectorXd pred = predict(fit, test);
    if (opts.clip) pred = pred.cwiseMax(1.0).cwiseMin(5.0);
    const Eigen::Map<const Eigen::VectorXd> actual = test.y();

    const double train_mean = train_ptr->y().mean();
    const Eigen::VectorXd baseline =
        Eigen::VectorXd::Constant(test.n_rows(), train_mean);

    EvalRepeat row;
    row.repeat = r;
    row.seed = split_seed;
    row.mae = mae(pred, actual);
    row.baseline_mae = mae(baseline, actual);
    row.n_test = test.n_rows();

    mae_sum += row.mae;
    baseline_sum += row.baseline_mae;
    report.mae_min = std::min(report.mae_min, row.mae);
    report.mae_max = std::max(report.mae_max, row.mae);
    report.repeats.push_back(row);
  }
  report.mae_mean = mae_sum / repeats;
  report.baseline_mean = baseline_sum / repeats;
  return report;
}

}  // namespace lmmrec
