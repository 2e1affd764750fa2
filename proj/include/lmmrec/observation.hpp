#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lmmrec {

/// A categorical factor: name plus its declared level labels. Declared
/// order is authoritative; design-matrix columns and reports follow it.
struct Factor {
  std::string name;
  std::vector<std::string> levels;
};

/// The joined analysis dataset: one response per row plus a level code
/// for every declared factor. Codes index into Factor::levels.
///
/// Immutable once built (add_row during construction only); shareable
/// across threads after that.
struct ObservationTable {
  std::vector<Factor> factors;
  std::vector<double> response;
  std::vector<std::int32_t> codes;  // row-major, n_rows x factors.size()

  Eigen::Index n_rows() const {
    return static_cast<Eigen::Index>(response.size());
  }
  std::size_t n_factors() const { return factors.size(); }

  std::int32_t code(Eigen::Index row, std::size_t factor) const {
    return codes[static_cast<std::size_t>(row) * factors.size() + factor];
  }

  Eigen::Map<const Eigen::VectorXd> y() const {
    return {response.data(), n_rows()};
  }

  /// Index of a factor by name, or -1.
  std::ptrdiff_t factor_index(const std::string& name) const;

  /// Append one row; validates the response is finite and every code is
  /// in range for its factor. Throws DataError otherwise.
  void add_row(double response_value, const std::vector<std::int32_t>& row_codes);

  /// New table with the same factor declarations and the given rows, in
  /// the given order.
  ObservationTable select_rows(const std::vector<Eigen::Index>& rows) const;

  /// FNV-1a over the response bytes; used to detect mismatched datasets.
  std::uint64_t response_checksum() const;

  /// Normalized CSV export: response column plus one labeled column per
  /// factor.
  void write_csv(std::ostream& out) const;
};

}  // namespace lmmrec
