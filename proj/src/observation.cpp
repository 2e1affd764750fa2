#include "lmmrec/observation.hpp"

#include <cmath>
#include <cstring>
#include <ostream>

#include "lmmrec/errors.hpp"

namespace lmmrec {

std::ptrdiff_t ObservationTable::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].name == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

void ObservationTable::add_row(double response_value,
                               const std::vector<std::int32_t>& row_codes) {
  if (!std::isfinite(response_value))
    throw DataError("observation response is not finite");
  if (row_codes.size() != factors.size())
    throw DataError("observation row has " + std::to_string(row_codes.size()) +
                    " codes for " + std::to_string(factors.size()) +
                    " factors");
  for (std::size_t i = 0; i < row_codes.size(); ++i) {
    if (row_codes[i] < 0 ||
        static_cast<std::size_t>(row_codes[i]) >= factors[i].levels.size())
      throw DataError("level code " + std::to_string(row_codes[i]) +
                      " out of range for factor '" + factors[i].name + "'");
  }
  response.push_back(response_value);
  codes.insert(codes.end(), row_codes.begin(), row_codes.end());
}

ObservationTable ObservationTable::select_rows(
    const std::vector<Eigen::Index>& rows) const {
  ObservationTable out;
  out.factors = factors;
  out.response.reserve(rows.size());
  out.codes.reserve(rows.size() * factors.size());
  const std::size_t f = factors.size();
  for (Eigen::Index r : rows) {
    out.response.push_back(response[static_cast<std::size_t>(r)]);
    const auto* begin = codes.data() + static_cast<std::size_t>(r) * f;
    out.codes.insert(out.codes.end(), begin, begin + f);
  }
  return out;
}

std::uint64_t ObservationTable::response_checksum() const {
  std::uint64_t h = 14695981039346656037ull;
  for (double v : response) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

void ObservationTable::write_csv(std::ostream& out) const {
  out << "response";
  for (const auto& f : factors) out << ',' << f.name;
  out << '\n';
  const std::size_t f = factors.size();
  for (Eigen::Index r = 0; r < n_rows(); ++r) {
    out << response[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < f; ++j)
      out << ',' << factors[j].levels[static_cast<std::size_t>(code(r, j))];
    out << '\n';
  }
}

}  // namespace lmmrec
