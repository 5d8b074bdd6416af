#include "dfa/samples.hpp"

#include <algorithm>

namespace dfa {

int PosteriorSamples::n_chains() const {
  return chain.empty() ? 0 : *std::max_element(chain.begin(), chain.end()) + 1;
}

bool PosteriorSamples::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

Index PosteriorSamples::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("samples", "no parameter named '" + name + "'");
  return it - names.begin();
}

std::vector<Index> PosteriorSamples::columns_with_prefix(const std::string& prefix) const {
  std::vector<Index> cols;
  const std::string p = prefix + "[";
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j].compare(0, p.size(), p) == 0) cols.push_back(static_cast<Index>(j));
  return cols;
}

Mat PosteriorSamples::block(const std::string& prefix) const {
  const auto cols = columns_with_prefix(prefix);
  Mat out(draws.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = draws.col(cols[j]);
  return out;
}

Mat PosteriorSamples::chain_draws(int c) const {
  std::vector<Index> rows;
  for (std::size_t r = 0; r < chain.size(); ++r)
    if (chain[r] == c) rows.push_back(static_cast<Index>(r));
  Mat out(static_cast<Index>(rows.size()), draws.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = draws.row(rows[r]);
  return out;
}

}  // namespace dfa
