#pragma once

#include "dfa/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dfa {

// Draws of a flattened parameter vector on the constrained scale.
// Rows are draws; `chain[r]` is the chain that produced row r.
struct PosteriorSamples {
  std::vector<std::string> names;
  Mat draws;
  std::vector<int> chain;
  std::uint64_t seed = 0;
  int shard = 0;

  Index n_draws() const { return draws.rows(); }
  Index n_params() const { return draws.cols(); }
  int n_chains() const;

  // Throws DataError if absent.
  Index column(const std::string& name) const;
  bool has(const std::string& name) const;
  // Columns named `prefix[...]`, in column order.
  std::vector<Index> columns_with_prefix(const std::string& prefix) const;
  Mat block(const std::string& prefix) const;

  // Draws of chain c only, in draw order.
  Mat chain_draws(int c) const;
};

}  // namespace dfa
