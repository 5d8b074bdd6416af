#pragma once

#include "dfa/dynamics.hpp"
#include "dfa/model.hpp"
#include "dfa/samples.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace dfa::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

// Git blob hash: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_hash(const std::string& bytes);
std::string file_hash(const fs::path& path);

// Shortest round-trip decimal form.
std::string format_double(double x);

// Numeric CSV with a header row. Empty cells and NA/nan read as NaN.
struct CsvTable {
  std::vector<std::string> header;
  Mat values;
};
CsvTable read_numeric_csv(const fs::path& path);
void write_numeric_csv(const fs::path& path, const std::vector<std::string>& header,
                       const Mat& values);

// Dataset JSON: {"items": [[x...]], "A": [[0|1|null]], "drugs": [[ids]],
// "B": [[0|1]], "mode": "direct"|"drug"}. Longitudinal datasets add "times"
// (per item) and hold A and drugs per visit.
Dataset dataset_from_json(const Json& j);
Json dataset_to_json(const Dataset& d);
LongitudinalDataset longitudinal_from_json(const Json& j);
Json longitudinal_to_json(const LongitudinalDataset& d);

// Covariates CSV (numeric columns) and A CSV (0, 1 or empty/NA for missing).
Mat read_covariates_csv(const fs::path& path);
IntMat read_a_csv(const fs::path& path);
void write_covariates_csv(const fs::path& path, const Mat& covariates);

// Columnar samples: a leading "chain" column, then one column per parameter.
void write_samples_csv(const fs::path& path, const PosteriorSamples& s);
PosteriorSamples read_samples_csv(const fs::path& path);

// Per condition: summary of delta_c - mean_c' delta_c' over draws.
void write_delta_summary_csv(const fs::path& path, const PosteriorSamples& s);
// item, condition, probability.
void write_probability_csv(const fs::path& path, const Mat& prob);

}  // namespace dfa::io
