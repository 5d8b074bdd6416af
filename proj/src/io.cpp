#include "dfa/io.hpp"

#include <openssl/sha.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dfa::io {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("io", "cannot write " + path.string());
  out << text;
  if (!out) throw DataError("io", "failed writing " + path.string());
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError("io", path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string git_blob_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::string hex;
  char buf[3];
  for (unsigned char c : digest) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    hex += buf;
  }
  return hex;
}

std::string file_hash(const fs::path& path) { return git_blob_hash(read_text(path)); }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::string trim(const std::string& cell) {
  const auto b = cell.find_first_not_of(" \t\r");
  const auto e = cell.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : cell.substr(b, e - b + 1);
}

// Comma-separated cells; double quotes protect commas and "" is a literal quote.
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch != '"') cell += ch;
      else if (i + 1 < line.size() && line[i + 1] == '"') cell += line[++i];
      else quoted = false;
    } else if (ch == '"') {
      quoted = was_quoted = true;
    } else if (ch == ',') {
      out.push_back(was_quoted ? cell : trim(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell += ch;
    }
  }
  out.push_back(was_quoted ? cell : trim(cell));
  return out;
}

std::string quote_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char ch : cell) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + '"';
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

double parse_cell(const std::string& cell, const std::string& where) {
  if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN")
    return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = cell.data() + (cell[0] == '+' ? 1 : 0);
  const auto r = std::from_chars(first, cell.data() + cell.size(), v);
  if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
    throw DataError("io", where + ": '" + cell + "' is not a number");
  return v;
}

template <class F>
void require(bool ok, F&& message) {
  if (!ok) throw DataError("io", message());
}

Mat matrix_from_json(const Json& j, const std::string& key) {
  require(j.is_array(), [&] { return "'" + key + "' must be an array of rows"; });
  const auto rows = static_cast<Index>(j.size());
  Index cols = -1;
  Mat m;
  for (Index i = 0; i < rows; ++i) {
    const Json& row = j[i];
    require(row.is_array(), [&] { return key + "[" + std::to_string(i) + "] must be an array"; });
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      m.resize(rows, cols);
    }
    require(static_cast<Index>(row.size()) == cols,
            [&] { return key + "[" + std::to_string(i) + "] has the wrong length"; });
    for (Index c = 0; c < cols; ++c) {
      require(row[c].is_number(), [&] {
        return key + "[" + std::to_string(i) + "][" + std::to_string(c) + "] must be a number";
      });
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

IntMat binary_from_json(const Json& j, const std::string& key, bool allow_null) {
  require(j.is_array(), [&] { return "'" + key + "' must be an array of rows"; });
  const auto rows = static_cast<Index>(j.size());
  IntMat m(rows, rows ? static_cast<Index>(j[0].is_array() ? j[0].size() : 0) : 0);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = j[i];
    require(row.is_array() && static_cast<Index>(row.size()) == m.cols(), [&] {
      return key + "[" + std::to_string(i) + "] must be an array of length " +
             std::to_string(m.cols());
    });
    for (Index c = 0; c < m.cols(); ++c) {
      const Json& v = row[c];
      const std::string where = key + "[" + std::to_string(i) + "][" + std::to_string(c) + "]";
      if (v.is_null() && allow_null) {
        m(i, c) = kMissing;
      } else {
        require(v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1),
                [&] { return where + (allow_null ? " must be 0, 1 or null" : " must be 0 or 1"); });
        m(i, c) = v.get<int>();
      }
    }
  }
  return m;
}

std::vector<std::vector<int>> drug_sets_from_json(const Json& j, const std::string& key) {
  require(j.is_array(), [&] { return "'" + key + "' must be an array of drug lists"; });
  std::vector<std::vector<int>> sets;
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array(), [&] { return key + "[" + std::to_string(i) + "] must be an array"; });
    std::vector<int> set;
    for (const auto& d : j[i]) {
      require(d.is_number_integer(),
              [&] { return key + "[" + std::to_string(i) + "] must hold integer drug ids"; });
      set.push_back(d.get<int>());
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

LikelihoodMode mode_from_json(const Json& j) {
  if (!j.contains("mode")) return LikelihoodMode::Direct;
  require(j["mode"].is_string(), [] { return std::string("'mode' must be a string"); });
  const auto m = j["mode"].get<std::string>();
  if (m == "direct") return LikelihoodMode::Direct;
  if (m == "drug") return LikelihoodMode::Drug;
  throw DataError("io", "'mode' must be \"direct\" or \"drug\", got \"" + m + "\"");
}

Json matrix_to_json(const Mat& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json binary_to_json(const IntMat& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c)
      row.push_back(m(i, c) == kMissing ? Json(nullptr) : Json(m(i, c)));
    out.push_back(std::move(row));
  }
  return out;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed) {
  require(j.is_object(), [] { return std::string("dataset must be a JSON object"); });
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, [&] { return "unknown dataset key '" + key + "'"; });
  }
}

}  // namespace

CsvTable read_numeric_csv(const fs::path& path) {
  const auto lines = lines_of(read_text(path));
  if (lines.empty()) throw DataError("io", path.string() + ": empty CSV");
  CsvTable t;
  t.header = split_line(lines[0]);
  const auto cols = static_cast<Index>(t.header.size());
  t.values.resize(static_cast<Index>(lines.size()) - 1, cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_line(lines[r]);
    if (static_cast<Index>(cells.size()) != cols)
      throw DataError("io", path.string() + ": line " + std::to_string(r + 1) + " has " +
                                std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(cols));
    for (Index c = 0; c < cols; ++c)
      t.values(static_cast<Index>(r) - 1, c) =
          parse_cell(cells[c], path.string() + ":" + std::to_string(r + 1));
  }
  return t;
}

void write_numeric_csv(const fs::path& path, const std::vector<std::string>& header,
                       const Mat& values) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + quote_cell(header[c]);
  out += '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) out += (c ? "," : "") + format_double(values(r, c));
    out += '\n';
  }
  write_text(path, out);
}

Dataset dataset_from_json(const Json& j) {
  check_keys(j, {"items", "A", "drugs", "B", "mode"});
  require(j.contains("items"), [] { return std::string("dataset needs 'items'"); });
  Dataset d;
  d.mode = mode_from_json(j);
  d.covariates = matrix_from_json(j["items"], "items");
  if (d.mode == LikelihoodMode::Direct) {
    require(j.contains("A"), [] { return std::string("direct mode needs 'A'"); });
    d.a_obs = binary_from_json(j["A"], "A", true);
  } else {
    require(j.contains("drugs") && j.contains("B"),
            [] { return std::string("drug mode needs 'drugs' and 'B'"); });
    d.drug_sets = drug_sets_from_json(j["drugs"], "drugs");
    d.drug_condition = binary_from_json(j["B"], "B", false);
  }
  d.validate();
  return d;
}

Json dataset_to_json(const Dataset& d) {
  Json j;
  j["mode"] = d.mode == LikelihoodMode::Direct ? "direct" : "drug";
  j["items"] = matrix_to_json(d.covariates);
  if (d.mode == LikelihoodMode::Direct) {
    j["A"] = binary_to_json(d.a_obs);
  } else {
    j["drugs"] = d.drug_sets;
    j["B"] = binary_to_json(d.drug_condition);
  }
  return j;
}

LongitudinalDataset longitudinal_from_json(const Json& j) {
  check_keys(j, {"items", "times", "A", "drugs", "B", "mode"});
  require(j.contains("items") && j.contains("times"),
          [] { return std::string("longitudinal dataset needs 'items' and 'times'"); });
  LongitudinalDataset d;
  d.mode = mode_from_json(j);
  d.covariates = matrix_from_json(j["items"], "items");
  d.times = matrix_from_json(j["times"], "times");
  if (d.mode == LikelihoodMode::Direct) {
    require(j.contains("A") && j["A"].is_array(),
            [] { return std::string("direct mode needs 'A' as one matrix per visit"); });
    for (std::size_t t = 0; t < j["A"].size(); ++t)
      d.a_obs.push_back(binary_from_json(j["A"][t], "A[" + std::to_string(t) + "]", true));
  } else {
    require(j.contains("drugs") && j["drugs"].is_array() && j.contains("B"),
            [] { return std::string("drug mode needs per-visit 'drugs' and 'B'"); });
    for (std::size_t t = 0; t < j["drugs"].size(); ++t)
      d.drug_sets.push_back(drug_sets_from_json(j["drugs"][t], "drugs[" + std::to_string(t) + "]"));
    d.drug_condition = binary_from_json(j["B"], "B", false);
  }
  d.validate();
  return d;
}

Json longitudinal_to_json(const LongitudinalDataset& d) {
  Json j;
  j["mode"] = d.mode == LikelihoodMode::Direct ? "direct" : "drug";
  j["items"] = matrix_to_json(d.covariates);
  j["times"] = matrix_to_json(d.times);
  if (d.mode == LikelihoodMode::Direct) {
    j["A"] = Json::array();
    for (const auto& a : d.a_obs) j["A"].push_back(binary_to_json(a));
  } else {
    j["drugs"] = d.drug_sets;
    j["B"] = binary_to_json(d.drug_condition);
  }
  return j;
}

Mat read_covariates_csv(const fs::path& path) {
  auto t = read_numeric_csv(path);
  if (!t.values.allFinite())
    throw DataError("io", path.string() + ": covariates must be finite numbers");
  return t.values;
}

IntMat read_a_csv(const fs::path& path) {
  const auto t = read_numeric_csv(path);
  IntMat a(t.values.rows(), t.values.cols());
  for (Index k = 0; k < a.size(); ++k) {
    const double v = t.values.data()[k];
    if (std::isnan(v)) {
      a.data()[k] = kMissing;
    } else if (v == 0.0 || v == 1.0) {
      a.data()[k] = static_cast<int>(v);
    } else {
      throw DataError("io", path.string() + ": A entries must be 0, 1 or empty");
    }
  }
  return a;
}

void write_covariates_csv(const fs::path& path, const Mat& covariates) {
  std::vector<std::string> header;
  for (Index c = 0; c < covariates.cols(); ++c) header.push_back("x" + std::to_string(c));
  write_numeric_csv(path, header, covariates);
}

void write_samples_csv(const fs::path& path, const PosteriorSamples& s) {
  if (s.chain.size() != static_cast<std::size_t>(s.n_draws()))
    throw DataError("io", "samples need one chain index per draw");
  std::string out = "chain";
  for (const auto& n : s.names) out += "," + quote_cell(n);
  out += '\n';
  for (Index r = 0; r < s.n_draws(); ++r) {
    out += std::to_string(s.chain[r]);
    for (Index c = 0; c < s.n_params(); ++c) out += "," + format_double(s.draws(r, c));
    out += '\n';
  }
  write_text(path, out);
}

PosteriorSamples read_samples_csv(const fs::path& path) {
  auto t = read_numeric_csv(path);
  if (t.header.empty() || t.header[0] != "chain")
    throw DataError("io", path.string() + ": samples CSV must start with a 'chain' column");
  PosteriorSamples s;
  s.names.assign(t.header.begin() + 1, t.header.end());
  s.draws = t.values.rightCols(t.values.cols() - 1);
  for (Index r = 0; r < t.values.rows(); ++r) {
    const double c = t.values(r, 0);
    if (!(c >= 0) || c != std::floor(c))
      throw DataError("io", path.string() + ": chain indices must be non-negative integers");
    s.chain.push_back(static_cast<int>(c));
  }
  return s;
}

void write_delta_summary_csv(const fs::path& path, const PosteriorSamples& s) {
  const Mat delta = s.block("delta");
  if (delta.cols() == 0 || delta.rows() == 0)
    throw DataError("io", "samples have no delta draws to summarize");
  const Mat centered = delta.colwise() - delta.rowwise().mean();
  Mat table(delta.cols(), 6);
  std::vector<double> v(static_cast<std::size_t>(delta.rows()));
  auto q = [&](double p) {
    const double pos = p * (v.size() - 1.0);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
  };
  for (Index c = 0; c < delta.cols(); ++c) {
    for (Index r = 0; r < delta.rows(); ++r) v[r] = centered(r, c);
    std::sort(v.begin(), v.end());
    const double mean = centered.col(c).mean();
    const double sd =
        delta.rows() > 1
            ? std::sqrt((centered.col(c).array() - mean).square().sum() / (delta.rows() - 1.0))
            : 0.0;
    table.row(c) << static_cast<double>(c), mean, sd, q(0.025), q(0.5), q(0.975);
  }
  write_numeric_csv(path, {"condition", "mean", "sd", "q2.5", "q50", "q97.5"}, table);
}

void write_probability_csv(const fs::path& path, const Mat& prob) {
  Mat table(prob.size(), 3);
  Index r = 0;
  for (Index i = 0; i < prob.rows(); ++i)
    for (Index c = 0; c < prob.cols(); ++c) table.row(r++) << double(i), double(c), prob(i, c);
  write_numeric_csv(path, {"item", "condition", "probability"}, table);
}

}  // namespace dfa::io
