#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tallmcmc/dataset.hpp"
#include "tallmcmc/record_file.hpp"
#include "tallmcmc/rng.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticKind { gaussian_1d, lognormal_1d, logistic_two_gaussians, gamma_from_covariates };

inline const char* to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::gaussian_1d: return "gaussian_1d";
    case SyntheticKind::lognormal_1d: return "lognormal_1d";
    case SyntheticKind::logistic_two_gaussians: return "logistic_two_gaussians";
    case SyntheticKind::gamma_from_covariates: return "gamma_from_covariates";
  }
  return "?";
}

inline SyntheticKind synthetic_kind_from_string(const std::string& s) {
  for (auto k : {SyntheticKind::gaussian_1d, SyntheticKind::lognormal_1d, SyntheticKind::logistic_two_gaussians,
                 SyntheticKind::gamma_from_covariates})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown synthetic kind '" + s +
                              "' (expected gaussian_1d, lognormal_1d, logistic_two_gaussians or "
                              "gamma_from_covariates)");
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_1d;
  Index n = 1000;
  std::uint64_t seed = 0;
  /// logistic: feature dimension; gamma: dimension including the intercept.
  Index d = 2;
  /// logistic: class +1 is centred at +separation * (1, ..., 1), class -1 at the negative.
  double separation = 1.0;
  /// gamma: shape and true coefficients (default alternates +-0.5 after an intercept of 1).
  double kappa = 2.0;
  std::vector<double> theta_true;

  void validate() const {
    if (n < 1) throw std::invalid_argument("synthetic n must be >= 1");
    if ((kind == SyntheticKind::logistic_two_gaussians || kind == SyntheticKind::gamma_from_covariates) && d < 1)
      throw std::invalid_argument("synthetic d must be >= 1");
    if (kind == SyntheticKind::gamma_from_covariates) {
      if (!(kappa > 0.0)) throw std::invalid_argument("gamma kappa must be > 0");
      if (!theta_true.empty() && static_cast<Index>(theta_true.size()) != d)
        throw std::invalid_argument("theta_true length must equal d");
    }
  }

  Eigen::VectorXd gamma_coefficients() const {
    Eigen::VectorXd t(d);
    if (!theta_true.empty()) {
      for (Index j = 0; j < d; ++j) t[j] = theta_true[static_cast<std::size_t>(j)];
      return t;
    }
    t[0] = 1.0;
    for (Index j = 1; j < d; ++j) t[j] = j % 2 ? 0.5 : -0.5;
    return t;
  }
};

/// Deterministic given the spec (seed included).
inline Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  CounterRng rng(stream_key(spec.seed, 0, Stream::data));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = spec.n;
  switch (spec.kind) {
    case SyntheticKind::gaussian_1d:
    case SyntheticKind::lognormal_1d: {
      RowMatrix x(n, 1);
      for (Index i = 0; i < n; ++i) {
        const double z = normal(rng);
        x(i, 0) = spec.kind == SyntheticKind::lognormal_1d ? std::exp(z) : z;
      }
      return Dataset(std::move(x));
    }
    case SyntheticKind::logistic_two_gaussians: {
      RowMatrix x(n, spec.d);
      Eigen::VectorXd t(n);
      for (Index i = 0; i < n; ++i) {
        t[i] = uniform01(rng) < 0.5 ? 1.0 : -1.0;
        for (Index j = 0; j < spec.d; ++j) x(i, j) = t[i] * spec.separation + normal(rng);
      }
      return Dataset(std::move(x), std::move(t), ResponseKind::label);
    }
    case SyntheticKind::gamma_from_covariates: {
      const Eigen::VectorXd beta = spec.gamma_coefficients();
      RowMatrix x(n, spec.d);
      Eigen::VectorXd y(n);
      for (Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (Index j = 1; j < spec.d; ++j) x(i, j) = normal(rng);
        const double scale = std::exp(x.row(i).dot(beta)) / spec.kappa;
        y[i] = std::gamma_distribution<double>(spec.kappa, scale)(rng);
      }
      return Dataset(std::move(x), std::move(y), ResponseKind::continuous);
    }
  }
  throw std::logic_error("unhandled synthetic kind");
}

// ---------------------------------------------------------------------------
// Metadata

/// Sidecar describing where a dataset came from and how it was preprocessed.
struct DatasetMeta {
  Index n = 0;
  Index d = 0;
  ResponseKind response = ResponseKind::none;
  std::vector<std::string> column_names;  // one per stored feature column
  bool standardized = false;
  bool intercept = false;  // column 0 is a constant 1
  std::vector<double> means;  // per stored feature column (0 / 1 when not standardised)
  std::vector<double> sds;
  bool labels_remapped = false;
  std::string source;

  nlohmann::json to_json() const {
    return {{"n", n},
            {"d", d},
            {"response", to_string(response)},
            {"column_names", column_names},
            {"standardized", standardized},
            {"intercept", intercept},
            {"means", means},
            {"sds", sds},
            {"labels_remapped", labels_remapped},
            {"source", source}};
  }

  static DatasetMeta from_json(const nlohmann::json& j) {
    DatasetMeta m;
    m.n = j.at("n").get<Index>();
    m.d = j.at("d").get<Index>();
    m.response = response_kind_from_string(j.at("response").get<std::string>());
    m.column_names = j.at("column_names").get<std::vector<std::string>>();
    m.standardized = j.at("standardized").get<bool>();
    m.intercept = j.at("intercept").get<bool>();
    m.means = j.at("means").get<std::vector<double>>();
    m.sds = j.at("sds").get<std::vector<double>>();
    m.labels_remapped = j.at("labels_remapped").get<bool>();
    m.source = j.at("source").get<std::string>();
    return m;
  }

  static DatasetMeta plain(const Dataset& data, std::string source) {
    DatasetMeta m;
    m.n = data.n();
    m.d = data.d();
    m.response = data.response_kind();
    for (Index j = 0; j < data.d(); ++j) m.column_names.push_back("x" + std::to_string(j));
    m.means.assign(static_cast<std::size_t>(data.d()), 0.0);
    m.sds.assign(static_cast<std::size_t>(data.d()), 1.0);
    m.source = std::move(source);
    return m;
  }
};

// ---------------------------------------------------------------------------
// Binary store: "TMCDATA1" | u32 version | u32 response kind | u64 n | u64 d |
// n*d doubles row-major | n doubles response (if any). Sidecar at <path>.json.

inline constexpr std::string_view kDatasetMagic = "TMCDATA1";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  auto s = p;
  s += ".json";
  return s;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& data, DatasetMeta meta) {
  meta.n = data.n();
  meta.d = data.d();
  meta.response = data.response_kind();
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  BinaryWriter out(path);
  out.put_magic(kDatasetMagic);
  out.put(kDatasetVersion);
  out.put(static_cast<std::uint32_t>(data.response_kind()));
  out.put(static_cast<std::uint64_t>(data.n()));
  out.put(static_cast<std::uint64_t>(data.d()));
  out.put_doubles(data.features().data(), static_cast<std::size_t>(data.n() * data.d()));
  if (data.has_response()) out.put_doubles(data.response().data(), static_cast<std::size_t>(data.n()));
  out.finish();

  std::ofstream js(sidecar_path(path));
  if (!js) throw IoError("cannot create '" + sidecar_path(path).string() + "'");
  js << meta.to_json().dump(2) << '\n';
  if (!js) throw IoError("write failed on '" + sidecar_path(path).string() + "'");
}

struct StoredDataset {
  Dataset data;
  DatasetMeta meta;
};

inline StoredDataset read_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("dataset '" + path.string() + "' does not exist");
  MappedFile file(path);
  BinaryReader in(file.bytes(), "dataset '" + path.string() + "'");
  in.expect_magic(kDatasetMagic);
  if (in.get<std::uint32_t>() != kDatasetVersion)
    throw IoError("dataset '" + path.string() + "': unsupported version");
  const auto kind_raw = in.get<std::uint32_t>();
  if (kind_raw > 2) throw IoError("dataset '" + path.string() + "': bad response kind");
  const auto kind = static_cast<ResponseKind>(kind_raw);
  const auto n = static_cast<Index>(in.get<std::uint64_t>());
  const auto d = static_cast<Index>(in.get<std::uint64_t>());
  const std::size_t nx = static_cast<std::size_t>(n * d), ny = kind == ResponseKind::none ? 0 : static_cast<std::size_t>(n);
  in.need((nx + ny) * sizeof(double));
  const std::byte* base = file.bytes().data() + in.position();
  RowMatrix x(n, d);
  std::memcpy(x.data(), base, nx * sizeof(double));
  Eigen::VectorXd y(static_cast<Index>(ny));
  std::memcpy(y.data(), base + nx * sizeof(double), ny * sizeof(double));
  if (in.position() + (nx + ny) * sizeof(double) != file.size())
    throw IoError("dataset '" + path.string() + "': trailing bytes");

  DatasetMeta meta;
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream js(side);
    try {
      meta = DatasetMeta::from_json(nlohmann::json::parse(js));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("metadata '" + side.string() + "': " + e.what());
    }
    if (meta.n != n || meta.d != d) throw IoError("metadata '" + side.string() + "' disagrees with the store");
  }
  Dataset data = kind == ResponseKind::none ? Dataset(std::move(x)) : Dataset(std::move(x), std::move(y), kind);
  if (!std::filesystem::exists(side)) meta = DatasetMeta::plain(data, path.string());
  return {std::move(data), std::move(meta)};
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct PreprocessSpec {
  bool standardize = true;
  bool add_intercept = false;
  /// One role per CSV column: "feature", "label", "response" or "ignore".
  /// Empty: every column but the last is a feature, the last is `last_column`.
  std::vector<std::string> column_roles;
  ResponseKind last_column = ResponseKind::label;
  bool header = false;
  char delimiter = ',';
};

struct IngestResult {
  Dataset data;
  DatasetMeta meta;
  std::vector<std::string> notes;
};

/// (x - mean) / sd column-wise; the same expression is used on re-ingestion.
inline void apply_standardization(RowMatrix& x, const std::vector<double>& means, const std::vector<double>& sds,
                                  Index first_col = 0) {
  for (Index j = first_col; j < x.cols(); ++j) {
    const double m = means[static_cast<std::size_t>(j)], s = sds[static_cast<std::size_t>(j)];
    for (Index i = 0; i < x.rows(); ++i) x(i, j) = (x(i, j) - m) / s;
  }
}

inline IngestResult ingest_csv(const std::filesystem::path& path, const PreprocessSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto cells = detail::split_csv_line(t, spec.delimiter);
    if (spec.header && names.empty() && rows.empty()) {
      for (auto c : cells) names.emplace_back(detail::trim(c));
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != width)
      throw IoError(where + ": expected " + std::to_string(width) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = detail::trim(cells[c]);
      if (cell.empty()) throw IoError(where + ": empty field in column " + std::to_string(c + 1));
      const double v = detail::parse_double(cell, where + " column " + std::to_string(c + 1));
      if (!std::isfinite(v)) throw IoError(where + ": non-finite value in column " + std::to_string(c + 1));
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path.string() + "' contains no data rows");

  std::vector<std::string> roles = spec.column_roles;
  if (roles.empty()) {
    roles.assign(width, "feature");
    if (spec.last_column == ResponseKind::label)
      roles.back() = "label";
    else if (spec.last_column == ResponseKind::continuous)
      roles.back() = "response";
  }
  if (roles.size() != width)
    throw std::invalid_argument("column roles give " + std::to_string(roles.size()) + " entries for " +
                                std::to_string(width) + " columns");
  std::vector<std::size_t> feat;
  long resp_col = -1;
  ResponseKind kind = ResponseKind::none;
  for (std::size_t c = 0; c < width; ++c) {
    if (roles[c] == "feature") {
      feat.push_back(c);
    } else if (roles[c] == "label" || roles[c] == "response") {
      if (resp_col >= 0) throw std::invalid_argument("more than one label/response column");
      resp_col = static_cast<long>(c);
      kind = roles[c] == "label" ? ResponseKind::label : ResponseKind::continuous;
    } else if (roles[c] != "ignore") {
      throw std::invalid_argument("unknown column role '" + roles[c] + "'");
    }
  }
  if (feat.empty()) throw std::invalid_argument("no feature columns selected");

  const Index n = static_cast<Index>(rows.size());
  const Index off = spec.add_intercept ? 1 : 0;
  const Index d = static_cast<Index>(feat.size()) + off;
  RowMatrix x(n, d);
  Eigen::VectorXd y(kind == ResponseKind::none ? 0 : n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (off) x(i, 0) = 1.0;
    for (std::size_t k = 0; k < feat.size(); ++k) x(i, off + static_cast<Index>(k)) = r[feat[k]];
    if (resp_col >= 0) y[i] = r[static_cast<std::size_t>(resp_col)];
  }

  IngestResult res;
  auto& meta = res.meta;
  meta.source = path.string();
  meta.intercept = spec.add_intercept;
  if (off) meta.column_names.push_back("intercept");
  for (auto c : feat) meta.column_names.push_back(c < names.size() ? names[c] : "col" + std::to_string(c + 1));
  meta.means.assign(static_cast<std::size_t>(d), 0.0);
  meta.sds.assign(static_cast<std::size_t>(d), 1.0);
  if (spec.standardize) {
    meta.standardized = true;
    for (Index j = off; j < d; ++j) {
      const double m = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - m).square().mean());
      if (!(sd > 0.0))
        throw std::invalid_argument("cannot standardize constant column '" +
                                    meta.column_names[static_cast<std::size_t>(j)] + "'");
      meta.means[static_cast<std::size_t>(j)] = m;
      meta.sds[static_cast<std::size_t>(j)] = sd;
    }
    apply_standardization(x, meta.means, meta.sds, off);
  }

  if (kind == ResponseKind::label) {
    bool zero_one = true;
    for (Index i = 0; i < n; ++i)
      if (y[i] != 0.0 && y[i] != 1.0) zero_one = false;
    bool pm_one = true;
    for (Index i = 0; i < n; ++i)
      if (y[i] != -1.0 && y[i] != 1.0) pm_one = false;
    if (!pm_one && zero_one) {
      for (Index i = 0; i < n; ++i) y[i] = y[i] == 0.0 ? -1.0 : 1.0;
      meta.labels_remapped = true;
      res.notes.push_back("labels in {0,1} remapped to {-1,+1}");
    } else if (!pm_one) {
      throw IoError("'" + path.string() + "': label column must hold -1/+1 or 0/1");
    }
  }

  res.data = kind == ResponseKind::none ? Dataset(std::move(x)) : Dataset(std::move(x), std::move(y), kind);
  meta.n = n;
  meta.d = d;
  meta.response = kind;
  return res;
}

// ---------------------------------------------------------------------------

/// n_sub records drawn uniformly without replacement, in draw order.
inline Dataset subset(const Dataset& data, Index n_sub, std::uint64_t seed) {
  if (n_sub < 1 || n_sub > data.n()) throw std::invalid_argument("subset size must lie in [1, n]");
  CounterRng rng(stream_key(seed, 1, Stream::data));
  std::unordered_map<Index, Index> swapped;
  auto at = [&](Index k) {
    const auto it = swapped.find(k);
    return it == swapped.end() ? k : it->second;
  };
  RowMatrix x(n_sub, data.d());
  Eigen::VectorXd y(data.has_response() ? n_sub : 0);
  for (Index k = 0; k < n_sub; ++k) {
    const Index j = k + static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(data.n() - k)));
    const Index pick = at(j);
    swapped[j] = at(k);
    x.row(k) = data.x(pick);
    if (data.has_response()) y[k] = data.y(pick);
  }
  return data.has_response() ? Dataset(std::move(x), std::move(y), data.response_kind()) : Dataset(std::move(x));
}

}  // namespace tallmcmc
