#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tallmcmc/dataset.hpp"
#include "tallmcmc/record_file.hpp"

namespace tallmcmc {

/// One row per iteration k = 1..N: the state after iteration k, whether the
/// move was accepted, and L_k, the likelihood evaluations charged to it.
/// SGLD traces also carry per-state weights.
struct ChainTrace {
  std::vector<Theta> states;
  std::vector<bool> accepted;
  std::vector<std::uint64_t> evals;
  std::vector<double> weights;  // empty unless the sampler is weighted
  std::uint64_t rng_seed = 0;
  std::string sampler_tag;
  Index n_data = 0;
  /// Evaluations spent before iteration 1 (initial state, first proxy).
  std::uint64_t setup_evals = 0;
  /// L_k <= 2n holds for every MH-type sampler; the Rhee-Glynn chain's
  /// random truncation can read more.
  bool bounded_evals = true;

  std::size_t size() const noexcept { return states.size(); }
  Index dim() const noexcept { return states.empty() ? 0 : states.front().size(); }
  bool weighted() const noexcept { return !weights.empty(); }

  void reserve(std::size_t k) {
    states.reserve(k);
    accepted.reserve(k);
    evals.reserve(k);
  }

  void push(const Theta& theta, bool acc, std::uint64_t l) {
    states.push_back(theta);
    accepted.push_back(acc);
    evals.push_back(l);
  }

  std::vector<double> column(Index j) const {
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(s[j]);
    return out;
  }

  double acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    std::size_t a = 0;
    for (bool b : accepted) a += b;
    return static_cast<double>(a) / static_cast<double>(accepted.size());
  }

  std::uint64_t total_evals() const {
    std::uint64_t s = 0;
    for (auto l : evals) s += l;
    return s;
  }

  void check() const {
    if (accepted.size() != states.size() || evals.size() != states.size())
      throw std::logic_error("trace columns have different lengths");
    if (!weights.empty() && weights.size() != states.size())
      throw std::logic_error("trace weights have the wrong length");
    for (auto l : evals)
      if (bounded_evals && n_data > 0 && l > 2 * static_cast<std::uint64_t>(n_data))
        throw std::logic_error("trace charges more than 2n evaluations in one iteration");
  }
};

/// Columnar CSV: iteration,theta_0..theta_{p-1},accepted,evals[,weight].
/// Doubles are written with 17 significant digits so a read-back is exact.
inline void write_trace_csv(const std::filesystem::path& path, const ChainTrace& trace) {
  trace.check();
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out << "iteration";
  for (Index j = 0; j < trace.dim(); ++j) out << ",theta_" << j;
  out << ",accepted,evals";
  if (trace.weighted()) out << ",weight";
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << (k + 1);
    for (Index j = 0; j < trace.dim(); ++j) out << ',' << trace.states[k][j];
    out << ',' << (trace.accepted[k] ? 1 : 0) << ',' << trace.evals[k];
    if (trace.weighted()) out << ',' << trace.weights[k];
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

namespace detail {

inline double parse_double(std::string_view cell, const std::string& where) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end) throw IoError(where + ": not a number: '" + std::string(cell) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line, char sep = ',') {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline ChainTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("trace '" + path.string() + "' is empty");
  const auto header = detail::split_csv_line(detail::trim(line));
  if (header.size() < 4 || header.front() != "iteration")
    throw IoError("trace '" + path.string() + "': unexpected header");
  const bool weighted = header.back() == "weight";
  const std::size_t p = header.size() - 3 - (weighted ? 1 : 0);

  ChainTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = detail::trim(line);
    if (row.empty()) continue;
    const auto cells = detail::split_csv_line(row);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size())
      throw IoError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                    std::to_string(cells.size()));
    Theta s(static_cast<Index>(p));
    for (std::size_t j = 0; j < p; ++j) s[static_cast<Index>(j)] = detail::parse_double(cells[1 + j], where);
    const double acc = detail::parse_double(cells[1 + p], where);
    const double l = detail::parse_double(cells[2 + p], where);
    if (l < 0.0) throw IoError(where + ": negative evaluation count");
    trace.push(s, acc != 0.0, static_cast<std::uint64_t>(l));
    if (weighted) trace.weights.push_back(detail::parse_double(cells[3 + p], where));
  }
  return trace;
}

}  // namespace tallmcmc
