#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochesp/inputs.hpp"
#include "stochesp/seqspace.hpp"

namespace stochesp {

/// Decimal text with 17 significant digits; round-trips doubles exactly.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes content to path via a temp file + rename, so readers never see a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

/// Ensemble dump, one row per (path, t, component): `path,t,component,value`.
/// Input-only ensembles use integer component indices; when states are
/// present components are labelled x<i> / u<i>.
inline std::string ensemble_to_csv(const Ensemble& e) {
  std::ostringstream os;
  os << "path,t,component,value\n";
  const bool pairs = e.has_states();
  for (int i = 0; i < e.n_paths(); ++i) {
    const auto& u = e.inputs[static_cast<std::size_t>(i)];
    for (int k = 0; k < u.horizon; ++k) {
      const int t = -(k + 1);
      if (pairs) {
        const auto& x = e.states[static_cast<std::size_t>(i)];
        for (int c = 0; c < x.dim; ++c)
          os << i << ',' << t << ",x" << c << ',' << format_g17(x.at(k)[c])
             << '\n';
        for (int c = 0; c < u.dim; ++c)
          os << i << ',' << t << ",u" << c << ',' << format_g17(u.at(k)[c])
             << '\n';
      } else {
        for (int c = 0; c < u.dim; ++c)
          os << i << ',' << t << ',' << c << ',' << format_g17(u.at(k)[c])
             << '\n';
      }
    }
  }
  return os.str();
}

inline void dump_ensemble_csv(const Ensemble& e,
                              const std::filesystem::path& path) {
  write_file_atomic(path, ensemble_to_csv(e));
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

/// Reads an ensemble dump back. Shapes are inferred from the row set; the
/// file must cover every (path, t, component) cell exactly once.
inline Ensemble load_ensemble_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      detail::split_csv_line(line) !=
          std::vector<std::string>{"path", "t", "component", "value"})
    throw std::runtime_error(path.string() + ": missing ensemble CSV header");

  struct Cell {
    int path, k, comp;
    bool is_state;
    double value;
  };
  std::vector<Cell> cells;
  int n_paths = 0, horizon = 0, in_dim = 0, state_dim = 0;
  bool pairs = false;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 4 fields");
    Cell c{};
    c.path = std::stoi(f[0]);
    c.k = -std::stoi(f[1]) - 1;
    std::string comp = f[2];
    if (!comp.empty() && (comp[0] == 'x' || comp[0] == 'u')) {
      c.is_state = comp[0] == 'x';
      c.comp = std::stoi(comp.substr(1));
      pairs = true;
    } else {
      c.is_state = false;
      c.comp = std::stoi(comp);
    }
    c.value = std::stod(f[3]);
    if (c.path < 0 || c.k < 0)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad path/t");
    n_paths = std::max(n_paths, c.path + 1);
    horizon = std::max(horizon, c.k + 1);
    if (c.is_state)
      state_dim = std::max(state_dim, c.comp + 1);
    else
      in_dim = std::max(in_dim, c.comp + 1);
    cells.push_back(c);
  }
  Ensemble e;
  e.inputs.assign(static_cast<std::size_t>(n_paths), PathWindow(in_dim, horizon));
  if (pairs && state_dim > 0)
    e.states.assign(static_cast<std::size_t>(n_paths),
                    PathWindow(state_dim, horizon));
  for (const auto& c : cells) {
    auto& w = c.is_state ? e.states[static_cast<std::size_t>(c.path)]
                         : e.inputs[static_cast<std::size_t>(c.path)];
    w.at(c.k)[c.comp] = c.value;
  }
  return e;
}

}  // namespace stochesp
