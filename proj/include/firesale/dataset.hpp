#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "firesale/contagion.hpp"

namespace firesale {

/// Shortest fixed-width rendering that round-trips a double: 17 significant digits.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Dataset {
  std::size_t banks = 0;
  std::size_t assets = 0;
  std::vector<EquilibriumRecord> records;

  bool has_liquidations() const {
    return !records.empty() && records.front().has_liquidations();
  }
};

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header plus one row per record:
/// s_1..s_N, gamma_1..gamma_N, ell_agg_1..ell_agg_M, p_1..p_M.
inline void write_dataset_csv(std::ostream& os, const std::vector<EquilibriumRecord>& records) {
  if (records.empty()) throw std::invalid_argument("write_dataset_csv: no records");
  const std::size_t n = records.front().s.size();
  const std::size_t m = records.front().p.size();
  std::string header;
  auto col = [&header](const char* prefix, std::size_t i) {
    if (!header.empty()) header += ',';
    header += prefix;
    header += std::to_string(i + 1);
  };
  for (std::size_t i = 0; i < n; ++i) col("s_", i);
  for (std::size_t i = 0; i < n; ++i) col("gamma_", i);
  for (std::size_t i = 0; i < m; ++i) col("ell_agg_", i);
  for (std::size_t i = 0; i < m; ++i) col("p_", i);
  os << header << '\n';

  for (const auto& r : records) {
    if (r.s.size() != n || r.gamma.size() != n || r.ell_agg.size() != m || r.p.size() != m) {
      throw ShapeError("write_dataset_csv: record shape differs from the first record");
    }
    std::string line;
    auto put = [&line](double v) {
      if (!line.empty()) line += ',';
      line += format_double(v);
    };
    for (double v : r.s) put(v);
    for (double v : r.gamma) put(v);
    for (double v : r.ell_agg) put(v);
    for (double v : r.p) put(v);
    os << line << '\n';
  }
}

/// Reads a dataset. Only the shock and price columns are mandatory; gamma
/// and ell_agg columns are loaded when present. Per-bank liquidation
/// fractions are expanded from gamma under proportional liquidation.
inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DatasetFormatError("dataset: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  enum class Col { Shock, Gamma, EllAgg, Price };
  struct Field {
    Col kind;
    std::size_t index;
  };
  std::vector<Field> fields;
  std::size_t n_s = 0, n_gamma = 0, n_ell = 0, n_p = 0;
  {
    std::stringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) {
      auto parse_index = [&name](std::size_t prefix) -> std::size_t {
        try {
          const long v = std::stol(name.substr(prefix));
          if (v < 1) throw std::invalid_argument("index");
          return static_cast<std::size_t>(v - 1);
        } catch (const std::exception&) {
          throw DatasetFormatError("dataset: bad column name '" + name + "'");
        }
      };
      if (name.rfind("s_", 0) == 0) {
        fields.push_back({Col::Shock, parse_index(2)});
        ++n_s;
      } else if (name.rfind("gamma_", 0) == 0) {
        fields.push_back({Col::Gamma, parse_index(6)});
        ++n_gamma;
      } else if (name.rfind("ell_agg_", 0) == 0) {
        fields.push_back({Col::EllAgg, parse_index(8)});
        ++n_ell;
      } else if (name.rfind("p_", 0) == 0) {
        fields.push_back({Col::Price, parse_index(2)});
        ++n_p;
      } else {
        throw DatasetFormatError("dataset: unknown column '" + name + "'");
      }
    }
  }
  if (n_s == 0 || n_p == 0) throw DatasetFormatError("dataset: shock and price columns are required");
  if (n_gamma != 0 && n_gamma != n_s) throw DatasetFormatError("dataset: gamma columns must match shock columns");
  if (n_ell != 0 && n_ell != n_p) throw DatasetFormatError("dataset: ell_agg columns must match price columns");
  for (const auto& f : fields) {
    const std::size_t limit = (f.kind == Col::Shock || f.kind == Col::Gamma) ? n_s : n_p;
    if (f.index >= limit) throw DatasetFormatError("dataset: column index out of range in header");
  }

  Dataset ds;
  ds.banks = n_s;
  ds.assets = n_p;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    EquilibriumRecord r;
    r.s.assign(n_s, 0.0);
    r.p.assign(n_p, 0.0);
    if (n_gamma) r.gamma.assign(n_s, 0.0);
    if (n_ell) r.ell_agg.assign(n_p, 0.0);
    std::stringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= fields.size()) throw DatasetFormatError("dataset: too many cells on row " + std::to_string(row));
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DatasetFormatError("dataset: bad number '" + cell + "' on row " + std::to_string(row));
      }
      const auto& f = fields[c++];
      switch (f.kind) {
        case Col::Shock: r.s[f.index] = v; break;
        case Col::Gamma: r.gamma[f.index] = v; break;
        case Col::EllAgg: r.ell_agg[f.index] = v; break;
        case Col::Price: r.p[f.index] = v; break;
      }
    }
    if (c != fields.size()) throw DatasetFormatError("dataset: too few cells on row " + std::to_string(row));
    if (n_gamma) {
      r.ell_bank = Tensor::zeros({n_s, n_p});
      for (std::size_t n = 0; n < n_s; ++n) {
        for (std::size_t m = 0; m < n_p; ++m) r.ell_bank.at(n, m) = r.gamma[n];
      }
    }
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw DatasetFormatError("dataset: no data rows");
  return ds;
}

}  // namespace firesale
