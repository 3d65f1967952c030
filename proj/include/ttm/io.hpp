#pragma once

// Text export of map families and transfer-tensor sets (JSON), and a CSV
// writer whose header block records conventions and parameters.
//
// Matrices are stored as {"rows", "cols", "data"} with data the row-major
// sequence re(0,0), im(0,0), re(0,1), ... . Doubles are written with 17
// significant digits, so a round trip reproduces them exactly.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ttm/errors.hpp"
#include "ttm/liouville.hpp"
#include "ttm/tomography.hpp"
#include "ttm/transfer_tensor.hpp"

namespace ttm {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConventionText =
    "vec column-stacking vec(AXB)=(B^T kron A)vec(X); joint index s*dimE+e (system first); "
    "superoperator norm = largest singular value; state distance = trace norm";

using Json = nlohmann::json;

namespace io {

inline Json conventions() {
  return Json{{"vectorization", "column-stacking"},
              {"tensor_order", "system-first"},
              {"matrix_layout", "row-major re/im pairs"},
              {"superoperator_norm", "largest singular value"}};
}

inline Json encode(const ComplexMatrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(2 * m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      data.push_back(m(r, c).real());
      data.push_back(m(r, c).imag());
    }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline ComplexMatrix decode_matrix(const Json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(2 * rows * cols)) {
    throw ValidationError("matrix record: data length does not match rows*cols");
  }
  ComplexMatrix m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c, k += 2) m(r, c) = Complex(data[k].get<double>(), data[k + 1].get<double>());
  return m;
}

inline void check_format(const Json& j, const char* expected) {
  if (!j.contains("format") || j.at("format") != expected) {
    throw ValidationError(std::string("expected a '") + expected + "' document");
  }
  if (j.at("conventions") != conventions()) {
    throw ValidationError("document uses different conventions than this build");
  }
}

}  // namespace io

inline Json to_json(const DynamicalMapFamily& family) {
  const auto& g = family.grid();
  Json maps = Json::array();
  for (int i = 0; i < g.steps; ++i)
    for (int j = i + 1; j <= g.steps; ++j)
      if (family.contains(i, j)) maps.push_back({{"i", i}, {"j", j}, {"matrix", io::encode(family.at(i, j).matrix())}});
  Json refs = Json::array();
  for (int j = 0; j <= g.steps; ++j) refs.push_back(io::encode(family.reference_state(j)));
  return Json{{"format", "ttm-map-family"},
              {"version", kVersion},
              {"conventions", io::conventions()},
              {"layout", {{"dim_s", family.layout().dimS}, {"dim_e", family.layout().dimE}}},
              {"grid", {{"t0", g.t0}, {"dt", g.dt}, {"steps", g.steps}}},
              {"policy", family.policy()},
              {"band", family.band()},
              {"reference_states", std::move(refs)},
              {"maps", std::move(maps)}};
}

inline DynamicalMapFamily family_from_json(const Json& j) {
  io::check_format(j, "ttm-map-family");
  const SpaceLayout lay{j.at("layout").at("dim_s").get<Index>(), j.at("layout").at("dim_e").get<Index>()};
  lay.validate();
  const TimeGrid grid{j.at("grid").at("t0").get<double>(), j.at("grid").at("dt").get<double>(),
                      j.at("grid").at("steps").get<int>()};
  grid.validate();
  DynamicalMapFamily family(grid, j.at("policy").get<std::string>(), j.at("band").get<int>(), lay);
  const auto& refs = j.at("reference_states");
  if (refs.size() != static_cast<std::size_t>(grid.points())) {
    throw ValidationError("map family: expected one reference state per grid point");
  }
  for (int k = 0; k <= grid.steps; ++k) family.set_reference_state(k, io::decode_matrix(refs[k]));
  for (const auto& m : j.at("maps")) {
    family.set(m.at("i").get<int>(), m.at("j").get<int>(), Superoperator(io::decode_matrix(m.at("matrix"))));
  }
  return family;
}

inline Json to_json(const TransferTensorSet& set) {
  const auto& cfg = set.config();
  Json tensors = Json::array();
  for (int p = 0; p < cfg.stored_starts(); ++p)
    for (int l = 1; l <= set.max_length(); ++l)
      if (set.has(p, l)) tensors.push_back({{"phase", p}, {"length", l}, {"matrix", io::encode(set.at_phase(p, l).matrix())}});
  Json residuals = Json::array();
  for (int k = 1; k <= set.residual_count(); ++k) residuals.push_back(io::encode(set.residual(k)));
  return Json{{"format", "ttm-transfer-tensors"},
              {"version", kVersion},
              {"conventions", io::conventions()},
              {"config", {{"dt", cfg.dt}, {"m", cfg.m}, {"c", cfg.c}, {"transient", cfg.transient_steps}}},
              {"max_length", set.max_length()},
              {"dim", set.dim()},
              {"tensors", std::move(tensors)},
              {"residuals", std::move(residuals)}};
}

inline TransferTensorSet tensors_from_json(const Json& j) {
  io::check_format(j, "ttm-transfer-tensors");
  const auto& c = j.at("config");
  const MemoryConfig cfg{c.at("dt").get<double>(), c.at("m").get<int>(), c.at("c").get<int>(),
                         c.at("transient").get<int>()};
  cfg.validate();
  const Index dim = j.at("dim").get<Index>();
  TransferTensorSet set(cfg, j.at("max_length").get<int>(), dim);
  for (const auto& t : j.at("tensors")) {
    const int p = t.at("phase").get<int>();
    const int l = t.at("length").get<int>();
    if (p < 0 || p >= cfg.stored_starts() || l < 1 || l > set.max_length()) {
      throw ValidationError("tensor set: entry (phase " + std::to_string(p) + ", length " +
                            std::to_string(l) + ") outside the declared table");
    }
    set.set(p, l, Superoperator(io::decode_matrix(t.at("matrix"))));
  }
  const auto& res = j.at("residuals");
  if (!res.empty()) {
    std::vector<ComplexMatrix> r{ComplexMatrix::Zero(dim, dim)};
    for (const auto& x : res) r.push_back(io::decode_matrix(x));
    set.set_residuals(std::move(r));
  }
  return set;
}

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(1) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // byte offset -> line number for the message
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    int line = 1;
    for (std::size_t k = 0; k < upto; ++k)
      if (text[k] == '\n') ++line;
    throw ValidationError(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

/// Comma-separated table preceded by '#' comment lines: version, conventions
/// and a key=value echo of every parameter given.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::string& title,
            const std::vector<std::pair<std::string, std::string>>& params)
      : out_(out) {
    out_ << "# ttm " << kVersion << " " << title << '\n';
    out_ << "# conventions: " << kConventionText << '\n';
    for (const auto& [k, v] : params) out_ << "# " << k << " = " << v << '\n';
  }

  void columns(const std::vector<std::string>& names) { row_strings(names); }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

  static std::string cell(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
  }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(long long x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }

 private:
  std::ostream& out_;
};

/// Column names re_rc, im_rc for a d x d operator, row-major.
inline std::vector<std::string> operator_columns(Index d, const std::string& prefix = "rho") {
  std::vector<std::string> cols;
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) {
      cols.push_back("re_" + prefix + std::to_string(r) + std::to_string(c));
      cols.push_back("im_" + prefix + std::to_string(r) + std::to_string(c));
    }
  return cols;
}

inline std::vector<std::string> operator_cells(const ComplexMatrix& x) {
  std::vector<std::string> cells;
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) {
      cells.push_back(CsvWriter::cell(x(r, c).real()));
      cells.push_back(CsvWriter::cell(x(r, c).imag()));
    }
  return cells;
}

}  // namespace ttm
