#include "etklab/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>
#include <variant>

#include "etklab/errors.hpp"

namespace etklab {

namespace {

template <typename T>
T get_as(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(where + "." + key + ": wrong type or missing");
  }
}

cplx entry_from_json(const Json& e, const std::string& where) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
    return {e[0].get<double>(), e[1].get<double>()};
  throw SchemaError(where + ": entries must be numbers or [re, im] pairs");
}

Json site_to_json(const SiteTensor& t) {
  Json entries = Json::array();
  for (const cplx& v : t.data) {
    entries.push_back(v.real());
    entries.push_back(v.imag());
  }
  return Json{{"dims", {t.left, t.rows, t.cols, t.right}}, {"entries", std::move(entries)}};
}

std::vector<SiteTensor> sites_from_json(const Json& j, const char* kind) {
  const std::string where = std::string(kind);
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  check_fields(j, {"kind", "sites"}, {"kind", "sites"}, where);
  if (get_as<std::string>(j, "kind", where) != kind)
    throw SchemaError(where + ".kind: expected \"" + kind + "\"");
  const Json& sites = j.at("sites");
  if (!sites.is_array() || sites.empty()) throw SchemaError(where + ".sites: expected a non-empty array");
  std::vector<SiteTensor> out;
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const std::string w = where + ".sites[" + std::to_string(k) + "]";
    check_fields(sites[k], {"dims", "entries"}, {"dims", "entries"}, w);
    const auto dims = get_as<std::vector<std::size_t>>(sites[k], "dims", w);
    if (dims.size() != 4 || std::find(dims.begin(), dims.end(), 0) != dims.end())
      throw SchemaError(w + ".dims: expected four positive integers");
    const auto entries = get_as<std::vector<double>>(sites[k], "entries", w);
    SiteTensor t(dims[0], dims[1], dims[2], dims[3]);
    if (entries.size() != 2 * t.data.size())
      throw SchemaError(w + ".entries: expected " + std::to_string(2 * t.data.size()) + " numbers");
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = {entries[2 * i], entries[2 * i + 1]};
    out.push_back(std::move(t));
  }
  return out;
}

DenseMatrix named_unitary(const std::string& name, std::size_t n, const std::string& where) {
  const std::size_t dim = std::size_t{1} << n;
  if (name == "identity") return DenseMatrix::Identity(dim, dim);
  if (name == "hadamard") {
    DenseMatrix w = hadamard();
    for (std::size_t k = 1; k < n; ++k) w = kron(w, hadamard());
    return w;
  }
  throw SchemaError(where + ": unknown unitary \"" + name + "\" (expected hadamard or identity)");
}

template <typename F>
auto rethrow_as_schema(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const StructuralError& e) {
    throw SchemaError(where + ": " + e.what());
  } catch (const ValidationError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
}

void check_fields(const Json& obj, std::initializer_list<const char*> allowed,
                  std::initializer_list<const char*> required, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw SchemaError(where + ": unknown field \"" + key + "\"");
  for (const char* key : required)
    if (!obj.contains(key)) throw SchemaError(where + ": missing field \"" + std::string(key) + "\"");
}

Json matrix_to_json(const DenseMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

DenseMatrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    throw SchemaError(where + ": expected a non-empty array of rows");
  const std::size_t rows = j.size(), cols = j[0].size();
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw SchemaError(where + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = entry_from_json(j[r][c], where);
  }
  return m;
}

Json mpo_to_json(const Mpo& mpo) {
  Json sites = Json::array();
  for (const auto& s : mpo.sites()) sites.push_back(site_to_json(s));
  return Json{{"kind", "mpo"}, {"sites", std::move(sites)}};
}

Json lpmpo_to_json(const LpMpo& lp) {
  Json j = mpo_to_json(lp.purification());
  j["kind"] = "lpmpo";
  return j;
}

Mpo mpo_from_json(const Json& j) {
  return rethrow_as_schema("mpo", [&] { return Mpo(sites_from_json(j, "mpo")); });
}

LpMpo lpmpo_from_json(const Json& j) {
  return rethrow_as_schema("lpmpo", [&] { return LpMpo(sites_from_json(j, "lpmpo")); });
}

Json preprocessing_to_json(const PreprocessingFn& fn) {
  switch (fn.kind()) {
    case PreprocessingFn::Kind::Coordinate:
      return Json{{"kind", "coordinate"}, {"params", {{"index", fn.index()}, {"input_dim", fn.input_dim()}}}};
    case PreprocessingFn::Kind::Affine:
      return Json{{"kind", "affine"}, {"params", {{"weights", fn.weights()}, {"bias", fn.bias()}}}};
    case PreprocessingFn::Kind::Zero:
      break;
  }
  return Json{{"kind", "zero"}, {"params", {{"input_dim", fn.input_dim()}}}};
}

PreprocessingFn preprocessing_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"kind", "params"}, {"kind", "params"}, where);
  const auto kind = get_as<std::string>(j, "kind", where);
  const Json& p = j.at("params");
  const std::string wp = where + ".params";
  return rethrow_as_schema(where, [&] {
    if (kind == "coordinate") {
      check_fields(p, {"index", "input_dim"}, {"index", "input_dim"}, wp);
      return PreprocessingFn::coordinate(get_as<std::size_t>(p, "index", wp), get_as<std::size_t>(p, "input_dim", wp));
    }
    if (kind == "affine") {
      check_fields(p, {"weights", "bias"}, {"weights"}, wp);
      const double bias = p.contains("bias") ? get_as<double>(p, "bias", wp) : 0.0;
      return PreprocessingFn::affine(get_as<std::vector<double>>(p, "weights", wp), bias);
    }
    if (kind == "zero") {
      check_fields(p, {"input_dim"}, {"input_dim"}, wp);
      return PreprocessingFn::zero(get_as<std::size_t>(p, "input_dim", wp));
    }
    throw SchemaError(where + ".kind: expected coordinate, affine or zero");
  });
}

Json circuit_to_json(const StandardFormCircuit& circ) {
  Json w = Json::array(), phi = Json::array();
  for (const auto& u : circ.fixed_unitaries()) w.push_back(matrix_to_json(u));
  for (const auto& layer : circ.encodings()) {
    Json l = Json::array();
    for (const auto& f : layer) l.push_back(preprocessing_to_json(f));
    phi.push_back(std::move(l));
  }
  return Json{{"n", circ.qubits()}, {"L", circ.layers()}, {"data_dim", circ.data_dim()}, {"W", w}, {"phi", phi}};
}

StandardFormCircuit circuit_from_json(const Json& j) {
  const std::string where = "circuit";
  check_fields(j, {"n", "L", "data_dim", "W", "phi"}, {"n", "L", "W", "phi"}, where);
  const auto n = get_as<std::size_t>(j, "n", where);
  const auto layers = get_as<std::size_t>(j, "L", where);
  if (n == 0 || n > 12) throw SchemaError(where + ".n: expected 1..12");
  const Json& w = j.at("W");
  const Json& phi = j.at("phi");
  if (!w.is_array() || w.size() != layers) throw SchemaError(where + ".W: expected L unitaries");
  if (!phi.is_array() || phi.size() != layers) throw SchemaError(where + ".phi: expected L encoding layers");
  std::vector<DenseMatrix> us;
  std::vector<std::vector<PreprocessingFn>> enc;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string wl = where + ".W[" + std::to_string(l) + "]";
    us.push_back(w[l].is_string() ? named_unitary(w[l].get<std::string>(), n, wl) : matrix_from_json(w[l], wl));
    const std::string pl = where + ".phi[" + std::to_string(l) + "]";
    if (!phi[l].is_array()) throw SchemaError(pl + ": expected an array");
    std::vector<PreprocessingFn> layer;
    for (std::size_t k = 0; k < phi[l].size(); ++k)
      layer.push_back(preprocessing_from_json(phi[l][k], pl + "[" + std::to_string(k) + "]"));
    enc.push_back(std::move(layer));
  }
  StandardFormCircuit circ = rethrow_as_schema(where, [&] { return StandardFormCircuit(n, us, enc); });
  if (j.contains("data_dim") && get_as<std::size_t>(j, "data_dim", where) != circ.data_dim())
    throw SchemaError(where + ".data_dim: disagrees with the encoding maps");
  return circ;
}

Json kernel_to_json(const EtkKernel& kernel) {
  if (kernel.basis() == KernelBasis::Custom)
    throw ValidationError("kernel_to_json: only kernels over a T or E local basis are serializable");
  Json fs = Json::array();
  for (const auto& s : kernel.sites()) fs.push_back(preprocessing_to_json(s.fn()));
  Json core = std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DenseCore>)
          return Json{{"kind", "dense"}, {"payload", matrix_to_json(c.matrix)}};
        else if constexpr (std::is_same_v<T, MpoCore>)
          return Json{{"kind", "mpo"}, {"payload", mpo_to_json(c.mpo)}};
        else
          return Json{{"kind", "lpmpo"}, {"payload", lpmpo_to_json(c.lp)}};
      },
      kernel.core());
  return Json{{"feature_set", fs}, {"basis", kernel.basis() == KernelBasis::T ? "T" : "E"}, {"core", core}};
}

EtkKernel kernel_from_json(const Json& j) {
  const std::string where = "kernel";
  check_fields(j, {"feature_set", "basis", "core"}, {"feature_set", "basis", "core"}, where);
  const Json& fs = j.at("feature_set");
  if (!fs.is_array() || fs.empty()) throw SchemaError(where + ".feature_set: expected a non-empty array");
  LocalFeatureSet set;
  for (std::size_t k = 0; k < fs.size(); ++k)
    set.maps.push_back(preprocessing_from_json(fs[k], where + ".feature_set[" + std::to_string(k) + "]"));
  const auto basis = get_as<std::string>(j, "basis", where);
  if (basis != "T" && basis != "E") throw SchemaError(where + ".basis: expected \"T\" or \"E\"");
  const Json& core = j.at("core");
  check_fields(core, {"kind", "payload"}, {"kind", "payload"}, where + ".core");
  const auto kind = get_as<std::string>(core, "kind", where + ".core");
  CoreTensor ct;
  if (kind == "dense")
    ct = DenseCore{matrix_from_json(core.at("payload"), where + ".core.payload")};
  else if (kind == "mpo")
    ct = MpoCore{mpo_from_json(core.at("payload"))};
  else if (kind == "lpmpo")
    ct = LpMpoCore{lpmpo_from_json(core.at("payload"))};
  else
    throw SchemaError(where + ".core.kind: expected dense, mpo or lpmpo");
  return rethrow_as_schema(where, [&] {
    return EtkKernel::from_feature_set(set, basis == "T" ? LocalBasis::T : LocalBasis::E, std::move(ct));
  });
}

}  // namespace etklab
