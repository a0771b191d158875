#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>

#include "etklab/etk.hpp"
#include "etklab/quantum_etk.hpp"
#include "etklab/tensor_core.hpp"
#include "json.hpp"

namespace etklab {

using Json = nlohmann::json;

/// Malformed or schema-violating JSON input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Parses JSON; syntax errors become SchemaError with "<source>:<line>:<col>: ...".
Json parse_json(const std::string& text, const std::string& source);

/// Rejects keys outside `allowed` and requires every key in `required`.
void check_fields(const Json& obj, std::initializer_list<const char*> allowed,
                  std::initializer_list<const char*> required, const std::string& where);

/// Matrices are arrays of rows; entries are [re, im] pairs (plain numbers are accepted on input).
Json matrix_to_json(const DenseMatrix& m);
DenseMatrix matrix_from_json(const Json& j, const std::string& where);

/// {kind: "mpo"|"lpmpo", sites: [{dims: [left, rows, cols, right], entries: [re, im, ...]}]}, row-major per site.
Json mpo_to_json(const Mpo& mpo);
Json lpmpo_to_json(const LpMpo& lp);
Mpo mpo_from_json(const Json& j);
LpMpo lpmpo_from_json(const Json& j);

/// {kind: "coordinate"|"affine"|"zero", params: {...}}.
Json preprocessing_to_json(const PreprocessingFn& fn);
PreprocessingFn preprocessing_from_json(const Json& j, const std::string& where);

/// {n, L, W: [matrix | "hadamard" | "identity"], phi: [[PreprocessingFn]]}.
Json circuit_to_json(const StandardFormCircuit& circ);
StandardFormCircuit circuit_from_json(const Json& j);

/// {feature_set: [PreprocessingFn], basis: "T"|"E", core: {kind: "dense"|"mpo"|"lpmpo", payload}}.
Json kernel_to_json(const EtkKernel& kernel);
EtkKernel kernel_from_json(const Json& j);

}  // namespace etklab
