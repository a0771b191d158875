#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <unistd.h>

#include "etklab/cli.hpp"
#include "etklab/csv.hpp"
#include "etklab/io.hpp"
#include "etklab/tensor_core.hpp"

using namespace etklab;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("etklab_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  std::string put(const std::string& name, const std::string& text) const {
    write_file((dir / name).string(), text);
    return (dir / name).string();
  }
  std::string get(const std::string& out, const std::string& name) const { return read_file((dir / out / name).string()); }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(const Sandbox& sb, const std::string& cmd, const std::string& config, const std::string& out = "out",
        std::vector<std::string> extra = {}) {
  std::vector<std::string> args{cmd, "--config", config, "--out", (sb.dir / out).string()};
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const char* kHadamard =
    R"({"n": 1, "L": 1, "W": ["hadamard"], "phi": [[{"kind": "coordinate", "params": {"index": 0, "input_dim": 1}}]]})";

std::string wide_circuit(std::size_t n, std::size_t layers) {
  Json phi = Json::array(), w = Json::array();
  for (std::size_t l = 0; l < layers; ++l) {
    Json layer = Json::array();
    for (std::size_t k = 0; k < n; ++k)
      layer.push_back({{"kind", "coordinate"}, {"params", {{"index", k}, {"input_dim", n}}}});
    phi.push_back(layer);
    w.push_back("hadamard");
  }
  return Json{{"n", n}, {"L", layers}, {"W", w}, {"phi", phi}}.dump();
}

}  // namespace

TEST_CASE("eval on the Hadamard circuit") {
  Sandbox sb;
  sb.put("h.json", kHadamard);
  const auto cfg = sb.put("eval.json", R"({"experiment": "eval", "paths": {"circuit": "h.json"},
    "parameters": {"pairs": [[[0], [0]], [[3.141592653589793], [0]], [[0.3], [-1.1]]]}})");
  const Run r = run(sb, "eval", cfg);
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  CHECK(rows[0] == std::vector<std::string>{"pair", "etk", "statevector", "abs_diff"});
  CHECK(std::abs(std::stod(rows[1][1]) - 1.0) <= 1e-12);
  CHECK(std::abs(std::stod(rows[1][2]) - 1.0) <= 1e-12);
  CHECK(std::stod(rows[1][3]) <= 1e-12);
  CHECK(std::abs(std::stod(rows[2][1])) <= 1e-9);
  CHECK(std::abs(std::stod(rows[2][2])) <= 1e-9);
  CHECK(std::abs(std::stod(rows[3][1]) - (1 + std::cos(1.4)) / 2) <= 1e-12);
  CHECK(sb.get("out", "eval.csv") == r.out.substr(0, r.out.find("wrote")));
}

TEST_CASE("eval on a serialized kernel") {
  Sandbox sb;
  sb.put("h.json", kHadamard);
  REQUIRE(run(sb, "extract", sb.put("x.json", R"({"paths": {"circuit": "h.json"}})"), "ex").code == 0);
  fs::copy_file(sb.dir / "ex" / "kernel.json", sb.dir / "k.json");
  const Run r = run(sb, "eval", sb.put("e.json", R"({"paths": {"kernel": "k.json"}, "parameters": {"x": [0.5], "xp": [0.5]}})"));
  REQUIRE(r.code == 0);
  CHECK(std::abs(std::stod(parse_csv(r.out)[1][1]) - 1.0) < 1e-12);
}

TEST_CASE("schema, I/O and cap errors map to exit codes") {
  Sandbox sb;
  sb.put("h.json", kHadamard);
  const Run malformed = run(sb, "eval", sb.put("bad.json", "{\n  \"paths\": {\n    \"circuit\": ]\n}"));
  CHECK(malformed.code == 3);
  CHECK(malformed.err.find("bad.json:3:16") != std::string::npos);

  CHECK(run(sb, "eval", sb.put("u.json", R"({"paths": {"circuit": "h.json"}, "colour": 1})")).code == 3);
  CHECK(run(sb, "eval", sb.put("u2.json", R"({"paths": {"circuit": "h.json"}, "parameters": {"x": [0], "xp": [0], "y": 1}})")).code == 3);
  CHECK(run(sb, "eval", sb.put("m.json", R"({"experiment": "learn", "paths": {"circuit": "h.json"}})")).code == 3);
  CHECK(run(sb, "eval", (sb.dir / "nope.json").string()).code == 2);
  CHECK(run(sb, "eval", sb.put("nf.json", R"({"paths": {"circuit": "missing.json"}, "parameters": {"x": [0], "xp": [0]}})")).code == 2);
  CHECK(run(sb, "scaling", sb.put("ns.json", R"({"parameters": {"n_values": [2], "models": ["haar"]}})")).code == 3);
  CHECK(run(sb, "learn", sb.put("nl.json", R"({"parameters": {"models": ["haar"]}})")).code == 3);
  CHECK(run(sb, "scaling", sb.put("fs.json", R"({"seed": 1.5, "parameters": {"n_values": [2], "models": ["haar"]}})")).code == 3);

  sb.put("wide.json", wide_circuit(4, 2));
  const Run cap = run(sb, "extract", sb.put("cap.json", R"({"paths": {"circuit": "wide.json"}, "parameters": {"route": "dense"}})"));
  CHECK(cap.code == 4);
  CHECK(cap.err.find("ptm") != std::string::npos);

  std::vector<std::string> none;
  std::ostringstream o, e;
  CHECK(run_cli({"bogus", "--config", "x"}, o, e) == 3);
  CHECK(run_cli({"eval"}, o, e) == 3);
  CHECK(run_cli({"--help"}, o, e) == 0);
}

TEST_CASE("statevector cap honours the environment override") {
  Sandbox sb;
  sb.put("c.json", wide_circuit(2, 1));
  const auto cfg = sb.put("e.json", R"({"paths": {"circuit": "c.json"}, "parameters": {"x": [0, 0], "xp": [1, 1]}})");
  CHECK(run(sb, "eval", cfg).code == 0);
  ::setenv("ETKLAB_CAP_QUBITS", "1", 1);
  const Run r = run(sb, "eval", cfg);
  ::unsetenv("ETKLAB_CAP_QUBITS");
  CHECK(r.code == 4);
}

TEST_CASE("extract of the Hadamard circuit gives the identity core") {
  Sandbox sb;
  sb.put("h.json", kHadamard);
  for (const char* route : {"dense", "ptm"}) {
    const Run r = run(sb, "extract", sb.put("x.json", std::string(R"({"paths": {"circuit": "h.json"}, "parameters": {"route": ")") + route + "\"}}"));
    REQUIRE(r.code == 0);
    const Json j = parse_json(sb.get("out", "core_ct.json"), "core");
    CHECK(max_abs(matrix_from_json(j.at("matrix"), "m") - DenseMatrix::Identity(3, 3)) <= 1e-10);
  }
  const Run m = run(sb, "extract", sb.put("y.json", R"({"paths": {"circuit": "h.json"}, "parameters": {"format": "mpo"}})"), "mpo");
  REQUIRE(m.code == 0);
  const Mpo mpo = mpo_from_json(parse_json(sb.get("mpo", "core_ct.json"), "mpo"));
  CHECK(max_abs(mpo_to_dense(mpo) - DenseMatrix::Identity(3, 3)) <= 1e-10);
}

TEST_CASE("mercer command") {
  Sandbox sb;
  sb.put("h.json", kHadamard);
  const Run r = run(sb, "mercer", sb.put("m.json", R"({"paths": {"circuit": "h.json"}})"));
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(sb.get("out", "spectrum.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(std::stod(rows[1][1]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::stod(rows[2][1]) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(parse_json(sb.get("out", "mercer.json"), "m").at("rank") == 3);
  CHECK(run(sb, "mercer", sb.put("mc.json", R"({"paths": {"circuit": "h.json"}, "parameters": {"provider": "monte_carlo"}})")).code == 3);
  CHECK(run(sb, "mercer", sb.put("mc2.json", R"({"seed": 3, "paths": {"circuit": "h.json"}, "parameters": {"provider": "monte_carlo", "mc_samples": 2000}})")).code == 0);
}

TEST_CASE("spectrum command") {
  Sandbox sb;
  const Run r = run(sb, "spectrum", sb.put("s.json", R"({"parameters": {"n": 4, "state": "uniform"}})"));
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(sb.get("out", "spectrum_0.csv"));
  CHECK(rows[0] == std::vector<std::string>{"rank", "eigenvalue"});
  CHECK(std::stod(rows[1][1]) == doctest::Approx(1.0 / 16).epsilon(1e-14));
  CHECK(rows.size() == 1 + 81);
  const auto top = parse_csv(sb.get("out", "spectrum_top.csv"));
  CHECK(top.size() == 1 + 11);
  CHECK(sb.get("out", "spectrum.svg").find("</svg>") != std::string::npos);
  CHECK(run(sb, "spectrum", sb.put("h.json", R"({"parameters": {"n": 3, "state": "haar", "instances": 2}})")).code == 3);
  REQUIRE(run(sb, "spectrum", sb.put("h2.json", R"({"seed": 4, "parameters": {"n": 3, "state": "concentrated", "s": 2, "instances": 2}})"), "c").code == 0);
  CHECK(fs::exists(sb.dir / "c" / "spectrum_1.csv"));
  CHECK(run(sb, "spectrum", sb.put("big.json", R"({"parameters": {"n": 9, "state": "uniform"}})")).code == 4);
  CHECK(run(sb, "spectrum", sb.put("ex.json", R"({"parameters": {"state": "explicit", "psi2": [0.5, 0.5]}})"), "ex").code == 0);
  CHECK(run(sb, "spectrum", sb.put("ex2.json", R"({"parameters": {"state": "explicit", "psi2": [0.5, 0.6]}})"), "ex2").code == 3);
}

TEST_CASE("scaling command") {
  Sandbox sb;
  const auto cfg = sb.put("s.json", R"({"experiment": "scaling", "seed": 11,
    "parameters": {"n_values": [2, 3, 4, 5, 6, 7], "models": ["haar", {"s": 4}, {"s": 16}, {"s": 64}], "instances": 3}})");
  REQUIRE(run(sb, "scaling", cfg, "a", {"--threads", "1"}).code == 0);
  REQUIRE(run(sb, "scaling", cfg, "b", {"--threads", "3"}).code == 0);
  const std::string csv = sb.get("a", "scaling.csv");
  CHECK(csv == sb.get("b", "scaling.csv"));
  CHECK(sb.get("a", "scaling.svg") == sb.get("b", "scaling.svg"));
  std::set<std::string> models;
  for (const auto& row : parse_csv(csv)) models.insert(row[0]);
  CHECK(models == std::set<std::string>{"model", "haar", "s4", "s16", "s64"});
  const std::string svg = sb.get("a", "scaling.svg");
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 4);

  REQUIRE(run(sb, "scaling", cfg, "c", {"--seed", "12"}).code == 0);
  CHECK(sb.get("c", "scaling.csv") != csv);

  const auto one = sb.put("one.json", R"({"seed": 1, "parameters": {"n_values": [3, 4], "models": ["haar"], "instances": 1}})");
  REQUIRE(run(sb, "scaling", one, "d").code == 0);
  const auto rows = parse_csv(sb.get("d", "scaling.csv"));
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][5] == "0");
}

TEST_CASE("learn command") {
  Sandbox sb;
  const auto cfg = sb.put("l.json", R"({"seed": 2, "parameters": {"n": 2, "models": ["haar", {"s": 2}],
    "instances": 3, "schedule": [2, 4, 6, 10, 14]}})");
  REQUIRE(run(sb, "learn", cfg, "a", {"--threads", "1"}).code == 0);
  REQUIRE(run(sb, "learn", cfg, "b", {"--threads", "4"}).code == 0);
  const std::string csv = sb.get("a", "learning.csv");
  CHECK(csv == sb.get("b", "learning.csv"));
  const auto rows = parse_csv(csv);
  CHECK(rows[0] == std::vector<std::string>{"model", "instance", "m", "mse", "alignment"});
  std::size_t per_instance = 0, aggregate = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) (rows[i][1] == "mean" || rows[i][1] == "std" ? aggregate : per_instance)++;
  CHECK(per_instance == 30);
  CHECK(aggregate == 20);
  CHECK(sb.get("a", "learning.svg").find("<polyline") != std::string::npos);

  const auto zero = sb.put("z.json", R"({"seed": 2, "parameters": {"n": 2, "models": ["haar"], "instances": 2,
    "schedule": [3, 6], "zero_target": true}})");
  REQUIRE(run(sb, "learn", zero, "z").code == 0);
  for (const auto& row : parse_csv(sb.get("z", "learning.csv")))
    if (row[0] != "model") CHECK(row[3] == "0");
  CHECK(run(sb, "learn", sb.put("bad.json", R"({"seed": 2, "parameters": {"n": 2, "models": [{"s": 9}]}})")).code == 3);
}
