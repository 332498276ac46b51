#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hswarm/cli.hpp"
#include "hswarm/remote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int status = 0;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hswarm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.status = hswarm::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hswarm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

}  // namespace

TEST_CASE("decode on the two-node example") {
  auto dir = scratch("decode");
  write(dir / "m.json", "[[0, 0.99], [0.01, 0]]");
  auto r = cli({"decode", "--matrix", (dir / "m.json").string(), "--top-p", "0.05", "--seed", "1"});
  REQUIRE(r.status == 0);
  auto dag = json::parse(r.out);
  CHECK(dag["end_node"] == 1);
  CHECK(dag["edges"] == json::array({json::array({0, 1})}));
  auto many = cli({"decode", "--matrix", (dir / "m.json").string(), "--samples", "5", "--tau", "0.5"});
  REQUIRE(many.status == 0);
  CHECK(json::parse(many.out).size() == 5);
}

TEST_CASE("optimize with a constant utility stops after patience") {
  auto dir = scratch("constant");
  write(dir / "c.json", R"({"n_experts": 3, "patience": 2, "utility": {"name": "constant", "value": 0.25}})");
  auto r = cli({"optimize", "--config", (dir / "c.json").string(), "--out", (dir / "out").string(), "--quiet"});
  REQUIRE(r.status == 0);
  auto summary = json::parse(r.out);
  CHECK(summary["iterations"] == 3);
  CHECK(summary["stop_reason"] == "patience");
  for (auto f : {"best_system.json", "trace.jsonl", "report.json", "metrics.csv", "checkpoint.json", "pool/manifest.json"})
    CHECK(fs::exists(dir / "out" / f));
  auto report = json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report["final_utility"] == 0.25);
}

TEST_CASE("optimize outputs are byte-identical across runs and job counts") {
  auto dir = scratch("determinism");
  write(dir / "c.json", R"({"n_experts": 6, "N": 5, "M": 4, "dropout": {"d_r": 0.2, "d_w": 0.5}})");
  auto a = cli({"optimize", "--config", (dir / "c.json").string(), "--seed", "11", "--out", (dir / "a").string(), "--quiet"});
  auto b = cli({"optimize", "--config", (dir / "c.json").string(), "--seed", "11", "--jobs", "3", "--out",
                (dir / "b").string(), "--quiet"});
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  for (auto f : {"trace.jsonl", "best_system.json", "report.json", "task.jsonl"}) {
    INFO(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("interrupted optimize resumes to the uninterrupted result") {
  auto dir = scratch("resume");
  auto whole = cli({"optimize", "--seed", "2", "--out", (dir / "whole").string(), "--quiet"});
  REQUIRE(whole.status == 0);
  auto part = cli({"optimize", "--seed", "2", "--out", (dir / "split").string(), "--quiet", "--stop-after", "3"});
  REQUIRE(part.status == 0);
  CHECK(json::parse(part.out)["stop_reason"] == "interrupted");
  auto rest = cli({"optimize", "--seed", "2", "--out", (dir / "split").string(), "--quiet", "--resume"});
  REQUIRE(rest.status == 0);
  CHECK(slurp(dir / "whole" / "trace.jsonl") == slurp(dir / "split" / "trace.jsonl"));
  CHECK(slurp(dir / "whole" / "best_system.json") == slurp(dir / "split" / "best_system.json"));
}

TEST_CASE("evaluate reproduces the reported utility") {
  auto dir = scratch("evaluate");
  REQUIRE(cli({"optimize", "--seed", "4", "--out", dir.string(), "--quiet", "--mode", "role_only"}).status == 0);
  auto r = cli({"evaluate", "--system", (dir / "best_system.json").string(), "--task", (dir / "task.jsonl").string()});
  REQUIRE(r.status == 0);
  auto report = json::parse(slurp(dir / "report.json"));
  CHECK(json::parse(r.out)["utility"].get<double>() == doctest::Approx(report["final_utility"].get<double>()));
}

TEST_CASE("errors exit nonzero with JSON on stderr") {
  auto dir = scratch("errors");
  write(dir / "bad.json", R"({"sparsity": {"mode": "threshold", "tau": 1.5}})");
  auto r = cli({"optimize", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()});
  CHECK(r.status != 0);
  auto e = json::parse(r.err);
  CHECK(e["error"] == "config");
  CHECK(e["key"] == "sparsity.tau");
  auto u = cli({"optimize", "--mode", "sideways"});
  CHECK(u.status != 0);
  CHECK(json::parse(u.err)["error"] == "usage");
  auto missing = cli({"decode", "--matrix", (dir / "none.json").string()});
  CHECK(missing.status != 0);
  CHECK(json::parse(missing.err).contains("message"));
  CHECK(cli({}).status != 0);
}

TEST_CASE("sweep draws from the hyperparameter grid") {
  auto dir = scratch("sweep");
  write(dir / "c.json", R"({"n_experts": 4, "N": 3, "M": 3, "max_iterations": 3})");
  auto r = cli({"sweep", "--config", (dir / "c.json").string(), "--runs", "6", "--out", dir.string()});
  REQUIRE(r.status == 0);
  std::ifstream in(dir / "sweep.jsonl");
  std::string line;
  std::size_t runs = 0;
  auto in_grid = [](double v, std::vector<double> grid) {
    return std::any_of(grid.begin(), grid.end(), [v](double g) { return std::abs(g - v) < 1e-12; });
  };
  while (std::getline(in, line)) {
    ++runs;
    auto j = json::parse(line);
    for (auto which : {"role_pso", "weight_pso"}) {
      const auto& hp = j[which];
      CHECK(in_grid(hp["inertia"], {0.1, 0.2, 0.3}));
      CHECK(in_grid(hp["cognitive"], {0.1, 0.2, 0.3, 0.4, 0.5}));
      CHECK(in_grid(hp["social"], {0.2, 0.3, 0.4, 0.5, 0.6}));
      CHECK(in_grid(hp["repel"], {0.01, 0.05, 0.1}));
      CHECK(in_grid(hp["step_length"], {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}));
    }
  }
  CHECK(runs == 6);
  CHECK(fs::exists(dir / "best_system.json"));
}

TEST_CASE("analyze reports buckets, gain and ablations") {
  auto dir = scratch("analyze");
  write(dir / "c.json", R"({"experts": [[false, false], [true, false], [false, true], [true, true]],
                            "system": [true, true, false, true],
                            "ablations": [{"name": "NLGraph", "wo_role": 0.24, "wo_weight": 0.36,
                                           "role_baseline_avg": 0.53, "weight_baseline_avg": 0.54}]})");
  auto r = cli({"analyze", "--correct", (dir / "c.json").string()});
  REQUIRE(r.status == 0);
  auto j = json::parse(r.out);
  CHECK(j["collaborative_gain"] == 0.0);
  CHECK(j["zero_bucket_rate"] == 1.0);
  CHECK(j["ablations"][0]["consistent"] == false);
}

TEST_CASE("role-only optimize against the echo stub") {
  hswarm::EchoStubServer stub;
  stub.start();
  auto dir = scratch("remote");
  write(dir / "data.jsonl", "{\"input\": \"2+2?\", \"answer\": \"4\"}\n{\"input\": \"3+3?\", \"answer\": \"6\"}\n");
  json cfg = {{"n_experts", 3},
              {"N", 2},
              {"max_iterations", 2},
              {"mode", "role_only"},
              {"utility", {{"name", "remote_dataset"}, {"dataset", (dir / "data.jsonl").string()}, {"endpoints", {stub.url()}}}}};
  write(dir / "c.json", cfg.dump());
  auto r = cli({"optimize", "--config", (dir / "c.json").string(), "--out", (dir / "out").string(), "--quiet"});
  REQUIRE(r.status == 0);
  // Echoed prompts never equal the answers; 2 iterations x N=2 x 3 nodes x 2 examples, plus the final evaluation.
  CHECK(json::parse(r.out)["final_utility"] == 0.0);
  CHECK(stub.requests().size() == 2 * 2 * 3 * 2 + 3 * 2);
  stub.stop();
}
