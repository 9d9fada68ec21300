#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "seqlabel/estimator.hpp"
#include "seqlabel/io.hpp"

using namespace seqlabel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("seqlabel_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

void check_same_model(const ModelSpec& a, const ModelSpec& b) {
  CHECK(a.layout() == b.layout());
  CHECK(a.sources() == b.sources());
  CHECK(a.edges() == b.edges());
  CHECK(a.prior().table() == b.prior().table());
  CHECK(a.options().tie_positions == b.options().tie_positions);
  CHECK(a.options().full_joint == b.options().full_joint);
}

const char* kSmallModel = R"({
  "layout": {"T": 2, "tasks": {"1": [1, 2], "2": [3]}, "children": {"3": [1, 2]}},
  "sources": [
    {"id": 1, "resolution": 1, "coverage": [1]},
    {"id": 2, "resolution": 1, "coverage": [2]},
    {"id": 3, "resolution": 2, "coverage": [3]}
  ],
  "prior": {"kind": "uniform"}
})";

}  // namespace

TEST_CASE("model round trip with truth") {
  TempDir dir;
  std::vector<Instance> cases{chain_instance(), duplication_instance()};
  RandomOptions joint;
  joint.joint = true;
  cases.push_back(random_instance(4, joint));
  for (const auto& inst : cases) {
    const auto doc = model_to_json(inst.model, &inst.truth);
    spit(dir / "model.json", doc.dump(2));
    const auto loaded = load_model(dir / "model.json");
    check_same_model(inst.model, loaded.model);
    REQUIRE(loaded.truth.has_value());
    const auto a = truth_params(inst.model, inst.truth);
    const auto b = truth_params(loaded.model, *loaded.truth);
    // joint-form units carry the marginals of their joint table
    CHECK(mu_error_max(inst.model, a, b) <= 1e-15);
    CHECK(a.phi == b.phi);
    CHECK(a.joint == b.joint);
    CHECK(model_to_json(loaded.model, &*loaded.truth) == doc);
  }
}

TEST_CASE("small model parses") {
  const auto m = parse_model(nlohmann::json::parse(kSmallModel)).model;
  CHECK(m.layout().sequence_length() == 2);
  CHECK(m.layout().tasks_at(1) == std::vector<int>{2});
  CHECK(m.sources()[2].coverage == std::vector<int>{2});
  CHECK(m.prior().kind() == PriorKind::Uniform);
}

TEST_CASE("model parse errors") {
  auto bad = [](auto edit) {
    auto doc = nlohmann::json::parse(kSmallModel);
    edit(doc);
    return doc;
  };
  using J = nlohmann::json;
  CHECK_THROWS_AS(parse_model(J::array()), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d.erase("sources"); })), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d["sources"][1]["id"] = 7; })), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d["prior"]["kind"] = "magic"; })), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d["layout"]["aggregation_rule"] = "SOME"; })), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d["edges"] = J::array({J::array({1})}); })), ParseError);
  CHECK_THROWS_AS(parse_model(bad([](J& d) { d["edges"] = J::array({J::array({1, 9})}); })), StructuralError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ParseError);

  TempDir dir;
  spit(dir / "broken.json", "{\"layout\": ");
  CHECK_THROWS_AS(load_model(dir / "broken.json"), ParseError);
}

TEST_CASE("empirical prior from development labels") {
  TempDir dir;
  spit(dir / "dev.csv", "seq_id,task_index,p_positive\n1,1,1\n1,2,0\n2,1,1\n2,2,0\n");
  auto doc = nlohmann::json::parse(kSmallModel);
  doc["prior"] = {{"kind", "empirical"}, {"dev_path", "dev.csv"}};
  spit(dir / "model.json", doc.dump());
  const auto loaded = load_model(dir / "model.json");
  CHECK(loaded.model.prior().kind() == PriorKind::Empirical);
  CHECK(loaded.model.prior()(1) > 0.99);  // y_1 = +1, y_2 = -1
}

TEST_CASE("votes round trip") {
  TempDir dir;
  const auto inst = chain_instance();
  auto data = generate({&inst.model, &inst.truth, 300, 5});
  // the final sequence abstains everywhere and must survive the round trip
  VoteTensor votes(301, data.votes.widths());
  for (std::int64_t i = 0; i < 300; ++i)
    for (int j = 0; j < votes.sources(); ++j)
      for (int o = 0; o < votes.width(j); ++o) votes.set(i, j, o, data.votes.vote(i, j, o));
  write_votes(dir / "votes.csv", inst.model, votes);
  const auto back = read_votes(dir / "votes.csv", inst.model);
  CHECK(back == votes);
  CHECK(slurp(dir / "votes.csv").rfind("seq_id,source_id,task_index,vote\n", 0) == 0);

  auto expect_parse_error = [&](const std::string& text) {
    spit(dir / "bad.csv", text);
    CHECK_THROWS_AS(read_votes(dir / "bad.csv", inst.model), ParseError);
  };
  expect_parse_error("seq,source,task,vote\n");
  expect_parse_error("seq_id,source_id,task_index,vote\n1,1,1,2\n");
  expect_parse_error("seq_id,source_id,task_index,vote\n1,99,1,1\n");
  expect_parse_error("seq_id,source_id,task_index,vote\n1,1,2,1\n");
  expect_parse_error("seq_id,source_id,task_index,vote\n0,1,1,1\n");
  expect_parse_error("seq_id,source_id,task_index,vote\n1,1,x,1\n");
}

TEST_CASE("labels round trip") {
  TempDir dir;
  LabelTable t{{0, 1, 2}, 2, {0.1, 1.0 / 3.0, 0.0, 1.0, 0.25, 5e-300}};
  write_labels(dir / "labels.csv", t);
  const auto back = read_labels(dir / "labels.csv");
  CHECK(back.tasks == t.tasks);
  CHECK(back.sequences == 2);
  CHECK(back.p == t.p);

  spit(dir / "partial.csv", "seq_id,task_index,p_positive\n1,1,0.5\n1,2,0.5\n2,1,0.5\n");
  CHECK_THROWS_AS(read_labels(dir / "partial.csv"), ParseError);
  spit(dir / "range.csv", "seq_id,task_index,p_positive\n1,1,1.5\n");
  CHECK_THROWS_AS(read_labels(dir / "range.csv"), ParseError);
}

TEST_CASE("params round trip is bit exact") {
  TempDir dir;
  const auto inst = chain_instance();
  const auto data = generate({&inst.model, &inst.truth, 5000, 6});
  const auto fit = fit_closed_form(inst.model, data.votes);
  save_params(dir / "params.json", inst.model, fit);
  const auto back = load_params(dir / "params.json", inst.model);
  CHECK(back.mu == fit.mu);
  CHECK(back.phi == fit.phi);
  CHECK(back.joint == fit.joint);
  CHECK(params_to_json(inst.model, back) == params_to_json(inst.model, fit));

  auto doc = params_to_json(inst.model, fit);
  doc["mu"].erase(0);
  CHECK_THROWS_AS(params_from_json(inst.model, doc), ParseError);
  doc = params_to_json(inst.model, fit);
  doc["mu"][0]["vote"][0] = 5.0;
  CHECK_THROWS(params_from_json(inst.model, doc));
  CHECK_THROWS_AS(load_params(dir / "missing.json", inst.model), ParseError);
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("metrics json uses nulls") {
  Metrics m;
  m.recall = 0.0;
  m.n_eval = 10;
  m.threshold = 1.1;
  const auto j = metrics_to_json(m);
  CHECK(j.at("precision").is_null());
  CHECK(j.at("f1").is_null());
  CHECK(j.at("recall") == 0.0);
  CHECK(j.at("n_eval") == 10);
  CHECK(j.at("threshold") == 1.1);
}

TEST_CASE("experiment csv headers") {
  TempDir dir;
  write_scaling_csv(dir / "s.csv", {{1000, 1, true, 0.5}, {1000, 1, false, 0.6}});
  CHECK(slurp(dir / "s.csv") == "n,seed,tying,error\n1000,1,tied,0.5\n1000,1,untied,0.59999999999999998\n");
  write_benefit_csv(dir / "b.csv", {{2, 0.9, 0.8, 0.7}});
  CHECK(slurp(dir / "b.csv").rfind("seed,method,f1\n2,modeled,0.9", 0) == 0);
  write_loss_curve(dir / "l.csv", {0.25, 0.125});
  CHECK(slurp(dir / "l.csv") == "epoch,loss\n1,0.25\n2,0.125\n");
}
