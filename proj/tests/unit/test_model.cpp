#include <algorithm>

#include "builders.hpp"
#include "doctest.h"
#include "seqlabel/model.hpp"
#include "seqlabel/synth.hpp"

using namespace seqlabel;

namespace {

std::vector<int> partner_sources(const std::vector<Partner>& ps) {
  std::vector<int> out;
  for (const auto& p : ps) out.push_back(p.source);
  return out;
}

}  // namespace

TEST_CASE("model construction errors") {
  CHECK_THROWS_AS(ModelSpec(TaskLayout(2), {{0, {0}, ""}}, {}, Prior::uniform(3)), InvalidSpec);
  CHECK_THROWS_AS(ModelSpec(TaskLayout(2), {{0, {}, ""}}, {}, Prior::uniform(2)), StructuralError);
  CHECK_THROWS_AS(ModelSpec(TaskLayout(2), {{0, {1, 1}, ""}}, {}, Prior::uniform(2)), StructuralError);
  CHECK_THROWS_AS(ModelSpec(TaskLayout(2), {{0, {0}, ""}, {0, {1}, ""}}, {{0, 2}}, Prior::uniform(2)), StructuralError);
}

TEST_CASE("units and slots") {
  const auto inst = chain_instance();
  const auto& model = inst.model;
  CHECK(model.units().size() == 12 + 9 + 3);
  CHECK(model.slots().size() == 5);  // frame, window x3 offsets, scene
  std::vector<std::string> groups;
  for (const auto& s : model.slots()) groups.push_back(s.tie_group);
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  CHECK(groups.size() == 3);
  ModelOptions tied;
  tied.tie_positions = true;
  const ModelSpec positions(model.layout(), model.sources(), model.edges(), model.prior(), tied);
  CHECK(positions.slots().size() == 3);
  const auto untied = model.untied();
  CHECK(untied.slots().size() == model.units().size());
}

TEST_CASE("find_independent_partners examples") {
  SUBCASE("three unconnected sources on one task") {
    const auto model = build::single_task(3);
    const int V[] = {0};
    const auto ps = find_independent_partners(model, 0, V, V);
    CHECK(partner_sources(ps) == std::vector<int>{1, 2});
  }
  SUBCASE("correlated pair among three sources") {
    const auto model = build::single_task(3, {{0, 1}});
    const int V[] = {0};
    CHECK_THROWS_AS(find_independent_partners(model, 0, V, V), AssumptionViolation);
    try {
      find_independent_partners(model, 0, V, V);
    } catch (const AssumptionViolation& e) {
      CHECK(std::string(e.what()).find("at least two other independent accuracies") != std::string::npos);
    }
  }
  SUBCASE("frame source of the chain") {
    const auto inst = chain_instance();
    const int V[] = {0};
    const auto ps = partner_sources(find_independent_partners(inst.model, 2, V, V));
    CHECK(std::any_of(ps.begin(), ps.end(), [](int k) { return k >= 12 && k < 15; }));  // a window source
    CHECK(std::any_of(ps.begin(), ps.end(), [](int k) { return k >= 15; }));           // a scene source
  }
}

TEST_CASE("edge endpoints are never each other's partners") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto inst = random_instance(seed);
    const auto& model = inst.model;
    for (auto [j, k] : model.edges())
      for (int t : model.sources()[j].coverage) {
        const int V[] = {t};
        auto partners = [&](int source) {
          try {
            return partner_sources(find_independent_partners(model, source, V, V));
          } catch (const AssumptionViolation&) {
            return std::vector<int>{};
          }
        };
        for (int p : partners(j)) CHECK(p != k);
        for (int p : partners(k)) CHECK(p != j);
      }
  }
}

TEST_CASE("validate_model examples") {
  CHECK(validate_model(chain_instance().model).ok);

  SUBCASE("zero prior entry with smoothing disabled") {
    ModelOptions o;
    o.smooth_prior = false;
    std::vector<SourceSpec> s(3, SourceSpec{0, {0}, ""});
    const ModelSpec model(TaskLayout(1), s, {}, Prior::user({1.0, 0.0}, false), o);
    const auto r = validate_model(model);
    CHECK_FALSE(r.ok);
    CHECK(r.flags("p_min > 0"));
  }
  SUBCASE("tie group mixing widths") {
    const TaskLayout layout(2);
    std::vector<SourceSpec> s{{0, {0}, "g"}, {0, {0, 1}, "g"}, {0, {0}, ""}, {0, {1}, ""}, {0, {1}, ""}};
    const auto r = validate_model(ModelSpec(layout, s, {}, Prior::uniform(2)));
    CHECK_FALSE(r.ok);
    CHECK(r.flags("tie-group consistency"));
  }
  SUBCASE("edges must form a matching") {
    const auto model = build::single_task(5, {{0, 1}, {1, 2}});
    CHECK(validate_model(model).flags("matching"));
  }
  SUBCASE("edge between sources with different coverage") {
    const TaskLayout layout(2);
    std::vector<SourceSpec> s{{0, {0}, ""}, {0, {1}, ""}, {0, {0}, ""}, {0, {0}, ""}, {0, {1}, ""}, {0, {1}, ""}};
    CHECK(validate_model(ModelSpec(layout, s, {{0, 1}}, Prior::uniform(2))).flags("edge coverage"));
  }
  SUBCASE("mixed-resolution coverage") {
    const TaskLayout layout(2, {{1, {0, 1}}});
    std::vector<SourceSpec> s{{0, {0, 2}, ""}, {0, {0}, ""}, {0, {0}, ""}};
    CHECK(validate_model(ModelSpec(layout, s, {}, Prior::uniform(2))).flags("single-resolution coverage"));
  }
  SUBCASE("insufficient triplets") {
    const auto r = validate_model(build::single_task(2));
    CHECK(r.flags("triplet availability"));
    CHECK_FALSE(r.summary().empty());
  }
}

TEST_CASE("agreement rank follows odd cycles") {
  TripletGroup path{{0, 1, 2}, {{0, 1}, {1, 2}}};
  CHECK_FALSE(full_column_rank(path));
  TripletGroup triangle{{0, 1, 2}, {{0, 1}, {0, 2}, {1, 2}}};
  CHECK(full_column_rank(triangle));
  TripletGroup square{{0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}};
  CHECK_FALSE(full_column_rank(square));
  TripletGroup loop{{0, 1}, {{0, 0}, {0, 1}}};
  CHECK(full_column_rank(loop));
}

TEST_CASE("label moments from the prior") {
  const auto inst = chain_instance();
  const auto& model = inst.model;
  const auto& layout = model.layout();
  for (int a = 0; a < layout.task_count(); ++a)
    for (int b = 0; b < layout.task_count(); ++b) {
      double corr = 0.0;
      for (Config y = 0; y < layout.config_count(); ++y)
        corr += model.prior()(y) * (layout.positive(a, y) ? 1 : -1) * (layout.positive(b, y) ? 1 : -1);
      CHECK(std::abs(model.label_correlation(a, b) - corr) <= 1e-12);
      const auto j = model.label_joint(a, b);
      CHECK(std::abs(j[0] + j[1] + j[2] + j[3] - 1.0) <= 1e-12);
    }
}
