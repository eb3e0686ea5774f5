#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <map>
#include <set>

#include "modl/dataset.hpp"
#include "modl/feature.hpp"
#include "modl/synth.hpp"
#include "support/files.hpp"

using namespace modl;
using testing_support::TempDir;

namespace {

const Schema& accidents() {
  static const Schema s = parse_schema(synth::accidents_schema_json());
  return s;
}

double num(const Cell& c) {
  auto d = std::get_if<double>(&c);
  return d ? *d : std::numeric_limits<double>::quiet_NaN();
}

// Three accidents written by hand:
//   A1: V1 users {1960, 1990}, V2 users {1933, 2001}; place present
//   A2: V1 users {1980, 2000}; no place
//   A3: no vehicles; place present
struct HandFixture {
  TempDir dir;
  Dataset ds;
  HandFixture() {
    std::map<std::string, std::string> files{
        {"Accidents", dir.write("a.csv",
                                "AccidentId,Gravity,Light,Weather,Department,Hour\n"
                                "A1,Lethal,Day,Rain,D1,8\nA2,NonLethal,Night,Clear,D2,23\nA3,NonLethal,Day,Fog,D1,\n")},
        {"Vehicles", dir.write("v.csv",
                               "AccidentId,VehicleId,Category,EngineSize\n"
                               "A1,V1,Car,1.6\nA1,V2,Moto,0.5\nA2,V1,Car,\n")},
        {"Vehicles/Users", dir.write("u.csv",
                                     "AccidentId,VehicleId,Sex,BirthYear\n"
                                     "A1,V1,M,1960\nA1,V1,F,1990\nA1,V2,M,1933\nA1,V2,F,2001\n"
                                     "A2,V1,F,1980\nA2,V1,M,2000\n")},
        {"Places", dir.write("p.csv", "AccidentId,Road,Speed\nA1,Urban,50\nA3,Rural,90\n")}};
    ds = load_dataset(std::make_shared<const Schema>(accidents()), files, "Gravity");
  }
};

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t e = i;
      while (e < idx.size() && v[idx[e]] == v[idx[i]]) ++e;
      for (std::size_t k = i; k < e; ++k) r[idx[k]] = (static_cast<double>(i + e) - 1) / 2;
      i = e;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(FeaturePrior, CountVehicles) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  const auto e = parse_feature("Count(Vehicles)", space);
  EXPECT_NEAR(e.prior.nats, std::log(2.0) + std::log(9.0) + std::log(2.0), 1e-12);
}

TEST(FeaturePrior, NativeColumn) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  // natives: Light, Weather, Department, Hour
  EXPECT_NEAR(parse_feature("Light", space).prior.nats, std::log(2.0) + std::log(4.0), 1e-12);
}

TEST(FeaturePrior, NestedAggregateRecount) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  // level 1: 9 ops, Max over {Vehicles, Places}, operand {EngineSize, nest}
  // level 2: 8 ops (no Mode), Min over {Users}, operand {BirthYear}
  const double expected = std::log(2.0) + std::log(9.0) + std::log(2.0) + std::log(2.0) + std::log(8.0);
  EXPECT_NEAR(parse_feature("Max(Vehicles, Min(Vehicles/Users, BirthYear))", space).prior.nats, expected, 1e-12);
  EXPECT_NEAR(feature_prior_nats(parse_feature("Max(Vehicles,Min(Users,BirthYear))", space), accidents(), "Gravity")
                  .nats,
              expected, 1e-12);
}

TEST(FeaturePrior, DeeperIsLonger) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  for (const auto& e : enumerate_features(space)) {
    if (!e.nested) continue;
    const auto& inner = *e.nested;
    const auto parent = *accidents().parent(accidents().require(inner.table));
    EXPECT_GT(e.prior.nats, detail::aggregate_prior(inner, space, parent, 2)) << e.name;
  }
}

TEST(FeaturePrior, InvalidExpressions) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  EXPECT_THROW(parse_feature("Mean(Vehicles, Category)", space), DataError);
  EXPECT_THROW(parse_feature("Mode(Vehicles, EngineSize)", space), DataError);
  EXPECT_THROW(parse_feature("Count(Vehicles, EngineSize)", space), DataError);
  EXPECT_THROW(parse_feature("Min(Users, BirthYear)", space), DataError);
  EXPECT_THROW(parse_feature("Max(Vehicles, Mode(Vehicles/Users, Sex))", space), DataError);
  EXPECT_THROW(parse_feature("Gravity", space), DataError);
  EXPECT_THROW(parse_feature("Foo(Vehicles)", space), DataError);
  EXPECT_THROW(parse_feature("Max(Vehicles, Min(Vehicles/Users, BirthYear)", space), DataError);
  const FeatureSpace shallow(accidents(), "Gravity", 1);
  EXPECT_THROW(parse_feature("Max(Vehicles, Min(Vehicles/Users, BirthYear))", shallow), DataError);
}

TEST(Sampling, ZeroFeatures) {
  EXPECT_TRUE(sample_features(accidents(), "Gravity", 0, 1).features.empty());
}

TEST(Sampling, ExhaustsDepthOneSpace) {
  const auto s = parse_schema(std::string_view(R"({"root": "R", "tables": [
      {"name": "R", "key": ["Id"], "columns": [{"name": "Y"}]},
      {"name": "C", "parent": "R", "key": ["Id"], "columns": [{"name": "X", "type": "Numerical"}]}]})"));
  const auto set = sample_features(s, "Y", 100, 3, 1);
  std::set<std::string> names;
  for (const auto& f : set.features) names.insert(f.name);
  const std::set<std::string> expected{"Count(C)",  "Mean(C, X)", "Median(C, X)", "Min(C, X)",
                                       "Max(C, X)", "Sum(C, X)",  "StdDev(C, X)"};
  EXPECT_EQ(names, expected);
  EXPECT_EQ(enumerate_features(FeatureSpace(s, "Y", 1)).size(), 7u);
}

TEST(Sampling, NestedFeaturePresentAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto set = sample_features(accidents(), "Gravity", 100, seed, 2);
    bool nested = false;
    for (const auto& f : set.features) {
      nested |= f.table == "Vehicles" && f.nested && f.nested->table == "Vehicles/Users";
    }
    EXPECT_TRUE(nested) << "seed " << seed;
  }
}

TEST(Sampling, DistinctDeterministicBounded) {
  const auto a = sample_features(accidents(), "Gravity", 40, 11);
  const auto b = sample_features(accidents(), "Gravity", 40, 11);
  const auto c = sample_features(accidents(), "Gravity", 40, 12);
  ASSERT_EQ(a.features.size(), b.features.size());
  EXPECT_LE(a.features.size(), 40u);
  std::set<std::string> names;
  bool differs = false;
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    EXPECT_EQ(a.features[i].name, b.features[i].name);
    EXPECT_TRUE(names.insert(a.features[i].name).second);
    differs |= i < c.features.size() && a.features[i].name != c.features[i].name;
  }
  EXPECT_TRUE(differs);
}

TEST(Sampling, CanonicalNameRoundTrip) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& f : sample_features(space, 60, seed).features) {
      const auto back = parse_feature(f.name, space);
      EXPECT_EQ(back.name, f.name);
      EXPECT_NEAR(back.prior.nats, f.prior.nats, 1e-12);
      EXPECT_EQ(back.depth(), f.depth());
    }
  }
}

TEST(Sampling, FrequencyFollowsPrior) {
  // unequal choice sets: A has two numerical and one categorical column, B one numerical
  const auto s = parse_schema(std::string_view(R"({"root": "R", "tables": [
      {"name": "R", "key": ["Id"], "columns": [{"name": "Y"}, {"name": "Z"}]},
      {"name": "A", "parent": "R", "key": ["Id"], "columns": [{"name": "X1", "type": "Numerical"},
          {"name": "X2", "type": "Numerical"}, {"name": "C"}]},
      {"name": "B", "parent": "R", "key": ["Id"], "columns": [{"name": "W", "type": "Numerical"}]}]})"));
  const FeatureSpace space(s, "Y", 1);
  std::map<std::string, double> freq;
  auto rng = Rng::substream(5, "test");
  for (int i = 0; i < 10000; ++i) {
    auto e = detail::draw_aggregate(space, s.root(), 1, rng);
    freq[detail::display(e)] += 1;
  }
  std::vector<double> f, p;
  for (const auto& e : enumerate_features(space)) {
    f.push_back(freq[e.name]);
    p.push_back(e.prior.nats);
  }
  EXPECT_GT(*std::max_element(p.begin(), p.end()), *std::min_element(p.begin(), p.end()));
  EXPECT_LT(spearman(f, p), 0.0);
  // draws match exp(-prior) up to the constant native/construct choice
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i] / 10000, 2 * std::exp(-p[i]), 0.02);
}

TEST(Sampling, NoTargetLeakage) {
  const FeatureSpace space(accidents(), "Gravity", 2);
  std::function<void(const FeatureExpr&)> check = [&](const FeatureExpr& e) {
    EXPECT_NE(e.column, "Gravity");
    if (e.nested) check(*e.nested);
  };
  for (const auto& e : enumerate_features(space)) check(e);
  for (const auto& n : space.natives()) EXPECT_NE(n, "Gravity");
  EXPECT_THROW(parse_feature("Gravity", space), DataError);
}

TEST(Evaluate, HandComputedValues) {
  HandFixture fx;
  const FeatureSpace space(accidents(), "Gravity", 2);
  auto eval = [&](const std::string& f, const std::string& key) {
    return evaluate_feature(parse_feature(f, space), fx.ds, key);
  };
  EXPECT_EQ(num(eval("Max(Vehicles, Min(Users, BirthYear))", "A1")), 1960.0);
  EXPECT_EQ(num(eval("Mean(Vehicles, Min(Users, BirthYear))", "A1")), 1946.5);
  EXPECT_EQ(num(eval("Mean(Vehicles, Mean(Users, BirthYear))", "A2")), 1990.0);
  EXPECT_EQ(num(eval("Median(Vehicles, Count(Users))", "A1")), 2.0);
  EXPECT_EQ(num(eval("Count(Vehicles)", "A3")), 0.0);
  EXPECT_TRUE(is_missing(eval("Mean(Vehicles, EngineSize)", "A3")));
  EXPECT_TRUE(is_missing(eval("Min(Vehicles, EngineSize)", "A2")));  // all operands missing
  EXPECT_TRUE(is_missing(eval("Mode(Vehicles, Category)", "A3")));
  EXPECT_EQ(cell_text(eval("Mode(Vehicles, Category)", "A1")), "Car");  // tie Car/Moto
  EXPECT_EQ(num(eval("CountDistinct(Vehicles, Category)", "A1")), 2.0);
  EXPECT_NEAR(num(eval("StdDev(Vehicles, EngineSize)", "A1")), 0.55, 1e-12);
  EXPECT_TRUE(is_missing(eval("StdDev(Vehicles, EngineSize)", "A2")));
}

TEST(Evaluate, EmptySetAndOneToOneAbsence) {
  HandFixture fx;
  const FeatureSpace space(accidents(), "Gravity", 2);
  auto eval = [&](const std::string& f, const std::string& key) {
    return evaluate_feature(parse_feature(f, space), fx.ds, key);
  };
  EXPECT_EQ(num(eval("Count(Places)", "A2")), 0.0);
  EXPECT_TRUE(is_missing(eval("Max(Places, Speed)", "A2")));
  EXPECT_EQ(num(eval("Max(Places, Speed)", "A3")), 90.0);
  EXPECT_TRUE(is_missing(eval("Max(Vehicles, Min(Users, BirthYear))", "A3")));
  EXPECT_THROW(eval("Count(Vehicles)", "A9"), DataError);
}

TEST(Evaluate, AggregateRules) {
  using detail::aggregate_numbers;
  std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(aggregate_numbers(AggregateOp::Median, v), 2.5);
  v = {5};
  EXPECT_EQ(aggregate_numbers(AggregateOp::StdDev, v), 0.0);
  v = {1, 3};
  EXPECT_EQ(aggregate_numbers(AggregateOp::StdDev, v), 1.0);  // population
  v = {};
  EXPECT_TRUE(std::isnan(aggregate_numbers(AggregateOp::Sum, v)));
  std::vector<std::string> dict{"b", "a", "c"};
  std::vector<std::int32_t> codes{0, 1, 2, 0, 1};
  EXPECT_EQ(dict[detail::mode_code(codes, dict)], "a");
}

TEST(Flatten, NativesOnlyWhenNoFeatures) {
  HandFixture fx;
  const auto flat = flatten(fx.ds, std::vector<FeatureExpr>{});
  ASSERT_EQ(flat.columns.size(), 4u);
  EXPECT_EQ(flat.columns[0].name, "Light");
  EXPECT_EQ(flat.columns[3].name, "Hour");
  EXPECT_EQ(flat.rows, 3u);
  ASSERT_TRUE(flat.target);
  EXPECT_EQ(flat.target->category(0), "Lethal");
  EXPECT_EQ(flat.key_text(1), "A2");
}

TEST(Flatten, MatchesPerCellEvaluation) {
  TempDir dir;
  const auto fx = synth::write_accidents(dir.path(), {.accidents = 1000, .flip = 0.1, .seed = 21});
  const auto ds = load_dataset(std::make_shared<const Schema>(accidents()), fx.files, "Gravity");
  const auto set = sample_features(accidents(), "Gravity", 100, 42);
  const auto flat = flatten(ds, set, 2);
  ASSERT_EQ(flat.rows, 1000u);
  ASSERT_EQ(flat.columns.size(), 4 + set.features.size());
  auto rng = Rng::substream(1, "cells");
  for (int i = 0; i < 100; ++i) {
    const auto r = rng.uniform_index(flat.rows);
    const auto j = rng.uniform_index(set.features.size());
    const auto expected = evaluate_feature(set.features[j], ds, r);
    EXPECT_EQ(cell_text(flat.columns[4 + j].cell(r)), cell_text(expected)) << set.features[j].name << " row " << r;
  }
  const auto again = flatten(ds, set, 1);
  for (std::size_t j = 0; j < flat.columns.size(); ++j) {
    for (std::size_t r = 0; r < flat.rows; ++r) {
      ASSERT_EQ(cell_text(flat.columns[j].cell(r)), cell_text(again.columns[j].cell(r)));
    }
  }
}

TEST(Flatten, ConstructionNatsCarried) {
  HandFixture fx;
  const FeatureSpace space(accidents(), "Gravity", 2);
  const auto f = parse_feature("Count(Vehicles)", space);
  const auto flat = flatten(fx.ds, std::vector<FeatureExpr>{f});
  EXPECT_EQ(flat.construction_nats[0], 0.0);
  EXPECT_EQ(flat.construction_nats[4], f.prior.nats);
}

TEST(FlatStore, SpilledEqualsInMemory) {
  TempDir dir;
  const auto fx = synth::write_accidents(dir.path() / "data", {.accidents = 600, .flip = 0.1, .seed = 8});
  auto schema = std::make_shared<const Schema>(accidents());
  const auto set = sample_features(accidents(), "Gravity", 30, 3);
  LoadOptions o;
  o.chunk_rows = 128;
  FlatStore mem(std::nullopt), disk(dir.path() / "spill");
  RootStream stream(load_secondaries(schema, fx.files, "Gravity", o), fx.files, o);
  FeatureEvaluator ev;
  while (auto chunk = stream.next()) {
    auto flat = flatten(*chunk, set.features, 1, &ev);
    mem.append(flat);
    disk.append(flat);
  }
  stream.finish();
  const auto whole = flatten(load_dataset(schema, fx.files, "Gravity"), set);
  ASSERT_TRUE(disk.spilled());
  ASSERT_EQ(mem.rows(), 600u);
  ASSERT_EQ(mem.size(), whole.columns.size());
  for (std::size_t j = 0; j < mem.size(); ++j) {
    const auto a = mem.load(j), b = disk.load(j);
    for (std::size_t r = 0; r < mem.rows(); ++r) {
      ASSERT_EQ(cell_text(a.cell(r)), cell_text(whole.columns[j].cell(r))) << a.name;
      ASSERT_EQ(cell_text(b.cell(r)), cell_text(whole.columns[j].cell(r))) << a.name;
    }
  }
}
