#pragma once

// Generated fixtures: an Accidents-like snowflake with a planted signal, a
// flat wide table and a width-padded root table sized in bytes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "modl/csv.hpp"
#include "modl/error.hpp"
#include "modl/report.hpp"
#include "modl/rng.hpp"

namespace modl::synth {

struct Fixture {
  std::string schema_path;
  std::map<std::string, std::string> files;
  std::string target;
  std::size_t rows = 0;
};

namespace detail {

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  return out;
}

inline std::string id(const char* prefix, std::size_t i) {
  std::string s = std::to_string(i);
  return prefix + std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&values)[N]) {
  return values[rng.uniform_index(N)];
}

inline std::size_t binomial(Rng& rng, std::size_t trials, double p) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < trials; ++i) k += rng.bernoulli(p);
  return k;
}

}  // namespace detail

struct AccidentsOptions {
  std::size_t accidents = 5000;
  double flip = 0.10;  // label noise
  std::uint64_t seed = 1;
};

struct AccidentsFixture : Fixture {
  int threshold = 0;                 // Lethal iff min user birth year < threshold (before noise)
  std::map<std::string, double> bayes_score;  // accident key -> P(Lethal | min birth year)
  double bayes_auc = 0.0;            // empirical AUC of bayes_score over all accidents
  std::string positive = "Lethal";
};

inline nlohmann::ordered_json accidents_schema_json() {
  return nlohmann::ordered_json::parse(R"({
  "root": "Accidents",
  "tables": [
    {"name": "Accidents", "key": ["AccidentId"],
     "columns": [{"name": "Gravity", "type": "Categorical"},
                 {"name": "Light", "type": "Categorical"},
                 {"name": "Weather", "type": "Categorical"},
                 {"name": "Department", "type": "Categorical"},
                 {"name": "Hour", "type": "Numerical"}]},
    {"name": "Vehicles", "parent": "Accidents", "relation": "0n", "key": ["AccidentId", "VehicleId"],
     "columns": [{"name": "Category", "type": "Categorical"},
                 {"name": "EngineSize", "type": "Numerical"}]},
    {"name": "Users", "parent": "Vehicles", "relation": "0n", "key": ["AccidentId", "VehicleId"],
     "columns": [{"name": "Sex", "type": "Categorical"},
                 {"name": "BirthYear", "type": "Numerical"}]},
    {"name": "Places", "parent": "Accidents", "relation": "01", "key": ["AccidentId"],
     "columns": [{"name": "Road", "type": "Categorical"},
                 {"name": "Speed", "type": "Numerical"}]}
  ]
})");
}

/// Writes Accidents.csv, Vehicles.csv, Users.csv, Places.csv and schema.json.
/// Every accident has 1-4 vehicles (mean 1.8) and every vehicle 1-3 users
/// (mean 1.39). Gravity is Lethal iff the minimum BirthYear over all users
/// of the accident is below the median threshold, flipped with probability
/// `flip`. Other columns are noise.
inline AccidentsFixture write_accidents(const std::filesystem::path& dir, const AccidentsOptions& o = {}) {
  static const char* const kLight[] = {"Day", "Night", "Dusk"};
  static const char* const kWeather[] = {"Clear", "Rain", "Fog", "Snow"};
  static const char* const kCategory[] = {"Car", "Moto", "Truck", "Bike", "Bus"};
  static const char* const kSex[] = {"F", "M"};
  static const char* const kRoad[] = {"Urban", "Highway", "Rural"};
  std::filesystem::create_directories(dir);
  auto rng = Rng::substream(o.seed, "accidents");

  struct User {
    const char* sex;
    int birth;
  };
  struct Vehicle {
    const char* category;
    double engine;
    std::vector<User> users;
  };
  struct Accident {
    const char* light;
    const char* weather;
    int department;
    int hour;
    std::vector<Vehicle> vehicles;
    bool place;
    const char* road;
    int speed;
    int min_birth;
  };
  std::vector<Accident> acc(o.accidents);
  for (auto& a : acc) {
    a.light = detail::pick(rng, kLight);
    a.weather = detail::pick(rng, kWeather);
    a.department = static_cast<int>(rng.uniform_index(20));
    a.hour = static_cast<int>(rng.uniform_index(24));
    a.vehicles.resize(1 + detail::binomial(rng, 3, 0.8 / 3));
    a.min_birth = 1 << 30;
    for (auto& v : a.vehicles) {
      v.category = detail::pick(rng, kCategory);
      v.engine = 0.5 + static_cast<double>(rng.uniform_index(36)) / 10.0;
      v.users.resize(1 + detail::binomial(rng, 2, 0.195));
      for (auto& u : v.users) {
        u.sex = detail::pick(rng, kSex);
        u.birth = 1930 + static_cast<int>(rng.uniform_index(76));
        a.min_birth = std::min(a.min_birth, u.birth);
      }
    }
    a.place = rng.bernoulli(0.9);
    a.road = detail::pick(rng, kRoad);
    a.speed = 30 + 20 * static_cast<int>(rng.uniform_index(6));
  }
  std::vector<int> mins;
  for (const auto& a : acc) mins.push_back(a.min_birth);
  std::nth_element(mins.begin(), mins.begin() + static_cast<std::ptrdiff_t>(mins.size() / 2), mins.end());

  AccidentsFixture fx;
  fx.threshold = mins.empty() ? 0 : mins[mins.size() / 2];
  fx.target = "Gravity";
  fx.rows = acc.size();
  fx.schema_path = (dir / "schema.json").string();
  fx.files = {{"Accidents", (dir / "Accidents.csv").string()},
              {"Vehicles", (dir / "Vehicles.csv").string()},
              {"Vehicles/Users", (dir / "Users.csv").string()},
              {"Places", (dir / "Places.csv").string()}};
  {
    auto out = detail::open(fx.schema_path);
    out << accidents_schema_json().dump(2) << '\n';
  }
  auto fa = detail::open(fx.files["Accidents"]);
  auto fv = detail::open(fx.files["Vehicles"]);
  auto fu = detail::open(fx.files["Vehicles/Users"]);
  auto fp = detail::open(fx.files["Places"]);
  fa << "AccidentId,Gravity,Light,Weather,Department,Hour\n";
  fv << "AccidentId,VehicleId,Category,EngineSize\n";
  fu << "AccidentId,VehicleId,Sex,BirthYear\n";
  fp << "AccidentId,Road,Speed\n";
  std::vector<double> scores;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto& a = acc[i];
    const auto key = detail::id("A", i + 1);
    const bool clean = a.min_birth < fx.threshold;
    const bool lethal = rng.bernoulli(o.flip) ? !clean : clean;
    const double score = clean ? 1.0 - o.flip : o.flip;
    fx.bayes_score[key] = score;
    scores.push_back(score);
    positive.push_back(lethal);
    fa << key << ',' << (lethal ? "Lethal" : "NonLethal") << ',' << a.light << ',' << a.weather << ",D"
       << a.department << ',' << a.hour << '\n';
    for (std::size_t v = 0; v < a.vehicles.size(); ++v) {
      const auto vid = "V" + std::to_string(v + 1);
      fv << key << ',' << vid << ',' << a.vehicles[v].category << ',' << csv::format_number(a.vehicles[v].engine)
         << '\n';
      for (const auto& u : a.vehicles[v].users) fu << key << ',' << vid << ',' << u.sex << ',' << u.birth << '\n';
    }
    if (a.place) fp << key << ',' << a.road << ',' << a.speed << '\n';
  }
  fx.bayes_auc = auc(scores, positive).value_or(0.5);
  for (auto* f : {&fa, &fv, &fu, &fp}) {
    if (!*f) throw DataError("cannot write fixture under '" + dir.string() + "'");
  }
  return fx;
}

/// Empirical AUC of the Bayes-optimal score on the given (key, label) pairs.
inline double bayes_auc(const AccidentsFixture& fx, const std::vector<std::pair<std::string, std::string>>& labelled) {
  std::vector<double> s;
  std::vector<bool> p;
  for (const auto& [key, label] : labelled) {
    s.push_back(fx.bayes_score.at(key));
    p.push_back(label == fx.positive);
  }
  return auc(s, p).value_or(0.5);
}

struct FlatOptions {
  std::size_t rows = 1000;
  std::size_t variables = 200;
  std::uint64_t seed = 1;
};

/// Root-only table: Id key, binary Class, `variables` numerical columns;
/// every tenth column shifts with the class, the others are noise.
inline Fixture write_flat(const std::filesystem::path& dir, const FlatOptions& o = {}) {
  std::filesystem::create_directories(dir);
  Fixture fx;
  fx.target = "Class";
  fx.rows = o.rows;
  fx.schema_path = (dir / "schema.json").string();
  fx.files = {{"Flat", (dir / "Flat.csv").string()}};
  nlohmann::ordered_json schema;
  schema["root"] = "Flat";
  auto cols = nlohmann::ordered_json::array();
  cols.push_back({{"name", "Class"}, {"type", "Categorical"}});
  for (std::size_t j = 0; j < o.variables; ++j) cols.push_back({{"name", "X" + std::to_string(j + 1)}, {"type", "Numerical"}});
  schema["tables"] = nlohmann::ordered_json::array({{{"name", "Flat"}, {"key", {"Id"}}, {"columns", cols}}});
  {
    auto out = detail::open(fx.schema_path);
    out << schema.dump(2) << '\n';
  }
  auto rng = Rng::substream(o.seed, "flat");
  auto out = detail::open(fx.files["Flat"]);
  out << "Id,Class";
  for (std::size_t j = 0; j < o.variables; ++j) out << ",X" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < o.rows; ++i) {
    const bool pos = rng.bernoulli(0.5);
    out << detail::id("R", i + 1) << ',' << (pos ? "B" : "A");
    for (std::size_t j = 0; j < o.variables; ++j) {
      const double shift = (j % 10 == 0 && pos) ? 0.3 : 0.0;
      out << ',' << static_cast<double>(rng.uniform_index(1000)) / 1000.0 + shift;
    }
    out << '\n';
  }
  if (!out) throw DataError("cannot write fixture under '" + dir.string() + "'");
  return fx;
}

struct SizedOptions {
  std::uint64_t bytes = 10u << 20;  // approximate root file size
  std::size_t numeric_columns = 24;
  std::size_t customers_with_orders = 2000;
  std::uint64_t seed = 1;
};

/// Customers root table of about `bytes` bytes (wide numeric rows) plus a
/// small fixed Orders table, so the root dominates the input size.
inline Fixture write_sized(const std::filesystem::path& dir, const SizedOptions& o = {}) {
  static const char* const kRegion[] = {"North", "South", "East", "West"};
  static const char* const kChannel[] = {"Web", "Shop", "Phone"};
  std::filesystem::create_directories(dir);
  Fixture fx;
  fx.target = "Churn";
  fx.schema_path = (dir / "schema.json").string();
  fx.files = {{"Customers", (dir / "Customers.csv").string()}, {"Orders", (dir / "Orders.csv").string()}};
  nlohmann::ordered_json schema;
  schema["root"] = "Customers";
  auto cols = nlohmann::ordered_json::array();
  cols.push_back({{"name", "Churn"}, {"type", "Categorical"}});
  cols.push_back({{"name", "Region"}, {"type", "Categorical"}});
  for (std::size_t j = 0; j < o.numeric_columns; ++j) {
    cols.push_back({{"name", "N" + std::to_string(j + 1)}, {"type", "Numerical"}});
  }
  schema["tables"] = nlohmann::ordered_json::array(
      {{{"name", "Customers"}, {"key", {"CustomerId"}}, {"columns", cols}},
       {{"name", "Orders"},
        {"parent", "Customers"},
        {"relation", "0n"},
        {"key", {"CustomerId"}},
        {"columns", {{{"name", "Channel"}, {"type", "Categorical"}}, {{"name", "Amount"}, {"type", "Numerical"}}}}}});
  {
    auto out = detail::open(fx.schema_path);
    out << schema.dump(2) << '\n';
  }
  auto rng = Rng::substream(o.seed, "sized");
  auto out = detail::open(fx.files["Customers"]);
  out << "CustomerId,Churn,Region";
  for (std::size_t j = 0; j < o.numeric_columns; ++j) out << ",N" << j + 1;
  out << '\n';
  std::uint64_t written = 0;
  std::size_t i = 0;
  std::string line;
  while (written < o.bytes) {
    const bool churn = rng.bernoulli(0.3);
    line = detail::id("C", ++i) + (churn ? ",Yes," : ",No,") + detail::pick(rng, kRegion);
    for (std::size_t j = 0; j < o.numeric_columns; ++j) {
      double x = static_cast<double>(rng.uniform_index(100000)) / 100.0;
      if (j == 0 && churn) x = std::min(999.99, x + 150.0);
      line += ',';
      line += csv::format_number(x);
    }
    line += '\n';
    out << line;
    written += line.size();
  }
  fx.rows = i;
  auto orders = detail::open(fx.files["Orders"]);
  orders << "CustomerId,Channel,Amount\n";
  for (std::size_t c = 1; c <= std::min(o.customers_with_orders, fx.rows); ++c) {
    const auto n = 1 + rng.uniform_index(3);
    for (std::size_t k = 0; k < n; ++k) {
      orders << detail::id("C", c) << ',' << detail::pick(rng, kChannel) << ','
             << csv::format_number(static_cast<double>(rng.uniform_index(50000)) / 100.0) << '\n';
    }
  }
  if (!out || !orders) throw DataError("cannot write fixture under '" + dir.string() + "'");
  return fx;
}

}  // namespace modl::synth
