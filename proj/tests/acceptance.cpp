// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance <name>...  run the named criteria
//   acceptance --list     print the names

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "modl/modl.hpp"
#include "modl/synth.hpp"
#include "support/files.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<std::string> labels_for(std::size_t J) {
  std::vector<std::string> l;
  for (std::size_t j = 0; j < J; ++j) l.push_back(std::string(1, static_cast<char>('a' + j)));
  return l;
}

// Distinct sorted values 0..n-1 with the given classes.
std::vector<oracle::Counts> unit_blocks(const std::vector<std::uint32_t>& cls, std::size_t J) {
  std::vector<oracle::Counts> blocks;
  for (auto c : cls) {
    blocks.emplace_back(J, 0);
    blocks.back()[c] = 1;
  }
  return blocks;
}

Outcome discretization_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t J : {2u, 3u}) {
    for (std::size_t n = 1; n <= 12; ++n) {
      const double all = std::pow(static_cast<double>(J), static_cast<double>(n));
      const bool exhaustive = all <= 500;
      const std::size_t trials = exhaustive ? static_cast<std::size_t>(all) : 500;
      std::vector<double> values(n);
      std::iota(values.begin(), values.end(), 0.0);
      for (std::size_t t = 0; t < trials; ++t) {
        std::vector<std::uint32_t> cls(n);
        std::size_t code = t;
        for (auto& c : cls) {
          if (exhaustive) {
            c = static_cast<std::uint32_t>(code % J);
            code /= J;
          } else {
            c = static_cast<std::uint32_t>(rng() % J);
          }
        }
        const auto m = modl::optimize_discretization(values, cls, labels_for(J));
        worst = std::max(worst, std::abs(m.total().nats - oracle::min_interval_cost(unit_blocks(cls, J))));
        ++cases;
      }
    }
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-9 && s <= 60.0,
          std::to_string(cases) + " datasets, max |delta| " + fmt(worst) + ", " + fmt(s, 3) + " s (limit 60 s)"};
}

Outcome grouping_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240602);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t V = trial < 100 ? 8 : 1 + rng() % 8;
    const std::size_t J = 2 + rng() % 2;
    std::vector<oracle::Counts> table(V, oracle::Counts(J, 0));
    std::vector<std::int32_t> codes;
    std::vector<std::uint32_t> cls;
    std::vector<std::string> dict;
    for (std::size_t x = 0; x < V; ++x) {
      dict.push_back("v" + std::to_string(x));
      table[x][rng() % J] += 1;
      for (std::size_t j = 0; j < J; ++j) table[x][j] += rng() % 9;
      for (std::size_t j = 0; j < J; ++j) {
        for (std::uint64_t q = 0; q < table[x][j]; ++q) {
          codes.push_back(static_cast<std::int32_t>(x));
          cls.push_back(static_cast<std::uint32_t>(j));
        }
      }
    }
    const auto m = modl::optimize_grouping(codes, dict, cls, labels_for(J));
    worst = std::max(worst, std::abs(m.total().nats - oracle::min_group_cost(table)));
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-9 && s <= 60.0, "200 count tables (V <= 8, Bell(8) = " +
                                          std::to_string(oracle::count_set_partitions(8)) + "), max |delta| " +
                                          fmt(worst) + ", " + fmt(s, 3) + " s (limit 60 s)"};
}

Outcome regularization() {
  std::size_t null_models = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto flat = testing_support::planted_flat(1000, 10, 0.8, 10, seed, true);
    std::vector<std::uint32_t> rows(flat.rows);
    std::iota(rows.begin(), rows.end(), 0u);
    const auto labels = modl::class_labels_of(*flat.target, rows);
    const auto cls = modl::class_indices(*flat.target, labels);
    for (const auto& col : flat.columns) {
      const auto prep = modl::prepare_column(col, rows, cls, labels);
      null_models += prep.level.value == 0.0;
      ++total;
    }
  }
  const double share = static_cast<double>(null_models) / static_cast<double>(total);
  return {share >= 0.95, std::to_string(null_models) + "/" + std::to_string(total) +
                             " variables prepared as the null model (" + fmt(100 * share, 4) + "%, need >= 95%)"};
}

modl::PartitionModel counts_model(modl::PartitionKind kind, std::vector<std::vector<std::uint64_t>> counts,
                                  std::uint64_t values = 0) {
  modl::PartitionModel m;
  m.kind = kind;
  m.class_labels = labels_for(counts.front().size());
  m.value_count = values;
  for (auto& c : counts) {
    modl::Part p;
    p.counts = c;
    m.n += p.total();
    m.parts.push_back(p);
  }
  return m;
}

Outcome closed_form() {
  using modl::PartitionKind;
  struct Case {
    const char* label;
    modl::PartitionModel model;
    double expected;
  };
  std::vector<Case> cases{
      {"intervals [2,2]", counts_model(PartitionKind::Intervals, {{2, 2}}), std::log(120.0)},
      {"intervals [2,0][0,2]", counts_model(PartitionKind::Intervals, {{2, 0}, {0, 2}}), std::log(180.0)},
      {"intervals [10,0][0,10]", counts_model(PartitionKind::Intervals, {{10, 0}, {0, 10}}),
       std::log(20.0) + std::log(21.0) + 2 * std::log(11.0)},
      {"groups V=1 [3,3]", counts_model(PartitionKind::Groups, {{3, 3}}, 1), std::log(140.0)},
      {"groups V=3 [3,3]", counts_model(PartitionKind::Groups, {{3, 3}}, 3), std::log(3.0 * 140.0)},
      {"groups V=2 [3,0][0,3]", counts_model(PartitionKind::Groups, {{3, 0}, {0, 3}}, 2),
       2 * std::log(2.0) + 2 * std::log(4.0)},
  };
  double worst = 0.0;
  std::string detail;
  for (auto& c : cases) {
    const double got = c.model.kind == PartitionKind::Intervals ? modl::discretization_cost(c.model).nats
                                                                : modl::grouping_cost(c.model).nats;
    worst = std::max(worst, std::abs(got - c.expected));
    detail += std::string(detail.empty() ? "" : ", ") + c.label + " = " + fmt(got, 9);
  }
  return {worst <= 1e-9, detail + "; max |delta| " + fmt(worst)};
}

struct AccidentsData {
  testing_support::TempDir dir;
  modl::synth::AccidentsFixture fx;
  explicit AccidentsData(const modl::synth::AccidentsOptions& o) : fx(modl::synth::write_accidents(dir.file("d"), o)) {}

  modl::RunConfig config(std::size_t n_features, std::uint64_t seed, std::size_t threads) const {
    modl::RunConfig c;
    c.schema_path = fx.schema_path;
    c.data = fx.files;
    c.target = fx.target;
    c.n_features = n_features;
    c.seed = seed;
    c.threads = threads;
    c.out = dir.file("out");
    return c;
  }
};

// Largest |sum_j phi_j(x, c) - (score_c(x) - baseline(c))| over `rows`
// random rows, and whether a part-independent variable gets phi = 0.
std::pair<double, bool> shapley_gaps(modl::SnbModel model, const modl::FlatTable& flat, int rows) {
  const auto by_var = modl::parts_of_flat(model, flat);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < rows; ++i) {
    const auto r = rng() % flat.rows;
    const auto parts = modl::row_parts(by_var, r);
    const auto scores = modl::scores_from_parts(model, parts);
    const auto attributions = modl::shapley_from_parts(model, parts);
    for (std::size_t c = 0; c < model.class_count(); ++c) {
      double sum = 0.0;
      for (const auto& e : attributions[c].entries) sum += e.value;
      worst = std::max(worst, std::abs(sum - (scores[c] - modl::baseline(model, c))));
    }
  }
  auto dummy = model.variables.front();
  dummy.name = "Dummy";
  dummy.weight = 0.5;
  for (auto& row : dummy.log_prob) row = dummy.log_prob.front();
  bool zero = true;
  for (std::uint32_t p = 0; p < dummy.log_prob.size(); ++p) {
    for (std::size_t c = 0; c < model.class_count(); ++c) zero &= modl::shapley_value(dummy, p, c) == 0.0;
  }
  return {worst, zero};
}

Outcome shapley() {
  AccidentsData data({.accidents = 3000, .flip = 0.10, .seed = 11});
  auto schema = std::make_shared<const modl::Schema>(
      modl::parse_schema(std::string_view(testing_support::slurp(data.fx.schema_path))));
  const auto ds = modl::load_dataset(schema, data.fx.files, data.fx.target);
  const auto flat = modl::flatten(ds, modl::sample_features(*schema, data.fx.target, 50, 11));
  const auto accidents = modl::fit(flat);
  const auto planted = testing_support::planted_flat(2000, 8, 0.65, 8, 7);
  const auto wide = modl::fit(planted);
  const auto [gap_a, zero_a] = shapley_gaps(accidents, flat, 1000);
  const auto [gap_p, zero_p] = shapley_gaps(wide, planted, 1000);
  const double worst = std::max(gap_a, gap_p);
  const bool zero = zero_a && zero_p;
  return {worst <= 1e-9 && zero && wide.selected() > 1,
          "1000 rows each of the Accidents model (" + std::to_string(accidents.selected()) +
              " selected) and a planted model (" + std::to_string(wide.selected()) +
              " selected), max efficiency gap " + fmt(worst) + ", dummy phi " + (zero ? "exactly 0" : "nonzero")};
}

Outcome planted_signal() {
  const auto t0 = Clock::now();
  double sum10 = 0.0, sum100 = 0.0, min_rich = 1.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AccidentsData data({.accidents = 5000, .flip = 0.10, .seed = seed});
    auto test_auc = [&](std::size_t n) {
      const auto res = modl::run_train(data.config(n, seed, 1), false);
      return res.report.evaluation.at(1).auc.value_or(0.0);
    };
    const double a10 = test_auc(10), a50 = test_auc(50), a100 = test_auc(100);
    sum10 += a10;
    sum100 += a100;
    min_rich = std::min({min_rich, a50, a100});
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": bayes " +
              fmt(data.fx.bayes_auc, 3) + ", auc@10 " + fmt(a10, 3) + ", @50 " + fmt(a50, 3) + ", @100 " +
              fmt(a100, 3);
  }
  const double s = seconds_since(t0);
  const double m10 = sum10 / 5, m100 = sum100 / 5;
  return {min_rich >= 0.85 && m100 >= m10 && s <= 300.0,
          "min auc at n_features >= 50 " + fmt(min_rich, 4) + " (need >= 0.85), mean@100 " + fmt(m100, 4) +
              " vs mean@10 " + fmt(m10, 4) + ", " + fmt(s, 3) + " s single-threaded (limit 300 s) [" + detail + "]"};
}

Outcome determinism() {
  AccidentsData data({.accidents = 2000, .flip = 0.10, .seed = 5});
  std::string ref_model, ref_report;
  bool same = true;
  for (std::size_t threads : {1u, 2u, 4u, 8u}) {
    auto c = data.config(50, 42, threads);
    c.out = data.dir.file("t" + std::to_string(threads));
    modl::run_train(c);
    const auto model = testing_support::slurp(c.out + "/model.json");
    const auto report = testing_support::slurp(c.out + "/report.json");
    if (threads == 1) {
      ref_model = model;
      ref_report = report;
    } else {
      same &= model == ref_model && report == ref_report;
    }
  }
  return {same && !ref_model.empty(), std::string("model.json and report.json ") +
                                          (same ? "byte-identical" : "differ") + " across threads 1, 2, 4, 8"};
}

Outcome thread_scaling() {
  testing_support::TempDir dir;
  const auto fx = modl::synth::write_flat(dir.file("flat"), {.rows = 1000, .variables = 200, .seed = 1});
  auto prep_seconds = [&](std::size_t threads) {
    std::vector<double> runs;
    for (int rep = 0; rep < 3; ++rep) {
      modl::RunConfig c;
      c.schema_path = fx.schema_path;
      c.data = fx.files;
      c.target = fx.target;
      c.n_features = 0;
      c.threads = threads;
      c.out = dir.file("out");
      const auto res = modl::run_train(c, false);
      runs.push_back(res.timing.at("phases_seconds").at("preparation").get<double>());
    }
    std::sort(runs.begin(), runs.end());
    return runs[1];
  };
  const double t1 = prep_seconds(1), t4 = prep_seconds(4);
  const double ratio = t4 / t1;
  return {ratio <= 0.6, "preparation 1 thread " + fmt(t1, 3) + " s, 4 threads " + fmt(t4, 3) + " s, ratio " +
                            fmt(ratio, 3) + " (need <= 0.6), hardware threads " +
                            std::to_string(std::thread::hardware_concurrency())};
}

// Peak RSS in KiB of a child process running the CLI.
long child_peak_kib(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) return -1;
  if (pid == 0) {
    const int null_fd = open("/dev/null", O_WRONLY);
    if (null_fd >= 0) dup2(null_fd, STDOUT_FILENO);
    execv(argv[0], argv.data());
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  if (wait4(pid, &status, 0, &usage) < 0) return -1;
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return -1;
  return usage.ru_maxrss;
}

Outcome memory() {
  testing_support::TempDir dir;
  auto peak_for = [&](double mb) {
    modl::synth::SizedOptions o;
    o.bytes = static_cast<std::uint64_t>(mb * 1024 * 1024);
    o.seed = 1;
    const auto name = "s" + std::to_string(static_cast<int>(mb));
    const auto fx = modl::synth::write_sized(dir.file(name), o);
    std::vector<std::string> args{MODL_BIN, "train", "--schema", fx.schema_path, "--data"};
    for (const auto& [table, path] : fx.files) args.push_back(table + "=" + path);
    for (const auto& a : {"--target", fx.target.c_str(), "--n-features", "20", "--threads", "1", "--chunk-rows", "8192",
                          "--out"}) {
      args.push_back(a);
    }
    args.push_back(dir.file(name + "-out"));
    const long kib = child_peak_kib(args);
    std::filesystem::remove_all(dir.file(name));
    return std::pair{kib, fx.rows};
  };
  const auto [small, small_rows] = peak_for(10);
  const auto [large, large_rows] = peak_for(100);
  if (small <= 0 || large <= 0) return {false, "training run failed"};
  const double ratio = static_cast<double>(large) / static_cast<double>(small);
  return {ratio <= 3.0, "peak RSS 10 MB root (" + std::to_string(small_rows) + " rows) " + fmt(small / 1024.0, 4) +
                            " MiB, 100 MB root (" + std::to_string(large_rows) + " rows) " + fmt(large / 1024.0, 4) +
                            " MiB, ratio " + fmt(ratio, 3) + " (need <= 3)"};
}

Outcome auc_suite() {
  bool ok = modl::auc({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) == 1.0 &&
            modl::auc({0.9, 0.8, 0.2, 0.1}, {false, false, true, true}) == 0.0 &&
            modl::auc({0.9, 0.4, 0.6, 0.1}, {true, true, false, false}) == 0.75;
  const bool examples = ok;
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 200;
    std::vector<double> s(n), mono(n);
    std::vector<bool> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 25) / 5.0 - 2.0;
      mono[i] = std::exp(2.0 * s[i]) + 1.0;
      pos[i] = i == 0 || (i != 1 && rng() % 3 == 0);
      neg[i] = !pos[i];
    }
    const double a = *modl::auc(s, pos);
    worst = std::max(worst, std::abs(a + *modl::auc(s, neg) - 1.0));
    worst = std::max(worst, std::abs(*modl::auc(mono, pos) - a));
  }
  ok &= worst <= 1e-12;
  return {ok, std::string("examples 1.0, 0.0, 0.75 ") + (examples ? "reproduced" : "NOT reproduced") +
                  "; 100 random vectors, max antisymmetry/monotone deviation " + fmt(worst)};
}

const std::vector<Criterion> kCriteria{
    {"discretization_oracle", discretization_oracle},
    {"grouping_oracle", grouping_oracle},
    {"regularization", regularization},
    {"closed_form_costs", closed_form},
    {"shapley_efficiency", shapley},
    {"planted_signal", planted_signal},
    {"determinism", determinism},
    {"thread_scaling", thread_scaling},
    {"memory_discipline", memory},
    {"auc_suite", auc_suite},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> names(argv + 1, argv + argc);
  if (names.size() == 1 && names[0] == "--list") {
    for (const auto& c : kCriteria) std::cout << c.name << '\n';
    return 0;
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!names.empty() && std::find(names.begin(), names.end(), c.name) == names.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt(seconds_since(t0), 3) << " s): " << o.detail
              << std::endl;
    failures += !o.pass;
  }
  for (const auto& n : names) {
    if (std::none_of(kCriteria.begin(), kCriteria.end(), [&](const Criterion& c) { return n == c.name; })) {
      std::cerr << "unknown criterion '" << n << "'\n";
      return 2;
    }
  }
  return failures == 0 ? 0 : 1;
}
