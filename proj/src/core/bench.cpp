#include "pnode/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "pnode/error.hpp"

namespace pnode {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad number '" + s + "' for key '" + key + "'");
  }
}

int parse_int(const std::string& key, const std::string& s) {
  const double v = parse_double(key, s);
  if (v != std::floor(v)) throw Error(ErrorCode::InvalidArgument, "expected an integer for key '" + key + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::InvalidArgument, "expected a boolean for key '" + key + "'");
}

struct Cell {
  RunSpec spec;
  double tol_or_dt = 0.0;
};

std::string format_double(double v, const char* fmt) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

BenchConfig parse_bench_config(std::istream& in) {
  BenchConfig cfg;
  bool ladder_set = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::vector<std::string> items = split_list(value);

    if (key == "problems") {
      cfg.problems = items;
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& s : items) cfg.methods.push_back(parse_method(s));
    } else if (key == "orders") {
      cfg.orders.clear();
      for (const auto& s : items) cfg.orders.push_back(parse_int(key, s));
    } else if (key == "ops") {
      cfg.operator_sets.clear();
      for (const auto& s : items) cfg.operator_sets.push_back(parse_ops(s));
    } else if (key == "mode") {
      if (value == "adaptive") cfg.mode = StepMode::Adaptive;
      else if (value == "fixed") cfg.mode = StepMode::Fixed;
      else throw Error(ErrorCode::InvalidArgument, "mode must be 'adaptive' or 'fixed'");
    } else if (key == "tolerances" || key == "steps") {
      cfg.ladder.clear();
      for (const auto& s : items) {
        const double v = parse_double(key, s);
        if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "ladder values must be > 0");
        cfg.ladder.push_back(v);
      }
      ladder_set = true;
      if (key == "steps") cfg.mode = StepMode::Fixed;
    } else if (key == "transform") {
      cfg.transforms.clear();
      for (const auto& s : items) {
        if (s == "direct") cfg.transforms.push_back(false);
        else if (s == "first_order") cfg.transforms.push_back(true);
        else throw Error(ErrorCode::InvalidArgument, "transform entries are 'direct' or 'first_order'");
      }
    } else if (key == "transform_order_offset") {
      cfg.transform_order_offset = parse_int(key, value);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "reference_tol") {
      cfg.reference_tol = parse_double(key, value);
    } else if (key == "first_order_transform") {
      cfg.transforms = {parse_bool(key, value)};
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown key '" + key + "'");
    }
  }
  if (cfg.mode == StepMode::Fixed && !ladder_set) {
    throw Error(ErrorCode::InvalidArgument, "fixed mode needs a 'steps' ladder");
  }
  return cfg;
}

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open bench config '" + path + "'");
  return parse_bench_config(in);
}

unsigned bench_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PNODE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

std::vector<BenchRecord> run_bench(const BenchConfig& config, unsigned threads) {
  std::vector<Cell> cells;
  for (const auto& name : config.problems)
    for (Approximation method : config.methods)
      for (int order : config.orders)
        for (const OperatorSet& ops : config.operator_sets)
          for (bool transform : config.transforms)
            for (double value : config.ladder) {
              Cell c;
              c.spec.problem = name;
              c.spec.approx = method;
              c.spec.order = transform ? order + config.transform_order_offset : order;
              c.spec.operators = ops;
              c.spec.first_order_transform = transform;
              c.spec.seed = config.seed;
              if (config.mode == StepMode::Fixed) c.spec.step = FixedStep{value};
              else c.spec.step = AdaptiveStep{value, value};
              c.tol_or_dt = value;
              cells.push_back(std::move(c));
            }

  // References at the final time, one per problem.
  std::map<std::string, Vector> references;
  for (const auto& name : config.problems) {
    if (references.count(name)) continue;
    try {
      const IVProblem p = load_problem(name);
      references[name] = reference_solution(p, {p.t1}, config.reference_tol).front();
    } catch (const Error&) {
      references[name] = Vector();
    }
  }

  std::vector<BenchRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      BenchRecord& rec = records[i];
      rec.problem = cell.spec.problem;
      rec.method = method_label(cell.spec.approx);
      rec.order = cell.spec.order;
      rec.ops = ops_label(cell.spec.operators, cell.spec.first_order_transform);
      rec.mode = config.mode == StepMode::Fixed ? "fixed" : "adaptive";
      rec.tol_or_dt = cell.tol_or_dt;
      rec.seed = cell.spec.seed;
      rec.final_error = kNaN;
      rec.energy_drift = kNaN;
      rec.dae_residual = kNaN;
      try {
        const IVProblem problem = prepare_problem(cell.spec);
        const SolverConfig cfg = make_config(cell.spec);
        const auto start = std::chrono::steady_clock::now();
        const Solution sol = solve(problem, cfg);
        rec.wall_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
        rec.n_feval = sol.stats.n_feval;
        rec.n_steps = sol.stats.n_steps_accepted;
        rec.energy_drift = energy_drift(problem, sol);
        rec.dae_residual = dae_residual(problem, sol);
        const Vector& ref = references.at(cell.spec.problem);
        if (ref.size() > 0) rec.final_error = (observable_mean(sol, sol.size() - 1) - ref).norm();
      } catch (const Error&) {
        // recorded as a NaN row
      }
    }
  };

  if (threads == 0) threads = bench_threads();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(cells.size(), 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::stable_sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::tie(a.problem, a.method, a.order, a.tol_or_dt, a.ops) <
           std::tie(b.problem, b.method, b.order, b.tol_or_dt, b.ops);
  });
  return records;
}

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << kBenchHeader << '\n';
  for (const auto& r : records) {
    out << r.problem << ',' << r.method << ',' << r.order << ',' << r.ops << ',' << r.mode << ','
        << format_double(r.tol_or_dt, "%g") << ',' << format_double(r.final_error, "%.10e") << ','
        << r.n_feval << ',' << r.n_steps << ',' << r.wall_time_ns << ','
        << (std::isnan(r.energy_drift) ? std::string() : format_double(r.energy_drift, "%.6e")) << ','
        << (std::isnan(r.dae_residual) ? std::string() : format_double(r.dae_residual, "%.6e")) << ','
        << r.seed << '\n';
  }
}

}  // namespace pnode
