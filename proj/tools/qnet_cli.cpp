// qnet: command-line front end for the queueing-network toolkit.
//
// Exit codes: 0 success, 1 domain error (bad spec, non-transient routing,
// budget exceeded, ...), 2 usage error.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qnet/qnet.hpp"

namespace fs = std::filesystem;
using namespace qnet;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = ".";
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw InvalidArgument("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double x : parse_list(text)) {
    if (x != static_cast<int>(x) || x < 0) throw InvalidArgument("step counts must be nonnegative integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

/// Collects output files and writes the run manifest at the end.
class Run {
 public:
  Run(const Globals& g, std::string subcommand, CLI::App* sub)
      : g_(g), subcommand_(std::move(subcommand)), sub_(sub), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(g_.out_dir);
  }

  unsigned threads() const { return g_.threads ? g_.threads : default_threads(); }
  CounterStream rng() const { return CounterStream(g_.seed); }

  std::string path(const std::string& given, const std::string& fallback) const {
    return given.empty() ? (fs::path(g_.out_dir) / fallback).string() : given;
  }

  void write(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << contents;
    outputs_.push_back({path, fnv1a(contents)});
  }

  void finish(const std::string& spec) {
    json params = json::object();
    for (const CLI::Option* opt : sub_->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
      const auto r = opt->results();
      std::string name = opt->get_name();
      while (!name.empty() && name.front() == '-') name.erase(name.begin());
      params[name] = r.empty() ? opt->get_default_str() : CLI::detail::join(r);
    }
    json m;
    m["tool"] = "qnet";
    m["version"] = kVersion;
    m["subcommand"] = subcommand_;
    m["spec"] = spec;
    m["parameters"] = params;
    m["seed"] = g_.seed;
    m["threads"] = threads();
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json outs = json::array();
    for (auto& [p, h] : outputs_) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
      outs.push_back({{"path", p}, {"fnv1a64", buf}});
    }
    m["outputs"] = outs;
    std::ofstream((fs::path(g_.out_dir) / (subcommand_ + "-manifest.json")).string()) << m.dump(2) << "\n";
  }

 private:
  Globals g_;
  std::string subcommand_;
  CLI::App* sub_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::uint64_t>> outputs_;
};

Network scaled_network(const std::string& spec, double scale) {
  Network net(load_spec(spec));
  return scale == 1.0 ? net : net.scaled(scale);
}

NetworkState start_state(const Network& net, const std::string& text) {
  return text.empty() ? empty_state(net) : parse_state(net, text);
}

std::string join_doubles(const std::vector<double>& v, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + fmt(v[i]);
  return out;
}

json trace_json(const std::vector<TracePoint>& trace) {
  json t = json::array();
  for (auto& p : trace) t.push_back({{"scale", p.scale}, {"value", p.value}});
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnet: multi-class queueing network toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master random seed (64-bit)");
  app.add_option("--threads", g.threads, "worker threads (default: QNET_THREADS or hardware concurrency)");
  app.add_option("--out-dir", g.out_dir, "directory for outputs and the run manifest");

  std::string spec, start, out, lower, upper, direction, scales_text, steps_text, method = "bisect";
  double theta_scale = 1, alpha = 1, epsilon = 0.2;
  long reps = 1000;
  int steps = 10, iters = 20, rays = 5, exact_depth = 0;
  std::size_t budget = 1'000'000;
  bool use_exact = false, reduced = false, list = false;
  std::string dump, functional = "exp-norm", coords = "1,2";

  auto* validate_cmd = app.add_subcommand("validate", "check a spec and print its routing analysis");
  validate_cmd->add_option("--spec", spec, "spec file or fixture name")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "sample embedded-chain paths to CSV");
  simulate_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  simulate_cmd->add_option("--theta-scale", theta_scale, "multiply all arrival rates")->capture_default_str();
  simulate_cmd->add_option("--steps", steps, "steps per path")->capture_default_str();
  simulate_cmd->add_option("--reps", reps, "number of paths")->capture_default_str();
  simulate_cmd->add_option("--start", start, "initial state as JSON, default empty");
  simulate_cmd->add_option("--out", out, "CSV output path (default <out-dir>/simulate.csv)");

  auto* exact_cmd = app.add_subcommand("exact", "exact n-step law from a state");
  exact_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  exact_cmd->add_option("--theta-scale", theta_scale, "multiply all arrival rates")->capture_default_str();
  exact_cmd->add_option("--steps", steps, "number of steps")->capture_default_str();
  exact_cmd->add_option("--start", start, "initial state as JSON, default empty");
  exact_cmd->add_option("--functional", functional, "functional to evaluate")
      ->check(CLI::IsMember({"exp-norm"}))->capture_default_str();
  exact_cmd->add_option("--alpha", alpha, "decay of exp(-alpha*norm)")->capture_default_str();
  exact_cmd->add_flag("--reduced", reduced, "lump states by their reduced configuration")->capture_default_str();
  exact_cmd->add_option("--budget", budget, "state budget")->capture_default_str();
  exact_cmd->add_option("--out", out, "JSON output path (default <out-dir>/exact.json)");

  auto* phi_cmd = app.add_subcommand("phi", "estimate E exp(-alpha*norm) after n steps from empty");
  phi_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  phi_cmd->add_option("--theta-scale", theta_scale, "multiply all arrival rates")->capture_default_str();
  phi_cmd->add_option("--steps", steps, "horizon n")->capture_default_str();
  phi_cmd->add_option("--alpha", alpha, "decay parameter")->capture_default_str();
  phi_cmd->add_option("--reps", reps, "replications")->capture_default_str();
  phi_cmd->add_flag("--exact", use_exact, "use the exact engine")->capture_default_str();
  phi_cmd->add_option("--out", out, "CSV output path (default <out-dir>/phi.csv)");

  auto* monotone_cmd = app.add_subcommand("monotone", "table of phi over arrival scales and horizons");
  monotone_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  monotone_cmd->add_option("--scales", scales_text, "ascending arrival scales, comma separated")->required();
  monotone_cmd->add_option("--steps", steps_text, "ascending horizons, comma separated")->required();
  monotone_cmd->add_option("--alpha", alpha, "decay parameter")->capture_default_str();
  monotone_cmd->add_option("--reps", reps, "replications per cell (Monte Carlo mode)")->capture_default_str();
  monotone_cmd->add_flag("--exact", use_exact, "use the exact engine")->capture_default_str();
  monotone_cmd->add_option("--out", out, "CSV output path (default <out-dir>/monotone.csv)");

  auto* couple_cmd = app.add_subcommand("couple", "run and verify the coupling of two ordered states");
  couple_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  couple_cmd->add_option("--lower", lower, "lower state as JSON")->required();
  couple_cmd->add_option("--upper", upper, "upper state as JSON")->required();
  couple_cmd->add_option("--steps", steps, "path length")->capture_default_str();
  couple_cmd->add_option("--reps", reps, "number of coupled paths")->capture_default_str();
  couple_cmd->add_option("--exact-depth", exact_depth, "also compare exact pair-chain laws at this depth")
      ->capture_default_str();
  couple_cmd->add_option("--report", out, "JSON report path (default <out-dir>/couple.json)");

  auto* threshold_cmd = app.add_subcommand("threshold", "stability threshold along a ray");
  threshold_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  threshold_cmd->add_option("--direction", direction, "ray direction, comma separated")->required();
  threshold_cmd->add_option("--epsilon", epsilon, "target level in (0,1)")->capture_default_str();
  threshold_cmd->add_option("--method", method, "bisect or rm")
      ->check(CLI::IsMember({"bisect", "rm"}))->capture_default_str();
  threshold_cmd->add_option("--steps", steps, "horizon n")->capture_default_str();
  threshold_cmd->add_option("--alpha", alpha, "decay parameter")->capture_default_str();
  threshold_cmd->add_option("--reps", reps, "replications per bisection probe")->capture_default_str();
  threshold_cmd->add_option("--iters", iters, "bisection halvings or Robbins-Monro iterations")
      ->capture_default_str();
  threshold_cmd->add_option("--out", out, "JSON output path (default <out-dir>/threshold.json)");

  auto* region_cmd = app.add_subcommand("region", "star-shaped scan of the stability region");
  region_cmd->add_option("--spec", spec, "spec file or fixture name")->required();
  region_cmd->add_option("--rays", rays, "number of rays in the positive quadrant")->capture_default_str();
  region_cmd->add_option("--coords", coords, "the two classes spanning the plane")->capture_default_str();
  region_cmd->add_option("--epsilon", epsilon, "target level in (0,1)")->capture_default_str();
  region_cmd->add_option("--steps", steps, "horizon n")->capture_default_str();
  region_cmd->add_option("--alpha", alpha, "decay parameter")->capture_default_str();
  region_cmd->add_option("--reps", reps, "replications per probe")->capture_default_str();
  region_cmd->add_option("--iters", iters, "bisection halvings per ray")->capture_default_str();
  region_cmd->add_option("--out", out, "JSON output path (default <out-dir>/region.json)");

  auto* fixtures_cmd = app.add_subcommand("fixtures", "list or print built-in networks");
  auto* list_opt = fixtures_cmd->add_flag("--list", list, "print fixture names")->capture_default_str();
  fixtures_cmd->add_option("--dump", dump, "print one fixture as spec JSON")->excludes(list_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fixtures_cmd) {
      if (!dump.empty()) {
        std::cout << spec_to_json(builtin_fixture(dump)).dump(2) << "\n";
      } else {
        for (auto& n : fixture_names()) std::cout << n << "\n";
      }
      return 0;
    }

    if (*validate_cmd) {
      Run run(g, "validate", validate_cmd);
      const Network net(load_spec(spec));
      const auto& a = net.analysis();
      std::ostringstream os;
      os << "spec: " << net.name() << "\n";
      os << "classes: " << net.classes() << "\n";
      os << "stations: " << net.stations() << "\n";
      os << "gamma: " << join_doubles(a.effective_rates) << "\n";
      os << "rho: " << join_doubles(a.workload) << "\n";
      os << "subcritical: " << (*std::max_element(a.workload.begin(), a.workload.end()) < 1 ? "yes" : "no") << "\n";
      os << "irreducible: " << (a.irreducible ? "yes" : "no") << "\n";
      os << "transient: " << (a.transient ? "yes" : "no") << " (routing powers vanish after "
         << a.vanishing_doublings << " squarings)\n";
      os << "lambda: " << fmt(uniformization_rate(net)) << "\n";
      std::cout << os.str();
      run.write(run.path("", "validate.txt"), os.str());
      run.finish(spec);
      return 0;
    }

    if (*simulate_cmd) {
      Run run(g, "simulate", simulate_cmd);
      const Network net = scaled_network(spec, theta_scale);
      const NetworkState s0 = start_state(net, start);
      if (steps < 0 || reps < 1) throw InvalidArgument("steps must be nonnegative and reps positive");
      const auto paths = parallel_map(static_cast<std::size_t>(reps), run.threads(), [&](std::size_t r) {
        CounterStream s = run.rng().substream(r);
        std::string rows;
        const EmbeddedChain chain(net);
        NetworkState x = s0;
        for (int m = 0; m <= steps; ++m) {
          if (m > 0) chain.step(x, s);
          const auto c = class_counts(net, x);
          rows += std::to_string(r) + "," + std::to_string(m) + "," + std::to_string(x.total());
          for (int k = 1; k <= net.classes(); ++k) rows += "," + std::to_string(c[k]);
          rows += "\n";
        }
        return rows;
      });
      std::string csv = "rep,step,total_jobs";
      for (int k = 1; k <= net.classes(); ++k) csv += ",class_" + std::to_string(k);
      csv += "\n";
      for (auto& p : paths) csv += p;
      run.write(run.path(out, "simulate.csv"), csv);
      run.finish(spec);
      return 0;
    }

    if (*exact_cmd) {
      Run run(g, "exact", exact_cmd);
      const Network net = scaled_network(spec, theta_scale);
      ExactOptions opt;
      opt.reduced = reduced;
      opt.state_budget = budget;
      const auto law = exact_step_distribution(net, start_state(net, start), steps, opt);
      const double value = law.expectation([&](const NetworkState& s) { return exp_norm(s, alpha); });
      std::cout << "states: " << law.size() << "\n";
      std::cout << "exp-norm(alpha=" << fmt(alpha) << "): " << fmt(value) << "\n";
      run.write(run.path(out, "exact.json"), distribution_to_json(law).dump(2) + "\n");
      run.finish(spec);
      return 0;
    }

    if (*phi_cmd) {
      Run run(g, "phi", phi_cmd);
      const Network net = scaled_network(spec, theta_scale);
      std::string csv = "theta_scale,steps,alpha,mode,reps,mean,stderr\n";
      if (use_exact) {
        csv += fmt(theta_scale) + "," + std::to_string(steps) + "," + fmt(alpha) + ",exact,0," +
               fmt(phi_exact(net, steps, alpha)) + ",0\n";
      } else {
        const auto e = phi_estimate(net, steps, alpha, reps, run.rng(), run.threads());
        csv += fmt(theta_scale) + "," + std::to_string(steps) + "," + fmt(alpha) + ",mc," + std::to_string(reps) +
               "," + fmt(e.mean) + "," + fmt(e.std_error) + "\n";
      }
      std::cout << csv;
      run.write(run.path(out, "phi.csv"), csv);
      run.finish(spec);
      return 0;
    }

    if (*monotone_cmd) {
      Run run(g, "monotone", monotone_cmd);
      const Network net(load_spec(spec));
      const auto t = monotonicity_table(net, parse_list(scales_text), parse_int_list(steps_text), alpha,
                                        use_exact ? TableMode::exact : TableMode::mc, reps, run.rng(),
                                        run.threads());
      std::string csv = "theta_scale,steps,phi,stderr,violates_n,violates_theta\n";
      for (std::size_t r = 0; r < t.scales.size(); ++r)
        for (std::size_t c = 0; c < t.steps.size(); ++c) {
          bool vn = false, vt = false;
          for (auto& v : t.violations)
            if (v.row == r && v.col == c) (v.direction == TableViolation::Direction::in_n ? vn : vt) = true;
          csv += fmt(t.scales[r]) + "," + std::to_string(t.steps[c]) + "," + fmt(t.value[r][c]) + "," +
                 fmt(t.std_error[r][c]) + "," + (vn ? "1" : "0") + "," + (vt ? "1" : "0") + "\n";
        }
      std::cout << csv << "violations: " << t.violations.size() << "\n";
      run.write(run.path(out, "monotone.csv"), csv);
      run.finish(spec);
      return 0;
    }

    if (*couple_cmd) {
      Run run(g, "couple", couple_cmd);
      const Network net(load_spec(spec));
      check_coupling_regime(net);
      const NetworkState lo = parse_state(net, lower), up = parse_state(net, upper);
      if (reps < 1 || steps < 0) throw InvalidArgument("steps must be nonnegative and reps positive");
      struct Tally {
        long paths = 0, membership = 0, absorption = 0, delta = 0, monotone = 0, frozen = 0, merged = 0;
        double tau_sum = 0;
        std::array<long, 5> cases{};
      };
      const auto tallies = parallel_map(static_cast<std::size_t>(reps), run.threads(), [&](std::size_t r) {
        Tally t;
        for (auto& p : run_coupling(net, lo, up, steps, run.rng().substream(r))) {
          ++t.paths;
          const auto rep = verify_coupling_path(p);
          t.membership += !rep.membership;
          t.absorption += !rep.absorption;
          t.delta += !rep.delta_relation;
          t.monotone += !rep.monotone_counts;
          t.frozen += !check_frozen_deletion(net, p);
          if (p.tau) {
            ++t.merged;
            t.tau_sum += *p.tau;
          }
          for (auto& st : p.steps) ++t.cases[static_cast<std::size_t>(st.label)];
        }
        return t;
      });
      Tally all;
      for (auto& t : tallies) {
        all.paths += t.paths;
        all.membership += t.membership;
        all.absorption += t.absorption;
        all.delta += t.delta;
        all.monotone += t.monotone;
        all.frozen += t.frozen;
        all.merged += t.merged;
        all.tau_sum += t.tau_sum;
        for (std::size_t c = 0; c < all.cases.size(); ++c) all.cases[c] += t.cases[c];
      }
      json rep;
      rep["lower"] = state_to_json(lo);
      rep["upper"] = state_to_json(up);
      rep["adjacent_pairs"] = interpolate(net, lo, up).size() - 1;
      rep["steps"] = steps;
      rep["paths"] = all.paths;
      rep["violations"] = {{"membership", all.membership},    {"absorption", all.absorption},
                           {"delta_relation", all.delta},     {"monotone_counts", all.monotone},
                           {"frozen_deletion", all.frozen}};
      rep["coupling_time"] = {{"merged", all.merged},
                              {"censored", all.paths - all.merged},
                              {"mean_when_merged", all.merged ? all.tau_sum / all.merged : 0.0}};
      json cases = json::object();
      for (std::size_t c = 0; c < all.cases.size(); ++c)
        cases[case_name(static_cast<CouplingCase>(c))] = all.cases[c];
      rep["cases"] = cases;
      if (exact_depth > 0) {
        const auto chain = interpolate(net, lo, up);
        json checks = json::array();
        for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
          const auto c = exact_pair_law_check(net, chain[j], chain[j + 1], exact_depth);
          checks.push_back({{"lower", state_to_json(chain[j])},
                            {"upper", state_to_json(chain[j + 1])},
                            {"tv_upper", c.tv_upper},
                            {"cdf_excess", c.cdf_excess},
                            {"pair_states", c.pair_states}});
        }
        rep["exact"] = {{"depth", exact_depth}, {"pairs", checks}};
      }
      const long bad = all.membership + all.absorption + all.delta + all.monotone + all.frozen;
      std::cout << "paths: " << all.paths << "  violations: " << bad << "  merged: " << all.merged << "\n";
      run.write(run.path(out, "couple.json"), rep.dump(2) + "\n");
      run.finish(spec);
      return 0;
    }

    if (*threshold_cmd) {
      Run run(g, "threshold", threshold_cmd);
      const Network net(load_spec(spec));
      StatisticalSearch s{steps, alpha, reps, run.threads()};
      RaySearchResult r;
      if (method == "bisect") {
        BisectionOptions o;
        o.iterations = iters;
        r = threshold_bisection(net, parse_list(direction), epsilon, s, run.rng(), o);
      } else {
        RobbinsMonroOptions o;
        o.iterations = iters;
        r = threshold_robbins_monro(net, parse_list(direction), epsilon, s, run.rng(), o);
      }
      json j{{"direction", r.direction}, {"threshold", r.threshold}, {"method", method_name(r.method)},
             {"epsilon", r.epsilon},     {"horizon", r.horizon},     {"trace", trace_json(r.trace)}};
      std::cout << "threshold: " << fmt(r.threshold) << " (horizon " << r.horizon << ")\n";
      run.write(run.path(out, "threshold.json"), j.dump(2) + "\n");
      run.finish(spec);
      return 0;
    }

    if (*region_cmd) {
      Run run(g, "region", region_cmd);
      const Network net(load_spec(spec));
      const auto c = parse_int_list(coords);
      if (c.size() != 2) throw InvalidArgument("--coords needs two class ids");
      StatisticalSearch s{steps, alpha, reps, run.threads()};
      BisectionOptions o;
      o.iterations = iters;
      const auto scan = region_scan(net, quadrant_rays(net, rays, c[0], c[1]), epsilon, s, run.rng(), o);
      json rj = json::array();
      for (auto& r : scan.rays)
        rj.push_back({{"direction", r.search.direction},
                      {"threshold", r.search.threshold},
                      {"subcritical_scale", r.subcritical_scale},
                      {"trace", trace_json(r.search.trace)}});
      // ρ_i(θ) = Σ_k c_ik θ_k; the polytope is {θ ≥ 0 : Σ_k c_ik θ_k < 1 for all i}.
      json rows = json::array();
      std::vector<std::vector<double>> coef(static_cast<std::size_t>(net.stations()));
      for (int k = 1; k <= net.classes(); ++k) {
        std::vector<double> e(static_cast<std::size_t>(net.classes()), 0.0);
        e[k - 1] = 1;
        const auto w = net.with_theta(e).analysis().workload;
        for (int i = 0; i < net.stations(); ++i) coef[i].push_back(w[i]);
      }
      for (auto& row : coef) rows.push_back(row);
      json j{{"epsilon", epsilon},
             {"horizon", steps},
             {"coordinates", scan.coordinates},
             {"rays", rj},
             {"polygon", scan.polygon},
             {"subcritical_polytope", {{"workload_coefficients", rows}, {"vertices", scan.subcritical_polygon}}}};
      for (auto& r : scan.rays)
        std::cout << "ray " << join_doubles(r.search.direction, ",") << ": threshold " << fmt(r.search.threshold)
                  << ", subcritical boundary " << fmt(r.subcritical_scale) << "\n";
      run.write(run.path(out, "region.json"), j.dump(2) + "\n");
      run.finish(spec);
      return 0;
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "qnet: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qnet: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
