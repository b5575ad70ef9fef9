#pragma once

// Network definition and routing algebra: transience of the routing matrix,
// effective arrival rates γ = (I − Rᵀ)⁻¹θ, nominal workloads and irreducibility.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qnet/reduction.hpp"

namespace qnet {

struct NetworkSpec {
  std::string name;
  int classes = 0;
  std::vector<std::vector<ClassId>> stations;   // K_1, ..., K_ℵ
  std::vector<double> theta;                    // external arrival rate per class
  std::vector<double> beta;                     // service rate per class
  std::vector<std::vector<double>> routing;     // d×d, row deficit is the exit probability
  std::vector<StationProtocol> protocols;       // one per station

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct RoutingAnalysis {
  std::vector<double> effective_rates;  // γ, per class
  std::vector<double> workload;         // ρ_i, per station
  bool irreducible = false;
  bool transient = false;
  int vanishing_doublings = 0;          // R^(2^m) fell below 1e-12 after m squarings
};

inline constexpr double kTransienceThreshold = 1e-12;
inline constexpr int kMaxDoublings = 64;
inline constexpr double kIrreducibleTolerance = 1e-12;

namespace detail {

inline void check_structure(const NetworkSpec& spec) {
  const int d = spec.classes;
  if (d < 1) throw DimensionMismatch("network needs at least one class");
  const auto ud = static_cast<std::size_t>(d);
  if (spec.theta.size() != ud) throw DimensionMismatch("theta has wrong length");
  if (spec.beta.size() != ud) throw DimensionMismatch("beta has wrong length");
  if (spec.routing.size() != ud) throw DimensionMismatch("routing has wrong row count");
  for (auto& row : spec.routing)
    if (row.size() != ud) throw DimensionMismatch("routing has wrong column count");
  if (spec.stations.empty() || spec.stations.size() > ud)
    throw DimensionMismatch("station count must be between 1 and the class count");
  if (spec.protocols.size() != spec.stations.size())
    throw DimensionMismatch("one protocol per station is required");

  for (int k = 0; k < d; ++k) {
    if (!(spec.theta[k] >= 0) || !std::isfinite(spec.theta[k]))
      throw NegativeRate("arrival rate of class " + std::to_string(k + 1) + " is negative");
    if (!(spec.beta[k] > 0) || !std::isfinite(spec.beta[k]))
      throw NegativeRate("service rate of class " + std::to_string(k + 1) + " is not positive");
    double row_sum = 0;
    for (double r : spec.routing[k]) {
      if (!(r >= 0 && r <= 1)) throw InvalidSpec("routing entries must lie in [0,1]");
      row_sum += r;
    }
    if (row_sum > 1 + 1e-12)
      throw InvalidSpec("routing row " + std::to_string(k + 1) + " sums above 1");
  }

  std::set<ClassId> seen;
  for (std::size_t i = 0; i < spec.stations.size(); ++i) {
    const auto& ks = spec.stations[i];
    if (ks.empty()) throw InvalidSpec("station " + std::to_string(i + 1) + " has no classes");
    for (ClassId k : ks) {
      if (k < 1 || k > d) throw InvalidSpec("station lists unknown class " + std::to_string(k));
      if (!seen.insert(k).second)
        throw InvalidSpec("class " + std::to_string(k) + " assigned to two stations");
    }
    const auto& pr = spec.protocols[i];
    if (pr.policy.kind() == QueuePolicy::Kind::sbp && !pr.policy.ranking().partitions(ks))
      throw InvalidSpec("SBP ranking of station " + std::to_string(i + 1) +
                        " does not partition its classes");
    if (pr.allocation.kind() == ServiceAllocation::Kind::preferential &&
        !pr.allocation.ranking().partitions(ks))
      throw InvalidSpec("preferential ranking of station " + std::to_string(i + 1) +
                        " does not cover its classes");
  }
  if (seen.size() != ud) throw InvalidSpec("every class must be assigned to a station");
}

inline Eigen::MatrixXd routing_matrix(const NetworkSpec& spec) {
  const int d = spec.classes;
  Eigen::MatrixXd r(d, d);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) r(k, l) = spec.routing[k][l];
  return r;
}

}  // namespace detail

/// Number of squarings after which R^(2^m) vanishes entrywise; throws if the
/// series I + R + R² + ... does not converge.
inline int transience_certificate(const Eigen::MatrixXd& routing) {
  Eigen::MatrixXd power = routing;
  for (int m = 0; m <= kMaxDoublings; ++m) {
    const double largest = power.cwiseAbs().maxCoeff();
    if (!std::isfinite(largest)) break;
    if (largest < kTransienceThreshold) return m;
    power = power * power;
  }
  throw NonTransientRouting();
}

inline RoutingAnalysis validate(const NetworkSpec& spec) {
  detail::check_structure(spec);
  const int d = spec.classes;
  const Eigen::MatrixXd r = detail::routing_matrix(spec);

  RoutingAnalysis out;
  out.vanishing_doublings = transience_certificate(r);
  out.transient = true;

  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(d, d) - r.transpose();
  const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(spec.theta.data(), d);
  const Eigen::VectorXd gamma = system.partialPivLu().solve(theta);
  const double scale = std::max(1.0, theta.cwiseAbs().maxCoeff());
  if ((system * gamma - theta).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw NonTransientRouting();

  out.effective_rates.assign(gamma.data(), gamma.data() + d);
  out.irreducible = (gamma.array() > kIrreducibleTolerance).all();
  for (auto& ks : spec.stations) {
    double rho = 0;
    for (ClassId k : ks) rho += out.effective_rates[k - 1] / spec.beta[k - 1];
    out.workload.push_back(rho);
  }
  return out;
}

/// A validated, immutable network with precomputed lookups. All Q-process
/// operations take one of these.
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)), analysis_(validate(spec_)) {
    const int d = spec_.classes;
    station_of_.assign(d + 1, -1);
    for (std::size_t i = 0; i < spec_.stations.size(); ++i)
      for (ClassId k : spec_.stations[i]) station_of_[k] = static_cast<int>(i);
    exit_.assign(d + 1, 0.0);
    for (int k = 1; k <= d; ++k) {
      double s = 0;
      for (double r : spec_.routing[k - 1]) s += r;
      exit_[k] = std::max(0.0, 1.0 - s);
    }
    for (auto& ks : spec_.stations) {
      double b = 0;
      for (ClassId k : ks) b = std::max(b, spec_.beta[k - 1]);
      beta_bar_.push_back(b);
    }
    for (std::size_t i = 0; i < spec_.stations.size(); ++i)
      reduction_.push_back(reduction_kind(spec_.protocols[i], spec_.stations[i]));
  }

  const NetworkSpec& spec() const { return spec_; }
  const RoutingAnalysis& analysis() const { return analysis_; }
  const std::string& name() const { return spec_.name; }

  int classes() const { return spec_.classes; }
  int stations() const { return static_cast<int>(spec_.stations.size()); }
  int station_of(ClassId k) const { return station_of_[k]; }
  const std::vector<ClassId>& station_classes(int i) const { return spec_.stations[i]; }
  const StationProtocol& protocol(int i) const { return spec_.protocols[i]; }
  ReductionKind reduction(int i) const { return reduction_[i]; }

  double theta(ClassId k) const { return spec_.theta[k - 1]; }
  double beta(ClassId k) const { return spec_.beta[k - 1]; }
  /// R_kl for l ≥ 1, the exit probability R_k0 for l = 0.
  double route(ClassId k, ClassId l) const { return l == 0 ? exit_[k] : spec_.routing[k - 1][l - 1]; }
  double beta_bar(int i) const { return beta_bar_[i]; }

  Network with_theta(std::vector<double> theta) const {
    NetworkSpec s = spec_;
    s.theta = std::move(theta);
    return Network(std::move(s));
  }
  Network scaled(double factor) const {
    std::vector<double> t = spec_.theta;
    for (double& x : t) x *= factor;
    return with_theta(std::move(t));
  }

 private:
  NetworkSpec spec_;
  RoutingAnalysis analysis_;
  std::vector<int> station_of_;
  std::vector<double> exit_;
  std::vector<double> beta_bar_;
  std::vector<ReductionKind> reduction_;
};

}  // namespace qnet
