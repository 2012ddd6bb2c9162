#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "brownsim/placement.hpp"
#include "brownsim/power.hpp"
#include "brownsim/types.hpp"

namespace brownsim {

/// Sliding window of overloaded-host counts N(t), capacity L_w.
class OverloadWindow {
 public:
  explicit OverloadWindow(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("window capacity must be >= 1");
  }

  void record(int n) {
    counts_.push_back(n);
    while (counts_.size() > static_cast<std::size_t>(capacity_)) counts_.pop_front();
  }

  bool empty() const { return counts_.empty(); }
  std::size_t size() const { return counts_.size(); }
  int capacity() const { return capacity_; }

  double mean() const {
    if (counts_.empty()) return 0.0;
    double sum = 0.0;
    for (int n : counts_) sum += n;
    return sum / static_cast<double>(counts_.size());
  }

 private:
  int capacity_;
  std::deque<int> counts_;
};

/// M-hat: mean overloaded-host count over the observed window; falls back to
/// the caller-supplied current count when nothing has been recorded yet.
inline double estimate_overloaded(const OverloadWindow& window, int current_n = 0) {
  if (window.empty()) return static_cast<double>(current_n);
  return window.mean();
}

/// Dimmer value sqrt(M-hat / M) in [0,1].
inline double dimmer(double m_hat, int m_total) {
  if (m_total <= 0) throw std::invalid_argument("host count must be > 0");
  double ratio = std::clamp(m_hat / static_cast<double>(m_total), 0.0, 1.0);
  return std::sqrt(ratio);
}

/// One u/d ratio bin over a VM's optional components.
struct RatioCategory {
  int index = 0;  // bin position, ascending ratio
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> component_indices;  // positions in vm.components
  double mass = 0.0;  // fraction of the VM's optional components in this bin
};

/// Buckets a VM's optional components into uniform-width u/d ratio bins.
/// Components with zero discount land in the top bin; if every ratio is
/// identical a single category holds all of them. Empty bins are dropped.
inline std::vector<RatioCategory> categorize(const VmState& vm, int num_categories) {
  if (num_categories < 1) throw std::invalid_argument("category count must be >= 1");

  std::vector<std::pair<std::size_t, double>> ratios;  // (component index, ratio)
  std::size_t optional_count = 0;
  for (std::size_t i = 0; i < vm.components.size(); ++i) {
    const auto& c = vm.components[i];
    if (c.mandatory) continue;
    ++optional_count;
    double r = c.discount > 0.0 ? c.utilization / c.discount
                                : std::numeric_limits<double>::infinity();
    ratios.emplace_back(i, r);
  }
  if (ratios.empty()) return {};

  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -std::numeric_limits<double>::infinity();
  bool any_finite = false;
  for (const auto& [idx, r] : ratios) {
    if (std::isfinite(r)) {
      any_finite = true;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
  }

  std::vector<RatioCategory> bins;
  if (!any_finite || rmin == rmax) {
    // all ratios equal (or all infinite): one category holds everything
    RatioCategory cat;
    cat.index = 0;
    cat.lo = any_finite ? rmin : std::numeric_limits<double>::infinity();
    cat.hi = any_finite ? rmax : std::numeric_limits<double>::infinity();
    for (const auto& [idx, r] : ratios) cat.component_indices.push_back(idx);
    bins.push_back(std::move(cat));
  } else {
    double width = (rmax - rmin) / num_categories;
    bins.resize(static_cast<std::size_t>(num_categories));
    for (int z = 0; z < num_categories; ++z) {
      bins[static_cast<std::size_t>(z)].index = z;
      bins[static_cast<std::size_t>(z)].lo = rmin + z * width;
      bins[static_cast<std::size_t>(z)].hi = rmin + (z + 1) * width;
    }
    for (const auto& [idx, r] : ratios) {
      int z;
      if (!std::isfinite(r)) {
        z = num_categories - 1;
      } else {
        z = std::min(num_categories - 1, static_cast<int>((r - rmin) / width));
      }
      bins[static_cast<std::size_t>(z)].component_indices.push_back(idx);
    }
    bins.erase(std::remove_if(bins.begin(), bins.end(),
                              [](const RatioCategory& c) { return c.component_indices.empty(); }),
               bins.end());
  }

  for (auto& cat : bins)
    cat.mass = static_cast<double>(cat.component_indices.size()) /
               static_cast<double>(optional_count);
  return bins;
}

/// Estimated probability that the components of one ratio category flip
/// state: the dimmer scaled by the category's empirical mass.
inline double transition_probability(double theta, double category_mass) {
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("theta outside [0,1]");
  if (category_mass < 0.0 || category_mass > 1.0)
    throw std::invalid_argument("category mass outside [0,1]");
  return theta * category_mass;
}

/// Reduced per-VM MDP state: deactivate the k highest-ratio categories.
struct KeyState {
  int deactivated_prefix = 0;  // number of top-ratio categories switched off
  std::vector<std::size_t> deactivated;  // component positions in vm.components
  double utilization_share = 0.0;  // share-sum removed when applied
  double discount = 0.0;           // discount accrued when applied
};

/// All prefix key states for one VM, from all-active up to every category
/// off. The fully-deactivated state is dropped for applications with no
/// mandatory utilization, which must keep at least one component running.
inline std::vector<KeyState> enumerate_key_states(const VmState& vm,
                                                  const std::vector<RatioCategory>& categories) {
  std::vector<KeyState> states;
  states.push_back({});  // all active
  int n = static_cast<int>(categories.size());
  KeyState acc;
  for (int k = 1; k <= n; ++k) {
    const RatioCategory& cat = categories[static_cast<std::size_t>(n - k)];  // top first
    for (std::size_t idx : cat.component_indices) {
      acc.deactivated.push_back(idx);
      acc.utilization_share += vm.components[idx].utilization;
      acc.discount += vm.components[idx].discount;
    }
    acc.deactivated_prefix = k;
    if (k == n && vm.fully_optional() && !acc.deactivated.empty()) {
      std::size_t optional_total = 0;
      for (const auto& c : vm.components)
        if (!c.mandatory) ++optional_total;
      if (acc.deactivated.size() == optional_total) break;  // would silence the whole app
    }
    states.push_back(acc);
  }
  return states;
}

/// Expected per-interval cost table over key states. Kept generic: the map
/// vm_id -> V* the callers build from this is the paper-facing ValueTable.
struct ValueIterationResult {
  std::vector<double> values;
  bool converged = false;
  int sweeps = 0;
};

/// Finite-horizon backup over key states. transitions[i][a][j] is the
/// probability of landing in state j when action a is taken in state i; each
/// row must be normalized. Runs `lookahead` sweeps of
///   V(i) <- g(i) + min_a sum_j P[i][a][j] V(j)
/// stopping early once the largest update falls under tol. The result is
/// flagged unconverged only when max_iters cuts the horizon short.
inline ValueIterationResult value_iteration(
    const std::vector<std::vector<std::vector<double>>>& transitions,
    const std::vector<double>& instant_costs, int lookahead, double tol = 1e-6,
    int max_iters = 100) {
  std::size_t n = instant_costs.size();
  if (transitions.size() != n)
    throw std::invalid_argument("transition table size mismatch");
  for (const auto& actions : transitions) {
    if (actions.empty()) throw std::invalid_argument("state with no actions");
    for (const auto& row : actions) {
      if (row.size() != n) throw std::invalid_argument("transition row size mismatch");
      double sum = 0.0;
      for (double p : row) {
        if (p < -1e-12) throw std::invalid_argument("negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("transition row not normalized");
    }
  }

  ValueIterationResult result;
  result.values.assign(n, 0.0);
  int horizon = std::min(lookahead, max_iters);
  std::vector<double> next(n, 0.0);
  for (int sweep = 0; sweep < horizon; ++sweep) {
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& row : transitions[i]) {
        double expect = 0.0;
        for (std::size_t j = 0; j < n; ++j) expect += row[j] * result.values[j];
        best = std::min(best, expect);
      }
      next[i] = instant_costs[i] + best;
      delta = std::max(delta, std::abs(next[i] - result.values[i]));
    }
    result.values = next;
    ++result.sweeps;
    if (delta < tol) {
      result.converged = true;
      return result;
    }
  }
  result.converged = lookahead <= max_iters;
  return result;
}

/// Per-interval brownout actions: vm -> optional component ids to switch off.
struct DeactivationPlan {
  std::map<VmId, std::vector<ComponentId>> deactivations;

  bool empty() const { return deactivations.empty(); }

  std::size_t component_count() const {
    std::size_t n = 0;
    for (const auto& [vm, comps] : deactivations) n += comps.size();
    return n;
  }
};

/// Candidate ranking cost for the controller. The energy term enters as the
/// projected mean system power in watts over the interval rather than kWh,
/// which puts the two terms of the trade-off on scales where the discount
/// weight spans its useful range; reported energy stays in kWh.
inline double decision_cost(double mean_power_w, double discount, double lambda) {
  return mean_power_w + lambda * discount;
}

namespace detail {

/// Effective utilization of a VM with a candidate deactivation set applied
/// on top of the current activation flags.
inline double utilization_with_deactivated(const VmState& vm,
                                           const std::vector<std::size_t>& deactivated) {
  double all = vm.share_sum();
  if (all <= 0.0) return 0.0;
  double active = 0.0;
  for (std::size_t i = 0; i < vm.components.size(); ++i) {
    const auto& c = vm.components[i];
    if (!c.active) continue;
    if (std::find(deactivated.begin(), deactivated.end(), i) != deactivated.end()) continue;
    active += c.utilization;
  }
  return vm.traced_u * (active / all);
}

/// Host power with one VM's utilization overridden by a candidate value.
inline double host_power_with_override(const DatacenterState& state, const HostState& host,
                                       VmId override_vm, double override_util, bool weighted) {
  std::vector<WeightedUtil> utils;
  utils.reserve(host.vm_ids.size());
  for (VmId v : host.vm_ids) {
    const VmState& vm = state.vm(v);
    double u = (v == override_vm) ? override_util : vm.effective_utilization();
    utils.push_back({u, vm_weight(vm, host, weighted)});
  }
  return host_power(host, utils);
}

inline int max_components_per_vm(const DatacenterState& state) {
  std::size_t c = 0;
  for (const auto& vm : state.vms) c = std::max(c, vm.components.size());
  return static_cast<int>(c);
}

inline double total_power_now(const DatacenterState& state, bool weighted) {
  double total = 0.0;
  for (const auto& h : state.hosts) total += host_power_now(state, h, weighted);
  return total;
}

}  // namespace detail

/// MDP-based component selection. For each VM on an overloaded host the key
/// states are ranked by the value iteration backup of their projected system
/// cost (all other VMs held at their current state); the best strictly
/// improving candidate joins the plan. Ties resolve toward less discount,
/// then fewer deactivated categories.
inline DeactivationPlan bmdp_select(const DatacenterState& state, const SimConfig& cfg,
                                    const OverloadWindow& window) {
  DeactivationPlan plan;
  if (state.hosts.empty()) return plan;

  std::vector<HostId> overloaded = detect_overloaded(state, cfg);
  double m_hat = estimate_overloaded(window, static_cast<int>(overloaded.size()));
  double theta = dimmer(m_hat, static_cast<int>(state.hosts.size()));
  if (theta == 0.0 || overloaded.empty()) return plan;

  const bool weighted = cfg.weighted_utilization;
  const int num_categories = detail::max_components_per_vm(state);
  const double base_total_power = detail::total_power_now(state, weighted);
  const double base_discount = interval_discount(state.vms);

  for (HostId host_id : overloaded) {
    const HostState& host = state.host(host_id);
    const double base_host_power = host_power_now(state, host, weighted);

    std::vector<VmId> vm_order(host.vm_ids.begin(), host.vm_ids.end());
    std::sort(vm_order.begin(), vm_order.end());
    for (VmId vm_id : vm_order) {
      const VmState& vm = state.vm(vm_id);
      std::vector<RatioCategory> cats = categorize(vm, num_categories);
      if (cats.empty()) continue;
      std::vector<KeyState> states = enumerate_key_states(vm, cats);
      if (states.size() < 2) continue;

      std::size_t n = states.size();
      std::vector<double> costs(n);
      for (std::size_t k = 0; k < n; ++k) {
        double util_k = detail::utilization_with_deactivated(vm, states[k].deactivated);
        double host_power_k =
            detail::host_power_with_override(state, host, vm_id, util_k, weighted);
        double power_k = base_total_power - base_host_power + host_power_k;
        double discount_k = base_discount + states[k].discount;
        costs[k] = decision_cost(power_k, discount_k, cfg.lambda);
      }

      // action a from state i: attempt the move to state a; it lands with
      // probability theta * (mass of the categories flipped), else stays.
      std::vector<std::vector<std::vector<double>>> transitions(
          n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < n; ++a) {
          double flipped_mass = 0.0;
          int lo = std::min(states[i].deactivated_prefix, states[a].deactivated_prefix);
          int hi = std::max(states[i].deactivated_prefix, states[a].deactivated_prefix);
          int ncats = static_cast<int>(cats.size());
          for (int k = lo; k < hi; ++k) {
            // prefix k+1 adds category (ncats - 1 - k) counted from the top
            flipped_mass += cats[static_cast<std::size_t>(ncats - 1 - k)].mass;
          }
          double p = (i == a) ? 1.0 : transition_probability(theta, flipped_mass);
          transitions[i][a][a] += p;
          transitions[i][a][i] += 1.0 - p;
        }
      }

      ValueIterationResult vi =
          value_iteration(transitions, costs, cfg.mdp_lookahead, 1e-6, 100);

      std::size_t best = 0;
      for (std::size_t k = 1; k < n; ++k) {
        double dv = vi.values[k] - vi.values[best];
        if (dv < 0.0 ||
            (dv == 0.0 && states[k].discount < states[best].discount)) {
          best = k;
        }
      }
      if (best != 0 && !states[best].deactivated.empty()) {
        std::vector<ComponentId>& out = plan.deactivations[vm_id];
        for (std::size_t idx : states[best].deactivated)
          out.push_back(vm.components[idx].id);
        std::sort(out.begin(), out.end());
      }
    }
  }
  return plan;
}

/// Greedy heuristic baseline: on each overloaded host, deactivate optional
/// components in descending u/d order until the deactivated host-level
/// utilization reaches the expected reduction for that host.
inline DeactivationPlan huprfcs_select(const DatacenterState& state, const SimConfig& cfg,
                                       const OverloadWindow& window) {
  DeactivationPlan plan;
  if (state.hosts.empty()) return plan;

  std::vector<HostId> overloaded = detect_overloaded(state, cfg);
  double m_hat = estimate_overloaded(window, static_cast<int>(overloaded.size()));
  double theta = dimmer(m_hat, static_cast<int>(state.hosts.size()));
  if (theta == 0.0 || overloaded.empty()) return plan;

  const bool weighted = cfg.weighted_utilization;
  for (HostId host_id : overloaded) {
    const HostState& host = state.host(host_id);
    double util = host_utilization(state, host, weighted);
    double overshoot = util - cfg.overload_threshold;
    double target = std::max(theta * (util - cfg.overload_threshold), overshoot);
    if (target <= 0.0) continue;

    struct Entry {
      double ratio;
      VmId vm_id;
      ComponentId comp_id;
      std::size_t comp_index;
      double contribution;  // host-utilization removed when deactivated
    };
    std::vector<Entry> entries;
    for (VmId vm_id : host.vm_ids) {
      const VmState& vm = state.vm(vm_id);
      double share = vm.share_sum();
      if (share <= 0.0) continue;
      double w = vm_weight(vm, host, weighted);
      for (std::size_t i = 0; i < vm.components.size(); ++i) {
        const auto& c = vm.components[i];
        if (c.mandatory || !c.active) continue;
        double ratio = c.discount > 0.0 ? c.utilization / c.discount
                                        : std::numeric_limits<double>::infinity();
        double contribution = vm.traced_u * (c.utilization / share) * w;
        entries.push_back({ratio, vm_id, c.id, i, contribution});
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.ratio != b.ratio) return a.ratio > b.ratio;
      if (a.vm_id != b.vm_id) return a.vm_id < b.vm_id;
      return a.comp_id < b.comp_id;
    });

    std::map<VmId, std::size_t> planned_per_vm;
    double cumulative = 0.0;
    for (const Entry& e : entries) {
      if (cumulative >= target) break;
      const VmState& vm = state.vm(e.vm_id);
      if (vm.fully_optional()) {
        std::size_t active_optional = 0;
        for (const auto& c : vm.components)
          if (!c.mandatory && c.active) ++active_optional;
        // keep at least one component of an all-optional app alive
        if (planned_per_vm[e.vm_id] + 1 >= active_optional) continue;
      }
      std::vector<ComponentId>& out = plan.deactivations[e.vm_id];
      out.push_back(e.comp_id);
      planned_per_vm[e.vm_id] += 1;
      cumulative += e.contribution;
    }
    for (auto& [vm_id, comps] : plan.deactivations) std::sort(comps.begin(), comps.end());
  }
  return plan;
}

/// Flips the planned components inactive. The engine reactivates every
/// optional component at the start of the next interval, so plans only ever
/// apply to the interval they were computed for.
inline void apply_plan(DatacenterState& state, const DeactivationPlan& plan) {
  for (const auto& [vm_id, comp_ids] : plan.deactivations) {
    VmState& vm = state.vm(vm_id);
    for (ComponentId cid : comp_ids) {
      bool found = false;
      for (auto& c : vm.components) {
        if (c.id != cid) continue;
        if (c.mandatory)
          throw std::invalid_argument("plan deactivates a mandatory component");
        c.active = false;
        found = true;
        break;
      }
      if (!found) throw std::invalid_argument("plan references unknown component");
    }
  }
}

/// Reactivates every optional component (mandatory ones are always active).
inline void reset_components(DatacenterState& state) {
  for (auto& vm : state.vms)
    for (auto& c : vm.components) c.active = true;
}

}  // namespace brownsim
