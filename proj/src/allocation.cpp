#include "rdopt/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"

namespace rdopt {

namespace {

// Comparisons against the quality floors absorb arithmetic reordering.
constexpr double kFeasTol = 1e-9;

void validate_constraints(const QualityConstraints& c) {
  if (!std::isfinite(c.min_avg_quality) || !std::isfinite(c.min_worst_quality))
    throw ValidationError("quality constraints must be finite");
}

// Shared discrete-allocation core over per-unit curves (rows = clusters or
// chunks, cols = grid indices).
struct Instance {
  const Mat& rates;
  const Mat& quals;
  const Vec& weights;
  const OperatingPointGrid& grid;
  QualityConstraints c;

  int units() const { return static_cast<int>(rates.rows()); }
  int s() const { return static_cast<int>(rates.cols()); }

  bool worst_ok(int unit, int j) const {
    return quals(unit, j) >= c.min_worst_quality - kFeasTol;
  }

  AllocationSolution package(const std::vector<int>& op_index, double lambda,
                             bool exact) const {
    AllocationSolution sol;
    sol.op_index = op_index;
    sol.op_values.resize(units());
    double rate = 0.0, quality = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    for (int l = 0; l < units(); ++l) {
      const int j = op_index[l];
      sol.op_values[l] = grid.points[j];
      rate += weights[l] * rates(l, j);
      quality += weights[l] * quals(l, j);
      worst = std::min(worst, quals(l, j));
    }
    sol.avg_rate = rate;
    sol.avg_quality = quality;
    sol.worst_quality = worst;
    sol.lambda_star = lambda;
    sol.exact = exact;
    return sol;
  }
};

// Throws when no assignment can satisfy the constraints, naming the one
// that binds.
void check_feasibility(const Instance& inst) {
  for (int l = 0; l < inst.units(); ++l) {
    bool any = false;
    for (int j = 0; j < inst.s(); ++j)
      if (inst.worst_ok(l, j)) {
        any = true;
        break;
      }
    if (!any)
      throw InfeasibleError(
          "min_worst_quality",
          "infeasible: unit " + std::to_string(l) +
              " cannot reach min_worst_quality = " +
              std::to_string(inst.c.min_worst_quality) +
              " dB at any grid point (binding constraint: min_worst_quality)");
  }
  double max_avg = 0.0;
  for (int l = 0; l < inst.units(); ++l) {
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.s(); ++j)
      if (inst.worst_ok(l, j)) best = std::max(best, inst.quals(l, j));
    max_avg += inst.weights[l] * best;
  }
  if (max_avg < inst.c.min_avg_quality - kFeasTol)
    throw InfeasibleError(
        "min_avg_quality",
        "infeasible: maximum achievable average quality " +
            std::to_string(max_avg) + " dB is below min_avg_quality = " +
            std::to_string(inst.c.min_avg_quality) +
            " dB (binding constraint: min_avg_quality)");
}

// Per-unit argmin of rate - lambda * quality over the worst-feasible set;
// cost ties break toward higher quality, then lower index.
std::vector<int> lagrangian_selection(const Instance& inst, double lambda) {
  std::vector<int> sel(inst.units());
  for (int l = 0; l < inst.units(); ++l) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.s(); ++j) {
      if (!inst.worst_ok(l, j)) continue;
      const double cost = inst.rates(l, j) - lambda * inst.quals(l, j);
      if (best < 0 || cost < best_cost ||
          (cost == best_cost && inst.quals(l, j) > inst.quals(l, best))) {
        best = j;
        best_cost = cost;
      }
    }
    sel[l] = best;
  }
  return sel;
}

double avg_quality_of(const Instance& inst, const std::vector<int>& sel) {
  double q = 0.0;
  for (int l = 0; l < inst.units(); ++l) q += inst.weights[l] * inst.quals(l, sel[l]);
  return q;
}

double avg_rate_of(const Instance& inst, const std::vector<int>& sel) {
  double r = 0.0;
  for (int l = 0; l < inst.units(); ++l) r += inst.weights[l] * inst.rates(l, sel[l]);
  return r;
}

// Units with bit-identical curves, merged so that symmetric instances move
// symmetrically during refinement.
struct UnitGroups {
  std::vector<std::vector<int>> members;  // group -> unit indices
  Vec weights;                            // summed member weights
};

UnitGroups group_identical_units(const Instance& inst) {
  std::map<std::vector<double>, int> index;
  UnitGroups groups;
  std::vector<double> key(2 * inst.s());
  for (int l = 0; l < inst.units(); ++l) {
    for (int j = 0; j < inst.s(); ++j) {
      key[j] = inst.rates(l, j);
      key[inst.s() + j] = inst.quals(l, j);
    }
    const auto [it, inserted] =
        index.emplace(key, static_cast<int>(groups.members.size()));
    if (inserted) groups.members.emplace_back();
    groups.members[it->second].push_back(l);
  }
  groups.weights.resize(groups.members.size());
  for (std::size_t g = 0; g < groups.members.size(); ++g) {
    double w = 0.0;
    for (const int l : groups.members[g]) w += inst.weights[l];
    groups.weights[g] = w;
  }
  return groups;
}

// Descent from a feasible selection toward the constraint surface. Moves
// are tried at group granularity first (keeping identical units aligned),
// then per unit, with pairwise exchanges that trade quality between two
// coordinates when the instance is small enough. Every accepted move
// strictly reduces the average rate while keeping both floors satisfied,
// so this fills the gap between the hull vertices reachable by bisection
// and the discrete optimum.
class SelectionRefiner {
 public:
  SelectionRefiner(const Instance& inst, const UnitGroups& groups)
      : inst_(inst), groups_(groups) {}

  void run(std::vector<int>& sel) {
    const int move_cap = 64 * inst_.units() * inst_.s();
    for (int moves = 0; moves < move_cap; ++moves)
      if (!step_groups(sel) && !step_units(sel)) return;
  }

 private:
  // representative unit of a group whose members all share one index, -1
  // if the group has been split by unit-level moves
  int aligned_at(const std::vector<int>& sel, std::size_t g) const {
    const int j = sel[groups_.members[g][0]];
    for (const int l : groups_.members[g])
      if (sel[l] != j) return -1;
    return groups_.members[g][0];
  }

  bool step_groups(std::vector<int>& sel) {
    const auto n = static_cast<int>(groups_.members.size());
    if (n == inst_.units()) return false;  // all groups are singletons
    const double avg_q = avg_quality_of(inst_, sel);
    int best_g = -1, best_j = -1;
    double best_delta = 0.0;
    for (int g = 0; g < n; ++g) {
      const int rep = aligned_at(sel, g);
      if (rep < 0) continue;
      for (int j = 0; j < inst_.s(); ++j) {
        if (j == sel[rep] || !inst_.worst_ok(rep, j)) continue;
        const double delta =
            groups_.weights[g] * (inst_.rates(rep, j) - inst_.rates(rep, sel[rep]));
        if (delta >= best_delta) continue;
        const double new_q =
            avg_q +
            groups_.weights[g] * (inst_.quals(rep, j) - inst_.quals(rep, sel[rep]));
        if (new_q >= inst_.c.min_avg_quality - kFeasTol) {
          best_delta = delta;
          best_g = g;
          best_j = j;
        }
      }
    }
    if (best_g < 0) return false;
    for (const int l : groups_.members[best_g]) sel[l] = best_j;
    return true;
  }

  bool step_units(std::vector<int>& sel) {
    const double avg_q = avg_quality_of(inst_, sel);
    int best_l = -1, best_j = -1;
    double best_delta = 0.0;
    for (int l = 0; l < inst_.units(); ++l) {
      for (int j = 0; j < inst_.s(); ++j) {
        if (j == sel[l] || !inst_.worst_ok(l, j)) continue;
        const double delta =
            inst_.weights[l] * (inst_.rates(l, j) - inst_.rates(l, sel[l]));
        if (delta >= best_delta) continue;
        const double new_q =
            avg_q + inst_.weights[l] * (inst_.quals(l, j) - inst_.quals(l, sel[l]));
        if (new_q >= inst_.c.min_avg_quality - kFeasTol) {
          best_delta = delta;
          best_l = l;
          best_j = j;
        }
      }
    }
    if (best_l >= 0) {
      sel[best_l] = best_j;
      return true;
    }
    const int choices = inst_.units() * inst_.s();
    if (choices > 4096) return false;
    if (step_pair(sel, avg_q)) return true;
    return choices <= 256 && step_triple(sel, avg_q);
  }

  bool step_pair(std::vector<int>& sel, double avg_q) {
    int best_l1 = -1, best_j1 = -1, best_l2 = -1, best_j2 = -1;
    double best_delta = 0.0;
    for (int l1 = 0; l1 < inst_.units(); ++l1) {
      for (int j1 = 0; j1 < inst_.s(); ++j1) {
        if (j1 == sel[l1] || !inst_.worst_ok(l1, j1)) continue;
        const double d1 =
            inst_.weights[l1] * (inst_.rates(l1, j1) - inst_.rates(l1, sel[l1]));
        const double q1 =
            inst_.weights[l1] * (inst_.quals(l1, j1) - inst_.quals(l1, sel[l1]));
        for (int l2 = l1 + 1; l2 < inst_.units(); ++l2) {
          for (int j2 = 0; j2 < inst_.s(); ++j2) {
            if (j2 == sel[l2] || !inst_.worst_ok(l2, j2)) continue;
            const double delta =
                d1 + inst_.weights[l2] *
                         (inst_.rates(l2, j2) - inst_.rates(l2, sel[l2]));
            if (delta >= best_delta) continue;
            const double new_q =
                avg_q + q1 +
                inst_.weights[l2] *
                    (inst_.quals(l2, j2) - inst_.quals(l2, sel[l2]));
            if (new_q >= inst_.c.min_avg_quality - kFeasTol) {
              best_delta = delta;
              best_l1 = l1;
              best_j1 = j1;
              best_l2 = l2;
              best_j2 = j2;
            }
          }
        }
      }
    }
    if (best_l1 < 0) return false;
    sel[best_l1] = best_j1;
    sel[best_l2] = best_j2;
    return true;
  }

  // three-coordinate exchanges; the rare instances stuck after pair moves
  // need one up-move financing two down-moves (or vice versa)
  bool step_triple(std::vector<int>& sel, double avg_q) {
    struct Move {
      int l, j;
      double dr, dq;
    };
    std::vector<Move> moves;
    for (int l = 0; l < inst_.units(); ++l)
      for (int j = 0; j < inst_.s(); ++j) {
        if (j == sel[l] || !inst_.worst_ok(l, j)) continue;
        moves.push_back(
            {l, j,
             inst_.weights[l] * (inst_.rates(l, j) - inst_.rates(l, sel[l])),
             inst_.weights[l] * (inst_.quals(l, j) - inst_.quals(l, sel[l]))});
      }
    const Move* best[3] = {nullptr, nullptr, nullptr};
    double best_delta = 0.0;
    for (std::size_t i1 = 0; i1 < moves.size(); ++i1) {
      for (std::size_t i2 = i1 + 1; i2 < moves.size(); ++i2) {
        if (moves[i2].l == moves[i1].l) continue;
        const double dr12 = moves[i1].dr + moves[i2].dr;
        const double dq12 = moves[i1].dq + moves[i2].dq;
        for (std::size_t i3 = i2 + 1; i3 < moves.size(); ++i3) {
          if (moves[i3].l == moves[i1].l || moves[i3].l == moves[i2].l) continue;
          const double delta = dr12 + moves[i3].dr;
          if (delta >= best_delta) continue;
          if (avg_q + dq12 + moves[i3].dq >= inst_.c.min_avg_quality - kFeasTol) {
            best_delta = delta;
            best[0] = &moves[i1];
            best[1] = &moves[i2];
            best[2] = &moves[i3];
          }
        }
      }
    }
    if (!best[0]) return false;
    for (const Move* m : best) sel[m->l] = m->j;
    return true;
  }

  const Instance& inst_;
  const UnitGroups& groups_;
};

AllocationSolution solve_instance(const Instance& inst) {
  check_feasibility(inst);

  // cheapest worst-feasible point per unit == the lambda = 0 selection
  std::vector<int> cheapest = lagrangian_selection(inst, 0.0);
  if (avg_quality_of(inst, cheapest) >= inst.c.min_avg_quality - kFeasTol)
    return inst.package(cheapest, 0.0, false);

  // every distinct constraint-satisfying selection seen anywhere is a
  // candidate; each one seeds the descent below
  std::map<std::vector<int>, double> candidates;  // selection -> lambda
  const auto consider = [&](const std::vector<int>& sel, double lambda) -> bool {
    const bool ok = avg_quality_of(inst, sel) >= inst.c.min_avg_quality - kFeasTol;
    if (ok) candidates.emplace(sel, lambda);
    return ok;
  };

  // grow the bracket until the average constraint is met
  double lo = 0.0, hi = 1.0;
  bool bracketed = consider(lagrangian_selection(inst, hi), hi);
  while (!bracketed && hi < 1e18) {
    lo = hi;
    hi *= 2.0;
    bracketed = consider(lagrangian_selection(inst, hi), hi);
  }
  if (!bracketed) {
    // cost ties at huge lambda can hide the top-quality selection; take it
    // directly (check_feasibility guarantees it satisfies the average floor)
    std::vector<int> top(inst.units());
    for (int l = 0; l < inst.units(); ++l) {
      int best = -1;
      for (int j = 0; j < inst.s(); ++j) {
        if (!inst.worst_ok(l, j)) continue;
        if (best < 0 || inst.quals(l, j) > inst.quals(l, best) ||
            (inst.quals(l, j) == inst.quals(l, best) &&
             inst.rates(l, j) < inst.rates(l, best)))
          best = j;
      }
      top[l] = best;
    }
    consider(top, hi);
  } else {
    for (int iter = 0; iter < 100 && hi - lo > 1e-9 * std::max(hi, 1.0); ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (consider(lagrangian_selection(inst, mid), mid))
        hi = mid;
      else
        lo = mid;
    }
    // both endpoints at termination
    const std::vector<int> sel_lo = lagrangian_selection(inst, lo);
    const std::vector<int> sel_hi = lagrangian_selection(inst, hi);
    consider(sel_lo, lo);
    consider(sel_hi, hi);

    // the optimum off the hull vertices mixes the two breakpoint
    // selections; enumerate the mixes over the units that differ
    std::vector<int> differing;
    for (int l = 0; l < inst.units(); ++l)
      if (sel_lo[l] != sel_hi[l]) differing.push_back(l);
    if (!differing.empty() && differing.size() <= 12) {
      const std::size_t combos = std::size_t{1} << differing.size();
      for (std::size_t mask = 1; mask + 1 < combos; ++mask) {
        std::vector<int> mix = sel_hi;
        for (std::size_t b = 0; b < differing.size(); ++b)
          if (mask & (std::size_t{1} << b)) mix[differing[b]] = sel_lo[differing[b]];
        consider(mix, hi);
      }
    }
  }

  // descend from every candidate basin; cheapest refined selection wins,
  // with quality floors as the tie-breakers
  const UnitGroups groups = group_identical_units(inst);
  SelectionRefiner refiner(inst, groups);
  std::vector<int> best_sel;
  double best_rate = std::numeric_limits<double>::infinity();
  double best_worst = -std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  for (const auto& [seed, lambda] : candidates) {
    std::vector<int> sel = seed;
    refiner.run(sel);
    const double rate = avg_rate_of(inst, sel);
    double worst = std::numeric_limits<double>::infinity();
    for (int l = 0; l < inst.units(); ++l)
      worst = std::min(worst, inst.quals(l, sel[l]));
    if (rate < best_rate || (rate == best_rate && worst > best_worst)) {
      best_rate = rate;
      best_worst = worst;
      best_sel = std::move(sel);
      best_lambda = lambda;
    }
  }
  return inst.package(best_sel, best_lambda, false);
}

Vec uniform_weights(int n) { return Vec::Constant(n, 1.0 / double(n)); }

}  // namespace

void validate(const CorpusDistribution& w) {
  if (w.weights.size() == 0) throw ValidationError("empty corpus distribution");
  if (!w.weights.allFinite() || (w.weights.array() < 0.0).any())
    throw ValidationError("corpus weights must be finite and nonnegative");
  if (std::abs(w.weights.sum() - 1.0) > 1e-9)
    throw ValidationError("corpus weights must sum to 1 (got " +
                          std::to_string(w.weights.sum()) + ")");
}

CorpusDistribution estimate_weights(const std::vector<int>& predictions, int k) {
  if (predictions.empty())
    throw ValidationError("weight estimation needs at least one prediction");
  if (k < 1) throw ValidationError("weight estimation needs k >= 1");
  std::vector<long long> counts(k, 0);
  for (const int p : predictions) {
    if (p < 0 || p >= k)
      throw ValidationError("prediction " + std::to_string(p) +
                            " outside [0, " + std::to_string(k) + ")");
    ++counts[p];
  }
  CorpusDistribution w;
  w.weights.resize(k);
  for (int l = 0; l < k; ++l)
    w.weights[l] = double(counts[l]) / double(predictions.size());
  return w;
}

AllocationSolution solve_allocation(const ClusterModel& model,
                                    const CorpusDistribution& w,
                                    const QualityConstraints& c) {
  validate(model);
  validate(w);
  validate_constraints(c);
  if (w.weights.size() != model.k)
    throw ValidationError("weights length does not match model k");
  const Mat rates = centroid_rate_matrix(model);
  const Mat quals = centroid_quality_matrix(model);
  return solve_instance({rates, quals, w.weights, model.grid, c});
}

AllocationSolution exhaustive_allocation(const ClusterModel& model,
                                         const CorpusDistribution& w,
                                         const QualityConstraints& c) {
  validate(model);
  validate(w);
  validate_constraints(c);
  if (w.weights.size() != model.k)
    throw ValidationError("weights length does not match model k");
  const int s = model.grid.size();
  double combos = 1.0;
  for (int l = 0; l < model.k; ++l) {
    combos *= s;
    if (combos > 1e7)
      throw ValidationError("exhaustive allocation limited to s^k <= 1e7");
  }

  const Mat rates = centroid_rate_matrix(model);
  const Mat quals = centroid_quality_matrix(model);
  const Instance inst{rates, quals, w.weights, model.grid, c};
  check_feasibility(inst);

  std::vector<int> combo(model.k, 0);
  std::vector<int> best;
  double best_rate = std::numeric_limits<double>::infinity();
  while (true) {
    double quality = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    for (int l = 0; l < model.k; ++l) {
      quality += w.weights[l] * quals(l, combo[l]);
      worst = std::min(worst, quals(l, combo[l]));
    }
    if (worst >= c.min_worst_quality - kFeasTol &&
        quality >= c.min_avg_quality - kFeasTol) {
      double rate = 0.0;
      for (int l = 0; l < model.k; ++l) rate += w.weights[l] * rates(l, combo[l]);
      // lexicographic enumeration order; strict < keeps the lex-smallest tie
      if (rate < best_rate) {
        best_rate = rate;
        best = combo;
      }
    }
    // odometer increment, last index fastest
    int pos = model.k - 1;
    while (pos >= 0 && combo[pos] == s - 1) combo[pos--] = 0;
    if (pos < 0) break;
    ++combo[pos];
  }
  return inst.package(best, 0.0, true);
}

AllocationSolution per_chunk_allocation(const RDDataset& dataset,
                                        const QualityConstraints& c) {
  validate(dataset);
  validate_constraints(c);
  if (dataset.size() == 0)
    throw ValidationError("per-chunk allocation needs at least one sample");
  const int n = dataset.size();
  const int s = dataset.grid.size();
  Mat rates(n, s), quals(n, s);
  for (int i = 0; i < n; ++i) {
    rates.row(i) = dataset.samples[i].rates;
    quals.row(i) = dataset.samples[i].qualities;
  }
  const Vec w = uniform_weights(n);
  return solve_instance({rates, quals, w, dataset.grid, c});
}

}  // namespace rdopt
