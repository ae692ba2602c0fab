#pragma once

#include "htlab/network.hpp"

#include <optional>

namespace htlab {

/// Workload matrix Lambda, the nonnegative G with Lambda R = G K, and the
/// constant c with |G u|_1 >= c |u|_1 for u >= 0.
struct WorkloadData {
  Matrix Lambda;  // L x I
  Matrix G;       // L x (K + J - B)
  double lower_norm_c = 0.0;

  int dim() const { return static_cast<int>(Lambda.rows()); }
};

/// `lambda == nullopt` requests the canonical single-server construction
/// Lambda (C - P') = (1/beta_j)_j, which needs K = 1.
WorkloadData build_workload(const HeavyTrafficData& htd, const std::optional<Matrix>& lambda);

/// min { h·q : Lambda q = w, q >= 0 }. Throws NotInWorkloadSpace when w is not
/// reachable from a nonnegative q.
double effective_cost(const WorkloadData& wd, const Vector& h, const Vector& w);

/// A minimiser of the effective cost LP; among optimal points the
/// lexicographically smallest is returned.
Vector lift(const WorkloadData& wd, const Vector& h, const Vector& w);

struct EffectiveGap {
  double holding = 0.0;    // h·q
  double effective = 0.0;  // hhat(Lambda q)
  double gap = 0.0;        // holding - effective
  bool ok = true;          // gap >= -1e-9
};

EffectiveGap check_effective_inequality(const WorkloadData& wd, const Vector& h, const Vector& q);

}  // namespace htlab
