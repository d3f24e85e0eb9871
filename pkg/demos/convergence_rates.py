"""
Adapted meshes hit the optimal rate; shape-blind meshes pay for anisotropy.

Two experiments on the strongly anisotropic quadratic x^2 + 100 y^2:

1. greedy (metric-adapted) refinement vs euclidean longest-edge
   refinement at matched triangle budgets: the adapted mesh wins by the
   anisotropy factor, not by a constant;
2. the product N * error along the greedy run, normalized by the hessian
   tau-norm that governs the best possible constant: it plateaus.
"""
from anisomesh import (
    GreedyConfig,
    RefinementForest,
    StopRule,
    convergence_study,
    get_field,
    global_error,
    greedy_run,
    hessian_tau_norm,
    tau_from_p,
    uniform_refine,
)
from anisomesh.engine import initial_mesh

P = 2.0
f = get_field("aniso-100")
disk = get_field("disk")  # euclidean metric: drives shape-regular refinement

print("target: q = x^2 + 100 y^2 on the unit square, L2 interpolation error\n")
print(f"{'N':>6} {'adapted error':>14} {'euclidean error':>16} {'gain':>6}")
for levels in (4, 6, 8, 10):
    n = 2 * 2 ** levels
    greedy_forest, _ = greedy_run(f, GreedyConfig(
        p=P, stop=StopRule("target-count", n), initial="unit-square"))
    shape_regular = RefinementForest(initial_mesh("unit-square"))
    # edge choice driven by the euclidean metric == plain longest-edge
    uniform_refine(shape_regular, disk, GreedyConfig(p=P), levels)
    e_adapted = global_error(greedy_forest, f, P)
    e_regular = global_error(shape_regular, f, P)
    print(f"{n:>6} {e_adapted:>14.4e} {e_regular:>16.4e} "
          f"{e_regular / e_adapted:>6.1f}x")

print("\nthe gain keeps growing toward the anisotropy ratio sqrt(100) = 10:")
print("long-thin triangles aligned with the metric buy a constant factor")
print("the shape-regular mesh can never recover.\n")

tau = tau_from_p(P)
target = hessian_tau_norm(f, initial_mesh("unit-square"), tau)
print(f"optimal-rate yardstick ||sqrt|det d2f|||_Ltau = {target:.4f} "
      f"(tau = {tau:.3f})")
points = convergence_study(f, GreedyConfig(p=P, initial="unit-square"),
                           [64, 256, 1024, 4096])
print(f"{'N':>6} {'error':>12} {'N * error':>10} {'ratio to target':>15}")
for pt in points:
    print(f"{pt.n:>6} {pt.error:>12.4e} {pt.product:>10.4f} {pt.ratio:>15.3f}")
print("\nN * error is flat: the greedy mesh realizes the 1/N rate with a")
print("bounded constant, which is what optimality means at finite N.")
