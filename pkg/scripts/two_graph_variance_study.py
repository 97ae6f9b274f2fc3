"""Spread of the destabilized two-graph state, (kappa, K) = (1/3, -0.7).

Integrates the complete-graph plus nearest-neighbour system from near-constant
phases and reports several spread measures of the final state together with
the equilibrium residual, so the circular-variance threshold can be judged
against what the dynamics actually settle to.

    python3 scripts/two_graph_variance_study.py --n 200 1000 --t-end 1000
"""
import argparse
import json

import numpy as np

from graphon_kuramoto import analysis as an
from graphon_kuramoto.dynamics import (DiscreteSystem, circular_mean, circular_variance, integrate,
                                       near_constant_state, wrap_phase)
from graphon_kuramoto.kernels import CouplingFunction, Graphon
from graphon_kuramoto.network import DETERMINISTIC_DENSE, GraphLayer


def study(n: int, K: float, kappa: float, t_end: float, dt: float, seed: int) -> dict:
    layers = [GraphLayer(Graphon.constant(1.0), CouplingFunction.sine(), DETERMINISTIC_DENSE),
              GraphLayer(Graphon.nearest_neighbor(kappa),
                         CouplingFunction.scaled(K, CouplingFunction.double_sine()), DETERMINISTIC_DENSE,
                         layer_id=1)]
    sys = DiscreteSystem.from_layers(layers, n)
    traj = integrate(sys, near_constant_state(n, 0.0, 1e-4, seed), t_end, dt, sample_every=10 ** 9)
    u = traj.final.u
    r = wrap_phase(u - circular_mean(u))
    R = 1 - circular_variance(u)
    return {"n": n, "K": K, "kappa": kappa, "t_end": t_end,
            "circular_variance": circular_variance(u), "one_minus_R2": 1 - R * R,
            "phase_variance": float(np.var(r)), "peak_to_peak": float(np.ptp(r)),
            "dominant_mode": an.dominant_mode(u),
            "rhs_sup": float(np.max(np.abs(sys.rhs(t_end, u)))),
            "linear_growth_rate_l2": an.two_graph_eigenvalue(K, kappa, 2)}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, nargs="+", default=[200])
    p.add_argument("--K", type=float, nargs="+", default=[-0.7, 0.0])
    p.add_argument("--kappa", type=float, default=1 / 3)
    p.add_argument("--t-end", type=float, default=1000.0)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args(argv)
    for n in args.n:
        for K in args.K:
            print(json.dumps(study(n, K, args.kappa, args.t_end, args.dt, args.seed), sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
