"""Config-tree builders and experiment runners shared by the CLI and scripts.

A config is a plain dict (parsed YAML). Runners return an ``ExperimentResult``
holding a JSON-able summary and a list of file writers; nothing is written
until the caller decides where.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analysis as an
from .dynamics import (DiscreteSystem, Intrinsic, PhaseState, circular_variance,
                       discrete_l2_norm, integrate, initial_from_profile, order_parameter)
from .errors import ConfigError
from .kernels import CouplingFunction, Graphon, ScalarProfile
from .network import (DETERMINISTIC_DENSE, GraphLayer, WeightMatrix, write_binary,
                      write_edge_csv, write_pgm)

EXPERIMENTS = ("simulate", "sync-solve", "stability", "design", "sweep-delta",
               "sweep-boundary", "averaged-compare")


@dataclass
class ExperimentResult:
    summary: dict
    writers: list = field(default_factory=list)  # (filename, fn(path))

    def add(self, name: str, fn: Callable) -> None:
        self.writers.append((name, fn))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit child seed for a purpose identified by ``keys``."""
    state = np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


# ---------------------------------------------------------------------------
# Builders


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"missing field {path}.{key}", field=f"{path}.{key}")
    return d[key]


def build_profile(d: dict, path: str = "profile") -> ScalarProfile:
    kind = _need(d, "kind", path)
    try:
        if kind == "constant":
            return ScalarProfile.constant(_need(d, "c", path))
        if kind == "linear":
            return ScalarProfile.linear(_need(d, "a", path))
        if kind == "piecewise":
            if "values" in d:
                return ScalarProfile.piecewise(_need(d, "breaks", path), d["values"])
            return ScalarProfile.piecewise(_need(d, "breaks", path), left=_need(d, "left", path),
                                           right=_need(d, "right", path))
        if kind == "step":
            return ScalarProfile.step(_need(d, "values", path))
        if kind == "sine":
            amp, freq, shift = d.get("amplitude", 1.0), d.get("frequency", 1.0), d.get("shift", 0.0)
            return ScalarProfile.callback(lambda x: shift + amp * np.sin(2 * np.pi * freq * x))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}", field=path) from exc
    raise ConfigError(f"unknown profile kind {kind!r}", field=f"{path}.kind")


def build_graphon(d: dict, path: str = "graphon") -> Graphon:
    kind = _need(d, "kind", path)
    try:
        if kind == "constant":
            return Graphon.constant(_need(d, "p", path))
        if kind == "nearest-neighbor":
            return Graphon.nearest_neighbor(_need(d, "kappa", path))
        if kind == "rank1":
            return Graphon.rank1(build_profile(_need(d, "h1", path), f"{path}.h1"),
                                 build_profile(_need(d, "h2", path), f"{path}.h2"),
                                 symmetric=bool(d.get("symmetric", False)))
        if kind == "table":
            return Graphon.table(_need(d, "x_breaks", path), _need(d, "y_breaks", path),
                                 _need(d, "values", path))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}", field=path) from exc
    raise ConfigError(f"unknown graphon kind {kind!r}", field=f"{path}.kind")


def build_coupling(d: dict, path: str = "coupling") -> CouplingFunction:
    kind = _need(d, "kind", path)
    base = {"sine": CouplingFunction.sine, "double-sine": CouplingFunction.double_sine,
            "constant-one": CouplingFunction.constant_one}.get(kind)
    if base is None:
        raise ConfigError(f"unknown coupling kind {kind!r}", field=f"{path}.kind")
    scale = d.get("scale")
    return base() if scale is None else CouplingFunction.scaled(scale, base())


def build_layers(system: dict, graphon_override: Optional[Graphon] = None) -> list[GraphLayer]:
    layers = system.get("layers") or []
    if not layers:
        raise ConfigError("system.layers must list at least one layer", field="system.layers")
    out = []
    for k, d in enumerate(layers):
        path = f"system.layers[{k}]"
        W = graphon_override if graphon_override is not None else build_graphon(
            _need(d, "graphon", path), f"{path}.graphon")
        try:
            out.append(GraphLayer(W, build_coupling(d.get("coupling", {"kind": "sine"}), f"{path}.coupling"),
                                  d.get("construction", DETERMINISTIC_DENSE),
                                  float(d.get("gamma", 0.0)), int(d.get("layer_id", k)),
                                  d.get("undirected")))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}: {exc}", field=path) from exc
    return out


def build_intrinsic(d: Optional[dict]) -> Intrinsic:
    if not d or d.get("kind", "zero") == "zero":
        return Intrinsic()
    if d["kind"] == "feedback":
        return Intrinsic.feedback(_need(d, "b", "system.intrinsic"), _need(d, "target", "system.intrinsic"))
    raise ConfigError(f"unknown intrinsic kind {d['kind']!r}", field="system.intrinsic.kind")


def build_initial(d: dict, n: int, seed: int) -> PhaseState:
    kind = _need(d, "kind", "system.initial")
    rng = np.random.default_rng(int(seed))
    if kind == "profile":
        return initial_from_profile(build_profile(_need(d, "profile", "system.initial"),
                                                  "system.initial.profile"), n)
    if kind == "uniform-random":
        return PhaseState(0.0, rng.uniform(float(d.get("lo", -math.pi)), float(d.get("hi", math.pi)), n))
    if kind == "near-constant":
        q, amp = float(d.get("q", 0.0)), float(_need(d, "amplitude", "system.initial"))
        return PhaseState(0.0, q + rng.uniform(-amp, amp, n))
    raise ConfigError(f"unknown initial kind {kind!r}", field="system.initial.kind")


def build_system(cfg: dict, n: int, seed: int, threads: int = 1,
                 graphon_override: Optional[Graphon] = None) -> DiscreteSystem:
    system = _need(cfg, "system", "")
    layers = build_layers(system, graphon_override)
    omega = build_profile(system["omega"], "system.omega") if system.get("omega") else None
    return DiscreteSystem.from_layers(layers, n, seed, omega=omega,
                                      intrinsic=build_intrinsic(system.get("intrinsic")),
                                      threads=threads)


def _numerics(cfg: dict) -> dict:
    num = dict(cfg.get("numerics") or {})
    num.setdefault("dt", 0.01)
    num.setdefault("sample_every", 100)
    return num


# ---------------------------------------------------------------------------
# Reference profiles


@dataclass(frozen=True)
class Reference:
    U: Callable
    theta: Optional[float]
    info: dict


def build_reference(cfg: dict) -> Optional[Reference]:
    ref = cfg.get("reference")
    if not ref:
        return None
    kind = ref.get("kind")
    if kind == "sync":
        system = cfg["system"]
        W = build_graphon(system["layers"][0]["graphon"], "system.layers[0].graphon")
        sol = an.solve_order_parameter_general(W, build_profile(system["omega"], "system.omega"))
        if not sol.exists:
            raise ConfigError("reference synchronized solution does not exist", field="reference")
        return Reference(sol.profile, None, {"kind": "sync", **sol.summary()})
    if kind == "controlled":
        a, b = float(ref["a"]), float(ref["b"])
        eta, ok = an.controlled_order_parameter(a, b)
        if not ok:
            raise ConfigError(f"b={b} is below b_min={an.controlled_b_min(a)!r}", field="reference.b")
        return Reference(lambda x: np.arcsin(2 * eta * (np.asarray(x) - 0.5)), float(ref.get("theta", 0.0)),
                         {"kind": "controlled", "eta": eta, "b_min": an.controlled_b_min(a),
                          "residual": an.controlled_residual(a, b, eta)})
    if kind == "profile":
        p = build_profile(ref["profile"], "reference.profile")
        return Reference(p, ref.get("theta"), {"kind": "profile"})
    raise ConfigError(f"unknown reference kind {kind!r}", field="reference.kind")


def state_summary(u: np.ndarray, ref: Optional[Reference]) -> dict:
    out = {"order_parameter_r": order_parameter(u), "circular_variance": circular_variance(u),
           "dominant_mode": an.dominant_mode(u) if len(u) > 2 else None,
           "l2_norm": discrete_l2_norm(u)}
    if ref is not None:
        out["theta_estimate"] = an.estimate_theta(u, ref.U)
        out["delta_n"] = an.convergence_error_delta(u, ref.U)
        if ref.theta is not None:
            target = np.asarray(ref.U(an.node_midpoints(len(u)))) + ref.theta
            out["circular_rms"] = an.circular_rms(u, target)
    return out


def _matrix_writers(res: ExperimentResult, sys: DiscreteSystem, formats) -> None:
    for k, layer in enumerate(sys.layers):
        m: WeightMatrix = layer.matrix
        if "pgm" in formats:
            res.add(f"matrix_{k}.pgm", lambda p, m=m: write_pgm(m, p))
        if "csv" in formats:
            res.add(f"matrix_{k}.csv", lambda p, m=m: write_edge_csv(m, p))
        if "bin" in formats:
            res.add(f"matrix_{k}.bin", lambda p, m=m: write_binary(m, p))


# ---------------------------------------------------------------------------
# Runners


def run_simulate(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    num = _numerics(cfg)
    n = int(_need(num, "n", "numerics"))
    sys = build_system(cfg, n, seed, threads)
    init = build_initial(_need(cfg["system"], "initial", "system"), n, derive_seed(seed, 1))
    traj = integrate(sys, init, float(_need(num, "t_end", "numerics")), float(num["dt"]),
                     int(num["sample_every"]))
    traj.meta["seed"] = seed
    ref = build_reference(cfg)
    summary = {"experiment": "simulate", "n": n, "seed": seed, "t_end": float(traj.times[-1]),
               "dt": float(num["dt"]), "final": state_summary(traj.states[-1], ref)}
    if ref is not None:
        summary["reference"] = ref.info
    res = ExperimentResult(summary)
    outputs = cfg.get("outputs") or {}
    if outputs.get("trajectory", True):
        res.add("trajectory.csv", traj.to_csv)
    if outputs.get("snapshot", True):
        res.add("snapshot.csv", traj.snapshot_csv)
    if outputs.get("trajectory_binary", False):
        res.add("trajectory.bin", traj.write_binary)
    _matrix_writers(res, sys, outputs.get("matrix", []))
    return res


def run_sync(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    system = _need(cfg, "system", "")
    W = build_graphon(system["layers"][0]["graphon"], "system.layers[0].graphon")
    omega = build_profile(_need(system, "omega", "system"), "system.omega")
    sol = an.solve_order_parameter_general(W, omega)
    summary = {"experiment": "sync-solve", "continuum": sol.summary()}
    if sol.exists:
        summary["continuum"]["companion_identity"] = an.companion_identity(sol)
    if omega.kind == "linear" and W.kind == "constant":
        eta, ok = an.solve_order_parameter_simple(omega.a / W.p)
        summary["eta"] = eta
        summary["certification_boundary_a_over_p"] = an.certification_boundary()
    n = (cfg.get("numerics") or {}).get("n")
    if n:
        sys = build_system(cfg, int(n), seed, threads)
        prof = an.sync_profile_discrete(sys, sol)
        summary["discrete"] = {"n": int(n), "exists": prof.exists, "Omega_D": prof.omega_cap,
                               "C_D": prof.order_param, "roots": list(prof.roots)}
        if prof.exists:
            rep = an.discrete_stability_check(sys, prof.U)
            summary["discrete"]["stability"] = rep.summary()
    return ExperimentResult(summary)


def run_stability(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    st = _need(cfg, "stability", "")
    if st.get("kind") == "two-graph":
        K, kappa, l_max = float(st["K"]), float(st["kappa"]), int(st.get("l_max", 10))
        rep = an.two_graph_spectrum(K, kappa, l_max)
        l, rhs, kc = an.weakest_instability(kappa, l_max)
        summary = {"experiment": "stability", "K": K, "kappa": kappa, "spectrum": rep.summary(),
                   "weakest": {"l": l, "rhs": rhs, "K_crit": kc}}
        n = st.get("n_check")
        if n:
            summary["discrete_mismatch"] = an.two_graph_spectrum_mismatch(K, kappa, int(n), min(8, l_max))
        res = ExperimentResult(summary)
        res.add("spectrum.csv", lambda p: an.write_table_csv(p, ["l", "lambda"], rep.modes))
        return res
    res = run_sync(cfg, seed, threads)
    res.summary["experiment"] = "stability"
    return res


def run_design(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    d = _need(cfg, "design", "")
    U0 = build_profile(_need(d, "U0", "design"), "design.U0")
    omega = build_profile(_need(d, "omega", "design"), "design.omega")
    des = an.inverse_design(U0, omega, float(d.get("Omega0", 0.0)), d["I_plus"], d["I_minus"])
    summary = {"experiment": "design", "design": des.summary()}
    sol = an.solve_order_parameter_general(des.graphon, omega)
    summary["round_trip"] = sol.summary()
    res = ExperimentResult(summary)
    if cfg.get("numerics", {}).get("n"):
        sim_cfg = {**cfg, "system": {**cfg.get("system", {}), "omega": d["omega"],
                                     "layers": cfg.get("system", {}).get("layers") or [{}]}}
        num = _numerics(cfg)
        n = int(num["n"])
        sys = build_system(sim_cfg, n, seed, threads, graphon_override=des.graphon)
        init = build_initial(sim_cfg["system"].get("initial", {"kind": "uniform-random"}), n,
                             derive_seed(seed, 1))
        traj = integrate(sys, init, float(num["t_end"]), float(num["dt"]), int(num["sample_every"]))
        ref = Reference(U0, None, {})
        fin = state_summary(traj.states[-1], ref)
        theta = fin["theta_estimate"]
        fin["circular_rms_after_shift"] = an.circular_rms(traj.states[-1],
                                                          U0(an.node_midpoints(n)) + theta)
        summary["simulation"] = {"n": n, "seed": seed, "final": fin}
        outputs = cfg.get("outputs") or {}
        if outputs.get("snapshot", True):
            res.add("snapshot.csv", traj.snapshot_csv)
        _matrix_writers(res, sys, outputs.get("matrix", []))
    return res


def _n_list(num: dict) -> list[int]:
    ns = [int(v) for v in _need(num, "n_list", "numerics")]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("numerics.n_list must be strictly increasing", field="numerics.n_list")
    return ns


def run_sweep_delta(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    """Delta_n at t_end for every n in n_list and every replicate."""
    num = _numerics(cfg)
    ns, reps = _n_list(num), int(num.get("replicates", 3))
    ref = build_reference(cfg)
    if ref is None:
        raise ConfigError("sweep-delta needs a reference profile", field="reference")
    rows, medians = [], {}
    for n in ns:
        vals = []
        for k in range(reps):
            s = derive_seed(seed, n, k)
            sys = build_system(cfg, n, s, threads)
            init = build_initial(cfg["system"]["initial"], n, derive_seed(s, 1))
            traj = integrate(sys, init, float(num["t_end"]), float(num["dt"]),
                             sample_every=10 ** 9)
            delta = an.convergence_error_delta(traj.states[-1], ref.U)
            vals.append(delta)
            rows.append((n, k, s, delta))
        medians[n] = float(np.median(vals))
    summary = {"experiment": "sweep-delta", "n_list": ns, "replicates": reps,
               "median_delta": [medians[n] for n in ns],
               "strictly_decreasing": all(b < a for a, b in zip(
                   [medians[n] for n in ns], [medians[n] for n in ns][1:]))}
    res = ExperimentResult(summary)
    res.add("delta.csv", lambda p: an.write_table_csv(p, ["n", "replicate", "seed", "delta"], rows))
    return res


def run_sweep_boundary(cfg: dict, seed: int = 0, threads: int = 1) -> ExperimentResult:
    sw = _need(cfg, "sweep", "")
    kmin, kmax, count = float(sw.get("kappa_min", 0.01)), float(sw.get("kappa_max", 0.5)), int(sw.get("count", 50))
    l_max = int(sw.get("l_max", 7))
    kappas = np.linspace(kmin, kmax, count)
    rows = []
    for kappa in kappas:
        for l in range(1, l_max + 1):
            rhs, kc = an.instability_boundary(float(kappa), l)
            rows.append((float(kappa), l, rhs, kc))
    weakest = [{"kappa": float(k), "l": an.weakest_instability(float(k), l_max)[0]} for k in kappas]
    res = ExperimentResult({"experiment": "sweep-boundary", "count": count, "l_max": l_max,
                            "weakest": weakest})
    res.add("boundary.csv", lambda p: an.write_table_csv(p, ["kappa", "l", "rhs", "K_crit"], rows))
    return res


def averaged_distance(cfg: dict, n: int, seed: int, threads: int = 1) -> float:
    """max over sample times of ||u_n - v_n||_{2,n}, random vs averaged system."""
    num = _numerics(cfg)
    sys = build_system(cfg, n, seed, threads)
    init = build_initial(cfg["system"]["initial"], n, derive_seed(seed, 1))
    t_end, dt, every = float(num["t_end"]), float(num["dt"]), int(num.get("sample_every", 10))
    a = integrate(sys, init, t_end, dt, every)
    b = integrate(sys.averaged(), init, t_end, dt, every)
    return float(max(discrete_l2_norm(x - y) for x, y in zip(a.states, b.states)))


def run_averaged_compare(cfg: dict, seed: int, threads: int = 1) -> ExperimentResult:
    num = _numerics(cfg)
    ns, reps = _n_list(num), int(num.get("replicates", 3))
    rows, medians = [], []
    for n in ns:
        vals = []
        for k in range(reps):
            s = derive_seed(seed, n, k)
            d = averaged_distance(cfg, n, s, threads)
            vals.append(d)
            rows.append((n, k, s, d))
        medians.append(float(np.median(vals)))
    inversions = sum(b >= a for a, b in zip(medians, medians[1:]))
    res = ExperimentResult({"experiment": "averaged-compare", "n_list": ns, "replicates": reps,
                            "median_distance": medians, "inversions": inversions})
    res.add("averaged.csv", lambda p: an.write_table_csv(p, ["n", "replicate", "seed", "max_distance"], rows))
    return res


RUNNERS = {
    "simulate": run_simulate,
    "sync-solve": run_sync,
    "stability": run_stability,
    "design": run_design,
    "sweep-delta": run_sweep_delta,
    "sweep-boundary": run_sweep_boundary,
    "averaged-compare": run_averaged_compare,
}


def run_experiment(cfg: dict, seed: Optional[int] = None, threads: int = 1) -> ExperimentResult:
    kind = cfg.get("experiment")
    if kind not in RUNNERS:
        raise ConfigError(f"unknown experiment kind {kind!r}", field="experiment")
    s = int(cfg.get("seed", 0) if seed is None else seed)
    return RUNNERS[kind](cfg, s, threads)
