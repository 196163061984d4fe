"""Numerical verification of the dissipation identities and inequalities.

Each check compares a semigroup finite difference of a functional (the
sub-flows are exact, so differencing error is the probe step squared)
against the closed-form combination of diagnostics the theory predicts.
Equality checks report a residual, inequality checks a slack; both carry
the tolerance they were judged against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import functionals as fns
from .functionals import BOLTZMANN, PIndex, build_report
from .initial import random_band_limited
from .integrator import Trajectory
from .operators import BGK, FokkerPlanck, Transport, bgk_flow
from .phase_space import Grid, State, hermite_tail_fraction

Generator = Transport | BGK | FokkerPlanck

DEFAULT_ABS_TOL = 1e-6
DEFAULT_REL_TOL = 1e-4


@dataclass
class LemmaCheckResult:
    check_id: str
    kind: str                   # "equality" or "inequality"
    lhs: float
    rhs: float
    residual_or_slack: float
    tolerance: float
    passed: bool
    description: str = ""
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id, "kind": self.kind,
            "lhs": self.lhs, "rhs": self.rhs,
            "residual_or_slack": self.residual_or_slack,
            "tolerance": self.tolerance, "passed": self.passed,
            "description": self.description, "params": self.params,
        }


@dataclass
class DecayFit:
    functional: str
    t_start: float
    t_end: float
    rate: float
    prefactor: float
    r_squared: float
    window_shortened: bool = False

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "window": [self.t_start, self.t_end],
            "rate": self.rate, "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "window_shortened": self.window_shortened,
        }


@dataclass(frozen=True)
class CorruptedBGK(BGK):
    """Test hook: relaxes slightly faster than its nominal rate claims.

    Predictions still use .rate, so with any nonzero skew every equality
    row of the derivative table must fail; used to prove the verifier can
    detect a broken operator.
    """

    skew: float = 0.0

    def flow(self, state: State, t: float) -> State:
        return bgk_flow(state, self.rate * (1.0 + self.skew), t)


def default_probe_step(generator: Generator) -> float:
    rate = generator.rate if isinstance(generator, BGK) else 1.0
    return 1e-4 * min(1.0, 1.0 / rate)


def semigroup_derivative(state: State, generator: Generator,
                         functional: Callable[[State], float],
                         delta: float | None = None) -> float:
    """d/dt of the functional along the generator's flow at this state.

    Transport is a group, so a centered difference applies; the collision
    semigroups only run forward and use a one-sided difference with one
    Richardson extrapolation step. Both are second-order in the probe.
    """
    if delta is None:
        delta = default_probe_step(generator)
    if isinstance(generator, Transport):
        up = functional(generator.flow(state, +delta))
        dn = functional(generator.flow(state, -delta))
        return (up - dn) / (2.0 * delta)
    f0 = functional(state)
    f_half = functional(generator.flow(state, 0.5 * delta))
    f_full = functional(generator.flow(state, delta))
    return (4.0 * f_half - 3.0 * f0 - f_full) / delta


def _equality(check_id, lhs, rhs, abs_tol, rel_tol, desc="", params=None):
    resid = lhs - rhs
    tol = max(abs_tol, rel_tol * max(abs(lhs), abs(rhs)))
    return LemmaCheckResult(
        check_id=check_id, kind="equality", lhs=lhs, rhs=rhs,
        residual_or_slack=resid, tolerance=tol, passed=bool(abs(resid) <= tol),
        description=desc, params=params or {},
    )


def _inequality(check_id, lhs, rhs, abs_tol, desc="", params=None):
    # checks lhs <= rhs: slack = rhs - lhs
    slack = rhs - lhs
    return LemmaCheckResult(
        check_id=check_id, kind="inequality", lhs=lhs, rhs=rhs,
        residual_or_slack=slack, tolerance=abs_tol,
        passed=bool(slack >= -abs_tol), description=desc, params=params or {},
    )


def check_lemma_table(state: State, generator: Generator, p: PIndex,
                      delta: float | None = None,
                      eps: float = 1.0, eps1: float = 1.0, eps2: float = 1.0,
                      abs_tol: float = DEFAULT_ABS_TOL,
                      rel_tol: float = DEFAULT_REL_TOL) -> list[LemmaCheckResult]:
    """Derivative table of the Fisher components along one generator.

    Covers the transport rows (shared by both entropy families), the
    relaxation rows (log and power variants) and the velocity-diffusion
    rows (power only). Inequality rows take the supplied Young splitters.
    """
    model = "fokker-planck" if isinstance(generator, FokkerPlanck) else "bgk"
    rep = build_report(state, p, model=model)
    meta = {"time": state.time, "p": p.label()}

    def deriv(name):
        return semigroup_derivative(
            state, generator,
            lambda s, _n=name: getattr(build_report(s, p, model=model), _n),
            delta,
        )

    out: list[LemmaCheckResult] = []
    if isinstance(generator, Transport):
        out.append(_equality(
            "transport.fisher_x_invariant", deriv("fisher_x"), 0.0,
            abs_tol, rel_tol,
            "spatial Fisher information is constant under free streaming", meta))
        out.append(_equality(
            "transport.fisher_v_rate", deriv("fisher_v"), -2.0 * rep.fisher_mixed,
            abs_tol, rel_tol, "velocity Fisher information drifts at minus twice the mixed term", meta))
        out.append(_equality(
            "transport.fisher_mixed_rate", deriv("fisher_mixed"), -rep.fisher_x,
            abs_tol, rel_tol, "mixed term drifts at minus the spatial Fisher information", meta))
        return out

    if isinstance(generator, BGK):
        lam = generator.rate
        meta = dict(meta, lam=lam)
        if p.is_log:
            out.append(_equality(
                "relaxation.fisher_v_rate", deriv("fisher_v"),
                -lam * (rep.fisher_v + rep.fisher_v_ratio),
                abs_tol, rel_tol,
                "velocity Fisher decays by itself plus its average-ratio variant", meta))
            out.append(_inequality(
                "relaxation.fisher_x_bound", deriv("fisher_x"),
                -lam * rep.fisher_x_ratio
                - lam * (rep.fisher_x - rep.fisher_x_projected),
                abs_tol,
                "spatial Fisher decays by the relative term plus the projection gap", meta))
            out.append(_inequality(
                "relaxation.fisher_mixed_bound", deriv("fisher_mixed"),
                lam * eps * rep.fisher_v_ratio + lam / eps * rep.fisher_x_ratio
                - lam * rep.fisher_mixed,
                abs_tol,
                "mixed term bounded by the split relative terms minus itself",
                dict(meta, eps=eps)))
        else:
            out.append(_equality(
                "relaxation.fisher_v_rate", deriv("fisher_v"),
                -lam * (rep.correction_v + rep.fisher_v_scaled + rep.fisher_v),
                abs_tol, rel_tol,
                "velocity Fisher decays by itself plus both weighted variants", meta))
            out.append(_inequality(
                "relaxation.fisher_x_bound", deriv("fisher_x"),
                -lam * rep.cross_dissipation - lam * rep.correction_x,
                abs_tol,
                "spatial Fisher decays by the cross dissipation and weighted term", meta))
            out.append(_inequality(
                "relaxation.fisher_mixed_bound", deriv("fisher_mixed"),
                0.5 * lam * eps1 * rep.fisher_v_scaled
                + lam / eps1 * rep.cross_dissipation
                + 0.5 * lam / eps2 * rep.correction_x
                + 0.5 * lam * eps2 * rep.correction_v
                - lam * rep.fisher_mixed,
                abs_tol,
                "mixed term bounded by the split dissipation terms minus itself",
                dict(meta, eps1=eps1, eps2=eps2)))
        return out

    # velocity diffusion rows (power entropies)
    if p.is_log:
        raise ValueError("the diffusion derivative table is stated for power entropies")
    out.append(_equality(
        "diffusion.fisher_x_rate", deriv("fisher_x"),
        -2.0 * rep.hess_xv - (2.0 - p.p) * (p.p - 1.0) * rep.quartic_xv,
        abs_tol, rel_tol,
        "spatial Fisher dissipates through the mixed second derivative", meta))
    out.append(_inequality(
        "diffusion.fisher_mixed_bound", deriv("fisher_mixed"),
        rep.hess_vv + rep.hess_xv
        + 0.5 * (2.0 - p.p) * (p.p - 1.0) * (rep.quartic_v + rep.quartic_xv)
        + 0.5 * rep.fisher_x + 0.5 * rep.fisher_v,
        abs_tol,
        "mixed term bounded by second-derivative and split Fisher terms", meta))
    out.append(_equality(
        "diffusion.fisher_v_rate", deriv("fisher_v"),
        -2.0 * rep.hess_vv - (2.0 - p.p) * (p.p - 1.0) * rep.quartic_v
        - 2.0 * rep.fisher_v,
        abs_tol, rel_tol,
        "velocity Fisher dissipates through second derivatives and twice "
        "itself, the commutator contribution", meta))
    return out


def check_projection_inequalities(state: State, p: PIndex,
                                  C: float | None = None,
                                  abs_tol: float = DEFAULT_ABS_TOL) -> list[LemmaCheckResult]:
    """Projection (Jensen) inequality, the functional inequality with an
    estimated constant, and the exact projected-entropy rate identity.

    The rate identity is checked against the derivative along the full
    dynamics, assembled as the sum of the transport and relaxation
    semigroup derivatives.
    """
    rep = build_report(state, p, model="bgk")
    meta = {"time": state.time, "p": p.label()}
    out = [
        _inequality(
            "jensen.projected_fisher", rep.fisher_x_projected, rep.fisher_x,
            abs_tol,
            "projecting onto the velocity average cannot increase spatial Fisher",
            meta),
        _inequality(
            "jensen.projected_entropy", rep.entropy_projected, rep.entropy,
            abs_tol,
            "the velocity average carries no more entropy than the state", meta),
    ]
    if C is not None:
        out.append(_inequality(
            "functional_inequality.projected_entropy",
            rep.entropy_projected, C * rep.fisher_x,
            abs_tol,
            "projected entropy is dominated by C times spatial Fisher",
            dict(meta, C=C)))

    # rate identity: transport carries the whole derivative, relaxation none
    lam = 1.0
    hpi = lambda s: fns.projected_entropy(s, p)
    d_transport = semigroup_derivative(state, Transport(), hpi)
    d_relax = semigroup_derivative(state, BGK(lam), hpi)
    out.append(_equality(
        "projected_entropy_rate.formula", d_transport + d_relax,
        rep.projected_entropy_rate,
        abs_tol, DEFAULT_REL_TOL,
        "the projected entropy rate equals the divergence pairing", meta))
    return out


def check_mixed_term(state: State, eta: float, p: PIndex = BOLTZMANN,
                     abs_tol: float = DEFAULT_ABS_TOL) -> LemmaCheckResult:
    """The compensated mixed-term bound: minus the mixed Fisher term is
    controlled by split Fisher terms, the projection gap, and the exact
    projected-entropy rate (no differencing on the right-hand side).

    The bound is generator-independent: the collision part leaves the
    velocity average untouched, so the rate formula covers the full flow.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    rep = build_report(state, p, model="bgk")
    lhs = -rep.fisher_mixed
    rhs = (0.5 * eta * rep.fisher_v
           + 0.5 / eta * (rep.fisher_x - rep.fisher_x_projected)
           - rep.projected_entropy_rate)
    return _inequality(
        "mixed_term.bound", lhs, rhs, abs_tol,
        "the mixed term is compensated by the projected entropy rate",
        {"time": state.time, "p": p.label(), "eta": eta})


def check_correction_weight(r_grid: np.ndarray | None = None,
                            p_grid: tuple = (1.1, 1.5, 1.9, 2.0),
                            abs_tol: float = 1e-12) -> list[LemmaCheckResult]:
    """Pointwise nonnegativity of the correction weight, and its vanishing
    at p = 2."""
    if r_grid is None:
        r_grid = np.linspace(0.0, 10.0, 2001)
    out = []
    for p in p_grid:
        vals = fns.correction_weight(r_grid, p)
        out.append(_inequality(
            f"correction_weight.nonneg[p={p}]", -float(vals.min()), 0.0,
            abs_tol, "the correction weight is nonnegative on the r grid",
            {"p": p}))
    v2 = fns.correction_weight(r_grid, 2.0)
    out.append(_equality(
        "correction_weight.vanishes_at_two", float(np.abs(v2).max()), 0.0,
        abs_tol, 0.0, "the correction weight vanishes identically at p = 2",
        {"p": 2.0}))
    return out


def check_transport_polynomial(state: State, times: np.ndarray | list,
                               p: PIndex = BOLTZMANN,
                               abs_tol: float = 1e-6) -> list[LemmaCheckResult]:
    """Closed-form drift of the Fisher components under pure transport.

    The derivative table integrates exactly: the spatial component is
    constant, the mixed one linear, the velocity one quadratic with
    coefficients set by the initial values. A three-point parabola fit
    cross-checks the quadratic coefficient.
    """
    times = np.asarray(list(times), dtype=float)
    rep0 = build_report(state, p, model="bgk")
    ix0, im0, iv0 = rep0.fisher_x, rep0.fisher_mixed, rep0.fisher_v
    tr = Transport()

    # dephasing turns spatial harmonics into velocity oscillations; record
    # how much of the final state escapes the Hermite band
    final_tail = hermite_tail_fraction(tr.flow(state, float(times.max())).h,
                                       state.grid)

    max_err = {"x": 0.0, "m": 0.0, "v": 0.0}
    samples = []
    for t in times:
        rep = build_report(tr.flow(state, float(t)), p, model="bgk")
        max_err["x"] = max(max_err["x"], abs(rep.fisher_x - ix0))
        max_err["m"] = max(max_err["m"], abs(rep.fisher_mixed - (im0 - t * ix0)))
        max_err["v"] = max(max_err["v"],
                           abs(rep.fisher_v - (iv0 - 2.0 * t * im0 + t * t * ix0)))
        samples.append((t, rep.fisher_v))

    meta = {"p": p.label(), "t_max": float(times.max()),
            "final_hermite_tail": final_tail,
            "aliasing_warning": bool(final_tail > 1e-6)}
    out = [
        _equality("transport_polynomial.fisher_x_constant",
                  max_err["x"], 0.0, abs_tol, 0.0,
                  "spatial Fisher stays at its initial value", meta),
        _equality("transport_polynomial.fisher_mixed_linear",
                  max_err["m"], 0.0, abs_tol, 0.0,
                  "mixed term follows its linear law", meta),
        _equality("transport_polynomial.fisher_v_quadratic",
                  max_err["v"], 0.0, abs_tol, 0.0,
                  "velocity Fisher follows its quadratic law", meta),
    ]
    if len(samples) >= 3:
        (t1, f1), (t2, f2), (t3, f3) = samples[0], samples[len(samples) // 2], samples[-1]
        if len({t1, t2, t3}) == 3:
            coef = np.polyfit([t1, t2, t3], [f1, f2, f3], 2)[0]
            out.append(_equality(
                "transport_polynomial.parabola_coefficient",
                float(coef), ix0, 10.0 * abs_tol, 1e-5,
                "the fitted quadratic coefficient is the spatial Fisher value",
                meta))
    return out


def fit_decay(trajectory: Trajectory,
              functional: Callable[[State], float],
              window: tuple[float, float],
              name: str = "functional",
              floor: float = 1e-14) -> DecayFit:
    """Least-squares exponential fit of a positive functional over a window.

    Values at or below the floor (equilibrium reached) shrink the window
    and set a flag rather than poisoning the logarithm.
    """
    t0, t1 = window
    ts, vals = [], []
    shortened = False
    for t, state in trajectory.snapshots:
        if t0 - 1e-12 <= t <= t1 + 1e-12:
            v = functional(state)
            if v <= floor:
                shortened = True
                break
            ts.append(t)
            vals.append(v)
    if len(ts) < 2:
        raise ValueError("decay window contains fewer than two usable snapshots")
    ts = np.asarray(ts)
    logs = np.log(np.asarray(vals))
    slope, intercept = np.polyfit(ts, logs, 1)
    pred = slope * ts + intercept
    ss_res = float(((logs - pred) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(
        functional=name, t_start=float(ts[0]), t_end=float(ts[-1]),
        rate=float(-slope), prefactor=float(np.exp(intercept)),
        r_squared=r2, window_shortened=shortened,
    )


def random_state(grid: Grid, seed: int, amplitude: float = 0.25,
                 x_modes: int = 2, v_degree: int = 2) -> State:
    """Seeded positive unit-mass field: exp of a band-limited exponent."""
    return random_band_limited(grid, seed, amplitude=amplitude,
                               x_modes=x_modes, v_degree=v_degree)


def run_suite(grid: Grid, model: str, p: PIndex, lam: float | None = None,
              n_states: int = 100, seed0: int = 0,
              splitters: tuple = (0.1, 1.0, 10.0),
              C: float | None = None,
              amplitude: float = 0.25,
              abs_tol: float = DEFAULT_ABS_TOL,
              rel_tol: float = DEFAULT_REL_TOL,
              jobs: int = 1,
              corruption: float = 0.0) -> list[LemmaCheckResult]:
    """Full verification sweep over seeded random states.

    `corruption` is a test hook: it scales the relaxation rate used by the
    flows inside the derivative probes (but not in the predicted
    right-hand sides), so any nonzero value must break equality rows.
    """
    if model == "bgk":
        if lam is None:
            raise ValueError("the relaxation model needs a rate")
        generator: Generator = (BGK(lam) if corruption == 0.0
                                else CorruptedBGK(rate=lam, skew=corruption))
    elif model == "fokker-planck":
        if p.is_log:
            raise ValueError("the diffusion table is stated for power entropies")
        generator = FokkerPlanck()
    else:
        raise ValueError(f"unknown model {model!r}")

    def one_state(seed: int) -> list[LemmaCheckResult]:
        state = random_state(grid, seed, amplitude=amplitude)
        res: list[LemmaCheckResult] = []
        if model == "bgk":
            res += check_lemma_table(state, Transport(), p,
                                     abs_tol=abs_tol, rel_tol=rel_tol)
            for e in splitters:
                res += [r for r in check_lemma_table(
                    state, generator, p, eps=e, eps1=e, eps2=e,
                    abs_tol=abs_tol, rel_tol=rel_tol)
                    if r.kind == "inequality" or e == splitters[0]]
            res += check_projection_inequalities(state, p, C=C, abs_tol=abs_tol)
            for eta in splitters:
                res.append(check_mixed_term(state, eta, p, abs_tol=abs_tol))
        else:
            res += check_lemma_table(state, generator, p,
                                     abs_tol=abs_tol, rel_tol=rel_tol)
        for r in res:
            r.params["seed"] = seed
        return res

    seeds = list(range(seed0, seed0 + n_states))
    results: list[LemmaCheckResult] = []
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(one_state, seeds):
                results.extend(chunk)
    else:
        for s in seeds:
            results.extend(one_state(s))
    if model == "bgk" and not p.is_log:
        results.extend(check_correction_weight())
    return results


def summarize(results: list[LemmaCheckResult]) -> str:
    """Human-readable table, one row per check, worst instance per id."""
    worst: dict[str, LemmaCheckResult] = {}
    counts: dict[str, int] = {}
    fails: dict[str, int] = {}
    for r in results:
        counts[r.check_id] = counts.get(r.check_id, 0) + 1
        fails[r.check_id] = fails.get(r.check_id, 0) + (0 if r.passed else 1)
        cur = worst.get(r.check_id)
        key = abs(r.residual_or_slack) if r.kind == "equality" else -r.residual_or_slack
        if cur is None:
            worst[r.check_id] = r
        else:
            cur_key = (abs(cur.residual_or_slack) if cur.kind == "equality"
                       else -cur.residual_or_slack)
            if key > cur_key:
                worst[r.check_id] = r
    lines = [f"{'check':48s} {'kind':10s} {'n':>5s} {'fail':>5s} "
             f"{'worst resid/slack':>18s} {'tol':>9s}"]
    for cid in sorted(worst):
        r = worst[cid]
        lines.append(
            f"{cid:48s} {r.kind:10s} {counts[cid]:5d} {fails[cid]:5d} "
            f"{r.residual_or_slack:18.3e} {r.tolerance:9.1e}")
    total = len(results)
    failed = sum(0 if r.passed else 1 for r in results)
    lines.append(f"total checks: {total}, failed: {failed}")
    return "\n".join(lines)


def save_results(results: list[LemmaCheckResult], path) -> None:
    with open(path, "w") as f:
        json.dump([r.to_dict() for r in results], f, indent=1, sort_keys=True)
        f.write("\n")
