"""Joint state and process-parameter estimation from count records.

Three routes are provided and cross-checked against each other:

* `linear_invert` for protocols whose rotations are fully known (the
  statistics are linear in the Cartesian state coordinates);
* `reconstruct`, a multi-start damped Gauss-Newton descent on either the
  least-squares or the Poisson-deviance objective, with box projection for
  magnitudes, wrap-around for phases, and deterministic tie-breaking;
* `grid_oracle`, a brute-force recursive grid search used to validate the
  local optimizer.

`block_solve_v` exploits the triangular information structure of the V-type
protocol (ground-excited pair 1, then pair 2, then the excited-excited
coherence) and must agree with the joint solve on exact data.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import identify, smallmat
from .errors import (BlockFailure, DimensionMismatch, InvalidRange,
                     RankDeficient, SingularAtSolutionWarning,
                     StructuralSingularity, TooManyDims)
from .forward import ProtocolLayout, observed_values
from .model import (COHERENCE_PAIRS, DensityParams, TWO_PI, assemble_generator,
                    state_matrix, state_params_from_matrix, wrap_phase)
from .protocol import (PHASE_TO_BETA, Protocol, UnknownParams, V_BLOCKS,
                       resolve, split_values, unknowns_from_dict)

OBJECTIVES = ("least_squares", "poisson_mle")
LAM_FLOOR = 1e-9
TINY_MAG = 1e-8
PHASE_NAMES = {2: ("gamma",), 3: ("gamma01", "gamma02", "gamma12")}


@dataclass(frozen=True)
class SolverOptions:
    objective: str = "least_squares"
    max_iter: int = 200
    grad_tol: float = 1e-10
    step_tol: float = 1e-12
    n_phase_starts: int = 8
    n_lambda_starts: int = 8
    max_full_grid: int = 512
    prune_after: int = 8
    prune_keep: int = 12
    magnitude_cap: float = None
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidRange(f"objective {self.objective!r} not in {OBJECTIVES}")
        if self.grad_tol <= 0 or self.step_tol <= 0:
            raise InvalidRange("tolerances must be positive")


@dataclass(frozen=True)
class ReconstructionResult:
    state: DensityParams
    unknowns: UnknownParams
    objective: str
    residual: float
    gradient_norm: float
    names: tuple
    x: np.ndarray
    jacobian_abs_det: float
    condition_number: float
    smallest_singular_value: float
    n_starts_tried: int
    converged: bool
    physicality: float
    psd_clip: float
    phase_undefined: tuple
    singular_at_solution: bool
    gauge: str

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "unknowns": self.unknowns.as_dict(),
            "objective": self.objective,
            "residual": self.residual,
            "gradient_norm": self.gradient_norm,
            "parameters": dict(zip(self.names, (float(v) for v in self.x))),
            "jacobian_abs_det": self.jacobian_abs_det,
            "condition_number": self.condition_number,
            "smallest_singular_value": self.smallest_singular_value,
            "n_starts_tried": self.n_starts_tried,
            "converged": self.converged,
            "physicality_min_eigenvalue": self.physicality,
            "psd_clip": self.psd_clip,
            "phase_undefined": list(self.phase_undefined),
            "singular_at_solution": self.singular_at_solution,
            "gauge": self.gauge,
        }


# ---------------------------------------------------------------------------
# Linear inversion (fully known rotations)
# ---------------------------------------------------------------------------


def _cartesian_basis(dim: int):
    """Hermitian basis: populations, then (x, y) per coherence pair with
    entry (i, j) = (x - i*y)/2, so x = 2*mag*cos(phase), y = 2*mag*sin(phase)."""
    names, mats = [], []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        names.append(f"rho{i}{i}")
        mats.append(e)
    for (i, j) in COHERENCE_PAIRS[dim]:
        x = np.zeros((dim, dim), dtype=complex)
        x[i, j] = 0.5
        x[j, i] = 0.5
        y = np.zeros((dim, dim), dtype=complex)
        y[i, j] = -0.5j
        y[j, i] = 0.5j
        names.extend([f"x{i}{j}", f"y{i}{j}"])
        mats.extend([x, y])
    return names, mats


def design_matrix(protocol: Protocol, unknowns: UnknownParams = None) -> np.ndarray:
    """Rows: settings; columns: Cartesian state coordinates (pops, x, y per pair)."""
    _, mats = _cartesian_basis(protocol.dim)
    rows = []
    for setting in protocol.settings:
        gen = resolve(setting, unknowns)
        u = smallmat.expi_neg(assemble_generator(gen))
        row = u[setting.label, :]
        rows.append([float(np.real(row @ b @ row.conj())) for b in mats])
    return np.array(rows)


@dataclass(frozen=True)
class LinearInversionResult:
    state: DensityParams
    phase_undefined: tuple
    residual: float


def linear_invert(counts, protocol: Protocol) -> LinearInversionResult:
    """Least-squares solve in Cartesian coordinates, then magnitude/phase form.

    Only valid when every rotation is fully known (no process unknowns).
    Tiny negative recovered populations are clipped to zero; a coherence
    magnitude at numerical zero leaves its phase at 0 with a flag.
    """
    if protocol.process_unknown_names:
        raise InvalidRange("linear inversion needs fully known rotations")
    y = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    if len(y) != protocol.n_settings:
        raise DimensionMismatch("count vector length differs from settings")
    a = design_matrix(protocol)
    ncols = a.shape[1]
    sol, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < ncols:
        raise RankDeficient(f"design matrix rank {rank} < {ncols}")
    dim = protocol.dim
    pops = [max(float(v), 0.0) for v in sol[:dim]]
    mags, phases, undefined = [], [], []
    scale = max(sum(pops), 1.0)
    for k, _pair in enumerate(COHERENCE_PAIRS[dim]):
        x, yv = float(sol[dim + 2 * k]), float(sol[dim + 2 * k + 1])
        mag = 0.5 * math.hypot(x, yv)
        mags.append(mag)
        if mag <= TINY_MAG * scale:
            phases.append(0.0)
            undefined.append(PHASE_NAMES[dim][k])
        else:
            phases.append(wrap_phase(math.atan2(yv, x)))
    state = DensityParams(tuple(pops), tuple(mags), tuple(phases))
    residual = float(((a @ sol - y) ** 2).sum())
    return LinearInversionResult(state, tuple(undefined), residual)


# ---------------------------------------------------------------------------
# Objective machinery
# ---------------------------------------------------------------------------


def _objective_values(n_model: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
    """Objective per row of n_model (shape (P, S))."""
    if kind == "least_squares":
        return ((n_model - y) ** 2).sum(axis=1)
    # Poisson deviance (non-negative, zero at n = y); +inf when a model
    # statistic is non-positive, which tells the damping loop to back off.
    out = np.zeros(n_model.shape[0])
    bad = (n_model <= 0.0).any(axis=1)
    out[bad] = np.inf
    ok = ~bad
    if ok.any():
        n = n_model[ok]
        terms = n - y
        pos = y > 0
        if pos.any():
            yp = y[pos]
            terms[:, pos] += yp * (np.log(yp) - np.log(n[:, pos]))
        out[ok] = np.maximum(terms.sum(axis=1), 0.0)
    return out


def _grad_hess(n_model, jac, y, kind):
    """Gradient (P,K) and Gauss-Newton/Fisher normal matrix (P,K,K)."""
    if kind == "least_squares":
        r = n_model - y
        g = 2.0 * np.einsum("psk,ps->pk", jac, r)
        h = 2.0 * np.einsum("psj,psk->pjk", jac, jac)
        return g, h
    n = np.clip(n_model, 1e-12, None)
    g = np.einsum("psk,ps->pk", jac, 1.0 - y / n)
    w = y / (n * n)
    h = np.einsum("psj,ps,psk->pjk", jac, w, jac)
    h = h + 1e-12 * np.eye(jac.shape[2])
    return g, h


def objective_eval(params, counts, protocol: Protocol, kind: str = "least_squares",
                   names=None, fixed=None):
    """Objective value and gradient at a Γ-ordered parameter vector.

    The gradient chains the analytic objective derivative through a
    central-difference Jacobian of the model statistics (same step rule as
    the identifiability module), so it can be validated against direct
    finite differences of the objective itself.  A non-positive model
    statistic under the Poisson objective yields (+inf, zero gradient).
    """
    if kind not in OBJECTIVES:
        raise InvalidRange(f"objective {kind!r} not in {OBJECTIVES}")
    y = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    layout = ProtocolLayout(protocol, names=names, fixed=fixed)
    x = np.asarray(params, dtype=float)
    n_model = layout.statistics(x[None, :])
    f = float(_objective_values(n_model, y, kind)[0])
    if not math.isfinite(f):
        return f, np.zeros(x.size)
    jac, _ = identify._jacobian_from_vector(layout, x)
    g, _ = _grad_hess(n_model, jac[None, :, :], y, kind)
    return f, g[0]


# ---------------------------------------------------------------------------
# Batched multi-start damped Gauss-Newton
# ---------------------------------------------------------------------------


def _param_kind(name: str) -> str:
    if name.startswith("lam"):
        return "lam"
    if name.startswith("rho"):
        return "mag"
    return "phase"


def _bounds_for(names, cap):
    lo = np.empty(len(names))
    hi = np.empty(len(names))
    phase_mask = np.zeros(len(names), dtype=bool)
    for k, n in enumerate(names):
        kind = _param_kind(n)
        if kind == "lam":
            lo[k], hi[k] = LAM_FLOOR, TWO_PI
        elif kind == "mag":
            lo[k], hi[k] = 0.0, cap
        else:
            lo[k], hi[k] = -np.inf, np.inf
            phase_mask[k] = True
    return lo, hi, phase_mask


def _project(x, lo, hi, phase_mask):
    out = np.clip(x, lo, hi)
    out[..., phase_mask] = np.mod(out[..., phase_mask], TWO_PI)
    return out


@dataclass
class _FitOutcome:
    x: np.ndarray
    f: float
    converged: bool
    gradient_norm: float
    n_starts: int
    start_index: int


def _batch_jacobians(layout: ProtocolLayout, x: np.ndarray) -> np.ndarray:
    """Central-difference model Jacobians for each row of x: (P, S, K)."""
    p, k = x.shape
    steps = np.maximum(1.0, np.abs(x)) * identify.FD_SCALE
    probes = np.empty((p, 2 * k, k))
    for c in range(k):
        probes[:, 2 * c] = x
        probes[:, 2 * c, c] += steps[:, c]
        probes[:, 2 * c + 1] = x
        probes[:, 2 * c + 1, c] -= steps[:, c]
    stats = layout.statistics(probes.reshape(p * 2 * k, k))
    stats = stats.reshape(p, 2 * k, -1)
    jac = np.empty((p, stats.shape[2], k))
    for c in range(k):
        jac[:, :, c] = (stats[:, 2 * c] - stats[:, 2 * c + 1]) / \
            (2 * steps[:, c])[:, None]
    return jac


def _lm_multistart(layout: ProtocolLayout, y: np.ndarray, starts: np.ndarray,
                   kind: str, options: SolverOptions, cap: float) -> _FitOutcome:
    names = layout.names
    lo, hi, phase_mask = _bounds_for(names, cap)
    x = _project(np.array(starts, dtype=float, copy=True), lo, hi, phase_mask)
    p, k = x.shape
    scale = max(1.0, float((y ** 2).sum()))

    f = _objective_values(layout.statistics(x), y, kind)
    mu = np.full(p, 1e-3)
    done = np.zeros(p, dtype=bool)
    converged = np.zeros(p, dtype=bool)
    gnorm = np.full(p, np.inf)
    jac = np.zeros((p, layout.labels.size, k))
    need_jac = np.ones(p, dtype=bool)

    for it in range(options.max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        if it == options.prune_after and act.size > options.prune_keep:
            order = act[np.argsort(f[act], kind="stable")]
            done[order[options.prune_keep:]] = True
            act = np.flatnonzero(~done)

        refresh = act[need_jac[act]]
        if refresh.size:
            jac[refresh] = _batch_jacobians(layout, x[refresh])
            need_jac[refresh] = False

        n_model = layout.statistics(x[act])
        f[act] = _objective_values(n_model, y, kind)
        g, h = _grad_hess(n_model, jac[act], y, kind)
        if kind != "least_squares":
            bad = ~np.isfinite(f[act])
            if bad.any():  # invalid Poisson point: descend on least squares
                g_ls, h_ls = _grad_hess(n_model[bad], jac[act][bad], y,
                                        "least_squares")
                g[bad] = g_ls
                h[bad] = h_ls
        gn = np.abs(g).max(axis=1)
        gnorm[act] = gn

        hit = gn <= options.grad_tol * scale
        if hit.any():
            converged[act[hit]] = True
            done[act[hit]] = True
            act = act[~hit]
            if act.size == 0:
                continue
            g, h = g[~hit], h[~hit]

        eye = np.eye(k)
        hd = h + mu[act][:, None, None] * eye
        try:
            delta = -np.linalg.solve(hd, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = -np.linalg.solve(hd + 1e-8 * eye, g[..., None])[..., 0]

        trial = _project(x[act] + delta, lo, hi, phase_mask)
        f_trial = _objective_values(layout.statistics(trial), y, kind)
        with np.errstate(invalid="ignore"):
            accept = f_trial <= f[act]
        small = np.abs(delta).max(axis=1) <= options.step_tol * (
            1.0 + np.abs(x[act]).max(axis=1))

        acc = act[accept]
        x[acc] = trial[accept]
        f[acc] = f_trial[accept]
        need_jac[acc] = True
        mu[acc] = np.maximum(mu[acc] / 3.0, 1e-14)
        rej = act[~accept]
        mu[rej] = np.minimum(mu[rej] * 7.0, 1e14)

        converged[act[small]] = True
        done[act[small]] = True
        done[rej[mu[rej] >= 1e14]] = True

    cand = np.flatnonzero(converged) if converged.any() else np.arange(p)
    best = min(cand, key=lambda i: (f[i], i))
    return _FitOutcome(x[best].copy(), float(f[best]), bool(converged[best]),
                       float(gnorm[best]), p, int(best))


# ---------------------------------------------------------------------------
# Start grids
# ---------------------------------------------------------------------------


def _magnitude_seeds(names, settings, y: np.ndarray) -> dict:
    """Seed populations from identity-direction settings, the rest from scale."""
    seeds = {}
    for idx, s in enumerate(settings):
        unrotated = (all(m == 0 for m in s.multipliers)
                     and all(fc == 0 for fc in s.fixed_couplings)
                     and s.mz == 0 and s.fixed_diag == 0)
        if unrotated:
            seeds[f"rho{s.label}{s.label}"] = max(float(y[idx]), 0.0)
    med = max(float(np.median(y)), 1e-3 * max(float(y.max(initial=0.0)), 1e-6))
    for name in names:
        if _param_kind(name) != "mag" or name in seeds:
            continue
        i, j = name[3], name[4]
        seeds[name] = med if i == j else 0.5 * med
    return seeds


def _start_grid(settings, names, y: np.ndarray, options: SolverOptions) -> np.ndarray:
    names = tuple(names)
    seeds = _magnitude_seeds(names, settings, y)
    phase_vals = np.arange(options.n_phase_starts) * (TWO_PI / options.n_phase_starts)
    lam_vals = (np.arange(options.n_lambda_starts) + 1) * (
        TWO_PI / options.n_lambda_starts)
    scan_axes = []
    base = np.empty(len(names))
    for idx, n in enumerate(names):
        kind = _param_kind(n)
        if kind == "mag":
            base[idx] = seeds.get(n, max(float(np.median(y)), 1e-6))
        elif kind == "phase":
            base[idx] = phase_vals[2]
            scan_axes.append((idx, phase_vals))
        else:
            base[idx] = lam_vals[len(lam_vals) // 2 - 1]
            scan_axes.append((idx, lam_vals))
    if not scan_axes:
        return base[None, :]
    total = int(np.prod([len(v) for _, v in scan_axes]))
    if total <= options.max_full_grid:
        combos = np.array(list(itertools.product(*(v for _, v in scan_axes))))
        starts = np.tile(base, (combos.shape[0], 1))
        for col, (idx, _) in enumerate(scan_axes):
            starts[:, idx] = combos[:, col]
        return starts
    return None  # caller supplies a protocol-aware reduction


def _reduced_start_grid(layout: ProtocolLayout, names, y, options,
                        seeds_starts_base):
    """Coordinate scans pick the top-3 values per axis, then the best
    3*prune_keep of their Cartesian product (used when the full product of
    phase/strength grids is too large, e.g. the V-type joint solve)."""
    base, scan_axes = seeds_starts_base
    tops = []
    for idx, vals in scan_axes:
        block = np.tile(base, (len(vals), 1))
        block[:, idx] = vals
        fvals = _objective_values(layout.statistics(block), y, options.objective)
        order = np.argsort(fvals, kind="stable")[:3]
        tops.append(vals[np.sort(order)])
    combos = np.array(list(itertools.product(*tops)))
    starts = np.tile(base, (combos.shape[0], 1))
    for col, (idx, _) in enumerate(scan_axes):
        starts[:, idx] = combos[:, col]
    fvals = _objective_values(layout.statistics(starts), y, options.objective)
    keep = np.argsort(fvals, kind="stable")[:3 * options.prune_keep]
    return starts[np.sort(keep)]


def _build_starts(layout: ProtocolLayout, settings, names, y,
                  options: SolverOptions) -> np.ndarray:
    grid = _start_grid(settings, names, y, options)
    if grid is not None:
        return grid
    # rebuild base and axes for the reduction path
    seeds = _magnitude_seeds(names, settings, y)
    phase_vals = np.arange(options.n_phase_starts) * (TWO_PI / options.n_phase_starts)
    lam_vals = (np.arange(options.n_lambda_starts) + 1) * (
        TWO_PI / options.n_lambda_starts)
    base = np.empty(len(names))
    scan_axes = []
    for idx, n in enumerate(names):
        kind = _param_kind(n)
        if kind == "mag":
            base[idx] = seeds.get(n, max(float(np.median(y)), 1e-6))
        elif kind == "phase":
            base[idx] = phase_vals[2]
            scan_axes.append((idx, phase_vals))
        else:
            base[idx] = lam_vals[len(lam_vals) // 2 - 1]
            scan_axes.append((idx, lam_vals))
    return _reduced_start_grid(layout, names, y, options, (base, scan_axes))


# ---------------------------------------------------------------------------
# Discrete twin degeneracy
# ---------------------------------------------------------------------------
#
# The five-setting single-coupling protocols (scenario B and each single-pair
# block of V) are exactly invariant under the reflection
#     lam -> 2*pi - lam,  pair phase -> pair phase + pi:
# the m=1 settings flip cos(lam/2), the m=2 settings flip sin(lam), and the
# phase shift restores every cross term, so the twins cannot be told apart by
# any data taken with those settings alone.  Protocols that drive both
# couplings at once (V rows 10-11, the C-alt sixth setting) break the
# reflection.  Where the full protocol is twin-invariant the canonical
# representative with lam <= pi is reported, mirroring the continuous gauge
# fix; where it is not, the data decide.

_TWIN_PHASE_OF = {
    "lam_c": ("gamma", "beta"),
    "lam1": ("gamma01", "beta01"),
    "lam2": ("gamma02", "beta02"),
}


def _twin_index_pairs(names) -> list:
    pairs = []
    for lam_name, phase_options in _TWIN_PHASE_OF.items():
        if lam_name not in names:
            continue
        for pname in phase_options:
            if pname in names:
                pairs.append((names.index(lam_name), names.index(pname)))
                break
    return pairs


def _twin_image(x: np.ndarray, li: int, pi_: int) -> np.ndarray:
    out = np.array(x, dtype=float, copy=True)
    out[li] = TWO_PI - out[li]
    out[pi_] = wrap_phase(out[pi_] + math.pi)
    return out


def canonicalize_twins(layout: ProtocolLayout, x: np.ndarray) -> np.ndarray:
    """Replace x by its lam <= pi twin wherever the statistics cannot tell."""
    x = np.array(x, dtype=float, copy=True)
    pairs = _twin_index_pairs(layout.names)
    if not pairs:
        return x
    base = layout.statistics(x[None, :])[0]
    tol = 1e-10 * max(1.0, float(np.abs(base).max()))
    for li, pi_ in pairs:
        twin = _twin_image(x, li, pi_)
        twin_stats = layout.statistics(twin[None, :])[0]
        if np.abs(twin_stats - base).max() <= tol and x[li] > math.pi:
            x = twin
    return x


def _candidate_min_eig(protocol: Protocol, x: np.ndarray) -> float:
    state, _ = split_values(protocol, x)
    n = state.trace
    if n <= 0:
        return -np.inf
    return float(np.linalg.eigvalsh(state_matrix(state))[0] / n)


def resolve_twin_family(protocol: Protocol, layout: ProtocolLayout,
                        x: np.ndarray, f: float, y: np.ndarray, kind: str,
                        options: "SolverOptions", cap: float) -> tuple:
    """Pick the canonical member of the exact-tie reflection family.

    Even protocols whose Jacobian is everywhere invertible can admit discrete
    exact ties: in the V-type scheme the two dual-coupling settings can be
    re-fit exactly (two equations, two coherence unknowns) after reflecting
    either single-coupling block, so the data alone cannot separate the
    family members.  Each reflected start is therefore re-polished; members
    reaching the same objective are ranked physical-first, then by the
    number of strengths above pi (the lam <= pi representative is canonical,
    mirroring the continuous gauge fix), then by reflection order.
    """
    pairs = _twin_index_pairs(layout.names)
    if not pairs:
        return x, f
    lam_idx = [li for li, _ in pairs]
    pinned = {pi_ for _, pi_ in pairs}
    free_phase_idx = [k for k, n in enumerate(layout.names)
                      if _param_kind(n) == "phase" and k not in pinned]
    refit_options = replace(options, max_iter=80, prune_after=3, prune_keep=4)
    candidates = [(x, f)]
    for combo in range(1, 2 ** len(pairs)):
        xt = np.array(x, copy=True)
        for bit, (li, pi_) in enumerate(pairs):
            if combo & (1 << bit):
                xt = _twin_image(xt, li, pi_)
        # phases not pinned by the reflection must be re-fit and their
        # landscape has basins, so offer offset starts for each of them
        starts = [xt]
        for pk in free_phase_idx:
            for step in range(1, 8):
                alt = xt.copy()
                alt[pk] = wrap_phase(alt[pk] + step * math.pi / 4)
                starts.append(alt)
        outcome = _lm_multistart(layout, y, np.array(starts), kind,
                                 refit_options, cap)
        if outcome.converged:
            candidates.append((outcome.x, outcome.f))
    tol = max(1e-12 * max(1.0, float((y ** 2).sum())), 1e-9 * abs(f))
    best_f = min(c[1] for c in candidates)
    ties = [c for c in candidates if c[1] <= best_f + tol]

    def key(item):
        idx, (cx, cf) = item
        unphysical = _candidate_min_eig(protocol, cx) < -1e-9
        n_large = sum(1 for li in lam_idx if cx[li] > math.pi + 1e-12)
        lams = tuple(round(float(cx[li]), 9) for li in lam_idx)
        return (unphysical, n_large, lams, idx)

    chosen = min(enumerate(ties), key=key)[1]
    return np.asarray(chosen[0], dtype=float), float(chosen[1])


def prefer_sparse_coherences(protocol: Protocol, x: np.ndarray, f: float,
                             y: np.ndarray, kind: str,
                             options: "SolverOptions", cap: float) -> tuple:
    """Among exact ties, adopt the representative with a coherence at zero.

    When a true coherence vanishes, its phase drops out of the statistics and
    the exact solutions form a tie manifold (the Jacobian is singular along
    it), on which even other parameters can wander.  For each coherence pair
    the constrained sub-problem with that pair removed is re-solved from its
    own multi-start grid; if it reaches the same objective, the sparse
    representative is adopted (its phase is then flagged undefined).  A refit
    that worsens the objective beyond the tie tolerance is discarded, so
    genuine coherences are never suppressed.
    """
    names = tuple(protocol.unknown_names)
    phase_for = dict(zip(
        [f"rho{i}{j}" for (i, j) in COHERENCE_PAIRS[protocol.dim] ],
        PHASE_NAMES[protocol.dim]))
    tie_tol = max(1e-12 * max(1.0, float((y ** 2).sum())), 1e-9 * abs(f))
    full_layout = ProtocolLayout(protocol)
    x = np.array(x, dtype=float, copy=True)
    for mag_name, base_phase in phase_for.items():
        if mag_name not in names:
            continue
        k = names.index(mag_name)
        if x[k] <= TINY_MAG:
            continue
        phase_name = base_phase if base_phase in names else \
            PHASE_TO_BETA.get(base_phase)
        drop = {mag_name, phase_name} if phase_name in names else {mag_name}
        sub_names = tuple(n for n in names if n not in drop)
        fixed = {mag_name: 0.0}
        if phase_name in names:
            fixed[phase_name] = 0.0
        sub_layout = ProtocolLayout(protocol, names=sub_names, fixed=fixed)
        starts = _build_starts(sub_layout, protocol.settings, sub_names, y,
                               options)
        outcome = _lm_multistart(sub_layout, y, starts, kind, options, cap)
        if not outcome.converged:
            continue
        candidate = x.copy()
        sub_values = dict(zip(sub_names, outcome.x))
        sub_values.update(fixed)
        candidate = np.array([sub_values[n] for n in names])
        f_cand = float(_objective_values(
            full_layout.statistics(candidate[None, :]), y, kind)[0])
        if f_cand <= f + tie_tol:
            x, f = candidate, f_cand
    return x, float(f)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def _package_result(protocol: Protocol, x: np.ndarray, outcome_f: float,
                    grad_norm: float, n_starts: int, converged: bool,
                    objective: str, y: np.ndarray = None,
                    options: "SolverOptions" = None,
                    cap: float = None) -> ReconstructionResult:
    if y is not None:
        layout = ProtocolLayout(protocol)
        opts = options or SolverOptions(objective=objective)
        cap = cap if cap is not None else _cap_for(y, opts)
        x, outcome_f = resolve_twin_family(
            protocol, layout, np.asarray(x, float), float(outcome_f), y,
            objective, opts, cap)

    report = identify.jacobian_from_vector(protocol, x)
    jmax = float(np.abs(report.matrix).max())
    singular = report.smallest_singular_value <= 1e-9 * max(1.0, jmax)
    if singular and y is not None:
        # a singular solution can sit on an exact-tie manifold from a
        # vanished coherence; report its zero-coherence member if so
        x_sparse, f_sparse = prefer_sparse_coherences(
            protocol, x, outcome_f, y, objective, opts, cap)
        if not np.array_equal(x_sparse, x):
            # the sparse refit may have landed on a reflected branch
            x, outcome_f = resolve_twin_family(
                protocol, layout, x_sparse, f_sparse, y, objective, opts, cap)
        report = identify.jacobian_from_vector(protocol, x)
        jmax = float(np.abs(report.matrix).max())
        singular = report.smallest_singular_value <= 1e-9 * max(1.0, jmax)
    if singular:
        warnings.warn("Jacobian is near-singular at the solution",
                      SingularAtSolutionWarning, stacklevel=3)
    state0, unknowns = split_values(protocol, x)
    n_scale = state0.trace

    physicality = 0.0
    psd_clip = 0.0
    state = state0
    if n_scale > 0:
        normalized = state_matrix(state0) / n_scale
        evs = np.linalg.eigvalsh(normalized)
        physicality = float(evs[0])
        if evs[0] < -1e-12:
            w, v = np.linalg.eigh(normalized)
            clipped = (v * np.clip(w, 0.0, None)) @ v.conj().T
            clipped *= n_scale / np.trace(clipped).real
            state = state_params_from_matrix(clipped)
            psd_clip = float(-evs[0])

    undefined = []
    mags = list(state.coherences)
    phases = list(state.phases)
    for k, mag in enumerate(mags):
        if mag <= TINY_MAG * max(n_scale, 1.0):
            phases[k] = 0.0
            base_name = PHASE_NAMES[protocol.dim][k]
            shown = base_name if protocol.phase_known else \
                PHASE_TO_BETA.get(base_name, base_name)
            undefined.append(shown)
    state = DensityParams(state.populations, tuple(mags), tuple(phases))

    gauge = ("controls-known" if protocol.phase_known
             else "generator-phases-zeroed")
    return ReconstructionResult(
        state=state, unknowns=unknowns, objective=objective,
        residual=float(outcome_f), gradient_norm=float(grad_norm),
        names=tuple(protocol.unknown_names), x=np.asarray(x, dtype=float),
        jacobian_abs_det=report.abs_determinant,
        condition_number=report.condition_number,
        smallest_singular_value=report.smallest_singular_value,
        n_starts_tried=n_starts, converged=converged,
        physicality=physicality, psd_clip=psd_clip,
        phase_undefined=tuple(undefined),
        singular_at_solution=bool(singular), gauge=gauge)


def _check_structure(protocol: Protocol) -> None:
    dead = identify.structural_zero_columns(protocol)
    if dead:
        hint = (" Use scenario 'C-alt' (sixth setting drives the coupling and "
                "the diagonal together) for an invertible variant."
                if protocol.name == "C" else "")
        raise StructuralSingularity(
            f"protocol {protocol.name!r}: statistics carry no information about "
            f"{', '.join(dead)} anywhere in parameter space.{hint}")


def _cap_for(y: np.ndarray, options: SolverOptions) -> float:
    if options.magnitude_cap is not None:
        return float(options.magnitude_cap)
    return max(2.0 * float(np.max(y, initial=0.0)), 1e-6)


def reconstruct(counts, protocol: Protocol,
                options: SolverOptions = None) -> ReconstructionResult:
    """Multi-start damped Gauss-Newton estimate of all declared unknowns.

    Accepted steps never increase the objective; each start terminates on the
    gradient or step tolerance; the returned solution is the converged start
    with the lowest residual (ties to the lowest start index).  The result is
    gauge-fixed and PSD-clipped, with Jacobian diagnostics at the solution.
    A structurally singular protocol (scenario C as shipped) is refused.
    """
    options = options or SolverOptions()
    y = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    if len(y) != protocol.n_settings:
        raise DimensionMismatch("count vector length differs from settings")
    if len(y) < len(protocol.unknown_names):
        raise InvalidRange("fewer settings than unknowns")
    _check_structure(protocol)
    layout = ProtocolLayout(protocol)
    starts = _build_starts(layout, protocol.settings, protocol.unknown_names,
                           y, options)
    cap = _cap_for(y, options)
    outcome = _lm_multistart(layout, y, starts, options.objective, options, cap)
    return _package_result(protocol, outcome.x, outcome.f, outcome.gradient_norm,
                           outcome.n_starts, outcome.converged, options.objective,
                           y=y, options=options, cap=cap)


def polish(counts, protocol: Protocol, x0, options: SolverOptions = None,
           names=None, fixed=None) -> _FitOutcome:
    """Single-start descent from an explicit vector (used after the oracle)."""
    options = options or SolverOptions()
    y = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    layout = ProtocolLayout(protocol, names=names, fixed=fixed)
    cap = _cap_for(y, options)
    return _lm_multistart(layout, y, np.atleast_2d(np.asarray(x0, float)),
                          options.objective, options, cap)


# ---------------------------------------------------------------------------
# Block-sequential solve for scenario V
# ---------------------------------------------------------------------------


def _beta_names(names, beta_mode):
    if not beta_mode:
        return tuple(names)
    return tuple(PHASE_TO_BETA.get(n, n) for n in names)


def block_solve_v(counts, protocol: Protocol,
                  options: SolverOptions = None) -> ReconstructionResult:
    """Solve the V-type protocol in three stages along its block structure.

    Stage 1 uses the first five settings for the ground/first-excited pair
    plus its coupling strength; stage 2 the next four for the second pair
    (ground population held fixed); stage 3 the last two for the
    excited-excited coherence.  On exact data the assembled estimate must
    agree with the joint `reconstruct`.  Block failures propagate with the
    block index.
    """
    options = options or SolverOptions()
    if protocol.name.split("~")[0] != "V" or protocol.dim != 3:
        raise InvalidRange("block solve is defined for the V-type protocol")
    y_all = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    if len(y_all) != protocol.n_settings:
        raise DimensionMismatch("count vector length differs from settings")
    cap = _cap_for(y_all, options)
    beta_mode = not protocol.phase_known

    def solve_block(block_idx, fixed):
        indices, base_names = V_BLOCKS[block_idx - 1]
        names = _beta_names(base_names, beta_mode)
        sub_settings = tuple(protocol.settings[i] for i in indices)
        sub = Protocol(name=f"V#b{block_idx}", dim=3, settings=sub_settings,
                       unknown_names=names, phase_known=protocol.phase_known)
        y = y_all[list(indices)]
        layout = ProtocolLayout(sub, names=names, fixed=fixed)
        starts = _build_starts(layout, sub_settings, names, y, options)
        outcome = _lm_multistart(layout, y, starts, options.objective,
                                 options, cap)
        if not outcome.converged:
            raise BlockFailure(f"block {block_idx}: no start converged")
        return dict(zip(names, outcome.x))

    def twin_candidates(block: dict) -> list:
        pairs = _twin_index_pairs(tuple(block))
        if not pairs:
            return [block]
        names = list(block)
        x = np.array([block[n] for n in names])
        li, pi_ = pairs[0]
        twin = dict(zip(names, _twin_image(x, li, pi_)))
        # canonical (lam <= pi) representative first, so exact ties pick it
        return [block, twin] if x[li] <= math.pi else [twin, block]

    b1 = solve_block(1, {})
    b2 = solve_block(2, b1)

    # each single-pair block alone cannot distinguish its reflection twin;
    # the dual-coupling settings of block 3 arbitrate all four combinations
    # (exact ties keep the earlier, canonically ordered branch)
    layout_full = ProtocolLayout(protocol)
    tie_tol = 1e-10 * max(1.0, float((y_all ** 2).sum()))
    best = None
    for c1 in twin_candidates(b1):
        for c2 in twin_candidates(b2):
            fixed12 = {**c1, **c2}
            try:
                b3 = solve_block(3, fixed12)
            except BlockFailure:
                continue
            solved = {**fixed12, **b3}
            x_full = np.array([solved[n] for n in protocol.unknown_names])
            f_full = float(_objective_values(
                layout_full.statistics(x_full[None, :]), y_all,
                options.objective)[0])
            if best is None or f_full < best[0] - max(tie_tol, 1e-6 * best[0]):
                best = (f_full, x_full)
    if best is None:
        raise BlockFailure("block 3: no start converged for any twin branch")
    f_full, x_full = best
    _, grad = objective_eval(x_full, y_all, protocol, options.objective)
    return _package_result(protocol, x_full, f_full,
                           float(np.abs(grad).max()), 3, True,
                           options.objective, y=y_all, options=options, cap=cap)


# ---------------------------------------------------------------------------
# Brute-force grid oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    names: tuple
    values: np.ndarray
    objective: float


def _axis_points(name: str, lo: float, hi: float, grid: int,
                 initial: bool) -> np.ndarray:
    kind = _param_kind(name)
    if kind == "phase":
        return lo + (hi - lo) * np.arange(grid) / grid
    if kind == "lam" and initial:
        return hi * (np.arange(grid) + 1) / grid
    return np.linspace(lo, hi, grid)


def _oracle_core(protocol: Protocol, indices, names, fixed, y, grid,
                 levels, cap) -> OracleResult:
    dim = protocol.dim
    _, coord_mats = _cartesian_basis(dim)
    settings = [protocol.settings[i] for i in indices]
    names = tuple(names)
    lam_names = [n for n in names if _param_kind(n) == "lam"]
    state_names = [n for n in names if _param_kind(n) != "lam"]
    fixed = dict(fixed or {})

    def gamma_value(pair_idx, values: dict):
        base = PHASE_NAMES[dim][pair_idx]
        beta = PHASE_TO_BETA[base]
        if base in values:
            return values[base]
        if beta in values:
            b = values[beta]
            return b if base == "gamma12" else -np.asarray(b)
        return 0.0

    def coords_from(values: dict) -> np.ndarray:
        merged = dict(fixed)
        merged.update(values)
        arrs = [np.asarray(merged.get(f"rho{i}{i}", 0.0), dtype=float)
                for i in range(dim)]
        for k, (i, j) in enumerate(COHERENCE_PAIRS[dim]):
            mag = np.asarray(merged.get(f"rho{i}{j}", 0.0), dtype=float)
            gam = np.asarray(gamma_value(k, merged), dtype=float)
            arrs.append(2.0 * mag * np.cos(gam))
            arrs.append(2.0 * mag * np.sin(gam))
        flat = np.broadcast_arrays(*arrs)
        return np.stack([a.ravel() for a in flat], axis=1)

    def design_for(lam_values: dict) -> np.ndarray:
        lam_only = {k: v for k, v in {**fixed, **lam_values}.items()
                    if _param_kind(k) == "lam"}
        unknowns = unknowns_from_dict(dim, lam_only) if lam_only else None
        rows = []
        for s in settings:
            gen = resolve(s, unknowns)
            u = smallmat.expi_neg(assemble_generator(gen))
            row = u[s.label, :]
            rows.append([float(np.real(row @ b @ row.conj()))
                         for b in coord_mats])
        return np.array(rows)

    windows = {n: (0.0, cap if _param_kind(n) == "mag" else TWO_PI)
               for n in names}
    zoom = max(2.0, (grid - 1) / 2.0)
    best_vals, best_obj = None, np.inf
    for level in range(levels + 1):
        initial = level == 0
        lam_pts = [_axis_points(n, *windows[n], grid, initial)
                   for n in lam_names]
        state_pts = [_axis_points(n, *windows[n], grid, initial)
                     for n in state_names]
        if state_pts:
            meshes = np.meshgrid(*state_pts, indexing="ij")
            grid_values = dict(zip(state_names, meshes))
            state_combo = np.stack([m.ravel() for m in meshes], axis=1)
        else:
            grid_values = {}
            state_combo = np.zeros((1, 0))
        coords = coords_from(grid_values)
        for lam_combo in (itertools.product(*lam_pts) if lam_pts else [()]):
            lam_values = dict(zip(lam_names, lam_combo))
            a = design_for(lam_values)
            obj = ((coords @ a.T - y) ** 2).sum(axis=1)
            idx = int(np.argmin(obj))
            if obj[idx] < best_obj:
                best_obj = float(obj[idx])
                vals = dict(lam_values)
                vals.update(dict(zip(state_names, state_combo[idx])))
                best_vals = vals
        if level == levels:
            break
        for n in names:
            lo, hi = windows[n]
            span = (hi - lo) / zoom
            center = best_vals[n]
            nlo, nhi = center - span / 2, center + span / 2
            kind = _param_kind(n)
            if kind == "mag":
                nlo = max(nlo, 0.0)
            elif kind == "lam":
                nlo, nhi = max(nlo, LAM_FLOOR), min(nhi, TWO_PI)
            windows[n] = (nlo, nhi)
    values = np.array([wrap_phase(best_vals[n])
                       if _param_kind(n) == "phase" else best_vals[n]
                       for n in names])
    return OracleResult(names, values, best_obj)


def grid_oracle(counts, protocol: Protocol, grid: int = 15,
                refine_levels: int = 4) -> OracleResult:
    """Exhaustive least-squares search on a recursively refined grid.

    Statistics are linear in the Cartesian state coordinates for fixed
    coupling strengths, so each strength combination costs one small design
    matrix and the state grid is swept with dense linear algebra.  The
    refinement window shrinks by (grid-1)/2 per level (at least 2) around
    the incumbent.  Deterministic.  The V-type protocol is searched block by
    block; any other protocol with more than six unknowns is refused.
    """
    y = counts if isinstance(counts, np.ndarray) else observed_values(counts)
    if len(y) != protocol.n_settings:
        raise DimensionMismatch("count vector length differs from settings")
    cap = max(2.0 * float(np.max(y, initial=0.0)), 1e-6)
    names = protocol.unknown_names
    if protocol.name.split("~")[0] == "V" and protocol.dim == 3:
        beta_mode = not protocol.phase_known

        def block_oracle(block_idx, fixed):
            indices, base_names = V_BLOCKS[block_idx - 1]
            block_names = _beta_names(base_names, beta_mode)
            res = _oracle_core(protocol, indices, block_names, fixed,
                               y[list(indices)], grid, refine_levels, cap)
            return dict(zip(res.names, res.values))

        def twin_candidates(block: dict) -> list:
            pairs = _twin_index_pairs(tuple(block))
            if not pairs:
                return [block]
            keys = list(block)
            x = np.array([block[n] for n in keys])
            li, pi_ = pairs[0]
            twin = dict(zip(keys, _twin_image(x, li, pi_)))
            return [block, twin] if x[li] <= math.pi else [twin, block]

        b1 = block_oracle(1, {})
        b2 = block_oracle(2, b1)
        layout = ProtocolLayout(protocol)
        tie_tol = 1e-10 * max(1.0, float((y ** 2).sum()))
        best = None
        # single-pair blocks cannot see their reflection twins; let the
        # dual-coupling settings arbitrate, as in block_solve_v (ties keep
        # the earlier, canonically ordered branch)
        for c1 in twin_candidates(b1):
            for c2 in twin_candidates(b2):
                fixed12 = {**c1, **c2}
                b3 = block_oracle(3, fixed12)
                solved = {**fixed12, **b3}
                values = np.array([solved[n] for n in names])
                total = float(_objective_values(
                    layout.statistics(values[None, :]), y, "least_squares")[0])
                if best is None or total < best[0] - max(tie_tol,
                                                         1e-6 * best[0]):
                    best = (total, values)
        total, values = best
        return OracleResult(tuple(names), values, total)
    if len(names) > 6:
        raise TooManyDims(f"{len(names)} unknowns exceed the full-grid limit of 6")
    result = _oracle_core(protocol, range(protocol.n_settings), names, {},
                          y, grid, refine_levels, cap)
    layout = ProtocolLayout(protocol)
    canonical = canonicalize_twins(layout, result.values)
    return OracleResult(result.names, canonical, result.objective)
