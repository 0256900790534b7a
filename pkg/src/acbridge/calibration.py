"""Recovery of the six edge impedances of the assembled bridge fixture.

Once cabled up, the bridge is a four-terminal network: none of its six
branch impedances can be probed in isolation, but the driving-point
impedance between every terminal pair can.  Each such measurement mixes
all six branches; this module solves the resulting nonlinear system.

Two independent routes compute the pairwise impedance: a nodal reduction
of the complex graph Laplacian (production path, handles OPEN edges) and
a spanning-tree closed form (cross-check, finite edges only).  The solver
is a Powell dogleg trust region on a log-magnitude/phase parametrisation,
which keeps pF-scale reactances and megohm resistances equally
conditioned and cannot flip a magnitude through zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import BridgeConfig, Impedance
from .errors import NotConverged, SingularJacobian, SingularNetwork

#: the six unordered terminal pairs of the four-pole fixture, canonical order
ALL_PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def canonical_pair(i: int, j: int) -> tuple[int, int]:
    if i == j or not (0 <= i <= 3 and 0 <= j <= 3):
        raise ValueError(f"terminal pair must be two distinct poles in 0..3, got ({i}, {j})")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class NetworkEdges:
    """All six branch impedances of the K4 fixture network."""

    z: dict[tuple[int, int], Impedance]

    def __post_init__(self):
        keys = {canonical_pair(*p) for p in self.z}
        if keys != set(ALL_PAIRS):
            missing = sorted(set(ALL_PAIRS) - keys)
            raise ValueError(f"edges incomplete, missing pairs: {missing}")
        object.__setattr__(
            self, "z", {canonical_pair(*p): v for p, v in self.z.items()}
        )

    def __getitem__(self, pair) -> Impedance:
        return self.z[canonical_pair(*pair)]


@dataclass(frozen=True)
class CalibrationMeasurements:
    """Six pairwise driving-point measurements taken at frequency f."""

    z_meas: dict[tuple[int, int], Impedance]
    f: float
    passivity_tol: float = 1e-6

    def __post_init__(self):
        keys = {canonical_pair(*p) for p in self.z_meas}
        if keys != set(ALL_PAIRS):
            missing = sorted(set(ALL_PAIRS) - keys)
            raise ValueError(f"measurements incomplete, missing pairs: {missing}")
        object.__setattr__(
            self, "z_meas", {canonical_pair(*p): v for p, v in self.z_meas.items()}
        )
        if self.f <= 0:
            raise ValueError("measurement frequency must be positive")
        for p, z in self.z_meas.items():
            if z.is_open:
                continue
            if z.re < -self.passivity_tol * abs(z):
                raise ValueError(f"measurement {p} violates passivity (Re < 0)")

    def __getitem__(self, pair) -> Impedance:
        return self.z_meas[canonical_pair(*pair)]


@dataclass
class SolverReport:
    iterations: int
    residual_norm: float
    converged: bool
    condition_estimate: float
    residual_history: list = field(default_factory=list, repr=False)


def _components(active: list[tuple[int, int]]) -> list[int]:
    """Union-find roots of the 4 nodes under the given edges."""
    parent = list(range(4))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in active:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return [find(n) for n in range(4)]


def pairwise_measured(edges: NetworkEdges, i: int, j: int) -> Impedance:
    """Driving-point impedance between poles i and j of the full network.

    Nodal solve on the component containing i and j; returns OPEN if the
    two poles are not connected by finite edges.
    """
    i, j = canonical_pair(i, j)
    finite = [(p, z) for p, z in edges.z.items() if not z.is_open]
    roots = _components([p for p, _ in finite])
    if roots[i] != roots[j]:
        return Impedance.OPEN
    nodes = [n for n in range(4) if roots[n] == roots[i]]
    idx = {n: k for k, n in enumerate(nodes)}
    lap = np.zeros((len(nodes), len(nodes)), dtype=complex)
    for (a, b), z in finite:
        if a not in idx or b not in idx:
            continue
        y = z.y
        ia, ib = idx[a], idx[b]
        lap[ia, ia] += y
        lap[ib, ib] += y
        lap[ia, ib] -= y
        lap[ib, ia] -= y
    keep = [k for k in range(len(nodes)) if nodes[k] != j]
    red = lap[np.ix_(keep, keep)]
    rhs = np.zeros(len(keep), dtype=complex)
    rhs[keep.index(idx[i])] = 1.0
    try:
        v = np.linalg.solve(red, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNetwork(f"nodal system singular for pair ({i}, {j})") from exc
    return Impedance.from_complex(v[keep.index(idx[i])])


def _enumerate_tree_terms():
    """Complement-edge index sets for the matrix-tree closed form."""
    edge_idx = {p: k for k, p in enumerate(ALL_PAIRS)}
    trees = []
    for sub in itertools.combinations(ALL_PAIRS, 3):
        if len(set(_components(list(sub)))) == 1:
            trees.append(tuple(edge_idx[p] for p in ALL_PAIRS if p not in sub))
    forests = {}
    for (i, j) in ALL_PAIRS:
        sep = []
        for sub in itertools.combinations(ALL_PAIRS, 2):
            roots = _components(list(sub))
            if roots[i] != roots[j]:
                sep.append(tuple(edge_idx[p] for p in ALL_PAIRS if p not in sub))
        forests[(i, j)] = sep
    return trees, forests


_TREES, _FORESTS = _enumerate_tree_terms()


def pairwise_measured_closed_form(edges: NetworkEdges, i: int, j: int) -> Impedance:
    """Spanning-tree closed form of the pairwise impedance (finite edges only).

    Z(i,j) = sum over i|j-separating two-edge forests of the four absent
    edges' product, divided by the sum over spanning trees of the three
    absent edges' product.  Independent of the nodal solve; used as its
    cross-check.
    """
    pair = canonical_pair(i, j)
    zv = []
    for p in ALL_PAIRS:
        z = edges[p]
        if z.is_open:
            raise ValueError("closed form requires all six edges finite")
        zv.append(z.z)
    den = sum(zv[a] * zv[b] * zv[c] for (a, b, c) in _TREES)
    num = sum(zv[a] * zv[b] * zv[c] * zv[d] for (a, b, c, d) in _FORESTS[pair])
    if den == 0:
        raise SingularNetwork(f"tree sum vanished for pair {pair}")
    return Impedance.from_complex(num / den)


def _pack(edges: NetworkEdges) -> np.ndarray:
    x = np.empty(12)
    for k, p in enumerate(ALL_PAIRS):
        z = edges[p].z
        x[2 * k] = math.log(abs(z))
        x[2 * k + 1] = math.atan2(z.imag, z.real)
    return x


def _unpack(x: np.ndarray) -> NetworkEdges:
    z = {}
    for k, p in enumerate(ALL_PAIRS):
        mag = math.exp(x[2 * k])
        z[p] = Impedance(mag * math.cos(x[2 * k + 1]), mag * math.sin(x[2 * k + 1]))
    return NetworkEdges(z)


def _residual(x: np.ndarray, meas: CalibrationMeasurements) -> np.ndarray:
    edges = _unpack(x)
    r = np.empty(12)
    for k, p in enumerate(ALL_PAIRS):
        zm = meas[p].z
        d = (pairwise_measured(edges, *p).z - zm) / abs(zm)
        r[2 * k] = d.real
        r[2 * k + 1] = d.imag
    return r


def _jacobian(x: np.ndarray, meas: CalibrationMeasurements, f0: np.ndarray) -> np.ndarray:
    h = 1e-7
    jac = np.empty((12, 12))
    for k in range(12):
        xp = x.copy()
        xp[k] += h
        jac[:, k] = (_residual(xp, meas) - f0) / h
    return jac


def default_initial_edges(meas: CalibrationMeasurements) -> NetworkEdges:
    """Each edge started at twice its own pair's measurement.

    Exact for the fully symmetric network and a good generic scale guess.
    """
    return NetworkEdges({p: Impedance.from_complex(2.0 * meas[p].z) for p in ALL_PAIRS})


def solve_network(
    meas: CalibrationMeasurements,
    initial: NetworkEdges | None = None,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> tuple[NetworkEdges, SolverReport]:
    """Retrieve all six edges from the six pairwise measurements.

    Powell dogleg trust region on (ln|Z|, arg Z) per edge; the residual is
    the relative complex mismatch of each pairwise prediction.  Accepted
    steps strictly decrease the residual norm.  Raises NotConverged (with
    the best iterate attached) after max_iter, SingularJacobian if no
    descent direction exists.
    """
    if initial is None:
        initial = default_initial_edges(meas)
    x = _pack(initial)
    f = _residual(x, meas)
    norm = float(np.linalg.norm(f))
    history = [norm]
    radius = 1.0
    max_radius = 10.0
    iters = 0
    jac = None
    while norm > tol and iters < max_iter:
        iters += 1
        jac = _jacobian(x, meas, f)
        grad = jac.T @ f
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < 1e-300 or not np.isfinite(grad_norm):
            raise SingularJacobian("zero gradient with residual above tolerance")
        # Gauss-Newton step (lstsq tolerates rank deficiency)
        p_gn, _, rank, _ = np.linalg.lstsq(jac, -f, rcond=None)
        if rank == 0:
            raise SingularJacobian("Jacobian has rank zero")
        jg = jac @ grad
        t_cauchy = grad_norm**2 / float(jg @ jg)
        p_sd = -t_cauchy * grad

        improved = False
        while radius > 1e-13:
            gn_norm = float(np.linalg.norm(p_gn))
            sd_norm = float(np.linalg.norm(p_sd))
            if gn_norm <= radius:
                p = p_gn
            elif sd_norm >= radius:
                p = (radius / sd_norm) * p_sd
            else:
                dd = p_gn - p_sd
                aq = float(dd @ dd)
                bq = 2.0 * float(p_sd @ dd)
                cq = sd_norm**2 - radius**2
                s = (-bq + math.sqrt(bq * bq - 4.0 * aq * cq)) / (2.0 * aq)
                p = p_sd + s * dd
            x_new = x + p
            f_new = _residual(x_new, meas)
            norm_new = float(np.linalg.norm(f_new))
            pred = norm**2 - float(np.linalg.norm(f + jac @ p)) ** 2
            actual = norm**2 - norm_new**2
            rho = actual / pred if pred > 0 else -1.0
            if norm_new < norm:
                x, f, norm = x_new, f_new, norm_new
                history.append(norm)
                if rho > 0.75 and abs(float(np.linalg.norm(p)) - radius) < 1e-12:
                    radius = min(2.0 * radius, max_radius)
                elif rho < 0.25:
                    radius *= 0.5
                improved = True
                break
            radius *= 0.25
        if not improved:
            break

    cond = float(np.linalg.cond(jac)) if jac is not None else math.nan
    report = SolverReport(
        iterations=iters,
        residual_norm=norm,
        converged=bool(norm <= tol),
        condition_estimate=cond,
        residual_history=history,
    )
    edges = _unpack(x)
    if not report.converged:
        raise NotConverged(
            f"residual {norm:.3g} above tolerance {tol:g} after {iters} iterations",
            edges=edges,
            report=report,
        )
    return edges, report


def bridge_config_from_edges(
    edges: NetworkEdges, v_hat: float, f_gen: float
) -> tuple[BridgeConfig, Impedance]:
    """Map fixture edges onto a BridgeConfig plus the open-correction hint.

    Pole labelling: 0 ground, 1 generator hot, 2 DUT-side midpoint, 3
    reference-side midpoint.  The edge across the generator (0,1) drops
    out; the edge parallel to the DUT (0,2) is returned as the fallback
    z_open value for when no open measurement can be taken.
    """
    cfg = BridgeConfig(
        z1=edges[(1, 2)],
        z2=edges[(1, 3)],
        z3=edges[(0, 3)],
        zm=edges[(2, 3)],
        v_hat=v_hat,
        f_gen=f_gen,
    )
    return cfg, edges[(0, 2)]
