"""
Time-varying communication graphs and gossip mixing matrices.

A graph sequence assigns an undirected edge set to every communication
round ``k``. Three kinds are supported:

* ``static`` -- the same connected (or deliberately disconnected) graph
  at every round;
* ``per-step-connected`` -- an independently sampled connected graph at
  every round;
* ``tau-connected`` -- a round-robin decomposition of a base connected
  graph into ``tau`` edge batches, so the union of edges over any ``tau``
  consecutive rounds is connected.

Mixing matrices use Metropolis weights: entry ``1 / (1 + max(deg_i, deg_j))``
on edges, zero off the edge set, and the complementary mass on the
diagonal. These matrices are doubly stochastic and nonnegative, and over
any window of ``tau`` rounds they contract the distance to consensus by a
factor ``1 - lam`` that :func:`estimate_lambda` measures from the spectrum
of the window products.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphSequence",
    "MixingModel",
    "MixingReport",
    "NonContractiveSequenceError",
    "make_graph_sequence",
    "metropolis_matrix",
    "estimate_lambda",
    "validate_mixing",
]

STOCHASTICITY_TOL = 1e-12
CONTRACTION_TOL = 1e-12


class NonContractiveSequenceError(ValueError):
    """Raised when a probed window of mixing matrices does not contract."""


def _canonical_edges(n, edges):
    """Normalize an edge iterable to a frozenset of (i, j) with i < j."""
    out = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-loop ({a},{a}) is not allowed")
        i, j = (a, b) if a < b else (b, a)
        if not 0 <= i < j < n:
            raise ValueError(f"edge ({a},{b}) out of range for n={n}")
        out.add((i, j))
    return frozenset(out)


def _is_connected(n, edges):
    """BFS connectivity check on an undirected edge set."""
    if n <= 1:
        return True
    adj = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def _base_edges(n, topology, degree=None, rng=None):
    """Edge set of a named base topology on n nodes."""
    if topology == "complete":
        return {(i, j) for i in range(n) for j in range(i + 1, n)}
    if topology == "ring":
        if n == 1:
            return set()
        if n == 2:
            return {(0, 1)}
        return {(i, (i + 1) % n) if i + 1 < n else (0, n - 1) for i in range(n)}
    if topology == "path":
        return {(i, i + 1) for i in range(n - 1)}
    if topology == "star":
        return {(0, i) for i in range(1, n)}
    if topology == "empty":
        return set()
    if topology == "random":
        if rng is None:
            rng = np.random.default_rng(0)
        return _random_connected_edges(n, degree if degree is not None else 4, rng)
    raise ValueError(f"unknown topology {topology!r}")


def _random_connected_edges(n, degree, rng):
    """Random connected graph: random recursive tree plus extra random edges.

    The result has roughly ``n * degree / 2`` edges (capped at the complete
    graph), and is connected by construction.
    """
    if n == 1:
        return set()
    order = rng.permutation(n)
    edges = set()
    for idx in range(1, n):
        parent = order[rng.integers(0, idx)]
        a, b = int(order[idx]), int(parent)
        edges.add((min(a, b), max(a, b)))
    target = min(n * (n - 1) // 2, max(n - 1, math.ceil(n * degree / 2)))
    while len(edges) < target:
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return edges


@dataclass(frozen=True)
class GraphSequence:
    """Time-indexed undirected edge sets on ``n`` fixed nodes.

    ``edges_at(k)`` returns the edge set active during communication round
    ``k``. ``period`` is the length of the repeating cycle of edge sets
    (``None`` for aperiodic random sequences); it lets mixing matrices be
    cached.
    """

    n: int
    kind: str
    tau: int = 1
    period: int | None = 1
    _batches: tuple = field(default=None, repr=False)
    _seed: int | None = field(default=None, repr=False)
    _degree: int | None = field(default=None, repr=False)

    def edges_at(self, k):
        if k < 0:
            raise ValueError("time index must be >= 0")
        if self.kind == "per-step-connected":
            rng = np.random.default_rng([self._seed, k])
            return frozenset(_random_connected_edges(self.n, self._degree, rng))
        return self._batches[k % len(self._batches)]

    def degrees_at(self, k):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges_at(k):
            deg[i] += 1
            deg[j] += 1
        return deg


def make_graph_sequence(n, kind, **params):
    """Build a graph sequence of the requested kind.

    Parameters
    ----------
    n : int
        Number of nodes; must be >= 1.
    kind : str
        One of ``"static"``, ``"per-step-connected"``, ``"tau-connected"``.
    **params
        Kind-specific parameters. ``static``: ``topology`` (name or explicit
        ``edges`` list), optional ``degree`` and ``seed`` for
        ``topology="random"``. ``per-step-connected``: ``degree``, ``seed``.
        ``tau-connected``: ``tau`` plus the base topology parameters; the base
        graph is split into ``tau`` rotating edge batches.

    Returns
    -------
    GraphSequence

    Raises
    ------
    ValueError
        If ``n < 1``, the topology is unknown, or a ``tau-connected``
        request has a disconnected base graph (its union can then never be
        connected within ``tau`` steps).
    """
    if n < 1:
        raise ValueError("node count must be >= 1")
    if kind == "static":
        if "edges" in params:
            edges = _canonical_edges(n, params["edges"])
        else:
            rng = np.random.default_rng(params.get("seed", 0))
            edges = _canonical_edges(
                n,
                _base_edges(n, params.get("topology", "complete"),
                            params.get("degree"), rng),
            )
        return GraphSequence(n=n, kind=kind, tau=1, period=1, _batches=(edges,))
    if kind == "per-step-connected":
        seed = params.get("seed", 0)
        degree = params.get("degree", 4)
        return GraphSequence(n=n, kind=kind, tau=1, period=None,
                             _seed=seed, _degree=degree)
    if kind == "tau-connected":
        tau = int(params.get("tau", 1))
        if tau < 1:
            raise ValueError("tau must be >= 1")
        rng = np.random.default_rng(params.get("seed", 0))
        base = sorted(_canonical_edges(
            n,
            params.get("edges",
                       _base_edges(n, params.get("topology", "ring"),
                                   params.get("degree"), rng)),
        ))
        if not _is_connected(n, base):
            raise ValueError(
                "tau-connected schedule cannot cover a connected union: "
                "base graph is disconnected")
        batches = tuple(
            frozenset(e for idx, e in enumerate(base) if idx % tau == b)
            for b in range(tau)
        )
        return GraphSequence(n=n, kind=kind, tau=tau, period=tau, _batches=batches)
    raise ValueError(f"unknown graph sequence kind {kind!r}")


def metropolis_matrix(seq, k):
    """Metropolis mixing matrix of ``seq`` at round ``k``.

    Off-diagonal entries are ``1 / (1 + max(deg_i, deg_j))`` on edges and 0
    elsewhere; each diagonal entry absorbs the remaining mass so that rows
    and columns sum to one.
    """
    if k < 0:
        raise ValueError("time index must be >= 0")
    n = seq.n
    deg = seq.degrees_at(k)
    w = np.zeros((n, n))
    for i, j in seq.edges_at(k):
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


class MixingModel:
    """A mixing-matrix sequence with its contraction parameters.

    Wraps a :class:`GraphSequence` and serves the Metropolis matrix for any
    round through :meth:`matrix_at` (cached over the sequence period). The
    per-window contraction factor ``lam`` is measured lazily by
    :func:`estimate_lambda` unless supplied.
    """

    def __init__(self, seq, lam=None, probe_horizon=None):
        self.seq = seq
        self.n = seq.n
        self.tau = seq.tau
        self._lam = lam
        self._probe_horizon = probe_horizon
        self._cache = {}

    def matrix_at(self, k):
        if self.seq.period is not None:
            key = k % self.seq.period
            if key not in self._cache:
                self._cache[key] = metropolis_matrix(self.seq, key)
            return self._cache[key]
        return metropolis_matrix(self.seq, k)

    @property
    def lam(self):
        if self._lam is None:
            self._lam = estimate_lambda(self, self.tau, self._probe_horizon)
        return self._lam


def estimate_lambda(model, tau=None, horizon=None):
    """Measure the per-window contraction factor of a mixing sequence.

    For every probed window end ``k`` the product
    ``W(k) W(k-1) ... W(k-tau+1)`` is formed and the largest singular value
    of (product - uniform averaging matrix) is taken. The returned factor is
    one minus the worst such value. For the periodic sequences produced by
    :func:`make_graph_sequence` a probe of one period is exact; the default
    horizon of ``10 * tau`` windows covers it.

    Parameters
    ----------
    model : MixingModel
        The mixing sequence to probe.
    tau : int, optional
        Window length; defaults to the sequence's own ``tau``.
    horizon : int, optional
        Number of consecutive windows to probe (>= 1).

    Returns
    -------
    float
        Contraction factor in (0, 1].

    Raises
    ------
    NonContractiveSequenceError
        If any probed window has a singular value within ``1e-12`` of 1
        (e.g. a disconnected static graph, whose matrix is the identity).
    """
    tau = model.tau if tau is None else int(tau)
    horizon = 10 * tau if horizon is None else int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = model.n
    avg = np.full((n, n), 1.0 / n)
    worst = 0.0
    window = None
    for k in range(tau - 1 + horizon):
        w = model.matrix_at(k)
        window = w if window is None else w @ window
        if k >= tau - 1:
            sigma = np.linalg.svd(window - avg, compute_uv=False)[0]
            worst = max(worst, sigma)
            # slide: rebuild from scratch to keep the product exact
            window = None
            for back in range(tau - 1, 0, -1):
                w_b = model.matrix_at(k - back + 1)
                window = w_b if window is None else w_b @ window
    if worst >= 1.0 - CONTRACTION_TOL:
        raise NonContractiveSequenceError(
            f"window singular value {worst:.17g} reaches 1: "
            "sequence does not contract")
    return 1.0 - worst


@dataclass
class MixingReport:
    """Pass/fail record of the mixing-matrix checks for one matrix."""

    decentralized: bool
    doubly_stochastic: bool
    nonnegative: bool
    details: dict

    @property
    def passed(self):
        return self.decentralized and self.doubly_stochastic and self.nonnegative


def validate_mixing(w, seq, k):
    """Check one mixing matrix against its graph at round ``k``.

    Verifies the zero pattern off the edge set, double stochasticity within
    ``1e-12``, and entrywise nonnegativity. Failures are reported, not
    raised.
    """
    w = np.asarray(w, dtype=float)
    n = seq.n
    if w.shape != (n, n):
        raise ValueError(f"matrix shape {w.shape} does not match n={n}")
    edges = seq.edges_at(k)
    off_pattern = []
    for i in range(n):
        for j in range(n):
            if i != j and w[i, j] != 0.0:
                a, b = (i, j) if i < j else (j, i)
                if (a, b) not in edges:
                    off_pattern.append((i, j))
    row_err = float(np.abs(w.sum(axis=1) - 1.0).max())
    col_err = float(np.abs(w.sum(axis=0) - 1.0).max())
    min_entry = float(w.min())
    return MixingReport(
        decentralized=not off_pattern,
        doubly_stochastic=max(row_err, col_err) <= STOCHASTICITY_TOL,
        nonnegative=min_entry >= -STOCHASTICITY_TOL,
        details={
            "nonedge_entries": off_pattern,
            "row_sum_error": row_err,
            "col_sum_error": col_err,
            "min_entry": min_entry,
        },
    )
