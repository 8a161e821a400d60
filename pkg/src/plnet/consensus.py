"""
Stacked states, the averaging projection, and the gossip subroutine.

A stacked state is a plain ``(n, d)`` float array whose row ``i`` is node
``i``'s copy of the parameter vector. The consensus set is the subspace of
states with all rows equal; projecting onto it replaces every row by the
column-wise mean. Gossip multiplies the state by one mixing matrix per
round, advancing a global communication clock so that time-varying
sequences stay aligned across calls.
"""

import numpy as np

__all__ = ["CommClock", "average_projection", "consensus_error", "run_consensus"]


class CommClock:
    """Global communication-round cursor owned by one run.

    Monotonically nondecreasing; each gossip call of length ``T`` advances
    it by exactly ``T``.
    """

    def __init__(self, t0=0):
        if t0 < 0:
            raise ValueError("clock must start at a nonnegative round")
        self.t0 = int(t0)

    def advance(self, rounds):
        if rounds < 0:
            raise ValueError("cannot advance the clock backwards")
        self.t0 += int(rounds)

    def __repr__(self):
        return f"CommClock(t0={self.t0})"


def average_projection(x):
    """Project a stacked state onto the consensus subspace.

    Every row of the result equals the column-wise mean of ``x``; the map is
    linear and idempotent.
    """
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0, keepdims=True)
    return np.broadcast_to(mean, x.shape).copy()


def consensus_error(x):
    """Frobenius distance between a stacked state and its row average."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - x.mean(axis=0, keepdims=True)))


def run_consensus(z0, rounds, model, clock):
    """Run ``rounds`` gossip rounds starting from the clock's current time.

    Applies ``W(t0 + rounds - 1) ... W(t0 + 1) W(t0)`` to ``z0`` and
    advances ``clock`` by ``rounds``. Double stochasticity keeps the row
    mean invariant, so the projection of the output equals the projection
    of the input up to floating point.

    Parameters
    ----------
    z0 : ndarray
        Stacked ``(n, d)`` state.
    rounds : int
        Number of communication rounds; 0 returns ``z0`` unchanged.
    model : topology.MixingModel
        Source of mixing matrices.
    clock : CommClock
        Global round cursor, advanced in place.
    """
    if rounds < 0:
        raise ValueError("round count must be >= 0")
    if rounds == 0:
        return z0
    z = np.asarray(z0, dtype=float)
    t0 = clock.t0
    for k in range(rounds):
        z = model.matrix_at(t0 + k) @ z
    clock.advance(rounds)
    return z
