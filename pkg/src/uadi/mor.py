"""Reduced-order models assembled from the engine's accumulators.

Every variant shares the interpolation basis; only the free parameter
(input map on side 1 / output map on side 2) changes, which relocates the
reduced poles.  Also provides interpolation verification against the full
model and low-rank square-root balanced truncation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import DimensionMismatch, RankDeficient, VariantUnavailable
from .systems import transfer_eval
from .uadi import UadiState

__all__ = [
    "ReducedModel",
    "build_rom",
    "basis_well_conditioned",
    "interpolation_check",
    "bt_square_root",
    "bt_from_factors",
]

VARIANTS = ("lyap", "sylv-pole", "ricc-observer", "inf-filter", "mp", "pr", "br")


@dataclass
class ReducedModel:
    """Dense realization (A, B, C, D) with implicit identity E."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    tag: str = ""

    @property
    def order(self):
        return self.A.shape[0]

    def poles(self):
        if self.order == 0:
            return np.array([])
        return spla.eigvals(self.A)

    def eval(self, s):
        if self.order == 0:
            return self.D.copy()
        x = spla.solve(complex(s) * np.eye(self.order) - self.A, self.B)
        return self.C @ x + self.D


def _sqrtm_spd(M):
    M = 0.5 * (M + M.T)
    w, U = spla.eigh(M)
    if np.min(w) <= 0:
        raise spla.LinAlgError("matrix is not positive definite")
    return (U * np.sqrt(w)) @ U.T, (U / np.sqrt(w)) @ U.T


def _middle_tilde(eq):
    """T Phat T^T: the equation's middle matrix in shared-basis coordinates."""
    if eq.Phat is None:
        return eq.T @ eq.T.T
    return eq.T @ eq.Phat @ eq.T.T


def build_rom(state, side, variant):
    """Assemble the reduced model of one side with the variant's free
    parameter; the variant decides where the reduced poles land."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; known: {VARIANTS}")
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    s1, s2 = state.sys1, state.sys2
    need = {
        "lyap": None,
        "sylv-pole": "sylv",
        "ricc-observer": "ricc_p" if side == 1 else "ricc_q",
        "inf-filter": "inf_p" if side == 1 else "inf_q",
        "mp": "mp_p" if side == 1 else "mp_q",
        "pr": "pr_p" if side == 1 else "pr_q",
        "br": "br_p" if side == 1 else "br_q",
    }[variant]
    if need is not None:
        if need not in state.enabled:
            raise VariantUnavailable(
                f"{variant} needs {need}: {state.skipped.get(need, 'not selected')}"
            )
        if need in state.degraded:
            raise VariantUnavailable(f"{need} is degraded: {state.degraded[need]}")

    if side == 1:
        Sv, Lv = state.Sv, state.Lv
        Chat = state.Gc.T
        D = s1.D
        if variant == "lyap":
            Bhat = Lv.T
        elif variant == "sylv-pole":
            sy = state.sylv
            kv, kw = sy.consumed_v, sy.consumed_w
            Sv, Lv = Sv[:kv, :kv], Lv[:, :kv]
            Chat = state.Gc[:kv].T
            Xinv = sy.Xinv if sy.mode == "direct" else sy.Tv @ sy.D @ sy.Tw.T
            Bhat = Xinv @ state.Lw[:, :kw].T
        elif variant == "ricc-observer":
            Bhat = _middle_tilde(state.eqs["ricc_p"]) @ Lv.T
        elif variant == "inf-filter":
            Bhat = _middle_tilde(state.eqs["inf_p"]) @ Lv.T
        elif variant == "mp":
            Bhat = state.eqs["mp_p"].T @ Lv.T @ D
        elif variant == "pr":
            sq, _ = _sqrtm_spd(D + D.T)
            Bhat = _middle_tilde(state.eqs["pr_p"]) @ Lv.T @ sq
        elif variant == "br":
            Dbi = spla.inv(np.eye(s1.p) - D @ D.T)
            _, isq = _sqrtm_spd(np.eye(s1.m) + D.T @ Dbi @ D)
            Bhat = _middle_tilde(state.eqs["br_p"]) @ Lv.T @ isq
        Ahat = Sv - Bhat @ Lv
        return ReducedModel(Ahat, Bhat, Chat, D.copy(), tag=f"side1:{variant}")

    Sw, Lw = state.Sw, state.Lw
    Bhat = state.Gb
    D = s2.D
    if variant == "lyap":
        Chat = Lw
    elif variant == "sylv-pole":
        sy = state.sylv
        kv, kw = sy.consumed_v, sy.consumed_w
        Sw, Lw = Sw[:kw, :kw], Lw[:, :kw]
        Bhat = state.Gb[:kw]
        Xinv = sy.Xinv if sy.mode == "direct" else sy.Tv @ sy.D @ sy.Tw.T
        Chat = state.Lv[:, :kv] @ Xinv
    elif variant == "ricc-observer":
        Chat = Lw @ _middle_tilde(state.eqs["ricc_q"])
    elif variant == "inf-filter":
        Chat = Lw @ _middle_tilde(state.eqs["inf_q"])
    elif variant == "mp":
        Chat = D @ Lw @ state.eqs["mp_q"].T.T
    elif variant == "pr":
        sq, _ = _sqrtm_spd(D + D.T)
        Chat = sq @ Lw @ _middle_tilde(state.eqs["pr_q"])
    elif variant == "br":
        Db2i = spla.inv(np.eye(s2.m) - D.T @ D)
        _, isq = _sqrtm_spd(np.eye(s2.p) + D @ Db2i @ D.T)
        Chat = isq @ Lw @ _middle_tilde(state.eqs["br_q"])
    Ahat = Sw.T - Lw.T @ Chat
    return ReducedModel(Ahat, Bhat, Chat, D.copy(), tag=f"side2:{variant}")


def basis_well_conditioned(V, threshold=1e-13):
    """Whether the shared basis still has usable numerical column rank.

    Interpolation holds exactly only for a full-column-rank basis; once the
    smallest singular value falls below ``threshold`` times the largest,
    interpolation checks should be treated as indicative, not assertable.
    """
    if V.shape[1] == 0:
        return True
    sv = spla.svdvals(V)
    return sv[-1] > threshold * sv[0]


def interpolation_check(sys, rom, points):
    """Largest relative transfer-function deviation over the given points."""
    worst = 0.0
    for s in points:
        G = transfer_eval(sys, s)
        Gr = rom.eval(s)
        dev = spla.norm(G - Gr, 2) / (1.0 + spla.norm(G, 2))
        worst = max(worst, dev)
    return worst


def bt_from_factors(sys, Zp, Zq, r, threshold=1e-12):
    """Square-root balanced truncation from Gramian factors P ~ Zp Zp^T,
    Q ~ Zq Zq^T; returns (ReducedModel, approximate Hankel values)."""
    M = Zq.T @ (sys.E @ Zp)
    U, sv, Vt = spla.svd(M, full_matrices=False)
    hankel = sv.copy()
    if r == 0:
        return ReducedModel(np.zeros((0, 0)), np.zeros((0, sys.m)),
                            np.zeros((sys.p, 0)), sys.D.copy(), tag="bt:0"), hankel
    rank = int(np.sum(sv > threshold * sv[0])) if sv.size else 0
    if r > rank:
        raise RankDeficient(
            f"requested order {r} exceeds numerical rank {rank}"
        )
    scale = 1.0 / np.sqrt(sv[:r])
    Vr = Zp @ (Vt[:r].T * scale)
    Wr = Zq @ (U[:, :r] * scale)
    Ar = Wr.T @ (sys.A @ Vr)
    Br = Wr.T @ sys.B
    Cr = sys.C @ Vr
    return ReducedModel(Ar, Br, Cr, sys.D.copy(), tag=f"bt:{r}"), hankel


def bt_square_root(state, r):
    """Balanced truncation from the engine's Gramian factors (needs the
    single-system mode, G1 = G2)."""
    if not isinstance(state, UadiState):
        raise DimensionMismatch("expected an engine state")
    if not state.sys1.same_realization(state.sys2):
        raise VariantUnavailable("balanced truncation needs G1 = G2")
    return bt_from_factors(state.sys1, state.V, state.W, r)
