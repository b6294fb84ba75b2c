"""Interface-conforming 1D meshes and discrete Neumann Laplacians.

The prey lives on ``[0, L]`` and the predator on ``[0, a]``.  Each side of the
interface carries its own uniform mesh; the node at ``x = a`` is shared.  The
Laplacians use a reflected ghost at the outer boundaries and the three-point
nonuniform stencil at the interface, which makes ``W @ Lap`` symmetric for the
trapezoid weights ``W`` (the scheme is a vertex-centred finite-volume method).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SizeMismatch

__all__ = ["DualGrid", "build_grid", "default_resolution"]


@dataclass(frozen=True)
class DualGrid:
    a: float
    L: float
    n_pred: int
    n_ex: int

    def __post_init__(self):
        if not (0.0 < self.a < self.L):
            raise DomainError(f"need 0 < a < L, got a={self.a}, L={self.L}")
        if self.n_pred < 3 or self.n_ex < 3:
            raise DomainError(f"need at least 3 nodes per sub-mesh, got {self.n_pred}, {self.n_ex}")

    @property
    def h_pred(self) -> float:
        return self.a / (self.n_pred - 1)

    @property
    def h_ex(self) -> float:
        return (self.L - self.a) / (self.n_ex - 1)

    @property
    def iface(self) -> int:
        """Index of the shared interface node in ``nodes_u``."""
        return self.n_pred - 1

    @property
    def n_u(self) -> int:
        return self.n_pred + self.n_ex - 1

    @cached_property
    def nodes_v(self) -> np.ndarray:
        x = np.linspace(0.0, self.a, self.n_pred)
        x[-1] = self.a
        return x

    @cached_property
    def nodes_u(self) -> np.ndarray:
        right = np.linspace(self.a, self.L, self.n_ex)
        right[-1] = self.L
        return np.concatenate([self.nodes_v, right[1:]])

    @cached_property
    def weights_u(self) -> np.ndarray:
        """Composite trapezoid weights on ``nodes_u``."""
        hp, he = self.h_pred, self.h_ex
        w = np.empty(self.n_u)
        w[: self.iface] = hp
        w[self.iface + 1 :] = he
        w[0] = hp / 2
        w[self.iface] = (hp + he) / 2
        w[-1] = he / 2
        return w

    @cached_property
    def weights_v(self) -> np.ndarray:
        w = np.full(self.n_pred, self.h_pred)
        w[0] = w[-1] = self.h_pred / 2
        return w

    @cached_property
    def predation_weight(self) -> np.ndarray:
        """Discrete indicator of the predator domain on ``nodes_v``.

        At the interface node only the predator-side half cell is inside A, so
        the node carries the fraction h_pred / (h_pred + h_ex).  This keeps the
        discrete total-predator balance exact.
        """
        chi = np.ones(self.n_pred)
        chi[-1] = self.h_pred / (self.h_pred + self.h_ex)
        return chi

    @cached_property
    def lap_u(self) -> sp.csr_matrix:
        hp, he = self.h_pred, self.h_ex
        n = self.n_u
        i = self.iface
        lower = np.zeros(n - 1)
        upper = np.zeros(n - 1)
        diag = np.zeros(n)
        # predator side
        lower[: i] = 1.0 / hp**2
        upper[: i] = 1.0 / hp**2
        diag[: i] = -2.0 / hp**2
        # exclusion side
        lower[i:] = 1.0 / he**2
        upper[i:] = 1.0 / he**2
        diag[i + 1 :] = -2.0 / he**2
        # reflected ghosts
        upper[0] = 2.0 / hp**2
        lower[-1] = 2.0 / he**2
        # interface: 2[he u_{i-1} - (hp+he) u_i + hp u_{i+1}] / (hp he (hp+he))
        den = hp * he * (hp + he)
        cl, cr = 2.0 * he / den, 2.0 * hp / den
        total = cl + cr
        # recompute the smaller coefficient as total - larger (exact by Sterbenz),
        # so the interface row sums to exactly zero in floating point
        if cl >= cr:
            cr = total - cl
        else:
            cl = total - cr
        lower[i - 1] = cl
        diag[i] = -total
        upper[i] = cr
        return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")

    @cached_property
    def lap_v(self) -> sp.csr_matrix:
        h = self.h_pred
        n = self.n_pred
        lower = np.full(n - 1, 1.0 / h**2)
        upper = np.full(n - 1, 1.0 / h**2)
        diag = np.full(n, -2.0 / h**2)
        upper[0] = 2.0 / h**2
        lower[-1] = 2.0 / h**2
        return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")

    def laplacian_u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_u:
            raise SizeMismatch(f"u has {u.shape[-1]} entries, grid has {self.n_u} u-nodes")
        return self.lap_u @ u

    def laplacian_v(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n_pred:
            raise SizeMismatch(f"v has {v.shape[-1]} entries, grid has {self.n_pred} v-nodes")
        return self.lap_v @ v

    def integrate_u(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_u:
            raise SizeMismatch(f"u has {u.shape[-1]} entries, grid has {self.n_u} u-nodes")
        return u @ self.weights_u

    def integrate_v(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n_pred:
            raise SizeMismatch(f"v has {v.shape[-1]} entries, grid has {self.n_pred} v-nodes")
        return v @ self.weights_v

    def restrict(self, u) -> np.ndarray:
        """Restriction of a u-field to the predator nodes."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] == self.n_pred:
            return u
        if u.shape[-1] != self.n_u:
            raise SizeMismatch(f"field has {u.shape[-1]} entries; expected {self.n_u} or {self.n_pred}")
        return u[..., : self.n_pred]

    def describe(self) -> dict:
        return {
            "a": self.a,
            "L": self.L,
            "n_pred": self.n_pred,
            "n_ex": self.n_ex,
            "h_pred": self.h_pred,
            "h_ex": self.h_ex,
            "interface_stencil": "three-point nonuniform, shared node",
            "interface_predation_fraction": self.h_pred / (self.h_pred + self.h_ex),
        }


def build_grid(a: float, L: float, n_pred: int, n_ex: int) -> DualGrid:
    return DualGrid(float(a), float(L), int(n_pred), int(n_ex))


def default_resolution(a: float, L: float, d_u: float, r: float) -> tuple[int, int]:
    """Node counts with max spacing <= min(0.005 L, 0.1 sqrt(d_u / r))."""
    if not (0.0 < a < L):
        raise DomainError(f"need 0 < a < L, got a={a}, L={L}")
    h = min(0.005 * L, 0.1 * math.sqrt(d_u / r))
    n_pred = max(3, math.ceil(a / h - 1e-9) + 1)
    n_ex = max(3, math.ceil((L - a) / h - 1e-9) + 1)
    return n_pred, n_ex
