"""Leading eigen-triple (alpha, nu, h) of the truncated count sub-generator.

States 1..n_max; transitions to 0 or above n_max leak out (killing), which is
conservative and whose bias is measurable by doubling n_max.  The solver is
power iteration on I + Q/c with c above the maximal exit rate, so the leading
eigenvalue 1 - alpha/c of the positive operator dominates.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .counts import OffspringDist


class ConvergenceError(RuntimeError):
    pass


class TruncationError(RuntimeError):
    pass


@dataclass
class SpectralSolution:
    n_max: int
    rate: float
    alpha: float
    nu: np.ndarray  # probability vector over states 1..n_max
    h: np.ndarray  # positive, normalized so nu @ h = 1
    residual_nu: float
    residual_h: float
    iterations: int

    def qprocess_stationary(self) -> np.ndarray:
        w = self.nu * self.h
        return w / w.sum()

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"n_max {self.n_max}\nrate {self.rate!r}\nalpha {self.alpha!r}\n")
        buf.write(f"residual_nu {self.residual_nu!r}\nresidual_h {self.residual_h!r}\n")
        buf.write(f"iterations {self.iterations}\n")
        buf.write("nu " + " ".join(repr(float(x)) for x in self.nu) + "\n")
        buf.write("h " + " ".join(repr(float(x)) for x in self.h) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "SpectralSolution":
        fields = {}
        for line in text.strip().splitlines():
            key, _, rest = line.partition(" ")
            fields[key] = rest
        return cls(
            n_max=int(fields["n_max"]),
            rate=float(fields["rate"]),
            alpha=float(fields["alpha"]),
            nu=np.array([float(x) for x in fields["nu"].split()]),
            h=np.array([float(x) for x in fields["h"].split()]),
            residual_nu=float(fields["residual_nu"]),
            residual_h=float(fields["residual_h"]),
            iterations=int(fields["iterations"]),
        )


def build_subgenerator(dist: OffspringDist, n_max: int, rate: float = 1.0) -> scipy.sparse.csr_matrix:
    """Sub-generator on states 1..n_max (row i = state i+1)."""
    rows, cols, vals = [], [], []
    for i in range(1, n_max + 1):
        rows.append(i - 1)
        cols.append(i - 1)
        vals.append(-rate * i)
        for z, p in zip(dist.values, dist.probs):
            j = i - 1 + z
            if 1 <= j <= n_max and p > 0:
                rows.append(i - 1)
                cols.append(j - 1)
                vals.append(rate * i * p)
    mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n_max, n_max))
    return mat.tocsr()


def spectral_oracle(
    dist: OffspringDist,
    n_max: int = 200,
    tol: float = 1e-10,
    rate: float = 1.0,
    max_iter: int = 10**6,
) -> SpectralSolution:
    """Power iteration for the Perron pair of the sub-generator.

    nu is returned as a probability vector, h normalized so nu @ h = 1;
    residuals are ||nu Q + alpha nu||_1 and ||Q h + alpha h||_inf / ||h||_inf.
    """
    if n_max < 10:
        raise ValueError("n_max must be >= 10")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not dist.subcritical:
        raise ValueError("spectral oracle requires a subcritical offspring law")
    q = build_subgenerator(dist, n_max, rate)
    qt = q.T.tocsr()
    c = rate * n_max * max(1.0, dist.max_children) + 1.0
    # A = I + Q/c acting on column vectors; nu iterates through A^T
    nu = np.full(n_max, 1.0 / n_max)
    h = np.ones(n_max)
    alpha = rate
    for it in range(1, max_iter + 1):
        nu_new = nu + (qt @ nu) / c
        h_new = h + (q @ h) / c
        nu_sum = nu_new.sum()
        if nu_sum <= 0:
            raise ConvergenceError("left iterate lost positivity")
        alpha = c * (1.0 - nu_sum)  # nu entered the step normalized to sum 1
        nu = nu_new / nu_sum
        h = h_new / h_new.max()
        if it % 50 == 0 or it == max_iter:
            res_nu = float(np.abs(qt @ nu + alpha * nu).sum())
            res_h = float(np.abs(q @ h + alpha * h).max() / np.abs(h).max())
            if res_nu < tol and res_h < tol:
                scale = float(nu @ h)
                return SpectralSolution(
                    n_max, rate, float(alpha), nu, h / scale, res_nu, res_h, it
                )
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (residuals {res_nu:.2e}, {res_h:.2e})"
    )


def dense_eig_reference(dist: OffspringDist, n_max: int, rate: float = 1.0):
    """Independent dense-eigensolver oracle for cross-checking."""
    q = build_subgenerator(dist, n_max, rate).toarray()
    w, vl, vr = scipy.linalg.eig(q, left=True, right=True)
    idx = int(np.argmax(w.real))
    alpha = -float(w[idx].real)
    nu = np.abs(vl[:, idx].real)
    nu = nu / nu.sum()
    h = np.abs(vr[:, idx].real)
    h = h / float(nu @ h)
    return alpha, nu, h


def q_process_simulate(
    sol: SpectralSolution,
    dist: OffspringDist,
    initial: int,
    horizon: float,
    stream: np.random.Generator,
) -> dict:
    """Trajectory of the h-transform chain q~(i,j) = q(i,j) h_j / h_i.

    Never absorbs; returns the time-weighted occupation law and extremes.
    Escaping the truncation raises TruncationError with the offending state.
    """
    if not 1 <= initial <= sol.n_max:
        raise TruncationError(f"initial state {initial} outside 1..{sol.n_max}")
    rate = sol.rate
    h = sol.h
    occupation = np.zeros(sol.n_max, dtype=np.float64)
    i = initial
    t = 0.0
    visits_zero = 0
    state_min, state_max = i, i
    while t < horizon:
        weights = []
        targets = []
        for z, p in zip(dist.values, dist.probs):
            j = i - 1 + z
            if j == i:
                continue
            if j < 1:
                continue  # h-transform forbids absorption
            if j > sol.n_max:
                raise TruncationError(f"state {j} escapes truncation {sol.n_max}")
            weights.append(rate * i * p * h[j - 1] / h[i - 1])
            targets.append(j)
        total = float(sum(weights))
        dt = stream.exponential(1.0 / total)
        if t + dt >= horizon:
            occupation[i - 1] += horizon - t
            t = horizon
            break
        occupation[i - 1] += dt
        t += dt
        u = stream.uniform() * total
        acc = 0.0
        for w_, j_ in zip(weights, targets):
            acc += w_
            if u < acc:
                i = j_
                break
        if i == 0:
            visits_zero += 1
        state_min = min(state_min, i)
        state_max = max(state_max, i)
    return {
        "occupation": occupation / occupation.sum(),
        "visits_zero": visits_zero,
        "state_min": state_min,
        "state_max": state_max,
    }
