"""Quantitative K-theory element checks at finite scale.

Quasi-projections and quasi-unitaries are certified by residuals at a
propagation scale r and tolerance eps in (0, 1/4); the index form I(F) and
its partition-of-unity smoothing realize assembly-map representatives whose
residuals can be measured directly.  Localisation paths are finite sample
lists with nonincreasing propagation, standing in for functions on [0, inf)
whose propagation tends to zero.

Everything here certifies representatives and residuals; deciding
quantitative homotopy classes is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bandops import (
    BandOperator,
    block2x2,
    operator_norm,
    spaces_match,
)
from .lifting import LiftWindow, lift_operator
from .spaces import Cover, FiniteSpace

_SELF_ADJOINT_TOL = 1e-12
_ROUND_TOL = 1e-10
_GAP_TOL = 1e-9


@dataclass(frozen=True)
class QuantParams:
    """Propagation scale and tolerance for quasi-element checks."""

    r: int
    eps: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError(f"propagation scale must be >= 0, got {self.r}")
        if not 0 < self.eps < 0.25:
            raise ValueError(
                f"tolerance must lie strictly in (0, 1/4), got {self.eps}")


@dataclass(frozen=True)
class QuasiVerdict:
    """Residuals of a quasi-projection or quasi-unitary check."""

    kind: str
    passed: bool
    self_adjoint_residual: float | None
    defect_residuals: tuple[float, ...]
    propagation_excess: int
    params: QuantParams

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "self_adjoint_residual": self.self_adjoint_residual,
            "defect_residuals": list(self.defect_residuals),
            "propagation_excess": self.propagation_excess,
            "r": self.params.r,
            "eps": self.params.eps,
        }


def check_quasi_projection(p: BandOperator, params: QuantParams) -> QuasiVerdict:
    """p = p*, ||p^2 - p|| <= eps, propagation <= r; residuals reported."""
    a = p.entries
    sa = operator_norm(a - a.conj().T)
    idem = operator_norm(a @ a - a)
    excess = p.propagation - params.r
    passed = sa <= _SELF_ADJOINT_TOL and idem <= params.eps and excess <= 0
    return QuasiVerdict("quasi-projection", passed, sa, (idem,), excess, params)


def check_quasi_unitary(u: BandOperator, params: QuantParams) -> QuasiVerdict:
    """||u u* - 1|| < eps and ||u* u - 1|| < eps (strict), propagation <= r."""
    a = u.entries
    one = np.eye(a.shape[0])
    d1 = operator_norm(a @ a.conj().T - one)
    d2 = operator_norm(a.conj().T @ a - one)
    excess = u.propagation - params.r
    passed = d1 < params.eps and d2 < params.eps and excess <= 0
    return QuasiVerdict("quasi-unitary", passed, None, (d1, d2), excess, params)


def round_to_projection(p: BandOperator, params: QuantParams) -> BandOperator:
    """Spectral projection of (p + p*)/2 above 1/2.

    Requires a passing quasi-projection; eigenvalues within 1e-9 of 1/2 mean
    the spectral gap promised by eps < 1/4 is absent, and raise.
    """
    h = (p.entries + p.entries.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    if np.any(np.abs(vals - 0.5) <= _GAP_TOL):
        raise ValueError(
            "spectrum touches 1/2; the spectral gap needed for rounding is absent")
    verdict = check_quasi_projection(p, params)
    if not verdict.passed:
        raise ValueError(
            f"input is not an (r, eps)-quasi-projection: residuals "
            f"{verdict.defect_residuals}, self-adjoint {verdict.self_adjoint_residual}, "
            f"propagation excess {verdict.propagation_excess}")
    keep = vals > 0.5
    q = (vecs[:, keep] @ vecs[:, keep].conj().T).astype(np.complex128)
    out = BandOperator(p.space, q, p.multiplicity)
    assert operator_norm(q @ q - q) <= _ROUND_TOL
    assert operator_norm(q - q.conj().T) <= _ROUND_TOL
    return out


# -- partitions of unity -----------------------------------------------------------


class PartitionOfUnity:
    """Nonnegative weights per cover member summing to one at every point."""

    def __init__(self, space: FiniteSpace, cover: Cover, weights: np.ndarray):
        cover.validate(space)
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(cover.members), space.n):
            raise ValueError(
                f"weights shape {w.shape} does not match "
                f"{len(cover.members)} members x {space.n} points")
        if (w < -1e-15).any():
            raise ValueError("weights must be nonnegative")
        for i, member in enumerate(cover.members):
            outside = [x for x in range(space.n) if x not in member and w[i, x] > 0]
            if outside:
                raise ValueError(
                    f"weight {i} is not subordinate: positive at {outside[:5]} "
                    "outside its member")
        sums = w.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ValueError("weights do not sum to one at every point")
        w = np.clip(w, 0.0, None)
        w.flags.writeable = False
        self.space = space
        self.cover = cover
        self.weights = w

    @classmethod
    def trivial(cls, space: FiniteSpace) -> "PartitionOfUnity":
        cover = Cover((frozenset(range(space.n)),))
        return cls(space, cover, np.ones((1, space.n)))

    @classmethod
    def uniform(cls, space: FiniteSpace, cover: Cover) -> "PartitionOfUnity":
        """Equal weight to every member containing a point."""
        k = len(cover.members)
        w = np.zeros((k, space.n))
        for i, member in enumerate(cover.members):
            for x in member:
                w[i, x] = 1.0
        return cls(space, cover, w / w.sum(axis=0))


def smooth_cycle(f: BandOperator, pou: PartitionOfUnity) -> BandOperator:
    """Sum of sqrt(eta_i) F sqrt(eta_i): entrywise damping by the overlap kernel."""
    if not spaces_match(f.space, pou.space):
        raise ValueError("partition of unity lives on a different space")
    roots = np.sqrt(pou.weights)
    kernel = roots.T @ roots  # sum_i sqrt(eta_i)(x) sqrt(eta_i)(y)
    m, n = f.multiplicity, f.space.n
    view = f.entries.reshape(m, n, m, n) * kernel[None, :, None, :]
    return BandOperator(f.space, view.reshape(m * n, m * n), m)


# -- index form ---------------------------------------------------------------------


def index_form(f: BandOperator) -> BandOperator:
    """The 2x2 index-form block matrix of a cycle operator."""
    a = f.entries
    one = np.eye(a.shape[0], dtype=np.complex128)
    ff = a @ a.conj().T
    ftf = a.conj().T @ a
    space, m = f.space, f.multiplicity
    tl = BandOperator(space, ff + (one - ff) @ ff, m)
    tr = BandOperator(space, a @ (one - ftf) + (one - ftf) @ a @ (one - ftf), m)
    bl = BandOperator(space, (one - ftf) @ a, m)
    br = BandOperator(space, one - ftf, m)
    return block2x2(tl, tr, bl, br)


def _diag_one_zero(space: FiniteSpace, multiplicity: int) -> BandOperator:
    return block2x2(
        BandOperator.identity(space, multiplicity),
        BandOperator.zero(space, multiplicity),
        BandOperator.zero(space, multiplicity),
        BandOperator.zero(space, multiplicity))


@dataclass(frozen=True)
class IndexClassReport:
    """Residual data for one assembly-map representative."""

    r_prime: int
    eps_prime: float
    self_adjoint_residual: float
    is_quasi_projection: bool
    augmentation_constant: bool
    scalar_matrix: tuple[tuple[complex, complex], tuple[complex, complex]] | None
    scalar_is_diag_one_zero: bool
    difference_signature: tuple[int, int]
    note: str = field(default="certifies the representative and residuals only; "
                              "homotopy classes are not decided")


def index_class_check(f: BandOperator, pou: PartitionOfUnity,
                      params: QuantParams) -> IndexClassReport:
    """Index form of the smoothed cycle, with residuals and scalar evaluation.

    The scalar evaluation applies the unitisation augmentation (row sums,
    which are constant for group-translation operators) to each block and
    compares the resulting 2x2 scalar matrix against diag(1, 0).
    """
    smoothed = smooth_cycle(f, pou)
    ifm = index_form(smoothed)
    a = ifm.entries
    sa = operator_norm(a - a.conj().T)
    idem = operator_norm(a @ a - a)
    quasi_ok = sa <= _SELF_ADJOINT_TOL and idem < 0.25
    n = f.space.n * f.multiplicity
    blocks = [[a[:n, :n], a[:n, n:]], [a[n:, :n], a[n:, n:]]]
    scalars: list[list[complex]] = []
    constant = True
    for row in blocks:
        srow = []
        for b in row:
            sums = b.sum(axis=1)
            if np.max(np.abs(sums - sums[0])) > 1e-9:
                constant = False
            srow.append(complex(sums[0]))
        scalars.append(srow)
    target = np.array([[1.0, 0.0], [0.0, 0.0]])
    scalar_ok = constant and bool(
        np.max(np.abs(np.array(scalars) - target)) <= 1e-9)
    diff = a - _diag_one_zero(f.space, f.multiplicity).entries
    herm = (diff + diff.conj().T) / 2
    vals = np.linalg.eigvalsh(herm)
    signature = (int((vals > 0.5).sum()), int((vals < -0.5).sum()))
    return IndexClassReport(
        r_prime=ifm.propagation,
        eps_prime=idem,
        self_adjoint_residual=sa,
        is_quasi_projection=quasi_ok,
        augmentation_constant=constant,
        scalar_matrix=tuple(tuple(r) for r in scalars) if constant else None,
        scalar_is_diag_one_zero=scalar_ok,
        difference_signature=signature,
    )


# -- localisation paths -------------------------------------------------------------


class LocalisationPath:
    """Finite sample list of band operators with nonincreasing propagation."""

    def __init__(self, times: Sequence[float], operators: Sequence[BandOperator],
                 target_propagation: int | None = None):
        if len(times) != len(operators):
            raise ValueError(
                f"{len(times)} sample times for {len(operators)} operators")
        if not operators:
            raise ValueError("path needs at least one sample")
        if any(t < 0 for t in times):
            raise ValueError("sample times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample times must strictly increase")
        first = operators[0]
        for j, op in enumerate(operators[1:], start=1):
            if not first.same_space(op) or first.multiplicity != op.multiplicity:
                raise ValueError(f"sample {j} lives on a different space")
        props = [op.propagation for op in operators]
        if any(b > a for a, b in zip(props, props[1:])):
            raise ValueError(
                f"propagation schedule {props} is not nonincreasing")
        if target_propagation is not None and props[-1] > target_propagation:
            raise ValueError(
                f"final propagation {props[-1]} exceeds the declared target "
                f"{target_propagation}")
        self.times = tuple(float(t) for t in times)
        self.operators = tuple(operators)
        self.target_propagation = target_propagation

    @property
    def propagation_schedule(self) -> tuple[int, ...]:
        return tuple(op.propagation for op in self.operators)

    def sup_norm(self, tol: float = 1e-9) -> float:
        return max(operator_norm(op, tol=tol) for op in self.operators)


def path_evaluate(path: LocalisationPath) -> BandOperator:
    """Value at time zero; the path must start there."""
    if path.times[0] != 0.0:
        raise ValueError(f"path starts at t = {path.times[0]}, expected 0")
    return path.operators[0]


def lift_path(path: LocalisationPath, window: LiftWindow) -> LocalisationPath:
    """Samplewise lift; propagation order is preserved below the window."""
    lifted = []
    for j, op in enumerate(path.operators):
        if op.propagation > window.R:
            raise ValueError(
                f"sample {j} has propagation {op.propagation} > window {window.R}")
        lifted.append(lift_operator(op, window))
    return LocalisationPath(path.times, lifted, path.target_propagation)


@dataclass(frozen=True)
class PathLiftReport:
    """Sup-norm comparison and evaluation-commutation for a lifted path."""

    sup_norm_source: float
    sup_norm_lifted: float
    bound_constant: float
    bound_holds: bool
    commuting_residual: float


def path_lift_report(path: LocalisationPath, window: LiftWindow,
                     bound_constant: float = 1.0,
                     tol: float = 1e-9) -> tuple[LocalisationPath, PathLiftReport]:
    lifted = lift_path(path, window)
    sup_src = path.sup_norm(tol)
    sup_lift = lifted.sup_norm(tol)
    eval_then_lift = lift_operator(path_evaluate(path), window)
    lift_then_eval = path_evaluate(lifted)
    residual = float(np.max(np.abs(eval_then_lift.entries - lift_then_eval.entries)))
    return lifted, PathLiftReport(
        sup_norm_source=sup_src,
        sup_norm_lifted=sup_lift,
        bound_constant=bound_constant,
        bound_holds=sup_lift <= bound_constant * sup_src + tol,
        commuting_residual=residual,
    )


# -- quasi *-homomorphisms -----------------------------------------------------------


@dataclass(frozen=True)
class QuasiHomReport:
    """Grade-window multiplicativity, linearity, and norm data for a map."""

    admissible_pairs: int
    negative_controls: int
    max_multiplicativity_residual: float
    max_linearity_residual: float
    max_adjoint_residual: float
    norm_ratio: float
    negative_control_residuals: tuple[float, ...]
    witness: tuple[str, int, float] | None
    passed: bool


def check_quasi_homomorphism(f: Callable[[BandOperator], BandOperator],
                             R: int,
                             samples: Sequence[tuple[BandOperator, BandOperator]],
                             tol: float = 1e-9,
                             comparison_points: Sequence[int] | None = None,
                             ) -> QuasiHomReport:
    """Verify f(a)f(b) = f(ab) on pairs whose propagations sum within R.

    Pairs beyond the window are treated as negative controls: their residuals
    are recorded but do not affect the verdict.  Linearity and a star
    compatibility residual are checked on the admissible operands, and the
    largest norm ratio ||f(a)||/||a|| is reported as the continuity estimate.

    When f truncates at a boundary (a lift through a finite window), exact
    multiplicativity only holds away from it: pass the safe interior as
    comparison_points and the product comparison is restricted to those rows
    of the output space.
    """
    if not samples:
        raise ValueError("no sample pairs given")
    mult_max = lin_max = star_max = 0.0
    ratio = 0.0
    admissible = 0
    controls: list[float] = []
    witness: tuple[str, int, float] | None = None
    alpha, beta = 0.5 - 0.25j, -1.5 + 1.0j

    def product_residual(fa: BandOperator, fb: BandOperator, fab: BandOperator) -> float:
        diff = fa.entries @ fb.entries - fab.entries
        if comparison_points is not None:
            n_out = fa.space.n
            keep = np.zeros(diff.shape[0], dtype=bool)
            for slot in range(fa.multiplicity):
                for x in comparison_points:
                    keep[slot * n_out + x] = True
            diff = np.where(keep[:, None], diff, 0.0)
        return float(operator_norm(diff))

    for idx, (a, b) in enumerate(samples):
        ab = BandOperator(a.space, a.entries @ b.entries, a.multiplicity)
        resid = product_residual(f(a), f(b), f(ab))
        if a.propagation + b.propagation <= R:
            admissible += 1
            mult_max = max(mult_max, resid)
            if resid > tol and witness is None:
                witness = ("multiplicativity", idx, resid)
            combo = BandOperator(a.space, alpha * a.entries + beta * b.entries,
                                 a.multiplicity)
            lin = float(operator_norm(
                f(combo).entries - (alpha * f(a).entries + beta * f(b).entries)))
            lin_max = max(lin_max, lin)
            if lin > tol and witness is None:
                witness = ("linearity", idx, lin)
            star = float(operator_norm(
                f(a.adjoint()).entries - f(a).entries.conj().T))
            star_max = max(star_max, star)
            if star > tol and witness is None:
                witness = ("adjoint", idx, star)
            for op in (a, b):
                norm = operator_norm(op)
                if norm > 0:
                    ratio = max(ratio, operator_norm(f(op)) / norm)
        else:
            controls.append(resid)
    passed = mult_max <= tol and lin_max <= tol and star_max <= tol and admissible > 0
    return QuasiHomReport(
        admissible_pairs=admissible,
        negative_controls=len(controls),
        max_multiplicativity_residual=mult_max,
        max_linearity_residual=lin_max,
        max_adjoint_residual=star_max,
        norm_ratio=ratio,
        negative_control_residuals=tuple(controls),
        witness=witness,
        passed=passed,
    )


# -- asymptotic control records --------------------------------------------------------


@dataclass(frozen=True)
class ControlRecord:
    """One term of the surjectivity-side control table."""

    m: int
    d: float
    r: float
    R: int | None
    k_value: float | None
    eps_prime: float | None


@dataclass(frozen=True)
class InjectivityRecord:
    """One term of the injectivity-side control table."""

    m: int
    d: float
    r: float
    L: int | None
    r_prime: float | None
    d_prime: float | None


@dataclass(frozen=True)
class ControlTable:
    records: tuple[ControlRecord, ...]
    injectivity: tuple[InjectivityRecord, ...] | None
    verdict: str
    note: str

    def rows(self) -> list[tuple[int, float, float, float | None, int | None]]:
        """(m, d_m, r_m, k_m, R_m) rows for tabular output."""
        return [(rec.m, rec.d, rec.r, rec.k_value, rec.R) for rec in self.records]


def _sup_below(limit: float, value_at: Callable[[int], float]) -> int | None:
    """Largest integer R in [0, limit] with value_at(R) <= limit, or None."""
    cap = int(limit)
    if value_at(0) > limit:
        return None
    if value_at(cap) <= limit:
        return cap
    lo, hi = 0, cap
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if value_at(mid) <= limit:
            lo = mid
        else:
            hi = mid
    return lo


def _check_monotone(value_at: Callable[[int], float], cap: int, label: str) -> None:
    probe = sorted(set(list(range(0, min(cap, 16) + 1)) +
                       [cap // 4, cap // 2, (3 * cap) // 4, cap]))
    vals = [value_at(x) for x in probe if 0 <= x <= cap]
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{label} oracle output is not monotone in the scale")


def _divergence_verdict(values: Sequence[int | None]) -> str:
    got = [v for v in values if v is not None]
    if len(got) < 2 or len(got) < len(values):
        return "insufficient data"
    if all(b >= a for a, b in zip(got, got[1:])) and got[-1] > got[0]:
        return "divergent"
    return "not divergent"


def qs_qi_records(qs_oracle: Callable[[float, int, float], tuple[float, float]],
                  grid: Sequence[tuple[float, float]],
                  eps: float,
                  qi_oracle: Callable[[float, int, float], tuple[float, float]] | None = None,
                  ) -> ControlTable:
    """Tabulate control radii from pluggable surjectivity/injectivity oracles.

    The surjectivity oracle maps (d, R, eps) to the certified (r', eps');
    each term records R_m = sup{R <= r_m : r'(d_m, R, eps) <= r_m}.  The
    injectivity oracle maps (d, R, eps) to (r', d') and produces the analogous
    L_m.  Oracles must be nondecreasing in R.  The search for R is capped at
    the term's own scale r_m: radii beyond the scale under control carry no
    information, and for sublinear oracles the uncapped supremum is infinite.
    """
    if not 0 < eps < 0.25:
        raise ValueError(f"tolerance must lie strictly in (0, 1/4), got {eps}")
    if not grid:
        raise ValueError("empty parameter grid")
    records = []
    l_records = [] if qi_oracle is not None else None
    for m, (d, r) in enumerate(grid):
        if r <= 0:
            raise ValueError(f"scale r must be positive, got {r} at term {m}")

        def k_at(R: int, d=d) -> float:
            return float(qs_oracle(d, R, eps)[0])

        _check_monotone(k_at, int(r), "surjectivity")
        R = _sup_below(r, k_at)
        if R is None:
            records.append(ControlRecord(m, d, r, None, None, None))
        else:
            k_val, eps_prime = qs_oracle(d, R, eps)
            records.append(ControlRecord(m, d, r, R, float(k_val), float(eps_prime)))
        if qi_oracle is not None:
            def l_at(R: int, d=d) -> float:
                return float(qi_oracle(d, R, eps)[0])

            _check_monotone(l_at, int(r), "injectivity")
            L = _sup_below(r, l_at)
            if L is None:
                l_records.append(InjectivityRecord(m, d, r, None, None, None))
            else:
                r_prime, d_prime = qi_oracle(d, L, eps)
                l_records.append(InjectivityRecord(
                    m, d, r, L, float(r_prime), float(d_prime)))
    verdict = _divergence_verdict([rec.R for rec in records])
    return ControlTable(
        records=tuple(records),
        injectivity=tuple(l_records) if l_records is not None else None,
        verdict=verdict,
        note="window evidence from pluggable oracles; the cited group-theoretic "
             "inputs are supplied, not derived",
    )
