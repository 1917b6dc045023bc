"""Factor two-mode n-photon targets into products of linear creation terms.

A target ``sum_k c_k |n-k, k>`` equals ``sum_k c_k / sqrt((n-k)! k!) a1^{n-k} a2^k |00>``
(creation operators implied).  Reading ``z = a1/a2`` turns the operator
polynomial into a univariate polynomial whose roots ``rho`` give the factors
``a1 - rho a2``; each is rescaled into beam-splitter coefficients

    t = 1 / sqrt(1 + |rho|^2),   r = -rho / sqrt(1 + |rho|^2).

Vanishing leading coefficients (no weight on ``|n, 0>``) lower the degree; every
missing root becomes a pure mode-2 factor ``(t, r) = (0, 1)``.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from qforge import fock

NORM_TOL = 1e-10
FACTOR_TOL = 1e-12
ROUNDTRIP_TOL = 1e-9
ROOT_TOL = 1e-12
MAX_ROOT_ITER = 500


class FactorError(ValueError):
    pass


class AllZero(FactorError):
    pass


class NonConvergence(FactorError):
    def __init__(self, message: str, worst_residual: float):
        super().__init__(message)
        self.worst_residual = worst_residual


class ZeroAmplitude(FactorError):
    pass


@dataclass(frozen=True, eq=False)
class TargetState:
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        if self.n < 1:
            raise FactorError(f"photon number must be >= 1, got {self.n}")
        if c.shape != (self.n + 1,):
            raise FactorError(f"expected {self.n + 1} coefficients, got {c.shape[0]}")
        if abs(np.vdot(c, c).real - 1) > NORM_TOL:
            raise FactorError(f"target not normalized: norm^2 = {np.vdot(c, c).real!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.n + 1

    @classmethod
    def normalized(cls, coeffs: Sequence[complex]) -> "TargetState":
        c = np.asarray(coeffs, dtype=complex)
        return cls(len(c) - 1, c / np.linalg.norm(c))

    def to_state(self) -> fock.StateVector:
        n = self.n
        return fock.StateVector(2, n, {(n - k, k): c for k, c in enumerate(self.coeffs)})

    def to_dict(self) -> dict:
        return {"n": self.n, "coeffs": [[c.real, c.imag] for c in self.coeffs]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TargetState":
        return cls(int(data["n"]), [complex(*c) for c in data["coeffs"]])


@dataclass(frozen=True, eq=False)
class FactorPlan:
    """Target = scale * prod_k (t_k a1^dag + r_k a2^dag) |00>."""

    factors: tuple[tuple[complex, complex], ...]
    scale: complex = 1.0

    def __post_init__(self):
        fs = tuple((complex(t), complex(r)) for t, r in self.factors)
        for t, r in fs:
            if abs(abs(t) ** 2 + abs(r) ** 2 - 1) > FACTOR_TOL:
                raise FactorError(f"factor ({t}, {r}) is not normalized")
        object.__setattr__(self, "factors", fs)
        object.__setattr__(self, "scale", complex(self.scale))

    @property
    def n(self) -> int:
        return len(self.factors)

    def to_dict(self) -> dict:
        return {
            "scale": [self.scale.real + 0.0, self.scale.imag + 0.0],
            # "+ 0.0" folds negative zeros so equal plans serialize identically
            "factors": [{"t": [t.real + 0.0, t.imag + 0.0], "r": [r.real + 0.0, r.imag + 0.0]} for t, r in self.factors],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FactorPlan":
        factors = tuple((complex(*f["t"]), complex(*f["r"])) for f in data["factors"])
        return cls(factors, complex(*data.get("scale", [1.0, 0.0])))


# ---------------------------------------------------------------------------
# univariate path


def build_polynomial(target: TargetState) -> np.ndarray:
    """Coefficients highest degree first: entry k multiplies z^(n-k)."""
    n = target.n
    w = np.array([math.sqrt(math.factorial(n - k) * math.factorial(k)) for k in range(n + 1)])
    return target.coeffs / w


@dataclass
class RootResult:
    roots: np.ndarray
    degree_deficit: int
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0


def _horner(coeffs: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """p(z), p'(z) and sum_k |c_k| |z|^k (the rounding scale of p(z))."""
    p = np.zeros_like(z, dtype=complex)
    dp = np.zeros_like(z, dtype=complex)
    bound = np.zeros(z.shape, dtype=float)
    az = np.abs(z)
    for c in coeffs:
        dp = dp * z + p
        p = p * z + c
        bound = bound * az + abs(c)
    return p, dp, bound


def _quadratic_roots(a: complex, b: complex, c: complex) -> list[complex]:
    disc = cmath.sqrt(b * b - 4 * a * c)
    # pick the sign avoiding cancellation, then use Vieta for the partner root
    s = -b - disc if abs(-b - disc) >= abs(-b + disc) else -b + disc
    if s == 0:
        return [0j, 0j]
    return [s / (2 * a), 2 * c / s]


def _simultaneous_roots(coeffs: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, int]:
    """Aberth-Ehrlich iteration on a monic-normalized polynomial."""
    c = coeffs / coeffs[0]
    deg = len(c) - 1
    # Cauchy-type radius estimate; perturbed circle keeps starts off symmetry axes
    radius = max(abs(c[k]) ** (1.0 / k) for k in range(1, deg + 1))
    radius = max(radius, 1e-3)
    angles = 2 * np.pi * np.arange(deg) / deg + 0.4
    z = radius * np.exp(1j * angles) * (1 + 0.01 * np.arange(deg) / deg)
    cmax = np.max(np.abs(c))
    it = 0
    for it in range(1, max_iter + 1):
        p, dp, bound = _horner(c, z)
        done = np.abs(p) <= np.maximum(tol * cmax, 8 * np.finfo(float).eps * bound)
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulse = np.sum(1.0 / diff, axis=1)
            step = ratio / (1 - ratio * repulse)
        step = np.where(np.isfinite(step), step, 0.0)
        step[done] = 0.0
        z = z - step
    return z, it


def _newton_polish(coeffs: np.ndarray, z: np.ndarray, steps: int = 3) -> np.ndarray:
    for _ in range(steps):
        p, dp, _ = _horner(coeffs, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = z - p / dp
        pc, _, _ = _horner(coeffs, np.where(np.isfinite(cand), cand, z))
        better = np.isfinite(cand) & (np.abs(pc) < np.abs(p))
        z = np.where(better, cand, z)
    return z


def find_roots(poly: Sequence[complex], max_iter: int = MAX_ROOT_ITER, tol: float = ROOT_TOL) -> RootResult:
    """Roots of ``poly`` (highest degree first) with multiplicity.

    Leading zeros are stripped and counted in ``degree_deficit``; trailing
    zeros become exact roots at 0.  Degrees 1 and 2 use closed forms, higher
    degrees the simultaneous iteration followed by Newton polish.
    """
    c = np.asarray(poly, dtype=complex)
    nz = np.flatnonzero(c != 0)
    if nz.size == 0:
        raise AllZero("polynomial has no nonzero coefficient")
    deficit = int(nz[0])
    c = c[deficit: nz[-1] + 1]
    zero_roots = len(poly) - 1 - int(nz[-1])
    deg = len(c) - 1
    iterations = 0
    if deg == 0:
        roots = np.zeros(0, dtype=complex)
    elif deg == 1:
        roots = np.array([-c[1] / c[0]])
    elif deg == 2:
        roots = np.array(_quadratic_roots(c[0], c[1], c[2]))
    else:
        roots, iterations = _simultaneous_roots(c, max_iter, tol)
        roots = _newton_polish(c, roots)
    if deg:
        p, _, bound = _horner(c, roots)
        cmax = np.max(np.abs(c))
        residuals = np.abs(p) / cmax
        ok = np.abs(p) <= np.maximum(tol * cmax, 8 * np.finfo(float).eps * bound)
        if not ok.all():
            worst = float(np.max(residuals))
            raise NonConvergence(f"root finder did not converge (worst residual {worst:.3e})", worst)
    else:
        residuals = np.zeros(0)
    roots = np.concatenate([roots, np.zeros(zero_roots, dtype=complex)])
    residuals = np.concatenate([residuals, np.zeros(zero_roots)])
    return RootResult(roots, deficit, residuals, iterations)


def root_order(z: complex) -> tuple[float, float]:
    """Canonical factor order: by (Re, Im), blind to rounding below 1e-12."""
    return (round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0)


def roots_to_plan(roots: Sequence[complex], degree_deficit: int, target: TargetState) -> FactorPlan:
    roots = sorted((complex(z) for z in roots), key=root_order)
    if len(roots) + degree_deficit != target.n:
        raise FactorError(f"{len(roots)} roots + {degree_deficit} deficit != n = {target.n}")
    factors = []
    stretch = 1.0
    for z in roots:
        s = math.sqrt(1 + abs(z) ** 2)
        factors.append((1 / s, -z / s))
        stretch *= s
    factors.extend([(0j, 1 + 0j)] * degree_deficit)
    poly = build_polynomial(target)
    lead = poly[degree_deficit]
    plan = FactorPlan(tuple(factors), lead * stretch)
    got = expand_coeffs(plan) * plan.scale
    err = float(np.max(np.abs(got - target.coeffs)))
    if err > ROUNDTRIP_TOL:
        raise FactorError(f"roundtrip residual {err:.3e} exceeds {ROUNDTRIP_TOL:g}")
    return plan


def design(target: TargetState) -> FactorPlan:
    """target -> polynomial -> roots -> plan."""
    res = find_roots(build_polynomial(target))
    return roots_to_plan(res.roots, res.degree_deficit, target)


def product_state(factors: Sequence[tuple[complex, complex]]) -> fock.StateVector:
    """prod_k (t_k a1^dag + r_k a2^dag) |00>, unnormalized, via creation operators."""
    n = len(factors)
    state = fock.vacuum(2, n)
    for t, r in factors:
        state = fock.apply_linear_creation(state, {0: t, 1: r})
    return state


def expand_coeffs(plan: FactorPlan) -> np.ndarray:
    """Unnormalized coefficients (c_{n0}, ..., c_{0n}) of the plan's product state, scale excluded."""
    state = product_state(plan.factors)
    n = plan.n
    return np.array([state[(n - k, k)] for k in range(n + 1)])


def expand_plan(plan: FactorPlan) -> TargetState:
    c = expand_coeffs(plan)
    return TargetState(plan.n, c / np.linalg.norm(c))


def target_fidelity(a: TargetState, b: TargetState) -> float:
    return float(abs(np.vdot(a.coeffs, b.coeffs)) ** 2)


# ---------------------------------------------------------------------------
# closed forms


def _factor_from_root(z: complex) -> tuple[complex, complex]:
    s = math.sqrt(1 + abs(z) ** 2)
    return (1 / s, -z / s)


def loss_code_plan(alpha: complex, beta: complex) -> FactorPlan:
    """Four-factor plan for alpha (|40> + |04>)/sqrt2 + beta |22>.

    The operator polynomial is proportional to ``w^2 + 2 sqrt3 (beta/alpha) w + 1``
    in ``w = z^2``, so the roots are ``+-sqrt(w_+)`` and ``+-sqrt(w_-)`` with
    ``w_+- = -sqrt3 beta/alpha +- sqrt(3 beta^2/alpha^2 - 1)`` (principal branches).
    """
    alpha, beta = complex(alpha), complex(beta)
    if alpha == 0 or beta == 0:
        raise ZeroAmplitude("closed form needs alpha != 0 and beta != 0; use design()")
    u = math.sqrt(3) * beta / alpha
    disc = cmath.sqrt(u * u - 1)
    w_plus, w_minus = -u + disc, -u - disc
    roots = [cmath.sqrt(w_plus), cmath.sqrt(w_minus), -cmath.sqrt(w_plus), -cmath.sqrt(w_minus)]
    factors = tuple(_factor_from_root(z) for z in roots)
    # alpha/(4 sqrt3) prod (a1 - rho a2) = scale * prod(t a1 + r a2)
    stretch = math.prod(math.sqrt(1 + abs(z) ** 2) for z in roots)
    return FactorPlan(factors, alpha / (4 * math.sqrt(3)) * stretch)


def loss_code_target(alpha: complex, beta: complex) -> TargetState:
    return TargetState(4, [alpha / math.sqrt(2), 0, beta, 0, alpha / math.sqrt(2)])


def noon_plan(N: int) -> FactorPlan:
    """Factors (1/sqrt2, -zeta_{2N} zeta_N^k / sqrt2) for (|N0> + |0N>)/sqrt2."""
    if N < 1:
        raise FactorError("N must be >= 1")
    roots = [cmath.exp(1j * math.pi / N) * cmath.exp(2j * math.pi * k / N) for k in range(N)]
    factors = tuple((1 / math.sqrt(2), -z / math.sqrt(2)) for z in roots)
    return FactorPlan(factors, math.sqrt(2) ** N / math.sqrt(2 * math.factorial(N)))


def noon_target(N: int) -> TargetState:
    c = np.zeros(N + 1, dtype=complex)
    c[0] = c[-1] = 1 / math.sqrt(2)
    return TargetState(N, c)


def general_two_photon_plan(alpha: complex, beta: complex, gamma: complex) -> FactorPlan:
    """Plan for alpha|20> + beta|02> + gamma|11> from the quadratic closed form.

    Roots of ``z^2 + sqrt2 (gamma/alpha) z + beta/alpha`` are
    ``-gamma/(sqrt2 alpha) +- sqrt(gamma^2/(2 alpha^2) - beta/alpha)``.
    """
    alpha, beta, gamma = complex(alpha), complex(beta), complex(gamma)
    if alpha == 0:
        raise ZeroAmplitude("closed form needs alpha != 0; use design()")
    h = -gamma / (math.sqrt(2) * alpha)
    s = cmath.sqrt(gamma**2 / (2 * alpha**2) - beta / alpha)
    roots = sorted([h + s, h - s], key=root_order)
    factors = tuple(_factor_from_root(z) for z in roots)
    stretch = math.prod(math.sqrt(1 + abs(z) ** 2) for z in roots)
    return FactorPlan(factors, alpha / math.sqrt(2) * stretch)


# ---------------------------------------------------------------------------
# multivariate probe


@dataclass(frozen=True, eq=False)
class MultivariateTarget:
    """Coefficients over occupations of ``m`` modes.

    ``homogeneous=True``: every occupation sums to ``n``.  Otherwise the target
    lives in "up to n photons" form and the factors carry a constant term.
    """

    m: int
    n: int
    coeffs: Mapping[tuple[int, ...], complex]
    homogeneous: bool = True

    def __post_init__(self):
        cs = {tuple(int(x) for x in k): complex(v) for k, v in self.coeffs.items()}
        for occ in cs:
            if len(occ) != self.m:
                raise FactorError(f"occupation {occ} does not have {self.m} modes")
            total = sum(occ)
            if (self.homogeneous and total != self.n) or total > self.n:
                raise FactorError(f"occupation {occ} incompatible with n = {self.n}")
        norm = sum(abs(v) ** 2 for v in cs.values())
        if abs(norm - 1) > NORM_TOL:
            raise FactorError(f"target not normalized: norm^2 = {norm!r}")
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def from_state(cls, state: fock.StateVector, homogeneous: bool = True) -> "MultivariateTarget":
        st = fock.normalized(state)
        return cls(st.modes, st.max_photons(), dict(st.terms), homogeneous)


@dataclass
class FitResult:
    best_factors: np.ndarray  # shape (n, m) or (n, m + 1) with constant terms last
    residual: float
    residuals: np.ndarray  # best residual of every start
    factorizable: bool

    @property
    def verdict(self) -> str:
        return "factorization found" if self.factorizable else "no factorization found (heuristic)"


class _MonomialSpace:
    """Dense coefficient arrays over exponent tuples of the (possibly homogenized) variables."""

    def __init__(self, m: int, n: int, homogeneous: bool):
        self.vars = m if homogeneous else m + 1
        self.n = n
        self.m = m
        self.shape = (n + 1,) * self.vars
        idx = np.indices(self.shape).reshape(self.vars, -1).T
        self.valid = idx.sum(axis=1) == n
        # state amplitude = sqrt(prod_{j < m} n_j!) * polynomial coefficient
        logw = sum(np.vectorize(math.lgamma)(idx[:, j] + 1.0) for j in range(m)) / 2
        self.weight = np.where(self.valid, np.exp(logw), 0.0)
        self.exponents = idx
        self._moves = []
        for j in range(self.vars):
            src = [slice(None)] * self.vars
            dst = [slice(None)] * self.vars
            src[j] = slice(0, n)
            dst[j] = slice(1, n + 1)
            self._moves.append((tuple(src), tuple(dst)))

    def target_vector(self, coeffs: Mapping[tuple[int, ...], complex]) -> np.ndarray:
        vec = np.zeros(int(np.prod(self.shape)), dtype=complex)
        for occ, c in coeffs.items():
            full = occ if self.vars == self.m else occ + (self.n - sum(occ),)
            vec[np.ravel_multi_index(full, self.shape)] = c
        return vec

    def multiply_linear(self, poly: np.ndarray, d: np.ndarray) -> np.ndarray:
        out = np.zeros_like(poly)
        for j, (src, dst) in enumerate(self._moves):
            out[dst] += d[j] * poly[src]
        return out

    def product(self, factors: np.ndarray, skip: int | None = None) -> np.ndarray:
        poly = np.zeros(self.shape, dtype=complex)
        poly[(0,) * self.vars] = 1.0
        for k, d in enumerate(factors):
            if k != skip:
                poly = self.multiply_linear(poly, d)
        return poly


def _loss(space: _MonomialSpace, factors: np.ndarray, target: np.ndarray) -> float:
    err = space.weight * space.product(factors).reshape(-1) - target
    return float(np.vdot(err, err).real)


def _loss_and_grad(space: _MonomialSpace, factors: np.ndarray, target: np.ndarray):
    rests = [space.product(factors, skip=k) for k in range(factors.shape[0])]
    full = space.multiply_linear(rests[0], factors[0]).reshape(-1)
    err = space.weight * full - target
    loss = float(np.vdot(err, err).real)
    werr = (space.weight * err).reshape(space.shape)
    grad = np.empty_like(factors)
    for k, rest in enumerate(rests):
        for j, (src, dst) in enumerate(space._moves):
            # dL/d conj(d_kj), doubled to give the steepest-ascent direction in (Re, Im)
            grad[k, j] = 2 * np.vdot(rest[src], werr[dst])
    return loss, grad


def _descend(space, target, start, max_iter, tol):
    x = start.copy()
    loss, grad = _loss_and_grad(space, x, target)
    step = 1.0
    for _ in range(max_iter):
        if loss <= tol:
            break
        gnorm2 = float(np.vdot(grad, grad).real)
        if gnorm2 < 1e-30:
            break
        # Armijo backtracking
        while True:
            cand = x - step * grad
            cl = _loss(space, cand, target)
            if cl <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-14:
                # no sufficient decrease left at double precision: stationary point
                return x, loss
        stalled = loss - cl <= 1e-15 * loss
        x = cand
        loss, grad = _loss_and_grad(space, x, target)
        if stalled:
            break
        step *= 2.0
    return x, loss


def multivariate_factor_fit(
    target: MultivariateTarget,
    starts: int = 32,
    max_iter: int = 2000,
    seed: int = 0,
    tol: float = 1e-8,
    workers: int = 1,
) -> FitResult:
    """Least-squares search for ``prod_k (sum_j d_kj a_j^dag [+ d_k,const])`` matching the target.

    Multi-start gradient descent with backtracking.  The residual is the squared
    coefficient mismatch; ``<= tol`` certifies a factorization, anything larger
    is evidence only.
    """
    space = _MonomialSpace(target.m, target.n, target.homogeneous)
    tvec = space.target_vector(target.coeffs)
    seeds = np.random.SeedSequence(seed).spawn(starts)
    scale = target.n ** 0.5

    def run(ss):
        rng = np.random.default_rng(ss)
        x0 = (rng.normal(size=(target.n, space.vars)) + 1j * rng.normal(size=(target.n, space.vars))) / scale
        return _descend(space, tvec, x0, max_iter, tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    losses = np.array([r[1] for r in results])
    best = int(np.argmin(losses))
    return FitResult(results[best][0], float(losses[best]), losses, bool(losses[best] <= tol))


def fit_state(space_target: MultivariateTarget, factors: np.ndarray) -> fock.StateVector:
    """State reproduced by fitted factors, over the target's ``m`` modes."""
    space = _MonomialSpace(space_target.m, space_target.n, space_target.homogeneous)
    amp = space.weight * space.product(factors).reshape(-1)
    terms = {}
    for e, a in zip(space.exponents, amp):
        if abs(a) > fock.PRUNE_TOL:
            terms[tuple(int(x) for x in e[: space_target.m])] = a
    return fock.StateVector(space_target.m, space_target.n, terms)
