"""Bilevel Problem Oracles.

This module defines the oracle bundle the solver and the verification layer
talk to, plus the three problem families shipped with the simulator:

1. The scalar synthetic quadratic with a closed-form solution
2. Logistic regression with per-coordinate regularization hyperparameters
3. The min-max reduction where each inner objective opposes its outer one

Node indices are 0-based. Stacked evaluations take one row per node.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager

import numpy as np
from scipy.special import expit
from typing_extensions import Optional

from distributed_bilevel.errors import ConfigurationError, OracleError
from distributed_bilevel.state_problem import Dataset, SmoothnessInput

logger = logging.getLogger(__name__)

GradPair = tuple[np.ndarray, np.ndarray]

# ===== ORACLE INTERFACE =====

class BilevelProblem(ABC):
    """Per-node outer objectives f_i and inner objectives g_i.

    Subclasses implement the four first-order oracles. Second-order data,
    closed-form inner solutions and the known optimum are optional.

    The solver must stay Hessian-free, so every call to ``second_order``
    outside a ``verifying()`` block is counted in ``second_order_calls``.
    """

    def __init__(self, m: int, n: int, r: int, smoothness: SmoothnessInput):
        if min(m, n, r) < 1:
            raise ConfigurationError(f"dimensions must be positive, got m={m}, n={n}, r={r}")
        self.m = m
        self.n = n
        self.r = r
        self.smoothness = smoothness
        self.second_order_calls = 0
        self.verification_second_order_calls = 0
        self._verifying = 0

    # --- per-node oracles ---

    @abstractmethod
    def outer_value(self, i: int, x: np.ndarray, y: np.ndarray) -> float:
        """Evaluate f_i(x, y)."""

    @abstractmethod
    def inner_value(self, i: int, x: np.ndarray, y: np.ndarray) -> float:
        """Evaluate g_i(x, y)."""

    @abstractmethod
    def outer_grad(self, i: int, x: np.ndarray, y: np.ndarray) -> GradPair:
        """Return (grad_x f_i, grad_y f_i)."""

    @abstractmethod
    def inner_grad(self, i: int, x: np.ndarray, y: np.ndarray) -> GradPair:
        """Return (grad_x g_i, grad_y g_i)."""

    def _second_order(self, i: int, x: np.ndarray, y: np.ndarray) -> Optional[GradPair]:
        return None

    @property
    def has_second_order(self) -> bool:
        """Whether the family supplies cross and inner Hessians."""
        return False

    def second_order(self, i: int, x: np.ndarray, y: np.ndarray) -> Optional[GradPair]:
        """Return (d2/dxdy g_i as n x r, d2/dy2 g_i as r x r) or None."""
        if self._verifying:
            self.verification_second_order_calls += 1
        else:
            self.second_order_calls += 1
        return self._second_order(i, x, y)

    @contextmanager
    def verifying(self) -> Iterator["BilevelProblem"]:
        """Attribute second-order calls inside the block to verification."""
        self._verifying += 1
        try:
            yield self
        finally:
            self._verifying -= 1

    # --- closed-form metadata ---

    def exact_inner_argmin(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Closed-form y*(x) when the family has one."""
        return None

    def exact_penalized_argmin(self, x: np.ndarray, lam: float) -> Optional[np.ndarray]:
        """Closed-form minimizer of the averaged f + lam * g in y, if known."""
        return None

    @property
    def exact_outer_optimum(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Known solution (x*, y*(x*)) when the family has one."""
        return None

    def inner_moduli(self, x: np.ndarray) -> tuple[float, float]:
        """Strong convexity and smoothness of the averaged inner function in y at x."""
        return self.smoothness.mu_g, self.smoothness.L_g1

    def penalized_moduli(self, x: np.ndarray, lam: float) -> tuple[float, float]:
        """Moduli of y -> mean(f_i + lam * g_i) at x.

        The defaults follow the penalty analysis and are valid once lam
        exceeds 2 L_f1 / mu_g.
        """
        s = self.smoothness
        return lam * s.mu_g / 2.0, s.L_f1 + lam * s.L_g1

    # --- stacked and averaged evaluations ---

    def _stacked(self, oracle: Callable[[int, np.ndarray, np.ndarray], GradPair], X: np.ndarray, Y: np.ndarray) -> GradPair:
        gx = np.empty((self.m, self.n))
        gy = np.empty((self.m, self.r))
        for i in range(self.m):
            try:
                gx[i], gy[i] = oracle(i, X[i], Y[i])
            except OracleError:
                raise
            except Exception as exc:
                raise OracleError(i, exc) from exc
        return gx, gy

    def outer_grads(self, X: np.ndarray, Y: np.ndarray) -> GradPair:
        """Stack outer gradients, row i evaluated at (X[i], Y[i])."""
        return self._stacked(self.outer_grad, X, Y)

    def inner_grads(self, X: np.ndarray, Y: np.ndarray) -> GradPair:
        """Stack inner gradients, row i evaluated at (X[i], Y[i])."""
        return self._stacked(self.inner_grad, X, Y)

    def _broadcast(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.tile(x, (self.m, 1)), np.tile(y, (self.m, 1))

    def mean_outer_value(self, x: np.ndarray, y: np.ndarray) -> float:
        """Network-average outer value at a common point."""
        return float(np.mean([self.outer_value(i, x, y) for i in range(self.m)]))

    def mean_inner_value(self, x: np.ndarray, y: np.ndarray) -> float:
        """Network-average inner value at a common point."""
        return float(np.mean([self.inner_value(i, x, y) for i in range(self.m)]))

    def mean_outer_grad(self, x: np.ndarray, y: np.ndarray) -> GradPair:
        """Network-average outer gradient at a common point."""
        gx, gy = self.outer_grads(*self._broadcast(x, y))
        return gx.mean(axis=0), gy.mean(axis=0)

    def mean_inner_grad(self, x: np.ndarray, y: np.ndarray) -> GradPair:
        """Network-average inner gradient at a common point."""
        gx, gy = self.inner_grads(*self._broadcast(x, y))
        return gx.mean(axis=0), gy.mean(axis=0)

    def mean_inner_grad_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Network-average inner y-gradient; the inner solvers' hot path."""
        return self.mean_inner_grad(x, y)[1]

    def mean_penalized_grad_y(self, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
        """Network-average y-gradient of f_i + lam * g_i."""
        return self.mean_outer_grad(x, y)[1] + lam * self.mean_inner_grad_y(x, y)

    def mean_second_order(self, x: np.ndarray, y: np.ndarray) -> Optional[GradPair]:
        """Network-average second-order blocks, or None when unavailable."""
        if not self.has_second_order:
            return None
        blocks = [self.second_order(i, x, y) for i in range(self.m)]
        return (
            np.mean([b[0] for b in blocks], axis=0),
            np.mean([b[1] for b in blocks], axis=0),
        )


def _as_array(values: Sequence[float], name: str, m: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (m,):
        raise ConfigurationError(f"{name} has {arr.size} entries, expected m={m}", key=name)
    return arr

# ===== SYNTHETIC QUADRATIC =====

REFERENCE_SYNTHETIC = {
    "a": [2.0] * 10,
    "b": [float(i) for i in range(1, 11)],
    "c": [2.0] * 5 + [4.0] * 5,
    "d": [2.0] * 5 + [4.0] * 5,
    "e": [10.0] * 10,
}


class QuadraticProblem(BilevelProblem):
    """Scalar instance f_i = (a_i y - b_i)^2 / 2, g_i = (c_i x + d_i y - e_i)^2 / 2."""

    def __init__(self, a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray, e: np.ndarray, box_radius: float):
        self.a, self.b, self.c, self.d, self.e = a, b, c, d, e
        self.box_radius = box_radius
        # averaged moments that determine every closed form
        self._dd = float(np.mean(d * d))
        self._cd = float(np.mean(c * d))
        self._de = float(np.mean(d * e))
        self._aa = float(np.mean(a * a))
        self._ab = float(np.mean(a * b))
        super().__init__(m=a.size, n=1, r=1, smoothness=self._exact_smoothness())

    def _exact_smoothness(self) -> SmoothnessInput:
        # y*(x) is affine, so |grad_y f_i(x, y*(x))| peaks at an end of the box
        slopes = []
        for x in (-self.box_radius, self.box_radius):
            y_star = (self._de - self._cd * x) / self._dd
            slopes.append(np.abs(self.a * (self.a * y_star - self.b)))
        try:
            return SmoothnessInput(
                mu_g=float(np.min(self.d**2)),
                L_f1=float(np.max(self.a**2)),
                L_g1=float(np.max(self.c**2 + self.d**2)),
                L_g2=0.0,
                C_fy=float(np.max(slopes)),
            )
        except ValueError as exc:
            raise ConfigurationError(f"quadratic instance violates the smoothness assumptions: {exc}") from exc

    def outer_value(self, i, x, y):
        return 0.5 * float(self.a[i] * y[0] - self.b[i]) ** 2

    def inner_value(self, i, x, y):
        return 0.5 * float(self.c[i] * x[0] + self.d[i] * y[0] - self.e[i]) ** 2

    def outer_grad(self, i, x, y):
        return np.zeros(1), np.array([self.a[i] * (self.a[i] * y[0] - self.b[i])])

    def inner_grad(self, i, x, y):
        res = self.c[i] * x[0] + self.d[i] * y[0] - self.e[i]
        return np.array([self.c[i] * res]), np.array([self.d[i] * res])

    @property
    def has_second_order(self) -> bool:
        return True

    def _second_order(self, i, x, y):
        return np.array([[self.c[i] * self.d[i]]]), np.array([[self.d[i] ** 2]])

    def outer_grads(self, X, Y):
        a, b = self.a[:, None], self.b[:, None]
        return np.zeros_like(X), a * (a * Y - b)

    def inner_grads(self, X, Y):
        c, d = self.c[:, None], self.d[:, None]
        res = c * X + d * Y - self.e[:, None]
        return c * res, d * res

    def mean_inner_grad_y(self, x, y):
        return np.array([self._dd * y[0] + self._cd * x[0] - self._de])

    def exact_inner_argmin(self, x):
        return np.array([(self._de - self._cd * x[0]) / self._dd])

    def exact_penalized_argmin(self, x, lam):
        return np.array([(self._ab + lam * (self._de - self._cd * x[0])) / (self._aa + lam * self._dd)])

    def inner_moduli(self, x):
        return self._dd, self._dd

    def penalized_moduli(self, x, lam):
        curvature = self._aa + lam * self._dd
        return curvature, curvature

    @property
    def exact_outer_optimum(self):
        # Phi'(x) = -(cd/dd) * (aa * y*(x) - ab) vanishes where y*(x) = ab / aa
        if self._cd == 0.0 or self._aa == 0.0:
            return None
        y_opt = self._ab / self._aa
        x_opt = (self._de - self._dd * y_opt) / self._cd
        return np.array([x_opt]), np.array([y_opt])


def make_synthetic_quadratic(
    m: int,
    a: Sequence[float],
    b: Sequence[float],
    c: Sequence[float],
    d: Sequence[float],
    e: Sequence[float],
    box_radius: float = 2.0,
) -> QuadraticProblem:
    """Build the scalar quadratic family.

    Args:
        m: Number of nodes; every coefficient sequence must have m entries
        a: Outer slopes
        b: Outer targets
        c: Inner x-coefficients
        d: Inner y-coefficients, all nonzero
        e: Inner targets
        box_radius: Half-width of the x box used to bound C_fy

    Returns:
        QuadraticProblem with exact smoothness constants
    """
    arrays = [_as_array(v, name, m) for v, name in zip((a, b, c, d, e), "abcde")]
    if np.any(arrays[3] == 0.0):
        raise ConfigurationError("every d_i must be nonzero for the inner problem to be strongly convex", key="d")
    if box_radius <= 0:
        raise ConfigurationError("box_radius must be positive", key="box_radius")
    return QuadraticProblem(*arrays, box_radius=box_radius)


def make_reference_synthetic() -> QuadraticProblem:
    """Return the ten-node synthetic instance with optimum (0.25, 2.75)."""
    return make_synthetic_quadratic(10, **REFERENCE_SYNTHETIC)

# ===== LOGISTIC HYPERPARAMETER OPTIMIZATION =====

def _logistic_loss(S: np.ndarray, b: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.logaddexp(0.0, -b * (S @ y))))


def _logistic_grad(S: np.ndarray, b: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -S.T @ (b * expit(-b * (S @ y)))


class LogisticHyperopt(BilevelProblem):
    """Per-coordinate l2 hyperparameters eta for logistic regression.

    Node i owns f_i(eta, y) = sum over its validation samples of
    log(1 + exp(-b s^T y)) and g_i(eta, y) = the same sum over its training
    samples plus y^T diag(exp(eta)) y.
    """

    def __init__(self, data: Dataset, m: int, smoothness: SmoothnessInput, heldout: Optional[Dataset] = None):
        self.data = data
        self.heldout = heldout
        self.train = [data.subset(i, validation=False) for i in range(m)]
        self.val = [data.subset(i, validation=True) for i in range(m)]
        # stacked training set for the averaged y-gradient used by inner solves
        self._S_train = np.vstack([S for S, _ in self.train])
        self._b_train = np.concatenate([b for _, b in self.train])
        self._S_val = np.vstack([S for S, _ in self.val])
        self._b_val = np.concatenate([b for _, b in self.val])
        self._train_curvature = _mean_gram_norm(self.train, m) / 4.0
        self._val_curvature = _mean_gram_norm(self.val, m) / 4.0
        super().__init__(m=m, n=data.n_features, r=data.n_features, smoothness=smoothness)

    def outer_value(self, i, x, y):
        return _logistic_loss(*self.val[i], y)

    def inner_value(self, i, x, y):
        return _logistic_loss(*self.train[i], y) + float(np.sum(np.exp(x) * y * y))

    def outer_grad(self, i, x, y):
        return np.zeros(self.n), _logistic_grad(*self.val[i], y)

    def inner_grad(self, i, x, y):
        w = np.exp(x)
        return w * y * y, _logistic_grad(*self.train[i], y) + 2.0 * w * y

    @property
    def has_second_order(self) -> bool:
        return True

    def _second_order(self, i, x, y):
        S, b = self.train[i]
        sig = expit(-b * (S @ y))
        w = np.exp(x)
        hyy = (S.T * (sig * (1.0 - sig))) @ S + np.diag(2.0 * w)
        return np.diag(2.0 * w * y), hyy

    def mean_inner_grad_y(self, x, y):
        return _logistic_grad(self._S_train, self._b_train, y) / self.m + 2.0 * np.exp(x) * y

    def mean_penalized_grad_y(self, x, y, lam):
        return _logistic_grad(self._S_val, self._b_val, y) / self.m + lam * self.mean_inner_grad_y(x, y)

    def inner_moduli(self, x):
        w = np.exp(x)
        return 2.0 * float(w.min()), self._train_curvature + 2.0 * float(w.max())

    def penalized_moduli(self, x, lam):
        mu, L = self.inner_moduli(x)
        return lam * mu, self._val_curvature + lam * L


def _mean_gram_norm(parts: list[tuple[np.ndarray, np.ndarray]], m: int) -> float:
    gram = sum(S.T @ S for S, _ in parts) / m
    return float(np.linalg.eigvalsh(gram)[-1])


def estimate_logistic_smoothness(data: Dataset, m: int, eta_box: float = 1.0, y_box: float = 5.0) -> SmoothnessInput:
    """Conservative smoothness bounds for the logistic family.

    Valid while every |eta_t| <= eta_box and every |y_t| <= y_box.

    Args:
        data: Partitioned dataset
        m: Number of nodes
        eta_box: Bound on hyperparameter magnitudes
        y_box: Bound on model weight magnitudes

    Returns:
        SmoothnessInput for constant and step-size derivations
    """
    w_hi, w_lo = np.exp(eta_box), np.exp(-eta_box)
    # logistic curvature is at most 1/4, third derivative at most 1/(6 sqrt 3)
    third = 1.0 / (6.0 * np.sqrt(3.0))
    L_f1 = L_g1 = L_g2 = C_fy = 0.0
    for i in range(m):
        S_tr, _ = data.subset(i, validation=False)
        S_val, _ = data.subset(i, validation=True)
        gram_tr = float(np.linalg.norm(S_tr, 2) ** 2) if S_tr.size else 0.0
        gram_val = float(np.linalg.norm(S_val, 2) ** 2) if S_val.size else 0.0
        L_f1 = max(L_f1, gram_val / 4.0)
        reg = w_hi * (y_box**2 + 4.0 * y_box + 2.0)
        L_g1 = max(L_g1, gram_tr / 4.0 + reg)
        L_g2 = max(L_g2, third * float(np.sum(np.linalg.norm(S_tr, axis=1) ** 3)) + w_hi * (y_box**2 + 4.0 * y_box + 4.0))
        C_fy = max(C_fy, float(np.sum(np.linalg.norm(S_val, axis=1))))
    return SmoothnessInput(mu_g=2.0 * w_lo, L_f1=max(L_f1, 1e-12), L_g1=L_g1, L_g2=L_g2, C_fy=C_fy)


def make_logistic_hyperopt(
    data: Dataset,
    m: int,
    smoothness: Optional[SmoothnessInput] = None,
    heldout: Optional[Dataset] = None,
) -> LogisticHyperopt:
    """Build the logistic hyperparameter family.

    Args:
        data: Dataset whose node assignment uses nodes 0..m-1
        m: Number of nodes
        smoothness: Caller-supplied constants; estimated over the default box when omitted
        heldout: Optional held-out samples for accuracy reporting

    Returns:
        LogisticHyperopt problem with x = eta and y of the feature dimension
    """
    for i in range(m):
        for validation in (False, True):
            if data.subset(i, validation)[0].shape[0] == 0:
                role = "validation" if validation else "training"
                raise ConfigurationError(f"node {i} has an empty {role} subset")
    if np.any((data.node < 0) | (data.node >= m)):
        raise ConfigurationError(f"dataset assigns samples outside nodes 0..{m - 1}")
    if smoothness is None:
        smoothness = estimate_logistic_smoothness(data, m)
    return LogisticHyperopt(data, m, smoothness, heldout=heldout)


def heldout_accuracy(data: Dataset, y: np.ndarray) -> float:
    """Fraction of samples whose label matches sign(s^T y)."""
    scores = data.features @ y
    return float(np.mean(np.where(scores >= 0.0, 1.0, -1.0) == data.labels))

# ===== MIN-MAX REDUCTION =====

SaddleGrad = Callable[[int, np.ndarray, np.ndarray], GradPair]


class MinMaxProblem(BilevelProblem):
    """Bilevel view of min_x max_y mean f_i with g_i = -f_i."""

    def __init__(
        self,
        f_value: Callable[[int, np.ndarray, np.ndarray], float],
        f_grad: SaddleGrad,
        m: int,
        n: int,
        r: int,
        smoothness: SmoothnessInput,
        f_second: Optional[SaddleGrad] = None,
        exact_inner_argmin: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        exact_outer_optimum: Optional[tuple[np.ndarray, np.ndarray]] = None,
    ):
        self._f_value = f_value
        self._f_grad = f_grad
        self._f_second = f_second
        self._argmin = exact_inner_argmin
        self._optimum = exact_outer_optimum
        super().__init__(m=m, n=n, r=r, smoothness=smoothness)

    def outer_value(self, i, x, y):
        return float(self._f_value(i, x, y))

    def inner_value(self, i, x, y):
        return -float(self._f_value(i, x, y))

    def outer_grad(self, i, x, y):
        gx, gy = self._f_grad(i, x, y)
        return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)

    def inner_grad(self, i, x, y):
        gx, gy = self.outer_grad(i, x, y)
        return -gx, -gy

    def inner_grads(self, X, Y):
        gx, gy = self.outer_grads(X, Y)
        return -gx, -gy

    @property
    def has_second_order(self) -> bool:
        return self._f_second is not None

    def _second_order(self, i, x, y):
        if self._f_second is None:
            return None
        hxy, hyy = self._f_second(i, x, y)
        return -np.asarray(hxy, dtype=float), -np.asarray(hyy, dtype=float)

    def exact_inner_argmin(self, x):
        return None if self._argmin is None else np.asarray(self._argmin(x), dtype=float)

    def exact_penalized_argmin(self, x, lam):
        # f + lam * g = (1 - lam) f shares its maximizer over y with f when lam >= 1
        if lam < 1.0:
            return None
        return self.exact_inner_argmin(x)

    def penalized_moduli(self, x, lam):
        s = self.smoothness
        return (lam - 1.0) * s.mu_g, (lam - 1.0) * s.L_g1

    @property
    def exact_outer_optimum(self):
        return self._optimum


def make_minmax(
    f_value: Callable[[int, np.ndarray, np.ndarray], float],
    f_grad: SaddleGrad,
    m: int,
    n: int,
    r: int,
    smoothness: SmoothnessInput,
    f_second: Optional[SaddleGrad] = None,
    exact_inner_argmin: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    exact_outer_optimum: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> MinMaxProblem:
    """Wrap saddle oracles f_i (strongly concave in y) as a bilevel problem.

    ``smoothness.mu_g`` must carry the concavity modulus of every f_i in y.
    """
    return MinMaxProblem(f_value, f_grad, m, n, r, smoothness, f_second, exact_inner_argmin, exact_outer_optimum)


def make_quadratic_saddle(
    p: Sequence[float],
    q: Sequence[float],
    s: Sequence[float],
    t: Sequence[float],
    box_radius: float = 2.0,
) -> MinMaxProblem:
    """Scalar saddle f_i(x, y) = p_i x^2 / 2 + q_i x y - s_i y^2 / 2 - t_i y.

    Every s_i must be positive so each f_i is strongly concave in y.
    """
    m = len(p)
    p_, q_, s_, t_ = (_as_array(v, name, m) for v, name in zip((p, q, s, t), "pqst"))
    if np.any(s_ <= 0.0):
        raise ConfigurationError("every s_i must be positive for strong concavity", key="s")
    mq, ms, mt, mp = (float(np.mean(v)) for v in (q_, s_, t_, p_))

    def argmin(x: np.ndarray) -> np.ndarray:
        return np.array([(mq * x[0] - mt) / ms])

    def value(i, x, y):
        return 0.5 * p_[i] * x[0] ** 2 + q_[i] * x[0] * y[0] - 0.5 * s_[i] * y[0] ** 2 - t_[i] * y[0]

    def grad(i, x, y):
        return np.array([p_[i] * x[0] + q_[i] * y[0]]), np.array([q_[i] * x[0] - s_[i] * y[0] - t_[i]])

    def second(i, x, y):
        return np.array([[q_[i]]]), np.array([[-s_[i]]])

    spectral = max(float(np.max(np.abs(np.linalg.eigvalsh([[pi, qi], [qi, -si]])))) for pi, qi, si in zip(p_, q_, s_))
    c_fy = 0.0
    for x in (-box_radius, box_radius):
        y = (mq * x - mt) / ms
        c_fy = max(c_fy, float(np.max(np.abs(q_ * x - s_ * y - t_))))
    smoothness = SmoothnessInput(mu_g=float(s_.min()), L_f1=spectral, L_g1=spectral, L_g2=0.0, C_fy=c_fy)

    # Phi(x) = mean f(x, y*(x)) is convex iff mean(p) + mean(q)^2 / mean(s) > 0
    curvature = mp + mq * mq / ms
    optimum = None
    if curvature > 0.0:
        x_opt = np.array([mq * mt / ms / curvature])
        optimum = (x_opt, argmin(x_opt))
    return make_minmax(value, grad, m, 1, 1, smoothness, f_second=second, exact_inner_argmin=argmin, exact_outer_optimum=optimum)

# ===== CENTRALIZED VIEW =====

class AveragedProblem(BilevelProblem):
    """Single-node problem whose oracles are the network averages of another."""

    def __init__(self, base: BilevelProblem):
        self.base = base
        super().__init__(m=1, n=base.n, r=base.r, smoothness=base.smoothness)

    def outer_value(self, i, x, y):
        return self.base.mean_outer_value(x, y)

    def inner_value(self, i, x, y):
        return self.base.mean_inner_value(x, y)

    def outer_grad(self, i, x, y):
        return self.base.mean_outer_grad(x, y)

    def inner_grad(self, i, x, y):
        return self.base.mean_inner_grad(x, y)

    @property
    def has_second_order(self) -> bool:
        return self.base.has_second_order

    def _second_order(self, i, x, y):
        with self.base.verifying():
            return self.base.mean_second_order(x, y)

    def mean_inner_grad_y(self, x, y):
        return self.base.mean_inner_grad_y(x, y)

    def mean_penalized_grad_y(self, x, y, lam):
        return self.base.mean_penalized_grad_y(x, y, lam)

    def exact_inner_argmin(self, x):
        return self.base.exact_inner_argmin(x)

    def exact_penalized_argmin(self, x, lam):
        return self.base.exact_penalized_argmin(x, lam)

    @property
    def exact_outer_optimum(self):
        return self.base.exact_outer_optimum

    def inner_moduli(self, x):
        return self.base.inner_moduli(x)

    def penalized_moduli(self, x, lam):
        return self.base.penalized_moduli(x, lam)
