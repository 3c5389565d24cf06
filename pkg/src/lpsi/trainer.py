"""Full-batch gradient training of shallow ReLU networks with a smoothed l^p path-norm penalty.

The trained objective is

    L(theta) = sum_i (f(x_i) - y_i)**2 + lam * sum_k sum_c rho_eps(v_k u_kc),
    rho_eps(t) = (t**2 + eps**2) ** (p / 2),

where ``u_k`` is neuron ``k``'s input weight vector, extended by its bias when
biases are penalised.  For one-dimensional data the network carries an
affine skip connection and only the input weight is penalised, matching the
univariate solver; for ``DatasetND`` inputs there is no skip connection.

During training ``lam`` and ``eps`` both decay geometrically to their floors,
so the interpolation constraint is approached through an increasingly
dominant data-fit term.  Every step uses a backtracking (Armijo) line search
at fixed ``(lam, eps)``; because ``rho_eps`` increases with ``eps`` and the
penalty weight only shrinks, the recorded objective is non-increasing along
the whole run.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset1D, LpsiError, ReLUNet1D, ValidationError, from_network, report
from .multivariate import DatasetND, ReconstructedNet

__all__ = [
    "TrainConfig",
    "NetParams",
    "TrainResult",
    "TrainingDivergedError",
    "init_params",
    "penalized_objective",
    "objective_terms",
    "gradient",
    "finite_difference_gradient",
    "kink_margin",
    "train",
    "write_trajectory",
    "TRAJECTORY_COLUMNS",
]

TRAJECTORY_COLUMNS = ("step", "objective", "data_loss", "penalty", "active_neurons")


class TrainingDivergedError(LpsiError):
    """The objective became non-finite; ``trajectory`` holds the rows recorded so far."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class TrainConfig:
    p: float
    width: int
    steps: int = 2000
    learning_rate: float = 0.5
    lambda_init: float = 1.0
    lambda_decay: float = 0.9995
    lambda_floor: float = 1e-3
    eps_init: float = 0.5
    eps_decay: float = 0.9995
    eps_floor: float = 1e-2
    seed: int = 0
    bias_penalty: bool = True  # ignored for 1D data, where biases are never penalised
    init_scale: float = 1.0
    armijo: float = 1e-4
    prune_rtol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValidationError(f"p must lie in (0, 1), got {self.p}")
        if self.width < 1 or self.steps < 0:
            raise ValidationError("width must be positive and steps nonnegative")
        positive = (
            self.learning_rate,
            self.lambda_init,
            self.lambda_decay,
            self.lambda_floor,
            self.eps_init,
            self.eps_decay,
            self.eps_floor,
            self.init_scale,
        )
        if not all(v > 0 for v in positive):
            raise ValidationError("schedule values and the learning rate must be positive")
        if self.lambda_decay > 1 or self.eps_decay > 1:
            raise ValidationError("decay factors must not exceed 1")

    def lam(self, step: int) -> float:
        return max(self.lambda_floor, self.lambda_init * self.lambda_decay**step)

    def eps(self, step: int) -> float:
        return max(self.eps_floor, self.eps_init * self.eps_decay**step)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = set(cls.__dataclass_fields__)
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class NetParams:
    W: np.ndarray  # (K, d)
    b: np.ndarray  # (K,)
    v: np.ndarray  # (K,)
    a: np.ndarray  # (d,) skip slope, zero and frozen without a skip connection
    c: float = 0.0
    skip: bool = True

    @property
    def width(self) -> int:
        return self.W.shape[0]

    def flat(self) -> np.ndarray:
        parts = [self.W.ravel(), self.b, self.v]
        if self.skip:
            parts += [self.a, [self.c]]
        return np.concatenate(parts).astype(float)

    def unflat(self, theta: np.ndarray) -> "NetParams":
        K, d = self.W.shape
        i = 0
        W = theta[i : i + K * d].reshape(K, d)
        i += K * d
        b = theta[i : i + K]
        i += K
        v = theta[i : i + K]
        i += K
        if self.skip:
            a = theta[i : i + d]
            c = float(theta[i + d])
        else:
            a, c = self.a, self.c
        return NetParams(W.copy(), b.copy(), v.copy(), np.array(a, dtype=float), c, self.skip)


@dataclass(frozen=True, eq=False)
class TrainResult:
    params: NetParams
    trajectory: list  # dicts keyed by TRAJECTORY_COLUMNS plus "objective_before", "lam", "eps"
    net: object  # ReLUNet1D (1D data) or ReconstructedNet
    path_norm: float
    active_neurons: int
    max_residual: float
    report: object = None  # PathNormReport for 1D data
    config: TrainConfig | None = field(default=None, repr=False)


def _as_arrays(data):
    if isinstance(data, Dataset1D):
        X = np.array([float(x) for x in data.xs])[:, None]
        y = np.array([float(v) for v in data.ys])
        return X, y, True
    if isinstance(data, DatasetND):
        return np.asarray(data.X, dtype=float), np.asarray(data.y, dtype=float), False
    raise ValidationError("training data must be a Dataset1D or DatasetND")


def _penalise_bias(one_d: bool, cfg: TrainConfig) -> bool:
    return (not one_d) and cfg.bias_penalty


def init_params(data, cfg: TrainConfig) -> NetParams:
    X, y, one_d = _as_arrays(data)
    n, d = X.shape
    if cfg.width < n:
        raise ValidationError(f"width K={cfg.width} must be at least the number of data points N={n}")
    rng = np.random.default_rng(cfg.seed)
    W = rng.normal(size=(cfg.width, d)) * cfg.init_scale
    # each neuron's kink hyperplane passes through a random point of the data's bounding box
    lo, hi = X.min(axis=0), X.max(axis=0)
    anchors = lo + rng.uniform(size=(cfg.width, d)) * (hi - lo)
    b = -np.sum(W * anchors, axis=1)
    v = rng.normal(size=cfg.width) * cfg.init_scale / math.sqrt(cfg.width)
    return NetParams(W, b, v, np.zeros(d), 0.0, skip=one_d)


def _forward(P: NetParams, X: np.ndarray):
    H = X @ P.W.T + P.b  # (N, K)
    act = np.maximum(H, 0.0)
    out = act @ P.v
    if P.skip:
        out = out + X @ P.a + P.c
    return H, act, out


def _rho(t, eps, p):
    return (t * t + eps * eps) ** (p / 2)


def _rho_prime(t, eps, p):
    return p * t * (t * t + eps * eps) ** (p / 2 - 1)


def _penalty_inputs(P: NetParams, bias: bool) -> np.ndarray:
    U = np.hstack([P.W, P.b[:, None]]) if bias else P.W
    return U


def objective_terms(P: NetParams, data, cfg: TrainConfig, lam: float, eps: float) -> tuple:
    """``(objective, data_loss, penalty)`` where ``objective = data_loss + lam * penalty``."""
    X, y, one_d = _as_arrays(data)
    _, _, out = _forward(P, X)
    data_loss = float(np.sum((out - y) ** 2))
    U = _penalty_inputs(P, _penalise_bias(one_d, cfg))
    penalty = float(np.sum(_rho(P.v[:, None] * U, eps, cfg.p)))
    return data_loss + lam * penalty, data_loss, penalty


def penalized_objective(P: NetParams, data, cfg: TrainConfig, lam: float | None = None, eps: float | None = None) -> float:
    lam = cfg.lambda_init if lam is None else lam
    eps = cfg.eps_init if eps is None else eps
    return objective_terms(P, data, cfg, lam, eps)[0]


def gradient(P: NetParams, data, cfg: TrainConfig, lam: float | None = None, eps: float | None = None) -> np.ndarray:
    """Analytic gradient of :func:`penalized_objective` as a flat vector (ReLU'(0) taken as 0)."""
    lam = cfg.lambda_init if lam is None else lam
    eps = cfg.eps_init if eps is None else eps
    X, y, one_d = _as_arrays(data)
    H, act, out = _forward(P, X)
    r2 = 2.0 * (out - y)  # (N,)
    gate = (H > 0).astype(float)
    G = (r2[:, None] * gate) * P.v[None, :]  # d loss / d H, (N, K)
    gW = G.T @ X
    gb = G.sum(axis=0)
    gv = act.T @ r2
    bias = _penalise_bias(one_d, cfg)
    U = _penalty_inputs(P, bias)
    T = P.v[:, None] * U
    D = _rho_prime(T, eps, cfg.p)  # (K, d or d + 1)
    gU = lam * D * P.v[:, None]
    gv = gv + lam * np.sum(D * U, axis=1)
    d = P.W.shape[1]
    gW = gW + gU[:, :d]
    if bias:
        gb = gb + gU[:, d]
    parts = [gW.ravel(), gb, gv]
    if P.skip:
        parts += [X.T @ r2, [r2.sum()]]
    return np.concatenate(parts)


def finite_difference_gradient(P: NetParams, data, cfg: TrainConfig, lam: float, eps: float, h: float = 1e-6) -> np.ndarray:
    theta = P.flat()
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        fp = penalized_objective(P.unflat(theta + e), data, cfg, lam, eps)
        fm = penalized_objective(P.unflat(theta - e), data, cfg, lam, eps)
        g[i] = (fp - fm) / (2 * h)
    return g


def kink_margin(P: NetParams, data) -> float:
    """Smallest ``|w_k . x_i + b_k|``: distance of the parameters from a ReLU kink."""
    X, _, _ = _as_arrays(data)
    H = X @ P.W.T + P.b
    return float(np.abs(H).min())


def _active(P: NetParams, rtol: float) -> np.ndarray:
    U = _penalty_inputs(P, True)
    mags = np.abs(P.v[:, None] * U)
    top = mags.max(initial=0.0)
    return np.any(mags > rtol * top, axis=1) if top > 0 else np.zeros(P.width, dtype=bool)


def _prune(P: NetParams, rtol: float) -> NetParams:
    """Zero every neuron parameter whose product with the output weight is below ``rtol`` times the largest."""
    U = np.hstack([P.W, P.b[:, None]])
    prod = np.abs(P.v[:, None] * U)
    top = prod.max(initial=0.0)
    if top == 0:
        return P
    mask = prod > rtol * top
    U = np.where(mask, U, 0.0)
    v = np.where(mask.any(axis=1), P.v, 0.0)
    d = P.W.shape[1]
    return replace(P, W=U[:, :d], b=U[:, d], v=v)


def train(data, cfg: TrainConfig) -> TrainResult:
    """Deterministic full-batch descent with annealed ``lam``/``eps`` and backtracking steps."""
    X, y, one_d = _as_arrays(data)
    P = init_params(data, cfg)
    theta = P.flat()
    bias = _penalise_bias(one_d, cfg)
    traj: list = []
    eta = cfg.learning_rate
    for step in range(cfg.steps):
        lam, eps = cfg.lam(step), cfg.eps(step)
        P = P.unflat(theta)
        before = penalized_objective(P, data, cfg, lam, eps)
        if not math.isfinite(before):
            raise TrainingDivergedError(f"objective became non-finite at step {step}", traj)
        g = gradient(P, data, cfg, lam, eps)
        gg = float(g @ g)
        eta = min(cfg.learning_rate, 2 * eta)
        accepted = False
        while eta > 1e-16 * cfg.learning_rate:
            cand = theta - eta * g
            val = penalized_objective(P.unflat(cand), data, cfg, lam, eps)
            if math.isfinite(val) and val <= before - cfg.armijo * eta * gg:
                theta, accepted = cand, True
                break
            eta *= 0.5
        if not accepted:
            eta = cfg.learning_rate * 1e-3
        P = P.unflat(theta)
        obj, dl, pen = objective_terms(P, data, cfg, lam, eps)
        if not math.isfinite(obj):
            raise TrainingDivergedError(f"objective became non-finite at step {step}", traj)
        traj.append(
            {
                "step": step,
                "objective": obj,
                "data_loss": dl,
                "penalty": pen,
                "active_neurons": int(_active(P, cfg.prune_rtol).sum()),
                "objective_before": before,
                "lam": lam,
                "eps": eps,
            }
        )
    P = _prune(P.unflat(theta), cfg.prune_rtol)
    _, _, out = _forward(P, X)
    resid = float(np.abs(out - y).max(initial=0.0))
    keep = np.nonzero(P.v != 0)[0]
    if one_d:
        neurons = tuple((float(P.W[k, 0]), float(P.b[k]), float(P.v[k])) for k in keep if P.W[k, 0] != 0 or P.b[k] != 0)
        net = ReLUNet1D(neurons, float(P.a[0]), float(P.c))
        pn = net.path_norm(cfg.p)
        rep = report(from_network(net), cfg.p)
    else:
        neurons = []
        for k in keep:
            w = tuple(float(t) for t in np.append(P.W[k], P.b[k]))
            if any(w):
                # fold |v| into w so each neuron keeps an output weight of +-1
                s = 1 if P.v[k] > 0 else -1
                neurons.append((tuple(abs(P.v[k]) * t for t in w), s, -1, "trained"))
        net = ReconstructedNet(tuple(neurons), bias)
        pn = net.path_norm(cfg.p)
        rep = None
    active = sum(1 for k in keep if np.any(P.W[k] != 0) or P.b[k] != 0)
    return TrainResult(P, traj, net, pn, active, resid, rep, cfg)


def write_trajectory(result_or_rows, stream=None) -> str:
    """Trajectory as CSV with columns ``step,objective,data_loss,penalty,active_neurons``."""
    rows = result_or_rows.trajectory if isinstance(result_or_rows, TrainResult) else result_or_rows
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for r in rows:
        w.writerow([r["step"], "%.17g" % r["objective"], "%.17g" % r["data_loss"], "%.17g" % r["penalty"], r["active_neurons"]])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
