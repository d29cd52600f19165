"""Sparse linear / quadratic score models fitted by lasso coordinate descent.

Objective per lambda, on standardized columns and centered ``y``::

    (1 / 2k) * ||y - b0 - X b||^2 + lam * ||b||_1

The intercept is never penalized.  Coefficients are reported in the original
(unstandardized) feature scale so prediction needs no scaler.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .features import SCHEMA, QuadraticSchema, expand_base

DFMAX_PRESETS = (25, 50, 100, 500, 1000)
MODEL_FORMAT = "sparsebranch-model/1"

# near-constant filter
MODE_SHARE = 0.99
MIN_RANGE = 1e-9
ZERO_STD = 1e-12


class DegenerateDatasetError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class TrainingDataset:
    X: np.ndarray
    y: np.ndarray
    schema: QuadraticSchema | None = None   # None: columns are the base features
    domain: str = ""
    size: str = ""
    seed: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be k x p with k = len(y)")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains NaN or inf")

    @property
    def k(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class PathConfig:
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-4
    dfmax: int | None = None
    cd_tolerance: float = 1e-7
    max_cd_passes: int = 100_000

    def __post_init__(self):
        if self.n_lambdas <= 0 or self.lambda_min_ratio <= 0 or self.cd_tolerance <= 0:
            raise ValueError("path settings must be positive")
        if self.max_cd_passes <= 0 or (self.dfmax is not None and self.dfmax <= 0):
            raise ValueError("path settings must be positive")


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    y_mean: float
    y_std: float
    zero: np.ndarray          # columns with (near) zero std

    @classmethod
    def fit(cls, X, y) -> "Scaler":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        zero = std < ZERO_STD
        return cls(mean, np.where(zero, 1.0, std), float(y.mean()), float(y.std()), zero)

    def transform(self, X, out=None) -> np.ndarray:
        Z = np.subtract(X, self.mean, out=out)
        Z /= self.std
        Z[:, self.zero] = 0.0
        return Z


@dataclass
class SparseModel:
    schema: QuadraticSchema
    intercept: float
    term_ids: np.ndarray
    coefs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.term_ids = np.asarray(self.term_ids, dtype=np.int64)
        self.coefs = np.asarray(self.coefs, dtype=float)
        order = np.argsort(self.term_ids, kind="stable")
        self.term_ids, self.coefs = self.term_ids[order], self.coefs[order]
        self._left = self.schema.left[self.term_ids]
        self._right = self.schema.right[self.term_ids]

    @property
    def nnz(self) -> int:
        return len(self.term_ids)

    @property
    def name(self) -> str:
        kind = "quadratic" if self.schema.quadratic else "linear"
        return self.meta.get("name", f"{kind}-{self.nnz}")

    @property
    def schema_hash(self) -> str:
        return self.schema.hash

    @property
    def terms(self) -> list:
        return [(int(t), float(b), self.schema.term_name(int(t)))
                for t, b in zip(self.term_ids, self.coefs)]

    def predict(self, X_base) -> np.ndarray:
        """Scores for rows of the 101 base features."""
        X_base = np.asarray(X_base, dtype=float)
        if X_base.ndim != 2 or X_base.shape[1] != len(SCHEMA):
            raise ValueError(f"expected rows of {len(SCHEMA)} base features, got shape {X_base.shape}")
        V = X_base[:, self.schema.active_ids]
        T = V[:, self._left] * np.where(self._right >= 0, V[:, np.maximum(self._right, 0)], 1.0)
        return self.intercept + T @ self.coefs

    def predict_expanded(self, X_exp) -> np.ndarray:
        X_exp = np.asarray(X_exp, dtype=float)
        if X_exp.shape[-1] != len(self.schema):
            raise ValueError("expanded width does not match the model schema")
        return self.intercept + X_exp[:, self.term_ids] @ self.coefs

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "schema": self.schema.to_json(),
            "schema_hash": self.schema.hash,
            "intercept": float(self.intercept),
            "terms": [{"term_id": int(t), "features": list(self.schema.terms[int(t)]),
                       "coef": float(b), "name": self.schema.term_name(int(t))}
                      for t, b in zip(self.term_ids, self.coefs)],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d) -> "SparseModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model file (format {d.get('format')!r})")
        schema = QuadraticSchema.from_json(d["schema"])
        if d.get("schema_hash") != schema.hash:
            raise ValueError("model schema hash mismatch")
        ids = [t["term_id"] for t in d["terms"]]
        for t in d["terms"]:
            if tuple(t["features"]) != schema.terms[t["term_id"]]:
                raise ValueError(f"term {t['term_id']} does not match the schema")
        return cls(schema, d["intercept"], ids, [t["coef"] for t in d["terms"]], d.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")


def load_model(path) -> SparseModel:
    return SparseModel.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------

def filter_near_constant(X) -> np.ndarray:
    """Ids of columns that are not near-constant."""
    X = np.asarray(X, dtype=float)
    k = X.shape[0]
    if k < 2:
        raise ValueError("need at least two rows")
    keep = []
    for j in range(X.shape[1]):
        col = X[:, j]
        if col.max() - col.min() < MIN_RANGE:
            continue
        _, counts = np.unique(col, return_counts=True)
        if counts.max() > MODE_SHARE * k:
            continue
        keep.append(j)
    if not keep:
        raise DegenerateDatasetError("degenerate dataset: every column is near-constant")
    return np.array(keep, dtype=np.int64)


def lambda_max(X_std, y_centered) -> float:
    X_std = np.asarray(X_std, dtype=float)
    k = X_std.shape[0]
    if X_std.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(X_std.T @ np.asarray(y_centered, dtype=float))) / k)


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@njit(cache=True)
def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


NEWTON_EVERY = 5
DFMAX_SLACK = 10
REFINE_STEPS = 30
RIDGE = 1e-10
NEWTON_ROUNDS = 50


@njit(cache=True)
def _chol_delete(R, n, h):
    """Cholesky factor (upper, leading ``n`` x ``n``) of a matrix with row/column ``h`` removed."""
    for c in range(h, n - 1):
        for r in range(c + 2):
            R[r, c] = R[r, c + 1]
    for r in range(n):
        R[r, n - 1] = 0.0
    # restore triangularity with Givens rotations on rows (c, c + 1)
    for c in range(h, n - 1):
        a = R[c, c]
        b = R[c + 1, c]
        rr = np.hypot(a, b)
        if rr == 0.0:
            continue
        cs = a / rr
        sn = b / rr
        for t in range(c, n - 1):
            u = R[c, t]
            v = R[c + 1, t]
            R[c, t] = cs * u + sn * v
            R[c + 1, t] = -sn * u + cs * v
        R[c + 1, c] = 0.0
    for t in range(n):
        R[n - 1, t] = 0.0


@njit(cache=True)
def _chol_solve(R, n, rhs):
    z = np.empty(n)
    for i in range(n):
        s = rhs[i]
        for t in range(i):
            s -= R[t, i] * z[t]
        z[i] = s / R[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = z[i]
        for t in range(i + 1, n):
            s -= R[i, t] * x[t]
        x[i] = s / R[i, i]
    return x


@njit(cache=True)
def _newton_step(G, gA, beta, act, na, lam, rounds):
    """Move towards the minimiser on the current support with signs fixed.

    Directions solve ``(H + eps I) d = g - lam * sign``.  Where ``H`` is
    singular this points along the null space (the fit is unchanged and the
    l1 term drops), elsewhere it is the Newton step.  Each round minimises
    exactly along the line, cut at the first zero crossing; the crossing
    coefficient leaves the support and the factor is downdated.
    """
    S = np.empty(na, dtype=np.int64)
    ns = 0
    for t in range(na):
        if beta[act[t]] != 0.0:
            S[ns] = t
            ns += 1
    if ns == 0:
        return
    H = np.empty((ns, ns))
    for a in range(ns):
        for b in range(ns):
            H[a, b] = G[S[a], S[b]]
        H[a, a] += RIDGE
    try:
        R = np.linalg.cholesky(H).T.copy()
    except Exception:
        return
    for a in range(ns):
        H[a, a] -= RIDGE
    sgn = np.empty(ns)
    for a in range(ns):
        sgn[a] = np.sign(beta[act[S[a]]])
    for _ in range(rounds):
        rhs = np.empty(ns)
        for a in range(ns):
            rhs[a] = gA[S[a]] - lam * sgn[a]
        delta = _chol_solve(R, ns, rhs)
        slope = 0.0
        for a in range(ns):
            if not np.isfinite(delta[a]):
                return
            slope += rhs[a] * delta[a]
        if slope <= 0.0:
            return
        curv = 0.0
        for a in range(ns):
            hd = 0.0
            for b in range(ns):
                hd += H[a, b] * delta[b]
            curv += delta[a] * hd
        step = slope / curv if curv > 0.0 else np.inf
        hit = -1
        for a in range(ns):
            if delta[a] != 0.0:
                b0 = beta[act[S[a]]]
                if (b0 + step * delta[a]) * b0 <= 0.0:
                    step = b0 / -delta[a]
                    hit = a
        if not np.isfinite(step):
            return
        for a in range(ns):
            j = act[S[a]]
            d = -beta[j] if a == hit else step * delta[a]
            if d != 0.0:
                beta[j] = 0.0 if a == hit else beta[j] + d
                for u in range(na):
                    gA[u] -= G[u, S[a]] * d
        if hit < 0:
            return
        _chol_delete(R, ns, hit)
        for a in range(hit, ns - 1):
            S[a] = S[a + 1]
            sgn[a] = sgn[a + 1]
            for b in range(ns):
                H[a, b] = H[a + 1, b]
        for b in range(hit, ns - 1):
            for a in range(ns - 1):
                H[a, b] = H[a, b + 1]
        ns -= 1
        if ns == 0:
            return


@njit(cache=True)
def _grow_gram(X, G, act, pos, na, j, nrm):
    """Append column ``j`` to the active set and its cached inner products."""
    k = X.shape[0]
    if na == G.shape[0]:
        G2 = np.empty((2 * na, 2 * na))
        G2[:na, :na] = G[:na, :na]
        G = G2
    for t in range(na):
        a = act[t]
        s = 0.0
        for i in range(k):
            s += X[i, a] * X[i, j]
        G[t, na] = s / k
        G[na, t] = s / k
    G[na, na] = nrm[j]
    act[na] = j
    pos[j] = na
    return G


@njit(cache=True)
def _cd_path(X, y, lambdas, tol, max_passes, usable, dfmax, beta0, newton_rounds=NEWTON_ROUNDS):
    """Coordinate descent over ``lambdas``, warm-started from ``beta0``.

    Each lambda alternates exact full passes (gradients from the residual)
    with cheap passes over the active set that use cached inner products.
    A lambda is done after a full pass whose largest coefficient change is
    below ``tol``.
    """
    k, p = X.shape
    L = len(lambdas)
    nrm = np.zeros(p)
    for j in range(p):
        if usable[j]:
            s = 0.0
            for i in range(k):
                s += X[i, j] * X[i, j]
            nrm[j] = s / k
    beta = beta0.copy()
    r = y.copy()
    pos = np.full(p, -1, dtype=np.int64)
    act = np.empty(p, dtype=np.int64)
    na = 0
    G = np.empty((16, 16))
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(k):
                r[i] -= X[i, j] * beta[j]
            G = _grow_gram(X, G, act, pos, na, j, nrm)
            na += 1
    betas = np.zeros((L, p))
    passes_out = np.zeros(L, dtype=np.int64)
    conv_out = np.zeros(L, dtype=np.bool_)
    done = 0
    for li in range(L):
        lam = lambdas[li]
        passes = 0
        converged = False
        while passes < max_passes:
            change = 0.0
            for j in range(p):
                if not usable[j] or nrm[j] <= 0.0:
                    continue
                g = 0.0
                for i in range(k):
                    g += X[i, j] * r[i]
                g /= k
                old = beta[j]
                b = _soft(g + nrm[j] * old, lam) / nrm[j]
                d = b - old
                if d != 0.0:
                    for i in range(k):
                        r[i] -= X[i, j] * d
                    beta[j] = b
                    if abs(d) > change:
                        change = abs(d)
                    if pos[j] < 0:
                        G = _grow_gram(X, G, act, pos, na, j, nrm)
                        na += 1
            passes += 1
            if change < tol:
                converged = True
                break
            # active-set passes on cached inner products
            gA = np.empty(na)
            start = np.empty(na)
            for t in range(na):
                a = act[t]
                s = 0.0
                for i in range(k):
                    s += X[i, a] * r[i]
                gA[t] = s / k
                start[t] = beta[a]
            sweeps = 0
            while passes < max_passes:
                change = 0.0
                for t in range(na):
                    j = act[t]
                    old = beta[j]
                    b = _soft(gA[t] + nrm[j] * old, lam) / nrm[j]
                    d = b - old
                    if d != 0.0:
                        beta[j] = b
                        if abs(d) > change:
                            change = abs(d)
                        for u in range(na):
                            gA[u] -= G[u, t] * d
                passes += 1
                sweeps += 1
                if change < tol:
                    break
                if sweeps % NEWTON_EVERY == 0:
                    _newton_step(G, gA, beta, act, na, lam, newton_rounds)
            for t in range(na):
                a = act[t]
                d = beta[a] - start[t]
                if d != 0.0:
                    for i in range(k):
                        r[i] -= X[i, a] * d
        betas[li] = beta
        passes_out[li] = passes
        conv_out[li] = converged
        done = li + 1
        if dfmax > 0:
            nnz = 0
            for j in range(p):
                if beta[j] != 0.0:
                    nnz += 1
            if nnz > dfmax:
                break
    return betas[:done], passes_out[:done], conv_out[:done]


def _first_of_duplicates(X) -> np.ndarray:
    """Mask keeping the first of each group of identical columns.

    Identical columns (the square of a 0/1 feature equals the feature) are
    fitted once; lasso solutions are unaffected because copies share gradients.
    """
    keep = np.ones(X.shape[1], dtype=bool)
    seen: dict = {}
    for j in range(X.shape[1]):
        col = np.ascontiguousarray(X[:, j])
        key = hashlib.blake2b(col.tobytes(), digest_size=16).digest()
        if key in seen and np.array_equal(X[:, seen[key]], col):
            keep[j] = False
        else:
            seen.setdefault(key, j)
    return keep


def lambda_grid(lam_max: float, cfg: PathConfig) -> np.ndarray:
    if cfg.n_lambdas == 1:
        return np.array([lam_max])
    return lam_max * cfg.lambda_min_ratio ** (np.arange(cfg.n_lambdas) / (cfg.n_lambdas - 1))


@dataclass
class LassoFit:
    """Standardized-space path state kept for diagnostics."""

    lambdas: list
    betas: list               # standardized coefficients per lambda
    scaler: Scaler
    passes: list
    converged: list


def lasso_path(data: TrainingDataset, cfg: PathConfig | None = None, lambdas=None,
               overwrite: bool = False, return_fit: bool = False):
    """Warm-started lasso path; returns ``[(lam, SparseModel), ...]`` in decreasing lambda."""
    cfg = cfg or PathConfig()
    schema = data.schema or QuadraticSchema(range(data.p), quadratic=False)
    if len(schema) != data.p:
        raise ValueError("dataset width does not match its schema")
    k = data.k
    scaler = Scaler.fit(data.X, data.y)
    Xs = np.asfortranarray(data.X if overwrite else data.X.copy())
    scaler.transform(Xs, out=Xs)
    usable = ~scaler.zero & _first_of_duplicates(Xs)
    yc = data.y - scaler.y_mean
    lmax = lambda_max(Xs, yc)
    grid = lambda_grid(lmax, cfg) if lambdas is None else np.asarray(lambdas, dtype=float)
    dfmax = cfg.dfmax or 0
    betas, passes, conv = _cd_path(Xs, yc, grid, cfg.cd_tolerance, cfg.max_cd_passes, usable,
                                   dfmax, np.zeros(data.p))
    if dfmax and len(betas) >= 2 and np.count_nonzero(betas[-1]) > dfmax + DFMAX_SLACK:
        grid, betas, passes, conv = _refine_crossing(Xs, yc, grid[:len(betas)], betas, passes, conv,
                                                     cfg, usable, dfmax)
    # lam >= lam_max has the all-zero solution; CD sums can disagree with lam_max in the last ulp
    betas[grid[:len(betas)] >= lmax] = 0.0
    path, fit = [], LassoFit([], [], scaler, [], [])
    for lam, beta, npass, ok in zip(grid, betas, passes, conv):
        if not ok:
            warnings.warn(f"coordinate descent did not converge at lambda={lam:.3g}", ConvergenceWarning)
        model = _to_model(beta, scaler, schema, float(lam),
                          dict(passes=int(npass), converged=bool(ok)))
        path.append((float(lam), model))
        fit.lambdas.append(float(lam))
        fit.betas.append(beta.copy())
        fit.passes.append(int(npass))
        fit.converged.append(bool(ok))
    return (path, fit) if return_fit else path


def _refine_crossing(Xs, yc, grid, betas, passes, conv, cfg, usable, dfmax):
    """Replace an overshooting last grid point with a lambda just past ``dfmax``.

    Bisects in log-lambda between the last two grid points, warm-started from
    the last solution within the limit, until the first solution above
    ``dfmax`` has at most ``dfmax + DFMAX_SLACK`` nonzeros.
    """
    hi_lam, lo_lam = grid[-2], grid[-1]             # hi_lam: within dfmax
    warm = betas[-2]
    best = (lo_lam, betas[-1], passes[-1], conv[-1])
    for _ in range(REFINE_STEPS):
        mid = float(np.sqrt(hi_lam * lo_lam))
        b, ps, cv = _cd_path(Xs, yc, np.array([mid]), cfg.cd_tolerance, cfg.max_cd_passes, usable,
                             0, warm)
        nnz = np.count_nonzero(b[0])
        if nnz > dfmax:
            best = (mid, b[0], ps[0], cv[0])
            lo_lam = mid
            if nnz <= dfmax + DFMAX_SLACK:
                break
        else:
            hi_lam = mid
            warm = b[0]
    lam, b, ps, cv = best
    grid = np.append(grid[:-1], lam)
    betas = np.vstack([betas[:-1], b[None, :]])
    return grid, betas, np.append(passes[:-1], ps), np.append(conv[:-1], cv)


def _to_model(beta_std, scaler: Scaler, schema, lam, extra) -> SparseModel:
    nz = np.flatnonzero(beta_std)
    coefs = beta_std[nz] / scaler.std[nz]
    intercept = scaler.y_mean - float(coefs @ scaler.mean[nz]) if len(nz) else scaler.y_mean
    meta = {"lambda": lam, "nnz": int(len(nz)), **extra}
    return SparseModel(schema, intercept, nz, coefs, meta)


def kkt_violation(X_std, y_centered, beta, lam) -> float:
    """Largest KKT residual of a standardized-space lasso solution."""
    k = X_std.shape[0]
    r = y_centered - X_std @ beta
    g = X_std.T @ r / k
    nz = beta != 0
    v_zero = np.max(np.abs(g[~nz]) - lam, initial=0.0)
    v_nz = np.max(np.abs(g[nz] - lam * np.sign(beta[nz])), initial=0.0)
    return float(max(v_zero, v_nz, 0.0))


def mse(model: SparseModel, data: TrainingDataset) -> float:
    if data.schema is not None and data.schema != model.schema:
        raise ValueError("validation schema does not match the model schema")
    pred = model.predict_expanded(data.X) if data.schema is not None else model.predict(data.X)
    return float(np.mean((data.y - pred) ** 2))


def select_model(path, validation: TrainingDataset):
    """Path entry with the lowest validation MSE; ties go to the larger lambda."""
    if not path:
        raise ValueError("empty regularization path")
    errs = [mse(m, validation) for _, m in path]
    lams = [lam for lam, _ in path]
    best = min(range(len(path)), key=lambda i: (errs[i], -lams[i]))
    model = path[best][1]
    model.meta["valid_mse"] = errs[best]
    return model


def standardized_coefficients(model: SparseModel, scaler: Scaler) -> list:
    """``(term id, name, beta * s_i / s_y)`` sorted by magnitude, zeros dropped."""
    out = []
    for t, b in zip(model.term_ids, model.coefs):
        if b == 0:
            continue
        s_i = 0.0 if scaler.zero[t] else scaler.std[t]
        bs = b * s_i / scaler.y_std if scaler.y_std > 0 else 0.0
        out.append((int(t), model.schema.term_name(int(t)), float(bs)))
    out.sort(key=lambda e: (-abs(e[2]), e[0]))
    return out


def stored_standardized_coefficients(model: SparseModel) -> list:
    """Standardized coefficients from the scales saved with a trained model."""
    if "term_std" not in model.meta or "y_std" not in model.meta:
        raise ValueError("model file carries no training scales")
    y_std = model.meta["y_std"]
    out = [(int(t), model.schema.term_name(int(t)), float(b * s / y_std) if y_std > 0 else 0.0)
           for t, b, s in zip(model.term_ids, model.coefs, model.meta["term_std"]) if b != 0]
    out.sort(key=lambda e: (-abs(e[2]), e[0]))
    return out


def common_features(models) -> set:
    if not models:
        return set()
    ref = models[0].schema
    for m in models[1:]:
        if m.schema != ref:
            raise ValueError("models use different schemas")
    sets = [set(int(t) for t, b in zip(m.term_ids, m.coefs) if b != 0) for m in models]
    return set.intersection(*sets)


# ---------------------------------------------------------------------------
# end-to-end training from base-feature datasets

def expand_dataset(X_base, y, schema: QuadraticSchema, **prov) -> TrainingDataset:
    X = np.asfortranarray(expand_base(X_base, schema))
    return TrainingDataset(X, y, schema, **prov)


@dataclass
class TrainResult:
    model: SparseModel
    path: list
    scaler: Scaler
    valid_mse: list
    constant_mse: float


def train(X_train, y_train, X_valid, y_valid, quadratic: bool = True, cfg: PathConfig | None = None,
          **prov) -> TrainResult:
    """Filter, expand, fit the path and select on validation MSE."""
    cfg = cfg or PathConfig()
    active = filter_near_constant(X_train)
    schema = QuadraticSchema(active, quadratic=quadratic)
    tr = expand_dataset(X_train, y_train, schema, **prov)
    path, fit = lasso_path(tr, cfg, overwrite=True, return_fit=True)
    scaler = fit.scaler
    del tr
    va = expand_dataset(X_valid, y_valid, schema)
    errs = [mse(m, va) for _, m in path]
    model = select_model(path, va)
    model.meta.update(term_std=[0.0 if scaler.zero[t] else float(scaler.std[t]) for t in model.term_ids],
                      y_std=float(scaler.y_std))
    model.meta.update(dfmax=cfg.dfmax, quadratic=quadratic, n_terms=len(schema),
                      train_rows=int(len(y_train)), path_length=len(path),
                      **{k: v for k, v in prov.items() if isinstance(v, (int, str))})
    const = float(np.mean((np.asarray(y_valid) - float(np.mean(y_train))) ** 2))
    return TrainResult(model, path, scaler, errs, const)


def path_knee(path, valid_mse, share: float = 0.99) -> int:
    """Index of the first path entry capturing ``share`` of the attainable MSE reduction."""
    e = np.asarray(valid_mse, dtype=float)
    best = e.min()
    target = e[0] - share * (e[0] - best)
    return int(np.flatnonzero(e <= target + 1e-15)[0])


def lambda_scale_to_sum(lam: float, k: int) -> float:
    """Convert the mean-square lambda to the unscaled sum-of-squares form."""
    return lam * k
