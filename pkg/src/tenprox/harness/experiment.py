"""Image-completion experiments over the six algorithm variants.

Every algorithm sees the same observed data ``B = P_E(M)`` and starts from
``B`` itself. Wall time covers the solve call only.
"""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..errors import DivergenceError, ParameterError
from ..extrap import accelerate_solver
from ..linop import gradient_op, identity_op, mask_op
from ..metrics import psnr, relative_error
from ..prox import l1
from ..solvers import ProblemSpec, SolverConfig, box, gtpg_solve, nuclear_ball, whole_space
from ..tensor import unfolding_nuclear_norm
from .images import load_image
from .masks import MaskSpec, make_mask

ALGORITHMS = ("TISTA", "TISTA-TET", "TISTA-HM", "TDPG", "TDPG-TET", "TDPG-HM")
RECORD_FIELDS = ("algorithm", "mask_level", "psnr_db", "rel_error", "wall_s",
                 "outer_iters", "cycles", "seed")

# Per-family defaults. The l1/identity family cannot fill unobserved
# entries under a box (the l1 term pulls them to zero), so it is paired
# with a nuclear-norm ball.
FAMILY_DEFAULTS = {
    "TISTA": {"mu": 0.01, "omega": "nuclear"},
    "TDPG": {"mu": 0.05, "omega": "box"},
}
EPSILON_SCALE = 0.3
WINDOW_DEFAULTS = {"tet": 2, "hm": 3}


@dataclass
class ExperimentParams:
    """Knobs shared by every algorithm of a run.

    ``None`` fields fall back to the per-family defaults: ``mu`` 0.01 for
    TISTA and 0.05 for TDPG, ``omega`` nuclear ball for TISTA and box for
    TDPG, ``epsilon`` 0.3 times the mode-0 nuclear norm of the observed
    data, ``window`` 2 for TET and 3 for HM.
    """

    mu: Optional[float] = None
    omega: Optional[str] = None
    epsilon: Optional[float] = None
    nuclear_mode: int = 0
    window: Optional[int] = None
    probe: str = "delta"
    max_cycles: int = 200
    guard: str = "final"
    positive_rhs: bool = False

    def __post_init__(self):
        if self.omega not in (None, "box", "nuclear", "none"):
            raise ParameterError(f"unknown constraint {self.omega!r}")
        if self.mu is not None and self.mu < 0:
            raise ParameterError(f"mu must be non-negative, got {self.mu}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.window is not None and self.window < 1:
            raise ParameterError(f"window must be >= 1, got {self.window}")


@dataclass
class ExperimentRecord:
    """One row of a results table.

    ``psnr_db`` is ``inf`` on exact recovery. ``status`` is ``"ok"``,
    ``"max_iter"`` (iteration cap hit before the stopping rule) or
    ``"diverged"`` (metrics are NaN). ``curve`` holds
    ``(base_iterations, rel_error, psnr)`` triples for plotting and
    ``recovered`` the final tensor; neither is emitted.
    """

    algorithm: str
    mask_level: float
    psnr_db: float
    rel_error: float
    wall_s: float
    outer_iters: int
    cycles: int
    seed: int
    config: dict = field(default_factory=dict)
    status: str = "ok"
    curve: list = field(default_factory=list, repr=False)
    recovered: Optional[np.ndarray] = field(default=None, repr=False)

    def row(self):
        return {k: getattr(self, k) for k in RECORD_FIELDS}


def split_algorithm(name):
    """``"TDPG-TET"`` -> ``("TDPG", "tet")``; plain names give ``None``."""
    name = name.upper()
    if name not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    family, _, ext = name.partition("-")
    return family, (ext.lower() or None)


def build_problem(family, b, mask, params):
    """Assemble the completion problem for one family; returns ``(spec, settings)``."""
    fam = FAMILY_DEFAULTS[family]
    mu = fam["mu"] if params.mu is None else params.mu
    omega_kind = params.omega or fam["omega"]
    shape = b.shape
    settings = {"mu": mu, "omega": omega_kind}
    if omega_kind == "box":
        omega = box(0.0, 1.0)
    elif omega_kind == "nuclear":
        eps = params.epsilon
        if eps is None:
            eps = EPSILON_SCALE * unfolding_nuclear_norm(b, params.nuclear_mode)
        omega = nuclear_ball(eps, params.nuclear_mode)
        settings["epsilon"] = float(eps)
        settings["nuclear_mode"] = params.nuclear_mode
    else:
        omega = whole_space()
    L = identity_op(shape) if family == "TISTA" else gradient_op(shape)
    return ProblemSpec(F=mask_op(mask), b=b, L=L, phi=l1, mu=mu, omega=omega), settings


def _rel_from_psnr(p, ref_sq_norm, size):
    if math.isinf(p):
        return 0.0
    mse = 10.0 ** (-p / 10.0)
    return math.sqrt(mse * size / ref_sq_norm)


def _cfg_snapshot(cfg):
    snap = asdict(cfg)
    return json.loads(json.dumps(snap))


def run_algorithm(name, image, mask, cfg=None, params=None, seed=0, mask_level=float("nan")):
    """Run one algorithm on ``P_E(image)`` and measure it against `image`."""
    cfg = cfg or SolverConfig()
    params = params or ExperimentParams()
    family, ext = split_algorithm(name)
    b = mask_op(mask)(image)
    spec, settings = build_problem(family, b, mask, params)
    config = {"solver": _cfg_snapshot(cfg), **settings}
    ref_sq = float(np.sum(image * image))
    rec = ExperimentRecord(algorithm=name.upper(), mask_level=mask_level, psnr_db=math.nan,
                           rel_error=math.nan, wall_s=0.0, outer_iters=0, cycles=0,
                           seed=seed, config=config)
    t0 = time.monotonic()
    try:
        if ext is None:
            rep = gtpg_solve(spec, cfg, reference=image)
            rec.wall_s = time.monotonic() - t0
            x = rep.final
            rec.outer_iters = rep.iterates_used
            rec.status = "ok" if rep.stop_reason == "tol" else "max_iter"
            rec.curve = [(k + 1, _rel_from_psnr(h.psnr, ref_sq, image.size), h.psnr)
                         for k, h in enumerate(rep.history)]
        else:
            m = params.window or WINDOW_DEFAULTS[ext]
            config.update(window=m, probe=params.probe, guard=params.guard,
                          positive_rhs=params.positive_rhs)
            rep = accelerate_solver(spec, cfg, method=ext, m=m, max_cycles=params.max_cycles,
                                    reference=image, probe=params.probe, guard=params.guard,
                                    positive_rhs=params.positive_rhs)
            rec.wall_s = time.monotonic() - t0
            x = rep.final
            rec.outer_iters = rep.base_iterations
            rec.cycles = rep.n_cycles
            rec.status = "ok" if rep.stop_reason == "tol" else "max_iter"
            used = 0
            for c in rep.cycles:
                used += c.base_steps
                rec.curve.append((used, _rel_from_psnr(c.psnr, ref_sq, image.size), c.psnr))
    except DivergenceError:
        rec.wall_s = time.monotonic() - t0
        rec.status = "diverged"
        return rec
    rec.psnr_db = psnr(x, image)
    rec.rel_error = relative_error(x, image)
    rec.recovered = x
    return rec


def run_completion_experiment(image, mask_spec=None, algorithms=ALGORITHMS, cfg=None,
                              params=None):
    """Run each algorithm in `algorithms` on the same masked image.

    Parameters
    ----------
    image : str, Path or ndarray
        Image path, or an ``H x W x C`` array in [0, 1].
    mask_spec : MaskSpec, optional
        Defaults to half the pixels missing with seed 0.
    algorithms : sequence of str
        Subset of :data:`ALGORITHMS`.
    cfg : SolverConfig, optional
    params : ExperimentParams, optional

    Returns
    -------
    list of ExperimentRecord
        A diverging solver yields a record with ``status="diverged"``;
        the remaining algorithms still run.
    """
    if not isinstance(image, np.ndarray):
        image = load_image(image)
    image = np.asarray(image, dtype=np.float64)
    mask_spec = mask_spec or MaskSpec()
    for a in algorithms:
        split_algorithm(a)
    names = [a.upper() for a in algorithms]
    mask = make_mask(image.shape, mask_spec)
    return [run_algorithm(a, image, mask, cfg, params, seed=mask_spec.seed,
                          mask_level=mask_spec.level) for a in names]


def masked_psnr(image, mask):
    """PSNR of the observed data (missing entries zero) against `image`."""
    return psnr(mask_op(mask)(image), image)


# -- emission ---------------------------------------------------------------

def emit_records(records: List[ExperimentRecord], path, fmt="csv"):
    """Write records as CSV (the eight table columns) or JSON lines
    (the same columns plus ``config`` and ``status``)."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh)
                w.writerow(RECORD_FIELDS)
                for r in records:
                    w.writerow([repr(v) if isinstance(v, float) else v
                                for v in r.row().values()])
            elif fmt == "jsonl":
                for r in records:
                    obj = r.row()
                    obj["config"] = r.config
                    obj["status"] = r.status
                    fh.write(json.dumps(obj) + "\n")
            else:
                raise ParameterError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_records(path, fmt="csv"):
    """Parse a file written by :func:`emit_records` into a list of dicts."""
    path = Path(path)
    casts = {"mask_level": float, "psnr_db": float, "rel_error": float, "wall_s": float,
             "outer_iters": int, "cycles": int, "seed": int}
    out = []
    with open(path, newline="") as fh:
        if fmt == "csv":
            for row in csv.DictReader(fh):
                out.append({k: casts.get(k, str)(v) for k, v in row.items()})
        elif fmt == "jsonl":
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        else:
            raise ParameterError(f"unknown format {fmt!r}")
    return out
