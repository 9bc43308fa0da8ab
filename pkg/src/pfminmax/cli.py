"""Benchmark harness: flat key = value configs, experiment orchestration, CSV output.

Exit codes: 0 success, 2 invalid configuration, 3 data or I/O error,
4 numerical failure inside a solver (reported with its iteration).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as D
from .errors import ConfigError, DataError, NumericalError
from .metrics import RunRecord, dro_monitor, synthetic_monitor
from .problems import DroProblem, SyntheticProblem
from .solvers import (
    RestartSchedule,
    SolverOutput,
    cb_min_max,
    cb_min_max_simplex,
    default_step_sizes,
    primal_dual_gradient,
    restart_cb_min_max,
)

CSV_COLUMNS = (
    "iteration", "elapsed_s", "gap", "gap_exact", "dist_to_opt",
    "train_loss", "test_loss", "robust_objective",
)
OUTPUT_DIR_ENV = "PFMINMAX_OUTPUT_DIR"

EXPERIMENTS = ("synthetic", "dro")
ALGORITHMS = ("cb_min_max", "cb_min_max_simplex", "restart", "pdg", "pdg_entropic")
SIMPLEX_ONLY = ("cb_min_max_simplex", "pdg_entropic")


def _choice(options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _labels(s: str) -> tuple[float, ...]:
    """Comma-separated raw labels; ``a..b`` expands to the integers a..b."""
    out: list[float] = []
    for tok in s.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ".." in tok:
            lo, hi = (int(v) for v in tok.split("..", 1))
            if hi < lo:
                raise ValueError(f"empty range {tok!r}")
            out.extend(float(v) for v in range(lo, hi + 1))
        else:
            out.append(float(tok))
    if not out:
        raise ValueError("empty label list")
    return tuple(out)


def _opt(parse):
    def wrapped(s: str):
        return None if s.strip().lower() in ("", "none", "auto") else parse(s)

    return wrapped


def _key(parse, default=None, help=""):
    return field(default=default, metadata={"parse": parse, "help": help})


@dataclass
class RunConfig:
    experiment: str = _key(_choice(EXPERIMENTS), "synthetic", "synthetic or dro")
    algorithm: str = _key(_choice(ALGORITHMS), "cb_min_max", "solver to run")
    T: int = _key(int, 1000, "iterations")
    epsilon_prime: float = _key(float, 1.0, "initial wealth of each bettor")
    centering: str = _key(_choice(("origin", "x0")), "origin", "bet anchor of the Euclidean bettors")
    scaling: str = _key(_choice(("bound", "adaptive")), "bound", "gradient pre-scaling")
    coin_sign: str = _key(_choice(("regret", "literal")), "regret", "simplex coin convention")
    clip_coins: bool = _key(_bool, True, "clip simplex coins to [-1, 1]")
    # problem
    rho: Optional[float] = _key(_opt(float), None, "curvature (synthetic 0.5, dro 1e-4)")
    R_x: float = _key(float, 5.0, "synthetic x box radius")
    R_y: float = _key(float, 5.0, "synthetic y box radius")
    lam: float = _key(float, 1e-4, "dro weight penalty")
    R: float = _key(float, 1e5, "dro ball radius")
    regularizer_sign: int = _key(int, 1, "sign of the dro weight penalty")
    x0: float = _key(float, 1.0, "synthetic start x")
    y0: float = _key(float, 1.0, "synthetic start y")
    # data
    dataset: str = _key(_choice(("desk", "libsvm")), "desk", "generated desk data or LIBSVM files")
    train_path: Optional[str] = _key(_opt(str), None, "LIBSVM training file")
    test_path: Optional[str] = _key(_opt(str), None, "LIBSVM test file (else a seeded split)")
    n_samples: int = _key(int, 200, "desk dataset size")
    n_features: int = _key(int, 20, "desk dataset dimension")
    remap: Optional[str] = _key(_opt(_choice(tuple(D.REMAPS))), None, "named label remap preset")
    remap_positive: Optional[tuple] = _key(_opt(_labels), None, "raw labels mapped to +1")
    remap_negative: Optional[tuple] = _key(_opt(_labels), None, "raw labels mapped to -1")
    test_fraction: float = _key(float, 0.2, "held-out fraction when no test file is given")
    seed: int = _key(int, 42, "data generation and split seed")
    # baselines
    eta_x: Optional[float] = _key(_opt(float), None, "primal step (default D/(G sqrt T))")
    eta_y: Optional[float] = _key(_opt(float), None, "dual step")
    # restart schedule
    epsilon0: float = _key(float, 4.0, "initial gap level")
    epsilon_target: float = _key(float, 0.25, "target gap level")
    theta: float = _key(float, 0.25, "growth exponent")
    complexity_constant: float = _key(float, 100.0, "stage length constant")
    # output
    record_every: Optional[int] = _key(_opt(int), None, "trace cadence (default max(1, T/1000))")
    gap_every: Optional[int] = _key(_opt(int), None, "dro gap cadence (default max(1, T/10))")
    gap_steps: int = _key(int, 500, "inner steps of the dro gap estimate; 0 disables it")
    timing: str = _key(_choice(("wall", "off")), "wall", "fill elapsed_s, or leave it empty")
    output: Optional[str] = _key(_opt(str), None, "CSV path")
    baseline: str = _key(_choice(ALGORITHMS), "pdg", "second algorithm for compare")

    def validate(self) -> RunConfig:
        if self.T < 1:
            raise ConfigError("T must be a positive integer")
        for name in ("epsilon_prime", "R_x", "R_y", "R", "complexity_constant", "epsilon0", "epsilon_target"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.rho is not None and not self.rho >= 0:
            raise ConfigError("rho must be non-negative")
        if self.lam < 0:
            raise ConfigError("lam must be non-negative")
        if self.regularizer_sign not in (1, -1):
            raise ConfigError("regularizer_sign must be 1 or -1")
        for name in ("record_every", "gap_every", "n_samples", "n_features"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.gap_steps < 0:
            raise ConfigError("gap_steps must be >= 0")
        for name in ("eta_x", "eta_y"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.experiment == "synthetic" and self.algorithm in SIMPLEX_ONLY:
            raise ConfigError(f"{self.algorithm} needs a simplex dual; use experiment = dro")
        if self.experiment == "synthetic" and self.rho is not None and self.rho == 0:
            raise ConfigError("synthetic rho must be positive")
        if self.experiment == "dro" and self.dataset == "libsvm" and not self.train_path:
            raise ConfigError("dataset = libsvm needs train_path")
        if (self.remap_positive is None) != (self.remap_negative is None):
            raise ConfigError("remap_positive and remap_negative must be given together")
        if self.remap and self.remap_positive is not None:
            raise ConfigError("give either remap or remap_positive/remap_negative, not both")
        if self.algorithm == "restart":
            try:
                self.schedule()
            except ValueError as err:
                raise ConfigError(str(err)) from None
        return self

    def schedule(self) -> RestartSchedule:
        return RestartSchedule(self.epsilon0, self.epsilon_target, self.theta, self.complexity_constant)


KEYS = {f.name: f for f in fields(RunConfig)}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip()
    return out


def build_config(raw: dict[str, str], base: Optional[RunConfig] = None) -> RunConfig:
    values = {}
    for key, text in raw.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = KEYS[key].metadata["parse"](text)
        except ValueError as err:
            raise ConfigError(f"bad value {text!r} for {key}: {err}") from None
    cfg = replace(base, **values) if base is not None else RunConfig(**values)
    return cfg.validate()


def load_config(path: Optional[str], overrides: dict[str, str]) -> RunConfig:
    raw: dict[str, str] = {}
    if path is not None:
        try:
            raw.update(read_config_file(path))
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
    raw.update(overrides)
    return build_config(raw)


# -- problem assembly -------------------------------------------------------


class EuclideanDualView:
    """A DRO oracle whose dual bound is Euclidean (sqrt(n) times the inf-norm bound)."""

    def __init__(self, problem: DroProblem):
        self.problem = problem
        self.X = problem.X
        self.Y = problem.Y

    def value(self, w, p):
        return self.problem.value(w, p)

    def subgrads(self, w, p):
        return self.problem.subgrads(w, p)

    def bounds(self):
        Gw, Gp = self.problem.bounds()
        return Gw, math.sqrt(self.problem.n) * Gp


def _remap_for(cfg: RunConfig) -> Optional[D.LabelRemap]:
    if cfg.remap:
        return D.REMAPS[cfg.remap]
    if cfg.remap_positive is not None:
        try:
            return D.LabelRemap.of(cfg.remap_positive, cfg.remap_negative)
        except ValueError as err:
            raise ConfigError(str(err)) from None
    return None


def load_data(cfg: RunConfig) -> tuple[D.Dataset, D.Dataset]:
    """Train and test sets with +-1 labels and a shared dimension."""
    if cfg.dataset == "desk":
        full = D.make_classification(cfg.n_samples, cfg.n_features, seed=cfg.seed)
        test = None
    else:
        full = D.load_libsvm(cfg.train_path)
        test = D.load_libsvm(cfg.test_path) if cfg.test_path else None
    remap = _remap_for(cfg)
    if remap is not None:
        full = D.remap_labels(full, remap)
        test = D.remap_labels(test, remap) if test is not None else None
    if test is None:
        try:
            train, test = D.split(full, cfg.test_fraction, cfg.seed)
        except ValueError as err:
            raise DataError(str(err)) from None
    else:
        train = full
    dim = max(train.dimension, test.dimension)
    train, test = train.with_dimension(dim), test.with_dimension(dim)
    for name, ds in (("train", train), ("test", test)):
        bad = sorted({y for y in ds.labels if y not in (1.0, -1.0)})
        if bad:
            raise DataError(f"{name} labels {bad[:5]} are not +-1; configure a label remap")
    return train, test


def execute(cfg: RunConfig) -> SolverOutput:
    """Run one configured experiment and return the solver output with its trace."""
    every = cfg.record_every
    if cfg.experiment == "synthetic":
        problem = SyntheticProblem(0.5 if cfg.rho is None else cfg.rho, cfg.R_x, cfg.R_y)
        monitor = synthetic_monitor(problem)
        oracle = problem
        x0, y0 = np.array([cfg.x0]), np.array([cfg.y0])
    else:
        train, test = load_data(cfg)
        problem = DroProblem.from_dataset(
            train, R=cfg.R, lam=cfg.lam, rho=1e-4 if cfg.rho is None else cfg.rho,
            regularizer_sign=cfg.regularizer_sign,
        )
        total = sum(cfg.schedule().stage_lengths()) if cfg.algorithm == "restart" else cfg.T
        gap_every = cfg.gap_every or max(1, total // 10)
        monitor = dro_monitor(problem, train, test, gap_steps=cfg.gap_steps, gap_every=gap_every, T=total)
        oracle = problem if cfg.algorithm in SIMPLEX_ONLY else EuclideanDualView(problem)
        x0, y0 = np.zeros(problem.dim), np.full(problem.n, 1.0 / problem.n)
    X, Y = problem.X, problem.Y
    bettor_kw = dict(centering=cfg.centering, scaling=cfg.scaling, record_every=every, monitor=monitor)
    alg = cfg.algorithm
    if alg == "cb_min_max":
        return cb_min_max(oracle, X, Y, x0, y0, cfg.T, cfg.epsilon_prime, **bettor_kw)
    if alg == "cb_min_max_simplex":
        return cb_min_max_simplex(
            oracle, X, x0, y0, cfg.T, cfg.epsilon_prime,
            coin_sign=cfg.coin_sign, clip_coins=cfg.clip_coins, **bettor_kw,
        )
    if alg == "restart":
        return restart_cb_min_max(oracle, X, Y, x0, y0, cfg.schedule(), cfg.epsilon_prime, **bettor_kw)
    geometry = "entropic" if alg == "pdg_entropic" else "euclidean"
    eta_x, eta_y = default_step_sizes(problem, cfg.T, geometry)
    return primal_dual_gradient(
        oracle, X, Y, x0, y0, cfg.T,
        cfg.eta_x or eta_x, cfg.eta_y or eta_y, geometry,
        record_every=every, monitor=monitor,
    )


# -- CSV ------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_row(rec: RunRecord, timing: str) -> list[str]:
    elapsed = rec.elapsed_seconds if timing == "wall" else None
    return [
        _cell(rec.iteration), _cell(elapsed), _cell(rec.gap), _cell(rec.gap_exact),
        _cell(rec.dist_to_opt), _cell(rec.train_loss), _cell(rec.test_loss),
        _cell(rec.robust_objective),
    ]


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(trace: list[RunRecord], timing: str, run: Optional[str] = None) -> list[str]:
    lines = []
    for rec in trace:
        cells = csv_row(rec, timing)
        lines.append(",".join(([run] if run is not None else []) + cells))
    return lines


def output_path(requested: Optional[str], default_name: str) -> Path:
    path = Path(requested or default_name)
    override = os.environ.get(OUTPUT_DIR_ENV)
    return Path(override) / path.name if override else path


def _final(trace: list[RunRecord], attr: str):
    for rec in reversed(trace):
        v = getattr(rec, attr)
        if v is not None:
            return v
    return None


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def summary(cfg: RunConfig, out: SolverOutput, path: Path) -> str:
    trace = out.trace
    parts = [f"{cfg.algorithm} on {cfg.experiment}", f"iterations={out.n_queries}",
             f"final_gap={_fmt(_final(trace, 'gap'))}"]
    if cfg.experiment == "synthetic":
        parts.append(f"final_dist={_fmt(_final(trace, 'dist_to_opt'))}")
    else:
        parts.append(f"robust_objective={_fmt(_final(trace, 'robust_objective'))}")
        parts.append(f"train_loss={_fmt(_final(trace, 'train_loss'))}")
        parts.append(f"test_loss={_fmt(_final(trace, 'test_loss'))}")
    parts.append(f"csv={path}")
    return " ".join(parts)


# -- commands ---------------------------------------------------------------


def cmd_run(cfg: RunConfig) -> int:
    out = execute(cfg)
    path = output_path(cfg.output, f"{cfg.experiment}_{cfg.algorithm}.csv")
    lines = [",".join(CSV_COLUMNS)] + trace_csv(out.trace, cfg.timing)
    write_atomic(path, "\n".join(lines) + "\n")
    print(summary(cfg, out, path))
    return 0


def _compare_key(cfg: RunConfig) -> str:
    return "dist_to_opt" if cfg.experiment == "synthetic" else "robust_objective"


def verdict(cfg_a: RunConfig, out_a: SolverOutput, cfg_b: RunConfig, out_b: SolverOutput) -> str:
    key = _compare_key(cfg_a)
    label = "final dist" if key == "dist_to_opt" else "final robust objective"
    va, vb = _final(out_a.trace, key), _final(out_b.trace, key)
    if cfg_a.algorithm == cfg_b.algorithm or va is None or vb is None or va == vb:
        return "tie"
    winner = cfg_a.algorithm if va < vb else cfg_b.algorithm
    return f"{winner} lower {label}"


def check_comparable(a: RunConfig, b: RunConfig) -> None:
    for key in ("experiment", "T", "x0", "y0"):
        if getattr(a, key) != getattr(b, key):
            raise ConfigError(f"configs differ in {key}: {getattr(a, key)!r} vs {getattr(b, key)!r}")


def cmd_compare(cfg_a: RunConfig, cfg_b: RunConfig, requested: Optional[str]) -> int:
    check_comparable(cfg_a, cfg_b)
    # sequential: each solve is timed without competing for the CPU
    out_a = execute(cfg_a)
    out_b = execute(cfg_b)
    stem = f"compare_{cfg_a.experiment}_{cfg_a.algorithm}_vs_{cfg_b.algorithm}"
    merged = output_path(requested, f"{stem}.csv")
    header = ",".join(CSV_COLUMNS)
    for tag, cfg, out in (("a", cfg_a, out_a), ("b", cfg_b, out_b)):
        per_run = merged.with_name(f"{merged.stem}_{tag}.csv")
        write_atomic(per_run, "\n".join([header] + trace_csv(out.trace, cfg.timing)) + "\n")
    lines = ["run," + header]
    lines += trace_csv(out_a.trace, cfg_a.timing, "a") + trace_csv(out_b.trace, cfg_b.timing, "b")
    write_atomic(merged, "\n".join(lines) + "\n")
    print(f"a: {summary(cfg_a, out_a, merged.with_name(merged.stem + '_a.csv'))}")
    print(f"b: {summary(cfg_b, out_b, merged.with_name(merged.stem + '_b.csv'))}")
    print(f"verdict: {verdict(cfg_a, out_a, cfg_b, out_b)} (merged csv={merged})")
    return 0


def _add_config_flags(parser: argparse.ArgumentParser, skip=()) -> None:
    group = parser.add_argument_group("run configuration (each also valid as a config-file key)")
    for f in fields(RunConfig):
        if f.name in skip:
            continue
        names = [f"--{f.name}"]
        if "_" in f.name:
            names.append(f"--{f.name.replace('_', '-')}")
        group.add_argument(*names, dest=f.name, default=argparse.SUPPRESS, metavar="VALUE",
                           help=f"{f.metadata['help']} (default {f.default!r})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfminmax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one solver and write its convergence CSV")
    run.add_argument("--config", help="flat key = value file; flags override it")
    _add_config_flags(run)
    cmp_ = sub.add_parser("compare", help="run two solvers on the same problem and compare")
    cmp_.add_argument("--config-a", dest="config_a", help="config of run a")
    cmp_.add_argument("--config-b", dest="config_b", help="config of run b (default: a with algorithm = baseline)")
    cmp_.add_argument("--algorithm-a", dest="algorithm_a")
    cmp_.add_argument("--algorithm-b", dest="algorithm_b")
    _add_config_flags(cmp_, skip=("algorithm",))
    return parser


def _overrides(ns: argparse.Namespace) -> dict[str, str]:
    return {k: v for k, v in vars(ns).items() if k in KEYS}


def _dispatch(ns: argparse.Namespace) -> int:
    shared = _overrides(ns)
    if ns.command == "run":
        return cmd_run(load_config(ns.config, shared))
    output = shared.pop("output", None)
    a_over = dict(shared)
    if ns.algorithm_a:
        a_over["algorithm"] = ns.algorithm_a
    cfg_a = load_config(ns.config_a, a_over)
    if ns.config_b:
        b_over = dict(shared)
        if ns.algorithm_b:
            b_over["algorithm"] = ns.algorithm_b
        cfg_b = load_config(ns.config_b, b_over)
    else:
        cfg_b = build_config({"algorithm": ns.algorithm_b or cfg_a.baseline}, base=cfg_a)
    return cmd_compare(cfg_a, cfg_b, output or cfg_a.output)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return _dispatch(ns)
    except ConfigError as err:
        print(f"error: invalid configuration: {err}", file=sys.stderr)
        return 2
    except (DataError, OSError) as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"error: numerical failure at iteration {err.iteration}: {err}", file=sys.stderr)
        return 4
    except ValueError as err:
        print(f"error: invalid configuration: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
