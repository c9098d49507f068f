"""Experiment configuration: a flat TOML file of key-value pairs and arrays.

One file fully determines an experiment.  ``validate_config`` either returns
the parsed configuration or raises ``ValidationError`` carrying every
violation found (not just the first), so a config can be fixed in one pass.
``to_toml`` renders the canonical form: parsing that text again yields an
identical configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import qcs, solvers

__all__ = [
    "ParseError",
    "ValidationError",
    "ExperimentConfig",
    "validate_config",
    "parse_config_text",
    "to_toml",
]

EXPERIMENTS = ("fig1", "fig2", "fig3", "table1")

# canonical solver line-ups per experiment
_LIFTED_ALGOS = (solvers.BLOCK_SKM,)
_FIG3_ALGOS = (solvers.RKA, solvers.SKM, solvers.BLOCK_SKM)

_KEYS = (
    "experiment", "n", "k", "m", "m1", "kind", "trials", "seed", "out_dir",
    "log_stride", "algorithms", "lambda", "gamma", "k_prime", "max_iters",
    "tol_margin", "tol_nmse",
)


class ParseError(Exception):
    """Config file missing or not valid TOML."""


class ValidationError(Exception):
    """One or more schema violations; ``problems`` lists them all."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int
    k: int
    m: int
    m1_list: tuple[int, ...]
    kind: str
    trials: int
    seed: int
    out_dir: str
    log_stride: int
    algorithms: tuple[str, ...]
    lam: float
    gamma: int
    k_prime: int | None
    max_iters: int
    tol_margin: float | None
    tol_nmse: float | None

    def solver_config(self, algorithm: str, seed) -> solvers.SolverConfig:
        """Instantiate the shared solver parameters for one run."""
        return solvers.SolverConfig(
            algorithm=algorithm,
            lam=self.lam,
            gamma=self.gamma,
            k_prime=self.k_prime,
            max_iters=self.max_iters,
            tol_margin=self.tol_margin,
            tol_nmse=self.tol_nmse,
            seed=seed,
            log_stride=self.log_stride,
        )


def validate_config(path: str) -> ExperimentConfig:
    """Parse and validate a config file; all violations are reported at once."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"config {path!r} is not valid TOML: {exc}") from exc
    return _validate(raw)


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"config text is not valid TOML: {exc}") from exc
    return _validate(raw)


def _validate(raw: dict) -> ExperimentConfig:
    problems = []

    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")

    def want_int(key, default=None, minimum=None, required=False):
        if key not in raw:
            if required:
                problems.append(f"{key}: required key is missing")
            return default
        v = raw[key]
        if not isinstance(v, int) or isinstance(v, bool):
            problems.append(f"{key}: expected an integer, got {v!r}")
            return default
        if minimum is not None and v < minimum:
            problems.append(f"{key}: must be >= {minimum}, got {v}")
            return default
        return v

    def want_float(key, default=None):
        if key not in raw:
            return default
        v = raw[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            problems.append(f"{key}: expected a number, got {v!r}")
            return default
        return float(v)

    def want_str(key, default=None, required=False, choices=None):
        if key not in raw:
            if required:
                problems.append(f"{key}: required key is missing")
            return default
        v = raw[key]
        if not isinstance(v, str):
            problems.append(f"{key}: expected a string, got {v!r}")
            return default
        if choices is not None and v not in choices:
            problems.append(f"{key}: must be one of {choices}, got {v!r}")
            return default
        return v

    experiment = want_str("experiment", required=True, choices=EXPERIMENTS)

    n = want_int("n", minimum=1, required=True)
    m = want_int("m", minimum=1, required=True)
    trials = want_int("trials", default=1, minimum=1)
    seed = want_int("seed", default=0, minimum=0)
    log_stride = want_int("log_stride", default=1, minimum=1)
    max_iters = want_int("max_iters", default=1000, minimum=1)
    gamma = want_int("gamma", default=50, minimum=1)
    k_prime = want_int("k_prime", default=None, minimum=1)
    out_dir = want_str("out_dir", default="results")

    # fig3 solves for the signal directly; sparsity is not used there
    k = want_int("k", default=None, minimum=1,
                 required=experiment in ("fig1", "fig2", "table1"))
    if k is None:
        k = n if n is not None else 1
    elif n is not None and k > n:
        problems.append(f"k: must be <= n={n}, got {k}")

    if "m1" not in raw:
        problems.append("m1: required key is missing (list of sequence counts)")
        m1_list = ()
    else:
        v = raw["m1"]
        if isinstance(v, int) and not isinstance(v, bool):
            v = [v]
        if (not isinstance(v, list) or len(v) == 0
                or any(isinstance(e, bool) or not isinstance(e, int) for e in v)):
            problems.append(f"m1: expected a non-empty list of integers, got {raw['m1']!r}")
            m1_list = ()
        elif any(e < 1 for e in v):
            problems.append("m1: every entry must be >= 1")
            m1_list = ()
        else:
            m1_list = tuple(v)
    if experiment == "fig3" and len(m1_list) > 1:
        problems.append("m1: fig3 uses a single sequence count")

    default_kind = {"fig1": qcs.RANK_ONE, "fig2": qcs.FULL_RANK}.get(experiment, qcs.RANK_ONE)
    kind = want_str("kind", default=default_kind, choices=qcs.KINDS)
    if experiment == "fig1" and kind != qcs.RANK_ONE:
        problems.append("kind: fig1 requires rank_one sensing matrices")
    if experiment == "fig2" and kind != qcs.FULL_RANK:
        problems.append("kind: fig2 requires full_rank sensing matrices")

    lam = want_float("lambda", default=1.0)
    if lam is not None and not 0.0 < lam < 2.0:
        problems.append(f"lambda: relaxation must lie in (0, 2), got {lam}")
        lam = 1.0

    tol_margin = want_float("tol_margin")
    tol_nmse = want_float("tol_nmse")
    if experiment == "table1" and tol_nmse is None:
        tol_nmse = 5e-5
    for name, v in (("tol_margin", tol_margin), ("tol_nmse", tol_nmse)):
        if v is not None and v < 0:
            problems.append(f"{name}: must be nonnegative, got {v}")
    if experiment in ("fig1", "fig2", "fig3"):
        # trial curves are averaged on a shared iteration grid, so these runs
        # use a fixed budget instead of early stopping
        if tol_margin is not None:
            problems.append(f"tol_margin: not supported for {experiment} (fixed budget)")
        if tol_nmse is not None:
            problems.append(f"tol_nmse: not supported for {experiment} (fixed budget)")

    expected_algos = _FIG3_ALGOS if experiment == "fig3" else _LIFTED_ALGOS
    if "algorithms" not in raw:
        algorithms = expected_algos
    else:
        v = raw["algorithms"]
        if not isinstance(v, list) or any(not isinstance(e, str) for e in v):
            problems.append(f"algorithms: expected a list of names, got {v!r}")
            algorithms = expected_algos
        else:
            bad = [e for e in v if e not in solvers.ALGORITHMS]
            if bad:
                problems.append(f"algorithms: unknown solver names {bad}")
                algorithms = expected_algos
            elif experiment is not None and set(v) != set(expected_algos):
                problems.append(
                    f"algorithms: {experiment} runs exactly {list(expected_algos)}"
                )
                algorithms = expected_algos
            else:
                algorithms = expected_algos  # canonical order

    if k_prime is not None and n is not None:
        unknowns = n if experiment == "fig3" else n * n
        if k_prime >= unknowns:
            problems.append(f"k_prime: must be < number of unknowns ({unknowns})")

    if problems:
        raise ValidationError(problems)

    return ExperimentConfig(
        experiment=experiment, n=n, k=k, m=m, m1_list=m1_list, kind=kind,
        trials=trials, seed=seed, out_dir=out_dir, log_stride=log_stride,
        algorithms=algorithms, lam=lam, gamma=gamma, k_prime=k_prime,
        max_iters=max_iters, tol_margin=tol_margin, tol_nmse=tol_nmse,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        out = repr(value)
        return out if ("." in out or "e" in out or "E" in out) else out + ".0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def to_toml(cfg: ExperimentConfig) -> str:
    """Render the canonical config text (stable key order, optionals omitted)."""
    lines = [
        f"experiment = {_fmt(cfg.experiment)}",
        f"n = {cfg.n}",
        f"k = {cfg.k}",
        f"m = {cfg.m}",
        f"m1 = {_fmt(list(cfg.m1_list))}",
        f"kind = {_fmt(cfg.kind)}",
        f"trials = {cfg.trials}",
        f"seed = {cfg.seed}",
        f"out_dir = {_fmt(cfg.out_dir)}",
        f"log_stride = {cfg.log_stride}",
        f"algorithms = {_fmt(list(cfg.algorithms))}",
        f"lambda = {_fmt(cfg.lam)}",
        f"gamma = {cfg.gamma}",
        f"max_iters = {cfg.max_iters}",
    ]
    if cfg.k_prime is not None:
        lines.append(f"k_prime = {cfg.k_prime}")
    if cfg.tol_margin is not None:
        lines.append(f"tol_margin = {_fmt(cfg.tol_margin)}")
    if cfg.tol_nmse is not None:
        lines.append(f"tol_nmse = {_fmt(cfg.tol_nmse)}")
    return "\n".join(lines) + "\n"
