"""``ffia-bench``: error, level, timing and truncation-number experiments.

Each mode writes one CSV file.  Lines starting with ``#`` carry the build id,
the seed and the full configuration; the first non-comment line is the
header.  Exit status is 0 on success, 2 for an invalid configuration and 3
when ``--assert`` checks fail.

Random numbers come from numpy's Philox counter-based generator, keyed by
``(seed, N)`` so that every problem size gets an independent, reproducible
stream regardless of which other sizes are in the run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import statistics
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import direct_forward_oracle, forward_apply, plan_forward, uniform_grid
from .exceptions import FfiaError
from .special import EMPIRICAL_LEVEL_OFFSET, choose_parameters, max_level
from .transforms import dft_inverse

log = logging.getLogger("ffia.bench")

MODES = ("error-sweep", "level-sweep", "timing", "truncation-trace", "threshold")

HEADERS = {
    "error-sweep": ("N", "eps", "l_max", "q", "p", "eps_a"),
    "level-sweep": ("N", "eps", "l_max", "cpu_seconds", "eps_a"),
    "timing": ("N", "method", "cpu_seconds"),
    "truncation-trace": ("N", "mode", "q", "p"),
    "threshold": ("N", "eps_th", "extrapolated"),
}

#: Largest size for which the O(N^2) direct method is run.
DIRECT_MAX_N = 1 << 13

#: Accuracy floor used in machine-precision mode; see ``Q_PLAN_MAX``.
MACHINE_EPS_FLOOR = 1e-12

DEFAULT_EPS = tuple(10.0**-k for k in range(12, 2, -1))
DEFAULT_PERTURBATION = 0.10


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    n_list: list
    eps_list: list = field(default_factory=lambda: list(DEFAULT_EPS))
    lmax: object = "auto"  # "auto" or list of ints
    seed: int = 42
    dist: str = "uniform"
    perturbation: float = DEFAULT_PERTURBATION
    out: str = "-"
    no_timing: bool = False
    threads: int | None = None
    repeats: int = 5
    level_offset: int = EMPIRICAL_LEVEL_OFFSET
    policy: str = "optimal"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if not self.n_list:
            raise ConfigError("at least one N is required")
        for n in self.n_list:
            if n < 8 or n > 1 << 20 or n & (n - 1):
                raise ConfigError(f"N={n} must be a power of two in [2^3, 2^20]")
        for e in self.eps_list:
            if not 0 < e < 1:
                raise ConfigError(f"eps={e} must lie in (0, 1)")
        if self.lmax != "auto" and any(l < 2 for l in self.lmax):
            raise ConfigError("l_max values must be >= 2")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.dist not in ("uniform", "perturbed"):
            raise ConfigError(f"unknown target distribution {self.dist!r}")
        if not 0 <= self.perturbation < 0.5:
            raise ConfigError("perturbation fraction must lie in [0, 0.5)")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.mode == "timing" and len(self.eps_list) != 1:
            raise ConfigError("timing mode takes exactly one --eps (the fixed-eps run)")


@dataclass
class MachinePrecisionProfile:
    """Measured round-off floor ``eps_th(N)`` of the fast method."""

    eps_th: dict
    extrapolated: set = field(default_factory=set)

    def __call__(self, N):
        return self.eps_th[N]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def rng_for(seed: int, N: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, N])))


def make_targets(N: int, seed: int, dist: str = "uniform",
                 perturbation: float = DEFAULT_PERTURBATION) -> np.ndarray:
    """Uniform-random points, or the grid jittered by ``perturbation`` of a spacing."""
    rng = rng_for(seed, N)
    if dist == "uniform":
        return rng.uniform(0.0, 2 * math.pi, N)
    u = rng.uniform(-1.0, 1.0, N)
    y = np.mod(uniform_grid(N) + u * perturbation * 2 * math.pi / N, 2 * math.pi)
    y[y >= 2 * math.pi] = 0.0
    return y


def random_samples(N: int, seed: int) -> np.ndarray:
    return rng_for(seed ^ 0x5EED, N).uniform(0.0, 1.0, N)


def time_call(fn, repeats: int = 5):
    """Median, min and max wall time of ``repeats`` calls."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), min(times), max(times)


def build_id() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--tags", "--dirty"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"ffia {__version__} ({out.stdout.strip()})"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"ffia {__version__}"


def levels_for(config: ExperimentConfig, N: int) -> list:
    top = max_level(N, N)
    if config.lmax == "auto":
        return list(range(min(3, top), top + 1))
    return sorted({min(l, top) for l in config.lmax})


def machine_eps(N: int, profile: MachinePrecisionProfile | None = None) -> float:
    """Accuracy requested in machine-precision mode."""
    if profile is None or N not in profile.eps_th:
        return MACHINE_EPS_FLOOR
    return max(profile(N), MACHINE_EPS_FLOOR)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}"
    if isinstance(v, bool):
        return str(int(v))
    return str(v)


def render_csv(mode: str, rows: list, config: ExperimentConfig, notes=()) -> str:
    buf = io.StringIO()
    buf.write(f"# build: {build_id()}\n")
    buf.write(f"# seed: {config.seed}\n")
    buf.write(f"# config: {json.dumps(asdict(config), sort_keys=True, default=str)}\n")
    for note in notes:
        buf.write(f"# {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = HEADERS[mode]
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[h]) for h in header])
    return buf.getvalue()


def write_output(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_error_sweep(config: ExperimentConfig) -> list:
    """``eps_a = max_j |g_j - 1|`` for ``f = 1`` over ``N x eps x l_max``."""
    rows = []
    for N in config.n_list:
        y = make_targets(N, config.seed, config.dist, config.perturbation)
        ones = np.ones(N)
        for eps in config.eps_list:
            for L in levels_for(config, N):
                plan = plan_forward(y, N, eps, l_max=L)
                eps_a = float(np.max(np.abs(forward_apply(plan, ones) - 1.0)))
                rows.append(dict(N=N, eps=eps, l_max=L, q=plan.q, p=plan.p, eps_a=eps_a))
    return rows


def run_level_sweep(config: ExperimentConfig) -> list:
    """CPU time of the evaluation step against ``l_max``."""
    rows = []
    for N in config.n_list:
        y = make_targets(N, config.seed, config.dist, config.perturbation)
        ones = np.ones(N)
        for eps in config.eps_list:
            for L in levels_for(config, N):
                plan = plan_forward(y, N, eps, l_max=L)
                g = forward_apply(plan, ones)
                cpu = 0.0 if config.no_timing else time_call(
                    lambda: forward_apply(plan, ones), config.repeats)[0]
                rows.append(dict(N=N, eps=eps, l_max=L, cpu_seconds=cpu,
                                 eps_a=float(np.max(np.abs(g - 1.0)))))
    return rows


def level_argmin(rows: list) -> dict:
    best = {}
    for r in rows:
        key = (r["N"], r["eps"])
        if key not in best or r["cpu_seconds"] < best[key]["cpu_seconds"]:
            best[key] = r
    return {k: v["l_max"] for k, v in best.items()}


def estimate_machine_threshold(n_list, seed: int = 42, f_kind: str = "random",
                               dist: str = "uniform", eps: float = MACHINE_EPS_FLOOR,
                               perturbation: float = DEFAULT_PERTURBATION) -> MachinePrecisionProfile:
    """Round-off floor of the fast method, measured against the direct method.

    Sizes above ``DIRECT_MAX_N`` are filled in from a power-law fit
    ``a N^b`` to the measured sizes and flagged as extrapolated.
    """
    measured = {}
    for N in sorted(n_list):
        if N > DIRECT_MAX_N:
            continue
        y = make_targets(N, seed, dist, perturbation)
        f = random_samples(N, seed) if f_kind == "random" else np.ones(N)
        plan = plan_forward(y, N, eps)
        err = np.max(np.abs(forward_apply(plan, f) - direct_forward_oracle(f, uniform_grid(N), y)))
        measured[N] = max(float(err), 1e-16)
    profile = MachinePrecisionProfile(dict(measured))
    missing = [N for N in n_list if N not in measured]
    if missing:
        if not measured:
            raise ConfigError(f"threshold estimation needs at least one N <= {DIRECT_MAX_N}")
        ns = np.array(sorted(measured), dtype=float)
        es = np.array([measured[int(n)] for n in ns])
        if len(ns) > 1:
            b, log_a = np.polyfit(np.log(ns), np.log(es), 1)
        else:
            b, log_a = 0.0, math.log(es[0])
        for N in missing:
            profile.eps_th[N] = max(float(math.exp(log_a + b * math.log(N))), 1e-16)
            profile.extrapolated.add(N)
    return profile


def run_threshold(config: ExperimentConfig) -> list:
    prof = estimate_machine_threshold(config.n_list, config.seed, dist=config.dist,
                                      perturbation=config.perturbation)
    return [dict(N=N, eps_th=prof(N), extrapolated=N in prof.extrapolated)
            for N in config.n_list]


def run_timing(config: ExperimentConfig, profile: MachinePrecisionProfile | None = None) -> list:
    """Direct method, FFIA at fixed and at machine precision, setup and FFT."""
    eps = config.eps_list[0]
    if profile is None:
        profile = estimate_machine_threshold(
            [N for N in config.n_list if N <= DIRECT_MAX_N] or [min(DIRECT_MAX_N, 1 << 10)],
            config.seed, dist=config.dist, perturbation=config.perturbation)
    rows = []

    def record(N, method, fn):
        cpu = 0.0 if config.no_timing else time_call(fn, config.repeats)[0]
        rows.append(dict(N=N, method=method, cpu_seconds=cpu))

    policy = config.policy
    for N in config.n_list:
        y = make_targets(N, config.seed, config.dist, config.perturbation)
        f = random_samples(N, config.seed)
        x = uniform_grid(N)
        lmax = None if config.lmax == "auto" else levels_for(config, N)[0]
        if N <= DIRECT_MAX_N:
            record(N, "direct", lambda: direct_forward_oracle(f, x, y))
        plan = plan_forward(y, N, eps, l_max=lmax, policy=policy)
        record(N, "ffia-fixed-eps", lambda: forward_apply(plan, f))
        m_plan = plan_forward(y, N, machine_eps(N, profile), l_max=lmax, policy=policy)
        record(N, "ffia-machine-eps", lambda: forward_apply(m_plan, f))
        record(N, "datastructure-setup", lambda: plan_forward(y, N, eps, l_max=lmax, policy=policy))
        record(N, "fft-only", lambda: dft_inverse(f))
    return rows


def run_truncation_trace(config: ExperimentConfig,
                         profile: MachinePrecisionProfile | None = None) -> list:
    """``(q, p)`` against ``N`` for a fixed eps and at the round-off floor."""
    eps = config.eps_list[0]
    rows = []
    for N in config.n_list:
        fixed = choose_parameters(eps, N, N, policy="empirical")
        rows.append(dict(N=N, mode="fixed-eps", q=fixed.q, p=fixed.p))
    if profile is None:
        profile = estimate_machine_threshold(config.n_list, config.seed, dist=config.dist,
                                             perturbation=config.perturbation)
    for N in config.n_list:
        th = choose_parameters(machine_eps(N, profile), N, N, policy="empirical")
        rows.append(dict(N=N, mode="threshold", q=th.q, p=th.p))
    return rows


def log_log_slope(ns, ts) -> float:
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(ts, float)), 1)[0])


# ---------------------------------------------------------------------------
# inline checks
# ---------------------------------------------------------------------------


def check_rows(mode: str, rows: list, config: ExperimentConfig,
               profile: MachinePrecisionProfile | None = None) -> list:
    """Return a list of failure messages (empty when every check passes)."""
    fails = []
    if mode == "error-sweep":
        profile = profile or estimate_machine_threshold(config.n_list, config.seed,
                                                        dist=config.dist,
                                                        perturbation=config.perturbation)
        for r in rows:
            if not (np.isfinite(r["eps_a"]) and r["eps_a"] >= 0):
                fails.append(f"non-finite eps_a in {r}")
            if r["eps"] >= profile(r["N"]) and r["eps_a"] > r["eps"]:
                fails.append(f"eps_a={r['eps_a']:.3g} > eps={r['eps']:g} at N={r['N']}, "
                             f"l_max={r['l_max']}")
    elif mode == "level-sweep":
        for N in config.n_list:
            if len({r["l_max"] for r in rows if r["N"] == N}) < 4 and max_level(N, N) >= 6:
                fails.append(f"fewer than 4 levels swept for N={N}")
        if not config.no_timing:
            for (N, eps), L in level_argmin(rows).items():
                target = round(math.log2(N)) - config.level_offset
                if abs(L - target) > 1:
                    fails.append(f"argmin l_max={L} for N={N}, eps={eps:g}; expected "
                                 f"{target} +- 1")
    elif mode == "timing" and not config.no_timing:
        t = {(r["N"], r["method"]): r["cpu_seconds"] for r in rows}
        for N in config.n_list:
            if N >= 1 << 10 and (N, "direct") in t:
                if t[N, "ffia-fixed-eps"] >= t[N, "direct"]:
                    fails.append(f"FFIA not faster than direct at N={N}")
            if N >= 1 << 10 and t[N, "datastructure-setup"] >= t[N, "ffia-fixed-eps"]:
                fails.append(f"setup slower than evaluation at N={N}")
        ns = [N for N in config.n_list if (1 << 12) <= N <= (1 << 16)]
        if len(ns) >= 2:
            slope = log_log_slope(ns, [t[N, "ffia-machine-eps"] for N in ns])
            if slope > 1.2:
                fails.append(f"machine-precision log-log slope {slope:.3f} > 1.2")
    elif mode == "truncation-trace":
        fixed = {r["N"]: r for r in rows if r["mode"] == "fixed-eps"}
        ns = sorted(fixed)
        if len({fixed[N]["q"] for N in ns}) > 1:
            fails.append("q varies with N at fixed eps")
        for a, b in zip(ns, ns[1:]):
            if b == 2 * a and fixed[b]["p"] - fixed[a]["p"] not in (0, 1):
                fails.append(f"p jumps by {fixed[b]['p'] - fixed[a]['p']} from N={a} to N={b}")
        for r in rows:
            if r["mode"] == "threshold":
                cap = choose_parameters(MACHINE_EPS_FLOOR, r["N"], r["N"], policy="empirical")
                if r["q"] > cap.q or r["p"] > cap.p:
                    fails.append(f"threshold (q, p) above the eps=1e-12 values at N={r['N']}")
    elif mode == "threshold":
        for r in rows:
            if r["eps_th"] < 1e-16:
                fails.append(f"eps_th below double precision at N={r['N']}")
    return fails


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.startswith("2^"):
            out.append(1 << int(part[2:]))
        else:
            out.append(int(part))
    return out


def _float_list(text):
    return [float(p) for p in text.split(",")]


def _dist(text):
    if text == "uniform":
        return "uniform", DEFAULT_PERTURBATION
    if text.startswith("perturbed"):
        _, _, frac = text.partition(":")
        return "perturbed", float(frac) if frac else DEFAULT_PERTURBATION
    raise argparse.ArgumentTypeError(f"unknown distribution {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ffia-bench", description=__doc__.splitlines()[0])
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--n", required=True, type=_int_list,
                   help="comma-separated sizes, e.g. 1024,2^12")
    p.add_argument("--eps", type=_float_list, default=None,
                   help="comma-separated prescribed errors (default 1e-12..1e-3)")
    p.add_argument("--lmax", default="auto", help="comma-separated levels or 'auto'")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dist", type=_dist, default=("uniform", DEFAULT_PERTURBATION),
                   help="uniform | perturbed:<fraction>")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--no-timing", action="store_true", help="write 0 for every timing")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--level-offset", type=int, default=EMPIRICAL_LEVEL_OFFSET,
                   help="l_* in the level-sweep check l_opt = log2 N - l_*")
    p.add_argument("--policy", choices=("optimal", "empirical"), default="optimal")
    p.add_argument("--assert", dest="check", action="store_true",
                   help="run the acceptance checks for this mode")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> ExperimentConfig:
    lmax = "auto" if args.lmax == "auto" else _int_list(args.lmax)
    eps = args.eps
    if eps is None:
        eps = [1e-6] if args.mode in ("timing", "truncation-trace") else list(DEFAULT_EPS)
    dist, frac = args.dist
    threads = args.threads if args.threads is not None else (1 if args.mode == "timing" else None)
    return ExperimentConfig(mode=args.mode, n_list=args.n, eps_list=eps, lmax=lmax,
                            seed=args.seed, dist=dist, perturbation=frac, out=args.out,
                            no_timing=args.no_timing, threads=threads, repeats=args.repeats,
                            level_offset=args.level_offset, policy=args.policy)


RUNNERS = {
    "error-sweep": run_error_sweep,
    "level-sweep": run_level_sweep,
    "timing": run_timing,
    "truncation-trace": run_truncation_trace,
    "threshold": run_threshold,
}


def run(config: ExperimentConfig, check: bool = False) -> tuple[str, list]:
    """Run one experiment; returns the CSV text and the list of check failures."""
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=config.threads):
        rows = RUNNERS[config.mode](config)
        fails = check_rows(config.mode, rows, config) if check else []
    notes = []
    if config.mode == "level-sweep":
        notes = [f"argmin N={N} eps={eps:g} l_max={L}"
                 for (N, eps), L in sorted(level_argmin(rows).items())]
    return render_csv(config.mode, rows, config, notes), fails


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"ffia-bench: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        text, fails = run(config, check=args.check)
        write_output(text, config.out)
    except (ConfigError, FfiaError) as exc:
        print(f"ffia-bench: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ffia-bench: {exc}", file=sys.stderr)
        return 1
    for msg in fails:
        print(f"ffia-bench: check failed: {msg}", file=sys.stderr)
    if args.check:
        log.info("%d check(s) failed", len(fails))
    return 3 if fails else 0


if __name__ == "__main__":
    sys.exit(main())
