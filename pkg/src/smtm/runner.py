"""Preset execution: chain grids, limit-functional curves, scaling sweeps.

Every run writes CSVs, SVG figures, and a manifest JSON that records the
resolved config, the seeds, the package version, and a sha256 per output
file.  (config, seeds) -> bytes is a pure function: all randomness flows
through per-chain SeedSequence streams and all files use fixed number
formatting.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .diagnostics import ChainTrace, acceptance_rate, burnin_curve, esjd
from .errors import ConfigError, IOFailure
from .geometry import StereoChart
from .kernels import KernelConfig, step
from .rng import chain_rng
from .scaling import OptimizeResult, ScalingParams, acceptance_curve, optimize_ell
from .svgplot import Series, render_line_svg
from .targets import parse_target

# Chains whose reference distance first drops to this radius count as
# "arrived"; used for crossing-time summaries.
_HIT_RADIUS = 5.0


def _fmt(v: float) -> str:
    # repr is the shortest exact round-trip form: deterministic and readable.
    return repr(float(v))


def _pool_workers() -> int:
    env = os.environ.get("SMTM_THREADS", "").strip()
    cap = None
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"SMTM_THREADS must be an integer, got {env!r}") from None
    cpus = os.cpu_count() or 1
    return min(cpus, cap) if cap is not None else cpus


def _pmap(fn, jobs):
    """Map over jobs with a process pool when more than one worker is useful."""
    workers = _pool_workers()
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def kernel_from_dict(kdict: dict, d: int, radius: float | None) -> KernelConfig:
    """Build a KernelConfig from a config-file kernel entry."""
    kd = dict(kdict)
    kd.pop("label", None)
    kind = kd.pop("kernel", None)
    if kind is None:
        raise ConfigError(f"kernel entry {kdict!r} is missing 'kernel'")
    chart = None
    if kind in ("srwm", "smtm", "ideal"):
        if radius is None:
            raise ConfigError(f"kernel {kind!r} needs the config to set 'radius'")
        chart = StereoChart(d=d, radius=float(radius))
    try:
        return KernelConfig(kernel=kind, chart=chart, **kd)
    except TypeError as exc:
        raise ConfigError(f"bad kernel entry {kdict!r}: {exc}") from exc


def _initial_state(cfg: ExperimentConfig, target, d: int, rng) -> np.ndarray:
    if cfg.x0 == "stationary":
        if not hasattr(target, "sample"):
            raise ConfigError(f"target {cfg.target!r} cannot draw stationary starts")
        return np.asarray(target.sample(rng), dtype=float)
    if isinstance(cfg.x0, (int, float)):
        return np.full(d, float(cfg.x0))
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.shape != (d,):
        raise ConfigError(f"x0 length {x0.shape} does not match target dimension {d}")
    return x0


def _chain_job(args: tuple) -> dict:
    """Run one chain; top-level so the process pool can pickle it."""
    (cfg_dict, kdict, seed, chain_id) = args
    cfg = ExperimentConfig(**cfg_dict)
    target = parse_target(cfg.target)
    d = target.d
    kernel = kernel_from_dict(kdict, d, cfg.radius)
    rng = chain_rng(seed, chain_id)
    x = _initial_state(cfg, target, d, rng)
    trace = ChainTrace(d, retention=cfg.retention, burn_in=cfg.burn_in, thinning=cfg.thinning)
    for _ in range(cfg.iterations):
        res = step(target, x, kernel, rng)
        trace.append(res)
        x = res.next
    reference = target.mean() if cfg.reference == "mean" else np.zeros(d)
    iters, logdist = burnin_curve(trace, reference)
    hits = np.nonzero(10.0**logdist <= _HIT_RADIUS)[0]
    first_hit = int(iters[hits[0]]) if hits.size else -1
    return {
        "label": kdict["label"],
        "seed": seed,
        "retained": trace.retained(),
        "iters": iters,
        "logdist": logdist,
        "esjd": esjd(trace),
        "acceptance": acceptance_rate(trace),
        "first_hit": first_hit,
        "final_dist": float(10.0 ** logdist[-1]),
    }


class _ArtifactWriter:
    """Collects written files and their digests for the manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.digests: dict[str, str] = {}
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create output dir {out_dir}: {exc}") from exc

    def write_text(self, rel: str, text: str) -> Path:
        path = self.out_dir / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IOFailure(f"cannot write {path}: {exc}") from exc
        self.digests[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def write_csv(self, rel: str, header: list[str], rows) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        return self.write_text(rel, "\n".join(lines) + "\n")

    def write_svg(self, rel: str, series, title: str, xlabel: str, ylabel: str) -> Path:
        path = self.out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        render_line_svg(series, title, xlabel, ylabel, path)
        self.digests[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path


def _chain_csv_rows(retained: dict):
    full = "states" in retained
    for i in range(retained["iter"].size):
        row = [
            int(retained["iter"][i]),
            int(retained["accepted"][i]),
            float(retained["alpha"][i]),
            int(retained["chosen"][i]),
            float(retained["x1"][i]),
            float(retained["norm"][i]),
        ]
        if full:
            row.extend(float(v) for v in retained["states"][i][1:])
        yield row


def _run_chains(cfg: ExperimentConfig, writer: _ArtifactWriter) -> dict:
    target = parse_target(cfg.target)
    d = target.d
    seeds = list(range(cfg.seed0, cfg.seed0 + cfg.n_seeds))
    jobs = []
    chain_id = 0
    for kdict in cfg.kernels:
        kernel_from_dict(kdict, d, cfg.radius)  # validate before spawning work
        for seed in seeds:
            jobs.append((cfg.to_dict(), dict(kdict), seed, chain_id))
            chain_id += 1
    results = _pmap(_chain_job, jobs)

    header = ["iter", "accepted", "alpha", "chosen", "x1", "norm"]
    if cfg.retention == "full":
        header += [f"x{i}" for i in range(2, d + 1)]
    for res in results:
        writer.write_csv(
            f"chains/{res['label']}_seed{res['seed']}.csv",
            header,
            _chain_csv_rows(res["retained"]),
        )
    writer.write_csv(
        "summary.csv",
        ["kernel", "seed", "esjd", "acceptance", "first_hit", "final_dist"],
        [
            [r["label"], r["seed"], r["esjd"], r["acceptance"], r["first_hit"], r["final_dist"]]
            for r in results
        ],
    )
    series = []
    for kdict in cfg.kernels:
        label = kdict["label"]
        sub = [r for r in results if r["label"] == label]
        curves = np.stack([r["logdist"] for r in sub])
        series.append(Series(label, sub[0]["iters"], np.median(curves, axis=0)))
    writer.write_svg(
        f"{_slug(cfg.name)}.svg",
        series,
        title=f"{cfg.name}: median log10 distance to reference",
        xlabel="iteration",
        ylabel="log10 distance",
    )
    return {"chains": len(results)}


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in name)


def _grid(cfg: ExperimentConfig) -> np.ndarray:
    lo, hi, num = cfg.ell_grid
    return np.linspace(float(lo), float(hi), int(num))


def _curve_arms(cfg: ExperimentConfig, lam: float | None):
    """The four comparison arms of the robustness figures."""
    return [
        ("smtm", dict(lam=lam, n_candidates=cfg.n_candidates, weight=cfg.weight)),
        ("mtm", dict(lam=None, n_candidates=cfg.n_candidates, weight=cfg.weight)),
        ("srwm", dict(lam=lam, n_candidates=1, weight="gb")),
        ("rwm", dict(lam=None, n_candidates=1, weight="gb")),
    ]


def _fisher_of_center(m: float) -> float:
    # f = N(m, 1 - m^2) keeps E[X^2] = 1; its Fisher moment is 1/(1 - m^2).
    if not -1.0 < m < 1.0:
        raise ConfigError(f"center must lie in (-1, 1), got {m!r}")
    return 1.0 / (1.0 - m * m)


def _run_curves(cfg: ExperimentConfig, writer: _ArtifactWriter) -> dict:
    if cfg.n_values:
        return _run_large_n(cfg, writer)
    sweep_centers = bool(cfg.centers)
    values = cfg.centers if sweep_centers else cfg.lams
    axis = "center" if sweep_centers else "lam"
    grid = _grid(cfg)
    rows, summary_rows = [], []
    dominance: dict[str, dict] = {}
    rng_idx = 0
    opt_cache: dict[tuple, OptimizeResult] = {}
    for value in values:
        m = float(value) if sweep_centers else cfg.center
        lam = cfg.lam if sweep_centers else float(value)
        fisher = _fisher_of_center(m)
        per_arm: dict[str, OptimizeResult] = {}
        for arm, kw in _curve_arms(cfg, lam):
            key = (arm, kw["lam"], kw["n_candidates"], kw["weight"], fisher)
            if key not in opt_cache:
                opt_cache[key] = optimize_ell(
                    grid, cfg.samples, chain_rng(cfg.seed0, rng_idx), fisher_i=fisher, **kw
                )
            rng_idx += 1
            per_arm[arm] = opt_cache[key]
            opt = per_arm[arm]
            for i, ell in enumerate(opt.grid):
                rows.append([
                    value, arm, float(ell),
                    float(opt.esjd_curve[i]), float(opt.esjd_stderrs[i]),
                    float(opt.acceptance_curve[i]), float(opt.acceptance_stderrs[i]),
                ])
            summary_rows.append([
                value, arm, opt.ell, opt.esjd, opt.esjd_stderr,
                opt.acceptance, opt.acceptance_stderr,
            ])
        ref = per_arm["smtm"]
        verdicts = {}
        for arm in ("mtm", "srwm", "rwm"):
            other = per_arm[arm]
            margin = ref.esjd - other.esjd
            # both stderrs are 0 when the limit laws degenerate (I == A)
            se = float(np.hypot(ref.esjd_stderr, other.esjd_stderr))
            if se > 0.0:
                sigma = float(margin / se)
            else:
                sigma = 0.0 if margin == 0.0 else float(np.copysign(np.inf, margin))
            verdicts[arm] = {
                "dominated": bool(margin > 0 and sigma > 3.0),
                "margin": margin,
                "sigma": sigma,
            }
        dominance[str(value)] = verdicts
        writer.write_svg(
            f"{_slug(cfg.name)}-{axis}{value}.svg",
            [
                Series(arm, per_arm[arm].acceptance_curve, per_arm[arm].esjd_curve)
                for arm, _ in _curve_arms(cfg, lam)
            ],
            title=f"{cfg.name}: ESJD vs acceptance ({axis}={value})",
            xlabel="total acceptance",
            ylabel="limit ESJD",
        )
    writer.write_csv(
        "curves.csv",
        [axis, "arm", "ell", "esjd", "esjd_se", "acceptance", "acceptance_se"],
        rows,
    )
    writer.write_csv(
        "summary.csv",
        [axis, "arm", "ell_star", "esjd_star", "esjd_se", "acceptance", "acceptance_se"],
        summary_rows,
    )
    all_dom = all(v["dominated"] for per in dominance.values() for v in per.values())
    report = {"axis": axis, "by_value": dominance, "all_dominated": all_dom}
    writer.write_text("dominance.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return {"dominance": all_dom}


def _run_large_n(cfg: ExperimentConfig, writer: _ArtifactWriter) -> dict:
    fisher = _fisher_of_center(cfg.center)
    rows = []
    series = []
    for idx, weight in enumerate(("gb", "lb")):
        params = ScalingParams(
            ell=cfg.ell, lam=cfg.lam, n_candidates=1, fisher_i=fisher, weight=weight
        )
        curve = acceptance_curve(params, cfg.n_values, cfg.samples, chain_rng(cfg.seed0, idx))
        for i, n in enumerate(curve.n_values):
            rows.append([
                weight, n, float(curve.estimates[i]), float(curve.stderrs[i]),
                float(curve.diff_estimates[i - 1]) if i > 0 else 0.0,
                float(curve.diff_stderrs[i - 1]) if i > 0 else 0.0,
            ])
        series.append(Series(weight, np.array(curve.n_values, dtype=float), curve.estimates))
    writer.write_csv(
        "curve.csv",
        ["weight", "n", "acceptance", "stderr", "diff_prev", "diff_se"],
        rows,
    )
    writer.write_svg(
        f"{_slug(cfg.name)}.svg",
        series,
        title=f"{cfg.name}: total acceptance vs candidate count (ell={cfg.ell})",
        xlabel="candidates N",
        ylabel="total acceptance",
    )
    return {"points": len(rows)}


def _run_scaling(cfg: ExperimentConfig, writer: _ArtifactWriter) -> dict:
    fisher = _fisher_of_center(cfg.center)
    grid = _grid(cfg)
    arms = [
        ("rwm", dict(lam=None, n_candidates=1, weight="gb")),
        ("srwm", dict(lam=cfg.lam, n_candidates=1, weight="gb")),
        ("gb-smtm", dict(lam=cfg.lam, n_candidates=cfg.n_candidates, weight="gb")),
        ("lb-smtm", dict(lam=cfg.lam, n_candidates=cfg.n_candidates, weight="lb")),
    ]
    rows, summary_rows = [], []
    esjd_series, acc_series = [], []
    for idx, (arm, kw) in enumerate(arms):
        opt = optimize_ell(grid, cfg.samples, chain_rng(cfg.seed0, idx), fisher_i=fisher, **kw)
        for i, ell in enumerate(opt.grid):
            rows.append([
                arm, float(ell),
                float(opt.esjd_curve[i]), float(opt.esjd_stderrs[i]),
                float(opt.acceptance_curve[i]), float(opt.acceptance_stderrs[i]),
            ])
        summary_rows.append([
            arm, opt.ell, opt.esjd, opt.esjd_stderr, opt.acceptance, opt.acceptance_stderr
        ])
        esjd_series.append(Series(arm, opt.grid, opt.esjd_curve))
        acc_series.append(Series(arm, opt.acceptance_curve, opt.esjd_curve))
    writer.write_csv(
        "curves.csv",
        ["arm", "ell", "esjd", "esjd_se", "acceptance", "acceptance_se"],
        rows,
    )
    writer.write_csv(
        "summary.csv",
        ["arm", "ell_star", "esjd_star", "esjd_se", "acceptance", "acceptance_se"],
        summary_rows,
    )
    writer.write_svg(
        f"{_slug(cfg.name)}-esjd.svg", esjd_series,
        title=f"{cfg.name}: limit ESJD vs ell",
        xlabel="ell", ylabel="limit ESJD",
    )
    writer.write_svg(
        f"{_slug(cfg.name)}-frontier.svg", acc_series,
        title=f"{cfg.name}: ESJD vs acceptance frontier",
        xlabel="total acceptance", ylabel="limit ESJD",
    )
    return {"arms": len(arms)}


def run_preset(name: str, overrides: dict | None = None, output_dir=None) -> dict:
    """Run a preset or config file; returns the manifest dict.

    Writes per-run CSVs, SVG figures, and manifest.json under output_dir
    (default: ./smtm-out/<name>).
    """
    cfg = load_config(name, overrides)
    out_dir = Path(output_dir) if output_dir else Path("smtm-out") / _slug(cfg.name)
    writer = _ArtifactWriter(out_dir)
    if cfg.mode == "chains":
        extra = _run_chains(cfg, writer)
    elif cfg.mode == "curves":
        extra = _run_curves(cfg, writer)
    else:
        extra = _run_scaling(cfg, writer)
    manifest = {
        "name": cfg.name,
        "version": __version__,
        "config": cfg.to_dict(),
        "seeds": list(range(cfg.seed0, cfg.seed0 + cfg.n_seeds)),
        "outputs": dict(sorted(writer.digests.items())),
        **extra,
    }
    writer.write_text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
