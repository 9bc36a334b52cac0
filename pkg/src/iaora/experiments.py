"""Config-driven experiment families and machine-readable result output.

Configs are flat key-value text: one `key = value` per line, `#` starts a
comment, lists are comma-separated. Unknown keys are rejected so typos fail
loudly. Each experiment family writes one CSV row per parameter point, with
a fixed column set, plus a human-readable summary that puts the analytic
reference values (throughput lower bound, user-scaling minimum N, closed-form
MAC throughput) next to the simulated numbers.

Re-running any experiment with the same config and seed produces a
byte-identical CSV body, regardless of worker count.
"""

import io
import math
from dataclasses import dataclass

import numpy as np

from .analytics import (
    InfeasibleThresholdError,
    NetworkConfig,
    design_protocol_params,
    mac_throughput,
    throughput_lower_bound,
    user_scaling_min_n,
)
from .channel import CaitErrorModel
from .engine import run_trials
from .optimizer import (
    GridSpec,
    find_crossover,
    grid_search,
    optimum_params,
    evaluate_protocol,
)
from .protocols import ProtocolKind, aloha_rate, ora_rate, ora_threshold

EXPERIMENTS = (
    "mac-curve",
    "scaling-snr",
    "sweep-n",
    "compare-protocols",
    "optimize",
    "robustness",
)

CSV_COLUMNS = (
    "experiment",
    "K",
    "N",
    "snr_db",
    "protocol",
    "phi_g",
    "phi_i",
    "rate",
    "nu",
    "sigma2",
    "slots",
    "seed",
    "aggregate_throughput",
    "mac_throughput",
    "empirical_p",
    "empirical_ps",
    "stderr",
    "p",
)

DEFAULT_SIGMA2_LIST = (0.0, 1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_P_LIST = (0.001, 0.002, 0.005, 0.008, 0.01, 0.0125, 0.015, 0.02, 0.03, 0.05, 0.1)


class ConfigError(ValueError):
    """Raised for unparseable config text or out-of-range field values."""


@dataclass
class ExperimentConfig:
    """Validated description of one experiment run."""

    experiment: str
    K: int | None = None
    N: int | None = None
    snr_db: float | None = None
    snr_list_db: tuple = ()
    n_list: tuple = ()
    p_list: tuple = DEFAULT_P_LIST
    sigma2_list: tuple = DEFAULT_SIGMA2_LIST
    epsilon: float = 0.01
    delta: float = 0.1
    slots: int = 100000
    seed: int = 42
    output_path: str = "results.csv"
    phi_g_min: float = 0.1
    phi_g_max: float = 6.0
    phi_g_step: float = 0.1
    rate_min: float = 0.5
    rate_max: float = 8.0
    rate_step: float = 0.05
    slots_per_point: int = 20000

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            phi_g_values=tuple(
                np.round(np.arange(self.phi_g_min, self.phi_g_max + self.phi_g_step / 2, self.phi_g_step), 10)
            ),
            rate_values=tuple(
                np.round(np.arange(self.rate_min, self.rate_max + self.rate_step / 2, self.rate_step), 10)
            ),
            slots_per_point=self.slots_per_point,
        )


_INT_KEYS = {"K", "N", "slots", "seed", "slots_per_point"}
_FLOAT_KEYS = {
    "snr_db", "epsilon", "delta",
    "phi_g_min", "phi_g_max", "phi_g_step",
    "rate_min", "rate_max", "rate_step",
}
_FLOAT_LIST_KEYS = {"snr_list_db", "sigma2_list", "p_list"}
_INT_LIST_KEYS = {"n_list"}
_STR_KEYS = {"experiment", "output_path"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _FLOAT_LIST_KEYS | _INT_LIST_KEYS | _STR_KEYS

_GRID_KEYS = (
    "phi_g_min", "phi_g_max", "phi_g_step",
    "rate_min", "rate_max", "rate_step",
    "slots_per_point",
)

# Per-experiment schema: keys that must appear and keys that may appear
# (on top of slots / seed / output_path, always allowed).
_SCHEMA = {
    "mac-curve": ({"K", "N"}, {"snr_db", "p_list"}),
    "scaling-snr": ({"K", "snr_list_db"}, {"epsilon", "delta"}),
    "sweep-n": ({"K", "n_list", "snr_db"}, {"epsilon", "delta"}),
    "compare-protocols": ({"K", "N", "snr_list_db"}, set(_GRID_KEYS)),
    "optimize": ({"K", "N", "snr_db"}, set(_GRID_KEYS)),
    "robustness": ({"K", "N", "snr_db"}, {"sigma2_list"} | set(_GRID_KEYS)),
}
_ALWAYS_ALLOWED = {"experiment", "slots", "seed", "output_path"}


def _parse_scalar(key: str, text: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(v.strip()) for v in text.split(",") if v.strip())
        if key in _INT_LIST_KEYS:
            return tuple(int(v.strip()) for v in text.split(",") if v.strip())
        return text
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value for '{key}': {text!r}") from None


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def validate_config(raw: str) -> ExperimentConfig:
    """Parse and validate flat key-value config text into an ExperimentConfig.

    Parse failures carry the line number; range violations name the field.
    Unknown keys, duplicate keys, and keys foreign to the chosen experiment
    are all rejected.
    """
    values = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        if not text:
            raise ConfigError(f"line {lineno}: empty value for '{key}'")
        values[key] = _parse_scalar(key, text, lineno)

    if "experiment" not in values:
        missing = "experiment (one of: " + ", ".join(EXPERIMENTS) + ")"
        raise ConfigError(f"missing required keys: {missing}")
    experiment = values["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {', '.join(EXPERIMENTS)}, got '{experiment}'"
        )

    required, optional = _SCHEMA[experiment]
    allowed = required | optional | _ALWAYS_ALLOWED
    missing = sorted(required - values.keys())
    if missing:
        raise ConfigError(f"missing required keys for {experiment}: {', '.join(missing)}")
    foreign = sorted(values.keys() - allowed)
    if foreign:
        raise ConfigError(f"keys not applicable to {experiment}: {', '.join(foreign)}")

    cfg = ExperimentConfig(experiment=experiment)
    for key, val in values.items():
        setattr(cfg, key, val)

    _require(cfg.K is None or cfg.K >= 1, f"K must be at least 1, got {cfg.K}")
    _require(cfg.N is None or cfg.N >= 1, f"N must be at least 1, got {cfg.N}")
    _require(cfg.slots >= 1, f"slots must be at least 1, got {cfg.slots}")
    _require(0.0 < cfg.epsilon < 1.0, f"epsilon must lie in (0, 1), got {cfg.epsilon}")
    _require(0.0 < cfg.delta < 1.0, f"delta must lie in (0, 1), got {cfg.delta}")
    _require(all(0.0 < p <= 1.0 for p in cfg.p_list), "p_list entries must lie in (0, 1]")
    _require(all(s >= 0.0 for s in cfg.sigma2_list), "sigma2_list entries must be nonnegative")
    _require(all(n >= 1 for n in cfg.n_list), "n_list entries must be at least 1")
    for name in ("snr_list_db", "n_list", "sigma2_list", "p_list"):
        vals = getattr(cfg, name)
        _require(
            all(b > a for a, b in zip(vals, vals[1:])),
            f"{name} must be strictly ascending",
        )
    if experiment in ("compare-protocols", "optimize", "robustness"):
        _require(cfg.phi_g_step > 0, f"phi_g_step must be positive, got {cfg.phi_g_step}")
        _require(cfg.rate_step > 0, f"rate_step must be positive, got {cfg.rate_step}")
        _require(cfg.phi_g_max >= cfg.phi_g_min, "phi_g_max must be >= phi_g_min")
        _require(cfg.rate_max >= cfg.rate_min, "rate_max must be >= rate_min")
        _require(
            cfg.slots_per_point >= 1000,
            f"slots_per_point must be at least 1000, got {cfg.slots_per_point}",
        )
    if experiment == "compare-protocols":
        _require(len(cfg.snr_list_db) >= 2, "snr_list_db needs at least two values")
    if experiment == "scaling-snr":
        _require(len(cfg.snr_list_db) >= 1, "snr_list_db must not be empty")
    if experiment == "sweep-n":
        _require(len(cfg.n_list) >= 1, "n_list must not be empty")
    return cfg


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(config: ExperimentConfig, **overrides) -> dict:
    row = {col: "" for col in CSV_COLUMNS}
    row["experiment"] = config.experiment
    row["slots"] = config.slots
    row["seed"] = config.seed
    row.update(overrides)
    return row


def _stats_cells(stats) -> dict:
    return {
        "aggregate_throughput": stats.aggregate_phy_throughput,
        "mac_throughput": stats.mac_throughput_per_cell,
        "empirical_p": stats.empirical_p,
        "empirical_ps": stats.empirical_ps,
        "stderr": stats.stderr,
    }


def render_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[col]) for col in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def _snr_from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _run_mac_curve(config: ExperimentConfig, workers: int):
    snr_db = config.snr_db if config.snr_db is not None else 10.0
    snr = _snr_from_db(snr_db)
    rows, lines = [], []
    for p in config.p_list:
        net = NetworkConfig(K=config.K, N=config.N, snr=snr, p=p)
        stats = run_trials(
            net, ProtocolKind.SLOTTED_ALOHA, None, CaitErrorModel(), config.slots,
            config.seed, workers=workers,
        )
        rows.append(_row(
            config, K=config.K, N=config.N, snr_db=snr_db,
            protocol=ProtocolKind.SLOTTED_ALOHA.value, rate=aloha_rate(net),
            sigma2=0.0, p=p, **_stats_cells(stats),
        ))
        lines.append(
            f"  p={p:g}: simulated MAC throughput {stats.mac_throughput_per_cell:.4f}, "
            f"closed form {mac_throughput(config.N, p):.4f}"
        )
    lines.append(f"  closed-form peak at p=1/N={1.0 / config.N:g}")
    return rows, lines


def _run_scaling_snr(config: ExperimentConfig, workers: int):
    rows, lines = [], []
    exponent = (config.K - 1) / (1.0 - config.delta)
    for db in config.snr_list_db:
        snr = _snr_from_db(db)
        n = max(1, math.ceil(snr ** exponent))
        net = NetworkConfig(K=config.K, N=n, snr=snr)
        try:
            params = design_protocol_params(net, config.epsilon, config.delta)
        except InfeasibleThresholdError as exc:
            lines.append(f"  snr={db:g}dB N={n}: skipped ({exc})")
            continue
        stats = run_trials(
            net, ProtocolKind.IA_ORA, params, CaitErrorModel(), config.slots,
            config.seed, workers=workers,
        )
        bound = throughput_lower_bound(net, config.epsilon, config.delta)
        min_n = user_scaling_min_n(config.K, snr, config.delta)
        rows.append(_row(
            config, K=config.K, N=n, snr_db=db, protocol=ProtocolKind.IA_ORA.value,
            phi_g=params.phi_g, phi_i=params.phi_i, rate=params.rate, nu=params.nu,
            sigma2=0.0, p=net.p, **_stats_cells(stats),
        ))
        lines.append(
            f"  snr={db:g}dB N={n}: simulated {stats.aggregate_phy_throughput:.4f} "
            f"(stderr {stats.stderr:.4f}), analytic lower bound {bound:.4f}, "
            f"user-scaling minimum N {min_n:.1f}"
        )
    return rows, lines


def _run_sweep_n(config: ExperimentConfig, workers: int):
    snr = _snr_from_db(config.snr_db)
    rows, lines = [], []
    for n in config.n_list:
        net = NetworkConfig(K=config.K, N=n, snr=snr)
        try:
            params = design_protocol_params(net, config.epsilon, config.delta)
        except InfeasibleThresholdError as exc:
            lines.append(f"  N={n}: skipped ({exc})")
            continue
        stats = run_trials(
            net, ProtocolKind.IA_ORA, params, CaitErrorModel(), config.slots,
            config.seed, workers=workers,
        )
        bound = throughput_lower_bound(net, config.epsilon, config.delta)
        rows.append(_row(
            config, K=config.K, N=n, snr_db=config.snr_db,
            protocol=ProtocolKind.IA_ORA.value,
            phi_g=params.phi_g, phi_i=params.phi_i, rate=params.rate, nu=params.nu,
            sigma2=0.0, p=net.p, **_stats_cells(stats),
        ))
        lines.append(
            f"  N={n}: simulated {stats.aggregate_phy_throughput:.4f} "
            f"(stderr {stats.stderr:.4f}), analytic lower bound {bound:.4f}"
        )
    lines.append(
        f"  user-scaling minimum N at this snr: "
        f"{user_scaling_min_n(config.K, snr, config.delta):.1f}"
    )
    return rows, lines


def _run_compare(config: ExperimentConfig, workers: int):
    grid = config.grid_spec()
    rows, lines = [], []
    curves = {kind: [] for kind in (ProtocolKind.IA_ORA, ProtocolKind.ORA, ProtocolKind.SLOTTED_ALOHA)}
    for db in config.snr_list_db:
        snr = _snr_from_db(db)
        net = NetworkConfig(K=config.K, N=config.N, snr=snr)
        for kind in curves:
            stats, params = evaluate_protocol(
                net, kind, config.slots, config.seed, grid=grid, workers=workers
            )
            curves[kind].append(stats.aggregate_phy_throughput)
            cells = dict(sigma2=0.0, p=net.p, **_stats_cells(stats))
            if kind is ProtocolKind.IA_ORA:
                cells.update(phi_g=params.phi_g, phi_i=params.phi_i, rate=params.rate)
            elif kind is ProtocolKind.ORA:
                cells.update(phi_g=ora_threshold(net), rate=ora_rate(net))
            else:
                cells.update(rate=aloha_rate(net))
            rows.append(_row(
                config, K=config.K, N=config.N, snr_db=db, protocol=kind.value, **cells
            ))
        lines.append(
            f"  snr={db:g}dB: ia-ora {curves[ProtocolKind.IA_ORA][-1]:.4f}, "
            f"ora {curves[ProtocolKind.ORA][-1]:.4f}, "
            f"slotted-aloha {curves[ProtocolKind.SLOTTED_ALOHA][-1]:.4f}"
        )
    crossover = find_crossover(
        config.snr_list_db, curves[ProtocolKind.IA_ORA], curves[ProtocolKind.ORA]
    )
    if crossover is None:
        lines.append("  no ia-ora / ora crossover inside the sweep")
    else:
        lines.append(
            f"  ia-ora / ora crossover at {crossover[0]:.2f}dB, throughput {crossover[1]:.4f}"
        )
    return rows, lines


def _run_optimize(config: ExperimentConfig, workers: int):
    snr = _snr_from_db(config.snr_db)
    net = NetworkConfig(K=config.K, N=config.N, snr=snr)
    opt = grid_search(net, config.grid_spec(), config.seed, workers=workers)
    rows = []
    for pg, rate, throughput, stderr in opt.full_surface:
        feasible = math.isfinite(throughput)
        rows.append(_row(
            config, K=config.K, N=config.N, snr_db=config.snr_db,
            protocol=ProtocolKind.IA_ORA.value, phi_g=pg, rate=rate,
            sigma2=0.0, p=net.p,
            aggregate_throughput=throughput,
            stderr=stderr if feasible else "",
        ))
    lines = [
        f"  optimum (phi_g, rate) = ({opt.phi_g_star:g}, {opt.rate_star:g}), "
        f"phi_i = {opt.phi_i_star:.6g}, throughput {opt.throughput_at_star:.4f}",
        f"  surface has {len(opt.full_surface)} points "
        f"({sum(1 for r in rows if r['aggregate_throughput'] == -math.inf)} infeasible)",
    ]
    return rows, lines


def _run_robustness(config: ExperimentConfig, workers: int):
    snr = _snr_from_db(config.snr_db)
    net = NetworkConfig(K=config.K, N=config.N, snr=snr)
    opt = grid_search(net, config.grid_spec(), config.seed, workers=workers)
    params = optimum_params(opt)
    rows, lines = [], []
    base = {}
    for sigma2 in config.sigma2_list:
        err = CaitErrorModel(sigma2=sigma2)
        for kind in (ProtocolKind.IA_ORA, ProtocolKind.ORA):
            stats, _ = evaluate_protocol(
                net, kind, config.slots, config.seed, err=err, params=params, workers=workers
            )
            cells = dict(sigma2=sigma2, p=net.p, **_stats_cells(stats))
            if kind is ProtocolKind.IA_ORA:
                cells.update(phi_g=params.phi_g, phi_i=params.phi_i, rate=params.rate)
            else:
                cells.update(phi_g=ora_threshold(net), rate=ora_rate(net))
            rows.append(_row(
                config, K=config.K, N=config.N, snr_db=config.snr_db,
                protocol=kind.value, **cells,
            ))
            base.setdefault(kind, stats.aggregate_phy_throughput)
            rel = stats.aggregate_phy_throughput / base[kind] if base[kind] else math.nan
            lines.append(
                f"  sigma2={sigma2:g} {kind.value}: {stats.aggregate_phy_throughput:.4f} "
                f"({rel:.1%} of perfect-knowledge value)"
            )
    lines.insert(0, (
        f"  operating point from search: (phi_g, rate) = "
        f"({params.phi_g:g}, {params.rate:g}), phi_i = {params.phi_i:.6g}"
    ))
    return rows, lines


_RUNNERS = {
    "mac-curve": _run_mac_curve,
    "scaling-snr": _run_scaling_snr,
    "sweep-n": _run_sweep_n,
    "compare-protocols": _run_compare,
    "optimize": _run_optimize,
    "robustness": _run_robustness,
}


def run_experiment(config: ExperimentConfig, workers: int = 1):
    """Execute one experiment: write its CSV and summary, return (rows, summary)."""
    rows, lines = _RUNNERS[config.experiment](config, workers)
    summary = "\n".join(
        [f"experiment: {config.experiment} (slots={config.slots}, seed={config.seed})"]
        + lines
    ) + "\n"
    csv_text = render_csv(rows)
    with open(config.output_path, "w", newline="") as fh:
        fh.write(csv_text)
    summary_path = config.output_path + ".summary.txt"
    with open(summary_path, "w") as fh:
        fh.write(summary)
    return rows, summary
