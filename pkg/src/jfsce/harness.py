"""Simulation harness: configuration, drive-gain calibration, model
training and persistence, Monte Carlo sweeps, and result emission.

A sweep is a list of operating points (one per swept parameter value, or a
single point for the SNR sweep), each evaluated over the configured SNR grid
with every requested estimator sharing the same drawn trials. Results are
deterministic functions of (config, master_seed) regardless of worker count;
the CSV output is byte-identical across repeat runs.
"""

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baseline import ml_estimate_batch, omp_estimate_batch
from .cascade import VARIANT_CASCADE, VARIANT_RAW, CascadeModel, deploy_batch, train_cascade
from .elm import load_model, save_model
from .impairment import HpaParams, calibrate_drive_gain, distortion_evm
from .pipeline import PHASE_EVAL, PHASE_PILOT, batch_sizes, draw_trial_batch, make_link, stream
from .signals import qpsk_payload

ESTIMATORS = ("ml", "omp", VARIANT_CASCADE, VARIANT_RAW)
SWEEP_PARAMS = ("snr", "evm", "k", "l", "ns", "m")

CSV_HEADER = "estimator,sweep_param,sweep_value,snr_db,e_error,nmse,n_trials,seed,config_hash"

# Reference operating points for the default configuration, kept so result
# files document how far a run lands from them. Structural choices that are
# not pinned down by the receiver definitions (line-of-sight tap profile,
# projection subspace, distortion reference) shift absolute levels, so these
# are recorded as measured/reference ratios rather than asserted.
REFERENCE_POINTS = (
    ("e_error", "elm_cascade", 10.0, 2.22e-2),
    ("e_error", "omp", 10.0, 5.36e-2),
    ("e_error", "ml", 10.0, 5.65e-1),
    ("e_error", "elm_raw", 10.0, 4.57e-1),
    ("nmse", "elm_cascade", 6.0, 7.03e-2),
    ("nmse", "omp", 8.0, 2.53e-1),
)

REFERENCE_NOTE = (
    "Reference values correspond to the full-scale default configuration. "
    "Absolute levels depend on structural modeling choices documented in the "
    "README; ratios are recorded here so departures stay visible.")


@dataclass(frozen=True)
class SimConfig:
    """Complete run description; hash of the canonical text identifies it."""

    ns: int = 32
    m: int = 160
    l: int = 8
    k_factor: float = 8.0
    eta: float = 0.2
    n_m: int = 10
    n_l: int = 10
    n_t: int = 100000
    n_c: int = None  # defaults to n_t
    n_trials: int = 20000
    snr_grid: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0)
    evm_target: float = 35.0
    evm_definition: str = "root"
    hpa_enabled: bool = True
    hpa_alpha_a: float = 2.16
    hpa_beta_a: float = 1.15
    hpa_alpha_phi: float = 4.00
    hpa_beta_phi: float = 9.10
    estimators: tuple = ESTIMATORS
    master_seed: int = 1
    omp_matrix_mode: str = "training"
    omp_iters: int = None
    sweep_param: str = "snr"
    sweep_values: tuple = None
    n_workers: int = 1
    pilot_len: int = 10000


# Fields that do not influence trained model weights; everything else feeds
# the model fingerprint.
_EVAL_ONLY = ("estimators", "n_trials", "n_workers", "sweep_param", "sweep_values")

_POSITIVE_INTS = ("ns", "m", "l", "n_m", "n_l", "n_t", "n_trials", "n_workers", "pilot_len")


def validate_config(cfg):
    for name in _POSITIVE_INTS:
        v = getattr(cfg, name)
        if not isinstance(v, int) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    if cfg.n_c is not None and (not isinstance(cfg.n_c, int) or cfg.n_c < 1):
        raise ValueError(f"n_c must be a positive integer or empty, got {cfg.n_c!r}")
    if not 1 <= cfg.l <= cfg.ns <= cfg.m:
        raise ValueError(f"need 1 <= l <= ns <= m, got l={cfg.l} ns={cfg.ns} m={cfg.m}")
    if cfg.k_factor < 0:
        raise ValueError(f"k_factor must be nonnegative, got {cfg.k_factor}")
    if cfg.eta < 0:
        raise ValueError(f"eta must be nonnegative, got {cfg.eta}")
    if not cfg.snr_grid:
        raise ValueError("snr_grid must be nonempty")
    if cfg.evm_target <= 0:
        raise ValueError(f"evm_target must be positive, got {cfg.evm_target}")
    if cfg.evm_definition not in ("root", "standard"):
        raise ValueError(f"unknown evm_definition {cfg.evm_definition!r}")
    for coeff in ("hpa_alpha_a", "hpa_beta_a", "hpa_alpha_phi", "hpa_beta_phi"):
        if getattr(cfg, coeff) < 0:
            raise ValueError(f"{coeff} must be nonnegative")
    if not cfg.estimators:
        raise ValueError("estimators must be nonempty")
    for est in cfg.estimators:
        if est not in ESTIMATORS:
            raise ValueError(f"unknown estimator {est!r}, expected subset of {ESTIMATORS}")
    if cfg.omp_matrix_mode not in ("training", "frame"):
        raise ValueError(f"unknown omp_matrix_mode {cfg.omp_matrix_mode!r}")
    if cfg.omp_iters is not None and not 1 <= cfg.omp_iters <= cfg.l:
        raise ValueError(f"omp_iters must be in [1, {cfg.l}], got {cfg.omp_iters}")
    if cfg.sweep_param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep_param {cfg.sweep_param!r}, expected one of {SWEEP_PARAMS}")
    if cfg.sweep_param != "snr" and not cfg.sweep_values:
        raise ValueError(f"sweep over {cfg.sweep_param!r} needs sweep_values")
    if cfg.master_seed < 0:
        raise ValueError("master_seed must be nonnegative")


def _fmt_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


def config_text(cfg, exclude=()):
    """Canonical flat key=value rendering, sorted by key."""
    d = dataclasses.asdict(cfg)
    return "".join(f"{k}={_fmt_value(v)}\n" for k, v in sorted(d.items()) if k not in exclude)


def config_hash(cfg):
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()


def model_fingerprint(cfg):
    """Hash over the fields that determine trained weights."""
    return hashlib.sha256(config_text(cfg, exclude=_EVAL_ONLY).encode()).hexdigest()


def _parse_bool(s):
    t = s.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_float_tuple(s):
    return tuple(float(p) for p in s.split(",") if p.strip())


def _parse_str_tuple(s):
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _optional(parser):
    return lambda s: None if s.strip() == "" else parser(s)


_PARSERS = {
    "ns": int, "m": int, "l": int, "n_m": int, "n_l": int, "n_t": int,
    "n_trials": int, "master_seed": int, "n_workers": int, "pilot_len": int,
    "n_c": _optional(int), "omp_iters": _optional(int),
    "k_factor": float, "eta": float, "evm_target": float,
    "hpa_alpha_a": float, "hpa_beta_a": float,
    "hpa_alpha_phi": float, "hpa_beta_phi": float,
    "hpa_enabled": _parse_bool,
    "snr_grid": _parse_float_tuple,
    "sweep_values": _optional(_parse_float_tuple),
    "estimators": _parse_str_tuple,
    "evm_definition": str.strip, "omp_matrix_mode": str.strip, "sweep_param": str.strip,
}


def parse_config_text(text, base=None):
    """Parse key=value lines (blank lines and # comments ignored) on top of
    base (defaults if omitted)."""
    cfg = base if base is not None else SimConfig()
    updates = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _PARSERS:
            raise ValueError(f"line {ln}: expected '<known key>=<value>', got {raw!r}")
        try:
            updates[key] = _PARSERS[key](value.strip())
        except ValueError as exc:
            raise ValueError(f"line {ln}: bad value for {key}: {exc}") from exc
    return replace(cfg, **updates)


def env_overrides(cfg, environ=None):
    """Apply JFSCE_<FIELD> environment overrides."""
    environ = os.environ if environ is None else environ
    updates = {}
    for key, parser in _PARSERS.items():
        var = "JFSCE_" + key.upper()
        if var in environ:
            updates[key] = parser(environ[var])
    return replace(cfg, **updates) if updates else cfg


_SWEEP_FIELDS = {"evm": "evm_target", "k": "k_factor", "l": "l", "ns": "ns", "m": "m"}


def sweep_points(cfg):
    """Swept values; the SNR sweep has a single operating point."""
    if cfg.sweep_param == "snr":
        return [None]
    return list(cfg.sweep_values)


def point_config(cfg, value):
    """Config of one operating point: the swept field pinned to value."""
    if value is None:
        return cfg
    fname = _SWEEP_FIELDS[cfg.sweep_param]
    if fname in ("l", "ns", "m"):
        if value != int(value):
            raise ValueError(f"sweep value for {cfg.sweep_param} must be an integer, got {value}")
        value = int(value)
    return replace(cfg, **{fname: value})


def hpa_params(cfg):
    return HpaParams(alpha_a=cfg.hpa_alpha_a, beta_a=cfg.hpa_beta_a,
                     alpha_phi=cfg.hpa_alpha_phi, beta_phi=cfg.hpa_beta_phi)


def calibrate(cfg):
    """Solve the drive gain for the configured distortion target.

    Returns (HpaParams or None, info dict). The pilot draw is seeded
    separately from training and evaluation streams.
    """
    if not cfg.hpa_enabled:
        return None, {"hpa_enabled": False, "drive_gain": None, "achieved_evm": None}
    pilot = qpsk_payload(cfg.pilot_len, stream(cfg.master_seed, "payload", PHASE_PILOT, 0))
    base = hpa_params(cfg)
    gain = calibrate_drive_gain(cfg.evm_target, base, pilot, cfg.evm_definition)
    params = replace(base, drive_gain=gain)
    info = {"hpa_enabled": True, "drive_gain": gain,
            "achieved_evm": distortion_evm(pilot, params, cfg.evm_definition),
            "evm_target": cfg.evm_target, "evm_definition": cfg.evm_definition}
    return params, info


def build_link(cfg):
    hpa, info = calibrate(cfg)
    return make_link(cfg.ns, cfg.m, cfg.l, cfg.k_factor, cfg.eta, hpa), info


def needed_variants(cfg):
    return [v for v in (VARIANT_CASCADE, VARIANT_RAW) if v in cfg.estimators]


def train_variant(cfg, link, variant):
    snr_range = (min(cfg.snr_grid), max(cfg.snr_grid))
    n_c = cfg.n_t if cfg.n_c is None else cfg.n_c
    return train_cascade(link, cfg.n_t, n_c, cfg.master_seed, snr_range, variant,
                         n_m=cfg.n_m, n_l=cfg.n_l, omp_iters=cfg.omp_iters)


def save_models(models, root, cfg):
    """Persist trained models under root/<fingerprint>/."""
    fp = model_fingerprint(cfg)
    d = os.path.join(root, fp)
    os.makedirs(d, exist_ok=True)
    for variant, model in models.items():
        save_model(model.fs_net, os.path.join(d, f"{variant}_fs.elm"))
        save_model(model.ce_net, os.path.join(d, f"{variant}_ce.elm"))
    manifest = {"fingerprint": fp, "variants": sorted(models),
                "config": config_text(cfg, exclude=_EVAL_ONLY)}
    with open(os.path.join(d, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return d


def _model_dir(root, fp):
    """Resolve a model directory: root may be a cache root with fingerprint
    subdirectories, or point directly at one model directory."""
    direct = os.path.join(root, "manifest.json")
    if os.path.exists(direct):
        return root, True
    sub = os.path.join(root, fp)
    if os.path.exists(os.path.join(sub, "manifest.json")):
        return sub, False
    return None, False


def load_models(root, cfg):
    """Load whatever persisted variants match this config's fingerprint.

    Returns a possibly empty dict. A directory explicitly pointed at (its own
    manifest.json) with a different fingerprint is an error; a cache root
    simply misses.
    """
    fp = model_fingerprint(cfg)
    d, direct = _model_dir(root, fp)
    if d is None:
        return {}
    with open(os.path.join(d, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("fingerprint") != fp:
        if direct:
            raise ValueError(
                f"model directory {d} holds fingerprint {manifest.get('fingerprint')!r}, "
                f"but this configuration requires {fp!r}")
        return {}
    models = {}
    for variant in manifest.get("variants", ()):
        fs_path = os.path.join(d, f"{variant}_fs.elm")
        ce_path = os.path.join(d, f"{variant}_ce.elm")
        if os.path.exists(fs_path) and os.path.exists(ce_path):
            models[variant] = CascadeModel(fs_net=load_model(fs_path),
                                           ce_net=load_model(ce_path), variant=variant)
    return models


def acquire_models(cfg, link, root=None, progress=None):
    """Load cached models where possible, train the rest, persist if rooted."""
    variants = needed_variants(cfg)
    models = {}
    if root is not None:
        cached = load_models(root, cfg)
        models.update({v: m for v, m in cached.items() if v in variants})
        for v in models:
            _say(progress, f"loaded {v} model from cache")
    missing = [v for v in variants if v not in models]
    for v in missing:
        t0 = time.monotonic()
        models[v] = train_variant(cfg, link, v)
        _say(progress, f"trained {v} model in {time.monotonic() - t0:.1f}s")
    if root is not None and missing:
        save_models(models, root, cfg)
    return models


def _say(progress, msg):
    if progress is not None:
        progress(msg)


@dataclass
class SweepRow:
    estimator: str
    sweep_value: float
    snr_db: float
    e_error: float
    nmse: float
    n_trials: int


@dataclass
class SweepResult:
    config: SimConfig
    config_hash: str
    rows: list
    wall_time_s: float
    calibration: list
    reference_comparison: dict


_CTX = {}


def _init_worker(cfg, link, models, want_taps):
    _CTX["v"] = (cfg, link, models, want_taps)


def _eval_task(task):
    cfg, link, models, want_taps = _CTX["v"]
    return _eval_batch(cfg, link, models, task, want_taps)


def _eval_batch(cfg, link, models, task, want_taps):
    """Evaluate every requested estimator on one freshly drawn trial batch.

    All estimators see the same windows (paired comparison). The receiver
    knows its operating SNR, so the transmit scaling applied by the noise
    convention is divided back out before estimation; synchronization metrics
    are scale-invariant either way.
    """
    p_idx, s_idx, snr_db, b_idx, size = task
    rngs = {name: stream(cfg.master_seed, name, PHASE_EVAL, p_idx, s_idx, b_idx)
            for name in ("tau", "payload", "channel", "noise")}
    tb = draw_trial_batch(link, size, snr_db, rngs)
    wins = tb.windows / 10.0 ** (snr_db / 20.0)
    hn2 = np.sum(np.abs(tb.taps) ** 2, axis=1)
    out = {}
    for est in cfg.estimators:
        if est == "ml":
            tau_hat, h_hat = ml_estimate_batch(wins, link.s, link.l)
        elif est == "omp":
            tau_hat, h_hat = omp_estimate_batch(wins, link.s, link.l, iters=cfg.omp_iters,
                                                mode=cfg.omp_matrix_mode, frames=tb.frames)
        else:
            tau_hat, h_hat = deploy_batch(models[est], wins, link, cfg.omp_iters)
        n_err = int(np.count_nonzero(np.asarray(tau_hat) != tb.taus))
        ratios = np.sum(np.abs(h_hat - tb.taps) ** 2, axis=1) / hn2
        out[est] = (n_err, float(ratios.sum()))
    return out, (tb.taps if want_taps else None)


def _eval_point(cfg, link, models, p_idx, sweep_value, dump, progress):
    """All (snr, estimator) cells of one operating point."""
    sizes = batch_sizes(cfg.n_trials)
    tasks = [(p_idx, s_idx, float(snr), b_idx, bs)
             for s_idx, snr in enumerate(cfg.snr_grid)
             for b_idx, bs in enumerate(sizes)]
    want_taps = dump is not None
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_workers, initializer=_init_worker,
                                 initargs=(cfg, link, models, want_taps)) as ex:
            parts = list(ex.map(_eval_task, tasks, chunksize=1))
    else:
        parts = [_eval_batch(cfg, link, models, task, want_taps) for task in tasks]

    acc = {}  # (s_idx, est) -> [n_err, ratio_sum]
    for task, (cells, taps) in zip(tasks, parts):
        s_idx = task[1]
        for est, (n_err, rsum) in cells.items():
            slot = acc.setdefault((s_idx, est), [0, 0.0])
            slot[0] += n_err
            slot[1] += rsum
        if want_taps:
            dump.append(taps)
    rows = []
    for s_idx, snr in enumerate(cfg.snr_grid):
        for est in cfg.estimators:
            n_err, rsum = acc[(s_idx, est)]
            rows.append(SweepRow(
                estimator=est,
                sweep_value=float(snr) if sweep_value is None else float(sweep_value),
                snr_db=float(snr),
                e_error=n_err / cfg.n_trials,
                nmse=rsum / cfg.n_trials,
                n_trials=cfg.n_trials))
        _say(progress, f"point {p_idx} snr {snr:g} dB done "
                       f"({cfg.n_trials} trials x {len(cfg.estimators)} estimators)")
    return rows


def _reference_comparison(cfg, rows):
    matches = []
    if cfg.sweep_param == "snr":
        by_key = {(r.estimator, r.snr_db): r for r in rows}
        for metric, est, snr, ref in REFERENCE_POINTS:
            row = by_key.get((est, snr))
            if row is None:
                continue
            measured = getattr(row, metric)
            matches.append({"metric": metric, "estimator": est, "snr_db": snr,
                            "measured": measured, "reference": ref,
                            "ratio": measured / ref})
    return {"note": REFERENCE_NOTE, "points": matches}


def run_sweep(cfg, models_root=None, progress=None, dump_channels=None):
    """Calibrate, train or load models, and evaluate every sweep cell."""
    validate_config(cfg)
    # reject every sweep point up front so a bad one cannot waste the
    # compute already spent on its predecessors
    points = [(value, point_config(cfg, value)) for value in sweep_points(cfg)]
    for _, pcfg in points:
        validate_config(pcfg)
    t0 = time.monotonic()
    rows = []
    calibration = []
    dump = [] if dump_channels else None
    for p_idx, (value, pcfg) in enumerate(points):
        link, info = build_link(pcfg)
        if value is not None:
            info["sweep_value"] = float(value)
        calibration.append(info)
        if info.get("drive_gain") is not None:
            _say(progress, f"point {p_idx}: drive gain {info['drive_gain']:.6g} "
                           f"-> {info['achieved_evm']:.2f}% distortion")
        models = acquire_models(pcfg, link, models_root, progress)
        rows.extend(_eval_point(pcfg, link, models, p_idx, value, dump, progress))
    if dump_channels:
        _write_channel_dump(dump_channels, dump)
    result = SweepResult(config=cfg, config_hash=config_hash(cfg), rows=rows,
                         wall_time_s=time.monotonic() - t0, calibration=calibration,
                         reference_comparison=_reference_comparison(cfg, rows))
    return result


def _write_channel_dump(path, taps_blocks):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("trial,tap,re,im\n")
        trial = 0
        for block in taps_blocks:
            for row in block:
                for tap, v in enumerate(row):
                    f.write(f"{trial},{tap},{float(v.real)!r},{float(v.imag)!r}\n")
                trial += 1


def emit_results(result, out_prefix):
    """Write <prefix>.csv (deterministic bytes) and <prefix>.json."""
    if not result.rows:
        raise ValueError("refusing to emit an empty result")
    cfg = result.config
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(",".join((
            r.estimator, cfg.sweep_param,
            "%.6e" % r.sweep_value, "%.6e" % r.snr_db,
            "%.6e" % r.e_error, "%.6e" % r.nmse,
            str(r.n_trials), str(cfg.master_seed), result.config_hash)))
    csv_path = out_prefix + ".csv"
    json_path = out_prefix + ".json"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    payload = {
        "config": dataclasses.asdict(cfg),
        "config_hash": result.config_hash,
        "model_fingerprint": model_fingerprint(cfg),
        "wall_time_s": result.wall_time_s,
        "calibration": result.calibration,
        "rows": [dict(dataclasses.asdict(r), sweep_param=cfg.sweep_param,
                      seed=cfg.master_seed, config_hash=result.config_hash)
                 for r in result.rows],
        "reference_comparison": result.reference_comparison,
    }
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path


FIGURE_PRESETS = {
    3: {"sweep_param": "snr", "sweep_values": None},
    4: {"sweep_param": "snr", "sweep_values": None},
    5: {"sweep_param": "evm", "sweep_values": (35.0, 40.0, 45.0, 50.0)},
    6: {"sweep_param": "k", "sweep_values": (5.0, 7.0, 9.0)},
    7: {"sweep_param": "l", "sweep_values": (4.0, 6.0, 8.0, 10.0, 12.0)},
    8: {"sweep_param": "ns", "sweep_values": (16.0, 32.0, 64.0)},
}


def figure_preset(cfg, fig):
    if fig not in FIGURE_PRESETS:
        raise ValueError(f"no preset for figure {fig}, have {sorted(FIGURE_PRESETS)}")
    return replace(cfg, **FIGURE_PRESETS[fig])
