"""Command-line front end.

Subcommands: calibrate (drive-gain solve only), train (fit and persist
models), eval (run the configured sweep), sweep (eval with the swept
parameter given on the command line), reproduce-fig (eval with a bundled
sweep preset). Config precedence: defaults < --config file < JFSCE_* env
vars < explicit flags.
"""

import argparse
import json
import sys
from dataclasses import replace

from .harness import (_PARSERS, SimConfig, acquire_models, build_link, calibrate,
                      config_hash, emit_results, env_overrides, figure_preset,
                      model_fingerprint, parse_config_text, point_config, run_sweep,
                      sweep_points, validate_config)

_FLAG_ALIASES = {"master_seed": ("--seed", "--master-seed"),
                 "n_workers": ("--workers", "--n-workers")}

_FLAG_HELP = {
    "ns": "training sequence length",
    "m": "frame length in samples",
    "l": "channel tap count",
    "k_factor": "Rician power ratio (inf for no scattering)",
    "eta": "exponential tap power decay rate",
    "n_m": "synchronizer hidden-width multiplier",
    "n_l": "estimator hidden-width multiplier",
    "n_t": "synchronizer training set size",
    "n_c": "estimator training set size (empty = n_t)",
    "n_trials": "Monte Carlo trials per sweep cell",
    "snr_grid": "comma-separated SNR points in dB",
    "evm_target": "distortion calibration target in percent",
    "evm_definition": "distortion metric flavor: root or standard",
    "hpa_enabled": "apply the amplifier nonlinearity (true/false)",
    "hpa_alpha_a": "amplitude response numerator coefficient",
    "hpa_beta_a": "amplitude response saturation coefficient",
    "hpa_alpha_phi": "phase response numerator coefficient",
    "hpa_beta_phi": "phase response saturation coefficient",
    "estimators": "comma-separated subset of ml,omp,elm_cascade,elm_raw",
    "master_seed": "master random seed",
    "omp_matrix_mode": "matching-pursuit measurement rows: training or frame",
    "omp_iters": "matching-pursuit iterations (empty = tap count)",
    "sweep_param": "swept parameter: snr, evm, k, l, ns, m",
    "sweep_values": "comma-separated sweep values",
    "n_workers": "evaluation worker processes",
    "pilot_len": "calibration pilot length",
}


def _add_config_flags(p):
    p.add_argument("--config", metavar="FILE", help="key=value config file")
    for key in sorted(_PARSERS):
        flags = _FLAG_ALIASES.get(key, ("--" + key.replace("_", "-"),))
        p.add_argument(*flags, dest="cfg_" + key, metavar="V", help=_FLAG_HELP[key])


def resolve_config(args):
    cfg = SimConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            cfg = parse_config_text(f.read(), cfg)
    cfg = env_overrides(cfg)
    updates = {}
    for key, parser in _PARSERS.items():
        raw = getattr(args, "cfg_" + key, None)
        if raw is not None:
            updates[key] = parser(raw)
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _print_summary(result):
    cfg = result.config
    print(f"config_hash {result.config_hash}")
    print(f"wall_time   {result.wall_time_s:.1f}s")
    print(f"{'estimator':<13}{cfg.sweep_param:>8}{'snr_db':>8}{'e_error':>13}{'nmse':>13}{'trials':>9}")
    for r in result.rows:
        print(f"{r.estimator:<13}{r.sweep_value:>8g}{r.snr_db:>8g}"
              f"{r.e_error:>13.4e}{r.nmse:>13.4e}{r.n_trials:>9d}")
    points = result.reference_comparison.get("points", ())
    if points:
        print("reference comparison (measured / reference):")
        for p in points:
            print(f"  {p['metric']:<8} {p['estimator']:<13} snr {p['snr_db']:g}: "
                  f"{p['measured']:.3e} / {p['reference']:.3e} = {p['ratio']:.2f}x")


def cmd_calibrate(args):
    cfg = resolve_config(args)
    validate_config(cfg)
    _, info = calibrate(cfg)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def cmd_train(args):
    cfg = resolve_config(args)
    validate_config(cfg)
    for value in sweep_points(cfg):
        pcfg = point_config(cfg, value)
        validate_config(pcfg)
        link, info = build_link(pcfg)
        if info.get("drive_gain") is not None:
            _progress(f"drive gain {info['drive_gain']:.6g} -> {info['achieved_evm']:.2f}%")
        acquire_models(pcfg, link, args.models, progress=_progress)
        print(f"{model_fingerprint(pcfg)}  sweep_value={value}")
    return 0


def _run_and_emit(args, cfg):
    validate_config(cfg)
    result = run_sweep(cfg, models_root=args.models, progress=_progress,
                       dump_channels=args.dump_channels)
    csv_path, json_path = emit_results(result, args.out)
    _print_summary(result)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_eval(args):
    return _run_and_emit(args, resolve_config(args))


def cmd_sweep(args):
    cfg = resolve_config(args)
    cfg = replace(cfg, sweep_param=args.param,
                  sweep_values=_PARSERS["sweep_values"](args.values) if args.values else cfg.sweep_values)
    return _run_and_emit(args, cfg)


def cmd_reproduce_fig(args):
    cfg = figure_preset(resolve_config(args), args.figure)
    return _run_and_emit(args, cfg)


def build_parser():
    p = argparse.ArgumentParser(prog="jfsce",
                                description="Joint frame synchronization and channel "
                                            "estimation simulation harness")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("calibrate", help="solve the amplifier drive gain for the distortion target")
    _add_config_flags(pc)
    pc.set_defaults(func=cmd_calibrate)

    pt = sub.add_parser("train", help="train and persist models for every sweep point")
    _add_config_flags(pt)
    pt.add_argument("--models", required=True, metavar="DIR", help="model store directory")
    pt.set_defaults(func=cmd_train)

    def eval_like(name, help_text):
        q = sub.add_parser(name, help=help_text)
        _add_config_flags(q)
        q.add_argument("--out", default="results", metavar="PREFIX",
                       help="output path prefix for .csv/.json (default: results)")
        q.add_argument("--models", metavar="DIR", help="model store (load if present, else train and save)")
        q.add_argument("--dump-channels", metavar="FILE", help="also write drawn channel taps as CSV")
        return q

    pe = eval_like("eval", "run the configured Monte Carlo sweep")
    pe.set_defaults(func=cmd_eval)

    ps = eval_like("sweep", "run a sweep over an explicitly given parameter")
    ps.add_argument("--param", required=True, choices=("snr", "evm", "k", "l", "ns", "m"))
    ps.add_argument("--values", metavar="V,V,...", help="sweep values (unused for snr)")
    ps.set_defaults(func=cmd_sweep)

    pf = eval_like("reproduce-fig", "run a bundled sweep preset")
    pf.add_argument("figure", type=int, choices=(3, 4, 5, 6, 7, 8))
    pf.set_defaults(func=cmd_reproduce_fig)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
