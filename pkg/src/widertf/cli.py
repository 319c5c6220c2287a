"""Command-line entry point.

Subcommands:

* ``synthetic --config cfg.toml --out results.csv`` - Monte-Carlo sweep
* ``crb --config cfg.toml --out bounds.csv``        - bound curves only
* ``speech --config cfg.toml --target t.wav --noise n.wav
  --target-rir tr.wav --noise-rir nr.wav --out results.csv``
* ``selftest``                                      - quick invariant battery

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness, speech
from .scenario import ScenarioConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _load_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _scenario_config(data, seed):
    fields = {k: data[k] for k in (
        "M", "K", "L", "snr_db", "rho_f", "upsilon_f", "powers",
        "epsilon", "sensor_noise_snr_db",
    ) if k in data}
    return ScenarioConfig(seed=seed, **fields)


def _sweep_spec(config):
    sweep = config.get("sweep", {})
    base_seed = int(sweep.get("base_seed", 0))
    fixed = _scenario_config(config.get("scenario", {}), base_seed)
    scenario = sweep.get("scenario", "equicorrelated")
    if scenario == "varcorrelated" and fixed.powers == "equal":
        fixed = ScenarioConfig(**{**fixed.__dict__, "powers": "random-uniform"})
    return harness.SweepSpec(
        scenario=scenario,
        swept_parameter=sweep.get("parameter", "upsilon_f"),
        values=tuple(sweep.get("values", [])),
        fixed=fixed,
        n_trials=int(sweep.get("n_trials", 200)),
        methods=tuple(sweep.get("methods", ["svd-direct", "cw"])),
        compute_bounds=bool(sweep.get("compute_bounds", True)),
        base_seed=base_seed,
        noise_covariance=sweep.get("noise_covariance", "true"),
    )


def _speech_config(config):
    sp = config.get("speech", {})
    stft_cfg = speech.StftConfig(
        fft_size=int(sp.get("fft_size", 1024)),
        hop=int(sp.get("hop", 256)),
    )
    return speech.SpeechExperimentConfig(
        M=int(sp.get("M", 4)),
        frames_per_segment=int(sp.get("frames_per_segment", 5)),
        snr_db=float(sp.get("snr_db", 0.0)),
        n_repetitions=int(sp.get("n_repetitions", 50)),
        seed=int(sp.get("seed", 0)),
        stft=stft_cfg,
        ref_sensor=int(sp.get("ref_sensor", 0)),
        f_lo=float(sp.get("f_lo", 80.0)),
        f_hi=float(sp.get("f_hi", 4000.0)),
        power_threshold_db=float(sp.get("power_threshold_db", 35.0)),
        silence_threshold_db=float(sp.get("silence_threshold_db", 40.0)),
        noise_est_seconds=float(sp.get("noise_est_seconds", 2.0)),
        include_orig_phase=bool(sp.get("include_orig_phase", True)),
        group_size=int(sp.get("group_size", 0)),
        sensor_noise_db=(float(sp["sensor_noise_db"])
                         if "sensor_noise_db" in sp else None),
    )


def _cmd_synthetic(args):
    config = _load_toml(args.config)
    spec = _sweep_spec(config)
    rows = harness.run_sweep(spec)
    harness.write_csv(rows, args.out)
    return EXIT_OK


def _cmd_crb(args):
    config = _load_toml(args.config)
    spec = _sweep_spec(config)
    rows = harness.run_crb_curves(spec)
    harness.write_csv(rows, args.out)
    return EXIT_OK


def _cmd_speech(args):
    config = _load_toml(args.config)
    cfg = _speech_config(config)
    rows = speech.run_speech_experiment(
        speech.load_wav(args.target),
        speech.load_wav(args.noise),
        speech.load_wav(args.target_rir),
        speech.load_wav(args.noise_rir),
        cfg,
    )
    results = harness.speech_rows_to_results(rows, value=cfg.snr_db, seed=cfg.seed)
    harness.write_csv(results, args.out)
    return EXIT_OK


def _cmd_selftest(args):
    from . import selftest

    ok = selftest.run(verbose=True)
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser():
    parser = argparse.ArgumentParser(
        prog="widertf",
        description="Wideband RTF estimation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthetic", help="run a Monte-Carlo parameter sweep")
    p_syn.add_argument("--config", required=True)
    p_syn.add_argument("--out", required=True)
    p_syn.set_defaults(func=_cmd_synthetic)

    p_crb = sub.add_parser("crb", help="compute bound curves only")
    p_crb.add_argument("--config", required=True)
    p_crb.add_argument("--out", required=True)
    p_crb.set_defaults(func=_cmd_crb)

    p_sp = sub.add_parser("speech", help="run the speech RTF experiment")
    p_sp.add_argument("--config", required=True)
    p_sp.add_argument("--target", required=True)
    p_sp.add_argument("--noise", required=True)
    p_sp.add_argument("--target-rir", required=True)
    p_sp.add_argument("--noise-rir", required=True)
    p_sp.add_argument("--out", required=True)
    p_sp.set_defaults(func=_cmd_speech)

    p_st = sub.add_parser("selftest", help="run the invariant battery")
    p_st.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
