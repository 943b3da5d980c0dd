"""Command-line front end.

Subcommands: ``synth``, ``decompose``, ``dfa``, ``denoise`` and
``benchmark``. Every subcommand accepts ``--config FILE`` (JSON); explicit
flags override values from the file, which override built-in defaults.

Exit status: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .denoise import PCA_REFERENCES, SELECTION_VARIANTS, benchmark, denoise, noise_targets
from .dfa import VARIANTS, fluctuation_curve
from .errors import DataError, NumericalError
from .mvmd import INIT_STRATEGIES, MvmdConfig, mvmd_decompose
from .plots import emit_plots, loglog_plot_svg
from .signal import (
    TEST_SIGNALS,
    NoiseSpec,
    add_noise,
    atomic_write_text,
    generate_test_signal,
    load_csv,
    make_mixed_surrogate,
    make_quadrivariate,
    save_csv,
)

__all__ = ["run", "main", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

PROG = "mvdenoise"
SYNTH_KINDS = ("quad", "surrogate") + TEST_SIGNALS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Value parsers. Each accepts either the command-line string or an
# already-typed value from a JSON config file, and returns a canonical form.


def _int(value, name, lo=None):
    if isinstance(value, bool):
        raise UsageError(f"{name}: expected an integer, got {value!r}")
    try:
        v = int(value) if isinstance(value, int) else int(str(value).strip())
    except ValueError:
        raise UsageError(f"{name}: expected an integer, got {value!r}") from None
    if lo is not None and v < lo:
        raise UsageError(f"{name}: must be >= {lo}, got {v}")
    return v


def _float(value, name, positive=False, nonnegative=False):
    if isinstance(value, bool):
        raise UsageError(f"{name}: expected a number, got {value!r}")
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise UsageError(f"{name}: must be finite, got {value!r}")
    if positive and v <= 0:
        raise UsageError(f"{name}: must be positive, got {v:g}")
    if nonnegative and v < 0:
        raise UsageError(f"{name}: must be non-negative, got {v:g}")
    return v


def parse_int_list(value, name="list") -> list[int]:
    """``"a:b"`` (inclusive range), ``"a,b,c"``, a mix such as ``"1,4:6"``,
    or a JSON list of integers."""
    if isinstance(value, (list, tuple)):
        return [_int(v, name) for v in value]
    out = []
    for part in str(value).split(","):
        part = part.strip()
        if ":" in part:
            a, _, b = part.partition(":")
            lo, hi = _int(a, name), _int(b, name)
            if hi < lo:
                raise UsageError(f"{name}: empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(_int(part, name))
    if not out:
        raise UsageError(f"{name}: no values given")
    return out


def parse_scales(value) -> list[int]:
    scales = parse_int_list(value, "scales")
    if len(scales) < 2:
        raise UsageError("scales: need at least 2 scales")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise UsageError("scales: must be strictly increasing")
    if scales[0] < 4:
        raise UsageError(f"scales: smallest scale must be >= 4, got {scales[0]}")
    return scales


def parse_float_list(value, name="list") -> list[float]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [p for p in str(value).split(",") if p.strip()]
    if not items:
        raise UsageError(f"{name}: no values given")
    return [_float(v, name) for v in items]


def _choice(value, name, choices):
    v = str(value)
    if v not in choices:
        raise UsageError(f"{name}: {v!r} is not one of {', '.join(choices)}")
    return v


def _flag(value, name):
    if isinstance(value, bool):
        return value
    raise UsageError(f"{name}: expected true or false, got {value!r}")


def _path(value, name):
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise UsageError(f"{name}: expected a path, got {value!r}")
    return value


# Per-option canonicalizers, keyed by argparse dest.
_MVMD_KEYS = {
    "modes": lambda v: _int(v, "modes", 1),
    "penalty": lambda v: _float(v, "penalty", positive=True),
    "tolerance": lambda v: _float(v, "tolerance", positive=True),
    "max_iterations": lambda v: _int(v, "max-iterations", 1),
    "init": lambda v: _choice(v, "init", INIT_STRATEGIES),
    "dual_step": lambda v: _float(v, "dual-step", nonnegative=True),
    "init_seed": lambda v: _int(v, "init-seed", 0),
}
_COMMON = {
    "input": lambda v: _path(v, "input"),
    "header": lambda v: _flag(v, "header"),
    "scales": parse_scales,
    "order": lambda v: _int(v, "order", 1),
    "plots": lambda v: _path(v, "plots"),
    "echo_config": lambda v: _path(v, "echo-config"),
}
_KEYS = {
    "synth": {
        "kind": lambda v: _choice(v, "kind", SYNTH_KINDS),
        "n": lambda v: _int(v, "n", 16),
        "snr": lambda v: _float(v, "snr"),
        "unbalanced": lambda v: _flag(v, "unbalanced"),
        "seed": lambda v: _int(v, "seed", 0),
        "out": lambda v: _path(v, "out"),
        "clean": lambda v: _path(v, "clean"),
        "echo_config": _COMMON["echo_config"],
    },
    "decompose": {
        "input": _COMMON["input"],
        "header": _COMMON["header"],
        **_MVMD_KEYS,
        "out_dir": lambda v: _path(v, "out-dir"),
        "echo_config": _COMMON["echo_config"],
    },
    "dfa": {
        **_COMMON,
        "variant": lambda v: _choice(v, "variant", VARIANTS),
        "out": lambda v: _path(v, "out"),
    },
    "denoise": {
        **_COMMON,
        **_MVMD_KEYS,
        "clean": lambda v: _path(v, "clean"),
        "variant": lambda v: _choice(v, "variant", SELECTION_VARIANTS),
        "pca_reference": lambda v: _choice(v, "pca-reference", PCA_REFERENCES),
        "out": lambda v: _path(v, "out"),
        "report": lambda v: _path(v, "report"),
    },
    "benchmark": {
        **_MVMD_KEYS,
        "kind": lambda v: _choice(v, "kind", SYNTH_KINDS),
        "n": lambda v: _int(v, "n", 16),
        "snr_grid": lambda v: parse_float_list(v, "snr-grid"),
        "seeds": lambda v: [_int(s, "seeds", 0) for s in parse_int_list(v, "seeds")],
        "unbalanced": lambda v: _flag(v, "unbalanced"),
        "variant": lambda v: _choice(v, "variant", SELECTION_VARIANTS),
        "scales": parse_scales,
        "order": _COMMON["order"],
        "workers": lambda v: _int(v, "workers", 1),
        "out": lambda v: _path(v, "out"),
        "echo_config": _COMMON["echo_config"],
    },
}
_REQUIRED = {
    "synth": ("out",),
    "decompose": ("input", "out_dir"),
    "dfa": ("input",),
    "denoise": ("input", "out"),
    "benchmark": ("out",),
}


# ---------------------------------------------------------------------------
# Parser


def _add_mvmd(p):
    d = MvmdConfig()
    p.add_argument("--modes", default=d.k, help="number of MVMD modes K (default %(default)s)")
    p.add_argument("--penalty", default=d.bandwidth_penalty, help="bandwidth penalty (default %(default)s)")
    p.add_argument("--tolerance", default=d.tolerance, help="relative update tolerance (default %(default)s)")
    p.add_argument("--max-iterations", default=d.max_iterations)
    p.add_argument("--init", default=d.init_strategy, help=f"centre-frequency init: {', '.join(INIT_STRATEGIES)}")
    p.add_argument("--dual-step", default=d.dual_ascent_step, help="dual ascent step (0 disables)")
    p.add_argument("--init-seed", default=d.seed, help="seed for random init")


def _add_io(p, scales=True):
    p.add_argument("--input", help="input CSV, one row per sample")
    p.add_argument("--header", action="store_true", default=False, help="input CSV has a header row")
    if scales:
        p.add_argument("--scales", default="4:16", help="DFA scales, e.g. 4:16 or 4,8,16")
        p.add_argument("--order", default=2, help="detrending polynomial order")
        p.add_argument("--plots", help="directory for SVG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Multichannel denoising with MVMD and Mahalanobis DFA.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    parser.commands = {}

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        parser.commands[name] = p
        p.add_argument("--config", help="JSON file of option values (flags take precedence)")
        p.add_argument("--echo-config", help="write the resolved options as JSON to this path")
        return p

    p = command("synth", "Generate a noisy benchmark signal and its clean reference.")
    p.add_argument("--kind", default="quad", help=f"one of {', '.join(SYNTH_KINDS)}")
    p.add_argument("--n", default=4096, help="number of samples")
    p.add_argument("--snr", default=10.0, help="average input SNR in dB")
    p.add_argument("--unbalanced", action="store_true", default=False,
                   help="spread per-channel SNRs 1 dB apart around the average")
    p.add_argument("--seed", default=0, help="noise seed")
    p.add_argument("--out", help="noisy CSV output")
    p.add_argument("--clean", help="clean CSV output")

    p = command("decompose", "Split a signal into MVMD modes, one CSV per mode.")
    _add_io(p, scales=False)
    _add_mvmd(p)
    p.add_argument("--out-dir", help="directory for mode_XX.csv and modes.json")

    p = command("dfa", "Fluctuation function and scaling exponent of a signal.")
    _add_io(p)
    p.add_argument("--variant", default="mahalanobis", help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--out", help="JSON output for the fluctuation curve")

    p = command("denoise", "Denoise a multichannel signal.")
    _add_io(p)
    _add_mvmd(p)
    p.add_argument("--clean", help="clean reference CSV; enables SNR reporting")
    p.add_argument("--variant", default="mahalanobis", help=f"mode scoring: {', '.join(SELECTION_VARIANTS)}")
    p.add_argument("--pca-reference", default="noise", help=f"PCA threshold reference: {', '.join(PCA_REFERENCES)}")
    p.add_argument("--out", help="denoised CSV output")
    p.add_argument("--report", help="JSON report output")

    p = command("benchmark", "Output SNR over an input-SNR grid and noise seeds.")
    _add_mvmd(p)
    p.add_argument("--kind", default="quad", help=f"clean signal: {', '.join(SYNTH_KINDS)}")
    p.add_argument("--n", default=4096)
    p.add_argument("--snr-grid", default="-2,2,6,10", help="input SNRs in dB; use --snr-grid=-2,2 for negatives")
    p.add_argument("--seeds", default="0:19", help="noise seeds, e.g. 0:19")
    p.add_argument("--unbalanced", action="store_true", default=False)
    p.add_argument("--variant", default="mahalanobis")
    p.add_argument("--scales", default="4:16")
    p.add_argument("--order", default=2)
    p.add_argument("--workers", default=1, help="parallel processes")
    p.add_argument("--out", help="JSON output")
    return parser


def _find_config(argv) -> tuple[str | None, str | None]:
    command = next((a for a in argv if not a.startswith("-")), None)
    path = None
    for i, a in enumerate(argv):
        if a == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config: expected a path")
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    return command, path


def _load_config(path, command) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: config must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    data.pop("command", None)
    unknown = sorted(set(data) - set(_KEYS[command]))
    if unknown:
        raise UsageError(f"{path}: unknown option(s) for {command}: {', '.join(unknown)}")
    return data


def resolve(argv) -> dict:
    """Parse ``argv`` into a canonical option dict (config file merged in)."""
    argv = list(argv)
    command, config_path = _find_config(argv)
    parser = build_parser()
    config = {}
    if command in _KEYS and config_path is not None:
        config = _load_config(config_path, command)
    args = parser.parse_args(argv)
    explicit = vars(args)
    command = explicit.pop("command")
    explicit.pop("config", None)

    # flags beat config; argparse cannot tell an explicit flag equal to its
    # default from the default, so re-parse with defaults suppressed
    given = _explicit_flags(parser, argv, command)
    opts = {}
    for key, canon in _KEYS[command].items():
        if key in given:
            value = explicit[key]
        elif key in config:
            value = config[key]
        else:
            value = explicit[key]
        opts[key] = canon(value)
    for key in _REQUIRED[command]:
        if opts.get(key) is None:
            raise UsageError(f"{command}: --{key.replace('_', '-')} is required")
    return {"command": command, **opts}


def _explicit_flags(parser, argv, command) -> set[str]:
    probe = build_parser()
    for action in probe.commands[command]._actions:
        action.default = argparse.SUPPRESS
    ns = probe.parse_args(argv)
    return set(vars(ns)) - {"command", "config"}


# ---------------------------------------------------------------------------
# Commands


def _mvmd_config(o) -> MvmdConfig:
    return MvmdConfig(
        k=o["modes"],
        bandwidth_penalty=o["penalty"],
        max_iterations=o["max_iterations"],
        tolerance=o["tolerance"],
        init_strategy=o["init"],
        dual_ascent_step=o["dual_step"],
        seed=o["init_seed"],
    )


def _clean_signal(kind, n):
    if kind == "quad":
        return make_quadrivariate(n)
    if kind == "surrogate":
        return make_mixed_surrogate(n)
    return generate_test_signal(kind, n)


def _check_paths(o, inputs=(), outputs=(), dirs=()):
    for key in inputs:
        if o.get(key) is not None and not Path(o[key]).is_file():
            raise DataError(f"{o[key]}: no such file")
    for key in outputs:
        if o.get(key) is not None:
            parent = Path(o[key]).parent
            if not parent.is_dir():
                raise DataError(f"{o[key]}: directory {parent} does not exist")
    for key in dirs:
        if o.get(key) is not None:
            d = Path(o[key])
            if d.exists() and not d.is_dir():
                raise DataError(f"{d}: exists and is not a directory")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _echo(o) -> dict:
    return {k: v for k, v in o.items() if k != "command"}


def _cmd_synth(o, out):
    _check_paths(o, outputs=("out", "clean"))
    clean = _clean_signal(o["kind"], o["n"])
    spec = NoiseSpec(noise_targets(o["snr"], clean.m, not o["unbalanced"]), o["seed"])
    noisy = add_noise(clean, spec)
    save_csv(noisy, o["out"])
    if o["clean"]:
        save_csv(clean, o["clean"])
    out.write(f"wrote {o['out']} ({clean.n} x {clean.m}, target SNR {', '.join(f'{v:g}' for v in spec.per_channel_snr_db)} dB)\n")


def _cmd_decompose(o, out):
    _check_paths(o, inputs=("input",), dirs=("out_dir",))
    x = load_csv(o["input"], o["header"])
    blimfs = mvmd_decompose(x, _mvmd_config(o))
    if not np.all(np.isfinite(blimfs.modes)):
        raise NumericalError("decomposition produced non-finite values")
    d = Path(o["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    width = max(2, len(str(blimfs.k)))
    for k in range(1, blimfs.k + 1):
        save_csv(blimfs.mode(k), d / f"mode_{k:0{width}d}.csv")
    summary = {
        "center_frequencies": [float(w) for w in blimfs.center_frequencies],
        "iterations_used": blimfs.iterations_used,
        "converged": blimfs.converged,
        "config": _echo(o),
    }
    atomic_write_text(d / "modes.json", _dumps(summary))
    out.write(f"wrote {blimfs.k} modes to {d} ({blimfs.iterations_used} iterations, "
              f"{'converged' if blimfs.converged else 'not converged'})\n")


def _cmd_dfa(o, out):
    _check_paths(o, inputs=("input",), outputs=("out",), dirs=("plots",))
    x = load_csv(o["input"], o["header"])
    curve = fluctuation_curve(x, o["scales"], o["variant"], o["order"])
    if o["out"]:
        atomic_write_text(o["out"], _dumps({**curve.to_dict(), "config": _echo(o)}))
    if o["plots"]:
        d = Path(o["plots"])
        d.mkdir(parents=True, exist_ok=True)
        atomic_write_text(d / "loglog_fluctuation.svg", loglog_plot_svg([curve]))
    out.write(f"alpha = {curve.alpha:.6f} ({o['variant']}, scales {o['scales'][0]}..{o['scales'][-1]})\n")


def _cmd_denoise(o, out):
    _check_paths(o, inputs=("input", "clean"), outputs=("out", "report"), dirs=("plots",))
    noisy = load_csv(o["input"], o["header"])
    clean = load_csv(o["clean"], o["header"]) if o["clean"] else None
    if clean is not None and clean.shape != noisy.shape:
        raise DataError(f"clean reference shape {clean.shape} does not match input {noisy.shape}")
    if o["scales"][-1] > noisy.n / 4:
        raise DataError(f"largest scale {o['scales'][-1]} exceeds N/4 = {noisy.n / 4:g}")
    estimate, report = denoise(noisy, _mvmd_config(o), o["scales"], o["variant"],
                               clean=clean, order=o["order"], pca_reference=o["pca_reference"])
    if not np.all(np.isfinite(estimate.samples)):
        raise NumericalError("denoised estimate contains non-finite values")
    data = report.to_dict()
    data["config"] = {**data["config"], "cli": _echo(o)}
    text = _dumps(data)
    save_csv(estimate, o["out"])
    if o["report"]:
        atomic_write_text(o["report"], text)
    if o["plots"]:
        emit_plots(report, report.mode_scores.curves, o["plots"])
    line = f"k1 = {report.k1} of {len(report.mode_scores.alphas)} modes"
    if report.output_snr is not None:
        line += f", SNR {report.input_snr.average_db:.2f} dB -> {report.output_snr.average_db:.2f} dB"
    out.write(line + "\n")


def _cmd_benchmark(o, out):
    _check_paths(o, outputs=("out",))
    clean = _clean_signal(o["kind"], o["n"])
    result = benchmark(clean, o["snr_grid"], o["seeds"], balanced=not o["unbalanced"],
                       variant=o["variant"], mvmd_config=_mvmd_config(o), scales=o["scales"],
                       workers=o["workers"])
    data = {**result.to_dict(), "config": _echo(o)}
    atomic_write_text(o["out"], _dumps(data))
    out.write("input_db  mean_in  mean_out  mean_k1  runs\n")
    for row in result.summary():
        out.write(f"{row['input_snr_db']:8.2f}  {row['mean_input_db']:7.2f}  {row['mean_output_db']:8.2f}"
                  f"  {row['mean_k1']:7.2f}  {row['runs']:4d}\n")


_COMMANDS = {
    "synth": _cmd_synth,
    "decompose": _cmd_decompose,
    "dfa": _cmd_dfa,
    "denoise": _cmd_denoise,
    "benchmark": _cmd_benchmark,
}


def run(argv, stdout=None, stderr=None) -> int:
    """Run one CLI invocation and return its exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        opts = resolve(argv)
        if opts.get("echo_config"):
            _check_paths(opts, outputs=("echo_config",))
        _COMMANDS[opts["command"]](opts, stdout)
        if opts.get("echo_config"):
            atomic_write_text(opts["echo_config"], _dumps(_echo(opts)))
        return EXIT_OK
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        stderr.write(f"{PROG}: usage error: {exc}\n")
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        stderr.write(f"{PROG}: data error: {exc}\n")
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        stderr.write(f"{PROG}: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        stderr.write(f"{PROG}: internal error: {type(exc).__name__}: {exc}\n")
        return 1


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)
