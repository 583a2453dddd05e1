"""Command-line front end: config parsing, dispatch, deterministic output.

Configurations live in plain `key = value` text files; the run manifest
written next to the results uses the same format, so a manifest can be
fed back as a config and reproduces the run exactly.  Numeric series go
to CSV with 12 significant digits and a stable column order; every file
is written to a temporary name and atomically renamed, so a failed run
never leaves a partial file behind.
"""

import argparse
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import ConfigError, SpinBathError
from .scenarios import SCENARIOS, make_config, run_scenario

__all__ = ["parse_config", "emit_series", "emit_result", "main"]


def _float_list(text):
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(x) for x in items)


# config key -> (RunConfig field, converter)
_CONFIG_KEYS = {
    "scenario": ("scenario", str),
    "n": ("n", int),
    "lambda": ("lambdas", _float_list),
    "kt": ("kts", _float_list),
    "m": ("m", int),
    "seed": ("seed", int),
    "dist": ("dist", str),
    "omega_c": ("omega_c", float),
    "omega0": ("omega0", float),
    "beta": ("beta", float),
    "lambda0": ("lambda0", float),
    "tmax": ("tmax", float),
    "dt_out": ("dt_out", float),
    "rel_tol": ("rel_tol", float),
    "abs_tol": ("abs_tol", float),
    "propagator": ("propagator", str),
}

# manifest-only diagnostic keys, accepted and ignored when re-parsed
_DIAGNOSTIC_KEYS = {
    "truncation_bound", "ratio_r", "max_norm_drift", "max_energy_drift",
    "solver_method", "code_version", "notes",
}

NORM_DRIFT_BOUND = 1e-8
TRUNCATION_BOUND = 1e-4


def _read_key_values(path):
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            pairs[key] = value
    return pairs


def parse_config(path=None, overrides=None):
    """Build a validated RunConfig from a config file and/or flag overrides.

    Unknown keys are rejected by name; manifest diagnostic keys are
    recognized and skipped, so re-parsing an emitted manifest reproduces
    the original configuration.
    """
    raw = {}
    if path is not None:
        raw.update(_read_key_values(path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    values = {}
    for key, value in raw.items():
        if key in _DIAGNOSTIC_KEYS:
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        name, convert = _CONFIG_KEYS[key]
        try:
            values[name] = convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc

    if "scenario" not in values:
        raise ConfigError(
            "missing required key 'scenario' "
            f"(one of: {', '.join(sorted(SCENARIOS))})"
        )
    if "n" not in values:
        raise ConfigError("missing required key 'n' (bath size)")
    scenario = values.pop("scenario")
    n = values.pop("n")
    return make_config(scenario, n, **values)


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _atomic_write(path, text):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _token(x):
    return format(float(x), ".6g")


def emit_series(series, directory):
    """Write one trajectory series as CSV; returns the file path."""
    scenario = series.metadata.get("scenario", "run")
    lam = series.metadata.get("lambda", 0.0)
    kt = series.metadata.get("kT", 0.0)
    path = os.path.join(
        directory, f"{scenario}_lam{_token(lam)}_kt{_token(kt)}.csv"
    )
    rows = np.column_stack([
        series.times,
        series.polarization,
        series.entropy,
        series.interaction,
    ])
    _atomic_write(path, _csv_text(["t", "Px", "Py", "Pz", "S0", "HI_avg"], rows))
    return path


def _emit_spectrum(scenario, spectrum_entry, directory):
    lam = spectrum_entry["lambda"]
    path = os.path.join(directory, f"{scenario}_lam{_token(lam)}_spectrum.csv")
    energies = spectrum_entry["energies"]
    sx = spectrum_entry["sigma_x"]
    rows = [(i + 1, energies[i], sx[i]) for i in range(len(energies))]
    _atomic_write(path, _csv_text(["n", "E_n", "sigma_x_expect"], rows))
    return path


def _emit_summary(result, directory):
    path = os.path.join(directory, f"{result.config.scenario}_summary.csv")
    header = ["lambda", "kT", "S0_late_avg", "Pz_late_avg", "HI_time_avg",
              "avg_sigma_x", "beta_prime", "flatness"]
    rows = [[row[h] for h in header] for row in result.summary]
    _atomic_write(path, _csv_text(header, rows))
    return path


def _manifest_value(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)  # exact round trip
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, list):
        return "; ".join(str(x) for x in value)
    return str(value)


def _emit_manifest(result, directory):
    cfg = result.config
    diag = result.diagnostics
    ordered = [
        ("scenario", cfg.scenario), ("n", cfg.n), ("lambda", cfg.lambdas),
        ("kt", cfg.kts), ("m", cfg.m), ("seed", cfg.seed), ("dist", cfg.dist),
        ("omega_c", cfg.omega_c), ("omega0", cfg.omega0), ("beta", cfg.beta),
        ("lambda0", cfg.lambda0), ("tmax", cfg.tmax), ("dt_out", cfg.dt_out),
        ("rel_tol", cfg.rel_tol), ("abs_tol", cfg.abs_tol),
        ("propagator", cfg.propagator),
        ("truncation_bound", diag.get("truncation_bound")),
        ("ratio_r", diag.get("ratio_r")),
        ("max_norm_drift", diag.get("max_norm_drift")),
        ("max_energy_drift", diag.get("max_energy_drift")),
        ("solver_method", diag.get("solver_method")),
        ("code_version", __version__),
        ("notes", diag.get("notes") or []),
    ]
    text = "".join(f"{k} = {_manifest_value(v)}\n" for k, v in ordered)
    path = os.path.join(directory, f"{cfg.scenario}_manifest.txt")
    _atomic_write(path, text)
    return path


def emit_result(result, directory):
    """Write every output of a scenario run; returns the file paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for series in result.series:
        series.metadata.setdefault("scenario", result.config.scenario)
        paths.append(emit_series(series, directory))
    for entry in result.spectra:
        paths.append(_emit_spectrum(result.config.scenario, entry, directory))
    paths.append(_emit_summary(result, directory))
    paths.append(_emit_manifest(result, directory))
    return paths


def _check_diagnostics(diag):
    """Machine-readable reason when a run finished outside its bounds."""
    if diag.get("max_norm_drift", 0.0) > NORM_DRIFT_BOUND:
        return f"norm_drift_exceeded value={diag['max_norm_drift']:.3e}"
    bound = diag.get("truncation_bound")
    if bound is not None and bound > TRUNCATION_BOUND:
        return f"truncation_bound_exceeded value={bound:.3e}"
    return None


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="spinbath",
        description="Central spin in a self-interacting spin bath: "
                    "decoherence scenarios with certified numerics.",
    )
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--scenario", choices=sorted(SCENARIOS), help="scenario name")
    parser.add_argument("--n", help="number of bath spins")
    parser.add_argument("--lambda", dest="lambda_", metavar="LIST",
                        help="comma separated intra-bath couplings")
    parser.add_argument("--kt", metavar="LIST", help="comma separated temperatures")
    parser.add_argument("--m", help="retained bath eigenstates (default 20)")
    parser.add_argument("--seed", help="64-bit RNG seed")
    parser.add_argument("--dist", choices=["debye", "box"], help="frequency density")
    parser.add_argument("--tmax", help="end of the time grid")
    parser.add_argument("--dt-out", dest="dt_out", help="output grid spacing")
    parser.add_argument("--out", default="out", help="output directory")
    args = parser.parse_args(argv)

    overrides = {
        "scenario": args.scenario,
        "n": args.n,
        "lambda": args.lambda_,
        "kt": args.kt,
        "m": args.m,
        "seed": args.seed,
        "dist": args.dist,
        "tmax": args.tmax,
        "dt_out": args.dt_out,
    }
    try:
        config = parse_config(args.config, overrides)
        result = run_scenario(config)
        paths = emit_result(result, args.out)
    except SpinBathError as exc:
        print(f"failure_reason={type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"failure_reason=IOError: {exc}", file=sys.stderr)
        return 1

    reason = _check_diagnostics(result.diagnostics)
    if reason is not None:
        print(f"failure_reason={reason}", file=sys.stderr)
        return 1
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
