"""Command line entry point ``lab``.

Exit codes: 0 every check passed, 1 an experiment's assertion failed,
2 configuration (or fixture) error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from .errors import ConfigError, NumericalFailure
from .experiments import PRESETS, REGISTRY, ExperimentResult

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
SEED_ENV = "LAB_SEED"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return _jsonable(v.item())
    return v


def read_config(path) -> tuple[str, int | None, dict, dict]:
    """(experiment name, seed or None, [params], per-preset sections) from an INI file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if not parser.has_section("experiment") or "name" not in parser["experiment"]:
        raise ConfigError("config needs an [experiment] section with a name")
    sec = parser["experiment"]
    unknown = set(sec) - {"name", "seed"}
    if unknown:
        raise ConfigError(f"unknown keys in [experiment]: {', '.join(sorted(unknown))}")
    seed = None
    if "seed" in sec:
        try:
            seed = int(sec["seed"])
        except ValueError:
            raise ConfigError(f"seed must be an integer, got {sec['seed']!r}") from None
    extra = set(parser.sections()) - {"experiment", "params", *PRESETS}
    if extra:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(extra))}")
    params = dict(parser["params"]) if parser.has_section("params") else {}
    presets = {p: dict(parser[p]) for p in PRESETS if parser.has_section(p)}
    return sec["name"].strip().upper(), seed, params, presets


def resolve_seed(config_seed: int | None) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is not None and raw.strip():
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
    if config_seed is not None:
        return config_seed
    from .fixtures import fixture

    return int(fixture("default_seed"))


def render_json(result: ExperimentResult, preset: str, seed: int, params: dict) -> str:
    doc = {
        "experiment": result.name,
        "preset": preset,
        "seed": seed,
        "params": params,
        "summary": result.summary,
        "pass": bool(result.passed),
    }
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.header)
    for row in result.rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in _jsonable(row)])
    return buf.getvalue()


def _file_mode() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


def write_atomic(files: dict[Path, str]) -> None:
    """Write every file to a temporary sibling first, then rename them all into place."""
    staged = []
    mode = _file_mode()
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.chmod(tmp, mode)
        for tmp, path in staged:
            os.replace(tmp, path)
        staged = []
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def run_config(config, preset: str = "smoke", jobs: int = 1, out=None) -> tuple[int, dict[Path, str]]:
    """Run one config; returns the exit code and the files written."""
    from .fixtures import require_fixtures

    require_fixtures()
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    name, config_seed, params_raw, presets = read_config(config)
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; see 'lab list'")
    exp = REGISTRY[name]
    overrides = dict(params_raw)
    overrides.update(presets.get(preset, {}))
    params = exp.params(preset, overrides)
    seed = resolve_seed(config_seed)
    result = exp.runner(params, seed, jobs)
    out_dir = Path(out) if out is not None else Path("results")
    stem = Path(config).stem
    files = {
        out_dir / f"{stem}.json": render_json(result, preset, seed, params),
        out_dir / f"{stem}.csv": render_csv(result),
    }
    write_atomic(files)
    return (EXIT_OK if result.passed else EXIT_ASSERTION), files


def _cmd_run(args) -> int:
    code, files = run_config(args.config, args.preset, args.jobs, args.out)
    status = "PASS" if code == EXIT_OK else "FAIL"
    print(f"{status} {args.config}")
    for path in files:
        print(f"  wrote {path}")
    return code


def _cmd_list(args) -> int:
    for name in sorted(REGISTRY):
        print(f"{name:20s} {REGISTRY[name].description}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .fixtures import verify_fixtures

    ok, message = verify_fixtures(args.path)
    print(message)
    return EXIT_OK if ok else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Laguerre spectral experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("--preset", choices=PRESETS, default="smoke")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", default=None, help="output directory (default ./results)")
    run.set_defaults(func=_cmd_run)
    ls = sub.add_parser("list", help="list registered experiments")
    ls.set_defaults(func=_cmd_list)
    ver = sub.add_parser("verify-fixtures", help="check the calibration fixture file")
    ver.add_argument("--path", default=None)
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # domain errors raised by library constructors stem from the inputs
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
