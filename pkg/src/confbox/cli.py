"""Command-line interface.

Subcommands: encode, decode, sweep, train, verify. Parameter precedence is
flags over config-file values over built-in defaults; config files are
flat JSON objects whose keys match the flag names (with underscores), and
unknown keys are rejected.

Exit codes: 0 success, 1 config error, 2 domain/range error, 3 training
divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import distortion, toytrain, verify
from .errors import ConfigError, DivergenceError, DomainError
from .grid import (
    ConfidenceDistribution,
    GridSpec,
    quantize,
    restore_full_band,
    restore_top2,
)

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DOMAIN = 2
EXIT_DIVERGED = 3
EXIT_VERIFY_FAILED = 4

_GRID_DEFAULTS = {"alpha": 2.0, "n": 10, "mode": "uniform", "in_beta": 1.0}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code contract."""

    def error(self, message):
        raise ConfigError(message)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return data


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Apply precedence: built-in defaults < config file < explicit flags."""
    values = dict(defaults)
    if getattr(args, "config", None):
        data = _load_config_file(args.config)
        unknown = set(data) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key, value in data.items():
            if isinstance(defaults[key], tuple) and isinstance(value, list):
                value = tuple(float(v) for v in value)
            values[key] = value
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _grid_from(values: dict) -> GridSpec:
    return GridSpec.from_dict(
        {
            "alpha": values["alpha"],
            "n": values["n"],
            "mode": values["mode"],
            "in_beta": values["in_beta"],
        }
    )


def _print_json(payload: dict) -> None:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        return v

    print(json.dumps({k: clean(v) for k, v in payload.items()}, separators=(",", ":")))


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="regression range bound (grid spans [-alpha, alpha])")
    parser.add_argument("--n", type=int, help="grid count parameter (n+1 grid points)")
    parser.add_argument("--mode", choices=["uniform", "in", "interval-non-uniform"], help="grid mode")
    parser.add_argument("--in-beta", dest="in_beta", type=float, help="density factor for IN mode")


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")


def cmd_encode(args: argparse.Namespace) -> int:
    values = _merge(args, {**_GRID_DEFAULTS, "target": None})
    if values["target"] is None:
        raise ConfigError("encode requires a --target value")
    label = quantize(_grid_from(values), float(values["target"]))
    _print_json(
        {
            "i_left": label.i_left,
            "i_right": label.i_right,
            "p_left": label.p_left,
            "p_right": label.p_right,
        }
    )
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    values = _merge(args, {**_GRID_DEFAULTS, "logits": None, "probs": None, "method": "full"})
    spec = _grid_from(values)
    if (values["logits"] is None) == (values["probs"] is None):
        raise ConfigError("decode requires exactly one of --logits or --probs")
    if values["method"] not in ("full", "top2"):
        raise ConfigError(f"method must be 'full' or 'top2', got {values['method']!r}")
    if values["logits"] is not None:
        raw = tuple(float(v) for v in values["logits"])
        if len(raw) != spec.num_points:
            raise ConfigError(f"expected {spec.num_points} logits, got {len(raw)}")
        dist = ConfidenceDistribution.from_logits(raw)
    else:
        raw = tuple(float(v) for v in values["probs"])
        if len(raw) != spec.num_points:
            raise ConfigError(f"expected {spec.num_points} probabilities, got {len(raw)}")
        if any(p < 0 for p in raw) or abs(sum(raw) - 1.0) > 1e-6:
            raise ConfigError("probabilities must be non-negative and sum to 1")
        dist = raw
    restore = restore_full_band if values["method"] == "full" else restore_top2
    _print_json({"value": restore(spec, dist), "method": values["method"]})
    return EXIT_OK


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_sweep(args: argparse.Namespace) -> int:
    defaults = {
        "kind": "iou",
        "gt_side": 64.0,
        "ratios": (1.0, 0.75, 0.5, 0.25),
        "shift_samples": 257,
        "shift_max_fraction": 0.9,
        "widths": (8.0, 32.0, 128.0),
        "errors": (4.0,),
        "out": "-",
    }
    values = _merge(args, defaults)
    if values["kind"] not in ("iou", "norm", "both"):
        raise ConfigError(f"kind must be iou, norm, or both, got {values['kind']!r}")
    records = []
    if values["kind"] in ("iou", "both"):
        config = distortion.SweepConfig(
            gt_side=float(values["gt_side"]),
            scale_ratios=tuple(values["ratios"]),
            shift_samples=int(values["shift_samples"]),
            shift_max_fraction=float(values["shift_max_fraction"]),
        )
        records.extend(distortion.sweep_iou(config))
    if values["kind"] in ("norm", "both"):
        records.extend(distortion.sweep_norm_gradients(values["widths"], values["errors"]))
    stream, close = _open_out(values["out"])
    try:
        distortion.write_records_csv(records, stream)
    finally:
        if close:
            stream.close()
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    defaults = {
        **_GRID_DEFAULTS,
        "mode": "in",
        "head": "cbbl",
        "um_weight": 1.0,
        "lr": None,
        "epochs": 50,
        "batch_size": 16,
        "seed": 0,
        "count_per_bucket": 100,
        "image_size": 512.0,
        "out": "-",
    }
    values = _merge(args, defaults)
    config = toytrain.TrainConfig(
        head=values["head"],
        grid=_grid_from(values),
        um_weight=float(values["um_weight"]),
        learning_rate=None if values["lr"] is None else float(values["lr"]),
        epochs=int(values["epochs"]),
        batch_size=int(values["batch_size"]),
        seed=int(values["seed"]),
    )
    scene = toytrain.generate_scene(
        seed=config.seed,
        count_per_bucket=int(values["count_per_bucket"]),
        image_size=float(values["image_size"]),
    )
    reports = toytrain.train(scene, config)
    stream, close = _open_out(values["out"])
    try:
        toytrain.write_reports_csv(reports, stream)
    finally:
        if close:
            stream.close()
    _print_json(toytrain.final_iou_summary(reports))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    values = _merge(args, {"seed": 0, "samples": 1000, "inject_fault": False})
    results = verify.run_all_checks(
        seed=int(values["seed"]),
        samples=int(values["samples"]),
        inject_fault=bool(values["inject_fault"]),
    )
    print(verify.format_results(results))
    failing = [r.name for r in results if not r.passed]
    if failing:
        print(f"failing checks: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confbox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[], help="quantize a continuous target into a two-hot label")
    _add_grid_flags(p)
    _add_config_flag(p)
    p.add_argument("--target", type=float, help="continuous target in [-alpha, alpha]")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="restore a continuous value from a confidence distribution")
    _add_grid_flags(p)
    _add_config_flag(p)
    p.add_argument("--logits", type=_float_list, help="comma-separated logits (length n+1)")
    p.add_argument("--probs", type=_float_list, help="comma-separated probabilities (length n+1)")
    p.add_argument("--method", choices=["full", "top2"], help="restoration method (default full)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="emit gradient-distortion sweep curves as CSV")
    _add_config_flag(p)
    p.add_argument("--kind", choices=["iou", "norm", "both"], help="which sweep(s) to run (default iou)")
    p.add_argument("--gt-side", dest="gt_side", type=float, help="reference square side in pixels")
    p.add_argument("--ratios", type=_float_list, help="comma-separated object scale ratios in (0, 1]")
    p.add_argument("--shift-samples", dest="shift_samples", type=int, help="number of shift samples")
    p.add_argument(
        "--shift-max-fraction",
        dest="shift_max_fraction",
        type=float,
        help="max shift as a fraction of the scaled side (must be < 1)",
    )
    p.add_argument("--widths", type=_float_list, help="anchor widths for the norm sweep")
    p.add_argument("--errors", type=_float_list, help="pixel errors for the norm sweep")
    p.add_argument("--out", help="output CSV path, or - for stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="train the synthetic benchmark and emit epoch reports")
    _add_grid_flags(p)
    _add_config_flag(p)
    p.add_argument("--head", help="loss head: cbbl, smooth-l1, or l2")
    p.add_argument("--um-weight", dest="um_weight", type=float, help="weight of the uncertainty loss")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--epochs", type=int, help="number of epochs")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="mini-batch size")
    p.add_argument("--seed", type=int, help="scene/run seed")
    p.add_argument(
        "--count-per-bucket", dest="count_per_bucket", type=int, help="samples per scale bucket"
    )
    p.add_argument("--image-size", dest="image_size", type=float, help="synthetic image side in pixels")
    p.add_argument("--out", help="epoch-report CSV path, or - for stdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    _add_config_flag(p)
    p.add_argument("--seed", type=int, help="seed for randomized checks")
    p.add_argument("--samples", type=int, help="sample count per randomized check")
    p.add_argument(
        "--inject-fault",
        dest="inject_fault",
        action="store_const",
        const=True,
        help="force one failing check (error-path testing hook)",
    )
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except DivergenceError as exc:
        last = exc.epoch - 1
        note = f"last finite epoch {last}" if last >= 0 else "diverged before completing epoch 0"
        print(f"error: training diverged at epoch {exc.epoch} ({note})", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
