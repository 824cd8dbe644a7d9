"""Command-line front end: ``train``, ``eval``, ``plot-gait`` and ``inspect``.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
runtime faults (unreadable checkpoints, simulator faults, I/O errors).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .gait import LEG_NAMES, GaitSpec, classify_gait, duty_factor, named_gait, stride_period
from .plots import (
    FootfallDiagram,
    coefficient_curves_svg,
    read_trace,
    trace_footfall,
    trace_overlay_svg,
    write_text,
)
from .symmetry import DEFAULT_KAPPA, expected_indicators, morphological_pairs

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def _offsets(text: str) -> GaitSpec:
    try:
        return GaitSpec.from_offsets([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad --offsets {text!r}: {exc}") from None


def _gait_from_args(args, fallback: GaitSpec | None = None) -> GaitSpec:
    if getattr(args, "offsets", None):
        return _offsets(args.offsets)
    if getattr(args, "gait", None):
        try:
            return named_gait(args.gait)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if fallback is None:
        raise UsageError("give --gait or --offsets")
    return fallback


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.load(path)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None


# -- commands -----------------------------------------------------------------

def cmd_train(args) -> int:
    from .rl.train import train

    cfg = _load_config(args.config)
    run = cfg.run
    changes = {}
    if args.output is not None:
        changes["output_dir"] = args.output
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.total_steps is not None:
        changes["total_steps"] = args.total_steps
    if changes:
        run = dataclasses.replace(run, **changes)
    gait = cfg.gait
    if args.offsets or args.gait:
        spec = _gait_from_args(args)
        gait = dataclasses.replace(gait, offsets=(spec.theta_lh, spec.theta_lf, spec.theta_rf))
    cfg = dataclasses.replace(cfg, run=run, gait=gait)
    try:
        train_cfg = cfg.train_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(run.output_dir)
    cfg.save(out / "config.ini")
    result = train(train_cfg, output_dir=out, progress=not args.quiet)
    final = result.final_episodes()
    print(json.dumps({"output_dir": str(out), **final}, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .rl.checkpoint import load_checkpoint
    from .rl.evaluate import VelocitySchedule, evaluate

    cfg = _load_config(args.config)
    expect = cfg.network if args.config is not None else None
    model, meta = load_checkpoint(args.checkpoint, expect=expect)
    fallback = GaitSpec.from_offsets(meta["offsets"]) if "offsets" in meta else None
    spec = _gait_from_args(args, fallback)
    try:
        schedule = VelocitySchedule.parse(args.schedule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    episode = cfg.episode_config()
    overrides = {k: meta[k] for k in ("action_scale", "kappa", "control_dt", "substeps") if k in meta}
    if args.config is None:
        episode = dataclasses.replace(episode, **overrides)
    episode = dataclasses.replace(episode, gait=spec)
    if args.periods is not None:
        duration = args.periods * float(stride_period(schedule(0.0, 1.0)))
    else:
        duration = args.duration
    if not duration > 0.0:
        raise UsageError("duration must be positive")
    result = evaluate(model, episode, schedule, duration, seed=args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write(out)
    summary = result.summary()
    write_text(out.with_suffix(".summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_RUNTIME if result.fault else EXIT_OK


def cmd_plot_gait(args) -> int:
    out = Path(args.output)
    if args.trace:
        try:
            trace = read_trace(args.trace)
            diagram = trace_footfall(trace)
        except ValueError as exc:
            print(f"error: malformed trace: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        write_text(out, diagram.to_svg(f"measured footfalls: {Path(args.trace).name}"))
        overlay = out.with_name(out.stem + "_overlay.svg")
        write_text(overlay, trace_overlay_svg(trace, "GRF and foot speed against E[I]"))
        print(f"wrote {out} and {overlay}")
    else:
        spec = _gait_from_args(args)
        duty = float(duty_factor(args.v_cmd))
        diagram = FootfallDiagram.from_spec(spec, duty, strides=args.strides, forward=args.v_cmd >= 0.0)
        family = classify_gait(spec).value
        write_text(out, diagram.to_svg(f"{family} footfalls, duty {duty:.3f}"))
        print(f"wrote {out}")
        if args.coefficients:
            curves = out.with_name(out.stem + "_coefficients.svg")
            write_text(curves, coefficient_curves_svg(duty, args.kappa))
            print(f"wrote {curves}")
    fractions = " ".join(f"{leg}={f:.3f}" for leg, f in zip(LEG_NAMES, diagram.stance_fractions()))
    print(f"stance fractions: {fractions}")
    return EXIT_OK


def inspect_table(spec: GaitSpec, v_cmd: float, kappa: float, samples: int = 10) -> str:
    """Stride timing, family, active pairs and sampled E[I] per leg."""
    period, duty = float(stride_period(v_cmd)), float(duty_factor(v_cmd))
    group = morphological_pairs(spec)
    pairs = ", ".join(str(p) for p in sorted(group.active_pairs)) or "none"
    lines = [
        f"offsets (LH, LF, RF, RH): {', '.join(f'{x:g}' for x in spec.offsets)}",
        f"v_cmd: {v_cmd:g} m/s  kappa: {kappa:g}",
        f"period T: {period:.6g} s",
        f"duty beta: {duty:.6g}",
        f"family: {classify_gait(spec).value}",
        f"active pairs: {pairs}",
        "",
        "t/T    " + "  ".join(f"{leg}:swing {leg}:stance" for leg in LEG_NAMES),
    ]
    from .gait import cycle_phase

    for k in range(samples):
        s = k / samples
        phi = cycle_phase(s, spec.offsets, v_cmd >= 0.0)
        swing, stance = expected_indicators(phi, duty, kappa)
        cells = "  ".join(f"{a:9.6f} {b:10.6f}" for a, b in zip(swing, stance))
        lines.append(f"{s:5.3f}  {cells}")
    return "\n".join(lines)


def cmd_inspect(args) -> int:
    spec = _gait_from_args(args)
    print(inspect_table(spec, args.v_cmd, args.kappa, args.samples))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _add_gait(p) -> None:
    p.add_argument("--gait", help="trot, bound, halfbound, gallop or pronk")
    p.add_argument("--offsets", help="explicit phase offsets theta_LH,theta_LF,theta_RF")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="symgait", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train one policy for one phase set")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--output", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--total-steps", type=int)
    p.add_argument("--quiet", action="store_true")
    _add_gait(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="deterministic rollout of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="run configuration (morphology, env, network)")
    _add_gait(p)
    p.add_argument("--schedule", default="0.2",
                   help="v_cmd schedule: 0.3, ramp:0.2:0.45 or steps:0.2@0,0.4@2.5")
    p.add_argument("--duration", type=float, default=5.0, help="seconds")
    p.add_argument("--periods", type=float, help="duration in stride periods of the initial command")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="trace.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot-gait", help="footfall diagram from a gait or a trace")
    _add_gait(p)
    p.add_argument("--trace", help="trace CSV written by eval")
    p.add_argument("--v-cmd", type=float, default=0.0)
    p.add_argument("--strides", type=int, default=2)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--coefficients", action="store_true", help="also write the E[I] curves")
    p.add_argument("--output", default="footfall.svg")
    p.set_defaults(func=cmd_plot_gait)

    p = sub.add_parser("inspect", help="print stride timing, pairs and E[I] samples")
    _add_gait(p)
    p.add_argument("--v-cmd", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--samples", type=int, default=10)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("symgait: choose a command (train, eval, plot-gait, inspect)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report every runtime fault the same way
        from .rl.checkpoint import CheckpointError

        kind = "checkpoint" if isinstance(exc, CheckpointError) else type(exc).__name__
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
