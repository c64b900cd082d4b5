"""Command-line entry points: run, eval, serve, kernels."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

import yaml

from . import fusion, metrics
from .controller import ControllerConfig
from .geometry import ConstraintKind
from .runner import run_task
from .saliency import save_mask
from .simulator import SimSession, bundled_scenario_names, load_bundled_scenario, load_scenario
from .trace import attempt_session_seed, write_jsonl, write_summary


def _resolve_scenario(ref: str):
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in bundled_scenario_names():
        return load_bundled_scenario(ref)
    raise FileNotFoundError(
        f"scenario not found: {ref!r} is neither a file nor one of "
        f"{', '.join(bundled_scenario_names())}"
    )


def _config_from_args(args) -> ControllerConfig:
    overrides = {}
    for field in ("gain", "damping", "max_step", "fd_delta", "converge_eps",
                  "max_iters", "max_attempts"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    return ControllerConfig(**overrides)


def _save_debug_masks(trace, scenario, out_dir: Path) -> int:
    """Re-render every recorded step and dump its masks as PGM files."""
    mask_dir = out_dir / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for attempt in trace.attempts:
        session = SimSession(scenario, seed=attempt_session_seed(trace.seed, attempt.index))
        for stage_trace, stage_plan in zip(attempt.stages, scenario.stages):
            for record in stage_trace.records:
                frame = session.set_q(np.asarray(record.q))
                for prompt, mask in frame.masks.items():
                    slug = prompt.replace(" ", "_")
                    name = f"a{attempt.index}_{stage_trace.name}_s{record.step:04d}_{slug}.pgm"
                    save_mask(mask, mask_dir / name)
                    count += 1
            ok = stage_trace.status == "converged" and stage_trace.predicate_ok
            if ok and not session.finished:
                session.advance_stage()
            else:
                break
    return count


def _load_kind_overrides(path: str, scenario) -> dict:
    """Constraint file: a YAML mapping of stage name to kind codes."""
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("constraints file must map stage names to kind lists")
    codes = {k.value: k for k in ConstraintKind}
    stage_names = {s.name for s in scenario.stages}
    overrides = {}
    for stage_name, kind_list in doc.items():
        if stage_name not in stage_names:
            raise ValueError(f"constraints file names unknown stage {stage_name!r}")
        if not isinstance(kind_list, list) or not kind_list:
            raise ValueError(f"stage {stage_name!r} needs a nonempty kind list")
        try:
            overrides[stage_name] = tuple(codes[c] for c in kind_list)
        except KeyError as exc:
            raise ValueError(f"unknown constraint kind {exc} in stage {stage_name!r}") from exc
    return overrides


def cmd_run(args) -> int:
    try:
        scenario = _resolve_scenario(args.scenario)
        cfg = _config_from_args(args)
        overrides = (_load_kind_overrides(args.constraints, scenario)
                     if args.constraints else None)
    except (FileNotFoundError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    trace = run_task(scenario, seed=args.seed, cfg=cfg,
                     kind_overrides=overrides, propose=args.propose)

    out_dir = Path(args.out) if args.out else Path(f"runs/{scenario.name}-seed{args.seed}")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(trace, out_dir / "trace.jsonl")
    write_summary(trace, out_dir / "summary.json")
    if args.save_masks:
        n = _save_debug_masks(trace, scenario, out_dir)
        print(f"wrote {n} debug masks to {out_dir / 'masks'}")

    print(f"scenario: {scenario.name}  seed: {args.seed}")
    for attempt in trace.attempts:
        stage_bits = ", ".join(
            f"{s.name}: {s.status} ({s.steps_taken} steps, "
            f"final |e| = {s.final_error_norm:.3f})"
            for s in attempt.stages
        )
        print(f"attempt {attempt.index}: {attempt.status}  [{stage_bits}]")
    print(f"success rate: {trace.success_rate:.0f}%")
    print(f"artifacts: {out_dir / 'trace.jsonl'}, {out_dir / 'summary.json'}")
    return 0


def cmd_eval(args) -> int:
    try:
        report = metrics.evaluate_directories(args.pred, args.gt,
                                              tau=args.tau, beta_sq=args.beta_sq)
    except (metrics.UnpairedFiles, metrics.EmptyDataset, FileNotFoundError,
            NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    metrics.write_report(report, args.out)
    agg = report["aggregate"]
    print(f"pairs: {len(report['pairs'])}")
    print(f"mIoU: {agg['miou']:.4f}  cIoU: {agg['ciou']:.4f}  "
          f"MAE: {agg['mae']:.4f}  maxF: {agg['max_f']:.4f}")
    print(f"report: {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(step_delay=args.step_delay)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_kernels(args) -> int:
    rng = np.random.default_rng(args.seed)

    tokens, dim = args.tokens, args.dim
    mask = fusion.build_attention_mask(tokens)
    q = rng.normal(size=(tokens + 1, dim))
    k = rng.normal(size=(tokens + 1, dim))
    out = fusion.masked_attention(q, k, np.eye(tokens + 1), mask)
    row_sums = out.sum(axis=1)
    masked_weight = max(
        abs(out[i, j]) for i in range(tokens + 1) for j in range(tokens + 1)
        if i != j and j != 0
    )
    print(f"attention: {tokens} image tokens, dim {dim}")
    print(f"  row sums in [{row_sums.min():.9f}, {row_sums.max():.9f}]")
    print(f"  largest weight at a masked position: {masked_weight:.3e}")

    gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
    pred = rng.uniform(0.2, 0.8, size=(8, 8))
    print(f"losses on a random 8x8 map:")
    print(f"  dice  = {fusion.dice_loss(pred, gt):.6f}")
    print(f"  focal = {fusion.focal_loss(pred, gt):.6f}")
    sides = [rng.uniform(0.2, 0.8, size=(8, 8)) for _ in range(4)]
    total = fusion.total_loss(pred, sides, gt)
    print(f"  total (fused + 4 sides) = {total:.6f}")

    grads = fusion.total_loss_grad(pred, sides, gt)
    h = 1e-6
    worst = 0.0
    for _ in range(16):
        i, j = rng.integers(0, 8, size=2)
        up = pred.copy(); up[i, j] += h
        down = pred.copy(); down[i, j] -= h
        fd = (fusion.total_loss(up, sides, gt) - fusion.total_loss(down, sides, gt)) / (2 * h)
        denom = max(abs(fd), 1e-12)
        worst = max(worst, abs(grads[0][i, j] - fd) / denom)
    print(f"  gradient check (worst relative diff over 16 pixels): {worst:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salientservo",
        description="Saliency-driven geometric constraints and uncalibrated visual servoing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario under the attempt protocol")
    p_run.add_argument("--scenario", required=True,
                       help="bundled scenario name or path to a YAML document")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", help="output directory (default runs/<name>-seed<seed>)")
    p_run.add_argument("--save-masks", action="store_true",
                       help="also dump per-step masks as PGM files")
    source = p_run.add_mutually_exclusive_group()
    source.add_argument("--constraints",
                        help="YAML file mapping stage names to constraint kinds, "
                             "replacing the scenario's plan")
    source.add_argument("--propose", action="store_true",
                        help="pick constraint kinds with the rule-based proposer "
                             "from each stage's initial mask")
    p_run.add_argument("--gain", type=float)
    p_run.add_argument("--damping", type=float)
    p_run.add_argument("--max-step", dest="max_step", type=float)
    p_run.add_argument("--fd-delta", dest="fd_delta", type=float)
    p_run.add_argument("--converge-eps", dest="converge_eps", type=float)
    p_run.add_argument("--max-iters", dest="max_iters", type=int)
    p_run.add_argument("--max-attempts", dest="max_attempts", type=int)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="segmentation metrics over paired mask directories")
    p_eval.add_argument("--pred", required=True, help="prediction mask directory")
    p_eval.add_argument("--gt", required=True, help="ground-truth mask directory")
    p_eval.add_argument("--out", default="report.json")
    p_eval.add_argument("--tau", type=float, default=0.5)
    p_eval.add_argument("--beta-sq", dest="beta_sq", type=float, default=0.3)
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="start the interactive session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.add_argument("--step-delay", dest="step_delay", type=float, default=0.05,
                         help="seconds between control steps while streaming")
    p_serve.set_defaults(func=cmd_serve)

    p_kernels = sub.add_parser("kernels", help="numerical spot checks of the fusion kernels")
    p_kernels.add_argument("--tokens", type=int, default=6)
    p_kernels.add_argument("--dim", type=int, default=16)
    p_kernels.add_argument("--seed", type=int, default=0)
    p_kernels.set_defaults(func=cmd_kernels)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
