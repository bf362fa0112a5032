"""Command-line front end: ``pvqa {gen,run,sweep,tune,oracle}``.

Exit codes are 0 on success, 1 for usage errors and 2 for runtime or
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .dynamics import IntegratorError, write_distribution_csv
from .harness import (
    FAMILIES,
    OPTIMIZERS,
    VARIANTS,
    NoAdmissiblePenalty,
    VariantSpec,
    default_penalty_grid,
    ensemble_run,
    prepare,
    run_variant,
    tune_penalty,
    write_reports_jsonl,
    write_summary_csv,
)
from .optimize import NonFiniteObjective, write_trace_csv
from .problems import (
    brute_force_optima,
    build_pair,
    constraint_of,
    derive_qkp,
    gen_gpp,
    gen_qkp_base,
    load_instance,
    parse_qkp_benchmark,
    save_instance,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; mirrors the JSON config file."""

    instance: Optional[str] = None
    instances: Optional[str] = None
    variant: str = "pVQA"
    family: str = "linear"
    T: float = 1.0
    optimizer: Optional[str] = None
    M: int = 100
    p: int = 1
    max_iter: Optional[int] = None
    resolution: float = 0.1
    A: Optional[float] = None
    grid: Optional[list] = None
    shots: Optional[int] = None
    top_k: Optional[int] = None
    seed: int = 0
    dt: Optional[float] = None
    out: str = "."
    trace: bool = False
    jobs: int = 1
    T_list: list = field(default_factory=list)
    p_list: list = field(default_factory=list)
    variants: list = field(default_factory=list)

    def spec(self, **overrides) -> VariantSpec:
        values = dict(variant=self.variant, family=self.family, T=self.T, optimizer=self.optimizer,
                      M=self.M, p=self.p, max_iter=self.max_iter, resolution=self.resolution,
                      shots=self.shots, top_k=self.top_k, seed=self.seed, dt=self.dt)
        values.update(overrides)
        if values["variant"] in ("pQA", "QA"):
            values["optimizer"] = None
            values["family"] = "linear"
        return VariantSpec(**values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--T", type=float, dest="T", help="annealing time")
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--M", type=int, dest="M", help="intervals of the continuous path")
    p.add_argument("--p", type=int, dest="p", help="QAOA layers")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--resolution", type=float, help="grid search step")
    p.add_argument("--A", type=float, dest="A", help="penalty coefficient")
    p.add_argument("--shots", type=int)
    p.add_argument("--top-k", type=int, dest="top_k")


def _global_options(default) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--seed", type=int, help="seed for every random choice")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--dt", type=float, help="RK4 step override")
    common.add_argument("--trace", action="store_const", const=True, help="write optimizer traces")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pvqa", description=__doc__.splitlines()[0], parents=[_global_options(None)])
    # global flags may also follow the subcommand; SUPPRESS keeps earlier values
    common = _global_options(argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", parents=[common], help="generate an instance")
    gen.add_argument("kind", choices=("gpp", "qkp"))
    gen.add_argument("--nodes", type=int, help="graph size (gpp)")
    gen.add_argument("--density", type=float, default=None)
    gen.add_argument("--items", type=int, help="item count (qkp)")
    gen.add_argument("--base", help="100-item benchmark file to derive from (qkp)")

    run = sub.add_parser("run", parents=[common], help="run one variant on one instance")
    run.add_argument("--instance")
    _add_run_options(run)

    sweep = sub.add_parser("sweep", parents=[common], help="ensemble sweep over T, p or variants")
    sweep.add_argument("--instances", help="directory of instance files")
    sweep.add_argument("--T-list", type=_floats, dest="T_list")
    sweep.add_argument("--p-list", type=_ints, dest="p_list")
    sweep.add_argument("--variants", type=_names)
    _add_run_options(sweep)

    tune = sub.add_parser("tune", parents=[common], help="tune the penalty coefficient")
    tune.add_argument("--instance")
    tune.add_argument("--grid", type=_floats, help="A_min,step,A_max")
    _add_run_options(tune)

    oracle = sub.add_parser("oracle", parents=[common], help="dump the exact optima of an instance")
    oracle.add_argument("--instance")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    path = getattr(args, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key, value in vars(args).items():
        if key in names and value is not None:
            setattr(cfg, key, value)
    return cfg


def _out_path(cfg: RunConfig, default_name: str) -> Path:
    out = Path(cfg.out)
    if out.suffix:
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def _load(path: Optional[str]):
    if not path:
        raise UsageError("--instance is required")
    if not Path(path).exists():
        raise UsageError(f"instance file not found: {path}")
    return load_instance(path)


def _penalty(cfg: RunConfig, instance) -> float:
    if cfg.A is not None:
        return float(cfg.A)
    return default_penalty_grid(instance)[0]


def cmd_gen(args, cfg: RunConfig) -> int:
    seed = cfg.seed
    if args.kind == "gpp":
        if args.nodes is None:
            raise UsageError("gen gpp needs --nodes")
        inst = gen_gpp(args.nodes, 0.5 if args.density is None else args.density, seed)
        summary = f"gpp n={inst.n_nodes} edges={len(inst.edges)}"
        default_name = f"gpp_n{inst.n_nodes}_seed{seed}.json"
    else:
        if args.items is None:
            raise UsageError("gen qkp needs --items")
        if args.base:
            base = parse_qkp_benchmark(Path(args.base).read_text())
        else:
            base = gen_qkp_base(100, 1.0 if args.density is None else args.density, seed)
        inst = derive_qkp(base, args.items)
        summary = f"qkp n={inst.n_items} capacity={inst.capacity}"
        for problem in constraint_of(inst, check=False).violations():
            print(f"pvqa gen: warning: {problem}; repair is not guaranteed", file=sys.stderr)
        default_name = f"qkp_n{inst.n_items}_seed{seed}.json"
    path = _out_path(cfg, default_name)
    save_instance(inst, path)
    print(f"{summary} -> {path}")
    return EXIT_OK


def _report_payload(cfg: RunConfig, report) -> dict:
    return {"config": asdict(cfg), "report": report.to_dict()}


def cmd_run(args, cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    report = run_variant(cfg.spec(), prepare(inst, _penalty(cfg, inst)), record_trace=cfg.trace)
    path = _out_path(cfg, "report.json")
    path.write_text(json.dumps(_report_payload(cfg, report), sort_keys=True, indent=1) + "\n")
    stem = path.with_suffix("")
    write_distribution_csv(report.distribution, f"{stem}_distribution.csv")
    if cfg.trace and report.trace:
        write_trace_csv(report.trace, f"{stem}_trace.csv")
    c_ave = "absent" if report.c_ave is None else f"{report.c_ave:.6g}"
    residual = "absent" if report.residual is None else f"{report.residual:.6g}"
    print(f"{report.variant} p_suc={report.p_suc:.6g} c_ave={c_ave} residual={residual} p_FS={report.p_fs:.6g}")
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    if not cfg.instances:
        raise UsageError("--instances is required")
    folder = Path(cfg.instances)
    files = sorted(p for p in folder.glob("*") if p.is_file()) if folder.is_dir() else []
    if not files:
        raise UsageError(f"no instance files in {folder}")
    instances = [load_instance(p) for p in files]
    variants = cfg.variants or [cfg.variant]
    Ts = cfg.T_list or [cfg.T]
    ps = cfg.p_list or [cfg.p]
    specs = [cfg.spec(variant=v, T=float(T), p=int(p)) for v in variants for T in Ts for p in ps]
    penalties = [_penalty(cfg, inst) for inst in instances]
    grouped, rows = ensemble_run(specs, instances, penalties, jobs=cfg.jobs, keep_distributions=False)
    path = _out_path(cfg, "summary.csv")
    write_summary_csv(rows, path)
    write_reports_jsonl([r for group in grouped for r in group], path.with_suffix(".jsonl"))
    for row in rows:
        print(f"{row['variant']} T={row['T']} {row['schedule']} p_suc={row['p_suc']:.6g}±{row['p_suc_std']:.3g}")
    return EXIT_OK


def cmd_tune(args, cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    grid = cfg.grid or list(default_penalty_grid(inst))
    if len(grid) != 3:
        raise UsageError("--grid takes A_min,step,A_max")
    A, report = tune_penalty(cfg.spec(), inst, tuple(grid))
    path = _out_path(cfg, "tune.json")
    path.write_text(json.dumps({"A": A, **_report_payload(cfg, report)}, sort_keys=True, indent=1) + "\n")
    print(f"A*={A:g} c_ave={report.c_ave:.6g} raw_p_FS={report.raw_p_fs:.6g}")
    return EXIT_OK


def cmd_oracle(args, cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    S, c_opt = brute_force_optima(inst, build_pair(inst, _penalty(cfg, inst)))
    optima = sorted(list(s) for s in S)
    path = _out_path(cfg, "oracle.json")
    path.write_text(json.dumps({"c_opt": c_opt, "optima": optima}, indent=1) + "\n")
    print(f"c_opt={c_opt:g} optima={len(optima)}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "tune": cmd_tune, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"pvqa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegratorError, NonFiniteObjective, NoAdmissiblePenalty, OSError, RuntimeError) as exc:
        print(f"pvqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, TypeError, KeyError) as exc:
        # invalid input that only surfaces inside the components
        print(f"pvqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
