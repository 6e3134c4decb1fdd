"""Command-line surface: search, train, smoothness traces, fixed-space grids,
synthetic data generation, and sparsity sweeps.

Every command writes a manifest next to its outputs before heavy work starts;
the manifest echoes enough configuration to re-run the command. Output files
themselves are deterministic per seed (timing lives only in the manifest), so
re-running with the same seed reproduces them byte for byte.

Exit codes: 0 success, 2 invalid arguments or genome string, 3 dataset load
failure, 4 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ptnas import __version__
from ptnas.errors import ContractViolation, DatasetLoadError, InvalidGenomeError, TrainingDivergedError
from ptnas.evolution import SearchConfig, evolve_search
from ptnas.genome import Genome, fixed_pattern_space
from ptnas.graph import drop_edges, gen_sbm, load_dataset, save_dataset
from ptnas.model import build_model
from ptnas.smoothness import smoothness_trace
from ptnas.training import default_config, fitness_fn, repeat_eval, train_eval


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1) + "\n")


def _start_manifest(path: Path, command: str, config: dict, seed: int, outputs: list[Path]) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started_at": _now(),
        "finished_at": None,
        "outputs": [str(p) for p in outputs],
    }
    _write_manifest(path, manifest)
    return manifest


def _finish_manifest(path: Path, manifest: dict) -> None:
    manifest["finished_at"] = _now()
    _write_manifest(path, manifest)


def _on_off(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lr", type=float, default=None, help="learning rate (default: per-dataset)")
    parser.add_argument("--weight-decay", type=float, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--hidden", type=int, default=None)
    parser.add_argument("--input-dropout", type=float, default=None)
    parser.add_argument("--layer-dropout", type=float, default=None)


def _config_overrides(args) -> dict:
    names = {
        "lr": "lr",
        "weight_decay": "weight_decay",
        "epochs": "epochs",
        "hidden": "hidden",
        "input_dropout": "input_dropout",
        "layer_dropout": "layer_dropout",
    }
    return {cfg_key: getattr(args, attr) for attr, cfg_key in names.items() if getattr(args, attr, None) is not None}


def _load(args):
    return load_dataset(args.data, splits_file=getattr(args, "split_file", "splits.json"))


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    config = {
        "blocks": args.blocks,
        "per_block": args.per_block,
        "p_intra": args.p_intra,
        "p_inter": args.p_inter,
        "dim": args.dim,
        "out": str(out),
    }
    manifest_path = out / "manifest.json"
    manifest = _start_manifest(manifest_path, "gen-data", config, args.seed, [out])
    bundle = gen_sbm(args.blocks, args.per_block, args.p_intra, args.p_inter, args.dim, args.seed)
    save_dataset(bundle, out)
    _finish_manifest(manifest_path, manifest)
    print(json.dumps({"out": str(out), "num_nodes": bundle.num_nodes, "edges": bundle.graph.num_undirected_edges()}))
    return 0


def cmd_train(args) -> int:
    genome = Genome.parse(args.genome)
    bundle = _load(args)
    cfg = default_config(
        str(bundle.meta.get("name", "")),
        gate_enabled=args.gate,
        skip_enabled=args.skip,
        **_config_overrides(args),
    )
    out = Path(args.out)
    config = {
        "data": str(args.data),
        "genome": str(genome),
        "split_file": args.split_file,
        "repeats": args.repeats,
        "train": vars(cfg).copy(),
    }
    manifest_path = Path(str(out) + ".manifest.json")
    manifest = _start_manifest(manifest_path, "train", config, args.seed, [out])
    if args.repeats > 1:
        rep = repeat_eval(genome, bundle, cfg, seeds=[args.seed + i for i in range(args.repeats)])
        payload = {"genome": str(genome), **rep.to_dict(include_timing=False)}
        summary = {"out": str(out), "mean_test_acc": rep.mean_test_acc, "std_test_acc": rep.std_test_acc}
    else:
        res = train_eval(genome, bundle, cfg, args.seed)
        payload = {"genome": str(genome), **res.to_dict(include_timing=False)}
        summary = {"out": str(out), "test_acc_at_best_val": res.test_acc_at_best_val}
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload) + "\n")
    _finish_manifest(manifest_path, manifest)
    print(json.dumps(summary))
    return 0


def cmd_search(args) -> int:
    bundle = _load(args)
    cfg = default_config(
        str(bundle.meta.get("name", "")),
        gate_enabled=args.gate,
        skip_enabled=args.skip,
        eval_repeats=args.eval_repeats,
        **_config_overrides(args),
    )
    scfg = SearchConfig(
        k=args.k,
        generations=args.gens,
        m=args.m,
        init_min=args.init_min,
        init_max=args.init_max,
        max_len=args.max_len,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    history_path = out / "history.jsonl"
    best_path = out / "best.json"
    config = {
        "data": str(args.data),
        "split_file": args.split_file,
        "search": vars(scfg).copy(),
        "train": vars(cfg).copy(),
    }
    manifest_path = out / "manifest.json"
    manifest = _start_manifest(manifest_path, "search", config, args.seed, [history_path, best_path])

    total = scfg.generations

    def progress(gen, pop):
        if gen == 0 or gen == total or (total >= 10 and gen % max(1, total // 10) == 0):
            best_now = max(ind.fitness for ind in pop)
            print(f"gen {gen}/{total} pop_best={best_now:.4f}", file=sys.stderr)

    result = evolve_search(scfg, fitness_fn(bundle, cfg, args.seed), observer=progress, history_path=history_path)
    best_path.write_text(
        json.dumps(
            {"genome": str(result.best.genome), "fitness": result.best.fitness, "birth": result.best.birth_index}
        )
        + "\n"
    )
    _finish_manifest(manifest_path, manifest)
    print(json.dumps({"out": str(out), "best_genome": str(result.best.genome), "best_fitness": result.best.fitness}))
    return 0


def cmd_smoothness(args) -> int:
    genome = Genome.parse(args.genome)
    bundle = _load(args)
    cfg = default_config(str(bundle.meta.get("name", "")), **_config_overrides(args))
    out = Path(args.out)
    config = {
        "data": str(args.data),
        "genome": str(genome),
        "gate": args.gate,
        "skip": args.skip,
        "hidden": cfg.hidden,
    }
    manifest_path = Path(str(out) + ".manifest.json")
    manifest = _start_manifest(manifest_path, "smoothness", config, args.seed, [out])
    model = build_model(
        genome,
        bundle.num_features,
        cfg.hidden,
        bundle.num_classes,
        gate_enabled=args.gate,
        skip_enabled=args.skip,
        seed=args.seed,
    )
    trace = smoothness_trace(model, bundle)
    lines = ["layer,op,S"] + [f"{layer},{op},{value!r}" for layer, op, value in trace.rows()]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    _finish_manifest(manifest_path, manifest)
    print(json.dumps({"out": str(out), "final_smoothness": float(trace.values[-1])}))
    return 0


def cmd_grid(args) -> int:
    bundle = _load(args)
    cfg = default_config(
        str(bundle.meta.get("name", "")),
        gate_enabled=False,
        skip_enabled=False,
        **_config_overrides(args),
    )
    archs = fixed_pattern_space(args.space, args.max_depth)
    out = Path(args.out)
    config = {
        "data": str(args.data),
        "space": args.space,
        "max_depth": args.max_depth,
        "repeats": args.repeats,
        "train": vars(cfg).copy(),
    }
    manifest_path = Path(str(out) + ".manifest.json")
    manifest = _start_manifest(manifest_path, "grid", config, args.seed, [out])
    lines = ["space,genome,p_depth,t_depth,mean_test_acc,std_test_acc"]
    for p_depth, t_depth, genome in archs:
        if args.repeats > 1:
            rep = repeat_eval(genome, bundle, cfg, seeds=[args.seed + i for i in range(args.repeats)])
            mean, std = rep.mean_test_acc, rep.std_test_acc
        else:
            mean, std = train_eval(genome, bundle, cfg, args.seed).test_acc_at_best_val, 0.0
        lines.append(f"{args.space},{genome},{p_depth},{t_depth},{mean!r},{std!r}")
        print(f"{genome}: {mean:.4f}", file=sys.stderr)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    _finish_manifest(manifest_path, manifest)
    print(json.dumps({"out": str(out), "architectures": len(archs)}))
    return 0


def cmd_sparsity_sweep(args) -> int:
    bundle = _load(args)
    cfg = default_config(
        str(bundle.meta.get("name", "")),
        gate_enabled=args.gate,
        skip_enabled=args.skip,
        **_config_overrides(args),
    )
    fractions = [float(tok) for tok in args.fractions.split(",") if tok.strip() != ""]
    out = Path(args.out)
    config = {
        "data": str(args.data),
        "fractions": fractions,
        "search": {"k": args.k, "gens": args.gens, "m": args.m},
        "train": vars(cfg).copy(),
    }
    manifest_path = Path(str(out) + ".manifest.json")
    manifest = _start_manifest(manifest_path, "sparsity-sweep", config, args.seed, [out])
    lines = ["fraction,edges,best_genome,best_fitness,avg_p_top10,avg_t_top10"]
    for fraction in fractions:
        sparse_bundle = drop_edges(bundle, fraction, args.seed)
        scfg = SearchConfig(
            k=args.k, generations=args.gens, m=args.m, init_min=args.init_min, init_max=args.init_max,
            max_len=args.max_len, seed=args.seed,
        )
        result = evolve_search(scfg, fitness_fn(sparse_bundle, cfg, args.seed))
        ranked = sorted(result.history, key=lambda rec: (-rec["fitness"], rec["birth"]))[:10]
        genomes = [Genome(rec["genome"]) for rec in ranked]
        avg_p = float(np.mean([g.p_count for g in genomes]))
        avg_t = float(np.mean([g.t_count for g in genomes]))
        edges = sparse_bundle.graph.num_undirected_edges()
        lines.append(
            f"{fraction!r},{edges},{result.best.genome},{result.best.fitness!r},{avg_p!r},{avg_t!r}"
        )
        print(f"fraction {fraction}: best {result.best.genome} ({result.best.fitness:.4f})", file=sys.stderr)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    _finish_manifest(manifest_path, manifest)
    print(json.dumps({"out": str(out), "fractions": fractions}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptnas", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ptnas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a stochastic-block-model dataset directory")
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--per-block", type=int, default=100)
    p.add_argument("--p-intra", type=float, default=0.1)
    p.add_argument("--p-inter", type=float, default=0.01)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one genome and write its metrics as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--genome", required=True)
    p.add_argument("--gate", type=_on_off, default=False)
    p.add_argument("--skip", type=_on_off, default=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--split-file", default="splits.json")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search", help="run the aging-evolution architecture search")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--gens", type=int, default=500)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gate", type=_on_off, default=True)
    p.add_argument("--skip", type=_on_off, default=True)
    p.add_argument("--eval-repeats", type=int, default=1)
    p.add_argument("--init-min", type=int, default=2)
    p.add_argument("--init-max", type=int, default=8)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--split-file", default="splits.json")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("smoothness", help="write the per-layer smoothness trace of an untrained model")
    p.add_argument("--data", required=True)
    p.add_argument("--genome", required=True)
    p.add_argument("--gate", type=_on_off, default=False)
    p.add_argument("--skip", type=_on_off, default=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-file", default="splits.json")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_smoothness)

    p = sub.add_parser("grid", help="exhaustively evaluate one fixed-pipeline baseline space")
    p.add_argument("--data", required=True)
    p.add_argument("--space", choices=["p-first", "t-first", "alternate"], required=True)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-file", default="splits.json")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sparsity-sweep", help="search after dropping edge fractions; reports op-count trends")
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", default="0,0.25,0.5,0.75")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--gens", type=int, default=20)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gate", type=_on_off, default=True)
    p.add_argument("--skip", type=_on_off, default=True)
    p.add_argument("--init-min", type=int, default=2)
    p.add_argument("--init-max", type=int, default=8)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--split-file", default="splits.json")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sparsity_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidGenomeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DatasetLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
