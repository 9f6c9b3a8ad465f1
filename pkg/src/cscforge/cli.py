"""Command-line front end.

Subcommands: synth, denoise, project, pursue, learn, analyze, atoms.  Every
run writes a JSON manifest listing the resolved configuration, the seed, the
input and output files with their SHA-256 hashes, and the wall-clock
duration (the only field that varies between identical runs).

Exit codes: 0 success, 1 file IO failure, 2 usage or validation failure,
3 numerical failure (the manifest is still written, with the partial trace).

All randomness flows from --seed: a root stream Rng(seed) is split twice,
child 1 driving noise/sampling and child 2 driving dictionary learning.
CSC_FORGE_THREADS sets the default for --threads; the value is recorded in
the manifest (current kernels are vectorized, not thread-pooled, so it does
not change results).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .containers import (
    file_sha256,
    read_cscd,
    read_csct,
    read_image,
    write_cscd,
    write_csct,
    write_image,
)
from .dictionary import export_atom_grid
from .dip import DenoiseConfig, dct_dictionary, denoise, learn_dictionary
from .errors import DivergenceError
from .mlcsc import MlCscModel, effective_dictionary, sample_sparse, synthesize_cascade
from .pursuit import PursuitConfig, ista, iht, trace_to_csv
from .rng import Rng
from .sparsify import (
    L0Global,
    L0InfNeedle,
    L1Penalty,
    project_l0_global,
    project_l0inf_needle,
    report_heat_image,
    report_to_csv,
    soft_threshold,
    sparsity_report,
)
from .tensor import add_awgn


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _default_threads() -> int:
    return int(os.environ.get("CSC_FORGE_THREADS", "1"))


def _rule_from_args(args):
    if args.rule == "l1":
        if args.lam is None:
            raise ValueError("--rule l1 needs --lam")
        if args.lam < 0:
            raise ValueError(f"--lam must be nonnegative, got {args.lam}")
        return L1Penalty(args.lam)
    if args.k is None:
        raise ValueError(f"--rule {args.rule} needs --k")
    if args.k < 0:
        raise ValueError(f"--k must be nonnegative, got {args.k}")
    return L0Global(args.k) if args.rule == "l0" else L0InfNeedle(args.k)


def _rule_config(rule) -> dict:
    if isinstance(rule, L1Penalty):
        return {"rule": "l1", "lam": rule.lam}
    kind = "l0" if isinstance(rule, L0Global) else "l0inf"
    return {"rule": kind, "k": rule.k}


def _rule_from_doc(doc: dict, where: str):
    kind = doc.get("rule")
    if kind == "l1":
        if "lam" not in doc:
            raise ValueError(f"{where}: rule l1 needs a 'lam' field")
        return L1Penalty(float(doc["lam"]))
    if kind in ("l0", "l0inf"):
        if "k" not in doc:
            raise ValueError(f"{where}: rule {kind} needs a 'k' field")
        k = int(doc["k"])
        return L0Global(k) if kind == "l0" else L0InfNeedle(k)
    raise ValueError(f"{where}: unknown rule {kind!r} (expected l1, l0, or l0inf)")


def _load_model(path):
    """Model manifest -> (MlCscModel, list of dictionary paths)."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    entries = doc.get("layers")
    if not isinstance(entries, list) or not entries:
        raise ValueError("model manifest needs a non-empty 'layers' list")
    base = os.path.dirname(os.path.abspath(path))
    layers = []
    paths = []
    for i, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict) or "dictionary" not in entry:
            raise ValueError(f"layer {i}: missing 'dictionary' field")
        dpath = entry["dictionary"]
        if not os.path.isabs(dpath):
            dpath = os.path.join(base, dpath)
        layers.append((read_cscd(dpath), _rule_from_doc(entry, f"layer {i}")))
        paths.append(dpath)
    return MlCscModel(tuple(layers)), paths


def _read_signal(path):
    if str(path).endswith(".csct"):
        return read_csct(path)
    return read_image(path)


def _hash_entries(paths) -> list:
    return [{"path": str(p), "sha256": file_sha256(p)} for p in paths]


def _write_manifest(
    path, subcommand: str, args, config: dict, inputs, outputs, started: float, extra=None
) -> None:
    manifest = {
        "tool": "csc-forge",
        "version": __version__,
        "subcommand": subcommand,
        "seed": getattr(args, "seed", None),
        "threads": args.threads,
        "config": config,
        "inputs": _hash_entries(inputs),
        "outputs": _hash_entries(outputs),
        "duration_seconds": time.monotonic() - started,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_synth(args) -> int:
    started = time.monotonic()
    if args.height < 1 or args.width < 1:
        raise ValueError("--height and --width must be positive")
    model, dict_paths = _load_model(args.model)
    deep = model.dictionary(model.depth)
    rule = model.rule(model.depth)
    if args.k is not None:
        if args.k < 0:
            raise ValueError(f"--k must be nonnegative, got {args.k}")
        rule = L0Global(args.k) if isinstance(rule, L0Global) else L0InfNeedle(args.k)
    rng = Rng(args.seed).split()
    sample = sample_sparse((args.height, args.width, deep.atom_count), rule, rng)
    image = synthesize_cascade(model, sample.gamma)

    prefix = args.out_prefix
    gamma_path = prefix + ".csct"
    write_csct(gamma_path, sample.gamma)
    outputs = [gamma_path]
    if image.shape[2] in (1, 3):
        image_path = prefix + (".pgm" if image.shape[2] == 1 else ".ppm")
        write_image(image_path, image)
        outputs.append(image_path)
    report_path = prefix + ".report.csv"
    with open(report_path, "w", encoding="utf-8", newline="") as f:
        f.write(report_to_csv(sparsity_report(sample.gamma)))
    outputs.append(report_path)

    config = {
        "model": args.model,
        "height": args.height,
        "width": args.width,
        "out_prefix": prefix,
        **_rule_config(rule),
    }
    _write_manifest(
        prefix + ".manifest.json",
        "synth",
        args,
        config,
        [args.model] + dict_paths,
        outputs,
        started,
        extra={"support_size": sample.support_size, "image_shape": list(image.shape)},
    )
    return 0


def _denoise_dictionary(args, clean, inputs):
    """Resolve the dictionary source; may consume the learning stream."""
    root = Rng(args.seed)
    noise_rng = root.split()
    learn_rng = root.split()
    if args.dict is not None:
        inputs.append(args.dict)
        return read_cscd(args.dict), {"dictionary": args.dict}
    if args.learn:
        x0 = add_awgn(clean, args.sigma, noise_rng)
        rule = _rule_from_args(args)
        D = learn_dictionary(
            x0,
            args.atoms,
            args.atom_size,
            rule,
            epochs=args.epochs,
            learn_rate=args.rate,
            sc_iters=args.sc_iters,
            rng=learn_rng,
        )
        return D, {
            "dictionary": "learned",
            "epochs": args.epochs,
            "learn_rate": args.rate,
            "sc_iters": args.sc_iters,
            "atoms": args.atoms,
            "atom_size": args.atom_size,
        }
    return dct_dictionary(args.atoms, args.atom_size), {
        "dictionary": "dct",
        "atoms": args.atoms,
        "atom_size": args.atom_size,
    }


def cmd_denoise(args) -> int:
    started = time.monotonic()
    if not args.sigma > 0:
        raise ValueError(f"--sigma must be positive, got {args.sigma}")
    if args.iters < 1:
        raise ValueError(f"--iters must be positive, got {args.iters}")
    if not 0.0 < args.ema < 1.0:
        raise ValueError(f"--ema must lie strictly in (0,1), got {args.ema}")
    clean = read_image(args.image)
    inputs = [args.image]
    D, dict_config = _denoise_dictionary(args, clean, inputs)
    rule = _rule_from_args(args)
    cfg = DenoiseConfig(
        sigma=args.sigma,
        rule=rule,
        iters=args.iters,
        ema_decay=args.ema,
        seed=args.seed,
        step_size=args.step,
    )
    prefix = args.out_prefix
    config = {
        "image": args.image,
        "sigma": args.sigma,
        "iters": args.iters,
        "ema_decay": args.ema,
        "step_size": args.step,
        "out_prefix": prefix,
        **_rule_config(rule),
        **dict_config,
    }
    try:
        run = denoise(clean, cfg, D)
    except DivergenceError as exc:
        partial = {
            "error": str(exc),
            "failed_iteration": exc.iteration,
            "partial_objectives": list(exc.trace.objectives) if exc.trace else [],
        }
        _write_manifest(
            prefix + ".manifest.json", "denoise", args, config, inputs, [], started,
            extra=partial,
        )
        return _fail(3, str(exc))

    ext = ".pgm" if clean.shape[2] == 1 else ".ppm"
    paths = {
        "noisy": prefix + ".noisy" + ext,
        "single": prefix + ".single" + ext,
        "average": prefix + ".average" + ext,
    }
    write_image(paths["noisy"], run.noisy)
    write_image(paths["single"], run.best_single.image)
    write_image(paths["average"], run.best_average.image)
    trace_path = prefix + ".trace.csv"
    with open(trace_path, "w", encoding="utf-8", newline="") as f:
        f.write("iter,psnr_single,psnr_avg\n")
        for t, (a, b) in enumerate(zip(run.psnr_single_trace, run.psnr_avg_trace), 1):
            f.write(f"{t},{a!r},{b!r}\n")

    _write_manifest(
        prefix + ".manifest.json",
        "denoise",
        args,
        config,
        inputs,
        list(paths.values()) + [trace_path],
        started,
        extra={
            "noisy_psnr": run.noisy_psnr,
            "best_single": {
                "iteration": run.best_single.iteration,
                "psnr": run.best_single.psnr,
            },
            "best_average": {
                "iteration": run.best_average.iteration,
                "psnr": run.best_average.psnr,
            },
        },
    )
    return 0


def cmd_project(args) -> int:
    started = time.monotonic()
    gamma = read_csct(args.infile)
    rule = _rule_from_args(args)
    if isinstance(rule, L0Global):
        out = project_l0_global(gamma, rule.k)
    elif isinstance(rule, L0InfNeedle):
        out = project_l0inf_needle(gamma, rule.k)
    else:
        out = soft_threshold(gamma, rule.lam)
    write_csct(args.out, out)
    config = {"in": args.infile, "out": args.out, **_rule_config(rule)}
    _write_manifest(
        args.out + ".manifest.json", "project", args, config,
        [args.infile], [args.out], started,
    )
    return 0


def cmd_pursue(args) -> int:
    started = time.monotonic()
    x = _read_signal(args.infile)
    D = read_cscd(args.dict)
    rule = _rule_from_args(args)
    cfg = PursuitConfig(
        rule=rule,
        max_iters=args.iters,
        step_size=args.step,
        objective_tol=args.tol,
    )
    config = {
        "in": args.infile,
        "dict": args.dict,
        "iters": args.iters,
        "step_size": args.step,
        "objective_tol": args.tol,
        "out": args.out,
        **_rule_config(rule),
    }
    meta = {"config": config, "seed": args.seed, "dict_sha256": file_sha256(args.dict)}
    solver = ista if isinstance(rule, L1Penalty) else iht
    trace_path = args.trace or args.out + ".trace.csv"
    try:
        trace = solver(D, x, cfg)
    except DivergenceError as exc:
        outputs = []
        if exc.trace is not None:
            with open(trace_path, "w", encoding="utf-8", newline="") as f:
                f.write(trace_to_csv(exc.trace, meta))
            outputs.append(trace_path)
        _write_manifest(
            args.out + ".manifest.json", "pursue", args, config,
            [args.infile, args.dict], outputs, started,
            extra={"error": str(exc), "failed_iteration": exc.iteration},
        )
        return _fail(3, str(exc))

    write_csct(args.out, trace.gamma)
    with open(trace_path, "w", encoding="utf-8", newline="") as f:
        f.write(trace_to_csv(trace, meta))
    _write_manifest(
        args.out + ".manifest.json", "pursue", args, config,
        [args.infile, args.dict], [args.out, trace_path], started,
        extra={
            "final_objective": trace.objectives[-1],
            "iterations_run": trace.iterations_run,
            "stop_reason": trace.stop_reason,
        },
    )
    return 0


def cmd_learn(args) -> int:
    started = time.monotonic()
    x0 = _read_signal(args.infile)
    rule = _rule_from_args(args)
    root = Rng(args.seed)
    root.split()  # child 1 is reserved for the noise/sampling stream
    learn_rng = root.split()
    config = {
        "in": args.infile,
        "atoms": args.atoms,
        "atom_size": args.atom_size,
        "epochs": args.epochs,
        "learn_rate": args.rate,
        "sc_iters": args.sc_iters,
        "out": args.out,
        **_rule_config(rule),
    }
    try:
        D = learn_dictionary(
            x0,
            args.atoms,
            args.atom_size,
            rule,
            epochs=args.epochs,
            learn_rate=args.rate,
            sc_iters=args.sc_iters,
            rng=learn_rng,
        )
    except DivergenceError as exc:
        _write_manifest(
            args.out + ".manifest.json", "learn", args, config,
            [args.infile], [], started,
            extra={"error": str(exc), "failed_iteration": exc.iteration},
        )
        return _fail(3, str(exc))
    write_cscd(args.out, D)
    _write_manifest(
        args.out + ".manifest.json", "learn", args, config,
        [args.infile], [args.out], started,
    )
    return 0


def cmd_analyze(args) -> int:
    started = time.monotonic()
    gamma = read_csct(args.infile)
    if args.zero_tol < 0:
        raise ValueError(f"--zero-tol must be nonnegative, got {args.zero_tol}")
    report = sparsity_report(gamma, args.zero_tol)
    prefix = args.out_prefix
    csv_path = prefix + ".report.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(report_to_csv(report))
    heat_path = prefix + ".heat.pgm"
    write_image(heat_path, report_heat_image(report))
    config = {
        "in": args.infile,
        "zero_tol": args.zero_tol,
        "out_prefix": prefix,
    }
    _write_manifest(
        prefix + ".manifest.json", "analyze", args, config,
        [args.infile], [csv_path, heat_path], started,
        extra={
            "global_nnz_fraction": report.global_nnz_fraction,
            "max_needle_nnz": report.max_needle_nnz,
        },
    )
    return 0


def cmd_atoms(args) -> int:
    started = time.monotonic()
    if (args.dict is None) == (args.model is None):
        raise ValueError("give exactly one of --dict or --model")
    if args.cols < 1:
        raise ValueError(f"--cols must be positive, got {args.cols}")
    inputs = []
    if args.dict is not None:
        D = read_cscd(args.dict)
        inputs.append(args.dict)
        source = {"dict": args.dict}
    else:
        model, dict_paths = _load_model(args.model)
        depth = args.effective if args.effective is not None else 1
        D = effective_dictionary(model, depth)
        inputs = [args.model] + dict_paths
        source = {"model": args.model, "effective": depth}
    grid = export_atom_grid(D, args.cols)
    write_image(args.out, grid)
    config = {"cols": args.cols, "out": args.out, **source}
    _write_manifest(
        args.out + ".manifest.json", "atoms", args, config, inputs, [args.out], started,
        extra={"atom_count": D.atom_count, "atom_size": D.atom_size},
    )
    return 0


def _add_rule_flags(p, default_rule="l0inf", default_k=4):
    p.add_argument(
        "--rule", choices=["l1", "l0", "l0inf"], default=default_rule,
        help="sparsity rule (default %(default)s)",
    )
    p.add_argument("--k", type=int, default=default_k, help="nonzero budget for l0/l0inf")
    p.add_argument("--lam", type=float, default=None, help="penalty weight for l1")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="root RNG seed (default 0)")
    p.add_argument(
        "--threads", type=int, default=None,
        help="thread count recorded in the manifest (default $CSC_FORGE_THREADS or 1)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csc-forge",
        description="Convolutional sparse coding: synthesis, pursuit, denoising.",
    )
    parser.add_argument("--version", action="version", version=f"csc-forge {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="sample a sparse code and synthesize an image")
    p.add_argument("--model", required=True, help="model manifest (JSON)")
    p.add_argument("--height", type=int, required=True, help="deepest grid height")
    p.add_argument("--width", type=int, required=True, help="deepest grid width")
    p.add_argument("--k", type=int, default=None, help="override the deepest budget")
    p.add_argument("--out-prefix", default="synth", help="output path prefix")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("denoise", help="DIP-style denoising of one image")
    p.add_argument("--image", required=True, help="clean input image (PGM/PPM)")
    p.add_argument("--sigma", type=float, default=25.0, help="noise std (default 25)")
    _add_rule_flags(p)
    p.add_argument("--iters", type=int, default=300, help="pursuit iterations")
    p.add_argument("--ema", type=float, default=0.99, help="average decay (default 0.99)")
    p.add_argument("--step", type=float, default=None, help="solver step (default auto)")
    p.add_argument("--dict", default=None, help="fixed dictionary file (CSCD)")
    p.add_argument("--learn", action="store_true", help="learn the dictionary from the noisy image")
    p.add_argument("--atoms", type=int, default=64, help="atom count for dct/learned")
    p.add_argument("--atom-size", type=int, default=8, help="atom size for dct/learned")
    p.add_argument("--epochs", type=int, default=12, help="learning epochs")
    p.add_argument("--rate", type=float, default=0.5, help="learning rate")
    p.add_argument("--sc-iters", type=int, default=20, help="sparse-coding steps per epoch")
    p.add_argument("--out-prefix", default="denoise", help="output path prefix")
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("project", help="apply a sparsity rule to a CSCT tensor")
    p.add_argument("--in", dest="infile", required=True, help="input tensor (CSCT)")
    _add_rule_flags(p)
    p.add_argument("--out", required=True, help="output tensor (CSCT)")
    _add_common(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("pursue", help="sparse-code a signal against a dictionary")
    p.add_argument("--in", dest="infile", required=True, help="signal (CSCT or PGM/PPM)")
    p.add_argument("--dict", required=True, help="dictionary file (CSCD)")
    _add_rule_flags(p)
    p.add_argument("--iters", type=int, default=100, help="max iterations")
    p.add_argument("--step", type=float, default=None, help="step size (default auto)")
    p.add_argument("--tol", type=float, default=0.0, help="objective decrease tolerance")
    p.add_argument("--out", required=True, help="output representation (CSCT)")
    p.add_argument("--trace", default=None, help="trace CSV path (default <out>.trace.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_pursue)

    p = sub.add_parser("learn", help="fit a dictionary to one image")
    p.add_argument("--in", dest="infile", required=True, help="signal (CSCT or PGM/PPM)")
    _add_rule_flags(p)
    p.add_argument("--atoms", type=int, default=64, help="atom count")
    p.add_argument("--atom-size", type=int, default=8, help="atom size")
    p.add_argument("--epochs", type=int, default=12, help="epochs")
    p.add_argument("--rate", type=float, default=0.5, help="learning rate")
    p.add_argument("--sc-iters", type=int, default=20, help="sparse-coding steps per epoch")
    p.add_argument("--out", required=True, help="output dictionary (CSCD)")
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("analyze", help="sparsity report for a CSCT tensor")
    p.add_argument("--in", dest="infile", required=True, help="input tensor (CSCT)")
    p.add_argument("--zero-tol", type=float, default=0.0, help="nonzero threshold")
    p.add_argument("--out-prefix", default="analyze", help="output path prefix")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("atoms", help="export an atom grid image")
    p.add_argument("--dict", default=None, help="dictionary file (CSCD)")
    p.add_argument("--model", default=None, help="model manifest (JSON)")
    p.add_argument("--effective", type=int, default=None, help="collapse layers 1..i")
    p.add_argument("--cols", type=int, default=8, help="grid columns (default 8)")
    p.add_argument("--out", required=True, help="output image (PGM/PPM)")
    _add_common(p)
    p.set_defaults(func=cmd_atoms)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is None:
        try:
            args.threads = _default_threads()
        except ValueError:
            return _fail(2, "CSC_FORGE_THREADS must be an integer")
    if args.threads < 1:
        return _fail(2, f"--threads must be positive, got {args.threads}")
    try:
        return args.func(args)
    except DivergenceError as exc:
        return _fail(3, str(exc))
    except json.JSONDecodeError as exc:
        return _fail(2, f"bad JSON: {exc}")
    except ValueError as exc:
        return _fail(2, str(exc))
    except OSError as exc:
        return _fail(1, str(exc))


if __name__ == "__main__":
    sys.exit(main())
