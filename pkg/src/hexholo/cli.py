"""Command-line entry point: ``hexholo <subcommand> ...``.

Every subcommand prints one JSON document to stdout (or writes it to --out)
with a ``manifest`` block recording how it was produced. Exit status is 0 on
success, 1 when the input is outside the mathematical domain (not realizable,
degenerate, ...) and 2 for I/O or validation problems.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import DomainError, __version__

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class InputError(ValueError):
    pass


# ------------------------------------------------------------ I/O helpers


@dataclass
class RunManifest:
    command: list
    inputs: dict = field(default_factory=dict)  # path -> sha256
    seed: int | None = None
    grid: int | None = None
    version: str = __version__
    wall_time: float = 0.0


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _read_json(path: str, manifest: RunManifest):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    manifest.inputs[path] = _sha256(path)
    return data


def _plain(obj):
    """Convert numpy and complex values into JSON-friendly objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    # repr of a double is the shortest string that round-trips (at most 17 significant digits)
    return json.dumps(_plain(obj), indent=2, sort_keys=False)


def load_model(data) -> np.ndarray:
    """Model JSON: {"w": [8]} | {"black": [8], "white": [8]} | {"one_two": [a, b, c]}
    | {"ising": [J1, J2, J3]} | {"signatures": nested (n, n, 2, 8)}."""
    from .signatures import IsingParams, ising_signature, one_two_signature

    if not isinstance(data, dict):
        raise InputError("model JSON must be an object")
    try:
        if "signatures" in data:
            arr = np.array(data["signatures"], dtype=float)
            if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2:] != (2, 8):
                raise InputError("signatures must have shape (n, n, 2, 8)")
            return arr
        if "black" in data or "white" in data:
            return np.array([data["black"], data["white"]], dtype=float).reshape(2, 8)
        if "w" in data:
            w = np.array(data["w"], dtype=float).reshape(8)
            return np.array([w, w])
        if "one_two" in data:
            w = one_two_signature(*map(float, data["one_two"]))
            return np.array([w, w])
        if "ising" in data:
            w = ising_signature(IsingParams(*map(float, data["ising"])))
            return np.array([w, w])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed model: {exc}") from exc
    raise InputError("model JSON needs one of: signatures, black/white, w, one_two, ising")


def _model_for_n(model: np.ndarray, n: int) -> np.ndarray:
    if model.ndim == 4:
        if model.shape[0] != n:
            raise InputError(f"model has period {model.shape[0]}, asked for n={n}")
        return model
    return np.broadcast_to(model, (n, n, 2, 8)).copy()


def _reduce(model: np.ndarray, n: int, bases_path: str | None, manifest: RunManifest):
    from .reduction import (edge_basis_array, orthogonal_edge_bases, reduce_model,
                            solve_base_change_1x1)

    full = _model_for_n(model, n)
    if bases_path:
        tb = np.array(_read_json(bases_path, manifest)["bases"], dtype=float)
        if tb.shape == (3, 2, 2):
            tb = np.broadcast_to(tb, (n, n, 3, 2, 2)).copy()
        bases = edge_basis_array(n, tb)
    else:
        try:
            bases = orthogonal_edge_bases(full, n)
        except DomainError:
            if not np.allclose(full, full[0, 0][None, None]):
                raise
            bases = edge_basis_array(n, solve_base_change_1x1(full[0, 0, 1], full[0, 0, 0]))
    return reduce_model(full, n, bases), bases


def _load_fisher(data):
    from .lattice import build_fisher_torus

    try:
        w = np.array(data["fisher_weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("fisher JSON needs fisher_weights of shape (n, n, 2, 4)") from exc
    if w.ndim != 4:
        raise InputError("fisher_weights must have shape (n, n, 2, 4)")
    return build_fisher_torus(w.shape[0], w)


# ------------------------------------------------------------ subcommands


def cmd_check(args, manifest):
    from .signatures import (check_bipartite, check_orthogonal, check_orthogonal_periodic,
                             check_realizable_periodic)

    model = load_model(_read_json(args.model, manifest))
    full = model if model.ndim == 4 else model[None, None]
    out = {}
    if args.orthogonal or not (args.general or args.bipartite):
        per_vertex = [check_orthogonal(full[i, j, c], args.tol) for i, j, c in np.ndindex(full.shape[:3])]
        out["orthogonal"] = {
            "realizable": bool(check_orthogonal_periodic(full, args.tol)),
            "vertex_results": [{"realizable": r.realizable, "residual": r.residual, "angles": r.angles,
                                "edge_angles": r.edge_angles, "positive": r.positive} for r in per_vertex],
        }
    if args.general:
        out["general"] = {"realizable": bool(check_realizable_periodic(full, args.tol))}
    if args.bipartite:
        disc = all(check_bipartite(full[i, j, c], args.tol) for i, j, c in np.ndindex(full.shape[:3]))
        out["bipartite"] = {"realizable": bool(disc and check_realizable_periodic(full, args.tol)),
                            "discriminant_vanishes": bool(disc)}
    return out


def cmd_reduce(args, manifest):
    model = load_model(_read_json(args.model, manifest))
    red, bases = _reduce(model, args.n, args.bases, manifest)
    return {"n": args.n, "fisher_weights": red.fisher.weights, "matchgates": red.matchgates,
            "bases": bases, "worst_residual": red.worst_residual}


def cmd_partition(args, manifest):
    from .pfaffian import partition_function

    if args.fisher:
        f = _load_fisher(_read_json(args.fisher, manifest))
    elif args.model:
        red, _ = _reduce(load_model(_read_json(args.model, manifest)), args.n, None, manifest)
        f = red.fisher
    else:
        raise InputError("partition needs --fisher or --model")
    res = partition_function(f)
    sign, lg = res.log_scale
    return {"n": f.n, "Z": res.Z, "log_Z": res.log_Z, "signed": res.signed, "holant": res.holant,
            "log_holant": res.log_Z + lg, "holant_sign": sign * float(np.sign(res.signed)),
            "sector_pfaffians": res.sector_pfaffians, "sign_combination": res.sign_combination}


def cmd_free_energy(args, manifest):
    from .spectral import cell_products, free_energy, node_conditions, spectral_data

    if args.fisher:
        f = _load_fisher(_read_json(args.fisher, manifest))
    else:
        red, _ = _reduce(load_model(_read_json(args.model, manifest)), 1, None, manifest)
        f = red.fisher
    if f.n != 1:
        raise InputError("free-energy needs a 1x1 Fisher cell")
    data = spectral_data(f)
    fe = free_energy(cell_products(f), args.grid)
    out = {"value": fe.value, "error_estimate": fe.error_estimate, "classification": fe.classification,
           "node": data.node, "products": data.products, "grid": args.grid}
    if data.node is not None:
        chk = node_conditions(data.products, data.node)
        out["node_check"] = {"gradient": chk.gradient, "hessian": chk.hessian, "holds": chk.holds}
    return out


def cmd_local_prob(args, manifest):
    from .spectral import Target, dimer_event, local_probability_infinite

    model = load_model(_read_json(args.model, manifest))
    if model.ndim == 4:
        if model.shape[0] != 1:
            raise InputError("local-prob needs a 1x1 periodic model")
        model = model[0, 0]
    if args.dimer:
        targets = dimer_event("abc".index(args.dimer))
    elif args.vertex_config:
        targets = [Target(0, 0, 0 if args.color == "black" else 1, _config(args.vertex_config))]
    else:
        raise InputError("local-prob needs --vertex-config or --dimer")
    res = local_probability_infinite(model, targets, args.grid)
    return {"value": res.value, "classification": res.classification, "grid": args.grid,
            "targets": [asdict(t) for t in targets], "terms": len(res.terms)}


def _config(s: str) -> str:
    if len(s) != 3 or set(s) - {"0", "1"}:
        raise InputError(f"configuration must be a 3-digit binary string, got {s!r}")
    return s


def _cell(s: str) -> tuple[int, int]:
    try:
        i, j = (int(x) for x in s.split(","))
    except ValueError as exc:
        raise InputError(f"--at expects i,j, got {s!r}") from exc
    return i, j


def cmd_local_prob_finite(args, manifest):
    from .conditioning import conditional_probability

    model = load_model(_read_json(args.model, manifest))
    i, j = _cell(args.at)
    event = [(i % args.n, j % args.n, args.color, _config(args.config))]
    res = conditional_probability(_model_for_n(model, args.n), event, args.n, allow_n1=args.allow_n1)
    return {"probability": res.probability, "n": args.n, "event": event,
            "variants": len(res.variants.variants)}


def cmd_sample(args, manifest):
    from .glauber import OneTwoParams, render_svg, sample

    params = OneTwoParams(args.a, args.b, args.c)
    runs = [sample(params, args.n, args.steps, seed=args.seed + k) for k in range(args.chains)]
    m = len(runs)

    def pool(key_fn):
        means = np.array([key_fn(r)[0] for r in runs])
        ses = np.array([key_fn(r)[1] for r in runs])
        return float(means.mean()), float(np.sqrt((ses ** 2).sum()) / m)

    configs = {f"{col}:{cfg}": pool(lambda r, k=(col, cfg): r.config_frequency[k])
               for col in ("black", "white") for cfg in (format(x, "03b") for x in range(8))}
    dimers = {t: pool(lambda r, t=t: r.dimer_frequency[t]) for t in "abc"}
    if args.svg:
        try:
            with open(args.svg, "w") as fh:
                fh.write(render_svg(runs[0].final_state))
        except OSError as exc:
            raise InputError(f"cannot write {args.svg}: {exc}") from exc
    return {"params": asdict(params), "n": args.n, "steps": args.steps, "chains": m,
            "seeds": [args.seed + k for k in range(m)],
            "config_frequency": {k: {"mean": v[0], "stderr": v[1]} for k, v in configs.items()},
            "dimer_frequency": {k: {"mean": v[0], "stderr": v[1]} for k, v in dimers.items()}}


def _event_arg(s: str):
    parts = s.split(",")
    if len(parts) != 4:
        raise InputError(f"--event expects i,j,color,config, got {s!r}")
    i, j, color, cfg = parts
    if color not in ("black", "white"):
        raise InputError("event color must be black or white")
    return int(i), int(j), color, _config(cfg)


def cmd_oracle(args, manifest):
    from .oracle import enumerate_conditional, enumerate_vertex_model

    model = load_model(_read_json(args.model, manifest))
    full = _model_for_n(model, args.n)
    rep = enumerate_vertex_model(full, args.n)
    out = {"n": args.n, "partition": rep.partition, "config_count": rep.config_count,
           "marginals_defined": rep.marginals_defined}
    if args.event:
        event = [_event_arg(s) for s in args.event]
        out["event"] = event
        out["probability"] = enumerate_conditional(full, args.n, event)
    return out


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hexholo", description="Holographic reduction of honeycomb vertex models.")
    p.add_argument("--version", action="version", version=f"hexholo {__version__}")
    p.add_argument("--threads", type=int, default=int(os.environ.get("HEXHOLO_THREADS", "0")),
                   help="numba thread count (default from HEXHOLO_THREADS)")
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", help="realizability criteria")
    s.add_argument("--model", required=True)
    s.add_argument("--orthogonal", action="store_true")
    s.add_argument("--general", action="store_true")
    s.add_argument("--bipartite", action="store_true")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("reduce", help="reduce a model to Fisher weights")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--bases", help="JSON with 'bases' of shape (3,2,2) or (n,n,3,2,2)")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("partition", help="Pfaffian partition function")
    s.add_argument("--fisher")
    s.add_argument("--model")
    s.add_argument("--n", type=int, default=1)
    s.set_defaults(func=cmd_partition)

    s = sub.add_parser("free-energy", help="free energy by torus quadrature")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--fisher")
    g.add_argument("--model")
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(func=cmd_free_energy)

    s = sub.add_parser("local-prob", help="infinite-volume local probability")
    s.add_argument("--model", required=True)
    s.add_argument("--vertex-config")
    s.add_argument("--color", choices=("black", "white"), default="black")
    s.add_argument("--dimer", choices=("a", "b", "c"), help="both ends of an edge of this type hold only it")
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(func=cmd_local_prob)

    s = sub.add_parser("local-prob-finite", help="local probability on the n x n torus")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--at", default="0,0")
    s.add_argument("--color", choices=("black", "white"), default="black")
    s.add_argument("--config", required=True)
    s.add_argument("--allow-n1", action="store_true")
    s.set_defaults(func=cmd_local_prob_finite)

    s = sub.add_parser("sample", help="run the single-edge Markov chain for a 1-2 model")
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--svg")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("oracle", help="exhaustive enumeration (n <= 2)")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, choices=(1, 2), required=True)
    s.add_argument("--event", action="append", help="i,j,color,config (repeatable)")
    s.set_defaults(func=cmd_oracle)
    return p


def _set_threads(k: int) -> None:
    if k <= 0:
        return
    import numba

    numba.set_num_threads(max(1, min(k, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    manifest = RunManifest(command=["hexholo", *argv], seed=getattr(args, "seed", None),
                           grid=getattr(args, "grid", None))
    start = time.perf_counter()
    try:
        _set_threads(args.threads)
        result = args.func(args, manifest)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest.wall_time = time.perf_counter() - start
    result["manifest"] = asdict(manifest)
    text = dumps(result)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
