"""Command line entry point: ``holrecon {run,invert,sweep-lambda,oracle,mesh-info}``.

Every config key is also a flag, ``--section-key value`` (values parsed as
JSON when possible), applied on top of ``--config FILE`` or the defaults.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .pipeline import StageError

EXIT_STAGE = {"config": 2, "data": 3, "forward": 4, "measurement": 5, "operator": 6, "inversion": 7, "output": 8}


def _config_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("config overrides")
    base = ExperimentConfig()
    for sec in dataclasses.fields(base):
        for f in dataclasses.fields(getattr(base, sec.name)):
            flag = f"--{sec.name}-{f.name}".replace("_", "-")
            group.add_argument(flag, dest=f"cfg:{sec.name}.{f.name}", metavar="VALUE", default=None)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config_from_args(args, **forced) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {k[4:]: _parse_value(v) for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}
    overrides.update(forced)
    return cfg.override(overrides) if overrides else cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holrecon", description="Potential reconstruction from nonlinear boundary data.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (
        ("run", "full pipeline: forward sweeps, Fourier data, inversion"),
        ("invert", "inversion only, from oracle data, a sweep archive or a Fourier file"),
        ("sweep-lambda", "L-curve over a ladder of regularization parameters"),
        ("oracle", "write exact Fourier data of the configured potential"),
    ):
        s = sub.add_parser(verb, help=help_)
        s.add_argument("--config", help="JSON config file")
        _config_flags(s)
        if verb == "sweep-lambda":
            s.add_argument("--lambdas", help="comma separated values (default: inversion.ladder)")
        if verb == "oracle":
            s.add_argument("--out", required=True, help="output FourierData file")
    m = sub.add_parser("mesh-info", help="mesh and finite element statistics")
    m.add_argument("--resolution", type=int, default=48)
    m.add_argument("--degree", type=int, default=3)
    m.add_argument("--dump", help="write the mesh as plain text")
    return p


def _mesh_info(args) -> dict:
    from .fem import FESpace
    from .mesh import boundary_edges, build_disk_mesh

    mesh = build_disk_mesh(args.resolution)
    lengths = mesh.edge_lengths()
    loop = boundary_edges(mesh)
    info = {
        "radial_resolution": args.resolution,
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "area": mesh.area(),
        "area_error": abs(mesh.area() - np.pi) / np.pi,
        "mean_edge": float(lengths.mean()),
        "edge_ratio": float(lengths.max() / lengths.min()),
        "boundary_edges": len(loop),
        "dofs": FESpace(mesh, args.degree).n_dofs,
        "degree": args.degree,
    }
    if args.dump:
        mesh.write_text(args.dump)
    return info


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "mesh-info":
            print(json.dumps(_mesh_info(args), indent=2))
            return 0
        from . import pipeline

        if args.verb == "run":
            outcome = pipeline.run_full(_config_from_args(args, **{"pipeline.mode": "full"}))
            print(json.dumps(outcome.summary, indent=2))
        elif args.verb == "invert":
            outcome = pipeline.run_inversion_only(_config_from_args(args, **{"pipeline.mode": "inversion_only"}))
            print(json.dumps(outcome.summary, indent=2))
        elif args.verb == "sweep-lambda":
            cfg = _config_from_args(args, **{"pipeline.mode": "inversion_only"})
            lambdas = [float(t) for t in args.lambdas.split(",")] if args.lambdas else None
            for lam, resid, reg, err in pipeline.sweep_lambda(cfg, lambdas):
                print(f"{lam:.3e}  residual {resid:.6e}  regularizer {reg:.6e}  l2 {err:.4f}")
        elif args.verb == "oracle":
            from .fourier_op import FourierData
            from .potentials import fourier_oracle

            cfg = _config_from_args(args)
            fg, _ = pipeline.grids_of(cfg)
            F = FourierData(fg.xi, fourier_oracle(pipeline.potential_of(cfg), fg.xi))
            F.write(args.out, {"config_hash": cfg.hash, "potential": json.dumps(cfg.to_dict()["potential"])})
            print(f"wrote {len(F.values)} Fourier values to {args.out}")
    except StageError as exc:
        print(f"holrecon: stage {exc.stage} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE.get(exc.stage, 1)
    except ConfigurationError as exc:
        print(f"holrecon: stage config failed: {exc}", file=sys.stderr)
        return EXIT_STAGE["config"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
