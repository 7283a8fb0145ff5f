"""csqpt command line: simulate | state-tomo | process-tomo | predict | wigner | fidelity."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io, pipeline
from .fock import ChannelModel, state_fidelity, wigner
from .analysis import process_fidelity


def _parse_alphas(text: str) -> tuple[complex, ...]:
    try:
        return tuple(complex(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"cannot parse probe amplitudes {text!r}: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csqpt",
        description="Homodyne simulation and maximum-likelihood quantum state/process tomography.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample probe datasets through a loss channel")
    sim.add_argument("--out", required=True, help="output directory for datasets and manifest")
    sim.add_argument("--config", default=None, help="key = value config file")
    sim.add_argument("--seed", type=int, default=None, help="base seed (probe i uses seed + i)")
    sim.add_argument("--eta", type=float, default=0.62, help="channel transmissivity")
    sim.add_argument("--phi", type=float, default=0.92, help="channel phase in radians")
    sim.add_argument("--alphas", default=None,
                     help="comma-separated probe amplitudes (default: 0,0.1375,...,1.100)")
    sim.add_argument("--samples-per-probe", type=int, default=500_000)
    sim.add_argument("--dim-sim", type=int, default=pipeline.DEFAULT_SIM_DIM,
                     help="Fock truncation used for simulation")
    sim.set_defaults(func=_run_simulate)

    st = sub.add_parser("state-tomo", help="reconstruct a density matrix from one dataset")
    st.add_argument("dataset", help="quadrature dataset file")
    st.add_argument("--out", required=True, help="output directory")
    st.add_argument("--config", default=None)
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--wigner", action="store_true", help="also write the Wigner grid")
    st.set_defaults(func=_run_state_tomo)

    pt = sub.add_parser("process-tomo", help="reconstruct a process tensor from a probe manifest")
    pt.add_argument("manifest", help="manifest file listing probe datasets")
    pt.add_argument("--out", required=True, help="output directory")
    pt.add_argument("--config", default=None)
    pt.add_argument("--seed", type=int, default=None)
    pt.add_argument("--reference", default=None, help="tensor file to compare fidelities against")
    pt.set_defaults(func=_run_process_tomo)

    pr = sub.add_parser("predict", help="apply a stored tensor to an input state")
    pr.add_argument("tensor", help="process tensor file")
    pr.add_argument("state", help="input state: coherent:<re>,<im> | fock:<n> | super:<c0>,<c1>")
    pr.add_argument("--out", required=True, help="output directory")
    pr.set_defaults(func=_run_predict)

    wg = sub.add_parser("wigner", help="evaluate the Wigner function of a stored state")
    wg.add_argument("state", help="density matrix file")
    wg.add_argument("--out", required=True, help="output Wigner grid file")
    wg.set_defaults(func=_run_wigner)

    fd = sub.add_parser("fidelity", help="fidelity between two stored states or tensors")
    fd.add_argument("file_a")
    fd.add_argument("file_b")
    fd.set_defaults(func=_run_fidelity)

    return parser


def _run_simulate(args) -> None:
    settings = pipeline.resolve_settings(args.config, args.seed)
    alphas = _parse_alphas(args.alphas) if args.alphas else pipeline.default_probe_alphas()
    spec = pipeline.ExperimentSpec(
        channel=ChannelModel(args.eta, args.phi),
        probe_alphas=alphas,
        n_samples=args.samples_per_probe,
        phase_sections=settings["phase_sections"],
        seed=settings["seed"],
        output_dir=Path(args.out),
        dim_sim=args.dim_sim,
    )
    manifest = pipeline.cmd_simulate(spec)
    print(f"wrote {manifest}")


def _run_state_tomo(args) -> None:
    settings = pipeline.resolve_settings(args.config, args.seed, pipeline.STATE_DEFAULTS)
    paths = pipeline.cmd_state_tomo(args.dataset, settings, args.out, write_wigner=args.wigner)
    for name, path in paths.items():
        print(f"wrote {name}: {path}")


def _run_process_tomo(args) -> None:
    settings = pipeline.resolve_settings(args.config, args.seed, pipeline.PROCESS_DEFAULTS)
    paths = pipeline.cmd_process_tomo(args.manifest, settings, args.out, reference_path=args.reference)
    for name, path in paths.items():
        print(f"wrote {name}: {path}")


def _run_predict(args) -> None:
    paths = pipeline.cmd_predict(args.tensor, args.state, args.out)
    for name, path in paths.items():
        print(f"wrote {name}: {path}")


def _run_wigner(args) -> None:
    rho = io.read_density_matrix(args.state)
    axis = pipeline.default_wigner_axes()
    io.write_wigner_grid(args.out, wigner(rho, axis, axis))
    print(f"wrote wigner: {args.out}")


def _run_fidelity(args) -> None:
    kind_a, kind_b = io.sniff_format(args.file_a), io.sniff_format(args.file_b)
    if kind_a != kind_b:
        raise ValueError(f"cannot compare a {kind_a} file with a {kind_b} file")
    if kind_a == "density-matrix":
        fid = state_fidelity(io.read_density_matrix(args.file_a), io.read_density_matrix(args.file_b))
        print(f"fidelity,{fid:.12g}")
    elif kind_a == "process-tensor":
        full, diag = process_fidelity(io.read_process_tensor(args.file_a), io.read_process_tensor(args.file_b))
        print(f"full,{full:.12g}")
        print(f"diagonal,{diag:.12g}")
    else:
        raise ValueError(f"fidelity is not defined for {kind_a} files")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"csqpt: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
