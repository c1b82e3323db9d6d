"""Command-line interface.

Exit codes: 0 when every requested check passes, 1 on a failed check or
unreadable input, 2 on usage errors.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import certify, constructions
from .serialization import (
    MatrixFileError,
    atomic_write,
    append_certificate,
    file_sha256,
    make_certificate,
    read_matrix,
    write_matrix,
)
from .sinkhorn import IterConfig, ZConfig, minimize_Z, run_from_permutation
from .tensor_core import (
    BipartiteShape,
    fourier_unimodular,
    kron,
    partial_transpose,
    permutation_matrix,
    reshuffle,
)


def _parse_alpha(text, rng_seed):
    if text in (None, "zero", "0"):
        return constructions.as_params(None), "H(0)"
    if text == "sigma":
        return constructions.sigma_params(), "H(sigma)"
    if text == "random":
        rng = np.random.default_rng(rng_seed)
        return rng.uniform(0, 6, len(constructions.PARAM_NAMES)), "H(alpha)"
    try:
        alpha = constructions.as_params([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--alpha") from exc
    return alpha, ("H(0)" if not alpha.any() else "H(alpha)")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Construct and certify two-unitary complex Hadamard matrices."""


@main.command()
@click.argument("kind", type=click.Choice(["hadamard36", "biunimodular", "fourier", "ame43", "base-b"]))
@click.option("--alpha", help="19 comma-separated parameters (sixths of a turn), 'zero', 'sigma' or 'random'.")
@click.option("--gamma", type=float, help="Constant-diagonal family parameter (hadamard36).")
@click.option("--index", "index", type=click.IntRange(1, 3), help="Which biunimodular matrix U_j.")
@click.option("--a", "a", type=float, help="U3 family parameter, in turns.")
@click.option("--d", "d", type=int, default=6, show_default=True, help="Fourier order.")
@click.option("--rng", "rng_seed", type=int, default=0, show_default=True)
@click.option("--repr", "representation", default="auto", show_default=True,
              type=click.Choice(["auto", "complex", "butson", "phase-sixths"]))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def generate(kind, alpha, gamma, index, a, d, rng_seed, representation, out):
    """Write one of the known matrices (unimodular normalisation) to OUT."""
    phases, metadata = None, {}
    if kind == "hadamard36":
        if gamma is not None and alpha is not None:
            raise click.UsageError("--alpha and --gamma are exclusive")
        if gamma is not None:
            params, label = constructions.delta_params(gamma), "H(delta)"
            metadata["gamma"] = gamma
        else:
            params, label = _parse_alpha(alpha, rng_seed)
        phases = constructions.hadamard36_phases(params)
        H = np.exp(1j * np.pi * phases / 3)
        metadata.update(alpha=[float(v) for v in params], scale=6)
    elif kind == "biunimodular":
        if index is None:
            raise click.UsageError("biunimodular needs --index")
        if a is not None and index != 3:
            raise click.UsageError("--a only applies to --index 3")
        if a is not None:
            H = 6 * constructions.u3_family(a)
            label = "U3" if float(a).is_integer() else "U3(a)"
            metadata["a"] = a
        else:
            H = 6 * constructions.build_U(index)
            label = f"U{index}"
        metadata["scale"] = 6
    elif kind == "fourier":
        H, label = fourier_unimodular(d), f"F{d}"
        metadata["scale"] = float(np.sqrt(d))
    elif kind == "ame43":
        F = fourier_unimodular(3)
        perm = constructions.p9_permutation()
        H = kron(F, F) @ permutation_matrix(perm)
        label = "AME(4,3)"
        metadata.update(permutation=list(perm), scale=3)
    else:
        phases = constructions.base_matrix_B().astype(float)
        H, label = np.exp(1j * np.pi * phases / 3), "B"
        metadata["scale"] = 6
    try:
        doc = write_matrix(out, H, representation, phases=phases, label=label, metadata=metadata)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(f"wrote {label} ({doc['representation']}) to {out}")


def _subject(path, header):
    return {"path": Path(path).name, "sha256": header.get("sha256") or file_sha256(path),
            "label": header.get("label"), "n": header.get("n")}


def _load_or_fail(path, cert):
    try:
        return read_matrix(path)
    except (MatrixFileError, OSError) as exc:
        code = getattr(exc, "code", "E_IO")
        click.echo(f"FAIL read: {code}: {exc}", err=True)
        if cert:
            subj = {"path": Path(path).name,
                    "sha256": file_sha256(path) if Path(path).exists() else None}
            append_certificate(cert, make_certificate(subj, [
                {"name": "read", "passed": False, "residual": None, "error": code, "message": str(exc)}]))
        sys.exit(1)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--checks", default="unitary,two-unitary,chm", show_default=True,
              help=f"Comma-separated subset of {','.join(certify.CHECKS)}.")
@click.option("--scale", type=float, default=1.0, show_default=True,
              help="Divide by this before the unitarity checks.")
@click.option("--tol", type=float, default=None, help=f"Defaults to ${certify.TOL_ENV} or 1e-10.")
@click.option("--q-max", type=int, default=240, show_default=True)
@click.option("--cert", type=click.Path(dir_okay=False), help="Append a certificate record here.")
def verify(path, checks, scale, tol, q_max, cert):
    """Run checks on the matrix in PATH."""
    names = [c.strip() for c in checks.split(",") if c.strip()]
    bad = [c for c in names if c not in certify.CHECKS]
    if bad:
        raise click.BadParameter(f"unknown checks {bad}", param_hint="--checks")
    H, header = _load_or_fail(path, cert)
    records = [certify.run_check(c, H, scale, tol, q_max) for c in names]
    for rec in records:
        line = f"{'PASS' if rec['passed'] else 'FAIL'} {rec['name']}: residual={rec['residual']:.3e}"
        click.echo(line, err=not rec["passed"])
    if cert:
        append_certificate(cert, make_certificate(_subject(path, header), records))
    sys.exit(0 if all(r["passed"] for r in records) else 1)


@main.command("defect")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--cert", type=click.Path(dir_okay=False), help="Append a certificate record here.")
def defect_cmd(path, cert):
    """Print the defect of the matrix in PATH."""
    H, header = _load_or_fail(path, cert)
    rec = certify.defect_check(H)
    if cert:
        append_certificate(cert, make_certificate(_subject(path, header), [rec]))
    if rec["value"] is None:
        click.echo(f"indeterminate (gap ratio {rec['gap_ratio']:.3e})", err=True)
        sys.exit(1)
    click.echo(rec["value"])


def _read_permutation(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data["permutation"]
    return [int(v) for v in data]


@main.command()
@click.option("--d", "d", type=int, required=True)
@click.option("--seed-perm", type=click.Path(exists=True, dir_okay=False),
              help="JSON permutation (list, or object with a 'permutation' key).")
@click.option("--eta", type=float, default=0.05, show_default=True)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--ramp", help="Chop threshold ramp START,END,STEPS (overrides --epsilon).")
@click.option("--t-max", type=int, default=2000, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--order", type=click.Choice(["RG", "GR"]), default="RG", show_default=True)
@click.option("--rng", "rng_seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False))
def sinkhorn(d, seed_perm, eta, epsilon, ramp, t_max, tol, order, rng_seed, out, trace_path):
    """Iterate the realign-and-project map from a perturbed permutation."""
    shape = BipartiteShape(d)
    if seed_perm:
        perm = _read_permutation(seed_perm)
    elif d == 3:
        perm = constructions.p9_permutation()
    elif d == 6:
        perm = constructions.seed_permutation_6()
    else:
        perm = np.random.default_rng(rng_seed).permutation(shape.N).tolist()
    if len(perm) != shape.N:
        raise click.BadParameter(f"permutation has length {len(perm)}, expected {shape.N}")
    schedule = None
    if ramp:
        try:
            s, e, k = ramp.split(",")
            schedule = (float(s), float(e), int(k))
        except ValueError as exc:
            raise click.BadParameter("expected START,END,STEPS", param_hint="--ramp") from exc
    try:
        cfg = IterConfig(eta=eta, epsilon=epsilon, epsilon_schedule=schedule, t_max=t_max,
                         tol=tol, realign_order=order, rng_seed=rng_seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    X, trace = run_from_permutation(perm, shape, cfg)
    click.echo(f"{trace.status} after {trace.iterations} steps, residual {trace.final_residual:.3e}")
    if out:
        write_matrix(out, X, "complex", label=f"sinkhorn-d{d}",
                     metadata={"rng_seed": rng_seed, "status": trace.status})
    if trace_path:
        doc = {"config": {**cfg.__dict__, "epsilon_schedule": list(schedule) if schedule else None},
               "permutation": list(map(int, perm)), "trace": trace.to_dict()}
        atomic_write(trace_path, (json.dumps(doc, sort_keys=True) + "\n").encode())
    sys.exit(0 if trace.status == "converged" else 1)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--restarts", type=int, default=32, show_default=True)
@click.option("--budget", type=int, default=3000, show_default=True, help="Steps per restart.")
@click.option("--kappa", type=float, default=0.5, show_default=True,
              help="Noise amplitude relative to the current objective value.")
@click.option("--realign/--no-realign", default=False, show_default=True,
              help="Also try the reshuffled and partially transposed input.")
@click.option("--target", type=float, default=1e-8, show_default=True)
@click.option("--rng", "rng_seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write (V1 ⊗ V2) Y here.")
def chmize(path, restarts, budget, kappa, realign, target, rng_seed, out):
    """Search local unitaries turning PATH into a matrix with unimodular entries."""
    Y, header = _load_or_fail(path, None)
    cfg = ZConfig(restarts=restarts, budget=budget, kappa=kappa, target=target,
                  realign=realign, rng_seed=rng_seed)
    res = minimize_Z(Y, cfg)
    click.echo(f"Z = {res.value:.3e} ({res.variant}, {len(res.restart_values)} restarts)")
    if out:
        src = {"Y": Y, "R": reshuffle(Y), "Gamma": partial_transpose(Y)}[res.variant]
        write_matrix(out, kron(res.V1, res.V2) @ src, "complex",
                     label=f"chmized:{header.get('label')}", metadata={"Z": res.value})
    sys.exit(0 if res.value < target else 1)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
def report(directory):
    """Summarise the certificates (*.jsonl) in DIRECTORY as a table."""
    click.echo(certify.format_table(certify.summary_rows(directory)))


if __name__ == "__main__":
    main()
