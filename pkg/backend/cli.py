"""
embezzlemeter command line: conversion distances, embezzlement scans and family limits.
"""

from dotenv import load_dotenv
load_dotenv()

import functools
import logging
import sys
from typing import Any, Dict, Optional

import click
import pydantic

from config.settings import settings
from app import __version__
from app.core.exceptions import EXIT_VALIDATION, EmbezzleMeterError, exit_code_for
from app.repositories.file_repository import file_repository
from app.services.asymptotics_service import asymptotics_service, parse_alpha_range
from app.services.conversion_service import (
    DISCRIMINATION_INPUTS,
    conversion_service,
    nielsen_convertible,
    pure_to_mixed_check,
)
from app.services.embezzlement_service import embezzlement_service, parse_schedule
from app.services.family_service import parse_family

logger = logging.getLogger("embezzlemeter")


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def handle_errors(command):
    """Map library failures to exit codes 2 (input) and 3 (numerics)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except EmbezzleMeterError as e:
            logger.error(f"{command.__name__.replace('_', '-')} failed: {str(e)}")
            click.echo(f"Error: {str(e)}", err=True)
            sys.exit(exit_code_for(e))
        except pydantic.ValidationError as e:
            message = e.errors()[0]["msg"]
            click.echo(f"Error: {message}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


def _emit_json(command: str, payload: Dict[str, Any], parameters: Dict[str, Any],
               inputs: Optional[Dict[str, str]] = None, out: Optional[str] = None) -> None:
    manifest = file_repository.manifest(command, parameters, inputs)
    text = file_repository.write_json_output(payload, manifest, out)
    if out is None:
        click.echo(text, nl=False)


def _emit_csv(command: str, frame, parameters: Dict[str, Any], out: Optional[str] = None) -> None:
    manifest = file_repository.manifest(command, parameters)
    text, manifest_text = file_repository.write_csv(frame, manifest, out)
    if out is None:
        click.echo(text, nl=False)
        click.echo(manifest_text, nl=False, err=True)


@click.group()
@click.option("--log-level", default=None, help="Logging level (defaults to EMBEZZLEMETER_LOG_LEVEL).")
@click.version_option(version=__version__, prog_name="embezzlemeter")
def cli(log_level: Optional[str]):
    """Exact LOCC conversion distances and embezzling-family diagnostics."""
    _configure_logging(log_level or settings.log_level)


@cli.command()
@click.option("--psi", required=True, type=click.Path(dir_okay=False), help="Source Schmidt vector.")
@click.option("--phi", required=True, type=click.Path(dir_okay=False), help="Target Schmidt vector.")
@click.option("--purified", is_flag=True, help="Also compute the purified star distance.")
@click.option("--method", type=click.Choice(["cvxpy", "frank-wolfe"]), default="cvxpy", show_default=True)
@click.option("--oracle", type=click.Choice(["grid", "lp"]), default=None, help="Cross-check d* by brute force.")
@click.option("--renormalize", is_flag=True, help="Rescale inputs instead of requiring sum 1.")
@click.option("--discrimination-input", type=click.Choice(DISCRIMINATION_INPUTS), default="d_star",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def dstar(psi, phi, purified, method, oracle, renormalize, discrimination_input, out):
    """Star conversion distance from PSI to PHI."""
    policy = "renormalize" if renormalize else "strict"
    p = file_repository.read_prob_vec(psi, policy=policy)
    q = file_repository.read_prob_vec(phi, policy=policy)
    report = conversion_service.report(p, q, purified=purified, method=method, oracle=oracle,
                                       discrimination_input=discrimination_input)
    parameters = {"purified": purified, "method": method, "oracle": oracle, "renormalize": renormalize,
                  "discrimination_input": discrimination_input}
    _emit_json("dstar", report.model_dump(mode="json"), parameters, {"psi": psi, "phi": phi}, out)


@cli.command()
@click.option("--psi", required=True, type=click.Path(dir_okay=False))
@click.option("--phi", required=True, type=click.Path(dir_okay=False))
@click.option("--renormalize", is_flag=True)
@handle_errors
def nielsen(psi, phi, renormalize):
    """Whether PSI converts to PHI exactly by LOCC."""
    policy = "renormalize" if renormalize else "strict"
    p = file_repository.read_prob_vec(psi, policy=policy)
    q = file_repository.read_prob_vec(phi, policy=policy)
    payload = {"convertible": nielsen_convertible(p, q), "dim": max(p.dim, q.dim)}
    _emit_json("nielsen", payload, {"renormalize": renormalize}, {"psi": psi, "phi": phi})


@cli.command("ensemble-check")
@click.option("--psi", required=True, type=click.Path(dir_okay=False))
@click.option("--ensemble", required=True, type=click.Path(dir_okay=False))
@click.option("--pure-to-mixed", is_flag=True, help="Treat the ensemble as a decomposition of a mixed target.")
@handle_errors
def ensemble_check(psi, ensemble, pure_to_mixed):
    """Whether PSI converts to the ENSEMBLE by LOCC."""
    p = file_repository.read_prob_vec(psi)
    ens = file_repository.read_ensemble(ensemble)
    result = conversion_service.check_ensemble(p, ens)
    payload = result.model_dump(mode="json")
    if pure_to_mixed:
        payload["pure_to_mixed"] = pure_to_mixed_check(p, ens)
    _emit_json("ensemble-check", payload, {"pure_to_mixed": pure_to_mixed},
               {"psi": psi, "ensemble": ensemble})


@cli.command("embezzle-scan")
@click.option("--family", "family_text", required=True, help="vdh, power:a, log:k, osc, exp:k, const:l or custom:FILE")
@click.option("--m", "m", required=True, type=int)
@click.option("--schedule", required=True, help="geometric:start,factor,count or list:n1,n2,...")
@click.option("--threads", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def embezzle_scan(family_text, m, schedule, threads, out):
    """Embezzlement distance of a family over a schedule of sizes n (CSV)."""
    spec = parse_family(family_text)
    sizes = parse_schedule(schedule, integer=True)
    evaluations = embezzlement_service.embezzle_scan(spec, m, sizes, threads=threads)
    parameters = {"family": family_text, "m": m, "schedule": schedule}
    _emit_csv("embezzle-scan", file_repository.scan_frame(evaluations), parameters, out)


@cli.command("family-limit")
@click.option("--family", "family_text", required=True)
@click.option("--m", "m", required=True, type=int)
@click.option("--numeric", is_flag=True, help="Evaluate M(y) by quadrature.")
@click.option("--schedule", default=None, help="y schedule for --numeric (geometric:... or list:...).")
@click.option("--finite-n", "finite_n", default=None, help="Schedule of n for a finite-size tail.")
@click.option("--cross-check", is_flag=True, help="Fail a y whose derivative-scan maximum misses the grid maximum.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def family_limit(family_text, m, numeric, schedule, finite_n, cross_check, out):
    """Analytic and numeric limit of the embezzlement distance of a family."""
    spec = parse_family(family_text)
    y_schedule = parse_schedule(schedule, integer=False) if schedule else None
    n_schedule = parse_schedule(finite_n, integer=True) if finite_n else None
    report = asymptotics_service.family_limit(
        spec, m, numeric=numeric or bool(schedule) or cross_check, y_schedule=y_schedule,
        finite_n_schedule=n_schedule, cross_check=cross_check,
    )
    parameters = {"family": family_text, "m": m, "numeric": numeric, "schedule": schedule,
                  "finite_n": finite_n, "cross_check": cross_check}
    _emit_json("family-limit", report.model_dump(mode="json"), parameters, out=out)


@cli.command("figure1")
@click.option("--m", "m", default=2, type=int, show_default=True)
@click.option("--alphas", default="-3:0.1:3", show_default=True, help="START:STEP:STOP, inclusive.")
@click.option("--n-values", default="1000000,10000000", show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def figure1(m, alphas, n_values, threads, out):
    """Analytic limits against finite-n distances for the x^alpha families (CSV)."""
    alpha_values = parse_alpha_range(alphas)
    sizes = parse_schedule(f"list:{n_values}", integer=True)
    frame = asymptotics_service.figure1_table(m, alpha_values, n_values=sizes, threads=threads)
    parameters = {"m": m, "alphas": alphas, "n_values": n_values}
    _emit_csv("figure1", frame, parameters, out)


if __name__ == "__main__":
    cli()
