"""Command-line driver.

    pm infer FILE --sig SIG [...]   show inferred schemes
    pm check FILE --sig SIG [...]   typecheck and solve the main expression
    pm run   FILE --sig SIG [...]   solve, elaborate, and evaluate
    pm laws  SIG [...]              check the signature's laws

Exit codes: 0 ok, 1 parse error, 2 type/solve error, 3 law or coherence
violation, 4 runtime error.  Set PM_COLOR=0 to disable color.
"""

from __future__ import annotations

import os
import sys
from typing import Optional

import click

from .graph import build_graph, find_core, unambiguous
from .infer import ProgramResult, TypeProblem, infer_program
from .laws import check_derived_laws, check_laws
from .runtime import get_runtime, render_value, run_program
from .signature import Signature, load_signature_file
from .solve import (
    build_evidence,
    coherence_check,
    enumerate_solutions,
    render_solution,
    solve,
)
from .syntax import (
    PmError,
    free_type_vars,
    parse_program_source,
    print_main_typing,
    print_term,
    print_type,
    scheme_monad_names,
)


def _use_color() -> bool:
    env = os.environ.get("PM_COLOR", "auto")
    if env == "0":
        return False
    if env == "1":
        return True
    return sys.stdout.isatty()


def _fail(e: PmError) -> None:
    click.secho(str(e), err=True, fg="red" if _use_color() else None)
    details = getattr(e, "details", None)
    if details:
        for d in details:
            click.echo(f"  {d}", err=True)
    sys.exit(e.exit_code)


def _load(sig_paths: tuple[str, ...]) -> Signature:
    if not sig_paths:
        raise TypeProblem("no signature given (use --sig)")
    sigs = [load_signature_file(p) for p in sig_paths]
    return Signature.merge(sigs)


def _read_program(path: str):
    with open(path) as f:
        return parse_program_source(f.read())


def _parse_store(text: Optional[str]) -> dict:
    store: dict = {}
    if not text:
        return store
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise TypeProblem(f"bad --store entry {part!r} (want cell=int)")
        k, v = part.split("=", 1)
        try:
            store[k.strip()] = int(v)
        except ValueError:
            raise TypeProblem(f"bad --store value for {k.strip()!r}: {v!r}")
    return store


def _parse_script(text: Optional[str]) -> tuple:
    if not text:
        return ()
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            try:
                out.append(int(part))
            except ValueError:
                raise TypeProblem(f"bad --script value {part!r}")
    return tuple(out)


sig_option = click.option("--sig", "sigs", multiple=True,
                          type=click.Path(exists=True, dir_okay=False),
                          help="signature file (repeatable)")
bound_option = click.option("--bound", default=2, show_default=True,
                            help="ground-universe depth for solving and laws")


@click.group()
@click.version_option(package_name="lambdapm")
def main() -> None:
    """A constraint-based effect inferencer and interpreter."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@sig_option
@click.option("--no-simplify", is_flag=True, help="keep raw constraint bags")
@click.option("--no-hide", is_flag=True, help="show constraints the scheme hides")
@click.option("--show-graph", is_flag=True, help="print each bag's flow structure")
@click.option("--show-elaborated", is_flag=True, help="print evidence-passing terms")
def infer(file: str, sigs: tuple[str, ...], no_simplify: bool, no_hide: bool,
          show_graph: bool, show_elaborated: bool) -> None:
    """Infer and print a scheme for every top-level binding."""
    try:
        sig = _load(sigs)
        program = _read_program(file)
        result = infer_program(program, sig, simplify_schemes=not no_simplify,
                               hide_schemes=not no_simplify)
        for b in result.bindings:
            scheme = b.raw_scheme if no_simplify else b.scheme
            click.echo(f"{b.name} : {print_type(scheme, show_hidden=no_hide)}")
            _describe_scheme(b, no_simplify)
            if show_elaborated:
                names = {c.cid: f"b{i + 1}"
                         for i, c in enumerate(b.scheme.constraints)}
                click.echo(f"  = {print_term(b.target, names)}")
            if show_graph:
                _describe_graph(list(scheme.constraints))
        if result.main_type is not None:
            click.echo("main : " + print_main_typing(
                result.main_bag, result.main_monad, result.main_type))
            if show_elaborated:
                click.echo(f"  = {print_term(result.main_target)}")
            if show_graph:
                _describe_graph(result.main_bag)
    except PmError as e:
        _fail(e)


def _describe_scheme(b, no_simplify: bool) -> None:
    scheme = b.raw_scheme if no_simplify else b.scheme
    names = scheme_monad_names(scheme)
    body_m = free_type_vars(scheme.body).mvars
    open_vars = [names.get(i, f"v{i}") for i in scheme.mvars if i not in body_m]
    if open_vars:
        verdict = ("unambiguous"
                   if unambiguous(list(scheme.constraints), body_m)
                   else "ambiguous")
        click.echo(f"  open: {', '.join(open_vars)} ({verdict})")


def _describe_graph(bag) -> None:
    g = build_graph(bag)
    click.echo(f"  graph: {len(bag)} constraints,"
               f" {len(g.eq_edges)} equalities, {len(g.flow_edges)} flows")
    for e in g.flow_edges:
        click.echo(f"    #{e.src.cid}.result -> #{e.dst.cid}."
                   + ("left" if e.dst.slot == 0 else "middle"))


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@sig_option
@bound_option
@click.option("--enumerate", "enumerate_", is_flag=True,
              help="print every bounded solution of the main bag")
@click.option("--check-coherence", is_flag=True,
              help="require all interface-equal solutions to agree observationally")
def check(file: str, sigs: tuple[str, ...], bound: int, enumerate_: bool,
          check_coherence: bool) -> None:
    """Typecheck a program; solve its main expression's constraints."""
    try:
        sig = _load(sigs)
        program = _read_program(file)
        result = infer_program(program, sig)
        for b in result.bindings:
            click.echo(f"{b.name} : {print_type(b.scheme)}")
        if result.main_bag or result.main_type is not None:
            sol, diag = solve(result.main_bag, sig, depth=bound)
            if sol is None:
                assert diag is not None
                raise TypeProblem(diag.render())
            if enumerate_:
                sols = enumerate_solutions(result.main_bag, sig, depth=bound)
                click.echo(f"{len(sols)} solution(s):")
                for s in sols:
                    click.echo(f"  {render_solution(s)}")
            if check_coherence:
                protected = _main_protected(result)
                report = coherence_check(result.main_bag, sig, protected,
                                         depth=bound)
                click.echo(
                    f"coherence: {report.solutions} solutions,"
                    f" {report.groups} interface groups,"
                    f" {report.pairs} pairs compared")
                if not report.ok:
                    click.secho(f"incoherent: {report.witness}", err=True,
                                fg="red" if _use_color() else None)
                    sys.exit(3)
        click.echo("ok")
    except PmError as e:
        _fail(e)


def _main_protected(result: ProgramResult) -> set[int]:
    protected = set(free_type_vars(result.main_type).mvars)
    from .syntax import MVar
    if isinstance(result.main_monad, MVar):
        protected.add(result.main_monad.ident)
    return protected


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@sig_option
@bound_option
@click.option("--store", default=None, help="initial store, e.g. savings=100,interest=5")
@click.option("--script", default=None, help="values for recv, e.g. 41,7")
@click.option("--fuel", default=1_000_000, show_default=True,
              help="evaluation step budget")
def run(file: str, sigs: tuple[str, ...], bound: int, store: Optional[str],
        script: Optional[str], fuel: int) -> None:
    """Infer, solve, elaborate, and evaluate a program."""
    try:
        sig = _load(sigs)
        program = _read_program(file)
        result = infer_program(program, sig)
        if result.main_type is None:
            raise TypeProblem("nothing to run: the file has no main expression")
        sol, diag = solve(result.main_bag, sig, depth=bound)
        if sol is None:
            assert diag is not None
            raise TypeProblem(diag.render())
        rt = get_runtime(sig.runtime_name)
        eenv = build_evidence(result.main_bag, sol, rt)
        target = result.whole_target()
        assert target is not None
        value, s0, s1 = run_program(target, rt, sig.prims, eenv,
                                    store=_parse_store(store),
                                    script=_parse_script(script), fuel=fuel)
        click.echo(render_value(value))
        for line in rt.render_state(s0, s1):
            click.echo(line)
    except PmError as e:
        _fail(e)


@main.command()
@click.argument("sigfiles", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@bound_option
@click.option("--samples", default=2, show_default=True,
              help="runtime samples per equational check")
def laws(sigfiles: tuple[str, ...], bound: int, samples: int) -> None:
    """Check the polymonad laws of one or more signature files (merged)."""
    try:
        sig = Signature.merge([load_signature_file(p) for p in sigfiles])
        report = check_laws(sig, depth=bound, samples=samples)
        derived = check_derived_laws(sig, depth=bound, samples=samples)
        for c in report.checks + derived:
            mark = "ok" if c.ok else "FAIL"
            line = f"{c.name}: {mark}"
            if c.witness:
                line += f" — {c.witness}"
            if c.ok:
                click.echo(line)
            else:
                click.secho(line, fg="red" if _use_color() else None)
        if report.ok and all(c.ok for c in derived):
            click.echo(f"all laws pass (bound={report.bound})")
        else:
            sys.exit(3)
    except PmError as e:
        _fail(e)


if __name__ == "__main__":
    main()
