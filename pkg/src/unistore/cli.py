"""Operator command line.

Commands run against the store under --data-dir (default ./data, or
UNISTORE_DATA) with full rights, mirroring the in-process operations.
Failures print the wire error code and exit nonzero.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import statistics
import sys
import time

import click

from . import appraisal as _appraisal
from . import packs as _packs
from .errors import EngineError
from .model import content_dict, encode_values
from .store import Store


def _fail(exc: EngineError) -> None:
    click.echo(f"{exc.code}: {exc.message}", err=True)
    sys.exit(1)


def _open_store(ctx) -> Store:
    data_dir = ctx.obj["data_dir"]
    os.makedirs(data_dir, exist_ok=True)
    return Store(data_dir=data_dir)


@click.group()
@click.option("--data-dir", default=lambda: os.environ.get("UNISTORE_DATA", "data"),
              show_default="data", help="Store directory (log + snapshot).")
@click.pass_context
def main(ctx, data_dir):
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir


@main.command()
@click.pass_context
def init(ctx):
    """Create an empty store."""
    store = _open_store(ctx)
    click.echo(f"initialized store at {ctx.obj['data_dir']} (state {store.head})")
    store.close()


@main.command()
@click.option("--port", default=7400, show_default=True)
@click.option("--packs-dir", default="packs", show_default=True)
@click.option("--frontend-dir", default=None)
@click.pass_context
def serve(ctx, port, packs_dir, frontend_dir):
    """Run the wire API."""
    from .server import ServerConfig, serve as _serve

    config = ServerConfig(data_dir=ctx.obj["data_dir"], port=port,
                          packs_dir=packs_dir, frontend_dir=frontend_dir)
    _serve(config)


@main.group()
def pack():
    """Load and apply component packs."""


@pack.command("load")
@click.argument("manifest")
@click.pass_context
def pack_load(ctx, manifest):
    """Validate a manifest and register it with the store directory."""
    try:
        loaded = _packs.load_pack(manifest)
    except EngineError as exc:
        _fail(exc)
    registry = os.path.join(ctx.obj["data_dir"], "packs")
    os.makedirs(registry, exist_ok=True)
    shutil.copy(manifest, os.path.join(registry, _packs.pack_filename(loaded.name)))
    click.echo(f"loaded pack {loaded.name!r} version {loaded.version} "
               f"({len(loaded.concepts)} concepts, {len(loaded.rules)} rules)")


@pack.command("apply")
@click.argument("name")
@click.pass_context
def pack_apply(ctx, name):
    """Apply a previously loaded pack by name."""
    registry = os.path.join(ctx.obj["data_dir"], "packs")
    path = os.path.join(registry, _packs.pack_filename(name))
    if not os.path.exists(path):
        click.echo(f"VALIDATION: pack {name!r} is not loaded (run `pack load` first)",
                   err=True)
        sys.exit(1)
    store = _open_store(ctx)
    try:
        loaded = _packs.load_pack(path)
        plan = _packs.analyze_pack(store, loaded)
        if plan.conflicts:
            for c in plan.conflicts:
                click.echo(f"CONFLICT {c.kind} at {c.location}: {c.detail}", err=True)
            sys.exit(1)
        state = _packs.apply_plan(store, None, plan)
        click.echo(f"applied {loaded.name!r}: state {state}")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--employees", type=int, required=True)
@click.pass_context
def seed(ctx, employees):
    """Seed the deterministic demo corporation."""
    store = _open_store(ctx)
    try:
        state = _packs.seed_demo(store, employees)
        click.echo(f"seeded {employees} employees: state {state}")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--unit", type=int, default=None)
@click.option("--employee", type=int, default=None)
@click.option("--state", type=int, default=None)
@click.pass_context
def appraise(ctx, unit, employee, state):
    """Score a unit (or an employee) with the stored parameters."""
    store = _open_store(ctx)
    try:
        if employee is not None:
            score = _appraisal.appraise_employee(store, employee, None, state)
        elif unit is not None:
            score = _appraisal.appraise_unit(store, unit, None, state)
        else:
            click.echo("usage: appraise --unit <id> or --employee <id>", err=True)
            sys.exit(2)
        click.echo(f"value {score.value:.4f}")
        for k, v in score.breakdown.items():
            click.echo(f"  {k}: {v}")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--domain", required=True)
@click.option("--formula", "formula_text", required=True)
@click.option("--individuate", "do_individuate", is_flag=True, default=False)
@click.option("--state", type=int, default=None)
@click.pass_context
def query(ctx, domain, formula_text, do_individuate, state):
    """Evaluate a formula over a domain's extent."""
    from .formula import check_formula, iter_satisfying, parse

    store = _open_store(ctx)
    try:
        st = store.head if state is None else state
        if do_individuate:
            ident = store.individuate(formula_text, domain, st)
            obj = store.describe(ident, st)
            click.echo(json.dumps({"individual": ident,
                                   "values": encode_values(obj.values)}, sort_keys=True))
        else:
            f = parse(formula_text)
            check_formula(f, domain, store, st)
            store.extent(domain, st)
            ids = sorted(iter_satisfying(f, store, domain, st))
            click.echo(json.dumps({"state": st, "matches": ids}))
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--to", "upto", type=int, required=True)
@click.pass_context
def replay(ctx, upto):
    """Fold the log up to a state and print the content hash."""
    store = _open_store(ctx)
    try:
        snap = store.replay(upto)
        click.echo(f"state {snap.state} hash {snap.content_hash}")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--to", "target", type=int, required=True)
@click.pass_context
def rollback(ctx, target):
    """Append a rollback marker restoring an earlier state's content."""
    store = _open_store(ctx)
    try:
        state = store.rollback(None, target)
        click.echo(f"rolled back to {target}: state {state}")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), required=True)
@click.option("--out", default="export", show_default=True)
@click.option("--state", type=int, default=None)
@click.pass_context
def export(ctx, fmt, out, state):
    """Dump store content as canonical JSON or one CSV per concept."""
    store = _open_store(ctx)
    try:
        st = store.head if state is None else state
        content = store.content_at(st)
        os.makedirs(out, exist_ok=True)
        if fmt == "json":
            path = os.path.join(out, f"content_{st}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(content_dict(content), fh, sort_keys=True, indent=2)
            click.echo(path)
        else:
            written = []
            for cname in sorted(content.concepts):
                concept = content.concepts[cname]
                rows = [content.individuals[i] for i in sorted(content.members[cname])
                        if content.individuals[i].retired_at is None]
                if not rows:
                    continue
                path = os.path.join(out, f"{cname}.csv")
                cols = [a.name for a in concept.attributes]
                with open(path, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["id"] + cols)
                    for row in rows:
                        enc = encode_values(row.values)
                        writer.writerow([row.id] + [enc.get(c, "") for c in cols])
                written.append(path)
            click.echo("\n".join(written) if written else "(no data)")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


@main.command()
@click.option("--ops", type=int, default=200, show_default=True)
@click.pass_context
def bench(ctx, ops):
    """Measure p50 latency of single-object reads and individuation."""
    store = _open_store(ctx)
    try:
        content = store.content_at(store.head)
        alive = [i for i, ind in content.individuals.items() if ind.retired_at is None]
        if not alive:
            click.echo("VALIDATION: store is empty; seed it first", err=True)
            sys.exit(1)
        reads = []
        for k in range(ops):
            ident = alive[k % len(alive)]
            t0 = time.perf_counter()
            store.get_object(ident)
            reads.append((time.perf_counter() - t0) * 1000)
        concept = max(content.members, key=lambda c: len(content.members[c]))
        sample = [content.individuals[i] for i in sorted(content.members[concept])
                  if content.individuals[i].retired_at is None]
        finds = []
        if sample:
            spec = next((a for a in content.concepts[concept].attributes
                         if a.value_type == "text"), None)
            for k in range(ops):
                row = sample[k % len(sample)]
                if spec is None or row.values.get(spec.name) is None:
                    continue
                text = str(row.values[spec.name]).replace("'", "''")
                t0 = time.perf_counter()
                try:
                    store.individuate(f"{spec.name} = '{text}'", concept)
                except EngineError:
                    pass
                finds.append((time.perf_counter() - t0) * 1000)
        click.echo(f"single-object read p50: {statistics.median(reads):.3f} ms over {len(reads)} ops")
        if finds:
            click.echo(f"individuate over {concept} ({len(sample)} rows) "
                       f"p50: {statistics.median(finds):.3f} ms over {len(finds)} ops")
    except EngineError as exc:
        _fail(exc)
    finally:
        store.close()


if __name__ == "__main__":
    main()
