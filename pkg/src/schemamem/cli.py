"""Command line front end.

Stateful commands operate on a store directory (--root or SCHEMAMEM_ROOT).
Exit codes: 0 success, 1 engine/operational failure, 2 usage error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any

import click

from . import __version__, evalharness
from .config import load_settings
from .engine import MemoryEngine
from .errors import MemoryError_

log = logging.getLogger(__name__)


def _fail(exc: MemoryError_) -> None:
    envelope = {"code": exc.code, "message": exc.message, "detail": exc.detail}
    click.echo(json.dumps(envelope, ensure_ascii=False, default=str), err=True)
    sys.exit(1)


def _emit(ctx: click.Context, payload: Any, human: str | None = None) -> None:
    if ctx.obj["json"] or human is None:
        click.echo(json.dumps(payload, ensure_ascii=False, indent=2, default=str))
    else:
        click.echo(human)


def _engine(ctx: click.Context, need_root: bool = True) -> MemoryEngine:
    root = ctx.obj["root"]
    if need_root and root is None:
        raise click.UsageError("a store directory is required: pass --root or set SCHEMAMEM_ROOT")
    try:
        settings = load_settings(ctx.obj["config"])
        return MemoryEngine(root=root, settings=settings)
    except MemoryError_ as exc:
        _fail(exc)
        raise  # unreachable; keeps type-checkers honest


@click.group()
@click.version_option(__version__)
@click.option("--root", envvar="SCHEMAMEM_ROOT", default=None, help="store directory")
@click.option("--config", "config_path", default=None, help="INI settings file")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@click.option("--verbose", is_flag=True, help="debug logging")
@click.pass_context
def main(ctx: click.Context, root: str | None, config_path: str | None, as_json: bool, verbose: bool) -> None:
    """Structured agent memory."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if root is not None:
        Path(root).mkdir(parents=True, exist_ok=True)
    ctx.obj = {"root": root, "config": config_path, "json": as_json}


@main.command()
@click.option("--spec", "spec_path", required=True, help="goal spec JSON file")
@click.pass_context
def init(ctx: click.Context, spec_path: str) -> None:
    """Initialize an empty store from a goal spec."""
    engine = _engine(ctx)
    try:
        summary = engine.init(spec_path)
    except MemoryError_ as exc:
        _fail(exc)
        return
    lines = [f"initialized goal {summary['name']!r} (version {summary['version']})"]
    for b in summary["buckets"]:
        lines.append(f"  {b['name']}: {b['schemas']} schemas, {b['elements']} elements [{b['id']}]")
    _emit(ctx, summary, "\n".join(lines))


@main.command()
@click.option("--file", "file_path", default=None, help="text file (or .jsonl of items)")
@click.option("--stdin", "from_stdin", is_flag=True, help="read experience text from stdin")
@click.option("--text", default=None, help="inline experience text")
@click.option("--source-tag", default="user")
@click.option("--source-quality", type=float, default=1.0)
@click.option("--report", "show_report", is_flag=True, help="print the full adaptation report")
@click.pass_context
def ingest(
    ctx: click.Context,
    file_path: str | None,
    from_stdin: bool,
    text: str | None,
    source_tag: str,
    source_quality: float,
    show_report: bool,
) -> None:
    """Store experiences and adapt memory to them."""
    sources = [opt for opt in (file_path, "stdin" if from_stdin else None, text) if opt]
    if len(sources) != 1:
        raise click.UsageError("pass exactly one of --file, --stdin, or --text")
    engine = _engine(ctx)
    items: list[dict[str, Any]] = []
    if text is not None:
        items.append({"raw_text": text, "source_tag": source_tag, "source_quality": source_quality})
    elif from_stdin:
        items.append(
            {"raw_text": sys.stdin.read(), "source_tag": source_tag, "source_quality": source_quality}
        )
    else:
        path = Path(file_path)
        if not path.exists():
            raise click.UsageError(f"no such file: {path}")
        if path.suffix == ".jsonl":
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    item = json.loads(line)
                    item.setdefault("source_tag", source_tag)
                    item.setdefault("source_quality", source_quality)
                    items.append(item)
        else:
            items.append(
                {
                    "raw_text": path.read_text(encoding="utf-8"),
                    "source_tag": source_tag,
                    "source_quality": source_quality,
                }
            )
    try:
        reports = engine.ingest_many(items)
    except MemoryError_ as exc:
        _fail(exc)
        return
    payload = [r.to_json() for r in reports]
    totals = {"assimilation": 0, "evolution": 0, "creation": 0}
    conflicts = 0
    for r in reports:
        for k in totals:
            totals[k] += r.counters.get(k, 0)
        conflicts += r.conflicts_resolved
    human = (
        f"ingested {len(reports)} experience(s): "
        f"{totals['assimilation']} assimilated, {totals['evolution']} evolved, "
        f"{totals['creation']} created, {conflicts} conflict record(s) deactivated"
    )
    _emit(ctx, payload if show_report or ctx.obj["json"] else {"summary": totals}, human)


@main.command()
@click.argument("query_text")
@click.pass_context
def query(ctx: click.Context, query_text: str) -> None:
    """Run a structured query and print the result table."""
    engine = _engine(ctx)
    try:
        table = engine.query(query_text)
    except MemoryError_ as exc:
        _fail(exc)
        return
    _emit(ctx, table.to_json(), table.render_text())


@main.command()
@click.argument("question")
@click.option("--budget", type=int, default=None, help="max tool steps")
@click.pass_context
def answer(ctx: click.Context, question: str, budget: int | None) -> None:
    """Answer a question from memory."""
    engine = _engine(ctx)
    try:
        result = engine.answer(question, budget=budget)
    except MemoryError_ as exc:
        _fail(exc)
        return
    lines = [result.text]
    if result.value is not None:
        lines.append(f"value: {result.value}")
    if result.abstained:
        lines.append("(abstained)")
    lines.append(f"evidence: {len(result.evidence)} id(s), {len(result.trace)} tool step(s)")
    _emit(ctx, result.to_json(), "\n".join(lines))


@main.command()
@click.pass_context
def inspect(ctx: click.Context) -> None:
    """Show the store layout and sizes."""
    engine = _engine(ctx)
    summary = engine.inspect()
    lines = [f"version {summary['version']}, {summary['experiences']} experience(s)"]
    for b in summary["buckets"]:
        lines.append(
            f"  {b['name'] or b['id']}: {b['schemas']} schemas, {b['elements']} elements, "
            f"{b['active_records']}/{b['records']} active records"
        )
    _emit(ctx, summary, "\n".join(lines))


@main.command()
@click.option("--thetas", required=True, help="comma-separated meta thresholds")
@click.option("--stream", "stream_path", default=None, help="JSONL experience stream")
@click.option("--fixture", is_flag=True, help="use the built-in leveled stream")
@click.option("--seed", type=int, default=11)
@click.option("--size", type=int, default=200, help="fixture stream length")
@click.pass_context
def sweep(
    ctx: click.Context,
    thetas: str,
    stream_path: str | None,
    fixture: bool,
    seed: int,
    size: int,
) -> None:
    """Re-run a stream under several meta thresholds and compare counters."""
    try:
        theta_values = [float(t) for t in thetas.split(",") if t.strip()]
    except ValueError:
        raise click.UsageError(f"bad --thetas value: {thetas!r}")
    if (stream_path is None) == (not fixture):
        raise click.UsageError("pass exactly one of --stream or --fixture")
    if fixture:
        goal_spec, stream = evalharness.make_sweep_stream(seed=seed, n=size)
        engine = MemoryEngine()  # ephemeral store seeded from the fixture spec
        engine.init(goal_spec)
    else:
        engine = _engine(ctx)
        stream = []
        for line in Path(stream_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                stream.append(json.loads(line))
    try:
        rows = engine.sweep(stream, theta_values)
    except MemoryError_ as exc:
        _fail(exc)
        return
    lines = ["theta    assimilation  evolution  creation  conflicts"]
    for row in rows:
        c = row["counters"]
        lines.append(
            f"{row['theta']:<8g} {c['assimilation']:>12} {c['evolution']:>10} "
            f"{c['creation']:>9} {row['conflicts_resolved']:>10}"
        )
    _emit(ctx, rows, "\n".join(lines))


@main.command(name="gen-suite")
@click.option("--seed", type=int, default=7)
@click.option("--questions", type=int, default=50)
@click.option("--out", "out_path", required=True, help="where to write the suite JSON")
@click.pass_context
def gen_suite(ctx: click.Context, seed: int, questions: int, out_path: str) -> None:
    """Generate a synthetic evaluation suite."""
    suite = evalharness.generate(seed=seed, n_questions=questions)
    Path(out_path).write_text(
        json.dumps(suite, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    _emit(
        ctx,
        {"out": out_path, "questions": len(suite["questions"]), "turns": len(suite["dialogue"])},
        f"wrote {out_path}: {len(suite['dialogue'])} turns, {len(suite['questions'])} questions",
    )


@main.command(name="eval")
@click.option("--suite", "suite_path", required=True, help="suite JSON file")
@click.option("--endpoint", default=None, help="run against a live service instead of in-process")
@click.option("--baseline", is_flag=True, help="also score the retrieval-only baseline")
@click.pass_context
def eval_cmd(ctx: click.Context, suite_path: str, endpoint: str | None, baseline: bool) -> None:
    """Score a suite end to end."""
    try:
        suite = evalharness.load_suite(suite_path)
        if endpoint:
            result = evalharness.run(suite, endpoint=endpoint)
        else:
            result = evalharness.run(suite, engine=MemoryEngine())
        payload: dict[str, Any] = {"engine": result}
        lines = [
            f"engine: accuracy {result['accuracy']:.3f}, coverage {result['coverage']:.3f}, "
            f"abstained {result['abstained']}/{result['n']}",
            "  per difficulty: "
            + ", ".join(f"{d}={a:.3f}" for d, a in result["per_difficulty"].items()),
        ]
        if baseline:
            base = evalharness.vector_baseline(suite)
            payload["baseline"] = base
            lines.append(
                f"baseline: accuracy {base['accuracy']:.3f} ("
                + ", ".join(f"{d}={a:.3f}" for d, a in base["per_difficulty"].items())
                + ")"
            )
    except MemoryError_ as exc:
        _fail(exc)
        return
    _emit(ctx, payload, "\n".join(lines))


@main.command()
@click.option("--host", default=None, help="bind address (default from settings)")
@click.option("--port", type=int, default=None, help="port (default from settings)")
@click.pass_context
def serve(ctx: click.Context, host: str | None, port: int | None) -> None:
    """Run the HTTP service over this store."""
    from .service import serve as run_service

    engine = _engine(ctx)
    run_service(
        engine,
        host=host or engine.settings.host,
        port=port if port is not None else engine.settings.port,
    )


if __name__ == "__main__":
    main()
