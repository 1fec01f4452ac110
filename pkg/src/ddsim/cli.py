"""Command line front end.

``ddsim run`` and ``ddsim check`` execute a scenario file and print its
report.  By default the scenario runs in-process through the same service
layer the HTTP API uses; pass ``--server URL`` to send it to a running
``ddsim serve`` instance instead.

Exit codes: 0 clean, 1 error findings or failed assertions (``check``:
illegal nesting only), 2 parse/validation/I-O errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .service import ScenarioRequest, execute


def _load(path: str) -> str | None:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        return None


def _dispatch(scenario_file: str, mode: str, fmt: str, trace: bool,
              deterministic: bool, server: str | None) -> int:
    source = _load(scenario_file)
    if source is None:
        return 2
    name = Path(scenario_file).stem
    request = ScenarioRequest(source=source, name=name,
                              deterministic_reductions=deterministic)
    if server:
        import httpx

        resp = httpx.post(f"{server.rstrip('/')}/{mode}",
                          json=request.model_dump(), timeout=60.0)
        resp.raise_for_status()
        payload = resp.json()
        exit_code = payload["exit_code"]
        report_doc = payload["report"]
    else:
        response = execute(request, mode)
        exit_code = response.exit_code
        report_doc = response.report
    if fmt == "json":
        click.echo(json.dumps(report_doc, sort_keys=True, indent=2))
    else:
        from .simulator import RunReport

        report = RunReport(scenario=report_doc.get("scenario", name),
                           mode=report_doc.get("mode", mode),
                           exit_code=exit_code)
        report.diagnostics = report_doc.get("diagnostics", [])
        report.assertions = report_doc.get("assertions", [])
        report.reductions = report_doc.get("reductions", [])
        report.races = report_doc.get("races", [])
        report.events = report_doc.get("events", [])
        report.present_table = report_doc.get("present_table", [])
        report.spaces = report_doc.get("spaces", [])
        click.echo(report.to_text(trace=trace), nl=False)
    return exit_code


_common_options = [
    click.option("--format", "fmt", type=click.Choice(["text", "json"]),
                 default="text", show_default=True, help="Report format."),
    click.option("--trace", is_flag=True,
                 help="Include the full event log in text output."),
    click.option("--deterministic-reductions", "deterministic", is_flag=True,
                 help="Force bit-reproducible mode for every reduction."),
    click.option("--seed", type=int, default=0,
                 help="Reserved; simulated addresses are deterministic "
                      "regardless."),
    click.option("--server", default=None, metavar="URL",
                 help="Send the scenario to a running ddsim service."),
]


def _apply(options, f):
    for opt in reversed(options):
        f = opt(f)
    return f


@click.group()
def main() -> None:
    """Simulator for directive-based accelerator data management."""


@main.command("run")
@click.argument("scenario_file", type=click.Path())
def run_cmd(**kwargs) -> None:
    """Execute a scenario and report events, diagnostics, and assertions."""
    sys.exit(_dispatch(kwargs["scenario_file"], "run", kwargs["fmt"],
                       kwargs["trace"], kwargs["deterministic"],
                       kwargs["server"]))


@main.command("check")
@click.argument("scenario_file", type=click.Path())
def check_cmd(**kwargs) -> None:
    """Diagnose a scenario without reporting device state; partial deep
    copies downgrade to warnings."""
    sys.exit(_dispatch(kwargs["scenario_file"], "check", kwargs["fmt"],
                       kwargs["trace"], kwargs["deterministic"],
                       kwargs["server"]))


run_cmd = _apply(_common_options, run_cmd)
check_cmd = _apply(_common_options, check_cmd)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_cmd(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
