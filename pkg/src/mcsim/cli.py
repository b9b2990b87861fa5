"""Thin command-line client for the simulation service.

Verbs: run, sweep, validate, gen-trace, serve.  By default requests are
served in-process (same handlers the HTTP service exposes); `--server URL`
sends them to a running service instead.  Artifact files are written from
the response text verbatim, so local and remote execution produce identical
bytes.

Exit codes: 0 success, 1 config error, 2 run error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx
from fastapi import HTTPException

from .runner import safe_filename
from .service import app as service_app
from .service.app import gen_trace as svc_gen_trace
from .service.app import run as svc_run
from .service.app import sweep as svc_sweep
from .service.app import validate as svc_validate
from .service.schemas import (
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    TraceRequest,
    TraceResponse,
    ValidateRequest,
    ValidateResponse,
)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUN_ERROR = 2


class ConfigFailure(Exception):
    pass


class RunFailure(Exception):
    pass


class LocalClient:
    """Calls the service handlers in-process."""

    def _call(self, fn, req):
        try:
            return fn(req)
        except HTTPException as exc:
            if exc.status_code == 422:
                raise ConfigFailure(exc.detail) from None
            raise RunFailure(exc.detail) from None

    def validate(self, req: ValidateRequest) -> ValidateResponse:
        return self._call(svc_validate, req)

    def run(self, req: RunRequest) -> RunResponse:
        return self._call(svc_run, req)

    def sweep(self, req: SweepRequest) -> SweepResponse:
        return self._call(svc_sweep, req)

    def gen_trace(self, req: TraceRequest) -> TraceResponse:
        return self._call(svc_gen_trace, req)


class HttpClient:
    """Talks to a remote service over HTTP."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def _post(self, path: str, payload: dict, model):
        try:
            resp = httpx.post(f"{self.base_url}{path}", json=payload, timeout=600.0)
        except httpx.HTTPError as exc:
            raise RunFailure(f"cannot reach service at {self.base_url}: {exc}") from None
        if resp.status_code == 422:
            raise ConfigFailure(resp.json().get("detail", resp.text))
        if resp.status_code != 200:
            raise RunFailure(f"HTTP {resp.status_code}: {resp.text}")
        return model.model_validate(resp.json())

    def validate(self, req: ValidateRequest) -> ValidateResponse:
        return self._post("/validate", req.model_dump(), ValidateResponse)

    def run(self, req: RunRequest) -> RunResponse:
        return self._post("/run", req.model_dump(), RunResponse)

    def sweep(self, req: SweepRequest) -> SweepResponse:
        return self._post("/sweep", req.model_dump(), SweepResponse)

    def gen_trace(self, req: TraceRequest) -> TraceResponse:
        return self._post("/traces", req.model_dump(), TraceResponse)


def make_client(server: str | None):
    return HttpClient(server) if server else LocalClient()


def _load_doc(path: str) -> tuple[dict, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigFailure(f"config file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8")), str(p.parent)
    except json.JSONDecodeError as exc:
        raise ConfigFailure(f"{p}: invalid JSON: {exc}") from None


def _resolve_out_dir(flag_value: str | None, doc: dict) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("MCSIM_OUT_DIR")
    if env:
        return Path(env)
    return Path(doc.get("output", {}).get("dir", "out"))


def _resolve_format(flag_value: str | None, doc: dict) -> str:
    return flag_value or doc.get("output", {}).get("format", "both")


def _write_artifacts(artifacts, out_dir: Path, run_key: str, fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = safe_filename(run_key)
    written = []
    if fmt in ("csv", "both"):
        p = out_dir / f"{stem}.metrics.csv"
        p.write_text(artifacts.csv_text, encoding="utf-8")
        written.append(p)
    if fmt in ("json", "both"):
        p = out_dir / f"{stem}.metrics.json"
        p.write_text(artifacts.json_text, encoding="utf-8")
        written.append(p)
    return written


def _goodput_line(run_key: str, metrics_doc: dict) -> str:
    totals = metrics_doc["totals"]
    gp = totals["aggregate_goodput_bps"] / 1e6
    return (
        f"{run_key}: goodput={gp:.3f} Mb/s "
        f"delivered={totals['delivered_sdus']}/{totals['submitted_sdus']} "
        f"ooo={totals['ooo_delivered']} declared_lost={totals['declared_lost']}"
    )


def cmd_validate(args) -> int:
    doc, base_dir = _load_doc(args.config)
    client = make_client(args.server)
    resp = client.validate(ValidateRequest(config=doc, base_dir=base_dir))
    if resp.kind == "matrix":
        print(f"valid matrix: {len(resp.run_keys)} runs")
        for key in resp.run_keys:
            print(f"  {key}")
    else:
        print("valid scenario")
    return EXIT_OK


def cmd_run(args) -> int:
    doc, base_dir = _load_doc(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    out_dir = _resolve_out_dir(args.out_dir, doc)
    fmt = _resolve_format(args.format, doc)
    client = make_client(args.server)
    resp = client.run(RunRequest(config=doc, base_dir=base_dir, include_artifacts=True))
    written = _write_artifacts(resp.artifacts, out_dir, resp.run_key, fmt)
    print(_goodput_line(resp.run_key, resp.metrics))
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc, base_dir = _load_doc(args.config)
    if "base" not in doc:
        raise ConfigFailure(f"{args.config}: sweep expects a matrix file with a 'base' scenario")
    if args.seed is not None:
        doc["base"]["seed"] = args.seed
    out_dir = _resolve_out_dir(args.out_dir, doc.get("base", {}))
    fmt = _resolve_format(args.format, doc.get("base", {}))
    client = make_client(args.server)
    resp = client.sweep(
        SweepRequest(
            matrix=doc,
            base_dir=base_dir,
            parallelism=args.parallelism,
            include_artifacts=True,
        )
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for outcome in resp.runs:
        if outcome.ok:
            _write_artifacts(outcome.artifacts, out_dir, outcome.run_key, fmt)
            print(_goodput_line(outcome.run_key, outcome.metrics))
        else:
            failures += 1
            print(f"{outcome.run_key}: FAILED: {outcome.error}")
    summary = out_dir / "summary.csv"
    summary.write_text(resp.summary_csv, encoding="utf-8")
    print(f"wrote {summary}")
    return EXIT_RUN_ERROR if failures else EXIT_OK


def cmd_gen_trace(args) -> int:
    client = make_client(args.server)
    resp = client.gen_trace(
        TraceRequest(
            seed=args.seed,
            seconds=args.seconds,
            cqi_min=args.cqi_min,
            cqi_max=args.cqi_max,
            start=args.start,
        )
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(resp.csv_text, encoding="utf-8")
    manifest_path = out.with_suffix("").with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps(resp.manifest, indent=2) + "\n", encoding="utf-8")
    m = resp.manifest
    print(
        f"wrote {out} ({m['seconds']} s, CQI {m['cqi_min']}..{m['cqi_max']}, "
        f"mean {m['cqi_mean']:.2f}) and {manifest_path}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service_app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsim",
        description="Dual-connectivity split-bearer simulator: run scenarios, sweep matrices, generate traces.",
    )
    parser.add_argument("--server", default=None, help="service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--format", choices=("csv", "json", "both"), default=None)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment matrix")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--parallelism", type=int, default=1)
    p_sweep.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_sweep.add_argument("--out-dir", default=None)
    p_sweep.add_argument("--format", choices=("csv", "json", "both"), default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_val = sub.add_parser("validate", help="validate a scenario or matrix config")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    p_gen = sub.add_parser("gen-trace", help="generate a random-walk CQI trace")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--seconds", type=int, default=30)
    p_gen.add_argument("--cqi-min", type=int, default=8)
    p_gen.add_argument("--cqi-max", type=int, default=15)
    p_gen.add_argument("--start", type=int, default=None)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=cmd_gen_trace)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigFailure as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except RunFailure as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_RUN_ERROR


if __name__ == "__main__":
    sys.exit(main())
