"""Command line interface.

`run` drives the whole workflow headlessly against the HTTP API: by default
it spins the service up in-process (no socket), or targets a remote server
with --server. `serve` and `model-server` start the two FastAPI apps;
`lexicon build` compiles a phrase table snapshot.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
import tempfile
from pathlib import Path

import httpx

from .backends import BackendConfig, create_backends
from .config import DEFAULT_CONFIG, EngineConfig
from .errors import EngineError
from .lexicon import Lexicon, ingest, load_snapshot, save_snapshot


def _load_config(path: str | None) -> EngineConfig:
    if not path:
        return DEFAULT_CONFIG
    return EngineConfig.load(path)


def _load_lexicon(path: str | None) -> Lexicon:
    if not path:
        return Lexicon()
    return load_snapshot(path)


def _client_for(args) -> httpx.Client:
    if args.server:
        return httpx.Client(base_url=args.server, timeout=120.0)
    from .service import create_app

    config = _load_config(args.config)
    backend_cfg = BackendConfig(
        kind=args.backend,
        base_url=args.backend_url or "",
        timeout=config.backend_timeout,
        retries=config.backend_retries,
        auth_env="ENGINE_CHAT_TOKEN",
    )
    backends = create_backends(backend_cfg, max_request_bytes=config.chat_max_request_bytes)
    data_dir = args.data_dir or tempfile.mkdtemp(prefix="regiongen-")
    app = create_app(
        config=config,
        backends=backends,
        data_dir=data_dir,
        lexicon=_load_lexicon(args.lexicon),
    )
    # sync in-process ASGI bridge; no socket involved
    from starlette.testclient import TestClient

    return TestClient(app, base_url="http://engine.local")


def _check(resp: httpx.Response) -> dict:
    if resp.status_code >= 400:
        try:
            detail = resp.json()
        except ValueError:
            detail = {"detail": resp.text}
        raise SystemExit(f"request failed ({resp.status_code}): {json.dumps(detail, indent=2)}")
    return resp.json()


def cmd_run(args) -> int:
    sketch_png = Path(args.sketch).read_bytes()
    legend = json.loads(Path(args.legend).read_text("utf-8")) if args.legend else {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with _client_for(args) as client:
        created = _check(client.post("/sessions", json={"seed": args.seed}))
        sid = created["session_id"]
        sketch = _check(
            client.put(
                f"/sessions/{sid}/sketch",
                json={"png_b64": base64.b64encode(sketch_png).decode("ascii"), "legend": legend},
            )
        )
        inferred = _check(client.post(f"/sessions/{sid}/infer"))
        (out / "space.json").write_text(
            json.dumps(inferred["space"], indent=2, sort_keys=True), "utf-8"
        )

        config = _check(client.get("/config"))
        auto_selected = []
        for region in sketch["regions"]:
            rid = region["region_id"]
            resp = client.post(f"/sessions/{sid}/regions/{rid}/candidates")
            if resp.status_code == 409:
                continue  # stuff region: no shape candidates
            data = _check(resp)
            _check(
                client.post(
                    f"/sessions/{sid}/regions/{rid}/candidates/0/select",
                    json={"version": data["version"]},
                )
            )
            auto_selected.append(rid)

        generated = _check(
            client.post(f"/sessions/{sid}/generate", json={"samples": args.samples})
        )
        request_doc = _check(client.get(f"/sessions/{sid}/request"))
        (out / "request.json").write_text(
            json.dumps(request_doc, indent=1, sort_keys=True), "utf-8"
        )
        image_count = 0
        for record in generated["results"]:
            if record.get("image_png_b64"):
                (out / f"result_{record['index']}.png").write_bytes(
                    base64.b64decode(record["image_png_b64"])
                )
                image_count += 1
        # no session id here: artifacts must be byte-stable for a fixed seed
        metadata = {
            "seed": created["seed"],
            "samples": args.samples,
            "auto_selected_top_candidate": auto_selected,
            "canvas_size": config["canvas_size"],
            "results": [
                {"index": r["index"], "seed": r["seed"], "error": r.get("error")}
                for r in generated["results"]
            ],
        }
        (out / "metadata.json").write_text(json.dumps(metadata, indent=2, sort_keys=True), "utf-8")
    print(f"session {sid}: wrote {image_count} image(s) to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args.config)
    backend_cfg = BackendConfig(
        kind=args.backend,
        base_url=args.backend_url or "",
        timeout=config.backend_timeout,
        retries=config.backend_retries,
        auth_env="ENGINE_CHAT_TOKEN",
    )
    backends = create_backends(backend_cfg, max_request_bytes=config.chat_max_request_bytes)
    app = create_app(
        config=config,
        backends=backends,
        data_dir=args.data_dir,
        lexicon=_load_lexicon(args.lexicon),
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_model_server(args) -> int:
    import uvicorn

    from .backends.server import create_model_server

    uvicorn.run(
        create_model_server(), host=args.host, port=args.port, log_level="warning"
    )
    return 0


def cmd_lexicon_build(args) -> int:
    lex = ingest(args.input)
    save_snapshot(lex, args.output)
    attrs = sum(len(v) for v in lex.attributes.values())
    rels = sum(len(v) for v in lex.relationships.values())
    print(f"{args.output}: {attrs} attribute phrases, {rels} relationship phrases")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regiongen")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="headless sketch-to-image run")
    run.add_argument("--sketch", required=True, help="palette PNG sketch path")
    run.add_argument("--legend", help="legend JSON sidecar path")
    run.add_argument("--backend", choices=("mock", "http"), default="mock")
    run.add_argument("--backend-url", help="model server base URL for --backend http")
    run.add_argument("--config", help="engine config JSON path")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--samples", type=int, default=1)
    run.add_argument("--out", required=True, help="artifact output directory")
    run.add_argument("--server", help="remote service URL (default: in-process)")
    run.add_argument("--data-dir", help="session storage dir for in-process mode")
    run.add_argument("--lexicon", help="lexicon snapshot path")
    run.set_defaults(func=cmd_run)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir", default="data")
    serve.add_argument("--backend", choices=("mock", "http"), default="mock")
    serve.add_argument("--backend-url", help="model server base URL for --backend http")
    serve.add_argument("--config", help="engine config JSON path")
    serve.add_argument("--lexicon", help="lexicon snapshot path")
    serve.add_argument("--ui-dir", help="static UI bundle to mount at /ui")
    serve.set_defaults(func=cmd_serve)

    ms = sub.add_parser("model-server", help="serve the mock model backends over HTTP")
    ms.add_argument("--host", default="127.0.0.1")
    ms.add_argument("--port", type=int, default=8500)
    ms.set_defaults(func=cmd_model_server)

    lex = sub.add_parser("lexicon", help="lexicon utilities")
    lex_sub = lex.add_subparsers(dest="lexicon_command", required=True)
    build = lex_sub.add_parser("build", help="compile a TSV phrase table into a snapshot")
    build.add_argument("input", help="TSV input: name<TAB>kind<TAB>phrase")
    build.add_argument("output", help="snapshot output path")
    build.set_defaults(func=cmd_lexicon_build)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
