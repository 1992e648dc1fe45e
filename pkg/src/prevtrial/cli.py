"""Command-line front end.

Each subcommand builds a request, sends it to the HTTP service (in-process
ASGI by default, a remote instance with --server), and renders the response
to csv, json, or markdown. Outputs are written atomically and formatted so
that identical runs produce identical bytes.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import os
import sys

import httpx

from . import __version__
from .formats import FORMATS, atomic_write, render_mapping, render_table

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        if server:
            resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
        else:
            from .service import app

            async def go():
                transport = httpx.ASGITransport(app=app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://prevtrial"
                ) as client:
                    return await client.post(path, json=payload, timeout=None)

            resp = asyncio.run(go())
    except httpx.HTTPError as exc:
        raise CliFailure(EXIT_IO, f"service request failed: {exc}") from None
    if resp.status_code == 200:
        return resp.json()
    if resp.status_code == 422:
        detail = resp.json().get("detail", [])
        if detail:
            loc = detail[0].get("loc", [])
            field = ".".join(str(x) for x in loc[1:]) or "input"
            raise CliFailure(EXIT_VALIDATION, f"{field}: {detail[0].get('msg', 'invalid')}")
        raise CliFailure(EXIT_VALIDATION, "input: invalid request")
    raise CliFailure(EXIT_NUMERIC, f"service error {resp.status_code}: {resp.text[:200]}")


def _emit(text: str, output: str | None) -> None:
    if output:
        try:
            atomic_write(output, text)
        except OSError as exc:
            raise CliFailure(EXIT_IO, f"cannot write {output}: {exc}") from None
    else:
        sys.stdout.write(text)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliFailure(EXIT_IO, f"input: no such file {path}") from None
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"input: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliFailure(EXIT_VALIDATION, f"input: {path} is not valid JSON ({exc})") from None


def _require(args: argparse.Namespace, names: list[str]) -> None:
    for name in names:
        if getattr(args, name) is None:
            flag = "--" + name.replace("_", "-")
            raise CliFailure(EXIT_VALIDATION, f"{name}: required (pass {flag})")


def _threads(value: str | None) -> int:
    if value is None:
        value = os.environ.get("PREVTRIAL_THREADS") or "1"
    if value == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise CliFailure(EXIT_VALIDATION, f"threads: expected a count or 'auto', got {value!r}")
    if n < 1:
        raise CliFailure(EXIT_VALIDATION, f"threads: must be >= 1, got {n}")
    return n


def _allocation(value) -> list[int]:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return [int(value[0]), int(value[1])]
    try:
        a, b = str(value).split(":")
        return [int(a), int(b)]
    except ValueError:
        raise CliFailure(
            EXIT_VALIDATION, f"allocation: expected 'a:b' integers, got {value!r}"
        ) from None


def _design_payload(args: argparse.Namespace) -> dict:
    _require(args, ["design", "pe_null", "pe_alt", "inc_treat", "inc_control"])
    return {
        "design": args.design,
        "pe_null": args.pe_null,
        "pe_alt": args.pe_alt,
        "one_sided_alpha": args.alpha,
        "power": args.power,
        "inc_treat": args.inc_treat,
        "inc_control": args.inc_control,
        "followup": args.followup,
        "accrual": args.accrual,
        "dropout": args.dropout,
        "dropout_is_annual": bool(args.dropout_annual),
        "allocation": _allocation(args.allocation),
        "model": args.model,
    }


def _echo(command: str, args: argparse.Namespace, payload: dict) -> dict:
    config = {"command": command, "format": args.format}
    for key in sorted(payload):
        value = payload[key]
        if isinstance(value, (list, tuple)):
            value = ":".join(str(v) for v in value)
        config[key] = value
    return config


def cmd_size(args: argparse.Namespace) -> int:
    payload = _design_payload(args)
    resp = _post(args.server, "/size", payload)
    _emit(render_mapping(resp, args.format, _echo("size", args, payload)), args.output)
    return EXIT_OK


TABLE2_COLUMNS = [
    "design",
    "pe_null",
    "pe_alt",
    "inc_treat",
    "inc_control",
    "n_linear_person_time",
    "n_exponential_depletion",
    "n_published",
    "rel_dev_linear",
    "rel_dev_exponential",
]


def cmd_table2(args: argparse.Namespace) -> int:
    resp = _post(args.server, "/table2", {})
    rows = [[row[c] for c in TABLE2_COLUMNS] for row in resp["rows"]]
    config = {"command": "table2", "format": args.format}
    _emit(render_table(TABLE2_COLUMNS, rows, args.format, config), args.output)
    return EXIT_OK


def cmd_power(args: argparse.Namespace) -> int:
    payload = _design_payload(args)
    if args.seed is None:
        raise CliFailure(EXIT_VALIDATION, "seed: required for stochastic commands")
    if args.seed < 0:
        raise CliFailure(EXIT_VALIDATION, f"seed: must be nonnegative, got {args.seed}")
    payload.update(
        {
            "n_total": args.n_total,
            "n_reps": args.n_reps,
            "seed": args.seed,
            "threads": _threads(args.threads),
            "null_hazard_ratio": args.null_hr,
        }
    )
    print(f"seed = {args.seed}", file=sys.stderr)
    resp = _post(args.server, "/power", payload)
    _emit(render_mapping(resp, args.format, _echo("power", args, payload)), args.output)
    return EXIT_OK


def cmd_counterfactual(args: argparse.Namespace) -> int:
    _require(args, ["input"])
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise CliFailure(EXIT_VALIDATION, "input: expected a JSON object")
    for key in ("experimental", "control", "theta_c"):
        if key not in data:
            raise CliFailure(EXIT_VALIDATION, f"{key}: missing from {args.input}")
    payload = {
        "experimental": data["experimental"],
        "control": data["control"],
        "theta_c": data["theta_c"],
        "parameter": args.parameter,
        "grid_points": args.grid_points,
        "continuity": bool(args.continuity),
    }
    resp = _post(args.server, "/counterfactual", payload)
    config = _echo("counterfactual", args, {k: payload[k] for k in ("parameter", "grid_points", "continuity")})
    config["input"] = args.input
    _emit(render_mapping(resp, args.format, config), args.output)
    return EXIT_OK


def _read_panel_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise CliFailure(EXIT_VALIDATION, f"panel: {path} is empty") from None
            if header != ["virus_id", "antibody", "ic80_ug_ml"]:
                raise CliFailure(
                    EXIT_VALIDATION, "panel: header must be virus_id,antibody,ic80_ug_ml"
                )
            rows = []
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise CliFailure(EXIT_VALIDATION, "panel: expected 3 columns per row")
                rows.append(
                    {
                        "virus_id": row[0].strip(),
                        "antibody": row[1].strip(),
                        "ic80_ug_ml": row[2].strip(),
                    }
                )
            return rows
    except FileNotFoundError:
        raise CliFailure(EXIT_IO, f"panel: no such file {path}") from None
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"panel: cannot read {path}: {exc}") from None


def _read_regimens(path: str) -> list[dict]:
    data = _read_json(path)
    if isinstance(data, dict) and "regimens" in data:
        data = data["regimens"]
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise CliFailure(EXIT_VALIDATION, f"regimens: empty regimen JSON in {path}")
    return data


def cmd_bnab_score(args: argparse.Namespace) -> int:
    _require(args, ["regimens", "panel"])
    payload = {
        "regimens": _read_regimens(args.regimens),
        "panel": _read_panel_rows(args.panel),
        "model": args.model,
        "window_days": args.window_days,
        "scale": args.scale,
        "censored_mode": args.censored_mode,
        "include_curves": bool(args.dump_titers),
    }
    resp = _post(args.server, "/bnab/score", payload)
    config = _echo(
        "bnab-score",
        args,
        {k: payload[k] for k in ("model", "window_days", "scale", "censored_mode")},
    )
    config["regimens"] = args.regimens
    config["panel"] = args.panel
    if args.format == "json":
        _emit(render_mapping(resp, "json", config), args.output)
    else:
        columns = ["regimen", "virus_id", "auc_titer_days"]
        rows = []
        for entry in resp["regimens"]:
            for pv in entry["per_virus"]:
                rows.append([entry["regimen"], pv["virus_id"], pv["auc_titer_days"]])
            rows.append([entry["regimen"], "(panel mean)", entry["score"]])
        _emit(render_table(columns, rows, args.format, config), args.output)
    if args.dump_titers:
        buf = io.StringIO()
        buf.write("regimen,virus_id,day,id80\n")
        for curve in resp.get("curves", []):
            for day, value in enumerate(curve["id80"]):
                buf.write(f"{curve['regimen']},{curve['virus_id']},{day},{value:.6g}\n")
        try:
            atomic_write(args.dump_titers, buf.getvalue())
        except OSError as exc:
            raise CliFailure(EXIT_IO, f"cannot write {args.dump_titers}: {exc}") from None
    return EXIT_OK


def _scores_from_file(path: str) -> list[dict]:
    data = _read_json(path)
    if isinstance(data, dict):
        if "result" in data and isinstance(data["result"], dict):
            data = data["result"]
        if "regimens" in data:
            data = data["regimens"]
    if not isinstance(data, list) or not data:
        raise CliFailure(EXIT_VALIDATION, f"scores: no regimen scores found in {path}")
    out = []
    for item in data:
        if not isinstance(item, dict) or "regimen" not in item or "score" not in item:
            raise CliFailure(EXIT_VALIDATION, "scores: entries need regimen and score")
        out.append({"regimen": item["regimen"], "score": item["score"]})
    return out


def cmd_bnab_rank(args: argparse.Namespace) -> int:
    _require(args, ["scores"])
    payload = {"scores": _scores_from_file(args.scores)}
    resp = _post(args.server, "/bnab/rank", payload)
    config = {"command": "bnab-rank", "format": args.format, "scores": args.scores}
    columns = ["rank", "regimen", "score", "tied"]
    rows = [[r["rank"], r["regimen"], r["score"], r["tied"]] for r in resp["ranking"]]
    if args.format == "json":
        _emit(render_mapping(resp, "json", config), args.output)
    else:
        _emit(render_table(columns, rows, args.format, config), args.output)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("prevtrial.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser(overrides: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prevtrial",
        description="Two-arm prevention trial design, simulation, and regimen scoring.",
    )
    parser.add_argument("--version", action="version", version=f"prevtrial {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--format", choices=FORMATS, default="csv")
    out.add_argument("--output", default=None, help="write here instead of stdout")
    out.add_argument("--config", default=None, help="JSON file of flag defaults")
    out.add_argument("--server", default=None, help="remote service URL (default: in-process)")

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--design", choices=["layer", "compare", "combine"])
    design.add_argument("--pe-null", type=float, dest="pe_null")
    design.add_argument("--pe-alt", type=float, dest="pe_alt")
    design.add_argument("--alpha", type=float, default=0.025)
    design.add_argument("--power", type=float, default=0.90)
    design.add_argument("--inc-treat", type=float, dest="inc_treat")
    design.add_argument("--inc-control", type=float, dest="inc_control")
    design.add_argument("--followup", type=float, default=2.0)
    design.add_argument("--accrual", type=float, default=0.0)
    design.add_argument("--dropout", type=float, default=0.10)
    design.add_argument("--dropout-annual", action="store_true", dest="dropout_annual")
    design.add_argument("--allocation", default="1:1")
    design.add_argument(
        "--model",
        choices=["exponential_depletion", "linear_person_time"],
        default="exponential_depletion",
    )

    p_size = sub.add_parser("size", parents=[design, out], help="required events and sample size")
    p_size.set_defaults(func=cmd_size)

    p_table2 = sub.add_parser("table2", parents=[out], help="reference sample-size table")
    p_table2.set_defaults(func=cmd_table2)

    p_power = sub.add_parser("power", parents=[design, out], help="Monte Carlo power")
    p_power.add_argument("--n-total", type=int, default=None, dest="n_total")
    p_power.add_argument("--n-reps", type=int, default=10000, dest="n_reps")
    p_power.add_argument("--seed", type=int, default=None)
    p_power.add_argument("--null-hr", type=float, default=None, dest="null_hr")
    p_power.add_argument(
        "--threads",
        default=None,
        help="worker threads or 'auto'; defaults to $PREVTRIAL_THREADS, then 1",
    )
    p_power.set_defaults(func=cmd_power)

    p_cf = sub.add_parser(
        "counterfactual", parents=[out], help="efficacy vs counterfactual placebo"
    )
    p_cf.add_argument("--input", default=None, help="JSON file with arm counts and theta_c")
    p_cf.add_argument("--parameter", choices=["PE", "AIR"], default="PE")
    p_cf.add_argument("--grid-points", type=int, default=101, dest="grid_points")
    p_cf.add_argument("--continuity", action="store_true")
    p_cf.set_defaults(func=cmd_counterfactual)

    p_score = sub.add_parser("bnab-score", parents=[out], help="score regimens against a panel")
    p_score.add_argument("--regimens", default=None, help="regimen JSON file")
    p_score.add_argument("--panel", default=None, help="panel CSV file")
    p_score.add_argument("--model", choices=["additivity", "bliss_hill"], default="additivity")
    p_score.add_argument("--window-days", type=int, default=560, dest="window_days")
    p_score.add_argument("--scale", choices=["linear", "log10p1"], default="linear")
    p_score.add_argument(
        "--censored-mode",
        choices=["resistant", "bound_value"],
        default="resistant",
        dest="censored_mode",
    )
    p_score.add_argument("--dump-titers", default=None, dest="dump_titers")
    p_score.set_defaults(func=cmd_bnab_score)

    p_rank = sub.add_parser("bnab-rank", parents=[out], help="rank scored regimens")
    p_rank.add_argument("--scores", default=None, help="bnab-score JSON output")
    p_rank.set_defaults(func=cmd_bnab_rank)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    if overrides:
        known = set()
        for sp in (p_size, p_table2, p_power, p_cf, p_score, p_rank, p_serve):
            dests = {a.dest for a in sp._actions}
            known |= dests
            sp.set_defaults(**{k: v for k, v in overrides.items() if k in dests})
        unknown = set(overrides) - known
        if unknown:
            raise CliFailure(
                EXIT_VALIDATION, f"config: unknown keys {sorted(unknown)}"
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", default=None)
        known, _ = pre.parse_known_args(argv)
        overrides = None
        if known.config:
            data = _read_json(known.config)
            if not isinstance(data, dict):
                raise CliFailure(EXIT_VALIDATION, "config: expected a JSON object")
            overrides = data
        parser = build_parser(overrides)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return failure.code
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
