"""Command line client for the solver service.

Every subcommand except `serve` is a thin wrapper over the HTTP endpoints:
by default requests run against an in-process copy of the service, and
`--server URL` sends the identical payloads to a remote one.  All files
(row CSVs, sweep CSVs, check CSVs, trace JSON) are written on the client
side, so output bytes do not depend on where the work happened.

Exit codes: 0 on success, 1 when a run failed to converge or a
verification reported failures, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .bench import rows_from_csv, rows_to_csv
from .service.schemas import RunRowModel


class ServiceClient:
    def __init__(self, server: str | None):
        if server is None:
            from .service.app import app

            self._transport: httpx.AsyncBaseTransport | None = httpx.ASGITransport(
                app=app
            )
            self._base = "http://arpbench.internal"
        else:
            self._transport = None
            self._base = server.rstrip("/")

    async def _dispatch(self, method: str, path: str, payload) -> httpx.Response:
        kwargs: dict = {"base_url": self._base, "timeout": 600.0}
        if self._transport is not None:
            kwargs["transport"] = self._transport
        async with httpx.AsyncClient(**kwargs) as client:
            return await client.request(method, path, json=payload)

    def request(self, method: str, path: str, payload=None) -> httpx.Response:
        return asyncio.run(self._dispatch(method, path, payload))


def _error_exit_code(resp: httpx.Response) -> int | None:
    """None when the response is usable, otherwise the exit code to return."""
    if resp.status_code < 300:
        return None
    try:
        detail = resp.json().get("detail")
    except (ValueError, AttributeError):
        detail = resp.text
    print(f"error: {detail}", file=sys.stderr)
    return 2 if resp.status_code in (400, 404, 422) else 1


def _parse_x0(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


# config-file keys, with the parser for each; flags always win over the file
_CONFIG_TYPES = {
    "problem": str,
    "x0": str,
    "p": int,
    "eps1": float,
    "eps2": float,
    "order": int,
    "theta": float,
    "sigma0": float,
    "sigma_min": float,
    "max_iters": int,
    "samples": int,
}


def _load_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_TYPES[key](value.strip())
    return values


def _merged_settings(args: argparse.Namespace, keys) -> dict:
    from_file = _load_config_file(args.config) if getattr(args, "config", None) else {}
    settings = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = from_file.get(key)
        if value is not None:
            settings[key] = value
    return settings


_SOLVE_PAYLOAD_KEYS = {
    "p": "p",
    "eps1": "eps1",
    "eps2": "eps2",
    "order": "criticality_order",
    "theta": "theta",
    "sigma0": "sigma0",
    "sigma_min": "sigma_min",
    "max_iters": "max_outer_iterations",
}


def _cmd_run(args) -> int:
    try:
        settings = _merged_settings(args, ["problem", "x0", *_SOLVE_PAYLOAD_KEYS])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if "problem" not in settings:
        print("error: --problem is required (flag or config file)", file=sys.stderr)
        return 2
    payload = {"problem": settings["problem"]}
    if "x0" in settings:
        payload["x0"] = _parse_x0(settings["x0"])
    for key, target in _SOLVE_PAYLOAD_KEYS.items():
        if key in settings:
            payload[target] = settings[key]
    payload["verify"] = args.verify
    payload["include_trace"] = args.trace is not None

    resp = ServiceClient(args.server).request("POST", "/solve", payload)
    rc = _error_exit_code(resp)
    if rc is not None:
        return rc
    body = resp.json()
    row = RunRowModel(**body["row"]).to_run_row()
    print(
        f"{row.problem} (p={row.p}): {row.status}  "
        f"f={row.final_f:.10e}  chi1={row.final_chi1:.3e}  chi2={row.final_chi2:.3e}"
    )
    print(
        f"iterations: {row.k_total} ({row.k_succ} successful)  "
        f"f-evals: {row.f_evals}  derivative-evals: {row.deriv_evals}"
    )
    exit_code = 0 if row.status == "converged" else 1
    verification = body.get("verification")
    if verification is not None:
        print(
            f"verification: {verification['n_checks']} checks, "
            f"{verification['n_failed']} failed"
        )
        if not verification["all_passed"]:
            exit_code = 1
    if args.out:
        Path(args.out).write_text(rows_to_csv([row]))
    if args.trace:
        Path(args.trace).write_text(json.dumps(body["trace"], indent=2) + "\n")
    return exit_code


def _cmd_sweep(args) -> int:
    payload = {
        "problems": [s for s in args.problems.split(",") if s],
        "p_values": _parse_ints(args.p_values),
        "eps1_values": _parse_floats(args.eps1_grid),
        "reps": args.reps,
        "seed": args.seed,
        "criticality_order": args.order,
    }
    if args.eps2_grid is not None:
        payload["eps2_values"] = _parse_floats(args.eps2_grid)
    resp = ServiceClient(args.server).request("POST", "/sweep", payload)
    rc = _error_exit_code(resp)
    if rc is not None:
        return rc
    body = resp.json()
    if args.out:
        Path(args.out).write_text(body["csv"])
        print(f"wrote {len(body['rows'])} rows to {args.out}", file=sys.stderr)
    else:
        print(body["csv"], end="")
    return 0


def _cmd_verify(args) -> int:
    try:
        settings = _merged_settings(
            args, ["problem", "x0", "p", "eps1", "eps2", "order", "samples"]
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if "problem" not in settings:
        print("error: --problem is required (flag or config file)", file=sys.stderr)
        return 2
    payload = {"problem": settings["problem"]}
    if "x0" in settings:
        payload["x0"] = _parse_x0(settings["x0"])
    for key, target in (
        ("p", "p"),
        ("eps1", "eps1"),
        ("eps2", "eps2"),
        ("order", "criticality_order"),
        ("samples", "n_residual_samples"),
    ):
        if key in settings:
            payload[target] = settings[key]
    resp = ServiceClient(args.server).request("POST", "/verify", payload)
    rc = _error_exit_code(resp)
    if rc is not None:
        return rc
    verification = resp.json()["verification"]
    print(verification["report_text"])
    if args.out:
        Path(args.out).write_text(verification["report_csv"])
    return 0 if verification["all_passed"] else 1


def _cmd_fit(args) -> int:
    try:
        rows = rows_from_csv(Path(args.csv).read_text())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = [
        r
        for r in rows
        if r.problem == args.problem
        and r.p == args.p
        and r.criticality_order == args.order
        and r.status == "converged"
    ]
    if not rows:
        print("error: no converged rows match the filter", file=sys.stderr)
        return 2

    if args.axis == "eps1":
        fixed = args.fixed_eps2
        other_of = lambda r: r.eps2
        axis_of = lambda r: r.eps1
        flag = "--fixed-eps2"
    else:
        fixed = args.fixed_eps1
        other_of = lambda r: r.eps1
        axis_of = lambda r: r.eps2
        flag = "--fixed-eps1"
    others = sorted({other_of(r) for r in rows})
    if fixed is None:
        if len(others) > 1:
            print(
                f"error: several {flag.lstrip('-').replace('fixed-', '')} values in the "
                f"file; disambiguate with {flag}",
                file=sys.stderr,
            )
            return 2
        fixed = others[0]
    rows = [r for r in rows if other_of(r) == fixed]
    if len(rows) < 2:
        print("error: need at least two rows along the axis", file=sys.stderr)
        return 2

    payload = {
        "eps_values": [axis_of(r) for r in rows],
        "k_values": [float(r.k_succ) for r in rows],
    }
    resp = ServiceClient(args.server).request("POST", "/fit", payload)
    rc = _error_exit_code(resp)
    if rc is not None:
        return rc
    body = resp.json()
    print(f"slope = {body['slope']}")
    print(f"intercept = {body['intercept']}")
    print(f"r_squared = {body['r_squared']}")
    print(f"n_points = {body['n_points']}")
    print(f"degenerate = {'true' if body['degenerate'] else 'false'}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("arpbench.service.app:app", host=args.host, port=args.port)
    return 0


def _add_server_flag(parser):
    parser.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="send requests to a running service instead of solving in-process",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arp-bench",
        description="benchmark and verify the adaptive regularization solver",
    )
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="solve one problem and report the run")
    run.add_argument("--problem", help="problem name (see the problems endpoint)")
    run.add_argument("--x0", help="starting point, comma separated")
    run.add_argument("--p", type=int, help="Taylor model order (default 2)")
    run.add_argument("--eps1", type=float, help="gradient tolerance")
    run.add_argument("--eps2", type=float, help="curvature tolerance")
    run.add_argument("--order", type=int, choices=(1, 2), help="criticality order")
    run.add_argument("--theta", type=float, help="inner termination factor")
    run.add_argument("--sigma0", type=float, help="initial regularization weight")
    run.add_argument("--sigma-min", type=float, dest="sigma_min")
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.add_argument("--verify", action="store_true", help="replay invariants after the run")
    run.add_argument("--trace", metavar="PATH", help="write the iteration trace as JSON")
    run.add_argument("--out", metavar="PATH", help="write the run row as CSV")
    run.add_argument("--config", metavar="PATH", help="key = value defaults file")
    _add_server_flag(run)
    run.set_defaults(handler=_cmd_run)

    sweep = sub.add_parser("sweep", help="run a tolerance grid and emit CSV")
    sweep.add_argument("--problems", required=True, help="comma separated names")
    sweep.add_argument("--p-values", dest="p_values", default="2")
    sweep.add_argument("--eps1-grid", dest="eps1_grid", required=True,
                       help="descending comma separated tolerances")
    sweep.add_argument("--eps2-grid", dest="eps2_grid", default=None)
    sweep.add_argument("--reps", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--order", type=int, choices=(1, 2), default=2)
    sweep.add_argument("--out", metavar="PATH", help="write rows here instead of stdout")
    _add_server_flag(sweep)
    sweep.set_defaults(handler=_cmd_sweep)

    verify = sub.add_parser(
        "verify", help="run with full bookkeeping and replay every invariant"
    )
    verify.add_argument("--problem")
    verify.add_argument("--x0")
    verify.add_argument("--p", type=int)
    verify.add_argument("--eps1", type=float)
    verify.add_argument("--eps2", type=float)
    verify.add_argument("--order", type=int, choices=(1, 2))
    verify.add_argument("--samples", type=int, help="residual sample count")
    verify.add_argument("--out", metavar="PATH", help="write all checks as CSV")
    verify.add_argument("--config", metavar="PATH")
    _add_server_flag(verify)
    verify.set_defaults(handler=_cmd_verify)

    fit = sub.add_parser("fit", help="fit the complexity slope from a sweep CSV")
    fit.add_argument("--csv", required=True, help="sweep output to read")
    fit.add_argument("--problem", required=True)
    fit.add_argument("--p", type=int, default=2)
    fit.add_argument("--order", type=int, choices=(1, 2), default=2)
    fit.add_argument("--axis", choices=("eps1", "eps2"), default="eps1")
    fit.add_argument("--fixed-eps1", dest="fixed_eps1", type=float, default=None)
    fit.add_argument("--fixed-eps2", dest="fixed_eps2", type=float, default=None)
    _add_server_flag(fit)
    fit.set_defaults(handler=_cmd_fit)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.handler(args)
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
