"""Thin command-line client for the simulation service.

By default the CLI mounts the service in-process (no socket); pass
--server URL to target a running instance instead. Results are written
locally as CSV or JSON.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

import argparse
import json
import sys

import httpx

from . import montecarlo as mc

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


class _InProcessClient:
    """Synchronous facade over the ASGI app, no socket involved."""

    def __init__(self, app):
        self._app = app

    def post(self, path, json=None):
        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://gbcf.lab", timeout=None
            ) as client:
                return await client.post(path, json=json)

        return asyncio.run(go())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import app

    return _InProcessClient(app)


def _report_from_dict(d):
    fb = d["snr_fb_db_or_inf"]
    return mc.BlerReport(
        scheme=d["scheme"],
        k=(d["k1"], d["k2"]),
        n=d["n"],
        snr_f_db=d["snr_f_db"],
        snr_fb_db=None if fb == "inf" else float(fb),
        trials=d["trials"],
        block_errors=tuple(d["block_errors"]),
        bler=(d["bler_u1"], d["bler_u2"]),
        bler_joint=d["bler_joint"],
        ci=((d["ci_u1_lo"], d["ci_u1_hi"]), (d["ci_u2_lo"], d["ci_u2_hi"])),
        ci_joint=(d["ci_joint_lo"], d["ci_joint_hi"]),
        seed=d["seed"],
        wall_time_s=d["wall_time_s"],
    )


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code in (400, 422):
        detail = resp.json().get("detail", resp.text)
        print(f"configuration error: {detail}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    resp.raise_for_status()
    return resp.json()


def _emit(reports, fmt, path, timing):
    try:
        mc.emit(reports, fmt, path, timing=timing)
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        sys.exit(EXIT_IO)


def _add_run_args(p, with_trials=True):
    p.add_argument("--scheme", required=True, choices=["ol", "eol", "neural", "td"])
    p.add_argument("--k1", required=True, type=int)
    p.add_argument("--k2", required=True, type=int)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--snr-f", type=float, help="forward SNR in dB")
    fb = p.add_mutually_exclusive_group()
    fb.add_argument("--snr-fb", type=float, help="feedback SNR in dB")
    fb.add_argument(
        "--noiseless-fb", action="store_true", help="noiseless feedback (default)"
    )
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0, help="average transmit power")
    p.add_argument("--weights", help="codec weight file (neural scheme)")
    p.add_argument("--trials", required=with_trials, type=int, default=None)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument(
        "--min-errors", type=int,
        help="extend past --trials until this many block errors per user "
             "(drops trial-count reproducibility)",
    )
    p.add_argument(
        "--no-timing",
        action="store_true",
        help="write wall_time_s as 0.0 so identical runs emit identical bytes",
    )
    p.add_argument("--server", help="remote service URL (default: in-process)")


def _payload(args):
    return {
        "scheme": args.scheme,
        "k1": args.k1,
        "k2": args.k2,
        "n": args.n,
        "snr_f_db": args.snr_f,
        "snr_fb_db": args.snr_fb,
        "g": args.g,
        "p": args.p,
        "weights": args.weights,
        "trials": args.trials,
        "seed": args.seed,
        "min_errors": getattr(args, "min_errors", None),
    }


def cmd_run(args):
    if args.snr_f is None:
        print("configuration error: --snr-f is required", file=sys.stderr)
        return EXIT_CONFIG
    with _client(args.server) as client:
        data = _post(client, "/run", _payload(args))
    _emit([_report_from_dict(data)], args.format, args.out, not args.no_timing)
    return EXIT_OK


def cmd_sweep(args):
    payload = _payload(args)
    if args.snr_f is None:
        payload["snr_f_db"] = args.snr_f_grid[0]
    payload["snr_f_grid"] = args.snr_f_grid
    payload["snr_fb_grid"] = args.snr_fb_grid
    with _client(args.server) as client:
        data = _post(client, "/sweep", payload)
    _emit([_report_from_dict(d) for d in data], args.format, args.out,
          not args.no_timing)
    return EXIT_OK


def cmd_interpret(args):
    lo, hi, step = args.grid
    payload = {
        "weights": args.weights,
        "round": args.round,
        "fix_user": args.fix_user,
        "grid_lo": lo,
        "grid_hi": hi,
        "grid_step": step,
    }
    with _client(args.server) as client:
        data = _post(client, "/interpret", payload)
    try:
        if args.out.endswith(".json"):
            with open(args.out, "w") as f:
                json.dump(data, f, indent=1)
                f.write("\n")
        else:
            with open(args.out, "w") as f:
                f.write("y_tilde,x\n")
                for gv, xv in zip(data["grid"], data["x"]):
                    f.write(f"{gv!r},{xv!r}\n")
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    if data["degenerate"]:
        print("degenerate sweep: constant grid, fit undefined")
    else:
        print(f"slope {data['slope']:.6g}  r2 {data['r2']:.6g}")
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _grid_spec(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise argparse.ArgumentTypeError("grid must be lo:hi:step") from e
    if step <= 0:
        raise argparse.ArgumentTypeError("grid step must be positive")
    return lo, hi, step


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError as e:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from e


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gbcf-lab",
        description="Monte-Carlo lab for broadcast-channel feedback codes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="estimate BLER at one operating point")
    _add_run_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="estimate BLER over an SNR grid")
    _add_run_args(p_sweep)
    p_sweep.add_argument("--snr-f-grid", required=True, type=_float_list)
    p_sweep.add_argument("--snr-fb-grid", type=_float_list)
    p_sweep.set_defaults(func=cmd_sweep)

    p_int = sub.add_parser(
        "interpret", help="sweep the learned encoder against one feedback value"
    )
    p_int.add_argument("--weights", required=True)
    p_int.add_argument("--round", type=int, default=3)
    p_int.add_argument("--fix-user", required=True, type=int, choices=[1, 2])
    p_int.add_argument(
        "--grid", required=True, type=_grid_spec,
        help="lo:hi:step (use --grid=-3:3:0.25 for a negative lower bound)",
    )
    p_int.add_argument("--out", required=True)
    p_int.add_argument("--server", help="remote service URL (default: in-process)")
    p_int.set_defaults(func=cmd_interpret)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except httpx.HTTPError as e:
        print(f"service error: {e}", file=sys.stderr)
        code = EXIT_IO
    sys.exit(code)


if __name__ == "__main__":
    main()
