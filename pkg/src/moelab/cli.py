"""Command-line front end.

The CLI is a thin client of the service layer: each command builds a
request model, dispatches it (in process by default, over HTTP when
--server is given) and renders the typed response.  Exit codes: 0
success, 1 failed checks, 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import base64
import csv
import json
import sys
from pathlib import Path
from typing import Any

from fastapi import HTTPException
from pydantic import ValidationError

from . import service
from .config import fixtures_dir
from .errors import MoeLabError

HUMAN_FMT = "{:.4g}"     # human mode: 4 significant digits
MACHINE_FMT = "{:.17g}"  # machine mode: full round-trip precision


def _fmt(value: Any, machine: bool) -> str:
    if isinstance(value, float):
        return (MACHINE_FMT if machine else HUMAN_FMT).format(value)
    return str(value)


def _load_ref(value: str, kind: str) -> Any:
    """Map a --model/--hw argument to a fixture name or an inline config."""
    path = Path(value)
    if path.is_file():
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MoeLabError(f"malformed JSON in {value}: {exc}") from None
        if not isinstance(data, dict):
            raise MoeLabError(f"{value} must contain a JSON object")
        return data
    if (fixtures_dir() / f"{value}.json").is_file():
        return value
    raise MoeLabError(f"{kind} {value!r} is neither a readable file nor a "
                      f"known fixture")


class _RemoteError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def _dispatch(args, handler, request, response_model):
    """Run a request in process, or POST it to --server when given."""
    if getattr(args, "server", None):
        import httpx
        path = {"handle_analyze": "/analyze", "handle_roofline": "/roofline",
                "handle_compare": "/compare", "handle_forward": "/forward",
                "handle_epm_fit": "/epm/fit", "handle_epm_lambda": "/epm/lambda",
                "handle_epm_iso": "/epm/iso", "handle_check": "/check"}[handler.__name__]
        resp = httpx.post(args.server.rstrip("/") + path,
                          json=request.model_dump(mode="json"), timeout=300.0)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise _RemoteError(resp.status_code, str(detail))
        return response_model.model_validate(resp.json())
    return handler(request)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, allow_nan=False))


# ---------------------------------------------------------------------------
# Command implementations

def _cmd_analyze(args) -> int:
    req = service.AnalyzeRequest(
        model=_load_ref(args.model, "model config"),
        hardware=_load_ref(args.hw, "hardware config"),
        t_exp=args.t_exp, t_total=args.t_total)
    resp = _dispatch(args, service.handle_analyze, req, service.AnalyzeResponse)
    if args.json:
        _print_json(resp.model_dump())
        return 0
    mem, com, wl = resp.memory, resp.communication, resp.workload
    print(f"model    : {resp.model['variant']} d={resp.model['hidden_dim']} "
          f"l={resp.model['latent_dim']} N={resp.model['routed_experts']} "
          f"K={resp.model['active_experts']} S={resp.model['shared_experts']} "
          f"m={resp.model['intermediate_dim']} ({resp.model['activation']})")
    print(f"workload : t_total={_fmt(wl.t_total, False)} "
          f"t_exp={_fmt(wl.t_exp, False)} "
          f"(standard-equivalent {_fmt(wl.t_exp_standard, False)})")
    threshold = ("never compute-bound" if mem.t_exp_threshold is None
                 else _fmt(mem.t_exp_threshold, False))
    print(f"memory   : intensity={_fmt(mem.arithmetic_intensity, False)} "
          f"knee={_fmt(mem.compute_bound_intensity, False)} "
          f"threshold={threshold} regime={mem.regime}")
    print(f"comm     : t_comm/t_comp={_fmt(com.comm_compute_ratio, False)} "
          f"volume={_fmt(com.comm_bytes_per_gpu_layer, False)} B/GPU/layer")
    print(f"params   : model={resp.params.model_total:,} "
          f"active/token={resp.params.active_per_token:,} "
          f"(per layer: routed={resp.params.routed_total:,} "
          f"shared={resp.params.shared_total:,} "
          f"router={resp.params.router_total:,} "
          f"proj={resp.params.projection_total:,})")
    print(f"flops    : per token per layer={resp.flops.layer_total:,} "
          f"(routed={resp.flops.routed:,} shared={resp.flops.shared:,} "
          f"router={resp.flops.router:,} proj={resp.flops.projection:,})")
    print(f"diversity: ln C(N,K)={_fmt(resp.diversity.log_binom_base, False)} "
          f"gain={_fmt(resp.diversity.log_gain, False)} nats "
          f"u_eff={resp.diversity.u_eff}")
    _print_cost_rows(resp.cost_table, machine=False)
    for note in resp.notes:
        print(f"note     : {note}")
    return 0


def _arrow(ratio: float) -> str:
    if ratio < 1.0:
        return "better"
    if ratio == 1.0:
        return "same"
    return "worse"


def _print_cost_rows(rows, machine: bool) -> None:
    header = f"{'variant':<12} {'t_exp':>10} {'comm B/GPU':>14} " \
             f"{'weight B/exp':>14} {'flops/GPU':>14} {'regime':>14}"
    print(header)
    for row in rows:
        print(f"{row.variant:<12} {_fmt(row.t_exp, machine):>10} "
              f"{_fmt(row.comm_bytes, machine):>14} "
              f"{_fmt(row.weight_bytes_per_expert, machine):>14} "
              f"{_fmt(row.compute_flops, machine):>14} {row.regime:>14}")


def _cmd_roofline(args) -> int:
    req = service.RooflineRequest(
        model=_load_ref(args.model, "model config"),
        hardware=_load_ref(args.hw, "hardware config"),
        t_exp=args.t_exp)
    resp = _dispatch(args, service.handle_roofline, req, service.RooflineResponse)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["t_exp", "intensity", "attainable_flops", "regime"])
    for row in resp.rows:
        writer.writerow([MACHINE_FMT.format(row.t_exp),
                         MACHINE_FMT.format(row.intensity),
                         MACHINE_FMT.format(row.attainable_flops),
                         row.regime])
    return 0


def _cmd_compare(args) -> int:
    req = service.CompareRequest(
        model=_load_ref(args.model, "model config"),
        hardware=_load_ref(args.hw, "hardware config"),
        t_exp=args.t_exp)
    resp = _dispatch(args, service.handle_compare, req, service.CompareResponse)
    if args.json:
        _print_json(resp.model_dump())
        return 0
    print(f"{'variant':<12} {'comm B/GPU':>14} {'vs std':>14} "
          f"{'weight B/exp':>14} {'vs std':>14}")
    for row in resp.rows:
        comm_tag = "baseline" if row.variant == "standard" \
            else f"{_arrow(row.comm_ratio_vs_standard)} x{_fmt(row.comm_ratio_vs_standard, False)}"
        weight_tag = "baseline" if row.variant == "standard" \
            else f"{_arrow(row.weight_ratio_vs_standard)} x{_fmt(row.weight_ratio_vs_standard, False)}"
        print(f"{row.variant:<12} {_fmt(row.comm_bytes, False):>14} {comm_tag:>14} "
              f"{_fmt(row.weight_bytes_per_expert, False):>14} {weight_tag:>14}")
    return 0


def _cmd_forward(args) -> int:
    req = service.ForwardRequest(
        model=_load_ref(args.model, "model config"),
        seed=args.seed, tokens=args.tokens,
        renormalize_gates=args.renormalize_gates,
        identity_projections=args.identity_projections)
    resp = _dispatch(args, service.handle_forward, req, service.ForwardResponse)
    out = Path(args.out)
    out.write_bytes(base64.b64decode(resp.data_base64))
    if args.json:
        _print_json({"digest": resp.digest, "tokens": resp.tokens,
                     "hidden_dim": resp.hidden_dim, "elements": resp.elements,
                     "out": str(out)})
    else:
        print(f"sha256={resp.digest} elements={resp.elements} out={out}")
    return 0


def _read_points_csv(path: str) -> list[dict[str, float]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["n_params", "score"]:
                raise MoeLabError(f"{path} must have header n_params,score, "
                                  f"got {reader.fieldnames}")
            return [{"n_params": float(r["n_params"]), "score": float(r["score"])}
                    for r in reader]
    except OSError as exc:
        raise MoeLabError(f"cannot read {path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise MoeLabError(f"bad numeric value in {path} (fill in every score "
                          f"column entry): {exc}") from None


def _cmd_epm(args) -> int:
    machine = args.json
    if args.epm_cmd == "fit":
        req = service.EpmFitRequest(points=_read_points_csv(args.data))
        resp = _dispatch(args, service.handle_epm_fit, req, service.EpmFitResponse)
        if machine:
            _print_json(resp.model_dump())
        else:
            print(f"a={_fmt(resp.a, False)} b={_fmt(resp.b, False)} "
                  f"residual_rms={_fmt(resp.residual_rms, False)} "
                  f"n_points={resp.n_points}")
    elif args.epm_cmd == "lambda":
        req = service.EpmLambdaRequest(n_eff=args.n_eff, n_treat=args.n_treat)
        resp = _dispatch(args, service.handle_epm_lambda, req,
                         service.EpmLambdaResponse)
        if machine:
            _print_json(resp.model_dump())
        else:
            print(f"lambda={_fmt(resp.epm_lambda, False)}")
    else:
        req = service.EpmIsoRequest(epm_lambda=args.epm_lambda, n_treat=args.n_treat)
        resp = _dispatch(args, service.handle_epm_iso, req, service.EpmIsoResponse)
        if machine:
            _print_json(resp.model_dump())
        else:
            print(f"n_iso={_fmt(resp.n_iso, False)} delta={_fmt(resp.delta, False)}")
    return 0


def _cmd_check(args) -> int:
    req = service.CheckRequest(seed=args.seed, full=args.full)
    resp = _dispatch(args, service.handle_check, req, service.CheckResponse)
    if args.json:
        _print_json(resp.model_dump())
    else:
        for result in resp.results:
            status = "PASS" if result.passed else "FAIL"
            print(f"{status} {result.name}: {result.detail}")
        print(f"{'all checks passed' if resp.passed else 'CHECKS FAILED'}")
    return 0 if resp.passed else 1


def _cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("moelab.service:app", host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moelab",
        description="MoE / latent-MoE numerics and serving-cost analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=True, hw=True):
        if model:
            p.add_argument("--model", required=True,
                           help="model config JSON path or fixture name")
        if hw:
            p.add_argument("--hw", required=True,
                           help="hardware config JSON path or fixture name")
        p.add_argument("--json", action="store_true",
                       help="machine-readable JSON output")
        p.add_argument("--server", default=None,
                       help="base URL of a running moelab service")

    p = sub.add_parser("analyze", help="full cost/accounting report")
    add_common(p)
    p.add_argument("--t-exp", type=float, default=None,
                   help="tokens per expert (standard-layer equivalent)")
    p.add_argument("--t-total", type=float, default=None,
                   help="total tokens across the EP group per step")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("roofline", help="CSV roofline sweep to stdout")
    add_common(p)
    p.add_argument("--t-exp", type=float, nargs="+", required=True,
                   help="tokens-per-expert operating points")
    p.set_defaults(func=_cmd_roofline)

    p = sub.add_parser("compare", help="cross-variant cost table")
    add_common(p)
    p.add_argument("--t-exp", type=float, default=256.0,
                   help="standard-layer tokens per expert (default 256)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("forward", help="golden-vector layer evaluation")
    add_common(p, hw=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tokens", type=int, default=3)
    p.add_argument("--out", default="forward.bin",
                   help="golden vector output path (default forward.bin)")
    p.add_argument("--renormalize-gates", action="store_true",
                   help="renormalize gating weights over the selected experts")
    p.add_argument("--identity-projections", action="store_true",
                   help="force identity latent projections (requires alpha=1)")
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("epm", help="effective-parameter-multiplier tools")
    epm_sub = p.add_subparsers(dest="epm_cmd", required=True)
    pf = epm_sub.add_parser("fit", help="fit score = a ln(N) + b from CSV")
    pf.add_argument("data", help="CSV with header n_params,score")
    pf.add_argument("--json", action="store_true")
    pf.add_argument("--server", default=None)
    pf.set_defaults(func=_cmd_epm)
    pl = epm_sub.add_parser("lambda", help="effective / physical parameter ratio")
    pl.add_argument("n_eff", type=float)
    pl.add_argument("n_treat", type=float)
    pl.add_argument("--json", action="store_true")
    pl.add_argument("--server", default=None)
    pl.set_defaults(func=_cmd_epm)
    pi = epm_sub.add_parser("iso", help="iso-accuracy baseline size")
    pi.add_argument("epm_lambda", type=float, metavar="lambda")
    pi.add_argument("n_treat", type=float)
    pi.add_argument("--json", action="store_true")
    pi.add_argument("--server", default=None)
    pi.set_defaults(func=_cmd_epm)

    p = sub.add_parser("check", help="run the invariant self-check suite")
    p.add_argument("--seed", type=int, default=0,
                   help="reseed the randomized checks (incl. gradcheck)")
    p.add_argument("--full", action="store_true",
                   help="include the slow full-fixture golden check")
    p.add_argument("--json", action="store_true")
    p.add_argument("--server", default=None)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MoeLabError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HTTPException as exc:  # in-process handler rejected the request
        print(f"error: {exc.detail}", file=sys.stderr)
        return 2
    except _RemoteError as exc:
        print(f"error ({exc.status}): {exc.detail}", file=sys.stderr)
        return 1 if exc.status >= 500 else 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def app_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    app_main()
