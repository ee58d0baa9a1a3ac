"""Command-line client for the toolkit service.

Every analysis subcommand builds a request from a flat ``key = value`` config
file (flags win over file values), posts it to the service -- an in-process
app instance by default, or a remote one via ``--server URL`` -- and writes
the response to CSV/stdout.  Outputs are byte-identical across runs for the
same config and seed.

Exit codes: 0 success, 2 invalid input or config, 3 fit non-convergence or
degenerate fit, 4 solver failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import httpx
import numpy as np

from . import FORMAT_VERSION, __version__, fileio, runconfig
from .dynamics import DecayTrace
from .errors import ConfigurationError, CqedError, ParseError
from .fitcore import MODEL_ZOO
from .spectra import SpectrumSeries, TuningPoint

_EXIT_INVALID = 2
_EXIT_FIT = 3
_EXIT_SOLVER = 4


class _CliFailure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class ServiceClient:
    """In-process ASGI client by default; plain HTTP when a URL is given."""

    def __init__(self, server: str | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=300.0)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient
            from .service import create_app
            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise _CliFailure(_EXIT_SOLVER, f"service request failed: {exc}")
        return _unwrap(resp)

    def get(self, path: str) -> dict:
        try:
            resp = self._client.get(path)
        except httpx.HTTPError as exc:
            raise _CliFailure(_EXIT_SOLVER, f"service request failed: {exc}")
        return _unwrap(resp)


def _unwrap(resp) -> dict:
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if isinstance(detail, dict):
        code, message = detail.get("code", ""), detail.get("message", "")
    else:
        code, message = "", str(detail)
    if resp.status_code in (400, 422):
        raise _CliFailure(_EXIT_INVALID, message or "invalid request")
    if code == "fit_degenerate":
        raise _CliFailure(_EXIT_FIT, message)
    raise _CliFailure(_EXIT_SOLVER,
                      message or f"service error (HTTP {resp.status_code})")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqedkit",
        description="Cavity-QED simulation and parameter-extraction toolkit")
    parser.add_argument("--version", action="version",
                        version=f"cqedkit {__version__} (formats v{FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=False):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default=None,
                       help="output path" + (" (required here or as out_path"
                            " in the config)" if needs_out else ""))
        p.add_argument("--server", default=None,
                       help="remote service URL (default: in-process)")

    common(sub.add_parser("derive", help="derived quantities with uncertainties"))
    common(sub.add_parser("spectrum", help="transmission spectrum CSV"),
           needs_out=True)
    p_decay = sub.add_parser("decay", help="simulated decay trace CSV")
    common(p_decay, needs_out=True)
    p_decay.add_argument("--seed", type=int, default=None,
                         help="override the counts-noise seed")
    common(sub.add_parser("tuning-map", help="cavity-tuning PL map CSV"),
           needs_out=True)
    p_fit = sub.add_parser("fit", help="least-squares fit of a data file")
    common(p_fit)
    p_fit.add_argument("--model", required=True, choices=sorted(MODEL_ZOO),
                       help="model kind")
    p_fit.add_argument("--data", required=True, help="two-column CSV data file")
    common(sub.add_parser("g2", help="photon autocorrelation CSV"),
           needs_out=True)
    p_streak = sub.add_parser("streak-bin",
                              help="bin a streak image into a decay trace CSV")
    common(p_streak, needs_out=True)
    p_streak.add_argument("--data", required=True, help="streak image file")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def _load(args, command, schema=None, overrides=None):
    config = runconfig.read_config(args.config)
    schema = schema if schema is not None else runconfig.SCHEMAS[command]
    values = runconfig.validate(config, schema, overrides or {})
    return values


def _out_path(args, values):
    path = args.out or values.get("out_path")
    if not path:
        raise ConfigurationError(
            "an output path is required (--out or out_path key)")
    return path


def _params_payload(values, omega_drive: float = 0.0) -> dict:
    return {
        "g": values["g_ghz"],
        "kappa": values["kappa_ghz"],
        "kappa_wg_fraction": values["kappa_wg_fraction"],
        "gamma_rad": values["gamma_rad_ghz"],
        "gamma_deph": values["gamma_deph_ghz"],
        "delta_c": values["cavity_freq_ghz"],
        "delta_a": values["emitter_freq_ghz"],
        "omega_drive": omega_drive,
    }


def _note(message: str):
    print(message, file=sys.stderr)


def _cmd_derive(args, client: ServiceClient) -> int:
    values = _load(args, "derive")
    payload = {k: v for k, v in values.items()
               if v is not None and k != "out_path"}
    report = client.post("/derive", payload)
    rows = report["quantities"]
    width = max(len(q["name"]) for q in rows)
    print(f"{'quantity':<{width}}  {'value':>12}  {'sigma':>10}  unit")
    for q in rows:
        note = f"   # {q['note']}" if q["note"] else ""
        print(f"{q['name']:<{width}}  {q['value']:>12.6g}  "
              f"{q['sigma']:>10.3g}  {q['unit']:<4}{note}")
    out = args.out or values.get("out_path")
    if out:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("label,value,sigma,unit\n")
            for q in rows:
                fh.write(f"{q['name']},{q['value']:.17g},{q['sigma']:.17g},"
                         f"{q['unit']}\n")
        _note(f"wrote {out} ({len(rows)} rows)")
    return 0


def _cmd_spectrum(args, client: ServiceClient) -> int:
    values = _load(args, "spectrum")
    if values["freq_min_ghz"] >= values["freq_max_ghz"]:
        raise ConfigurationError("freq_min_ghz must be below freq_max_ghz")
    grid = np.linspace(values["freq_min_ghz"], values["freq_max_ghz"],
                       values["freq_points"])
    payload = {"params": _params_payload(values), "grid": grid.tolist()}
    data = client.post("/spectrum", payload)
    series = SpectrumSeries(np.array(data["axis"]), np.array(data["values"]),
                            data["axis_kind"], data["value_kind"], data["meta"])
    out = _out_path(args, values)
    fileio.write_series(series, out)
    _note(f"wrote {out} ({series.axis.size} rows)")
    return 0


def _cmd_decay(args, client: ServiceClient) -> int:
    overrides = {"seed": args.seed} if args.seed is not None else {}
    values = _load(args, "decay", overrides=overrides)
    payload = {
        "config": {"n_max": values["n_max"], "n_emitters": values["n_emitters"]},
        "params": _params_payload(values),
        "t_final_ns": values["t_final_ns"],
        "dt_ns": values["dt_ns"],
        "kind": values["kind"],
        "peak_counts": values["peak_counts"],
        "seed": values["seed"],
    }
    data = client.post("/decay", payload)
    trace = DecayTrace(t0=data["t0"], dt=data["dt"],
                       values=np.array(data["values"]), kind=data["kind"])
    out = _out_path(args, values)
    fileio.write_series(trace, out)
    _note(f"wrote {out} ({trace.values.size} rows)")
    return 0


def _cmd_tuning_map(args, client: ServiceClient) -> int:
    values = _load(args, "tuning-map")
    if values["grid_min"] >= values["grid_max"]:
        raise ConfigurationError("grid_min must be below grid_max")
    grid = np.linspace(values["grid_min"], values["grid_max"],
                       values["grid_points"])
    payload = {
        "siv": {
            "transition_freqs": list(values["line_freqs_ghz"]),
            "ground_splitting": values["ground_splitting_ghz"],
            "branching_xi_max": values["xi_max"],
            "linewidths": list(values["linewidths_ghz"]),
        },
        "kappa_ghz": values["kappa_ghz"],
        "f0_per_line": list(values["f0_per_line"]),
        "grid": grid.tolist(),
        "grid_kind": values["grid_kind"],
    }
    data = client.post("/tuning-map", payload)
    rows = [TuningPoint(r["cavity_pos"], r["line"], r["intensity_rel"])
            for r in data["rows"]]
    out = _out_path(args, values)
    fileio.write_tuning_map(rows, out)
    _note(f"wrote {out} ({len(rows)} rows)")
    return 0


def _cmd_fit(args, client: ServiceClient) -> int:
    _func, required, optional = MODEL_ZOO[args.model]
    param_names = tuple(required) + tuple(optional)
    values = _load(args, "fit", schema=runconfig.fit_schema(param_names))

    fixed, free = {}, []
    for name in param_names:
        init, fix = values[f"init_{name}"], values[f"fix_{name}"]
        if init is not None and fix is not None:
            raise ConfigurationError(f"parameter {name!r} both fixed and free")
        if fix is not None:
            fixed[name] = fix
        elif init is not None:
            free.append({"name": name, "init": init,
                         "lower": values[f"lo_{name}"],
                         "upper": values[f"hi_{name}"]})
        elif name in required:
            raise ConfigurationError(
                f"parameter {name!r} needs init_{name} or fix_{name}")

    names, columns = fileio.read_columns(args.data)
    if len(columns) < 2:
        raise ConfigurationError(f"{args.data}: need at least two columns")
    x, y = columns[0], columns[1]
    sigma_y = None
    if values["weights"] == "sqrt_counts":
        sigma_y = np.sqrt(np.clip(y, 1.0, None)).tolist()

    payload = {"kind": args.model, "fixed": fixed, "free": free,
               "x": x.tolist(), "y": y.tolist(), "sigma_y": sigma_y}
    data = client.post("/fit", payload)

    print(f"model: {args.model}   data: {args.data} ({names[0]},{names[1]})")
    for p in data["params"]:
        if p["sigma"] is None:
            print(f"{p['name']} = {p['value']:.8g}  (unidentifiable)")
        else:
            print(f"{p['name']} = {p['value']:.8g} +/- {p['sigma']:.3g}")
    for name, value in fixed.items():
        print(f"{name} = {value:.8g}  (fixed)")
    print(f"chi2_reduced = {data['chi2_reduced']:.6g}")
    print(f"converged = {data['converged']} after {data['n_iterations']}"
          " iterations")

    out = args.out or values.get("out_path")
    if out:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("label,value,sigma,unit\n")
            for p in data["params"]:
                sigma = "inf" if p["sigma"] is None else f"{p['sigma']:.17g}"
                fh.write(f"{p['name']},{p['value']:.17g},{sigma},\n")
            fh.write(f"chi2_reduced,{data['chi2_reduced']:.17g},0,\n")
            fh.write(f"converged,{int(data['converged'])},0,\n")
        _note(f"wrote {out}")
    return 0 if data["converged"] else _EXIT_FIT


def _cmd_g2(args, client: ServiceClient) -> int:
    values = _load(args, "g2")
    taus = np.linspace(0.0, values["tau_max_ns"], values["tau_points"])
    payload = {
        "config": {"n_max": values["n_max"], "n_emitters": values["n_emitters"]},
        "params": _params_payload(values, omega_drive=values["omega_drive_ghz"]),
        "tau_grid": taus.tolist(),
    }
    data = client.post("/g2", payload)
    out = _out_path(args, values)
    fileio.write_columns(out, ("tau_ns", "g2"), (data["tau_ns"], data["g2"]))
    _note(f"wrote {out} ({len(data['tau_ns'])} rows)")
    return 0


def _cmd_streak_bin(args, client: ServiceClient) -> int:
    values = _load(args, "streak-bin")
    with open(args.data, "r", encoding="ascii") as fh:
        content = fh.read()
    payload = {"content": content, "lambda_min_nm": values["lambda_min_nm"],
               "lambda_max_nm": values["lambda_max_nm"],
               "filename": args.data}
    data = client.post("/streak-bin", payload)
    trace = DecayTrace(t0=data["t0"], dt=data["dt"],
                       values=np.array(data["values"]), kind=data["kind"])
    out = _out_path(args, values)
    fileio.write_series(trace, out)
    _note(f"wrote {out} ({trace.values.size} rows)")
    return 0


_HANDLERS = {
    "derive": _cmd_derive,
    "spectrum": _cmd_spectrum,
    "decay": _cmd_decay,
    "tuning-map": _cmd_tuning_map,
    "fit": _cmd_fit,
    "g2": _cmd_g2,
    "streak-bin": _cmd_streak_bin,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    try:
        client = ServiceClient(args.server)
        return _HANDLERS[args.command](args, client)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INVALID
    except CqedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
