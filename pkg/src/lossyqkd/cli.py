"""Command-line front end.

Subcommands: verify (constraint report for an attack file), simulate
(protocol rounds, JSON report), tradeoff (leakage-vs-disturbance sweep CSV),
usd (discrimination threshold table CSV), and replay (re-run a recorded
manifest and compare outputs byte for byte).

Machine-readable JSON goes to standard output, delimited data to files, and a
short human summary to standard error. Every command records a RunManifest
with its resolved configuration and the digests of everything it produced.
CSV-writing commands also render a companion figure next to the CSV unless
--no-figure is given.

Exit codes: 0 success (and, for verify, feasible), 1 domain-level negative
verdict (infeasible attack, replay mismatch), 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import qber, tradeoff_point
from .attack import (
    FEASIBILITY_ATOL,
    InfeasibleAttackError,
    ProbeKets,
    check_equal_throughput,
    check_isometry,
    filter_no_count,
    usd_intercept_resend,
)
from .montecarlo import SimConfig, run_protocol
from .plotting import save_figure, tradeoff_figure, usd_figure
from .search import SWEEP_CSV_HEADER, SearchSpec, sweep_rows, sweep_tradeoff
from .states import SignalState, Z0, b92, bb84_four_state, bb84_six_state

USD_CSV_HEADER = ("eta", "full_break", "eve_fraction_known", "shortfall", "eta_star")

_FAMILIES = {"bb84-4": bb84_four_state, "bb84-6": bb84_six_state, "b92": b92}


class UsageError(Exception):
    """Bad flag values or unreadable inputs; maps to exit code 2."""


def _sha256_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _sha256_file(path: str) -> str:
    return _sha256_bytes(Path(path).read_bytes())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_csv(path: str, header, rows: list[dict]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in header])


def _parse_float_list(text: str, name: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad {name} list {text!r}: {exc}") from exc
    if not values:
        raise UsageError(f"{name} list is empty")
    return values


def _family(name: str):
    if name not in _FAMILIES:
        raise UsageError(f"unknown family {name!r}; expected one of {sorted(_FAMILIES)}")
    return _FAMILIES[name]()


# ---------------------------------------------------------------------------
# Runners: config dict -> (exit code, stdout text, output file paths, summary)
# ---------------------------------------------------------------------------


def _run_verify(config: dict):
    path = config["attack_file"]
    try:
        pk = ProbeKets.load(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read attack file {path}: {exc}") from exc
    residuals = check_isometry(pk).as_dict()
    residuals.update(check_equal_throughput(pk, bb84_six_state()).as_dict())
    four_state_keys = [k for k in residuals if k != "no_count_overlap_im"]
    feasible = all(residuals[k] <= FEASIBILITY_ATOL for k in four_state_keys)
    payload = {
        "feasible": feasible,
        "eta": pk.eta,
        "d_e": pk.d_e,
        "residuals": residuals,
        "deficit": None,
        "x": None,
        "qber": None,
        "i_holevo": None,
        "p_guess": None,
    }
    if feasible:
        fa = filter_no_count(pk)
        point = tradeoff_point(pk, bb84_four_state())
        qbers = dict(point.qber_by_basis)
        if abs(fa.deficit) <= FEASIBILITY_ATOL:
            qbers["Y"] = qber(fa, "Y")
        payload.update(
            {
                "deficit": {"re": fa.deficit.real, "im": fa.deficit.imag},
                "x": fa.x,
                "qber": qbers,
                "i_holevo": point.i_holevo,
                "p_guess": point.p_guess,
            }
        )
        summary = (
            f"feasible four-state attack: x={fa.x:.6g}, "
            + ", ".join(f"qber_{k.lower()}={v:.6g}" for k, v in qbers.items())
            + f", i_holevo={point.i_holevo:.6g}"
        )
    else:
        worst = max(residuals, key=lambda k: residuals[k])
        summary = f"infeasible: worst residual {worst}={residuals[worst]:.3e}"
    return (0 if feasible else 1), json.dumps(payload, indent=2), [], summary


def _resolve_attack(name: str, family, eta: float):
    if name == "none":
        return None
    if name == "usd":
        if family.kind != "b92":
            raise UsageError("--attack usd requires --family b92")
        attack, _ = usd_intercept_resend((family.signals[0], family.signals[1]), eta)
        return attack
    try:
        return ProbeKets.load(name)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read attack file {name}: {exc}") from exc


def _run_simulate(config: dict):
    family = _family(config["family"])
    if config["rounds"] < 1:
        raise UsageError(f"--rounds must be positive, got {config['rounds']}")
    attack = _resolve_attack(config["attack"], family, config["eta"])
    try:
        sim = SimConfig(
            family=family,
            n_rounds=config["rounds"],
            eta=config["eta"],
            seed=config["seed"],
            attack=attack,
            p_det=config["p_det"],
            line_replacement=config["line_replacement"],
        )
        report = run_protocol(sim, per_round_path=config["csv"])
    except (ValueError, InfeasibleAttackError) as exc:
        raise UsageError(str(exc)) from exc
    payload = {
        "config": {
            "family": config["family"],
            "eta": config["eta"],
            "rounds": config["rounds"],
            "attack": config["attack"],
            "seed": config["seed"],
            "p_det": config["p_det"],
            "line_replacement": config["line_replacement"],
            "csv": config["csv"],
        },
        "report": report.to_dict(),
    }
    files = [config["csv"]] if config["csv"] else []
    qbers = ", ".join(
        f"{name}={value:.4g}" if value is not None else f"{name}=n/a"
        for name, value in report.qber_hat.items()
    )
    summary = f"{config['rounds']} rounds, sifted {report.sifted_count}, qber {qbers}"
    return 0, json.dumps(payload, indent=2), files, summary


def _run_tradeoff(config: dict):
    family = _family(config["family"])
    grid = _parse_float_list(config["grid"], "grid")
    try:
        spec = SearchSpec(
            family=family,
            eta=config["eta"],
            d_e=config["d_e"],
            qber_cap=grid[0],
            x_mode=config["x_mode"],
            seed=config["seed"],
            budget=config["budget"],
        )
        results = sweep_tradeoff(spec, grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = sweep_rows(results)
    _write_csv(config["out"], SWEEP_CSV_HEADER, rows)
    files = [config["out"]]
    figure_path = None
    if not config["no_figure"]:
        figure_path = str(Path(config["out"]).with_suffix(".png"))
        save_figure(tradeoff_figure(rows), figure_path)
        files.append(figure_path)
    payload = {"out": config["out"], "figure": figure_path, "rows": rows}
    summary = f"swept {len(rows)} caps -> {config['out']}" + (
        f" (+ {figure_path})" if figure_path else ""
    )
    return 0, json.dumps(payload, indent=2), files, summary


def _run_usd(config: dict):
    if config["overlap"] is not None:
        c = config["overlap"]
        if not 0.0 < c < 1.0:
            raise UsageError(f"--overlap must lie strictly between 0 and 1, got {c}")
        partner = SignalState("B92b", (c, (1.0 - c * c) ** 0.5))
        pair = (Z0, partner)
    else:
        default = b92()
        pair = (default.signals[0], default.signals[1])
    etas = _parse_float_list(config["eta_grid"], "eta grid")
    if any(not 0.0 <= e <= 1.0 for e in etas):
        raise UsageError("eta grid values must lie in [0, 1]")
    rows = []
    eta_star = None
    for eta in etas:
        _, report = usd_intercept_resend(pair, eta)
        eta_star = report.eta_star
        rows.append(
            {
                "eta": eta,
                "full_break": report.full_break,
                "eve_fraction_known": report.delivered_fraction / eta if eta > 0 else 1.0,
                "shortfall": report.shortfall,
                "eta_star": report.eta_star,
            }
        )
    _write_csv(config["out"], USD_CSV_HEADER, rows)
    files = [config["out"]]
    figure_path = None
    if not config["no_figure"]:
        figure_path = str(Path(config["out"]).with_suffix(".png"))
        save_figure(usd_figure(rows, eta_star), figure_path)
        files.append(figure_path)
    overlap = abs(sum(a.conjugate() * b for a, b in zip(pair[0].amplitudes, pair[1].amplitudes)))
    payload = {
        "overlap": float(overlap),
        "eta_star": eta_star,
        "out": config["out"],
        "figure": figure_path,
        "rows": rows,
    }
    summary = f"threshold eta*={eta_star:.6g}, {len(rows)} grid rows -> {config['out']}"
    return 0, json.dumps(payload, indent=2), files, summary


_RUNNERS = {
    "verify": _run_verify,
    "simulate": _run_simulate,
    "tradeoff": _run_tradeoff,
    "usd": _run_usd,
}


def _default_manifest_path(command: str, config: dict) -> str:
    if command == "verify":
        return str(Path(config["attack_file"]).with_suffix("")) + ".manifest.json"
    if command == "simulate":
        return (config["csv"] + ".manifest.json") if config["csv"] else "simulate.manifest.json"
    return config["out"] + ".manifest.json"


def _write_manifest(path: str, command: str, config: dict, exit_code: int,
                    stdout_text: str, files: list[str]) -> None:
    outputs = {"stdout": _sha256_bytes(stdout_text.encode())}
    for name in files:
        outputs[name] = _sha256_file(name)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": config.get("seed"),
        "config": config,
        "exit_code": exit_code,
        "outputs": outputs,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")


def _run_replay(manifest_path: str):
    try:
        manifest = json.loads(Path(manifest_path).read_text())
        command = manifest["command"]
        config = manifest["config"]
        expected = manifest["outputs"]
        expected_code = manifest["exit_code"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if command not in _RUNNERS:
        raise UsageError(f"manifest names unknown command {command!r}")
    code, stdout_text, files, _ = _RUNNERS[command](config)
    actual = {"stdout": _sha256_bytes(stdout_text.encode())}
    for name in files:
        actual[name] = _sha256_file(name)
    checked = {}
    match = code == expected_code
    for name in sorted(set(expected) | set(actual)):
        want, got = expected.get(name), actual.get(name)
        checked[name] = {"expected": want, "actual": got, "match": want == got}
        match = match and want == got
    payload = {
        "manifest": manifest_path,
        "command": command,
        "exit_code_match": code == expected_code,
        "match": match,
        "checked": checked,
    }
    summary = ("outputs reproduced byte-identically" if match else "MISMATCH against manifest")
    return (0 if match else 1), json.dumps(payload, indent=2), summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossyqkd",
        description="Key-distribution simulation and attack analysis over lossy channels.",
    )
    parser.add_argument("--version", action="version", version=f"lossyqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="check an attack file against the constraint set")
    p_verify.add_argument("attack_file", help="attack JSON file")
    p_verify.add_argument("--manifest", default=None, help="manifest path override")

    p_sim = sub.add_parser("simulate", help="run protocol rounds and print a JSON report")
    p_sim.add_argument("--family", required=True, choices=sorted(_FAMILIES))
    p_sim.add_argument("--eta", required=True, type=float, help="line transmittance")
    p_sim.add_argument("--rounds", required=True, type=int)
    p_sim.add_argument("--attack", default="none", help="attack file, 'none', or 'usd'")
    p_sim.add_argument("--seed", required=True, type=int)
    p_sim.add_argument("--p-det", dest="p_det", type=float, default=1.0)
    p_sim.add_argument("--line-replacement", dest="line_replacement", action="store_true")
    p_sim.add_argument("--csv", default=None, help="write the per-round CSV here")
    p_sim.add_argument("--manifest", default=None, help="manifest path override")

    p_trade = sub.add_parser("tradeoff", help="sweep best attacks over a disturbance grid")
    p_trade.add_argument("--family", required=True, choices=["bb84-4", "bb84-6"])
    p_trade.add_argument("--eta", required=True, type=float)
    p_trade.add_argument("--d-e", dest="d_e", required=True, type=int)
    p_trade.add_argument("--grid", required=True, help="comma-separated disturbance caps")
    p_trade.add_argument("--x-mode", dest="x_mode", required=True, choices=["zero", "free"])
    p_trade.add_argument("--budget", type=int, default=20000, help="objective evaluations per cap")
    p_trade.add_argument("--seed", required=True, type=int)
    p_trade.add_argument("--out", required=True, help="sweep CSV path")
    p_trade.add_argument("--no-figure", dest="no_figure", action="store_true")
    p_trade.add_argument("--manifest", default=None, help="manifest path override")

    p_usd = sub.add_parser("usd", help="unambiguous-discrimination threshold table")
    group = p_usd.add_mutually_exclusive_group(required=True)
    group.add_argument("--overlap", type=float, default=None, help="signal overlap c in (0, 1)")
    group.add_argument("--pair", choices=["default"], default=None, help="use the default signal pair")
    p_usd.add_argument("--eta-grid", dest="eta_grid", required=True, help="comma-separated transmittances")
    p_usd.add_argument("--out", required=True, help="threshold CSV path")
    p_usd.add_argument("--no-figure", dest="no_figure", action="store_true")
    p_usd.add_argument("--manifest", default=None, help="manifest path override")

    p_replay = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p_replay.add_argument("manifest_file", help="RunManifest JSON written by a previous run")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    config = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        if command == "replay":
            code, stdout_text, summary = _run_replay(config["manifest_file"])
            print(stdout_text)
            print(summary, file=sys.stderr)
            return code
        code, stdout_text, files, summary = _RUNNERS[command](config)
        manifest_path = config.get("manifest") or _default_manifest_path(command, config)
        _write_manifest(manifest_path, command, config, code, stdout_text, files)
        print(stdout_text)
        print(summary, file=sys.stderr)
        print(f"manifest: {manifest_path}", file=sys.stderr)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
