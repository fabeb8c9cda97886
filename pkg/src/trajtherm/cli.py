"""Command-line interface: run ensembles, verify invariants, list presets.

Configuration is a flat ``key = value`` text format with dotted keys for
nesting and JSON-parsed values, rejected strictly on unknown keys.  Every
output CSV names the configuration hash in its first header line; rerunning
the same configuration reproduces the files byte for byte (modulo the
``created`` timestamp line).

Exit codes: 0 success, 2 invariant-gate failure, 3 configuration error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .ensemble import histogram, run_ensemble
from .entropy import integral_ft_estimate
from .enumeration import (
    enumerate_jump_records,
    forward_probability_deficit,
    max_detailed_ft_residual,
)
from .errors import ConfigError, NormCollapse, PositivityLoss, TrajthermError
from .lindblad import lindblad_propagate
from .model import (
    Channel,
    ControlProtocol,
    Reservoir,
    Charge,
    SystemModel,
    build_preset,
    hamiltonian_at,
    preset_names,
    validate_channel_set,
)
from .operators import povm_defect
from .streams import TrajectoryStream, virtual_stream
from .trajectories import prepare_run, run_trajectory

ENV_OUT = "TRAJTHERM_OUT"

_RUN_KEYS = {
    "preset", "scheme", "n", "dt", "tau", "seed", "final_basis", "out",
    "snapshot_stride", "threads", "analyses", "oracle_dt",
}
_ANALYSES = {"ft", "splits", "histograms", "consistency"}


# ---------------------------------------------------------------------------
# Config parsing


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (values are JSON fragments) into a dict."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val  # bare strings are allowed unquoted
    return out


def _validate_keys(cfg: dict) -> None:
    for key in cfg:
        head = key.split(".")[0]
        if head in _RUN_KEYS or head in {"params", "model"}:
            continue
        raise ConfigError(f"unknown configuration key {key!r}")


def _matrix(value, what: str) -> np.ndarray:
    """Nested arrays of [re, im] pairs -> complex matrix."""
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: not a numeric nested array") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{what}: expected shape (d, d, 2) of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def model_from_config(cfg: dict) -> SystemModel:
    """Explicit model built from ``model.*`` keys (constant operators)."""
    sub = {k[len("model."):]: v for k, v in cfg.items() if k.startswith("model.")}
    if "dim" not in sub or "H_S" not in sub:
        raise ConfigError("explicit model needs model.dim and model.H_S")
    dim = int(sub.pop("dim"))
    hs = _matrix(sub.pop("H_S"), "model.H_S")
    v = _matrix(sub.pop("V"), "model.V") if "V" in sub else np.zeros((dim, dim), complex)
    tau = float(sub.pop("tau", 10.0))
    dt = float(sub.pop("dt", 1e-2))
    rho0 = _matrix(sub.pop("initial_state"), "model.initial_state") if "initial_state" in sub \
        else np.eye(dim, dtype=complex) / dim

    channels = {}
    reservoirs = {}
    for key, val in sub.items():
        parts = key.split(".")
        if parts[0] == "channels" and len(parts) == 3:
            channels.setdefault(parts[1], {})[parts[2]] = val
        elif parts[0] == "reservoirs" and len(parts) == 3:
            reservoirs.setdefault(parts[1], {})[parts[2]] = val
        else:
            raise ConfigError(f"unknown model key model.{key}")

    chans = []
    for cid, fields in channels.items():
        if "L" not in fields or "reservoir" not in fields:
            raise ConfigError(f"channel {cid}: needs L and reservoir")
        L = _matrix(fields["L"], f"model.channels.{cid}.L")
        ds = float(fields.get("ds", 0.0))
        chans.append(
            Channel(
                id=cid, operator=(lambda lam, _L=L: _L),
                reservoir=str(fields["reservoir"]),
                partner=fields.get("partner"),
                rate=float(fields["rate"]) if "rate" in fields else None,
                ds=(lambda lam, _ds=ds: _ds),
            )
        )
    ress = [
        Reservoir(rid, float(fields.get("T", 1.0)))
        for rid, fields in reservoirs.items()
    ]
    if not ress:
        ress = [Reservoir("bath", 1.0)]
    return SystemModel(
        dim=dim, bare=(lambda lam, _h=hs: _h), drive=(lambda lam, _v=v: _v),
        channels=tuple(chans), reservoirs=tuple(ress),
        charges=(Charge("energy", lambda lam, _h=hs: _h),),
        protocol=ControlProtocol(tau, lambda t: 0.0),
        initial_state=rho0, switched_drive=False, default_dt=dt, name="explicit",
    )


def resolve_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(parse_config_text(fh.read()))
    for key in ("preset", "scheme", "n", "dt", "tau", "seed", "final_basis",
                "out", "snapshot_stride", "threads", "oracle_dt"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "model", None):
        with open(args.model) as fh:
            for k, v in parse_config_text(fh.read()).items():
                cfg[k] = v if k.startswith(("model.", "params.")) else v
    _validate_keys(cfg)
    cfg.setdefault("scheme", "jump")
    cfg.setdefault("n", 1000)
    cfg.setdefault("seed", 1234)  # fixed documented default; never wall clock
    cfg.setdefault("final_basis", "rho_tau")
    cfg.setdefault("snapshot_stride", 100)
    cfg.setdefault("threads", 1)
    cfg.setdefault("analyses", sorted(_ANALYSES))
    if isinstance(cfg["analyses"], str):
        cfg["analyses"] = [a.strip() for a in cfg["analyses"].split(",") if a.strip()]
    unknown = set(cfg["analyses"]) - _ANALYSES
    if unknown:
        raise ConfigError(f"unknown analyses {sorted(unknown)}")
    if "preset" not in cfg and not any(k.startswith("model.") for k in cfg):
        raise ConfigError("either a preset or an explicit model.* block is required")
    return cfg


def config_canonical_text(cfg: dict) -> str:
    lines = [f"{k} = {json.dumps(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: dict) -> str:
    """Hash of the physics-relevant configuration (output path and worker
    count do not change what is computed)."""
    phys = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    return hashlib.sha256(config_canonical_text(phys).encode()).hexdigest()[:12]


def build_model(cfg: dict) -> SystemModel:
    if "preset" in cfg:
        params = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("params.")}
        for key in ("tau", "dt"):
            if key in cfg:
                params[key] = cfg[key]
        return build_preset(cfg["preset"], params)
    return model_from_config(cfg)


# ---------------------------------------------------------------------------
# CSV output


def _write_csv(path, columns, rows, chash: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# config_hash={chash} tool=trajtherm {__version__}\n")
        fh.write(f"# created={datetime.now(timezone.utc).isoformat()}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.12g" % float(x)


def _trajectory_series(model, setup, base_seed: int, scheme: str):
    """Per-checkpoint time series of one sample trajectory (stream 0)."""
    rec = run_trajectory(model, scheme, TrajectoryStream(base_seed, 0),
                         setup=setup, keep_snapshots=True)
    vstream = virtual_stream(base_seed, 0)
    rows = []
    from .tpm import TPMConfig, final_outcomes, final_projective_measurement

    for t, psi, led in rec.snapshots:
        h = hamiltonian_at(model, min(t, model.protocol.tau))
        e_gamma = float(np.vdot(psi, h @ psi).real)
        q_cum = -sum(
            model.reservoir(rid).temperature * s for rid, s in led["sigma"].items()
        )
        sigma_cum = sum(led["sigma"].values())
        rho_t = setup.rho_path.at(t)
        outs = final_outcomes(model, TPMConfig(model.initial_state), rho_t)
        n_t, p_nt, _ = final_projective_measurement(psi, outs, vstream)
        s_tot_partial = float(-np.log(max(p_nt, 1e-300)) + np.log(rec.p_n0) + sigma_cum)
        s_psi_t = float(-np.log(max(np.vdot(psi, rho_t @ psi).real, 1e-300)))
        s_mar_partial = float(s_psi_t + np.log(rec.p_n0) + sigma_cum)
        row = [t, e_gamma, q_cum, led["w_drive"], led["w_meas"], led["w_chem"],
               led["w_int"], s_tot_partial, s_mar_partial]
        for c in psi:
            row.extend([c.real, c.imag])
        rows.append(row)
    cols = ["t", "E_gamma", "Q_cum", "W_drive_cum", "W_meas_cum", "W_chem_cum",
            "W_int_cum", "S_tot_partial", "S_mar_partial"]
    for i in range(model.dim):
        cols.extend([f"psi_re_{i}", f"psi_im_{i}"])
    return cols, rows, rec


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    outdir = cfg.get("out") or os.environ.get(ENV_OUT) or "trajtherm_out"
    os.makedirs(outdir, exist_ok=True)
    chash = config_hash(cfg)
    with open(os.path.join(outdir, "config.txt"), "w") as fh:
        fh.write(config_canonical_text(cfg))

    model = build_model(cfg)
    report = validate_channel_set(model)
    if not report.ok:
        print("channel-set validation failed:", "; ".join(report.messages), file=sys.stderr)
        return 2

    scheme = cfg["scheme"]
    setup = prepare_run(model, scheme, cfg.get("dt"), cfg["final_basis"],
                        int(cfg["snapshot_stride"]), oracle_dt=cfg.get("oracle_dt"))
    result = run_ensemble(model, scheme, int(cfg["n"]), int(cfg["seed"]),
                          threads=int(cfg["threads"]), setup=setup)
    analyses = set(cfg["analyses"])

    from .records import write_records

    write_records(os.path.join(outdir, "records.txt"), result.records)

    st = result.stats
    rows = []
    for q, qs in st.quantities.items():
        rows.append([q, qs.mean if qs.count else np.nan,
                     qs.stderr if qs.count else np.nan, qs.count, st.excluded])
    if "ft" in analyses:
        for q, ft in st.ft.items():
            if ft.count:
                rows.append([f"exp_neg_{q}", ft.mean, ft.stderr, ft.count, st.excluded])
    _write_csv(os.path.join(outdir, "summary.csv"),
               ["quantity", "mean", "stderr", "n", "excluded"], rows, chash)

    if "consistency" in analyses:
        _write_csv(
            os.path.join(outdir, "consistency.csv"), ["t", "trace_distance"],
            list(zip(result.checkpoint_times, result.trace_distances)), chash,
        )

    if "histograms" in analyses:
        for q in ("s_tot", "s_unc", "s_mar"):
            samples = result.samples(q)
            samples = samples[np.isfinite(samples)]
            if samples.size:
                h = histogram(samples)
                _write_csv(
                    os.path.join(outdir, f"hist_{q}.csv"),
                    ["bin_left", "bin_right", "count", "density"],
                    [
                        [h.edges[i], h.edges[i + 1], int(h.counts[i]), h.density[i]]
                        for i in range(len(h.counts))
                    ],
                    chash,
                )

    if "ft" in analyses:
        cols = ["n"]
        series = []
        for q in ("s_tot", "s_mar", "s_unc"):
            samples = result.samples(q)
            samples = samples[np.isfinite(samples)]
            if samples.size:
                _, _, running = integral_ft_estimate(samples)
                cols.append(f"ft_{q}")
                series.append(running)
        nmax = max(len(s) for s in series)
        rows = [[i + 1] + [s[i] if i < len(s) else s[-1] for s in series]
                for i in range(nmax)]
        _write_csv(os.path.join(outdir, "convergence.csv"), cols, rows, chash)

    cols, rows, _ = _trajectory_series(model, setup, int(cfg["seed"]), scheme)
    _write_csv(os.path.join(outdir, "trajectory.csv"), cols, rows, chash)

    gate_fail = result.failed > 0 or (
        "consistency" in analyses and not np.all(np.isfinite(result.trace_distances))
    )
    print(f"run complete: n={cfg['n']} scheme={scheme} out={outdir} "
          f"max_trace_distance={result.max_trace_distance:.4g} excluded={st.excluded}")
    return 2 if gate_fail else 0


def cmd_verify(args) -> int:
    steps = args.steps
    base_dt = args.dt
    model = build_preset(
        "driven_qubit_thermal",
        {"epsilon": 0.0, "gamma0": args.gamma0, "tau": steps * base_dt},
    )
    outdir = args.out or os.environ.get(ENV_OUT) or "trajtherm_out"
    os.makedirs(outdir, exist_ok=True)
    chash = config_hash({"verify": True, "steps": steps, "dt": base_dt})

    ok = True
    if args.enumerate:
        tau = steps * base_dt
        results = []
        for level in range(args.halvings + 1):
            n = steps * (2 ** level)
            dt = tau / n
            oracle = lindblad_propagate(model, model.initial_state, tau, dt / 10.0)
            recs, _ = enumerate_jump_records(model, n, dt, model.initial_state, oracle.final)
            deficit = abs(forward_probability_deficit(recs))
            resid = max_detailed_ft_residual(recs)
            results.append((n, dt, deficit, resid))
            if level == 0:
                rows = [
                    [r.record_id, len(r.events), r.p_fwd, r.p_bwd, r.s_tot,
                     r.detailed_ft_residual]
                    for r in recs
                ]
                _write_csv(
                    os.path.join(outdir, "enumeration.csv"),
                    ["record_id", "n_events", "P_fwd", "P_bwd", "S_tot", "detailed_ft_residual"],
                    rows, chash,
                )
        print("enumeration (fixed duration, refining dt):")
        for n, dt, deficit, resid in results:
            print(f"  n={n:4d} dt={dt:.5f} |1-sumP|={deficit:.3e} max|log(Pf/Pb)-S_tot|={resid:.3e}")
        for (na, _, da, ra), (nb, _, db, rb) in zip(results, results[1:]):
            slope_r = np.log2(ra / rb) if rb > 0 else np.nan
            slope_d = np.log2(da / db) if db > 0 else np.nan
            print(f"  halving {na}->{nb}: residual slope {slope_r:.2f}, deficit slope {slope_d:.2f}")
            if not (0.8 <= slope_r <= 1.2):
                ok = False
        resid0 = results[0][3]
        if resid0 > args.residual_budget * results[0][1]:
            ok = False

    if args.povm:
        for dt in (base_dt, base_dt / 2):
            defect = povm_defect(model, 0.0, dt)
            print(f"  povm defect dt={dt:.5f}: {defect:.3e} (C = defect/dt^2 = {defect / dt**2:.3f})")

    print("verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def cmd_presets(_args) -> int:
    for name in preset_names():
        model = build_preset(name)
        print(f"{name}: dim={model.dim}, channels={[c.id for c in model.channels]}, "
              f"tau={model.protocol.tau}, dt={model.default_dt}")
    print("override keys: driven_qubit_thermal(omega, gamma0, epsilon, T, tau, dt); "
          "dispersive_qubit(omega_q, kappa, omega_r, T, tau, dt)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="trajtherm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo ensemble and write CSV bundles")
    p_run.add_argument("--config", help="configuration file (key = value lines)")
    p_run.add_argument("--preset", choices=preset_names())
    p_run.add_argument("--model", help="explicit model file (model.* keys)")
    p_run.add_argument("--scheme", choices=("jump", "diffusive"))
    p_run.add_argument("--n", type=int)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--tau", type=float)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--final-basis", dest="final_basis", choices=("rho_tau", "energy"))
    p_run.add_argument("--out")
    p_run.add_argument("--threads", type=int)
    p_run.add_argument("--snapshot-stride", dest="snapshot_stride", type=int)
    p_run.add_argument("--oracle-dt", dest="oracle_dt", type=float)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="verification suites (enumeration, POVM)")
    p_ver.add_argument("--enumerate", action="store_true")
    p_ver.add_argument("--povm", action="store_true")
    p_ver.add_argument("--steps", type=int, default=3)
    p_ver.add_argument("--dt", type=float, default=0.2)
    p_ver.add_argument("--halvings", type=int, default=1)
    p_ver.add_argument("--gamma0", type=float, default=0.05)
    p_ver.add_argument("--residual-budget", type=float, default=1.0,
                       help="C in the residual bound C*dt")
    p_ver.add_argument("--out")
    p_ver.set_defaults(func=cmd_verify)

    p_pre = sub.add_parser("presets", help="list bundled scenarios")
    p_pre.set_defaults(func=cmd_presets)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (NormCollapse, PositivityLoss) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except TrajthermError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
