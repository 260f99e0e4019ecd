"""Command line interface: ``nedspec verify|spectrum|reduce|bundles``.

Exit codes
----------
0  success (verify passed, spectrum saturated, reduction verified)
1  verify failed, spectrum not saturated, or reduction residual too large
2  the configuration or certificate could not be parsed
3  a bracket end or cut point is not resolvent
4  no spectral gap at the requested weight
5  any other numerical failure
"""

from __future__ import annotations

import argparse
import os
import sys as _sys

import numpy as np

from . import __version__
from .dichotomy import verify_certificate
from .errors import (
    BracketNotResolvent,
    CutPointNotResolvent,
    NedError,
    NoSpectralGap,
    ParseError,
)
from .io import RunConfig, load_certificate, load_config, write_csv, write_json
from .reducibility import full_reduction, verify_weak_similarity
from .spectrum import estimate_spectrum, stable_bundle, unstable_bundle

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_NOT_RESOLVENT, EXIT_NO_GAP, EXIT_NUMERIC = range(6)


def _provenance(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": cfg.echo(),
        "window": cfg.window.as_list(),
        "system": cfg.system.describe(),
        "tolerances": {
            "bisect_tol": cfg.bisect_tol,
            "saturation_tol": cfg.fit.saturation_tol,
            "cap": cfg.fit.cap,
            "nonuniform_exponent": cfg.fit.exponent,
        },
    }


def _out(cfg: RunConfig, args, name: str) -> str:
    return os.path.join(args.out or cfg.output_dir, name)


def _json(cfg: RunConfig, args, name: str, payload: dict) -> None:
    if cfg.report_format == "json":
        path = write_json(_out(cfg, args, name), payload)
        print(f"wrote {path}")


def cmd_verify(cfg: RunConfig, args) -> int:
    source = args.certificate or cfg.certificate
    if source is None:
        raise ParseError("verify needs a certificate (--certificate or the config field 'certificate')")
    cert = load_certificate(source, cfg.system, cfg.window, cfg.fit)
    rep = verify_certificate(cfg.system, cert, cfg.window)
    payload = _provenance(cfg, "verify")
    payload.update(report=rep.to_dict(), certificate=cert.to_dict())
    _json(cfg, args, "verify_report.json", payload)
    print(f"verify: {'pass' if rep.passed else 'FAIL'} (stable excess {rep.max_stable_excess:.3e}, "
          f"unstable excess {rep.max_unstable_excess:.3e})")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _estimate(cfg: RunConfig):
    return estimate_spectrum(cfg.system, cfg.window, gamma_bracket=cfg.gamma_bracket,
                             bisect_tol=cfg.bisect_tol, fit_config=cfg.fit)


def cmd_spectrum(cfg: RunConfig, args) -> int:
    est = _estimate(cfg)
    payload = _provenance(cfg, "spectrum")
    payload["spectrum"] = est.to_dict()
    _json(cfg, args, "spectrum_report.json", payload)
    path = write_csv(_out(cfg, args, "spectrum_scan.csv"), ["gamma", "status", "stable_dim"],
                     [(g, s, "" if d is None else d) for g, s, d in est.scan_rows()])
    print(f"wrote {path}")
    for a, b in est.intervals:
        print(f"interval [{a:.6g}, {b:.6g}]")
    if est.references is not None:
        ref = est.references
        print(f"matches reference candidates: {ref['matched'] or 'none'}; "
              f"candidates disagree: {ref['reference_conflict']}")
    print(f"saturated: {est.saturated}")
    return EXIT_OK if est.saturated else EXIT_FAIL


def cmd_reduce(cfg: RunConfig, args) -> int:
    est = _estimate(cfg)
    red = full_reduction(cfg.system, est, cfg.window, fit_config=cfg.fit)
    sim = verify_weak_similarity(cfg.system, red.blocks, red.transform, cfg.window)
    payload = _provenance(cfg, "reduce")
    payload.update(spectrum=est.to_dict(), reduction=red.to_dict(), similarity=sim.to_dict(),
                   off_block_ratio=red.blocks.off_block_ratio())
    _json(cfg, args, "reduce_report.json", payload)
    path = write_csv(_out(cfg, args, "transform_norms.csv"), ["k", "log_norm_S", "log_norm_S_inv"],
                     red.transform.norm_rows())
    print(f"wrote {path}")
    print(f"blocks {red.blocks.dims}; residual {sim.max_residual:.3e}; "
          f"M = {sim.fitted_M:.6g}, eps = {sim.fitted_eps:.6g}")
    return EXIT_OK if sim.passed else EXIT_FAIL


def cmd_bundles(cfg: RunConfig, args) -> int:
    gamma = args.gamma if args.gamma is not None else cfg.gamma
    if gamma is None:
        raise ParseError("bundles needs --gamma or the config field 'gamma'")
    fiber = args.fiber if args.fiber is not None else cfg.fiber
    fiber = cfg.window.midpoint if fiber is None else fiber
    h = cfg.fit.horizon_for(cfg.window)
    S = stable_bundle(cfg.system, gamma, fiber, h, cfg.fit.bundle_eps, exponent=cfg.fit.exponent)
    U = unstable_bundle(cfg.system, gamma, fiber, h, cfg.fit.bundle_eps, exponent=cfg.fit.exponent)
    both = np.concatenate([S.basis, U.basis], axis=1)
    complementary = S.dim + U.dim == cfg.system.dimension and (
        both.shape[1] == 0 or float(np.linalg.svd(both, compute_uv=False)[-1]) > 1e-8
    )
    payload = _provenance(cfg, "bundles")
    payload.update(gamma=gamma, fiber=fiber, horizon=h, stable=S.to_dict(), unstable=U.to_dict(),
                   complementary=bool(complementary))
    _json(cfg, args, "bundles_report.json", payload)
    print(f"stable dim {S.dim}, unstable dim {U.dim}, complementary: {bool(complementary)}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "spectrum": cmd_spectrum, "reduce": cmd_reduce, "bundles": cmd_bundles}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nedspec", description="Nonuniform dichotomy spectra of difference systems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--gamma", type=float, help="weight for the bundles command")
    p.add_argument("--fiber", type=int, help="fiber index for the bundles command")
    p.add_argument("--certificate", help="JSON certificate for the verify command")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ParseError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_PARSE
    except BracketNotResolvent as exc:
        print(f"error: {exc}. Hint: widen gamma_bracket in the config.", file=_sys.stderr)
        return EXIT_NOT_RESOLVENT
    except CutPointNotResolvent as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NOT_RESOLVENT
    except NoSpectralGap as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NO_GAP
    except (NedError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
