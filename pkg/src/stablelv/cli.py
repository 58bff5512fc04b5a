"""Command-line entry point.

``stablelv run <config>``   run a named experiment from a key=value config,
                            writing CSV artifacts plus a JSON sidecar.
``stablelv check``          fast built-in verification sweep (exact-chain
                            oracle grid, symbol calibration, determinism).
``stablelv list``           list registered experiments and sample configs.

Exit codes: 0 success; 1 configuration error; 2 numerical-precision failure;
3 verification failure.
"""

from __future__ import annotations

import argparse
import filecmp
import sys
import tempfile
from importlib import resources
from pathlib import Path

from stablelv import experiments as ex
from stablelv.walks import PrecisionError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PRECISION = 2
EXIT_CHECK = 3


def _sample_config(name: str):
    ref = resources.files("stablelv") / "configs" / f"{name}.cfg"
    return ref if ref.is_file() else None


def _cmd_run(args) -> int:
    try:
        cfg = ex.load_config(args.config, out_override=args.out)
        summary = ex.run_experiment(cfg)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PrecisionError, ArithmeticError) as exc:
        print(f"precision failure: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except ex.CheckFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    sidecar = cfg.out_dir / f"{cfg.name}.json"
    print(f"{cfg.name}: wrote {sidecar}")
    for key in sorted(summary):
        print(f"  {key} = {summary[key]}")
    return EXIT_OK


def _check_oracle(report: list) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = ex.ExperimentConfig(
            name="oracle-suite", seed=0, raw={}, out_dir=Path(tmp)
        )
        summary = ex.REGISTRY["oracle-suite"](cfg)
    report.append(
        ("oracle-suite", True,
         f"worst duality residual {summary['worst_duality_residual']:.2e} "
         f"over {summary['cases']} exact-chain cases")
    )


def _check_calibration(report: list) -> None:
    from stablelv.kernels import make_kernel

    worst = 0.0
    for fam, d, alpha in (("pareto", 1, 1.0), ("pareto", 1, 0.7), ("pareto", 1, 1.5)):
        kernel = make_kernel(fam, d, alpha)
        for eta in (0.5, 1.0, 2.0):
            val = float(kernel.da_limit(eta, 1e6))
            limit = kernel.sigma2 * eta**alpha
            worst = max(worst, abs(val - limit) / limit)
    ok = worst < 0.02
    report.append(
        ("stable-calibration", ok,
         f"max relative symbol error {worst:.2e} at n=1e6 (tolerance 2e-2)")
    )
    if not ok:
        raise ex.CheckFailure("stable-symbol calibration outside 2% tolerance")


def _check_determinism(report: list) -> None:
    sample = _sample_config("lv-run")
    if sample is None:
        raise ex.CheckFailure("sample config for lv-run is missing")
    with tempfile.TemporaryDirectory() as tmp, resources.as_file(sample) as cfg_path:
        outs = []
        for tag, par in (("a", 1), ("b", 3), ("c", 1)):
            out = Path(tmp) / tag
            cfg = ex.load_config(cfg_path, out_override=out)
            cfg.parallelism = par
            ex.run_experiment(cfg)
            outs.append(out / "mass_path.csv")
        same_par = filecmp.cmp(outs[0], outs[2], shallow=False)
        cross_par = filecmp.cmp(outs[0], outs[1], shallow=False)
    ok = same_par and cross_par
    report.append(
        ("determinism", ok,
         f"byte-identical CSV: repeat-run {same_par}, parallelism 1 vs 3 {cross_par}")
    )
    if not ok:
        raise ex.CheckFailure("experiment output is not reproducible byte-for-byte")


def _check_constants(report: list) -> None:
    from stablelv import coalescing as co
    from stablelv.kernels import make_kernel

    kernel = make_kernel("pareto", 1, 0.7)
    res = co.estimate_gamma_e(
        kernel, horizons=(100.0, 300.0, 1000.0), nsamples=20_000, seed=11
    )
    oracle = co.gamma_e_oracle(kernel)
    z = abs(res.estimate.value - oracle) / res.estimate.se
    ok = z < 4.0
    report.append(
        ("escape-constant", ok,
         f"MC gamma_e {res.estimate.value:.4f} vs Green-function oracle "
         f"{oracle:.4f} ({z:.1f} SE)")
    )
    if not ok:
        raise ex.CheckFailure("gamma_e Monte Carlo disagrees with the exact oracle")


def _cmd_check(args) -> int:
    report: list = []
    checks = [_check_oracle, _check_calibration, _check_determinism]
    if args.suite == "all":
        checks.append(_check_constants)
    status = EXIT_OK
    for check in checks:
        try:
            check(report)
        except ex.CheckFailure as exc:
            print(f"FAIL: {exc}", file=sys.stderr)
            status = EXIT_CHECK
        except (PrecisionError, ArithmeticError) as exc:
            print(f"precision failure: {exc}", file=sys.stderr)
            status = EXIT_PRECISION
    for name, ok, detail in report:
        print(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")
    return status


def _cmd_list(_args) -> int:
    for name in ex.list_experiments():
        sample = _sample_config(name)
        where = f"(sample: {sample})" if sample is not None else "(no sample config)"
        print(f"{name} {where}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stablelv", description="stochastic spatial model experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="path to a key=value config file")
    p_run.add_argument(
        "--out", default=None,
        help=f"output directory (overrides the {ex.OUTPUT_ROOT_ENV} env var "
             "and the config's 'out' key)",
    )
    p_run.set_defaults(fn=_cmd_run)

    p_check = sub.add_parser("check", help="run the built-in verification sweep")
    p_check.add_argument("--suite", choices=("primary", "all"), default="primary")
    p_check.set_defaults(fn=_cmd_check)

    p_list = sub.add_parser("list", help="list registered experiments")
    p_list.set_defaults(fn=_cmd_list)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
