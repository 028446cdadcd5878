"""
semispec command-line front end

Exit codes: 0 every check passed, 1 a mathematical check failed, 2 usage or configuration error.
"""
import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import settings
from .models.errors import ConfigError, GeneratorFormatError, SemispecError
from .models.schemas import (
    ChainSummary, ChainVerdict, GeneratorSpec, LocalSpectrumSummary, ReportBundle, RunConfig,
)
from .services import (
    CauchyService, LinalgService, LocalSpectralService, SemigroupService, StabilityService,
    StorageService, ZooService,
)
from .utils.format_utils import complex_pair, complex_pairs, format_points, parse_complex_list, parse_complex_token

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

COMMANDS = ("verify-identities", "local-spectrum", "check-theorems", "stability", "zoo")


class Services:
    """Service graph wired from one tolerance table"""

    def __init__(self, tolerances: Dict[str, float], out_dir: str):
        tol = {**settings.tolerances(), **tolerances}
        self.linalg = LinalgService(cluster_tol_rel=tol["cluster_tol_rel"], rank_tol=tol["rank_tol"],
                                    contain_tol=tol["contain_tol"])
        self.semigroup = SemigroupService(self.linalg, identity_tol=tol["identity_tol"])
        self.cauchy = CauchyService(self.linalg, self.semigroup, identity_tol=tol["identity_tol"],
                                    power_tol=tol["power_tol"], quad_atol=tol["quad_atol"])
        self.local = LocalSpectralService(self.linalg, self.cauchy, membership_tol=tol["membership_tol"])
        self.stability = StabilityService(self.linalg, self.semigroup, self.local, axis_tol=tol["axis_tol"])
        self.zoo = ZooService(self.linalg, self.stability)
        self.storage = StorageService(out_dir)
        self.tolerances = tol


def _parse_tolerances(items: Optional[List[str]]) -> Dict[str, float]:
    known = settings.tolerances()
    parsed = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in known:
            raise ConfigError(f"--tol expects one of {', '.join(known)} as key=value, got {item!r}")
        try:
            parsed[key] = float(value)
        except ValueError:
            raise ConfigError(f"--tol {key}: {value!r} is not a number")
    return parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semispec",
                                     description="Local spectral laboratory for matrix C0 semigroups")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=settings.OUT_DIR, help="output directory (env SEMISPEC_OUT_DIR)")
    common.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance")

    generator = argparse.ArgumentParser(add_help=False)
    generator.add_argument("--gen", required=True,
                           help="builtin as name[:a,b,...] (e.g. jordan:2, diag:-1,-2) or a generator file")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-identities", parents=[common, generator],
                       help="Cauchy operator identities and power identities")
    p.add_argument("--lambda", dest="lam", default="0", help="complex re[:im]")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=4)

    p = sub.add_parser("local-spectrum", parents=[common, generator], help="local spectrum and resolvent chains")
    p.add_argument("--x", default=None, help="vector as comma-separated re[:im] tokens (default all ones)")
    p.add_argument("--mu-grid", default="", help="comma-separated re[:im] points")
    p.add_argument("--depth", type=int, default=settings.CHAIN_DEPTH)

    p = sub.add_parser("check-theorems", parents=[common, generator], help="spectral and core inclusions")
    p.add_argument("--lambda", dest="lam", default="0")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--seed", type=int, default=settings.SEED)

    p = sub.add_parser("stability", parents=[common, generator], help="strong or uniform stability")
    p.add_argument("--mode", choices=["strong", "uniform"], default="strong")
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=settings.SEED)

    p = sub.add_parser("zoo", parents=[common], help="list builtin generators")
    p.add_argument("--check", action="store_true", help="verify every expected fact")
    return parser


def _config_from_args(args) -> RunConfig:
    values = {
        "command": args.command,
        "gen": getattr(args, "gen", ""),
        "out_dir": args.out,
        "tolerances": _parse_tolerances(args.tol),
    }
    if hasattr(args, "lam"):
        values["lam"] = parse_complex_token(args.lam)
    for key in ("t", "t0", "t_max", "n_max", "samples", "depth", "seed", "mode"):
        if hasattr(args, key):
            values[key] = getattr(args, key)
    values.setdefault("seed", settings.SEED)
    if getattr(args, "x", None) is not None:
        values["x"] = parse_complex_list(args.x)
    if getattr(args, "mu_grid", None):
        values["mu_grid"] = parse_complex_list(args.mu_grid)
    return RunConfig(**values)


def resolve_generator(services: Services, gen: str) -> GeneratorSpec:
    if os.path.isfile(gen):
        return services.storage.load_generator(gen)
    spec = services.zoo.from_token(gen)
    return spec.model_copy(update={"name": gen})


def _samples(dim: int, count: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(dim) + 1j * rng.standard_normal(dim) for _ in range(count)]


def _write(services: Services, config: RunConfig, bundle: ReportBundle) -> None:
    base = config.command
    services.storage.save_report(services.storage.resolve(f"{base}.json"), bundle)
    manifest = services.storage.build_manifest(config.command, config.seed, services.tolerances,
                                               config.model_dump(mode="json"))
    services.storage.write_manifest(services.storage.resolve(f"{base}.manifest.json"), manifest)


def run_verify_identities(services: Services, config: RunConfig) -> int:
    spec = resolve_generator(services, config.gen)
    cauchy = services.cauchy
    reports = [
        cauchy.verify_cauchy_identities(spec.A, config.lam, config.t, name=spec.name),
        cauchy.verify_power_identities(spec.A, config.lam, config.t, config.n_max, name=spec.name),
        cauchy.factorization_residuals(spec.A, config.lam, config.t, name=spec.name),
    ]
    passed = all(r.all_passed for r in reports)
    for report in reports:
        for entry in report.entries:
            print(f"{'pass' if entry.passed else 'FAIL'}  {entry.identity:<48} "
                  f"residual {entry.residual:.3e}  scale {entry.scale:.3e}")
    _write(services, config, ReportBundle(command=config.command, generator=spec.name, passed=passed,
                                          reports=reports))
    return EXIT_OK if passed else EXIT_FAILED


def run_local_spectrum(services: Services, config: RunConfig) -> int:
    spec = resolve_generator(services, config.gen)
    local = services.local
    x = np.ones(spec.dim, dtype=complex) if config.x is None else np.array(config.x, dtype=complex)
    if x.shape[0] != spec.dim:
        raise ConfigError(f"--x has {x.shape[0]} entries, generator has dimension {spec.dim}")

    decomp = services.linalg.eig_decompose(spec.A)
    report = local.local_spectrum(spec.A, x, decomp=decomp)
    if not np.any(x):
        print("sigma_A(x) = ∅ (zero vector)")
    else:
        print(f"sigma_A(x) = {format_points(report.points)}")

    chains, agree_all = [], True
    for mu in config.mu_grid:
        chain = local.resolvent_chain(spec.A, mu, x, depth=config.depth)
        member = any(abs(mu - z) <= decomp.cluster_tol for z in report.points)
        agrees = (chain.verdict == ChainVerdict.CONVERGENT) != member
        agree_all = agree_all and agrees
        expected = None
        if report.points and not member:
            expected = 1.0 / min(abs(mu - z) for z in report.points)
        growth = chain.growth_estimate if np.isfinite(chain.growth_estimate) else None
        chains.append(ChainSummary(mu=complex_pair(mu), verdict=chain.verdict, growth_estimate=growth,
                                   expected_growth=expected, failing_index=chain.failing_index,
                                   step_norms=chain.step_norms, agrees_with_projections=agrees))
        print(f"mu = {format_points([mu]):<16} {chain.verdict.value:<12} "
              f"growth {growth if growth is not None else float('inf'):.6g}  "
              f"1/dist {expected if expected is not None else float('nan'):.6g}")

    summary = LocalSpectrumSummary(x=complex_pairs(x), points=complex_pairs(report.points),
                                   weights=report.weights, chains=chains)
    _write(services, config, ReportBundle(command=config.command, generator=spec.name, passed=agree_all,
                                          reports=[summary]))
    return EXIT_OK if agree_all else EXIT_FAILED


def run_check_theorems(services: Services, config: RunConfig) -> int:
    spec = resolve_generator(services, config.gen)
    local = services.local
    samples = _samples(spec.dim, config.samples, config.seed)
    grid = list(services.linalg.eig_decompose(spec.A).eigenvalues) + [config.lam, 0j]

    reports = [
        local.verify_local_spectrum_inclusion(spec.A, config.t, samples, name=spec.name),
        local.verify_svep_inclusion(spec.A, config.t, grid, name=spec.name),
        local.classical_spectra_inclusion(spec.A, config.t, name=spec.name),
    ]
    reports.extend(local.verify_core_inclusions(spec.A, config.lam, config.t, name=spec.name))
    passed = all(r.included for r in reports)
    for report in reports:
        print(f"{'holds' if report.included else 'FAILS'}  {report.theorem}")
        for witness in report.witnesses:
            print(f"        {witness}")
    _write(services, config, ReportBundle(command=config.command, generator=spec.name, passed=passed,
                                          reports=reports))
    return EXIT_OK if passed else EXIT_FAILED


def run_stability(services: Services, config: RunConfig) -> int:
    spec = resolve_generator(services, config.gen)
    stability = services.stability
    samples = _samples(spec.dim, config.samples, config.seed)
    if config.mode == "strong":
        verdict = stability.strong_stability_check(spec, samples, config.t_max)
        horizon = verdict.criterion_evidence.get("t_max", config.t_max or 20.0)
    else:
        verdict = stability.uniform_stability_check(spec, config.t0, samples)
        horizon = config.t_max or 20.0 * max(config.t0, 0.05)

    grid = np.linspace(0.0, horizon, 101)
    stability.write_trajectories(spec, samples, grid, services.storage.resolve(f"{config.command}.csv"))

    print(f"{config.mode} stability: {verdict.status} (criterion {verdict.criterion_holds}, "
          f"simulation agrees {verdict.simulation_agrees})")
    if verdict.decay_rate is not None:
        print(f"decay rate {verdict.decay_rate:.6g}")
    if "power_ratio" in verdict.criterion_evidence:
        print(f"power ratio {verdict.criterion_evidence['power_ratio']:.6g}, "
              f"spectral radius {verdict.criterion_evidence['spectral_radius']:.6g}")
    passed = verdict.simulation_agrees
    _write(services, config, ReportBundle(command=config.command, generator=spec.name, passed=passed,
                                          reports=[verdict]))
    return EXIT_OK if passed else EXIT_FAILED


def run_zoo(services: Services, config: RunConfig, check: bool) -> int:
    entries = services.zoo.zoo_entries()
    reports = [services.zoo.check_entry(entry) for entry in entries] if check else []
    passed = all(r.all_passed for r in reports)
    for k, entry in enumerate(entries):
        status = ("pass" if reports[k].all_passed else "FAIL") if check else ""
        print(f"{entry.name:<20} {entry.stability_class:<17} {status}")
    _write(services, config, ReportBundle(command=config.command, generator="zoo", passed=passed,
                                          reports=list(entries) + reports))
    return EXIT_OK if passed else EXIT_FAILED


def _first_error(e: ValidationError) -> str:
    error = e.errors()[0]
    return error["msg"].removeprefix("Value error, ")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        config = _config_from_args(args)
        services = Services(config.tolerances, config.out_dir)
        if config.command == "verify-identities":
            return run_verify_identities(services, config)
        if config.command == "local-spectrum":
            return run_local_spectrum(services, config)
        if config.command == "check-theorems":
            return run_check_theorems(services, config)
        if config.command == "stability":
            return run_stability(services, config)
        return run_zoo(services, config, args.check)
    except ValidationError as e:
        print(f"semispec: {_first_error(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, GeneratorFormatError) as e:
        print(f"semispec: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except SemispecError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
