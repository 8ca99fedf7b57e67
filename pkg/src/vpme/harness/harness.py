import csv
import hashlib
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
import numpy as np
from .. import __version__
from ..diagnostics import diagnostics as diag
from ..electrostatics import electrostatics as es
from ..errors import InvalidParameterError, VPMEError
from ..fields import fields as fl
from ..helper_funcs.helper_funcs import laplacian
from ..kinetics import kinetics as kin
from ..scenarios import scenarios as sc
from ..stability import stability as st
from .config import ScenarioConfig, config_hash, load_config, parse_config

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.cfg"
ENERGY_FILE = "energy.csv"
SNAPSHOT_PATTERN = "snap_{0:05d}.vpme"
STABILITY_BATTERY_CONSTANT = 10.0
FIELD_BATTERY_CONSTANT = 10.0


@dataclass
class RunManifest:
    """
    What a run produced and how to reproduce it: the hash of the stored config, the snapshot files with their hashes,
    the diagnostic files and wall-clock metadata.
    """
    config_hash: str
    version: str
    snapshots: list = field(default_factory=list)
    snapshot_hashes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    started: str = ""
    wall_seconds: float = 0.0

    def write(self, directory) -> Path:
        path = Path(directory) / MANIFEST_FILE
        path.write_text(json.dumps(asdict(self), sort_keys=True, indent=2), encoding="utf-8")
        return path

    @classmethod
    def read(cls, directory) -> "RunManifest":
        return cls(**json.loads((Path(directory) / MANIFEST_FILE).read_text(encoding="utf-8")))

    def matches_config(self, directory) -> bool:
        """
        whether the stored config still hashes to config_hash.
        """
        return config_hash((Path(directory) / CONFIG_FILE).read_text(encoding="utf-8")) == self.config_hash


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_csv(path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def electron_profile(config: ScenarioConfig) -> fl.ScalarField:
    return sc.profile_field(config.grid, config.g, name="g")


def build_state(config: ScenarioConfig, ens: kin.ParticleEnsemble = None, time_: float = 0.0) \
        -> kin.SimulationState:
    """
    samples the initial ensemble (unless given) and solves its split field.
    """
    if ens is None:
        ens = kin.sample_initial(config.f0, config.particles, config.seed)
    return kin.initial_state(ens, config.grid, electron_profile(config), config.mode, config.solver, time=time_)


def _energy_row(state: kin.SimulationState, orders: tuple) -> list:
    report = diag.energy(state)
    moments = diag.moments(state.ensemble, orders, state.time)
    return ([state.time, report.kinetic, report.field, report.electron_V, report.electron_F, report.total_V,
             report.total_F] + [moments.values[k][0] for k in orders] + [fl.lp_norm(state.split.rho, 5.0 / 3.0)])


def _energy_header(orders: tuple) -> list:
    return (["t", "kinetic", "field", "electron_V", "electron_F", "E_V", "E_F"] + [f"M_{k}" for k in orders]
            + ["rho_l53"])


def cmd_run(config_path, out_dir) -> RunManifest:
    """
    Executes a scenario: writes the config copy, one snapshot file per recorded time, energy.csv with one energy and
    moment row per time step (appended and flushed as the run goes), and manifest.json. Nothing is written when the
    config does not parse.
    :param config_path: scenario file.
    :param out_dir: run directory (created).
    :return: the RunManifest.
    """
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    clock = time.perf_counter()
    (out / CONFIG_FILE).write_text(config.text, encoding="utf-8")
    manifest = RunManifest(config_hash=config.digest, version=__version__, started=started)

    def observer(state: kin.SimulationState) -> None:
        name = SNAPSHOT_PATTERN.format(len(manifest.snapshots))
        kin.write_snapshot(kin.Snapshot.of(state), out / name)
        manifest.snapshots.append(name)
        manifest.snapshot_hashes.append(file_hash(out / name))

    with open(out / ENERGY_FILE, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_energy_header(config.orders))

        def record_energy(state: kin.SimulationState) -> None:
            writer.writerow(_energy_row(state, config.orders))
            handle.flush()

        kin.run(build_state(config), config.dt, config.T, config.snapshot_every, observer, on_step=record_energy)
    manifest.diagnostics["energy"] = ENERGY_FILE
    manifest.wall_seconds = time.perf_counter() - clock
    manifest.write(out)
    logger.info("run written to %s (%d snapshots)", out, len(manifest.snapshots))
    return manifest


def read_run(run_dir) -> tuple:
    """
    :return: (ScenarioConfig, list of Snapshots) of a run directory.
    """
    run_dir = Path(run_dir)
    manifest = RunManifest.read(run_dir)
    config = parse_config((run_dir / CONFIG_FILE).read_text(encoding="utf-8"))
    return config, [kin.read_snapshot(run_dir / name) for name in manifest.snapshots]


def cmd_solve_field(config_path=None, out_dir=None, method: str = "fft", rho_path=None, g_path=None, mode=None,
                    tol: float = None) -> dict:
    """
    Solves the split field of a density, writes U_bar, U_hat (binary and CSV) and a JSON certificate with residuals,
    sign and mass checks and the norms of both potentials. The density and profile come either from two field files
    (rho_path and g_path, as written by write_field) or from the scenario's initial ensemble and profile.
    :param config_path: scenario config; optional when both field files are given.
    :param out_dir: output directory.
    :param method: "fft" or "direct" free-space values for the standalone U_bar check.
    :param rho_path: field file of the ion density.
    :param g_path: field file of the electron profile.
    :param mode: "variable" or "fixed"; default from the config, else variable.
    :param tol: screening tolerance overriding the config's solver.tol.
    :return: the certificate dictionary; "passed" summarises the checks.
    """
    if out_dir is None:
        raise InvalidParameterError("out_dir", out_dir, "an output directory is required")
    from_files = rho_path is not None or g_path is not None
    if from_files and (rho_path is None or g_path is None):
        raise InvalidParameterError("g_path" if g_path is None else "rho_path", None,
                                       "the field files come as a pair")
    if not from_files and config_path is None:
        raise InvalidParameterError("config_path", None, "give a config or both field files")
    config = load_config(config_path) if config_path is not None else None
    settings = config.solver if config else es.SolverSettings()
    if tol is not None:
        settings = replace(settings, tolerance=tol)
    mode = es.ChargeMode(mode or (config.mode if config else es.ChargeMode.VARIABLE))
    if from_files:
        rho, g = fl.read_field(rho_path, name="rho"), fl.read_field(g_path, name="g")
    else:
        g = electron_profile(config)
        rho = kin.deposit_density(kin.sample_initial(config.f0, config.particles, config.seed), config.grid)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u_bar = fl.solve_free_space_poisson(rho, method=method, discrete=True)
    split = es.solve_split_field(rho, g, mode, settings)
    for u in (split.u_bar, split.u_hat):
        fl.write_field(u, out / f"{u.name}.bin")
        fl.export_csv(u, out / f"{u.name}.csv")
    grid = rho.grid
    lap = np.sum(laplacian(split.u_hat.values, grid.spacing)) * grid.cell_volume
    report = {"poisson_residual": fl.poisson_residual(u_bar, rho), "screening_residual": split.residual,
              "iterations": split.iterations, "u_hat_max": float(split.u_hat.values.max()),
              "electron_mass": split.electron_mass, "laplacian_integral": float(lap), "mode": split.mode.value,
              "method": method, "tolerance": settings.tolerance, "source": "files" if from_files else "config",
              "u_bar_norms": asdict(fl.norm_report(split.u_bar)), "u_hat_norms": asdict(fl.norm_report(split.u_hat))}
    passed = report["u_hat_max"] <= 1e-12 and report["poisson_residual"] < 1e-8
    if split.mode is es.ChargeMode.FIXED:
        passed = passed and abs(report["laplacian_integral"] - 1.0) < 1e-6
    report["passed"] = bool(passed)
    (out / "field_report.json").write_text(json.dumps(report, sort_keys=True, indent=2), encoding="utf-8")
    logger.info("split field (%s, %s) written to %s", report["mode"], report["source"], out)
    return report


@dataclass
class DiagnoseResult:
    rows: list
    envelope: diag.EnvelopeVerdict
    passed: bool


def cmd_diagnose(run_dir, orders: tuple = None, out_path=None) -> DiagnoseResult:
    """
    Re-solves the field at every snapshot of a run and emits the diagnostic time series (t, E_V, E_F, M_k, rho_l53,
    verdicts) as CSV.
    :param run_dir: directory written by cmd_run.
    :param orders: moment orders, default is the config's diag.orders.
    :param out_path: CSV path, default is diagnose.csv in the run directory.
    :return: a DiagnoseResult.
    """
    config, snapshots = read_run(run_dir)
    orders = tuple(orders or config.orders)
    f_inf = kin.f_inf_bound(config.f0)
    g = electron_profile(config)
    g_mass = fl.lp_norm(g, 1)
    history = diag.MomentReport(orders)
    rows, passed = [], True
    for snapshot in snapshots:
        state = build_state(config, snapshot.ensemble(), snapshot.time)
        report = diag.energy(state)
        history.record(snapshot.time, state.ensemble)
        single = diag.moments(state.ensemble, orders, snapshot.time)
        interp_ok = all(diag.interpolation_check(state.split.rho, state.ensemble, k, f_inf).holds
                        for k in orders if k > 0)
        holder_ok = diag.holder_ordering_check(single)
        bound_ok = diag.energy_moment_bound(report, g_mass)
        passed = passed and interp_ok and holder_ok and bound_ok
        rows.append([snapshot.time, report.total_V, report.total_F] + [single.values[k][0] for k in orders]
                    + [fl.lp_norm(state.split.rho, 5.0 / 3.0), interp_ok, holder_ok, bound_ok])
    envelope = diag.moment_envelope_check(history)
    passed = passed and envelope.holds
    header = ["t", "E_V", "E_F"] + [f"M_{k}" for k in orders] + ["rho_l53", "interpolation", "holder", "energy_bound"]
    _write_csv(out_path or Path(run_dir) / "diagnose.csv", header, rows)
    return DiagnoseResult(rows=rows, envelope=envelope, passed=passed)


def _splits(config: ScenarioConfig, snapshots: list) -> list:
    return [build_state(config, s.ensemble(), s.time).split for s in snapshots]


def cmd_stability(run_a, run_b, exact_cap: int = st.EXACT_W2_CAP, with_terms: bool = True,
                  out_dir=None) -> st.StabilityReport:
    """
    Compares two runs with the identity coupling on ids: writes stability.csv (t, D, W2, envelope, I1..I4, verdict)
    and stability_summary.json with the fitted constant and switch time.
    """
    config_a, snaps_a = read_run(run_a)
    config_b, snaps_b = read_run(run_b)
    splits_a = _splits(config_a, snaps_a) if with_terms else None
    splits_b = _splits(config_b, snaps_b) if with_terms else None
    report = st.verify_stability(snaps_a, snaps_b, st.Coupling(), exact_cap, splits_a, splits_b)
    rows = []
    for index, t in enumerate(report.times):
        terms = report.split_terms[index] if report.split_terms else None
        i_values = [terms.i1, terms.i2, terms.i3, terms.i4] if terms else [""] * 4
        ok = bool(report.coupling_ok[index]) and report.w2[index] <= report.envelope[index] * (1 + 1e-9) + 1e-15
        rows.append([t, report.distance[index], report.w2[index], report.envelope[index]] + i_values + [ok])
    out = Path(out_dir or run_a)
    _write_csv(out / "stability.csv", ["t", "D", "W2", "envelope", "I1", "I2", "I3", "I4", "verdict"], rows)
    summary = {"constant": report.constant, "switch_time": report.switch_time, "holds": report.holds,
               "regime_residuals": report.regime_residuals}
    (out / "stability_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2), encoding="utf-8")
    return report


def _timed(function, repeats: int) -> list:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        function()
        samples.append(time.perf_counter() - start)
    return samples


def cmd_bench(sizes: tuple = (32, 48, 64), particles: tuple = (10 ** 4, 10 ** 5, 10 ** 6), repeats: int = 3,
              out_path=None) -> list:
    """
    Wall time of one free-space Poisson solve per grid size and of one particle push (gather, drift, deposit) per
    particle count. Allocation failures are reported in the row instead of aborting.
    :return: rows (kind, size, mean seconds, coefficient of variation, status).
    """
    rows = []
    for n in sizes:
        try:
            grid = fl.GridSpec(4.0, n)
            rho = sc.gaussian_density(grid, 0.5)
            samples = _timed(lambda: fl.solve_free_space_poisson(rho), repeats)
            rows.append(["poisson", n, float(np.mean(samples)), float(np.std(samples) / np.mean(samples)), "ok"])
        except MemoryError:
            rows.append(["poisson", n, math.nan, math.nan, "allocation failure"])
    grid = fl.GridSpec(4.0, 32)
    e_field = fl.negative_gradient(fl.solve_free_space_poisson(sc.gaussian_density(grid, 0.5)))
    for count in particles:
        try:
            ens = kin.sample_initial(kin.InitialDataSpec(sigma=0.5, vth=0.5), count, seed=1)

            def push() -> None:
                acc = kin.interpolate_acceleration(e_field, ens.positions)
                moved = kin.ParticleEnsemble(ens.positions + 1e-3 * (ens.velocities + 1e-3 * acc), ens.velocities)
                kin.deposit_density(moved, grid)

            samples = _timed(push, repeats)
            rows.append(["push", count, float(np.mean(samples)), float(np.std(samples) / np.mean(samples)), "ok"])
        except MemoryError:
            rows.append(["push", count, math.nan, math.nan, "allocation failure"])
    if out_path is not None:
        _write_csv(out_path, ["kind", "size", "seconds", "cv", "status"], rows)
    return rows


# acceptance battery

def _check_poisson_oracle(quick: bool) -> tuple:
    errors = []
    for n in ((16,) if quick else (16, 32)):
        grid = fl.GridSpec(4.0, n)
        rho = sc.generate_random_density(grid, seed=n)
        fast = fl.green_convolution(rho, "fft")
        direct = fl.green_convolution(rho, "direct")
        errors.append(float(np.linalg.norm(fast - direct) / np.linalg.norm(direct)))
    return max(errors) < 1e-6, f"max relative error {max(errors):.2e}"


def _check_neutral_equilibrium(quick: bool) -> tuple:
    grid = fl.GridSpec(4.0, 16 if quick else 32)
    g = sc.gaussian_density(grid, 0.8, name="g")
    settings = es.SolverSettings(tolerance=1e-12)
    worst = 0.0
    for mode in es.ChargeMode:
        split = es.solve_split_field(g.like(g.values.copy(), name="rho"), g, mode, settings)
        field_ratio = fl.lp_norm(split.e_total, math.inf) / fl.lp_norm(split.e_bar, math.inf)
        hat_error = float(np.linalg.norm(split.u_hat.values + split.u_bar.values) / np.linalg.norm(split.u_bar.values))
        worst = max(worst, field_ratio, hat_error)
    return worst < 1e-6, f"worst relative deviation {worst:.2e}"


def _check_certificates(quick: bool) -> tuple:
    grid = fl.GridSpec(4.0, 16 if quick else 24)
    settings = es.SolverSettings(tolerance=1e-10)
    worst_sign, worst_mass, min_m = -math.inf, 0.0, math.inf
    pairs = []
    for scenario in sc.density_battery(grid):
        variable = es.solve_split_field(scenario.rho, scenario.g, es.ChargeMode.VARIABLE, settings)
        fixed = es.solve_split_field(scenario.rho, scenario.g, es.ChargeMode.FIXED, settings)
        worst_sign = max(worst_sign, float(variable.u_hat.values.max()), float(fixed.u_hat.values.max()))
        lap = float(np.sum(laplacian(fixed.u_hat.values, grid.spacing))) * grid.cell_volume
        worst_mass = max(worst_mass, abs(lap - 1.0))
        min_m = min(min_m, fixed.electron_mass)
        pairs.append((scenario.g, fixed.u_bar))
    bouchut = es.fit_bouchut_constant(pairs)
    passed = worst_sign <= 1e-12 and worst_mass < 1e-6 and min_m > math.exp(-(settings.K - 1)) \
        and bouchut <= es.DEFAULT_BOUCHUT_CONSTANT
    return passed, f"max U_hat {worst_sign:.2e}, |int Lap U_hat - 1| {worst_mass:.2e}, min m {min_m:.3e}, " \
                   f"Bouchut constant {bouchut:.3g}"


def _check_variational(quick: bool) -> tuple:
    grid = fl.GridSpec(4.0, 16 if quick else 24)
    settings = es.SolverSettings(tolerance=1e-11)
    worst_gap, worst_gateaux = math.inf, 0.0
    for scenario in sc.density_battery(grid)[:3 if quick else 6]:
        split = es.solve_split_field(scenario.rho, scenario.g, es.ChargeMode.VARIABLE, settings)
        directions = sc.random_perturbations(grid, 20, seed=len(scenario.name))
        base = es.evaluate_JV(split.u_hat, split.u_bar, scenario.g, dirichlet_weight=0.5)
        for phi in directions:
            trial = es.evaluate_JV(split.u_hat.like(split.u_hat.values + phi), split.u_bar, scenario.g, 0.5)
            worst_gap = min(worst_gap, trial - base)
        checks = es.gateaux_check(split.u_hat, split.u_bar, scenario.g, directions[:5], dirichlet_weight=0.5)
        worst_gateaux = max([worst_gateaux] + [c.relative_error for c in checks])
    return worst_gap >= 0 and worst_gateaux < 1e-4, \
        f"min J(U+d)-J(U) {worst_gap:.2e}, worst Gateaux error {worst_gateaux:.2e}"


def _paired_config(quick: bool, shift: float = 0.0, spatial: str = "two_bump", T: float = None) -> ScenarioConfig:
    n, count = (24, 20000) if quick else (48, 200000)
    text = "\n".join([f"grid.L = 4.0", f"grid.n = {n}", f"particles.N = {count}", "seed = 11", "dt = 0.01",
                      f"T = {T if T is not None else (0.4 if quick else 1.0)}", "snapshot_every = 10",
                      "g.sigma = 0.8", f"f0.profile = {spatial}", "f0.sigma = 0.5", "f0.separation = 1.2",
                      "f0.vth = 0.5", f"f0.shift = {shift},0,0"])
    return parse_config(text)


def _record(config: ScenarioConfig, mode: es.ChargeMode = None) -> tuple:
    if mode is not None:
        config = replace(config, mode=mode)
    states = []
    snapshots = kin.run(build_state(config), config.dt, config.T, config.snapshot_every, states.append)
    return snapshots, states


def _check_energy(quick: bool) -> tuple:
    drifts = []
    for mode in es.ChargeMode:
        _, states = _record(_paired_config(quick, spatial="gaussian"), mode)
        drifts.append(diag.energy_drift([diag.energy(s) for s in states]))
    return max(drifts) < 0.01, f"energy drifts {', '.join(f'{d:.2e}' for d in drifts)}"


def _check_moments(quick: bool) -> tuple:
    config = _paired_config(quick, T=1.0 if quick else 2.0)
    orders = (2, 4, 6)
    snapshots, states = _record(config)
    history = diag.moment_history(snapshots, orders)
    envelope = diag.moment_envelope_check(history)
    f_inf = kin.f_inf_bound(config.f0)
    margins = [diag.interpolation_check(s.split.rho, s.ensemble, k, f_inf).margin for s in states for k in orders]
    return envelope.holds and min(margins) >= 1.0, f"fitted C {envelope.constant:.3g}, min margin {min(margins):.3g}"


def _check_transport(quick: bool) -> tuple:
    rng = np.random.default_rng(5)
    a = kin.ParticleEnsemble(rng.normal(size=(8, 3)), rng.normal(size=(8, 3)))
    b = kin.ParticleEnsemble(rng.normal(size=(8, 3)), rng.normal(size=(8, 3)))
    pa, pb = np.hstack([a.positions, a.velocities]), np.hstack([b.positions, b.velocities])
    brute = min(np.sum((pa - pb[list(p)]) ** 2) for p in itertools.permutations(range(8))) / 8.0
    exact_error = abs(st.w2_exact(a, b) - math.sqrt(brute))
    count = 128 if quick else 512
    c = kin.ParticleEnsemble(rng.normal(size=(count, 3)), rng.normal(size=(count, 3)))
    d = kin.ParticleEnsemble(rng.normal(size=(count, 3)), rng.normal(size=(count, 3)))
    exact = st.w2_exact(c, d)
    entropic = st.w2_entropic(c, d).value
    relative = abs(entropic - exact) / exact
    return exact_error < 1e-12 and relative < 0.02, f"brute-force error {exact_error:.1e}, entropic gap {relative:.2%}"


def _stability_runs(quick: bool) -> list:
    base, base_states = _record(_paired_config(quick))
    pairs = []
    for delta in (1e-3, 1e-4):
        shifted, shifted_states = _record(_paired_config(quick, shift=delta))
        pairs.append((delta, base, shifted, base_states, shifted_states))
    return pairs


def _check_stability(pairs: list, exact_cap: int) -> tuple:
    finals, constants, coupling_ok = [], [], True
    for delta, base, shifted, _, _ in pairs:
        report = st.verify_stability(base, shifted, st.Coupling(), exact_cap)
        coupling_ok = coupling_ok and bool(np.all(report.coupling_ok))
        constants.append(report.constant)
        finals.append(report.w2[-1])
    passed = coupling_ok and max(constants) <= STABILITY_BATTERY_CONSTANT and finals[1] < finals[0]
    return passed, f"fitted C {max(constants):.3g}, final W2 {finals[0]:.2e} vs {finals[1]:.2e}"


def _check_field_stability(pairs: list, exact_cap: int) -> tuple:
    verdicts = []
    for _, _, _, base_states, shifted_states in pairs:
        a, b = base_states[-1], shifted_states[-1]
        verdicts.append(st.field_stability_check(a.split, b.split, a.ensemble, b.ensemble, a.g, exact_cap))
    bar_ok = all(v.bar_holds(1.1) for v in verdicts)
    hat_constant = max(v.hat_constant for v in verdicts)
    return bar_ok and all(v.hat_holds(FIELD_BATTERY_CONSTANT) for v in verdicts), \
        f"U_bar inequality {'holds' if bar_ok else 'fails'}, fitted U_hat constant {hat_constant:.3g}"


def _check_modulus(quick: bool) -> tuple:
    grid = np.linspace(0.0, 1.0, 1000)
    values = st.h_modulus(grid)
    slopes = np.diff(values) / np.diff(grid)
    monotone = bool(np.all(np.diff(values) >= -1e-15))
    concave = bool(np.all(np.diff(slopes) <= 1e-9))
    branch = st.h_modulus(math.exp(-2.0)) == 4.0 * math.exp(-2.0)
    c = 1.3
    half = abs(st.gronwall_envelope(0.5, c, 0.7) - st.gronwall_envelope(0.5 + 1e-15, c, 0.7)) < 1e-12
    t0 = st.regime_switch_time(1e-3, c)
    switch = abs(st.gronwall_envelope(1e-3, c, t0) - 0.5) < 1e-12
    return monotone and concave and branch and half and switch, \
        f"monotone {monotone}, concave {concave}, branch {branch}, continuity {half and switch}"


def cmd_verify(out_dir, quick: bool = True) -> list:
    """
    Runs the acceptance battery and writes verify.csv (criterion, passed, detail, seconds).
    :param out_dir: where the table is written.
    :param quick: shrink every size so the battery runs in minutes.
    :return: the list of Verdicts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cap = 512 if quick else st.EXACT_W2_CAP
    pairs = []

    def stability() -> tuple:
        pairs.extend(_stability_runs(quick))
        return _check_stability(pairs, cap)

    checks = [("poisson_oracle", lambda: _check_poisson_oracle(quick)),
              ("neutral_equilibrium", lambda: _check_neutral_equilibrium(quick)),
              ("sign_and_mass", lambda: _check_certificates(quick)),
              ("variational_optimality", lambda: _check_variational(quick)),
              ("energy_conservation", lambda: _check_energy(quick)),
              ("moment_envelope", lambda: _check_moments(quick)),
              ("transport_solvers", lambda: _check_transport(quick)),
              ("stability_envelope", stability),
              ("field_stability", lambda: _check_field_stability(pairs, cap)),
              ("modulus_and_envelope", lambda: _check_modulus(quick))]
    verdicts = []
    for name, check in checks:
        start = time.perf_counter()
        try:
            passed, detail = check()
        except (VPMEError, ValueError, RuntimeError, MemoryError) as error:
            passed, detail = False, f"{type(error).__name__}: {error}"
        verdicts.append(Verdict(name, bool(passed), detail, time.perf_counter() - start))
        logger.info("%s: %s (%s)", name, "pass" if passed else "FAIL", detail)
    _write_csv(out / "verify.csv", ["criterion", "passed", "detail", "seconds"],
               [[v.name, v.passed, v.detail, f"{v.seconds:.2f}"] for v in verdicts])
    return verdicts
