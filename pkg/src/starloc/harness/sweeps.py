"""Monte-Carlo and bound sweeps over SNR, and the paired studies built on them."""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math

import numpy as np

from .. import channel as ch
from ..errors import StarLocError, UnidentifiableError
from ..estimator import AnmConfig, localizer_for
from ..fisher import position_crlb, principal_angle_objective
from ..signal import H4Perturbation, build_measurement_matrices, perturb_h4, sigma2_from_snr_db, synthesize_observation
from .config import config_hash

log = logging.getLogger(__name__)

CSV_HEADER = ("snr_db", "crlb_rmse_u1", "crlb_rmse_u2", "est_rmse_u1", "est_rmse_u2", "trials_ok", "config_hash")
IMPERFECT_H4_CASES = ((0.5, 0.2), (1.0, 0.4))


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    crlb_rmse_u1: float | None
    crlb_rmse_u2: float | None
    est_rmse_u1: float | None = None
    est_rmse_u2: float | None = None
    trials_ok: int | None = None
    config_hash: str = ""
    flagged: bool = False

    def __post_init__(self):
        for name in ("crlb_rmse_u1", "crlb_rmse_u2", "est_rmse_u1", "est_rmse_u2"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")

    def csv_fields(self):
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class SweepResult:
    """Rows of one sweep plus the per-trial data they were aggregated from.

    ``errors`` has shape (snr, trial, 2) with NaN where a trial failed,
    ``ok`` marks trials that entered the RMSE, ``mismatch`` holds the
    rank-one mismatch ratio of each channel (snr, trial, 3) and
    ``fallbacks`` counts trials that lost one outdoor branch.
    """

    label: str
    config: object
    rows: list
    errors: np.ndarray | None = None
    ok: np.ndarray | None = None
    mismatch: np.ndarray | None = None
    fallbacks: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def all_flagged(self):
        return all(r.flagged for r in self.rows)

    def mean_error(self):
        """Mean position error over usable trials, (snr, 2)."""
        return np.array([np.nanmean(np.where(ok[:, None], e, np.nan), axis=0) for e, ok in zip(self.errors, self.ok)])

    def median_error(self):
        return np.array([np.nanmedian(np.where(ok[:, None], e, np.nan), axis=0) for e, ok in zip(self.errors, self.ok)])


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_fields())


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _bounds(scenario, schedule, pc, snr_db):
    try:
        rep = position_crlb(scenario, schedule, pc, sigma2_from_snr_db(snr_db, pc.p))
    except UnidentifiableError as exc:
        log.warning("SNR %s dB: %s", snr_db, exc)
        return None, None
    return rep.rmse_u1, rep.rmse_u2


def run_crlb_sweep(cfg):
    """One row of CRLB position bounds per SNR point; singular points are flagged."""
    scenario, schedule, pc = cfg.scenario(), cfg.phase_schedule(), cfg.power()
    digest = config_hash(cfg)
    rows = []
    for snr in cfg.snr_db_list:
        b1, b2 = _bounds(scenario, schedule, pc, snr)
        rows.append(SweepRow(snr, b1, b2, config_hash=digest, flagged=b1 is None))
    return rows


@lru_cache(maxsize=8)
def _context(cfg):
    """Everything a trial needs that does not depend on the trial index."""
    scenario = cfg.scenario()
    schedule = cfg.phase_schedule()
    pc = cfg.power()
    h1, h2, h3, h4 = scenario.channels()
    if cfg.mpc_case != "none":
        comps = ch.mpc_case(cfg.mpc_case)
        l1, l2, l3, _ = scenario.links()
        lam, plm = scenario.wavelength, scenario.pathloss
        h1 = ch.add_mpc(h1, l1, comps, scenario.bs_array, plm, lam)
        h2 = ch.add_mpc(h2, l2, comps, scenario.ris_array, plm, lam)
        h3 = ch.add_mpc(h3, l3, comps, scenario.ris_array, plm, lam)
    mm = build_measurement_matrices(h4, schedule)
    anm = AnmConfig(mu_scale=cfg.mu_scale)
    perturbed = cfg.d_hat > 0 or cfg.phi_hat > 0
    loc = None if perturbed else localizer_for(scenario, schedule, pc, anm)
    return scenario, schedule, pc, (h1, h2, h3), mm, anm, loc


def trial_seeds(seed, trial):
    """Independent (noise, H4-perturbation) seed sequences for one trial."""
    return np.random.SeedSequence([seed, trial]).spawn(2)


def run_trial(cfg, trial):
    """Localize one noise realization at every SNR point.

    The same unit-variance noise draw is scaled to each SNR, so points of a
    sweep share their random numbers.
    """
    scenario, schedule, pc, (h1, h2, h3), mm, anm, loc = _context(cfg)
    noise_seq, h4_seq = trial_seeds(cfg.seed, trial)
    nsnr = len(cfg.snr_db_list)
    errors = np.full((nsnr, 2), np.nan)
    ok = np.zeros(nsnr, dtype=bool)
    mismatch = np.full((nsnr, 3), np.nan)
    fallback = np.zeros(nsnr, dtype=bool)
    if loc is None:
        link4_hat = perturb_h4(scenario.links()[3], H4Perturbation(cfg.d_hat, cfg.phi_hat), h4_seq)
        loc = localizer_for(scenario, schedule, pc, anm, h4_assumed=scenario.h4(link4_hat))
    for j, snr in enumerate(cfg.snr_db_list):
        sigma2 = sigma2_from_snr_db(snr, pc.p)
        obs = synthesize_observation(mm, h1, h2, h3, pc, sigma2, np.random.default_rng(noise_seq))
        try:
            res = loc.localize(obs.y, sigma2)
        except (StarLocError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("trial %d at %s dB failed: %s", trial, snr, exc)
            continue
        mismatch[j] = [d.mismatch_ratio for d in res.diagnostics]
        if res.p_u1 is None or res.p_u2 is None:
            continue
        errors[j] = np.linalg.norm(res.p_u1 - scenario.p_u1), np.linalg.norm(res.p_u2 - scenario.p_u2)
        ok[j] = res.converged
        fallback[j] = res.outdoor_branch != "weighted"
    return errors, ok, mismatch, fallback


def _run_trial_args(args):
    return run_trial(*args)


def _map_trials(cfg):
    tasks = [(cfg, t) for t in range(cfg.trials)]
    if cfg.workers == 1:
        return [run_trial(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_trial_args, tasks, chunksize=max(1, cfg.trials // (4 * cfg.workers))))


def _rmse(values):
    return float(math.sqrt(np.mean(values**2))) if values.size else None


def simulate(cfg, label=None):
    """Monte-Carlo sweep for ``cfg`` as a :class:`SweepResult`."""
    outs = _map_trials(cfg)
    errors = np.stack([o[0] for o in outs], axis=1)
    ok = np.stack([o[1] for o in outs], axis=1)
    mismatch = np.stack([o[2] for o in outs], axis=1)
    fallbacks = np.stack([o[3] for o in outs], axis=1).sum(axis=1)
    scenario, schedule, pc = cfg.scenario(), cfg.phase_schedule(), cfg.power()
    digest = config_hash(cfg)
    rows = []
    for j, snr in enumerate(cfg.snr_db_list):
        b1, b2 = _bounds(scenario, schedule, pc, snr)
        good = errors[j][ok[j]]
        n_ok = int(ok[j].sum())
        if n_ok < cfg.trials:
            log.info("SNR %s dB: %d of %d trials usable", snr, n_ok, cfg.trials)
        rows.append(
            SweepRow(
                snr,
                b1,
                b2,
                _rmse(good[:, 0]),
                _rmse(good[:, 1]),
                n_ok,
                digest,
                flagged=n_ok == 0,
            )
        )
    return SweepResult(label or cfg.study, cfg, rows, errors, ok, mismatch, fallbacks)


def run_monte_carlo(cfg):
    return simulate(cfg).rows


def run_design_study(cfg):
    """Paired DFT and random-schedule sweeps sharing every seed."""
    out = {}
    for kind in ("dft", "random"):
        sub = cfg.replace(schedule=kind, study="design")
        res = simulate(sub, kind)
        mm = build_measurement_matrices(sub.scenario().h4(), sub.phase_schedule())
        res.info["principal_angle_objective"] = principal_angle_objective(sub.scenario(), mm, sub.power())
        out[kind] = res
    return out


def _h4_label(d_hat, phi_hat):
    return f"d{d_hat:g}_phi{phi_hat:g}"


def run_imperfect_h4_study(cfg):
    """Perfect-H4 baseline plus the two uniform-error cases (and the configured one, if different)."""
    cases = [(0.0, 0.0), *IMPERFECT_H4_CASES]
    if (cfg.d_hat, cfg.phi_hat) not in cases:
        cases.append((cfg.d_hat, cfg.phi_hat))
    out = {}
    for d_hat, phi_hat in cases:
        sub = cfg.replace(d_hat=d_hat, phi_hat=phi_hat, study="imperfect-h4")
        label = "perfect" if d_hat == phi_hat == 0 else _h4_label(d_hat, phi_hat)
        out[label] = simulate(sub, label)
    return out


def run_mpc_study(cfg):
    """LoS-only, case i and case ii multipath sweeps."""
    out = {}
    for case in ("none", "i", "ii"):
        sub = cfg.replace(mpc_case=case, study="mpc")
        label = "los" if case == "none" else f"mpc_{case}"
        out[label] = simulate(sub, label)
    return out
