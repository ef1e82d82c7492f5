"""Experiment drivers: scans, identity suites, density, moments, tails, census.

Every driver returns an ExperimentReport whose JSON form depends only on the
family, the parameters and the seed. Class number scans are persisted to a
JSON-lines cache keyed by (family id, n) with a checksum per row.
"""
from __future__ import annotations

import csv
import fcntl
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import cfquad, classno, family, randmodel
from .config import DEFAULT
from .family import FamilyPoly
from .intmath import QuadPoly, jacobsthal_prime, jacobsthal_sum, kronecker, primes_upto, roots_mod

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCAN_COLUMNS = ("n", "d", "s", "eps_x", "eps_y", "regulator", "L1", "h")
RECORD_FIELDS = tuple(classno.DiscRecord.__dataclass_fields__)


class SchemaError(ValueError):
    pass


class CacheCorruption(ValueError):
    pass


# -- reports --------------------------------------------------------------------


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


@dataclass
class ExperimentReport:
    experiment: str
    family_id: str
    params: dict
    observed: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_json(self, timing: bool = False) -> dict:
        out = _plain(asdict(self))
        out["schema"] = SCHEMA_VERSION
        if not timing:
            out.pop("wall_time")
        return out

    def dumps(self, timing: bool = False) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True)


class _Timer:
    def __init__(self, report: ExperimentReport):
        self.report = report

    def __enter__(self):
        self.t = time.perf_counter()
        return self.report

    def __exit__(self, *exc):
        self.report.wall_time = time.perf_counter() - self.t
        return False


# -- record cache ---------------------------------------------------------------


def _row_checksum(fid: str, rec: dict) -> str:
    blob = json.dumps({"fid": fid, "record": rec}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class RecordCache:
    """Append-only JSON-lines store of DiscRecords, one writer at a time."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load(self, fid: str) -> dict[int, classno.DiscRecord]:
        out: dict[int, classno.DiscRecord] = {}
        if not self.path.exists():
            return out
        with self.path.open() as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                row = json.loads(line)
                if row.get("schema") != SCHEMA_VERSION:
                    raise SchemaError(f"{self.path}:{lineno}: schema {row.get('schema')} != {SCHEMA_VERSION}")
                rec = row["record"]
                if tuple(sorted(rec)) != tuple(sorted(RECORD_FIELDS)):
                    raise SchemaError(f"{self.path}:{lineno}: record fields do not match the schema")
                if row["sha"] != _row_checksum(row["fid"], rec):
                    raise CacheCorruption(f"{self.path}:{lineno}: checksum mismatch")
                if row["fid"] == fid:
                    out[rec["n"]] = classno.DiscRecord(**rec)
        return out

    def append(self, fid: str, records) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                for r in records:
                    rec = r.to_row()
                    row = {"schema": SCHEMA_VERSION, "fid": fid, "record": rec, "sha": _row_checksum(fid, rec)}
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


# -- scans ----------------------------------------------------------------------


def _record(args) -> classno.DiscRecord:
    n, d = args
    return classno.class_number(d, n=n)


def scan(fam: FamilyPoly, x: int, cache: str | Path | None = None, workers: int = 1) -> list[classno.DiscRecord]:
    """DiscRecords of every d in the family up to x, ordered by n."""
    ns, ds = family.member_arrays(fam, x)
    fid = fam.fid()
    store = RecordCache(cache) if cache else None
    have = store.load(fid) if store else {}
    todo = [(n, d) for n, d in zip(ns.tolist(), ds.tolist()) if n not in have]
    if workers > 1 and len(todo) > 64:
        with ProcessPoolExecutor(workers) as pool:
            fresh = list(pool.map(_record, todo, chunksize=32))
    else:
        fresh = [_record(t) for t in todo]
    if store and fresh:
        store.append(fid, fresh)
    merged = {**have, **{r.n: r for r in fresh}}
    wanted = set(ns.tolist())
    return [merged[n] for n in sorted(wanted)]


def scan_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for r in records:
        w.writerow([repr(getattr(r, c)) if isinstance(getattr(r, c), float) else getattr(r, c) for c in SCAN_COLUMNS])
    return buf.getvalue()


def precision_audit(records, every: int = 100, cap: int = 10**6) -> dict:
    """Re-evaluate L(1, chi) on a sample of records with the extended-precision finite sum."""
    worst, checked = 0.0, 0
    for r in records[::every]:
        if r.delta > cap:
            continue
        exact = classno.L1_exact(r.d, dtype=np.longdouble)
        worst = max(worst, abs(exact - r.L1) / exact)
        checked += 1
    return {"checked": checked, "max_rel_diff": worst}


def cmd_scan(fam: FamilyPoly, x: int, cache=None, workers: int = 1) -> tuple[str, ExperimentReport]:
    rep = ExperimentReport("scan", fam.fid(), {"x": x})
    with _Timer(rep):
        records = scan(fam, x, cache, workers)
        text = scan_csv(records)
        audit = precision_audit(records)
        resid = max((r.residual for r in records), default=0.0)
        rep.observed = {"rows": len(records), "max_residual": resid, "audit": audit}
        rep.tolerances = {"rounding_headroom": DEFAULT.rounding_headroom, "audit_rel": 1e-9}
        rep.passed = {"residual": resid < DEFAULT.rounding_headroom, "audit": audit["max_rel_diff"] < 1e-9}
    return text, rep


# -- synthesis ------------------------------------------------------------------


def cmd_synth(word_spec) -> dict:
    """Admissibility diagnostics and the (normalized) polynomial for a word."""
    if isinstance(word_spec, (str, Path)) and Path(word_spec).exists():
        word_spec = json.loads(Path(word_spec).read_text())
    elif isinstance(word_spec, str):
        word_spec = json.loads(word_spec)
    word = family.CFWord(word_spec["case"], tuple(word_spec.get("word", ())))
    report = family.admissibility_report(word)
    if not report["admissible"]:
        raise family.InadmissibleWord(report["reason"])
    raw = family.synthesize(word, name=word_spec.get("name", ""))
    fam = family.normalize(raw)
    out = fam.to_json()
    out["shift"] = list(fam.shift)
    out["synthesized"] = raw.to_json()["poly"]
    out["disc"] = fam.disc
    out["q"] = report["q"]
    out["admissibility"] = report["reason"]
    out["invariants"] = family.prop_invariants(fam)
    return out


# -- identity suites ------------------------------------------------------------


def _c_prime_table(D: QuadPoly, p: int) -> int:
    a, b, c = D.a % p, D.b % p, D.c % p
    if a:
        return 1 + kronecker(D.disc, p)
    if b:
        return 1
    return 0 if c else p


def suite_jacobsthal_base(pmax: int = 200) -> tuple[int, int]:
    """sum_n ((n^2 + b)/p) = -1 or p - 1, for odd p <= pmax and all b mod p."""
    checks = fails = 0
    for p in primes_upto(pmax)[1:].tolist():
        n = np.arange(p)
        for b in range(p):
            vals = (n * n + b) % p
            s = sum(kronecker(int(v), p) for v in vals)
            want = p - 1 if b == 0 else -1
            checks += 1
            fails += s != want
    return checks, fails


def cmd_verify(fam: FamilyPoly, pmax: int = 500, mmax: int = 500, hooks: dict | None = None) -> ExperimentReport:
    """Brute-force identity suites for one family.

    hooks may replace "c_prime" (the closed-form c(p)) to check that a
    corrupted table is caught.
    """
    hooks = hooks or {}
    c_prime = hooks.get("c_prime", _c_prime_table)
    rep = ExperimentReport("verify", fam.fid(), {"pmax": pmax, "mmax": mmax})
    D = fam.quad
    counts: dict[str, list[int]] = {}

    def tally(name, ok):
        c = counts.setdefault(name, [0, 0])
        c[0] += 1
        c[1] += not ok

    with _Timer(rep):
        checks, fails = suite_jacobsthal_base(min(pmax, 200))
        counts["jacobsthal base identity"] = [checks, fails]
        for p in primes_upto(pmax)[1:].tolist():
            brute_c = int(roots_mod(D, p).size)
            tally("c(p) table", c_prime(D, p) == brute_c)
            tally("c(p^2) = c(p)", int(roots_mod(D, p * p).size) == brute_c or math.gcd(math.gcd(D.a, D.b), D.c) % p == 0)
            tally("J(p) table", jacobsthal_prime(D, p) == jacobsthal_sum(D, p))
            law = randmodel.local_law(fam, p)
            tally("local law sums to 1", law.alpha + law.beta + law.gamma == 1)
        for m in range(1, mmax + 1):
            tally("E X(m) closed form = atoms", randmodel.expect_X(fam, m) == randmodel.expect_X_atoms(fam, m))
            tally("complete character sum product", randmodel.charsum_average(fam, m) == randmodel.charsum_product(fam, m))
        for n, d in family.enumerate_family(fam, min(fam.D(60), 10**9)):
            k, period = fam.expected_expansion(n)
            exp = cfquad.expand(d, fam.cfword.mode)
            tally("continued fraction round trip", family.expansion_matches(exp, k, period))
            tally("unit bounds", cfquad.unit_bounds_check(exp))
            tally("palindromic period", exp.period[:-1] == exp.period[:-1][::-1])
        rep.observed = {name: {"checks": c, "failures": f} for name, (c, f) in counts.items()}
        rep.passed = {name: f == 0 for name, (c, f) in counts.items()}
    return rep


# -- density and character averages --------------------------------------------


def character_averages(ds: np.ndarray, mmax: int = 50) -> dict[int, float]:
    """(1/|S|) sum_{d in S} chi_d(m), chi_d the character of the fundamental discriminant."""
    deltas = [d if d % 4 == 1 else 4 * d for d in ds.tolist()]
    out = {}
    for m in range(1, mmax + 1):
        out[m] = sum(kronecker(delta, m) for delta in deltas) / max(len(deltas), 1)
    return out


def cmd_density(fam: FamilyPoly, xs=DEFAULT.density_x, mmax: int = 50, P: int = DEFAULT.prime_bound) -> ExperimentReport:
    rep = ExperimentReport("density", fam.fid(), {"x": list(xs), "mmax": mmax, "P": P})
    with _Timer(rep):
        c1, tail = family.density_constant(fam, P)
        expect = {m: float(randmodel.expect_X(fam, m)) for m in range(1, mmax + 1)}
        rows = {}
        for x in xs:
            _, ds = family.member_arrays(fam, x)
            pred = family.y_of_x(fam, x) * c1
            avg = character_averages(ds, mmax)
            dev = {m: avg[m] - expect[m] for m in avg}
            worst = max(dev, key=lambda m: abs(dev[m]))
            rows[x] = {
                "count": int(ds.size),
                "predicted": pred,
                "rel_error": abs(ds.size - pred) / max(ds.size, 1),
                "max_char_dev": abs(dev[worst]),
                "argmax_m": worst,
                "char_avg_m1": avg[1],
            }
        xmax = max(xs)
        rep.observed = {"by_x": rows}
        rep.predicted = {"C1": c1, "C1_log_tail_bound": tail, "E_X": expect}
        rep.tolerances = {"density_rel": DEFAULT.density_rel_tol, "char_avg": DEFAULT.char_avg_tol}
        rep.passed = {
            "count": rows[xmax]["rel_error"] < DEFAULT.density_rel_tol,
            "character_averages": rows[xmax]["max_char_dev"] < DEFAULT.char_avg_tol,
        }
        devs = [rows[x]["max_char_dev"] for x in sorted(xs)]
        rep.observed["char_dev_decreasing"] = all(b <= a for a, b in zip(devs, devs[1:]))
    return rep


# -- moments --------------------------------------------------------------------


def cmd_moments(fam: FamilyPoly, x: int = DEFAULT.moment_x, zs=DEFAULT.moment_z, cache=None, P: int = DEFAULT.prime_bound) -> ExperimentReport:
    rep = ExperimentReport("moments", fam.fid(), {"x": x, "z": list(zs), "P": P})
    with _Timer(rep):
        L = np.array([r.L1 for r in scan(fam, x, cache)])
        obs, pred, dev, ok = {}, {}, {}, {}
        for z in zs:
            emp = float(np.mean(L**z)) if L.size else float("nan")
            model = math.exp(randmodel.log_moment(fam, z, P))
            obs[z], pred[z] = emp, model
            dev[z] = abs(emp / model - 1)
            tol = DEFAULT.moment_tol_1 if abs(z) <= 1 else DEFAULT.moment_tol_2
            ok[f"z={z:g}"] = dev[z] < tol
        rep.observed = {"moments": obs, "rel_dev": dev, "count": int(L.size)}
        rep.predicted = {"moments": pred}
        rep.tolerances = {"|z|<=1": DEFAULT.moment_tol_1, "|z|=2": DEFAULT.moment_tol_2}
        rep.passed = ok
        rep.notes.append("moments taken over every d in the family up to x; no exceptional set removed")
    return rep


# -- distribution ---------------------------------------------------------------

_MC_MEMO: dict = {}


def model_samples(fam: FamilyPoly, n: int, seed: int, P: int = DEFAULT.prime_bound) -> np.ndarray:
    key = (fam.fid(), n, seed, P)
    if key not in _MC_MEMO:
        _MC_MEMO.clear()  # keep at most one large sample in memory
        _MC_MEMO[key] = randmodel.sample_L_many(fam, n, seed=seed, P=P)
    return _MC_MEMO[key]


def _saddle(fn, fam, tau, P):
    """Saddle-point value, or None when kappa lies outside the configured bracket."""
    try:
        return fn(fam, tau, P)
    except ValueError:
        return None


def cmd_dist(
    fam: FamilyPoly,
    x: int = DEFAULT.moment_x,
    taus=DEFAULT.tau_grid,
    mc_samples: int = DEFAULT.mc_samples,
    seed: int = DEFAULT.seed,
    cache=None,
    P: int = DEFAULT.prime_bound,
) -> ExperimentReport:
    rep = ExperimentReport("dist", fam.fid(), {"x": x, "tau": list(taus), "mc_samples": mc_samples, "seed": seed, "P": P})
    with _Timer(rep):
        records = scan(fam, x, cache)
        L = np.array([r.L1 for r in records])
        mc = model_samples(fam, mc_samples, seed, P)
        eg = math.exp(randmodel.EULER_GAMMA)
        ks = float(stats.ks_2samp(L, mc).statistic) if L.size else float("nan")
        rows = {}
        for tau in taus:
            hi, lo = eg * tau, randmodel.ZETA2 / (eg * tau)
            emp_hi = float(np.mean(L > hi)) if L.size else 0.0
            emp_lo = float(np.mean(L < lo)) if L.size else 0.0
            h_thr = sum(r.h > 2 * eg * math.sqrt(r.d) * tau / math.log(r.d) for r in records) / max(len(records), 1)
            mc_hi, mc_hi_se = randmodel.mc_tail(mc, tau)
            mc_lo = float(np.mean(mc < lo))
            row = {
                "empirical_upper": emp_hi,
                "empirical_lower": emp_lo,
                "empirical_h_threshold": h_thr,
                "mc_phi": mc_hi,
                "mc_phi_se": mc_hi_se,
                "mc_psi": mc_lo,
                "phi_saddle": _saddle(randmodel.phi_saddle, fam, tau, P),
                "phi_lugannani_rice": _saddle(randmodel.phi_lugannani_rice, fam, tau, P),
                "psi_saddle": _saddle(randmodel.psi_saddle, fam, tau, P),
                "log_phi_asymptotic": randmodel.log_phi_asymptotic(tau),
            }
            if emp_hi == 0:
                row["flag"] = "below resolution"
            if None in (row["phi_saddle"], row["psi_saddle"]):
                rep.notes.append(f"tau={tau:g}: saddle point beyond z_cap={DEFAULT.z_cap:g}, value omitted")
            rows[tau] = row
        rep.observed = {"ks": ks, "count": int(L.size), "by_tau": rows}
        rep.tolerances = {"ks": DEFAULT.ks_tol}
        rep.passed = {"ks": ks <= DEFAULT.ks_tol}
        rep.notes.append("asymptotic tails are x -> infinity statements; compared with the random model only")
    return rep


# -- census ---------------------------------------------------------------------


def census_X(H: int, x_cap: int = DEFAULT.census_x_cap) -> int:
    return int(min(x_cap, H * H * math.log(H) ** 8))


def largest_census_H(x_cap: int = DEFAULT.census_x_cap) -> int:
    H = 2
    while (H + 1) ** 2 * math.log(H + 1) ** 8 <= x_cap:
        H += 1
    return H


def refined_census_count(fam: FamilyPoly, records, H: int, X: int, L_samples: np.ndarray, c1: float) -> float:
    """Expected number of d <= X with h(d) <= H under the model, without asymptotics.

    Uses h = L sqrt(Delta) / (2 log eps) with log eps = log sqrt(d) + k, k the
    family's mean offset measured on the records, and sqrt(Delta) = r sqrt(d)
    with r = 1 for d = 1 mod 4 and r = 2 otherwise.
    """
    if not records:
        return 0.0
    k = float(np.mean([r.regulator - 0.5 * math.log(r.d) for r in records]))
    ratio = 1.0 if records[0].d % 4 == 1 else 2.0
    t = np.full(L_samples.size, 10.0)
    for _ in range(100):
        t = np.maximum(2 * H * (np.log(t) + k) / (ratio * L_samples), 2.0)
    t = np.minimum(t, math.sqrt(X))
    y = np.sqrt(np.maximum(t * t + fam.disc / (4 * fam.a), 0)) / math.sqrt(fam.a) - fam.b / (2 * fam.a)
    return float(c1 * np.mean(np.maximum(y, 0)))


def cmd_census(fam: FamilyPoly, H: int, x_cap: int = DEFAULT.census_x_cap, cache=None, P: int = DEFAULT.c2_prime_bound) -> ExperimentReport:
    """sum_{h <= H} F(h) against C2 H log H, at H and three successive halvings."""
    rep = ExperimentReport("census", fam.fid(), {"H": H, "x_cap": x_cap, "P": P})
    with _Timer(rep):
        c2 = randmodel.c2_constant(fam, P)
        Hs = sorted({max(H >> k, 2) for k in range(4)})
        records = scan(fam, census_X(max(Hs), x_cap), cache)
        c1, _ = family.density_constant(fam, P)
        L_model = randmodel.sample_L_many(fam, 10**5, seed=DEFAULT.seed, P=P)
        rows = {}
        for h_bound in Hs:
            X = census_X(h_bound, x_cap)
            count = sum(1 for r in records if r.d <= X and r.h <= h_bound)
            pred = c2 * h_bound * math.log(h_bound)
            refined = refined_census_count(fam, [r for r in records if r.d <= X], h_bound, X, L_model, c1)
            rows[h_bound] = {
                "X": X,
                "count": count,
                "predicted": pred,
                "ratio": count / pred,
                "ratio_if_doubled_C2": count / (2 * pred),
                "refined_model_count": refined,
                "ratio_to_refined": count / refined if refined else float("nan"),
            }
        dists = [abs(rows[h]["ratio"] - 1) for h in Hs]
        lo, hi = DEFAULT.census_band
        top = rows[max(Hs)]["ratio"]
        rep.observed = {"by_H": rows}
        rep.predicted = {"C2": c2}
        rep.tolerances = {"band": [lo, hi]}
        rep.passed = {
            "ratio_in_band": lo <= top <= hi,
            "trend_toward_1": all(b <= a for a, b in zip(dists, dists[1:])),
        }
        if fam.case == "B":
            rep.notes.append("d = 1 mod 4 throughout; h = L sqrt(d)/(2 log eps), see ratio_if_doubled_C2")
    return rep


def reference_family(name: str) -> FamilyPoly:
    return family.REFERENCE_FAMILIES[name]
