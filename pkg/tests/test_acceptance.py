"""Acceptance criteria 1-9.

Each criterion is a function returning ``(passed, detail)``; the tests assert
on it and the session summary prints one PASS/FAIL line per criterion.  Run
``python tests/test_acceptance.py`` to get the lines without pytest.
"""
import json
import random
import subprocess
import sys
import time
import warnings
from pathlib import Path

from masabs.abstraction import MAY, MUST, abstract_mas, abstract_mas_report, kept_variables
from masabs.cases import ASV_FORMULAS, VARIANTS, asv_formula, gen_asv, gen_postal, postal_abstraction, postal_formula
from masabs.checker import check, sat_set
from masabs.composition import combine
from masabs.domains import LOWER, UPPER, approx_local_domain, reachability_index, verify_lower
from masabs.formula import atoms
from masabs.randgen import random_abstraction, random_atoms, random_formula, random_mas, random_model
from masabs.simulation import check_simulation
from masabs.unwrapping import reachable_projections, unwrap

sys.path.insert(0, str(Path(__file__).resolve().parent))
from oracle import Budget, brute_sat  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
RESULTS = {}
SEED = 20240601


def _record(n, ok, detail, secs):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} ({secs:.1f} s)"
    RESULTS[n] = line
    print(line)
    return ok, line


def _cases(n, seed):
    """``n`` random (system, mapping, rng) triples; systems without local
    variables are skipped."""
    rng = random.Random(seed)
    out = 0
    while out < n:
        r = random.Random(rng.getrandbits(64))
        S = random_mas(r)
        m = random_abstraction(r, S)
        if m is None:
            continue
        out += 1
        yield S, m, r


def _ap(S, atoms_):
    return set(atoms_) | {(a.name, l) for a in S.agents for l in a.locations}


ASV_LOCS = [("idle", "idle"), ("voted", "idle"), ("obeyed", "halt"), ("disobeyed", "halt")]


def criterion_1():
    t = time.perf_counter()
    S = gen_asv(3)
    G = combine(S, reachable_only=True)
    r = reachability_index(G)
    d = approx_local_domain(G, ["Voter.x"], UPPER)
    got_r = tuple(r[l] for l in ASV_LOCS)
    got_d = tuple(sorted(v[0] for v in d[l]) for l in ASV_LOCS)
    secs = time.perf_counter() - t
    ok = got_r == (3, 2, 0, 0) and got_d == ([0], [1, 2, 3], [1, 2, 3], [1, 2, 3]) and secs < 1
    return _record(1, ok, f"r={got_r} d={got_d}", secs)


def criterion_2():
    t = time.perf_counter()
    S = gen_asv(3)
    want = {"obey_known": True, "refuse_known": True, "eventually_known": False}
    got = {}
    for name in ASV_FORMULAS:
        f = asv_formula(name, S)
        got[name] = check(unwrap(S, atoms(f)), f).holds
    secs = time.perf_counter() - t
    return _record(2, got == want and secs < 1, f"verdicts {got}", secs)


def criterion_3(n=500):
    t = time.perf_counter()
    fails = []
    for k, (S, m, r) in enumerate(_cases(n, SEED)):
        at = random_atoms(r, S, kept_variables(S, [m]), 3)
        A = abstract_mas(S, [m], MAY)
        if not check_simulation(unwrap(S, at), unwrap(A, at), _ap(S, at)).found:
            fails.append(k)
    secs = time.perf_counter() - t
    ok = not fails and secs < 600
    return _record(3, ok, f"may simulation found in {n - len(fails)}/{n} cases", secs)


def criterion_4(n=500):
    t = time.perf_counter()
    fails, unsupported, undiagnosed, empirical = [], 0, 0, 0
    for k, (S, m, r) in enumerate(_cases(n, SEED + 1)):
        at = random_atoms(r, S, kept_variables(S, [m]), 3)
        rep = abstract_mas_report(S, [m], MUST)
        found = check_simulation(unwrap(rep.system, at), unwrap(S, at), _ap(S, at)).found
        if rep.supported:
            if not found:
                fails.append(k)
        else:
            unsupported += 1
            undiagnosed += not rep.diagnostics
            empirical += found
    secs = time.perf_counter() - t
    ok = not fails and not undiagnosed
    detail = (f"{n - unsupported - len(fails)}/{n - unsupported} supported cases simulated; "
              f"{unsupported} unsupported excluded with diagnostics "
              f"({empirical} of them happen to simulate)")
    return _record(4, ok, detail, secs)


def criterion_5(n=500):
    t = time.perf_counter()
    bad = 0
    for k, (S, m, r) in enumerate(_cases(n, SEED + 2)):
        names = [v.name for v in S.all_vars()]
        V = r.sample(names, r.randint(1, len(names)))
        M = unwrap(S, state_budget=10**5)
        proj = reachable_projections(M, V)
        up = approx_local_domain(S, V, UPPER)
        lo = approx_local_domain(S, V, LOWER)
        if any(not vals <= up[loc] for loc, vals in proj.items()) or verify_lower(lo, proj):
            bad += 1
    secs = time.perf_counter() - t
    return _record(5, bad == 0, f"{n - bad}/{n} systems pass upper and lower checks", secs)


def criterion_6(n=300):
    t = time.perf_counter()
    viol, may_true, must_false, skipped = 0, 0, 0, 0
    for S, m, r in _cases(n, SEED + 3):
        at = random_atoms(r, S, kept_variables(S, [m]), 3)
        f = random_formula(r, at, 3)
        concrete = check(unwrap(S, at), f).holds
        if check(unwrap(abstract_mas(S, [m], MAY), at), f).holds:
            may_true += 1
            viol += not concrete
        rep = abstract_mas_report(S, [m], MUST)
        if not rep.supported:
            skipped += 1
        elif not check(unwrap(rep.system, at), f).holds:
            must_false += 1
            viol += concrete
    secs = time.perf_counter() - t
    detail = (f"{viol} violations over {n} triples ({may_true} may-true, {must_false} must-false "
              f"transfers; {skipped} unsupported must cases skipped)")
    return _record(6, viol == 0, detail, secs)


def criterion_7(n=1000):
    t = time.perf_counter()
    rng = random.Random(SEED + 4)
    agree = resampled = 0
    while agree < n:
        M = random_model(rng, rng.randint(1, 200))
        f = random_formula(rng, list(M.atoms), 3)
        try:
            want = brute_sat(M, f, budget=30_000)
        except Budget:
            resampled += 1
            continue
        if sat_set(M, f).tolist() != want:
            break
        agree += 1
    secs = time.perf_counter() - t
    detail = f"{agree}/{n} pairs agree ({resampled} resampled over the oracle's step budget)"
    return _record(7, agree == n, detail, secs)


REFERENCE_CONCRETE = {  # published concrete state counts
    (1, 1): 23, (1, 2): 27, (1, 3): 31, (2, 1): 241, (2, 2): 369, (2, 3): 529,
    (3, 1): 2987, (3, 2): 6075, (3, 3): 10900, (4, 1): 39800, (4, 2): 106000, (4, 3): 236000,
}


def postal_grid(nvs=range(1, 5), ncs=range(1, 4)):
    rows = []
    for nv in nvs:
        for nc in ncs:
            S = gen_postal(nv, nc)
            row = {"NV": nv, "NC": nc}
            for name, mode in (("bstuff", MAY), ("dispatch", MUST)):
                f = postal_formula(name, S)
                for v in VARIANTS:
                    maps = postal_abstraction(S, v)
                    rep = abstract_mas_report(S, maps, mode) if maps else None
                    A = rep.system if rep else S
                    M = unwrap(A, atoms(f))
                    row[(name, v)] = (check(M, f).holds, M.n_states,
                                      True if rep is None else rep.supported)
            rows.append(row)
    return rows


def criterion_8():
    t = time.perf_counter()
    rows = postal_grid()
    ok = True
    for row in rows:
        for v in VARIANTS:
            ok &= row[("bstuff", v)][0] is True
            ok &= row[("dispatch", v)][0] is False
            if v != "concrete" and row["NV"] >= 3:
                for name in ("bstuff", "dispatch"):
                    ok &= row[(name, v)][1] < row[(name, "concrete")][1]
    secs = time.perf_counter() - t
    ok &= secs < 300
    for row in rows:
        cells = " ".join(f"{v[-1] if v != 'concrete' else 'C'}:{row[('dispatch', v)][1]}"
                         for v in VARIANTS)
        print(f"  NV={row['NV']} NC={row['NC']} concrete={row[('bstuff', 'concrete')][1]} "
              f"(ref {REFERENCE_CONCRETE[(row['NV'], row['NC'])]}) must {cells}")
    unsup = sum(1 for row in rows for v in VARIANTS[1:] if not row[("dispatch", v)][2])
    detail = (f"bstuff true on all may variants, dispatch false on all must variants, abstract "
              f"counts below concrete for NV>=3 ({unsup} must cells outside the supported class)")
    return _record(8, ok, detail if ok else "see grid above", secs)


def criterion_9():
    t = time.perf_counter()
    proc = subprocess.run([sys.executable, str(ROOT / "scripts" / "unwrap_perf.py"),
                           "--nv", "5", "--nc", "2", "--json"],
                          capture_output=True, text=True, check=True)
    res = json.loads(proc.stdout)
    secs = time.perf_counter() - t
    ok = res["states"] >= 10**6 and res["seconds"] < 60 and res["peak_rss_mb"] < 4096
    return _record(9, ok, f"{res['states']} states in {res['seconds']} s, "
                          f"peak {res['peak_rss_mb']} MB", secs)


def test_criterion_1_asv_domains():
    assert criterion_1()[0]


def test_criterion_2_asv_verdicts():
    assert criterion_2()[0]


def test_criterion_3_may_soundness():
    assert criterion_3()[0]


def test_criterion_4_must_soundness():
    assert criterion_4()[0]


def test_criterion_5_domain_bounds():
    assert criterion_5()[0]


def test_criterion_6_actl_preservation():
    assert criterion_6()[0]


def test_criterion_7_checker_oracle():
    assert criterion_7()[0]


def test_criterion_8_postal_grid():
    assert criterion_8()[0]


def test_criterion_9_unwrap_scale():
    assert criterion_9()[0]


if __name__ == "__main__":
    warnings.filterwarnings("ignore", message="channel .* has senders but no receiver")
    results = [globals()[f"criterion_{k}"]()[0] for k in range(1, 10)]
    sys.exit(0 if all(results) else 1)
