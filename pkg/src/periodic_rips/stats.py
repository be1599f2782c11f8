"""Matched-pair construction and statistical tests for predicted shifts.

Implements two-sided one-sample t-tests on matched-pair deltas, two-sample
Mann-Whitney U tests (exact enumeration when n1*n2 <= 400 and tie-free,
normal approximation with tie and continuity corrections otherwise),
step-down Holm adjustment, and 99% confidence intervals from the
t-distribution. The t CDF is evaluated through a continued-fraction
regularized incomplete beta, so no external statistics dependency is
needed; tests validate it against a quadrature oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .errors import ValidationError

FAMILIES = ("Ar-Et-A", "Ar-Et-MA", "Ar-Et-AM", "Ar-Et-MAM")

# base family -> modified family for each structural modification
MODIFICATIONS: dict[str, tuple[tuple[str, str], ...]] = {
    "ester_to_amide": (("Ar-Et-A", "Ar-Et-AM"), ("Ar-Et-MA", "Ar-Et-MAM")),
    "alpha_methylation": (("Ar-Et-A", "Ar-Et-MA"), ("Ar-Et-AM", "Ar-Et-MAM")),
}

EXACT_MW_LIMIT = 400

_POSITION_ORDER = {"ortho": 0, "meta": 1, "para": 2}
_POSITION_ALIASES = {"o": "ortho", "m": "meta", "p": "para"}


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for 0 <= x <= 1, a, b > 0."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(x, df / 2.0, 0.5)
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    if df <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)


def t_quantile(p: float, df: float) -> float:
    """Inverse t CDF by bisection (deterministic, ~1e-13 in t-space)."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"quantile probability must be in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > p:
        lo *= 2.0
        if lo < -1e12:
            break
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# records and matched pairs
# ---------------------------------------------------------------------------


def canonical_substitution_key(key: str) -> str:
    """Normalize a ring-substitution pattern: positions ordered
    ortho < meta < para, substituents in fixed symbol order per position."""
    key = key.strip()
    if not key or key.lower() in ("none", "-"):
        return "none"
    tokens = [tok for part in key.replace("|", ";").replace(",", ";").split(";") if (tok := part.strip())]
    parsed = []
    for tok in tokens:
        sep = "-" if "-" in tok else (":" if ":" in tok else None)
        if sep is None:
            raise ValidationError(f"substitution token {tok!r} must look like 'para-F'")
        pos, sub = tok.split(sep, 1)
        pos = pos.strip().lower()
        pos = _POSITION_ALIASES.get(pos, pos)
        if pos not in _POSITION_ORDER:
            raise ValidationError(f"unknown ring position {pos!r} in {key!r}")
        sub = sub.strip()
        if not sub:
            raise ValidationError(f"missing substituent in token {tok!r}")
        parsed.append((pos, sub))
    parsed.sort(key=lambda ps: (_POSITION_ORDER[ps[0]], ps[1]))
    return ";".join(f"{pos}-{sub}" for pos, sub in parsed)


@dataclass(frozen=True)
class PredictionRecord:
    polymer_id: str
    family: str
    substitution_key: str
    fold_values: tuple[float, ...]

    def __post_init__(self):
        if not self.fold_values:
            raise ValidationError(f"record {self.polymer_id}: per-fold list is empty")
        if self.family not in FAMILIES:
            raise ValidationError(f"record {self.polymer_id}: unknown family {self.family!r}")

    @property
    def predicted(self) -> float:
        return math.fsum(self.fold_values) / len(self.fold_values)


@dataclass(frozen=True)
class MatchedPair:
    record_a: PredictionRecord  # base
    record_b: PredictionRecord  # modified
    modification: str

    @property
    def delta(self) -> float:
        return self.record_b.predicted - self.record_a.predicted


@dataclass
class MatchResult:
    pairs: list[MatchedPair]
    unmatched: list[tuple[str, str]] = field(default_factory=list)  # (family, key)


def match_pairs(
    records: list[PredictionRecord],
    modification: str,
    families: tuple[str, str] | None = None,
) -> MatchResult:
    """Pair records across families differing by exactly one modification.

    Keys are canonicalized before matching; one pair is produced per key
    present in both families, keys present in only one family are reported
    as unmatched, and a duplicated key within a family is an error.
    """
    if modification not in MODIFICATIONS:
        raise ValidationError(f"unknown modification {modification!r}")
    family_pairs = (families,) if families is not None else MODIFICATIONS[modification]
    by_family: dict[str, dict[str, PredictionRecord]] = {}
    for rec in records:
        key = canonical_substitution_key(rec.substitution_key)
        bucket = by_family.setdefault(rec.family, {})
        if key in bucket:
            raise ValidationError(f"duplicate substitution key {key!r} within family {rec.family}")
        bucket[key] = rec

    pairs: list[MatchedPair] = []
    unmatched: list[tuple[str, str]] = []
    for base, modified in family_pairs:
        if (base, modified) not in MODIFICATIONS[modification]:
            raise ValidationError(f"families {base}->{modified} do not differ by {modification}")
        base_recs = by_family.get(base, {})
        mod_recs = by_family.get(modified, {})
        for key in sorted(set(base_recs) | set(mod_recs)):
            if key in base_recs and key in mod_recs:
                pairs.append(MatchedPair(base_recs[key], mod_recs[key], modification))
            elif key in base_recs:
                unmatched.append((base, key))
            else:
                unmatched.append((modified, key))
    return MatchResult(pairs=pairs, unmatched=unmatched)


# ---------------------------------------------------------------------------
# tests and summaries
# ---------------------------------------------------------------------------


@dataclass
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str
    adjusted_p: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None


def _mean_sd(values) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def one_sample_t_test(deltas, ci_level: float = 0.99) -> TestResult:
    """Two-sided test of mean(deltas) == 0."""
    deltas = [float(d) for d in deltas]
    n = len(deltas)
    if n < 2:
        raise ValidationError(f"t-test requires n >= 2, got {n}")
    mean, sd = _mean_sd(deltas)
    if sd == 0.0:
        raise ValidationError("t-test requires nonzero variance")
    t = mean / (sd / math.sqrt(n))
    low, high = t_confidence_interval(deltas, level=ci_level)
    return TestResult(
        statistic=t,
        p_value=t_two_sided_p(t, n - 1),
        n=n,
        method="t-two-sided",
        ci_low=low,
        ci_high=high,
    )


def t_confidence_interval(deltas, level: float = 0.99) -> tuple[float, float]:
    deltas = [float(d) for d in deltas]
    n = len(deltas)
    if n < 2:
        raise ValidationError(f"confidence interval requires n >= 2, got {n}")
    mean, sd = _mean_sd(deltas)
    if sd == 0.0:
        raise ValidationError("confidence interval requires nonzero variance")
    q = t_quantile(0.5 + level / 2.0, n - 1)
    half = q * sd / math.sqrt(n)
    return mean - half, mean + half


def _midranks(pooled: list[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _mw_count(m: int, n: int, u: int) -> int:
    """Arrangements of m-vs-n tie-free ranks with Mann-Whitney count u."""
    if u < 0:
        return 0
    if m == 0 or n == 0:
        return 1 if u == 0 else 0
    return _mw_count(m - 1, n, u - n) + _mw_count(m, n - 1, u)


def mann_whitney_u(sample_a, sample_b) -> TestResult:
    """Two-sided two-sample Mann-Whitney U test with midrank ties.

    Exact enumeration when n1*n2 <= 400 and there are no ties; otherwise a
    normal approximation with tie and continuity corrections. The reported
    statistic is U for sample_a; U_a + U_b = n1*n2 always.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    if not a or not b:
        raise ValidationError("Mann-Whitney requires two non-empty samples")
    n1, n2 = len(a), len(b)
    pooled = a + b
    ranks = _midranks(pooled)
    r1 = math.fsum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1

    has_ties = len(set(pooled)) != len(pooled)
    if not has_ties and n1 * n2 <= EXACT_MW_LIMIT:
        total = math.comb(n1 + n2, n1)
        u_lo = int(round(min(u1, u2)))
        p = 2.0 * sum(_mw_count(n1, n2, u) for u in range(0, u_lo + 1)) / total
        return TestResult(statistic=u1, p_value=min(1.0, p), n=n1 + n2, method="mw-exact")

    mu = n1 * n2 / 2.0
    n = n1 + n2
    tie_groups: dict[float, int] = {}
    for v in pooled:
        tie_groups[v] = tie_groups.get(v, 0) + 1
    tie_term = sum(t**3 - t for t in tie_groups.values())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return TestResult(statistic=u1, p_value=1.0, n=n, method="mw-asymptotic")
    diff = u1 - mu
    cc = 0.5 if diff != 0 else 0.0
    z = (diff - math.copysign(cc, diff)) / math.sqrt(var)
    p = 2.0 * (1.0 - normal_cdf(abs(z)))
    return TestResult(statistic=u1, p_value=min(1.0, max(0.0, p)), n=n, method="mw-asymptotic")


def holm_adjust(p_values) -> list[float]:
    """Step-down Holm adjustment, returned in input order."""
    ps = [float(p) for p in p_values]
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"p-value {p} outside [0, 1]")
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        candidate = min(1.0, (m - rank) * ps[idx])
        running = max(running, candidate)
        adjusted[idx] = running
    return adjusted


@dataclass(frozen=True)
class FamilySummary:
    family: str
    n: int
    mean: float
    sd: float | None  # sample sd (n-1); absent when n < 2


def summarize_families(records: list[PredictionRecord]) -> dict[str, FamilySummary]:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(rec.family, []).append(rec.predicted)
    out = {}
    for family in sorted(groups):
        values = groups[family]
        n = len(values)
        mean = math.fsum(values) / n
        sd = None
        if n >= 2:
            _, sd = _mean_sd(values)
        out[family] = FamilySummary(family=family, n=n, mean=mean, sd=sd)
    return out


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def read_predictions_csv(path: str | Path) -> list[PredictionRecord]:
    """Predictions CSV: id, family, substitution_key, fold_1..fold_K[, mean, sd]."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty predictions CSV")
        missing = {"id", "family", "substitution_key"} - set(reader.fieldnames)
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        fold_cols = sorted(
            (c for c in reader.fieldnames if c.startswith("fold_")),
            key=lambda c: int(c.split("_", 1)[1]),
        )
        if not fold_cols:
            raise ValidationError(f"{path}: no fold_* columns")
        for line, row in enumerate(reader, start=2):
            try:
                fold_values = tuple(float(row[c]) for c in fold_cols)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{line}: bad fold value ({exc})") from exc
            records.append(
                PredictionRecord(
                    polymer_id=row["id"],
                    family=row["family"],
                    substitution_key=row["substitution_key"],
                    fold_values=fold_values,
                )
            )
    return records


@dataclass
class ComparisonRow:
    comparison: str
    n: int
    mean_delta: float | None
    ci_low: float | None
    ci_high: float | None
    p_raw: float
    p_holm: float | None
    method: str
    deltas: list[float] = field(default_factory=list, repr=False)


def _pair_rows(records: list[PredictionRecord], modification: str) -> list[ComparisonRow]:
    """One row per family pair; comparisons that cannot support a t-test
    (fewer than two pairs, or all deltas equal) are omitted."""
    rows = []
    for base, modified in MODIFICATIONS[modification]:
        result = match_pairs(records, modification, families=(base, modified))
        deltas = [p.delta for p in result.pairs]
        if len(deltas) < 2 or len(set(deltas)) < 2:
            continue
        test = one_sample_t_test(deltas)
        rows.append(
            ComparisonRow(
                comparison=f"{modification}:{base}->{modified}",
                n=test.n,
                mean_delta=math.fsum(deltas) / len(deltas),
                ci_low=test.ci_low,
                ci_high=test.ci_high,
                p_raw=test.p_value,
                p_holm=None,
                method=test.method,
                deltas=deltas,
            )
        )
    return rows


def _family_rows(records: list[PredictionRecord]) -> list[ComparisonRow]:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(rec.family, []).append(rec.predicted)
    rows = []
    present = [f for f in FAMILIES if f in groups]
    for i, fa in enumerate(present):
        for fb in present[i + 1 :]:
            test = mann_whitney_u(groups[fa], groups[fb])
            mean_delta = math.fsum(groups[fb]) / len(groups[fb]) - math.fsum(groups[fa]) / len(groups[fa])
            rows.append(
                ComparisonRow(
                    comparison=f"families:{fa}-vs-{fb}",
                    n=test.n,
                    mean_delta=mean_delta,
                    ci_low=None,
                    ci_high=None,
                    p_raw=test.p_value,
                    p_holm=None,
                    method=test.method,
                )
            )
    return rows


COMPARISONS = ("ester-to-amide", "alpha-methylation", "pairs", "families", "all")


def analyze_trends(records: list[PredictionRecord], comparison: str) -> list[ComparisonRow]:
    """Comparison rows with Holm adjustment applied within each test family."""
    if comparison not in COMPARISONS:
        raise ValidationError(f"unknown comparison {comparison!r}; choose from {COMPARISONS}")
    pair_rows: list[ComparisonRow] = []
    family_rows: list[ComparisonRow] = []
    if comparison in ("ester-to-amide", "pairs", "all"):
        pair_rows += _pair_rows(records, "ester_to_amide")
    if comparison in ("alpha-methylation", "pairs", "all"):
        pair_rows += _pair_rows(records, "alpha_methylation")
    if comparison in ("families", "all"):
        family_rows = _family_rows(records)
    for rows in (pair_rows, family_rows):
        if rows:
            adjusted = holm_adjust([r.p_raw for r in rows])
            for row, adj in zip(rows, adjusted):
                row.p_holm = adj
    return pair_rows + family_rows


def write_analysis_csv(path: str | Path, rows: list[ComparisonRow]) -> None:
    def fmt(v) -> str:
        if v is None:
            return ""
        return repr(float(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comparison", "n", "mean_delta", "ci_low", "ci_high", "p_raw", "p_holm", "method"])
        for r in rows:
            writer.writerow(
                [r.comparison, r.n, fmt(r.mean_delta), fmt(r.ci_low), fmt(r.ci_high), fmt(r.p_raw), fmt(r.p_holm), r.method]
            )
