"""Uniform generalization bound for subjective multi-model learning.

The bound adds three non-negative terms to the empirical global error: a
domain-level term driven by the number of episodes ``m``, an instance-level
term driven by the per-domain sample counts ``m_k * n`` and a selection term
driven only by the episode size ``n``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence


class BoundDomainError(ValueError):
    """Inputs fall outside the regime where the bound's square roots are real."""


@dataclass(frozen=True)
class BoundInputs:
    vc_s: float
    vc_sbar: float
    m: int
    n: int
    N: int
    m_counts: tuple[int, ...]
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "m_counts", tuple(int(c) for c in self.m_counts))
        if self.vc_s <= 0 or self.vc_sbar <= 0:
            raise ValueError("VC terms must be positive")
        if self.m < 1 or self.n < 1 or self.N < 1:
            raise ValueError("m, n and N must be positive integers")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if len(self.m_counts) != self.N:
            raise ValueError(f"expected {self.N} domain counts, got {len(self.m_counts)}")
        if any(c < 0 for c in self.m_counts) or sum(self.m_counts) != self.m:
            raise ValueError("domain counts must be non-negative and sum to m")

    @classmethod
    def balanced(cls, vc_s: float, vc_sbar: float, m: int, n: int, N: int, delta: float) -> BoundInputs:
        base, extra = divmod(m, N)
        counts = [base + (1 if k < extra else 0) for k in range(N)]
        return cls(vc_s, vc_sbar, m, n, N, tuple(counts), delta)

    @classmethod
    def from_dict(cls, d: Mapping) -> BoundInputs:
        d = dict(d)
        if "m_counts" not in d:
            return cls.balanced(d["vc_s"], d["vc_sbar"], d["m"], d["n"], d["N"], d["delta"])
        return cls(d["vc_s"], d["vc_sbar"], d["m"], d["n"], d["N"], tuple(d["m_counts"]), d["delta"])


@dataclass(frozen=True)
class BoundBreakdown:
    empirical_error: float
    domain_term: float
    instance_term: float
    subjective_term: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def _vc_root(vc: float, count: float, log_conf: float) -> float:
    """``sqrt((vc*(ln(2*count/vc) + 1) - log_conf) / count)``."""
    radicand = (vc * (math.log(2.0 * count / vc) + 1.0) - log_conf) / count
    if radicand < 0:
        raise BoundDomainError(f"negative radicand {radicand:.6g} (vc={vc}, count={count})")
    return math.sqrt(radicand)


def domain_term(b: BoundInputs) -> float:
    return _vc_root(b.vc_sbar, b.m, math.log(b.delta / 12.0)) + 1.0 / b.m


def instance_term(b: BoundInputs) -> float:
    # unsampled domains (m_k = 0) have no defined summand and are skipped
    log_conf = math.log(b.delta / (12.0 * b.N))
    total = 0.0
    for mk in b.m_counts:
        if mk == 0:
            continue
        total += (mk / b.m) * _vc_root(b.vc_s, mk * b.n, log_conf) + 1.0 / (b.m * b.n)
    return total


def subjective_term(b: BoundInputs) -> float:
    return 2.0 * _vc_root(b.vc_s, b.n, math.log(b.delta / (24.0 * b.m))) + 2.0 / b.n


def total_bound(empirical_error: float, b: BoundInputs) -> BoundBreakdown:
    if empirical_error < 0:
        raise ValueError("empirical error must be non-negative")
    t1, t2, t3 = domain_term(b), instance_term(b), subjective_term(b)
    return BoundBreakdown(empirical_error, t1, t2, t3, empirical_error + t1 + t2 + t3)


def sweep(base: BoundInputs, field_name: str, values: Sequence, empirical_error: float = 0.0) -> list[dict]:
    """Evaluate the bound while varying one scalar input (``m``, ``n`` or ``delta``).

    Varying ``m`` rebalances ``m_counts`` across the ``N`` domains.
    """
    rows = []
    for v in values:
        params = asdict(base)
        params[field_name] = v
        if field_name == "m":
            b = BoundInputs.balanced(base.vc_s, base.vc_sbar, int(v), base.n, base.N, base.delta)
        else:
            b = BoundInputs(**params)
        rows.append({field_name: v, **total_bound(empirical_error, b).to_dict()})
    return rows
