"""Runtime verification suites: spectral identities and oracle cross-checks.

These are the machine-checkable facts the solver's correctness rests on.
Each check runs over freshly drawn random fields and reports the worst
observed defect together with its tolerance, so a report is self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinear import ORACLE_MAX_N, bilinear_B, bilinear_B_oracle
from .spectral import (
    SpectralField,
    TorusGrid,
    apply_A,
    apply_A_power,
    divergence_defect,
    from_physical,
    galerkin_complement,
    galerkin_project,
    hermitian_defect,
    hermitian_symmetrize,
    leray_project,
    norms,
    pairing,
    random_field,
    to_physical,
)

__all__ = ["CheckResult", "spectral_checks", "oracle_check", "cancellation_check"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float

    def to_json_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "worst": self.worst, "tol": self.tol}


def _rel(a: float, b: float, scale: float) -> float:
    return abs(a - b) / max(scale, 1e-300)


def spectral_checks(grid: TorusGrid, samples: int = 100, seed: int = 0) -> list[CheckResult]:
    """Exact spectral identities over random fields at 1e-12 relative (1e-14 for
    projection idempotence): divergence-free output, Leray idempotence and
    orthogonality, Parseval, the half-power/gradient-norm identity, the
    projection eigenvalue inequalities, transform round trips, and conjugate
    symmetry preservation."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, grid.d, grid.N)))
    worst: dict[str, float] = {
        "leray-idempotent": 0.0,
        "leray-orthogonal": 0.0,
        "divergence-free": 0.0,
        "parseval": 0.0,
        "half-power-gradient-norm": 0.0,
        "projection-inequalities": 0.0,
        "transform-round-trip": 0.0,
        "conjugate-symmetry": 0.0,
        "sobolev-order-zero": 0.0,
    }
    alpha_pairs = ((0.25, 0.5), (0.5, 1.0), (0.3, 1.7))
    for _ in range(samples):
        decay = float(rng.choice((1.0, 1.5, 2.0)))
        raw = SpectralField(
            grid,
            rng.standard_normal(grid.field_shape) + 1j * rng.standard_normal(grid.field_shape),
        )
        raw = hermitian_symmetrize(raw)
        raw.coeffs *= grid.nyquist_free_mask  # keep the field real-representable
        raw.coeffs[(slice(None),) + (0,) * grid.d] = 0.0
        u = random_field(grid, rng, decay=decay)

        p1 = leray_project(raw)
        p2 = leray_project(p1)
        scale = float(np.max(np.abs(p1.coeffs))) or 1.0
        worst["leray-idempotent"] = max(
            worst["leray-idempotent"], float(np.max(np.abs(p2.coeffs - p1.coeffs))) / scale
        )
        resid = SpectralField(grid, raw.coeffs - p1.coeffs)
        h2 = pairing("H", raw, raw)
        worst["leray-orthogonal"] = max(
            worst["leray-orthogonal"], abs(pairing("H", p1, resid)) / max(h2, 1e-300)
        )
        worst["divergence-free"] = max(worst["divergence-free"], divergence_defect(p1))

        phys = to_physical(u)
        spec_e = pairing("H", u, u)
        phys_e = float(np.sum(phys**2) / grid.N**grid.d)  # grid-averaged physical energy
        worst["parseval"] = max(worst["parseval"], _rel(spec_e, phys_e, spec_e))

        rt = from_physical(grid, phys)
        scale = float(np.max(np.abs(u.coeffs))) or 1.0
        worst["transform-round-trip"] = max(
            worst["transform-round-trip"], float(np.max(np.abs(rt.coeffs - u.coeffs))) / scale
        )

        nrm = norms(u, m=0)
        half = apply_A_power(u, 0.5, nu=1.0)
        worst["half-power-gradient-norm"] = max(
            worst["half-power-gradient-norm"],
            _rel(float(np.sqrt(pairing("H", half, half))), nrm.v, max(nrm.v, 1e-300)),
        )
        worst["sobolev-order-zero"] = max(
            worst["sobolev-order-zero"], _rel(nrm.hm, nrm.h, max(nrm.h, 1e-300))
        )

        n = int(rng.integers(1, grid.mode_count + 1))
        lam_n = grid.level_eigenvalue(n)
        pu = galerkin_project(u, n)
        qu = galerkin_complement(u, n)
        for a1, a2 in alpha_pairs:
            gap = lam_n ** (a2 - a1)
            pn2 = np.sqrt(pairing("H", apply_A_power(pu, a2), apply_A_power(pu, a2)))
            pn1 = np.sqrt(pairing("H", apply_A_power(pu, a1), apply_A_power(pu, a1)))
            if pn1 > 0:
                worst["projection-inequalities"] = max(
                    worst["projection-inequalities"], pn2 / (gap * pn1) - 1.0
                )
            qn2 = np.sqrt(pairing("H", apply_A_power(qu, a2), apply_A_power(qu, a2)))
            qn1 = np.sqrt(pairing("H", apply_A_power(qu, a1), apply_A_power(qu, a1)))
            if qn2 > 0:
                worst["projection-inequalities"] = max(
                    worst["projection-inequalities"], qn1 * gap / qn2 - 1.0
                )

        for op_out in (p1, apply_A(u, 0.7), apply_A_power(u, -1.0), bilinear_B(u, u)):
            worst["conjugate-symmetry"] = max(worst["conjugate-symmetry"], hermitian_defect(op_out))

    tols = {
        "leray-idempotent": 1e-14,
        "leray-orthogonal": 1e-12,
        "divergence-free": 1e-12,
        "parseval": 1e-12,
        "half-power-gradient-norm": 1e-12,
        "projection-inequalities": 1e-12,
        "transform-round-trip": 1e-12,
        "conjugate-symmetry": 1e-12,
        "sobolev-order-zero": 1e-12,
    }
    return [CheckResult(k, worst[k] <= tols[k], worst[k], tols[k]) for k in worst]


def oracle_check(grid: TorusGrid, pairs: int = 20, seed: int = 0) -> CheckResult:
    """Fast advection evaluator against the direct-summation reference."""
    if grid.N > ORACLE_MAX_N:
        raise ValueError(f"oracle cross-check needs N <= {ORACLE_MAX_N}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB0)))
    worst = 0.0
    for _ in range(pairs):
        decay = float(rng.choice((1.0, 1.5, 2.0)))
        u = random_field(grid, rng, decay=decay)
        v = random_field(grid, rng, decay=decay)
        fast = bilinear_B(u, v)
        ref = bilinear_B_oracle(u, v)
        scale = float(np.max(np.abs(ref.coeffs)))
        if scale == 0:
            continue
        worst = max(worst, float(np.max(np.abs(fast.coeffs - ref.coeffs))) / scale)
    return CheckResult(f"oracle-agreement-d{grid.d}-N{grid.N}", worst <= 1e-10, worst, 1e-10)


def cancellation_check(grid: TorusGrid, pairs: int = 100, seed: int = 0) -> CheckResult:
    """|<B(u, v), v>| <= tol * ||u|| ||v||^2 over random dealiased pairs."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xCA)))
    worst = 0.0
    for _ in range(pairs):
        decay = float(rng.choice((1.0, 1.5, 2.0)))
        u = random_field(grid, rng, decay=decay)
        v = random_field(grid, rng, decay=decay)
        scale = norms(u, m=0).v * norms(v, m=0).v ** 2
        if scale == 0:
            continue
        worst = max(worst, abs(pairing("H", bilinear_B(u, v), v)) / scale)
    return CheckResult(f"advection-cancellation-d{grid.d}-N{grid.N}", worst <= 1e-10, worst, 1e-10)
