"""Residual evaluators and verdicts for the conformal-surface criteria.

Every residual is a pointwise scalar field that vanishes (up to
discretization) exactly when the corresponding geometric property holds:

========================  ====================================================
willmore                  |D_zbar D_zbar kappa + (conj s / 2) kappa|
swillmore                 component of D_zbar kappa off the complex line of kappa
flat_normal               <kappa, conj kappa> - |<kappa, kappa>|
isothermic                |theta_z zbar| for the half-phase theta of <kappa,kappa>
gauss                     s_zbar/2 - 3<kappa, D_z conj kappa> - <D_z kappa, conj kappa>
codazzi                   norm of Im(D_zbar D_zbar kappa + (conj s/2) kappa)
ricci                     normal curvature commutator minus its kappa expression
omega_abs                 |Omega|, Omega = <D_zbar k, k>^2 - <D_zbar k, D_zbar k><k,k>
omega_holomorphy          |d_zbar Omega|
========================  ====================================================

All scalars are built from pairings of kappa and its normal derivatives,
never from components in the point-wise psi gauge, so they are invariant
under re-gauging of the normal frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__ as _version
from .calculus import GridSpec, diff_z, diff_zbar
from .frame import Chart, FrameField, build_frame, normal_project, validate_chart
from .invariants import (
    InvariantField,
    compute_invariants,
    ricci_residual,
    willmore_energy_conformal,
    willmore_energy_euclidean,
)
from .lorentz import cmink_inner, herm_norm_sq, mink_inner, span_rank

SCHEMA_VERSION = 1
DEFAULT_TOL_SPECTRAL = 1e-6
DEFAULT_TOL_FD = 1e-3
MIN_RANK_SAMPLES = 50
# residuals compose up to four grid derivatives; one-sided stencils pollute
# about 3 cells per level, so refinement fits measure this far from FD edges
CONVERGENCE_MARGIN = 12


def convergence_L_inf(report: "DiagnosticsReport", name: str) -> float:
    """L_inf of a residual field over the deep interior (refinement studies).

    Report verdicts use the standard 3-cell margin; fitted convergence
    orders need the one-sided-stencil pollution band excluded entirely.
    """
    spec_mask = report.fields["_mask"]
    deep = np.ones_like(spec_mask)
    if not report.chart["periodic_u"]:
        deep[:CONVERGENCE_MARGIN, :] = False
        deep[-CONVERGENCE_MARGIN:, :] = False
    if not report.chart["periodic_v"]:
        deep[:, :CONVERGENCE_MARGIN] = False
        deep[:, -CONVERGENCE_MARGIN:] = False
    mask = spec_mask & deep
    if name in ("res_swillmore", "res_flat", "res_isothermic"):
        mask &= ~report.fields["_umbilic_mask"]
    vals = np.abs(report.fields[name])[mask]
    return float(vals.max()) if vals.size else math.nan


class NonFlatError(ValueError):
    """Raised when a flat-normal-bundle precondition fails."""


def _norm_field(vec: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(herm_norm_sq(vec), 0.0))


def willmore_residual(inv: InvariantField) -> np.ndarray:
    """|D_zbar D_zbar kappa + (conj s / 2) kappa| pointwise."""
    frame = inv.frame
    ddk = normal_project(frame, diff_zbar(inv.Dzbar_kappa, frame.spec))
    expr = ddk + 0.5 * np.conj(inv.s)[..., None] * inv.kappa
    return _norm_field(expr)


def s_willmore_residual(inv: InvariantField) -> np.ndarray:
    """Norm of the part of D_zbar kappa orthogonal to the line of kappa.

    Zero exactly when D_zbar kappa = mu kappa for some function mu.
    Meaningless at umbilic points (the quotient by <kappa, conj kappa>);
    callers mask those.
    """
    kkb = np.where(inv.umbilic_mask, 1.0, inv.kk_bar)
    coef = cmink_inner(inv.Dzbar_kappa, np.conj(inv.kappa)) / kkb
    return _norm_field(inv.Dzbar_kappa - coef[..., None] * inv.kappa)


def flat_normal_residual(inv: InvariantField) -> np.ndarray:
    """<kappa, conj kappa> - |<kappa, kappa>|: zero iff kappa is a common
    phase times a real normal vector (flat normal bundle away from
    umbilics).  Always >= 0 by Cauchy-Schwarz."""
    return inv.kk_bar - np.abs(inv.kk)


def flat_normal_scalar(kappa: np.ndarray) -> np.ndarray:
    """Same criterion on bare complex vectors with the Euclidean pairing
    (synthetic normal-bundle fixtures)."""
    kk_bar = np.einsum("...k,...k->...", kappa, np.conj(kappa)).real
    kk = np.einsum("...k,...k->...", kappa, kappa)
    return kk_bar - np.abs(kk)


def ricci_rhs_max(kappa: np.ndarray) -> np.ndarray:
    """max over basis vectors e_a of |2<e_a,k> conj k - 2<e_a, conj k> k|,
    Euclidean pairing; the brute-force flatness criterion from the normal
    curvature."""
    kap = np.asarray(kappa)
    out = np.zeros(kap.shape[:-1])
    for a in range(kap.shape[-1]):
        rhs = 2.0 * kap[..., a, None] * np.conj(kap) - 2.0 * np.conj(kap)[..., a, None] * kap
        nrm = np.sqrt(np.einsum("...k,...k->...", rhs, np.conj(rhs)).real)
        out = np.maximum(out, nrm)
    return out


def isothermic_phase_residual(
    inv: InvariantField, flat_tolerance: float = DEFAULT_TOL_SPECTRAL
) -> np.ndarray:
    """|theta_z zbar| for the unwrapped half-phase of <kappa, kappa>.

    theta is only meaningful on flat-normal-bundle data, so the flatness
    residual is checked first and NonFlatError raised beyond tolerance.
    """
    live = inv.mask & ~inv.umbilic_mask
    if live.any():
        worst = float(flat_normal_residual(inv)[live].max())
        if worst > flat_tolerance:
            raise NonFlatError(
                f"flat-normal residual {worst:.3e} exceeds {flat_tolerance:.1e}; "
                "the phase of <kappa,kappa> does not define theta"
            )
    return phase_laplacian_residual(inv.theta, inv.spec)


def phase_laplacian_residual(theta: np.ndarray, spec: GridSpec) -> np.ndarray:
    """|d_z d_zbar theta| = |(theta_uu + theta_vv)| / 4."""
    return np.abs(diff_zbar(diff_z(theta, spec), spec))


def six_form(inv: InvariantField) -> tuple[np.ndarray, np.ndarray]:
    """The holomorphic-form candidate Omega and its |d_zbar Omega|.

    Omega = <D_zbar kappa, kappa>^2 - <D_zbar kappa, D_zbar kappa>
    <kappa, kappa>; it vanishes identically whenever D_zbar kappa is
    parallel to kappa, and d_zbar Omega vanishes on Willmore data.
    """
    omega = six_form_scalar(inv.kappa, inv.Dzbar_kappa)
    holo = np.abs(diff_zbar(omega, inv.spec))
    return omega, holo


def six_form_scalar(kappa: np.ndarray, dzbar_kappa: np.ndarray) -> np.ndarray:
    """Omega from bare vectors (complex-bilinear Euclidean pairing on the
    last axis); used for the algebraic-identity fixtures as well."""
    dot = lambda a, b: np.einsum("...k,...k->...", a, b)
    return dot(dzbar_kappa, kappa) ** 2 - dot(dzbar_kappa, dzbar_kappa) * dot(kappa, kappa)


def codazzi_gauss_residuals(inv: InvariantField) -> tuple[np.ndarray, np.ndarray]:
    """(gauss, codazzi) pointwise absolute defects of the integrability rows.

    gauss:   s_zbar / 2 - 3 <kappa, D_z conj kappa> - <D_z kappa, conj kappa>
    codazzi: norm of Im(D_zbar D_zbar kappa + (conj s / 2) kappa); the
             imaginary part of a V^perp_C field is (W - conj W)/2i, a real
             normal vector, so its Minkowski norm is gauge-invariant.
    """
    frame = inv.frame
    s_zbar = diff_zbar(inv.s, frame.spec)
    dz_kappa_bar = np.conj(inv.Dzbar_kappa)  # D_z conj kappa
    gauss = np.abs(
        0.5 * s_zbar
        - 3.0 * cmink_inner(inv.kappa, dz_kappa_bar)
        - cmink_inner(inv.Dz_kappa, np.conj(inv.kappa))
    )
    ddk = normal_project(frame, diff_zbar(inv.Dzbar_kappa, frame.spec))
    w_expr = ddk + 0.5 * np.conj(inv.s)[..., None] * inv.kappa
    im_part = ((w_expr - np.conj(w_expr)) / 2j).real
    codazzi = np.sqrt(np.maximum(mink_inner(im_part, im_part), 0.0))
    return gauss, codazzi


def reduction_span_check(
    frame: FrameField,
    inv: InvariantField,
    tol: float = 1e-8,
) -> tuple[int, int]:
    """(lift_rank, kappa_jet_rank) from sampled singular values.

    lift_rank k+2 witnesses containment in a conformal S^k; the kappa jet
    stacks real and imaginary parts of kappa, D_z kappa and
    D_zbar D_z kappa across the grid (flat-normal Willmore data spans at
    most 4 dimensions).
    """
    m = inv.mask
    if int(m.sum()) < MIN_RANK_SAMPLES:
        raise ValueError(f"need >= {MIN_RANK_SAMPLES} unmasked samples for rank checks")
    lift_rank = span_rank(frame.Y[m], tol)
    ddk = normal_project(frame, diff_zbar(inv.Dz_kappa, frame.spec))
    jets = []
    for f in (inv.kappa, inv.Dz_kappa, ddk):
        jets.append(f[m].real)
        jets.append(f[m].imag)
    kappa_jet_rank = span_rank(np.concatenate(jets, axis=0), tol)
    return lift_rank, kappa_jet_rank


def remark62_residual(
    k_fields,
    theta: np.ndarray,
    s: np.ndarray,
    spec: GridSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluator for the flat-normal-in-S^6 integrability system.

    First equation, for each of the four real components k_a:

        k_a_zbar_zbar + 2 i theta_zbar k_a_zbar
            + (i theta_zbar_zbar - theta_zbar^2 + conj s / 2) k_a = 0,

    second equation:

        s_zbar / 2 = 2 (sum k_a^2)_z - 2 i theta_z sum k_a^2.

    Returns (max_a |first|, |second|) pointwise.  This is an evaluator for
    candidate solutions; it does not solve the system.
    """
    ks = [np.asarray(k, dtype=float) for k in k_fields]
    for k in ks:
        if k.shape != (spec.nu, spec.nv):
            raise ValueError("k-field shape does not match the grid")
    theta = np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=complex)
    t_zbar = diff_zbar(theta, spec)
    t_zbar2 = diff_zbar(t_zbar, spec)
    t_z = diff_z(theta, spec)
    coeff = 1j * t_zbar2 - t_zbar**2 + 0.5 * np.conj(s)
    res1 = np.zeros((spec.nu, spec.nv))
    for k in ks:
        k_zbar = diff_zbar(k, spec)
        k_zbarzbar = diff_zbar(k_zbar, spec)
        res1 = np.maximum(res1, np.abs(k_zbarzbar + 2j * t_zbar * k_zbar + coeff * k))
    total = sum(k * k for k in ks)
    res2 = np.abs(
        0.5 * diff_zbar(s, spec) - 2.0 * diff_z(total, spec) + 2j * t_z * total
    )
    return res1, res2


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

@dataclass
class ResidualEntry:
    name: str
    L_inf: float
    L2: float
    tolerance: float
    verdict: str  # "pass" | "fail" | "skipped"
    masked_fraction: float


@dataclass
class DiagnosticsReport:
    chart: dict
    seed: int
    entries: list
    energies: dict
    ranks: dict
    passed: bool
    fields: dict = field(default_factory=dict, repr=False)  # not serialized

    def entry(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "chart": self.chart,
            "seed": self.seed,
            "energies": self.energies,
            "ranks": self.ranks,
            "residuals": [
                {
                    "name": e.name,
                    "L_inf": e.L_inf,
                    "L2": e.L2,
                    "tolerance": e.tolerance,
                    "verdict": e.verdict,
                    "masked_fraction": e.masked_fraction,
                }
                for e in self.entries
            ],
            "passed": self.passed,
        }


def field_norms(f: np.ndarray, spec: GridSpec, mask: np.ndarray):
    """(L_inf, L2, masked_fraction) of |f| over the mask, with quadrature
    weights for L2."""
    a = np.abs(np.asarray(f))
    frac = 1.0 - float(mask.sum()) / mask.size
    if not mask.any():
        return math.nan, math.nan, frac
    w = spec.quad_weights()
    l2 = float(np.sqrt(np.sum(w[mask] * a[mask] ** 2)))
    return float(a[mask].max()), l2, frac


def default_tolerances(chart: Chart, overrides: Optional[dict] = None) -> dict:
    """Per-residual verdict tolerances: spectral charts resolve to the
    roundoff floor, finite-difference charts to their truncation floor."""
    base = DEFAULT_TOL_SPECTRAL if chart.spec.fully_periodic else DEFAULT_TOL_FD
    names = [
        "willmore", "swillmore", "flat_normal", "isothermic",
        "gauss", "codazzi", "ricci", "omega_abs", "omega_holomorphy",
    ]
    tol = {n: base for n in names}
    if overrides:
        unknown = set(overrides) - set(names)
        if unknown:
            raise KeyError(f"unknown residual name(s) in tolerances: {sorted(unknown)}")
        tol.update({k: float(v) for k, v in overrides.items()})
    return tol


def analyze(
    chart: Chart,
    tolerances: Optional[dict] = None,
    seed: int = 0,
    rank_tol: float = 1e-8,
    validate: bool = True,
    euclidean: bool = True,
) -> DiagnosticsReport:
    """Full pipeline: frame -> invariants -> residuals -> report."""
    if validate:
        validate_chart(chart)
    frame = build_frame(chart, validate=False)
    inv = compute_invariants(frame)
    tol = default_tolerances(chart, tolerances)
    spec = chart.spec

    live = frame.mask
    umb_live = live & ~inv.umbilic_mask

    fields = {
        "res_willmore": willmore_residual(inv),
        "res_swillmore": s_willmore_residual(inv),
        "res_flat": flat_normal_residual(inv),
        "res_ricci": ricci_residual(frame, inv),
    }
    fields["res_gauss"], fields["res_codazzi"] = codazzi_gauss_residuals(inv)
    omega, holo = six_form(inv)
    fields["omega_abs"] = np.abs(omega)
    fields["omega_holomorphy"] = holo
    fields["kkbar"] = inv.kk_bar
    fields["abs_kk"] = np.abs(inv.kk)
    fields["theta"] = np.where(inv.theta_mask, inv.theta, np.nan)
    fields["_mask"] = live
    fields["_umbilic_mask"] = inv.umbilic_mask

    entries = []

    def add(name, data, mask):
        linf, l2, frac = field_norms(data, spec, mask)
        if math.isnan(linf):
            verdict = "skipped"
        else:
            verdict = "pass" if linf < tol[name] else "fail"
        entries.append(ResidualEntry(name, linf, l2, tol[name], verdict, frac))

    add("willmore", fields["res_willmore"], live)
    add("swillmore", fields["res_swillmore"], umb_live)
    add("flat_normal", fields["res_flat"], umb_live)

    flat_entry = entries[-1]
    if flat_entry.verdict == "pass":
        iso = phase_laplacian_residual(inv.theta, spec)
        fields["res_isothermic"] = iso
        add("isothermic", iso, umb_live & inv.theta_mask)
    else:
        fields["res_isothermic"] = np.full((spec.nu, spec.nv), np.nan)
        entries.append(
            ResidualEntry("isothermic", math.nan, math.nan, tol["isothermic"],
                          "skipped", 1.0)
        )

    add("gauss", fields["res_gauss"], live)
    add("codazzi", fields["res_codazzi"], live)
    add("ricci", fields["res_ricci"], live)
    add("omega_abs", fields["omega_abs"], live)
    add("omega_holomorphy", fields["omega_holomorphy"], live)

    w_conf = willmore_energy_conformal(inv)
    energies = {
        "W_conformal": w_conf,
        "domain_truncated": not spec.fully_periodic,
    }
    if euclidean:
        energies["W_euclidean"] = willmore_energy_euclidean(chart)

    lift_rank, jet_rank = reduction_span_check(frame, inv, rank_tol)
    ranks = {"lift_rank": lift_rank, "kappa_jet_rank": jet_rank}

    passed = all(e.verdict in ("pass", "skipped") for e in entries)
    meta = {
        "name": chart.name,
        "params": _jsonable(chart.params),
        "nu": spec.nu,
        "nv": spec.nv,
        "ambient_n": chart.ambient_n,
        "cover_count": chart.cover_count,
        "periodic_u": spec.periodic_u,
        "periodic_v": spec.periodic_v,
        "wlab_version": _version,
    }
    return DiagnosticsReport(
        chart=meta, seed=seed, entries=entries, energies=energies,
        ranks=ranks, passed=passed, fields=fields,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
