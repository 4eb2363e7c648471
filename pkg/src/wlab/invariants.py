"""Conformal invariants of an immersed surface patch: kappa, s, D, energies.

For the canonical lift Y the basic decomposition is

    Y_zz = -(s/2) Y + kappa,

with kappa the V^perp_C part (the conformal Hopf differential) and s the
Schwarzian, recovered as s = 2 <Y_zz, N> since <Y, N> = -1.  The normal
connection is D_z v = P_perp d_z v for sections v of V^perp_C, and the
conformally invariant metric is <kappa, conj kappa> |dz|^2, whose total
integral 2i Int <kappa, conj kappa> dz ^ dzbar = 4 Int <kappa, conj
kappa> du dv is the Willmore energy.  The independent Euclidean pipeline
stereographically projects the chart to R^n and integrates H^2 - K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import GridSpec, diff_z, diff_zbar, diff_u, diff_v, integrate
from .frame import Chart, FrameField, normal_project
from .lorentz import cmink_inner, herm_norm_sq

UMBILIC_REL_TOL = 1e-10
UMBILIC_ABS_TOL = 1e-13
POLE_MIN_DISTANCE = 0.1


@dataclass
class InvariantField:
    """Per-point conformal invariants attached to a frame."""

    frame: FrameField
    kappa: np.ndarray        # (nu, nv, d) complex, in V^perp_C
    s: np.ndarray            # (nu, nv) complex Schwarzian
    kk: np.ndarray           # <kappa, kappa>, complex
    kk_bar: np.ndarray       # <kappa, conj kappa>, real >= 0
    Dz_kappa: np.ndarray
    Dzbar_kappa: np.ndarray
    theta: np.ndarray        # unwrapped half-phase of <kappa, kappa>
    theta_mask: np.ndarray   # False where unwrapping was inconsistent
    umbilic_mask: np.ndarray  # True at (near-)umbilic points
    decomposition_defect: float
    tangential_defect: float

    @property
    def spec(self) -> GridSpec:
        return self.frame.spec

    @property
    def mask(self) -> np.ndarray:
        return self.frame.mask


def hopf_schwarzian(frame: FrameField) -> InvariantField:
    """Split Y_zz into Schwarzian and conformal Hopf differential.

    The tangential components of Y_zz vanish identically for canonical
    lifts; their measured size is recorded as `tangential_defect`, and the
    closure of the decomposition itself as `decomposition_defect`.
    """
    kappa = normal_project(frame, frame.Y_zz)
    n_c = frame.N.astype(complex)
    s = 2.0 * cmink_inner(frame.Y_zz, n_c)
    kk = cmink_inner(kappa, kappa)
    kk_bar = herm_norm_sq(kappa)

    m = frame.mask
    recon = -0.5 * s[..., None] * frame.Y + kappa
    decomp = np.sqrt(np.maximum(herm_norm_sq(frame.Y_zz - recon), 0.0))
    tang = np.maximum(
        np.abs(2.0 * cmink_inner(frame.Y_zz, frame.Y_z)),
        np.abs(2.0 * cmink_inner(frame.Y_zz, frame.Y_zbar)),
    )

    Dz_kappa = normal_project(frame, diff_z(kappa, frame.spec))
    Dzbar_kappa = normal_project(frame, diff_zbar(kappa, frame.spec))

    umbilic = kk_bar < np.maximum(UMBILIC_REL_TOL * kk_bar[m].max(), UMBILIC_ABS_TOL)
    theta, theta_ok = unwrap_half_phase(kk, frame.spec)

    return InvariantField(
        frame=frame,
        kappa=kappa,
        s=s,
        kk=kk,
        kk_bar=kk_bar,
        Dz_kappa=Dz_kappa,
        Dzbar_kappa=Dzbar_kappa,
        theta=theta,
        theta_mask=theta_ok,
        umbilic_mask=umbilic,
        decomposition_defect=float(decomp[m].max()),
        tangential_defect=float(tang[m].max()),
    )


compute_invariants = hopf_schwarzian


def normal_D(frame: FrameField, section: np.ndarray, bar: bool = False) -> np.ndarray:
    """Normal connection applied to a section of V^perp_C.

    D_z v (or D_zbar v with bar=True) is the V^perp_C projection of the
    grid derivative of v.
    """
    d = diff_zbar(section, frame.spec) if bar else diff_z(section, frame.spec)
    return normal_project(frame, d)


def _wrap_half_pi(x: np.ndarray) -> np.ndarray:
    return (x + np.pi / 2) % np.pi - np.pi / 2


def unwrap_half_phase(kk: np.ndarray, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """theta = arg<kappa,kappa>/2, unwrapped row-major with period pi.

    theta is only defined mod pi; rows are unwrapped along v after seeding
    from the first column unwrapped along u.  Plaquettes whose wrapped
    increments fail to close (phase residues) get their four corners
    flagged False in the returned mask instead of being repaired.
    """
    raw = 0.5 * np.angle(kk)
    col0 = np.unwrap(raw[:, 0], period=np.pi)
    theta = np.unwrap(raw, axis=1, period=np.pi)
    theta += (col0 - theta[:, 0])[:, None]

    du = _wrap_half_pi(np.roll(raw, -1, axis=0) - raw)
    dv = _wrap_half_pi(np.roll(raw, -1, axis=1) - raw)
    curl = du + np.roll(dv, -1, axis=0) - np.roll(du, -1, axis=1) - dv
    bad = np.abs(curl) > np.pi / 2
    if not spec.periodic_u:
        bad[-1, :] = False
    if not spec.periodic_v:
        bad[:, -1] = False
    ok = ~(bad | np.roll(bad, 1, axis=0) | np.roll(bad, 1, axis=1)
           | np.roll(np.roll(bad, 1, axis=0), 1, axis=1))
    return theta, ok


def ricci_residual(
    frame: FrameField, inv: InvariantField, kappa_rhs: Optional[np.ndarray] = None
) -> np.ndarray:
    """Pointwise max over the normal basis of |R^D psi - curvature terms|.

    The commutator D_zbar D_z - D_z D_zbar applied to a normal section
    equals F psi with F = -(i/2) P [P_u, P_v] P built from the smooth
    projector field, which is how it is evaluated here (the point-wise
    Gram-Schmidt psi gauge is not differentiable, the projector is).  The
    right-hand side is 2<psi,kappa> conj kappa - 2<psi,conj kappa> kappa;
    `kappa_rhs` substitutes a different kappa there, for controlled
    violation fixtures.
    """
    p = frame.P_perp
    pu = diff_u(p, frame.spec)
    pv = diff_v(p, frame.spec)
    comm = np.einsum("uvab,uvbc->uvac", pu, pv) - np.einsum(
        "uvab,uvbc->uvac", pv, pu
    )
    f_op = -0.5j * np.einsum("uvab,uvbc,uvcd->uvad", p, comm, p)

    kap = inv.kappa if kappa_rhs is None else kappa_rhs
    kap_c = np.conj(kap)
    out = np.zeros(frame.mask.shape)
    for a in range(frame.psi.shape[2]):
        psi_a = frame.psi[:, :, a, :].astype(complex)
        lhs = np.einsum("uvab,uvb->uva", f_op, psi_a)
        rhs = 2.0 * cmink_inner(psi_a, kap)[..., None] * kap_c \
            - 2.0 * cmink_inner(psi_a, kap_c)[..., None] * kap
        out = np.maximum(out, np.sqrt(np.maximum(herm_norm_sq(lhs - rhs), 0.0)))
    return out


def willmore_energy_conformal(inv: InvariantField, spec: Optional[GridSpec] = None) -> float:
    """W = 2i Int <kappa, conj kappa> dz ^ dzbar = 4 Int <k,kbar> du dv.

    Covering charts report the energy of a single cover.  On charts that
    are not fully periodic this is the energy of the truncated domain.
    """
    spec = spec or inv.spec
    w = 4.0 * float(integrate(inv.kk_bar, spec))
    return w / inv.frame.chart.cover_count


def select_projection_pole(chart: Chart, min_distance: float = POLE_MIN_DISTANCE) -> np.ndarray:
    """Pole for stereographic projection: far from every chart sample.

    Scans the coordinate axes plus a fixed low-discrepancy set of unit
    vectors and keeps the candidate maximizing the minimal distance to the
    surface; conditioning of the projection improves with that distance.
    """
    pts = chart.points.reshape(-1, chart.ambient_n + 1)
    rng = np.random.default_rng(12345)
    cand = rng.normal(size=(256, pts.shape[1]))
    cand /= np.linalg.norm(cand, axis=1)[:, None]
    axes = np.concatenate([np.eye(pts.shape[1]), -np.eye(pts.shape[1])])
    cand = np.concatenate([axes, cand])
    # |p - x|^2 = 2 - 2 p.x  on the unit sphere
    dots = cand @ pts.T
    min_d = np.sqrt(np.maximum(2.0 - 2.0 * dots.max(axis=1), 0.0))
    best = int(np.argmax(min_d))
    if min_d[best] < min_distance:
        raise ValueError(
            f"no stereographic pole at distance >= {min_distance} from the surface"
        )
    return cand[best]


def willmore_energy_euclidean(chart: Chart, pole: Optional[np.ndarray] = None) -> float:
    """Independent Willmore pipeline: stereographic projection + H^2 - K.

    Projects the chart to R^n from an automatically selected pole, builds
    the first and second fundamental forms by grid differentiation, and
    integrates (|H|^2 - K) dA.  Agrees with the conformal pipeline because
    the functional is invariant under the projection.
    """
    spec = chart.spec
    if pole is None:
        pole = select_projection_pole(chart)
    x = chart.points
    xp = np.einsum("uvk,k->uv", x, pole)
    X = (x - xp[..., None] * pole) / (1.0 - xp)[..., None]

    Xu = diff_u(X, spec).real
    Xv = diff_v(X, spec).real
    E = np.einsum("uvk,uvk->uv", Xu, Xu)
    F = np.einsum("uvk,uvk->uv", Xu, Xv)
    G = np.einsum("uvk,uvk->uv", Xv, Xv)

    Xuu = diff_u(Xu, spec).real
    Xuv = diff_v(Xu, spec).real
    Xvv = diff_v(Xv, spec).real

    # tangential Gram solve, then the normal parts of the second derivatives
    gram = np.stack(
        [np.stack([E, F], axis=-1), np.stack([F, G], axis=-1)], axis=-2
    )
    ginv = np.linalg.inv(gram)
    tan = np.stack([Xu, Xv], axis=2)

    def normal_part(w):
        r = np.einsum("uvik,uvk->uvi", tan, w)
        coef = np.einsum("uvij,uvj->uvi", ginv, r)
        return w - np.einsum("uvi,uvik->uvk", coef, tan)

    IIuu = normal_part(Xuu)
    IIuv = normal_part(Xuv)
    IIvv = normal_part(Xvv)

    det = E * G - F * F
    h_vec = (
        G[..., None] * IIuu - 2.0 * F[..., None] * IIuv + E[..., None] * IIvv
    ) / (2.0 * det[..., None])
    h2 = np.einsum("uvk,uvk->uv", h_vec, h_vec)
    k_gauss = (
        np.einsum("uvk,uvk->uv", IIuu, IIvv) - np.einsum("uvk,uvk->uv", IIuv, IIuv)
    ) / det

    dens = (h2 - k_gauss) * np.sqrt(det)
    return float(integrate(dens, spec)) / chart.cover_count


def structure_closure_residuals(frame: FrameField, inv: InvariantField) -> dict:
    """L_inf defects of the structure equations, reconstructed vs. direct.

    Checks d_z of Y_z, of N, and of a smooth normal section (the V^perp
    projection of a constant ambient vector; the Gram-Schmidt psi gauge is
    not differentiable so it cannot be differentiated directly).
    """
    m = frame.mask
    spec = frame.spec

    def worst(vec):
        return float(np.sqrt(np.maximum(herm_norm_sq(vec), 0.0))[m].max())

    out = {}
    rhs_yzz = -0.5 * inv.s[..., None] * frame.Y + inv.kappa
    out["Y_zz"] = worst(frame.Y_zz - rhs_yzz)

    nz = diff_z(frame.N, spec)
    rhs_n = (
        -2.0 * inv.kk_bar[..., None] * frame.Y_z
        - inv.s[..., None] * frame.Y_zbar
        + 2.0 * inv.Dzbar_kappa
    )
    out["N_z"] = worst(nz - rhs_n)

    w = np.zeros(frame.dim)
    w[-1] = 1.0
    section = np.einsum("uvab,b->uva", frame.P_perp, w).astype(complex)
    sz = diff_z(section, spec)
    dz_sec = normal_project(frame, sz)
    rhs_psi = (
        dz_sec
        + 2.0 * cmink_inner(section, inv.Dzbar_kappa)[..., None] * frame.Y
        - 2.0 * cmink_inner(section, inv.kappa)[..., None] * frame.Y_zbar
    )
    out["psi_z"] = worst(sz - rhs_psi)
    return out
