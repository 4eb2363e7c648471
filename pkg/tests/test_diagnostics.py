import math
from types import SimpleNamespace

import numpy as np
import pytest

from wlab.calculus import GridSpec
from wlab.diagnostics import (
    NonFlatError,
    analyze,
    codazzi_gauss_residuals,
    field_norms,
    flat_normal_residual,
    flat_normal_scalar,
    isothermic_phase_residual,
    phase_laplacian_residual,
    reduction_span_check,
    remark62_residual,
    ricci_rhs_max,
    s_willmore_residual,
    six_form,
    six_form_scalar,
    willmore_residual,
)
from wlab.frame import Chart, build_frame
from wlab.gallery import clifford, round_sphere, veronese
from wlab.invariants import compute_invariants

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def clifford_data():
    frame = build_frame(clifford(48, 48))
    return frame, compute_invariants(frame)


def synthetic_field(vecs):
    """Broadcast a single complex vector to a tiny (8, 8) grid field."""
    vecs = np.asarray(vecs, dtype=complex)
    return np.broadcast_to(vecs, (8, 8) + vecs.shape).copy()


def e(i, dim=4):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


# --- willmore -------------------------------------------------------------

def test_willmore_residual_clifford(clifford_data):
    frame, inv = clifford_data
    assert willmore_residual(inv)[frame.mask].max() < 1e-8


def test_willmore_residual_round_sphere():
    frame = build_frame(round_sphere(64, 24))
    inv = compute_invariants(frame)
    assert willmore_residual(inv)[frame.mask].max() < 1e-10


def test_willmore_residual_perturbed_control():
    ch = clifford(48, 48)
    u, v = ch.spec.meshgrid()
    bump = 1e-2 * np.stack(
        [np.sin(u + 2 * v), np.cos(2 * u - v), np.sin(u) * np.sin(v), np.cos(u + v)],
        axis=-1,
    )
    pts = ch.points + bump
    pts /= np.linalg.norm(pts, axis=-1)[..., None]
    pert = Chart(ch.spec, pts, ambient_n=3, name="perturbed_clifford")
    frame = build_frame(pert, validate=False)
    inv = compute_invariants(frame)
    assert willmore_residual(inv)[frame.mask].max() > 1e-3
    gauss, _ = codazzi_gauss_residuals(inv)
    assert gauss[frame.mask].max() > 1e-3


# --- S-Willmore -----------------------------------------------------------

def _synthetic_inv(kappa, dzbar_kappa):
    kap = synthetic_field(kappa)
    dzb = synthetic_field(dzbar_kappa)
    kk = np.einsum("...k,...k->...", kap, kap)
    kk_bar = np.einsum("...k,...k->...", kap, np.conj(kap)).real
    return SimpleNamespace(
        kappa=kap, Dzbar_kappa=dzb, kk=kk, kk_bar=kk_bar,
        umbilic_mask=np.zeros((8, 8), dtype=bool),
        mask=np.ones((8, 8), dtype=bool),
    )


def test_s_willmore_parallel_is_zero():
    inv = _synthetic_inv(e(0), 5.0 * e(0))
    assert np.abs(s_willmore_residual(inv)).max() < 1e-14


def test_s_willmore_orthogonal_is_one():
    inv = _synthetic_inv(e(0), e(1))
    assert np.abs(s_willmore_residual(inv) - 1.0).max() < 1e-14


def test_s_willmore_clifford(clifford_data):
    frame, inv = clifford_data
    live = frame.mask & ~inv.umbilic_mask
    assert s_willmore_residual(inv)[live].max() < 1e-9


# --- flat normal bundle ---------------------------------------------------

def test_flat_residual_common_phase_vanishes():
    kappa = (1 + 1j) * e(0) + (2 + 2j) * e(1)
    assert abs(flat_normal_scalar(kappa)) < 1e-14


def test_flat_residual_quarter_phase():
    kappa = e(0) + 1j * e(1)
    assert flat_normal_scalar(kappa) == pytest.approx(2.0)


def test_flat_residual_clifford(clifford_data):
    frame, inv = clifford_data
    live = frame.mask & ~inv.umbilic_mask
    assert flat_normal_residual(inv)[live].max() < 1e-10


def test_flat_residual_veronese_bounded_below():
    frame = build_frame(veronese(64, 32))
    inv = compute_invariants(frame)
    live = frame.mask & ~inv.umbilic_mask
    assert flat_normal_residual(inv)[live].min() > 1e-2


# --- isothermic -----------------------------------------------------------

def test_isothermic_clifford(clifford_data):
    frame, inv = clifford_data
    res = isothermic_phase_residual(inv, flat_tolerance=1e-6)
    assert res[frame.mask].max() < 1e-9


def test_isothermic_linear_phase_is_harmonic():
    spec = GridSpec(48, 16, 1.0, TWO_PI, False, True)
    u, _ = spec.meshgrid()
    assert np.abs(phase_laplacian_residual(u, spec)).max() < 1e-10


def test_isothermic_quadratic_phase():
    spec = GridSpec(48, 16, 1.0, TWO_PI, False, True)
    u, _ = spec.meshgrid()
    res = phase_laplacian_residual(u * u, spec)
    assert np.abs(res - 0.5).max() < 1e-10


def test_isothermic_rejects_non_flat():
    frame = build_frame(veronese(64, 32))
    inv = compute_invariants(frame)
    with pytest.raises(NonFlatError):
        isothermic_phase_residual(inv, flat_tolerance=1e-6)


# --- six form ---------------------------------------------------------------

def test_six_form_parallel_derivative_identity():
    rng = np.random.default_rng(0)
    kappa = rng.normal(size=5) + 1j * rng.normal(size=5)
    mu = 0.7 - 1.9j
    assert abs(six_form_scalar(kappa, mu * kappa)) < 1e-12


def test_six_form_orthonormal_pair():
    assert six_form_scalar(e(0) + 0j, e(1) + 0j) == pytest.approx(-1.0)


def test_six_form_clifford(clifford_data):
    frame, inv = clifford_data
    omega, holo = six_form(inv)
    assert np.abs(omega)[frame.mask].max() < 1e-12
    assert holo[frame.mask].max() < 1e-12


# --- Gauss / Codazzi --------------------------------------------------------

def test_codazzi_gauss_clifford(clifford_data):
    frame, inv = clifford_data
    gauss, codazzi = codazzi_gauss_residuals(inv)
    assert gauss[frame.mask].max() < 1e-8
    assert codazzi[frame.mask].max() < 1e-8


def test_codazzi_below_willmore(clifford_data):
    # the Codazzi row is the imaginary part of the Willmore expression
    frame, inv = clifford_data
    _, codazzi = codazzi_gauss_residuals(inv)
    will = willmore_residual(inv)
    assert codazzi[frame.mask].max() <= will[frame.mask].max() + 1e-12


# --- rank witnesses --------------------------------------------------------

def test_reduction_span_clifford(clifford_data):
    frame, inv = clifford_data
    lift_rank, jet_rank = reduction_span_check(frame, inv)
    assert lift_rank == 5
    assert jet_rank == 4


def test_reduction_span_round_sphere():
    frame = build_frame(round_sphere(64, 24))
    inv = compute_invariants(frame)
    lift_rank, _ = reduction_span_check(frame, inv)
    assert lift_rank == 4


def test_reduction_span_needs_samples():
    frame = build_frame(round_sphere(8, 8), validate=False)
    inv = compute_invariants(frame)
    with pytest.raises(ValueError):
        reduction_span_check(frame, inv)


# --- flatness-criterion equivalence (pointwise brute force) ----------------

def test_flatness_equivalence_spot():
    rng = np.random.default_rng(2)
    generic = rng.normal(size=(100, 4)) + 1j * rng.normal(size=(100, 4))
    flat = np.exp(1j * rng.uniform(0, np.pi, size=(100, 1))) * rng.normal(size=(100, 4))
    for batch in (generic, flat):
        batch /= np.sqrt(np.einsum("sk,sk->s", batch, np.conj(batch)).real)[:, None]
        a = flat_normal_scalar(batch) < 1e-10
        b = ricci_rhs_max(batch) < 1e-10
        assert np.array_equal(a, b)


# --- Remark-style integrability evaluator ----------------------------------

def test_remark62_zero_fixture():
    spec = GridSpec(16, 16, TWO_PI, TWO_PI, True, True)
    zero = np.zeros((16, 16))
    r1, r2 = remark62_residual([zero] * 4, zero, zero + 0j, spec)
    assert np.abs(r1).max() == 0.0
    assert np.abs(r2).max() == 0.0


def test_remark62_constant_fixture():
    spec = GridSpec(16, 16, TWO_PI, TWO_PI, True, True)
    zero = np.zeros((16, 16))
    k3 = np.full((16, 16), np.sqrt(2) / 4)
    r1, r2 = remark62_residual([k3, zero, zero, zero], zero, zero + 0j, spec)
    assert np.abs(r1).max() < 1e-12
    assert np.abs(r2).max() < 1e-12


def test_remark62_linear_k3_fixture():
    # k3 = u, theta = s = 0: first row vanishes, second is |2 (u^2)_z| = 2|u|
    spec = GridSpec(48, 16, 1.0, TWO_PI, False, True)
    u, _ = spec.meshgrid()
    zero = np.zeros((48, 16))
    r1, r2 = remark62_residual([u, zero, zero, zero], zero, zero + 0j, spec)
    assert np.abs(r1).max() < 1e-10
    assert np.abs(r2 - 2.0 * np.abs(u)).max() < 1e-10


def test_remark62_shape_mismatch():
    spec = GridSpec(16, 16, TWO_PI, TWO_PI, True, True)
    with pytest.raises(ValueError):
        remark62_residual([np.zeros((8, 8))] * 4, np.zeros((16, 16)),
                          np.zeros((16, 16)), spec)


def test_grid_origin_shift_invariance():
    # spectral operators are shift-equivariant, so rolling a periodic chart
    # moves every field without changing norms or energies
    base_chart = clifford(32, 32)
    base = analyze(base_chart, euclidean=False)
    shifted = Chart(
        base_chart.spec, np.roll(base_chart.points, (5, 11), axis=(0, 1)),
        ambient_n=3, name="clifford",
    )
    rep = analyze(shifted, euclidean=False)
    assert abs(rep.energies["W_conformal"] - base.energies["W_conformal"]) < 1e-10
    for e in base.entries:
        if not np.isnan(e.L_inf):
            assert abs(rep.entry(e.name).L_inf - e.L_inf) < 1e-7, e.name


# --- report assembly --------------------------------------------------------

def test_report_norm_inequality(clifford_data):
    frame, _ = clifford_data
    rep = analyze(frame.chart, euclidean=False)
    area = math.sqrt(4 * np.pi**2)
    for entry in rep.entries:
        if not math.isnan(entry.L2):
            assert entry.L2 <= entry.L_inf * area * (1 + 1e-12)


def test_field_norms_empty_mask():
    spec = GridSpec(8, 8, 1.0, 1.0, True, True)
    linf, l2, frac = field_norms(np.ones((8, 8)), spec, np.zeros((8, 8), bool))
    assert math.isnan(linf) and math.isnan(l2) and frac == 1.0
