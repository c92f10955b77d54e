import math

import numpy as np
import pytest

from photondistill.cavity import (
    CavityParams,
    branch_amplitudes,
    cooperativity,
    f1_max,
    fiber_params,
    read_config_file,
    xi,
)

REFERENCE = CavityParams(g=7.8, kappa=2.5, kappa_r=2.3, kappa_t=0.2, kappa_m=0.0, gamma=3.0)


def random_params(rng):
    kr, kt, km = rng.uniform(0.1, 3.0, size=3)
    return CavityParams.from_decays(
        g=rng.uniform(0.5, 12.0),
        kappa_r=kr,
        kappa_t=kt,
        kappa_m=km,
        gamma=rng.uniform(0.5, 5.0),
        delta_a=rng.uniform(-4.0, 4.0),
        delta_c=rng.uniform(-4.0, 4.0),
    )


class TestCavityParams:
    def test_rate_sum_enforced(self):
        with pytest.raises(ValueError):
            CavityParams(g=1, kappa=2.0, kappa_r=1.0, kappa_t=0.5, kappa_m=0.1, gamma=1)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            CavityParams.from_decays(g=-1, kappa_r=1, kappa_t=0, kappa_m=0, gamma=1)

    def test_config_round_trip(self, tmp_path):
        path = tmp_path / "cavity.cfg"
        REFERENCE.replace(delta_c=0.39).save(path)
        loaded = CavityParams.load(path)
        assert loaded == REFERENCE.replace(delta_c=0.39)

    def test_config_ignores_comments_and_extras(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(REFERENCE.to_config_text() + "# comment\ndetection_error = 0.013\n")
        values = read_config_file(path)
        assert values["detection_error"] == 0.013
        assert CavityParams.from_config(values) == REFERENCE

    def test_config_missing_key(self):
        with pytest.raises(ValueError):
            CavityParams.from_config({"g": 1.0})


class TestBranchAmplitudes:
    def test_uncoupled_resonant_reflection(self):
        # (kappa - 2 kappa_r)/kappa = (2.5 - 4.6)/2.5
        b = branch_amplitudes(REFERENCE, coupled=False, alpha=1.0)
        assert abs(b.r - (-0.84)) < 1e-12

    def test_coupled_resonant_reflection(self):
        # (g^2 + (kappa-2 kappa_r) gamma) / (g^2 + kappa gamma) = 54.54/68.34
        b = branch_amplitudes(REFERENCE, coupled=True, alpha=1.0)
        assert abs(b.r - 54.54 / 68.34) < 1e-12

    def test_zero_coupling_matches_uncoupled(self):
        params = REFERENCE.replace(g=0.0)
        up = branch_amplitudes(params, True, 0.7)
        down = branch_amplitudes(params, False, 0.7)
        assert up.r == pytest.approx(down.r, abs=1e-14)
        assert up.t == pytest.approx(down.t, abs=1e-14)
        assert abs(up.a) < 1e-14

    def test_energy_conservation_random_params(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            params = random_params(rng)
            alpha = rng.uniform(0.1, 1.8) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            for coupled in (False, True):
                b = branch_amplitudes(params, coupled, alpha)
                assert abs(b.total_power - abs(alpha) ** 2) < 1e-9


class TestDerivedQuantities:
    def test_reference_cooperativity(self):
        C = cooperativity(REFERENCE)
        assert abs(C - 4.056) < 1e-3
        assert round(C, 1) == 4.1

    def test_zero_coupling(self):
        assert cooperativity(REFERENCE.replace(g=0.0)) == 0.0
        assert f1_max(REFERENCE.replace(g=0.0)) == 0.0

    def test_reference_xi(self):
        assert abs(xi(REFERENCE) - 0.819) < 1e-3

    def test_xi_two_algebraic_forms_agree(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            params = random_params(rng)
            C = cooperativity(params)
            alt = (params.kappa_r / params.kappa) * 2 * C / (2 * C + 1)
            assert abs(xi(params) - alt) < 1e-12

    def test_strong_coupling_lossless_limit(self):
        params = CavityParams.from_decays(g=1e6, kappa_r=2.5, kappa_t=0.0, kappa_m=0.0, gamma=3.0)
        assert abs(xi(params) - 1.0) < 1e-6

    def test_no_outcoupling(self):
        params = CavityParams.from_decays(g=7.8, kappa_r=0.0, kappa_t=2.5, kappa_m=0.0, gamma=3.0)
        assert xi(params) == 0.0

    def test_f1_max_is_xi(self):
        assert f1_max(REFERENCE) == xi(REFERENCE)

    def test_overlap_exponents_on_resonance(self):
        # <r_up|r_down> = exp(-2 xi^2 a^2) and loss overlap exp(-2(1-xi) xi a^2)
        x = xi(REFERENCE)
        for alpha in (0.4, 0.9, 1.5):
            up = branch_amplitudes(REFERENCE, True, alpha)
            down = branch_amplitudes(REFERENCE, False, alpha)

            def coh_overlap(b1, b2):
                return math.exp(
                    -0.5 * (abs(b1) ** 2 + abs(b2) ** 2) + (np.conj(b1) * b2).real
                )

            refl = coh_overlap(up.r, down.r)
            assert abs(refl - math.exp(-2 * x**2 * alpha**2)) < 1e-10
            loss = np.prod(
                [coh_overlap(u, d) for u, d in zip(up.loss_vector(), down.loss_vector())]
            )
            assert abs(loss - math.exp(-2 * (1 - x) * x * alpha**2)) < 1e-10


class TestFiberParams:
    def test_outlook_numbers(self):
        params = fiber_params(
            length_m=39e-6,
            parasitic_loss_per_mirror_ppm=13.5,
            outcoupler_transmission_ppm=1300.0,
            g=240.0,
            gamma=3.0,
        )
        assert abs(params.kappa_r - 398.0) < 1.0
        assert abs(params.kappa - 406.0) < 1.5
        assert abs(cooperativity(params) - 23.6) < 0.2
        assert abs(f1_max(params) - 0.959) < 0.002

    def test_zero_parasitic_loss(self):
        params = fiber_params(39e-6, 0.0, 1300.0, g=240.0, gamma=3.0)
        assert params.kappa_r / params.kappa == pytest.approx(1.0)

    def test_invalid_length(self):
        with pytest.raises(ValueError):
            fiber_params(0.0, 13.5, 1300.0, g=240.0, gamma=3.0)
