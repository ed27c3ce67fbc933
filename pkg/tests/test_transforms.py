import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latbrackets import (
    DomainError,
    FieldState,
    ReducedAngleState,
    ReducedState,
    Saturation,
    TrimerParams,
    ValidationError,
    action_angle_to_fields,
    action_angle_to_reduced,
    cartesian_to_reduced,
    fields_to_action_angle,
    reduced_hamiltonian,
    reduced_to_action_angle,
    reduced_to_cartesian,
)

from oracles import random_state

EXP = Saturation.exponential()
SQRT = Saturation.square_root()


def full_chain_round_trip(psi):
    aa = fields_to_action_angle(FieldState(psi))
    red = action_angle_to_reduced(aa)
    cart = reduced_to_cartesian(red)
    back = action_angle_to_fields(
        reduced_to_action_angle(cartesian_to_reduced(cart, Theta=red.Theta))
    )
    return back.amplitudes


class TestFieldsToActionAngle:
    def test_unit_site(self):
        aa = fields_to_action_angle(FieldState([1.0, 0.0, 0.0]))
        assert np.allclose(aa.n, [1.0, 0.0, 0.0])
        assert np.allclose(aa.theta, [0.0, 0.0, 0.0])

    def test_polar_decomposition(self):
        psi = 0.7 * np.exp(1j * np.array([0.4, -2.0, 3.0]))
        aa = fields_to_action_angle(FieldState(psi))
        assert np.allclose(aa.n, 0.49)
        assert np.allclose(aa.theta, [0.4, -2.0, 3.0])

    def test_angle_range_half_open(self):
        # arg(-1) is pi; the representative range is [-pi, pi)
        aa = fields_to_action_angle(FieldState([-1.0, 1.0, 1.0]))
        assert aa.theta[0] == pytest.approx(-np.pi)

    def test_round_trip(self, rng):
        for _ in range(50):
            psi = random_state(rng, 3)
            back = action_angle_to_fields(fields_to_action_angle(FieldState(psi)))
            assert np.max(np.abs(back.amplitudes - psi)) < 1e-14

    def test_wrong_size_rejected(self, rng):
        with pytest.raises(ValidationError):
            fields_to_action_angle(FieldState(random_state(rng, 4)))


class TestReduction:
    def test_uniform_state(self):
        aa = fields_to_action_angle(FieldState([1.0, 1.0, 1.0]))
        red = action_angle_to_reduced(aa)
        assert (red.n, red.m, red.N) == (1.0, 1.0, 3.0)
        assert (red.alpha, red.beta, red.Theta) == (0.0, 0.0, 0.0)

    def test_angle_differences(self):
        from latbrackets import ActionAngleState

        aa = ActionAngleState(n=np.array([0.5, 0.25, 0.75]), theta=np.array([0.3, -0.4, 1.1]))
        red = action_angle_to_reduced(aa)
        assert red.alpha == pytest.approx(0.7)
        assert red.beta == pytest.approx(1.5)
        assert red.Theta == pytest.approx(-0.4)
        assert red.middle_occupation == pytest.approx(0.25)

    def test_round_trip_exact(self, rng):
        for _ in range(50):
            psi = random_state(rng, 3)
            aa = fields_to_action_angle(FieldState(psi))
            red = action_angle_to_reduced(aa)
            back = reduced_to_action_angle(red)
            assert np.max(np.abs(back.n - aa.n)) < 1e-14
            assert np.max(np.abs(back.theta - aa.theta)) < 1e-13

    def test_negative_middle_occupation_rejected(self):
        with pytest.raises(ValidationError):
            ReducedAngleState(n=0.8, alpha=0.0, m=0.8, beta=0.0, N=1.0, Theta=0.0)


class TestCartesian:
    def test_axis_alignment(self):
        red = ReducedAngleState(n=1.0, alpha=0.0, m=0.0, beta=0.0, N=2.0, Theta=0.0)
        cart = reduced_to_cartesian(red)
        assert (cart.x1, cart.x2) == (1.0, 0.0)

        red = ReducedAngleState(n=1.0, alpha=np.pi / 2, m=0.0, beta=0.0, N=2.0, Theta=0.0)
        cart = reduced_to_cartesian(red)
        assert cart.x1 == pytest.approx(0.0, abs=1e-16)
        assert cart.x2 == pytest.approx(1.0)

    def test_radius_recovery(self, rng):
        for _ in range(50):
            psi = random_state(rng, 3)
            red = action_angle_to_reduced(fields_to_action_angle(FieldState(psi)))
            cart = reduced_to_cartesian(red)
            assert cart.n == pytest.approx(red.n, abs=1e-14)
            assert cart.m == pytest.approx(red.m, abs=1e-14)

    def test_total_occupation_agrees_everywhere(self, rng):
        psi = random_state(rng, 3)
        aa = fields_to_action_angle(FieldState(psi))
        red = action_angle_to_reduced(aa)
        cart = reduced_to_cartesian(red)
        total = float(np.sum(np.abs(psi) ** 2))
        assert float(np.sum(aa.n)) == pytest.approx(total, abs=1e-14)
        assert red.N == pytest.approx(total, abs=1e-14)
        assert cart.n + cart.m + cart.middle_occupation == pytest.approx(total, abs=1e-13)

    def test_occupation_overflow_rejected(self):
        with pytest.raises(ValidationError):
            ReducedState(x1=1.0, x2=1.0, y1=1.0, y2=1.0, N=3.0)

    def test_full_chain_round_trip(self, rng):
        for _ in range(100):
            psi = random_state(rng, 3)
            assert np.max(np.abs(full_chain_round_trip(psi) - psi)) < 1e-13

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**9))
    def test_full_chain_round_trip_property(self, seed):
        psi = random_state(np.random.default_rng(seed), 3)
        assert np.max(np.abs(full_chain_round_trip(psi) - psi)) < 1e-12


class TestReducedHamiltonian:
    def test_zero_coupling_is_angle_free(self):
        params = TrimerParams(eps=(1.0, 0.7, 0.3), coupling=0.0, saturation=EXP)
        for alpha, beta in ((0.0, 0.0), (1.2, -0.7), (3.0, 2.0)):
            red = ReducedAngleState(n=0.5, alpha=alpha, m=0.8, beta=beta, N=2.0, Theta=0.1)
            h = reduced_hamiltonian(reduced_to_cartesian(red), params)
            # H = n (e1-e2) + m (e3-e2) + N e2
            assert h == pytest.approx(0.5 * 0.3 + 0.8 * (-0.4) + 2.0 * 0.7, abs=1e-14)

    def test_boundary_state_energy(self):
        # all |psi_i|^2 = 1 under the square-root saturation: every hopping
        # term carries an f(1) = 0 factor, leaving only the on-site part.
        params = TrimerParams(eps=(1.0, 1.0, 1.0), coupling=0.6, saturation=SQRT)
        corner = ReducedState(
            x1=np.cos(1.1), x2=np.sin(1.1), y1=np.cos(-0.3), y2=np.sin(-0.3), N=3.0
        )
        assert reduced_hamiltonian(corner, params) == pytest.approx(3.0, abs=1e-14)

    @pytest.mark.parametrize("topology", ["cyclic", "linear"])
    @pytest.mark.parametrize(
        "sat,max_occ", [(EXP, None), (SQRT, 1.0)], ids=["exp", "sqrt"]
    )
    def test_matches_field_space_evaluation(self, rng, topology, sat, max_occ):
        params = TrimerParams(
            eps=(1.0, 0.7, 0.4), coupling=0.6 - 0.2j, saturation=sat, topology=topology
        )
        obs = params.observable()
        for _ in range(100):
            psi = random_state(rng, 3, max_occupation=max_occ, margin=0.05)
            cart = reduced_to_cartesian(
                action_angle_to_reduced(fields_to_action_angle(FieldState(psi)))
            )
            direct = obs.evaluate(FieldState(psi))
            assert reduced_hamiltonian(cart, params) == pytest.approx(direct, abs=1e-12)

    def test_independent_of_overall_phase(self, rng):
        params = TrimerParams(eps=(1.0, 0.7, 0.4), coupling=0.6, saturation=EXP)
        psi = random_state(rng, 3)
        values = []
        for shift in (0.0, 1.7):
            aa = fields_to_action_angle(FieldState(psi * np.exp(1j * shift)))
            cart = reduced_to_cartesian(action_angle_to_reduced(aa))
            values.append(reduced_hamiltonian(cart, params))
        assert values[0] == pytest.approx(values[1], abs=1e-13)

    def test_saturation_domain_enforced(self):
        params = TrimerParams(eps=(1.0, 1.0, 1.0), coupling=0.6, saturation=SQRT)
        # middle site gets N - n - m = 1.8 > 1
        state = ReducedState(x1=0.3, x2=0.0, y1=0.3, y2=0.0, N=2.0)
        with pytest.raises(DomainError):
            reduced_hamiltonian(state, params)

    def test_topology_changes_energy(self, rng):
        psi = random_state(rng, 3)
        cart = reduced_to_cartesian(
            action_angle_to_reduced(fields_to_action_angle(FieldState(psi)))
        )
        common = dict(eps=(1.0, 0.7, 0.4), coupling=0.6, saturation=EXP)
        h_ring = reduced_hamiltonian(cart, TrimerParams(topology="cyclic", **common))
        h_open = reduced_hamiltonian(cart, TrimerParams(topology="linear", **common))
        assert abs(h_ring - h_open) > 1e-6

    def test_params_validation(self):
        with pytest.raises(ValidationError):
            TrimerParams(eps=(1.0, 2.0), coupling=0.1, saturation=EXP)
        with pytest.raises(ValidationError):
            TrimerParams(eps=(1.0, 2.0, 3.0), coupling=0.1, saturation=EXP, topology="star")
