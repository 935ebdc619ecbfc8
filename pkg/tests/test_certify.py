import math

import numpy as np
import pytest

from qcert import (
    CoincidenceTable,
    CountingParams,
    CountRecord,
    DensityOperator,
    SourceConfig,
    StateVector,
    ValidationError,
    cglmp,
    cglmp_weights,
    density_from_ket,
    eof_bound,
    ideal_state,
    noisy_state,
    restrict_to_pair,
    simulate_setting,
    violation_curve,
    visibility_from_counts,
    witness,
    witness_bound,
)
from qcert.bases import cglmp_basis, mub_pair_basis, x_basis
from qcert.certify import certified_dimension_from_witness, _ebits_from_b
from qcert.errors import ComputationError
from qcert import naming


def uniform_rho(d, noise=0.0):
    return noisy_state(SourceConfig.uniform(d, noise_fraction=noise))


def vis_records(cpp, cmm, cpm, cmp_, setting="witX:0-1:x", trials=10**6):
    singles_s = {1: cpp + cpm + 50, -1: cmm + cmp_ + 50}
    singles_i = {1: cpp + cmp_ + 50, -1: cmm + cpm + 50}
    counts = {(1, 1): cpp, (-1, -1): cmm, (1, -1): cpm, (-1, 1): cmp_}
    return [
        CountRecord(setting=setting, outcome_s=a, outcome_i=b, coincidences=c,
                    singles_s=singles_s[a], singles_i=singles_i[b], trials=trials)
        for (a, b), c in counts.items()
    ]


class TestWitnessBound:
    def test_reference_table(self):
        assert [witness_bound(10, d) for d in range(1, 11)] == [
            45, 55, 65, 75, 85, 95, 105, 115, 125, 135
        ]

    def test_seven_mode_bound_value(self):
        assert witness_bound(10, 7) == 105

    def test_strictly_increasing_by_mode_count(self):
        for d in range(1, 10):
            assert witness_bound(10, d + 1) - witness_bound(10, d) == 10

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            witness_bound(10, 11)
        with pytest.raises(ValidationError):
            witness_bound(10, 0)


class TestCertifiedDimensionRule:
    @pytest.mark.parametrize(
        "total,err,expected",
        [
            (111.6, 0.8, 8),   # above f(7)=105 by more than one sigma
            (126.5, 1.0, 10),  # 125.5 > f(9)=125
            (125.5, 0.9, 9),   # 124.6 < f(9), > f(8)=115
            (135.0, 0.0, 10),
            (40.0, 1.0, 1),
        ],
    )
    def test_margin_rule(self, total, err, expected):
        assert certified_dimension_from_witness(total, err, 10) == expected


class TestVisibilityFromCounts:
    def test_perfect_correlation(self):
        vis = visibility_from_counts(vis_records(50, 50, 0, 0))
        assert vis.value == pytest.approx(1.0, abs=1e-12)

    def test_flat_counts(self):
        vis = visibility_from_counts(vis_records(25, 25, 25, 25))
        assert vis.value == pytest.approx(0.0, abs=1e-12)

    def test_reference_arithmetic(self):
        vis = visibility_from_counts(vis_records(40, 40, 10, 10))
        assert vis.value == pytest.approx(0.6, abs=1e-12)

    def test_zero_counts_flagged(self):
        vis = visibility_from_counts(vis_records(0, 0, 0, 0))
        assert vis.value == 0.0
        assert vis.status == "no-counts"

    def test_poisson_error(self):
        vis = visibility_from_counts(vis_records(40, 40, 10, 10))
        n1, n2, t = 80.0, 20.0, 100.0
        expected = math.sqrt((2 * n2 / t**2) ** 2 * 80 + (2 * n1 / t**2) ** 2 * 20)
        assert vis.std_error == pytest.approx(expected, abs=1e-12)

    def test_missing_cell_rejected(self):
        with pytest.raises(ValidationError):
            visibility_from_counts(vis_records(40, 40, 10, 10)[:3])


class TestWitnessExact:
    @pytest.mark.parametrize("space", ["X", "K"])
    def test_ideal_total_and_dimension(self, space):
        res = witness(uniform_rho(10), space=space)
        assert res.total == pytest.approx(135.0, abs=1e-9)
        assert res.certified_dimension == 10

    def test_schmidt_rank_soundness(self):
        # states with r populated modes never beat the rank-r ceiling
        for r in range(1, 11):
            coeffs = np.zeros(10, dtype=complex)
            coeffs[:r] = 1 / np.sqrt(r)
            rho = density_from_ket(ideal_state(SourceConfig(num_modes=10, coefficients=coeffs)))
            res = witness(rho, space="X")
            assert res.total <= witness_bound(10, r) + 1e-9

    def test_calibrated_noise_value(self):
        res = witness(uniform_rho(10, noise=0.5118110236220473), space="X")
        assert res.total == pytest.approx(111.6, abs=0.01)
        assert res.certified_dimension == 8

    def test_dark_pairs_flagged_not_excluded(self):
        coeffs = np.zeros(10, dtype=complex)
        coeffs[:2] = 1 / np.sqrt(2)
        rho = density_from_ket(ideal_state(SourceConfig(num_modes=10, coefficients=coeffs)))
        res = witness(rho, space="X")
        assert len(res.pair_visibilities) == 45
        assert res.pair_visibilities[(5, 6)].z.status == "no-counts"


class TestWitnessCounts:
    def simulate_pair_table(self, noise=0.0, trials=400_000, seed=0, pairs=None, d=3):
        cfg = SourceConfig.uniform(d, noise_fraction=noise)
        rho = noisy_state(cfg)
        params = CountingParams(P_S=0.006, eta_r=0.1, P_bg_idler=0.001)
        records = []
        pairs = pairs or [(j, k) for j in range(d) for k in range(j + 1, d)]
        for j, k in pairs:
            for ax in ("x", "y", "z"):
                records.extend(simulate_setting(
                    rho,
                    mub_pair_basis(j, k, ax, d, side="signal"),
                    mub_pair_basis(j, k, ax, d, side="idler"),
                    trials, params, seed,
                    setting_name=naming.witness_setting("X", j, k, ax),
                ))
        return CoincidenceTable(records=tuple(records), metadata={"D": d})

    def test_count_path_matches_exact_on_average(self):
        # corrected estimates from the mixed state itself converge to the
        # exact visibilities
        noise = 0.3
        exact = witness(uniform_rho(3, noise=noise), space="X").total
        totals, errs = [], []
        for seed in range(100):
            table = self.simulate_pair_table(noise=noise, trials=10**6, seed=seed)
            res = witness(table, space="X", corrected=True)
            totals.append(res.total)
            errs.append(res.total_err)
        sigma_mean = np.mean(errs) / math.sqrt(len(totals))
        assert abs(np.mean(totals) - exact) < 3 * sigma_mean

    def test_missing_pair_error_lists_pairs(self):
        table = self.simulate_pair_table(pairs=[(0, 1), (0, 2)])
        with pytest.raises(ValidationError, match=r"\(1, 2\)"):
            witness(table, space="X")


class TestEofExact:
    @pytest.mark.parametrize("d", range(2, 11))
    def test_ideal_reaches_log2_d(self, d):
        res = eof_bound(uniform_rho(d))
        assert res.coherence_sum == pytest.approx(math.sqrt(2 * (d - 1) / d), abs=1e-12)
        assert res.ebits == pytest.approx(math.log2(d), abs=1e-9)
        assert res.certified_dimension == d

    def test_single_pair_of_bell_state(self):
        res = eof_bound(uniform_rho(2), pair_set=[(0, 1)])
        assert res.coherence_sum == pytest.approx(1.0, abs=1e-10)
        assert res.ebits == pytest.approx(1.0, abs=1e-9)

    def test_growing_subset_curve_closed_form(self):
        res = eof_bound(uniform_rho(10))
        for n, b_n, _ in res.curve:
            assert b_n == pytest.approx(math.sqrt(2 * n * (n - 1)) / 10, abs=1e-10)
        assert res.curve[-1][0] == 10

    def test_monotone_under_added_pairs(self):
        rho = uniform_rho(6)
        pairs = [(j, k) for j in range(6) for k in range(j + 1, 6)]
        prev = -1.0
        for n in range(1, len(pairs) + 1):
            res = eof_bound(rho, pair_set=pairs[:n])
            # adding ideal pairs never decreases the bound
            assert res.ebits >= prev - 1e-12
            prev = res.ebits

    def test_k_space_matches_x_space_for_isotropic_noise(self):
        rho = uniform_rho(10, noise=0.2)
        ex = eof_bound(rho, space="X")
        ek = eof_bound(rho, space="K")
        assert ek.ebits == pytest.approx(ex.ebits, abs=1e-9)

    def test_classically_correlated_state_clamps_to_zero(self):
        # diagonal mixture with populations but no coherence
        d = 3
        mat = np.zeros((9, 9), dtype=complex)
        for j in range(3):
            mat[j * 3 + (j + 1) % 3, j * 3 + (j + 1) % 3] = 1 / 3
        res = eof_bound(DensityOperator(3, 3, mat))
        assert res.coherence_sum == 0.0
        assert res.ebits == 0.0
        assert res.certified_dimension == 1

    def test_impossible_coherence_sum_rejected(self):
        with pytest.raises(ComputationError):
            _ebits_from_b(1.5)


class TestEofCounts:
    def build_table(self, noise, trials, seed, d=4):
        cfg = SourceConfig.uniform(d, noise_fraction=noise)
        rho = noisy_state(cfg)
        params = CountingParams(P_S=0.006, eta_r=0.1, P_bg_idler=0.0005)
        records = list(simulate_setting(
            rho, x_basis(d, "signal"), x_basis(d, "idler"), trials, params, seed,
            setting_name=naming.diag_setting("X")))
        for j in range(d):
            for k in range(j + 1, d):
                for ax in ("x", "y", "z"):
                    records.extend(simulate_setting(
                        rho,
                        mub_pair_basis(j, k, ax, d, side="signal"),
                        mub_pair_basis(j, k, ax, d, side="idler"),
                        trials, params, seed,
                        setting_name=naming.witness_setting("X", j, k, ax)))
        return CoincidenceTable(records=tuple(records), metadata={"D": d})

    def test_estimator_matches_direct_elements_for_real_coherences(self):
        # the witness-visibility reconstruction of |<jj|rho|kk>| is exact when
        # the pair coherence is real: check against the matrix elements using
        # exact weights and visibilities
        rho = uniform_rho(4, noise=0.35)
        direct = eof_bound(rho)
        wit = witness(rho, space="X")
        for (j, k), pv in wit.pair_visibilities.items():
            weight = restrict_to_pair(rho, j, k).weight
            estimate = weight * (pv.x.value + pv.y.value) / 4.0
            assert estimate == pytest.approx(direct.coherences[(j, k)], abs=1e-10)

    def test_estimator_is_safe_underestimate_with_phase(self):
        cfg = SourceConfig.uniform(2, phases=[0.0, np.radians(40.0)])
        rho = density_from_ket(ideal_state(cfg))
        direct = eof_bound(rho).coherences[(0, 1)]
        pv = witness(rho, space="X").pair_visibilities[(0, 1)]
        weight = restrict_to_pair(rho, 0, 1).weight
        estimate = weight * (pv.x.value + pv.y.value) / 4.0
        assert estimate < direct
        assert estimate == pytest.approx(direct * abs(np.cos(np.radians(40.0))), abs=1e-10)

    def test_count_path_converges_to_exact(self):
        noise = 0.2
        exact = eof_bound(uniform_rho(4, noise=noise)).ebits
        vals, errs = [], []
        for seed in range(40):
            table = self.build_table(noise, trials=2 * 10**6, seed=seed)
            res = eof_bound(table, corrected=True, n_bootstrap=25, seed=seed)
            vals.append(res.ebits)
            errs.append(res.ebits_err)
        sigma_mean = np.mean(errs) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - exact) < 4 * sigma_mean

    def test_bootstrap_errors_positive(self):
        table = self.build_table(0.2, trials=10**6, seed=1)
        res = eof_bound(table, corrected=False, n_bootstrap=20, seed=5)
        assert res.ebits_err > 0
        assert res.coherence_sum_err > 0


class TestCglmpWeights:
    @pytest.mark.parametrize("d", [2, 3, 5, 8])
    def test_deterministic_local_bound_is_two(self, d):
        w = cglmp_weights(d)
        best = -np.inf
        for sa0 in range(d):
            for sa1 in range(d):
                for ib0 in range(d):
                    for ib1 in range(d):
                        val = (w[0, 0, sa0, ib0] + w[1, 0, sa1, ib0]
                               + w[0, 1, sa0, ib1] + w[1, 1, sa1, ib1])
                        best = max(best, val)
        assert best == pytest.approx(2.0, abs=1e-12)


class TestCglmpExact:
    def test_bell_state_reaches_tsirelson_value(self):
        res = cglmp(uniform_rho(2), 2)
        assert res.bell_parameter == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    @pytest.mark.parametrize("d", range(2, 11))
    def test_maximally_mixed_gives_zero(self, d):
        rho = DensityOperator(10, 10, np.eye(100) / 100)
        res = cglmp(rho, d)
        assert res.bell_parameter == pytest.approx(0.0, abs=1e-12)

    def test_known_ideal_sequence(self):
        # reference values for maximally entangled states (higher-d optima
        # computed once with the exact probability tables)
        expected = {3: 2.87293, 4: 2.89624, 6: 2.92020, 10: 2.93980}
        for d, val in expected.items():
            res = cglmp(uniform_rho(d), d)
            assert res.bell_parameter == pytest.approx(val, abs=5e-6)

    def test_affine_in_the_state(self):
        d = 4
        a = uniform_rho(d)
        b = DensityOperator(d, d, np.eye(d * d) / (d * d))
        lam = 0.3
        mix = DensityOperator(d, d, lam * a.matrix + (1 - lam) * b.matrix)
        s_mix = cglmp(mix, d).bell_parameter
        s_lin = lam * cglmp(a, d).bell_parameter + (1 - lam) * cglmp(b, d).bell_parameter
        assert s_mix == pytest.approx(s_lin, abs=1e-9)

    def test_white_noise_scaling_and_threshold(self):
        # S(p) = (1-p) S(0) on the d-mode source, so violation stops at
        # p* = 1 - 2/S(0); verify with a bisection oracle
        d = 5
        s0 = cglmp(uniform_rho(d), d).bell_parameter
        for p in (0.1, 0.25):
            s = cglmp(uniform_rho(d, noise=p), d).bell_parameter
            assert s == pytest.approx((1 - p) * s0, abs=1e-9)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = (lo + hi) / 2
            if cglmp(uniform_rho(d, noise=mid), d).bell_parameter > 2.0:
                lo = mid
            else:
                hi = mid
        assert (lo + hi) / 2 == pytest.approx(1 - 2 / s0, abs=1e-9)

    def test_product_states_respect_local_bound(self):
        rng = np.random.default_rng(17)
        for d in (2, 5, 9):
            for _ in range(50):
                u = rng.normal(size=d) + 1j * rng.normal(size=d)
                v = rng.normal(size=d) + 1j * rng.normal(size=d)
                ket = StateVector(d, d, np.outer(u, v).flatten())
                res = cglmp(density_from_ket(ket), d)
                assert res.bell_parameter <= 2.0 + 1e-9

    def test_embedded_measurement_dilutes_with_dimension(self):
        # measuring d of 10 modes: isotropic noise occupies d^2 cells while
        # the source only d, so the violation shrinks as d grows
        p = 0.41690962099125367
        rho = uniform_rho(10, noise=p)
        s0 = {d: cglmp(uniform_rho(d), d).bell_parameter for d in (2, 6, 7)}
        for d in (2, 6, 7):
            got = cglmp(rho, d).bell_parameter
            predicted = s0[d] * (1 - p) / ((1 - p) + p * d / 10)
            assert got == pytest.approx(predicted, abs=1e-9)


class TestCglmpCounts:
    def build_table(self, d, noise, trials, seed, embed=10):
        cfg = SourceConfig.uniform(embed, noise_fraction=noise)
        rho = noisy_state(cfg)
        params = CountingParams(P_S=0.006, eta_r=0.1, P_bg_idler=0.0005)
        records = []
        for s in (0, 1):
            for i in (0, 1):
                records.extend(simulate_setting(
                    rho,
                    cglmp_basis("signal", s, d, embed_dim=embed),
                    cglmp_basis("idler", i, d, embed_dim=embed),
                    trials, params, seed,
                    setting_name=naming.bell_setting(d, s, i)))
        return CoincidenceTable(records=tuple(records), metadata={"D": embed})

    def test_converges_to_exact_over_seeds(self):
        d, noise = 3, 0.2
        exact = cglmp(uniform_rho(10, noise=noise), d).bell_parameter
        vals, errs = [], []
        for seed in range(100):
            table = self.build_table(d, noise, trials=10**6, seed=seed)
            res = cglmp(table, d, corrected=True)
            vals.append(res.bell_parameter)
            errs.append(res.bell_parameter_err)
        sigma_mean = np.mean(errs) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - exact) < 3 * sigma_mean

    def test_reported_error_matches_scatter(self):
        d = 2
        vals, errs = [], []
        for seed in range(60):
            table = self.build_table(d, 0.1, trials=10**6, seed=seed)
            res = cglmp(table, d)
            vals.append(res.bell_parameter)
            errs.append(res.bell_parameter_err)
        assert np.mean(errs) == pytest.approx(np.std(vals), rel=0.35)

    def test_missing_setting_named(self):
        table = self.build_table(3, 0.0, trials=10**5, seed=0)
        partial = CoincidenceTable(
            records=tuple(r for r in table.records if r.setting != "bell:d3:s1i0"),
            metadata=table.metadata,
        )
        with pytest.raises(ValidationError, match="bell:d3:s1i0"):
            cglmp(partial, 3)


class TestViolationCurve:
    def test_exact_noise_free_violates_everywhere(self):
        points = violation_curve(SourceConfig.uniform(10), range(2, 11), path="exact")
        assert all(p.violated for p in points)
        assert all(p.bell_parameter > 2.8 for p in points)

    def test_sampled_emits_both_variants(self):
        cfg = SourceConfig.uniform(10, noise_fraction=0.41690962099125367)
        points = violation_curve(cfg, [2, 6, 7], path="sampled",
                                 params=CountingParams(P_S=0.006, eta_r=0.1),
                                 trials=5_000_000, seed=3)
        variants = {(p.d, p.variant) for p in points}
        assert variants == {(2, "raw"), (2, "corrected"), (6, "raw"), (6, "corrected"),
                            (7, "raw"), (7, "corrected")}

    def test_bad_range_rejected(self):
        with pytest.raises(ValidationError):
            violation_curve(SourceConfig.uniform(4), [2, 7], path="exact")
        with pytest.raises(ValidationError):
            violation_curve(SourceConfig.uniform(4), [], path="exact")
        with pytest.raises(ValidationError):
            violation_curve(SourceConfig.uniform(4), [2, 3], path="sampled")
