"""Clustering coefficient, detector error rate, and report assembly."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mctsteg import metrics
from mctsteg.errors import DimensionError
from mctsteg.types import ModificationMap


def naive_fcc(values: np.ndarray, n: int) -> float:
    """Independent reference: explicit window walk in both directions."""

    def freq(a, k):
        rows, cols = a.shape
        windows = cols - n
        if windows <= 0:
            return 0.0
        count = 0
        for i in range(rows):
            for j in range(windows):
                if all(a[i, j + m] == k for m in range(n + 1)):
                    count += 1
        return count / (rows * windows)

    return 0.25 * (
        freq(values, 1)
        + freq(values, -1)
        + freq(values.T, 1)
        + freq(values.T, -1)
    )


class TestFcc:
    def test_no_modifications_scores_zero(self):
        assert metrics.fcc(ModificationMap(np.zeros((8, 8))), 2) == 0.0

    def test_uniform_polarity_scores_half(self):
        # Every window is a +1 run, no window is a -1 run: each direction
        # contributes 1 + 0, so the mean of the four frequencies is 0.5.
        assert metrics.fcc(ModificationMap(np.ones((6, 6))), 2) == 0.5
        assert metrics.fcc(ModificationMap(np.full((6, 6), -1)), 3) == 0.5

    def test_alternating_polarities_score_zero(self):
        values = np.indices((8, 8)).sum(axis=0) % 2 * 2 - 1
        assert metrics.fcc(ModificationMap(values), 2) == 0.0

    def test_single_horizontal_run(self):
        values = np.zeros((4, 5), dtype=int)
        values[1, 1:4] = 1  # one run of three
        got = metrics.fcc(ModificationMap(values), 2)
        # Horizontal: 1 run over 4*3 windows; vertical (5x4 transposed
        # geometry): 0 runs over 5*2 windows.
        assert got == pytest.approx(0.25 * (1.0 / 12.0), abs=1e-15)

    def test_matches_naive_reference(self, gen):
        values = gen.integers(-1, 2, size=(16, 16))
        m = ModificationMap(values)
        for n in (2, 3, 4):
            assert metrics.fcc(m, n) == pytest.approx(
                naive_fcc(values, n), abs=1e-12
            )

    def test_transpose_symmetry(self, gen):
        values = gen.integers(-1, 2, size=(10, 10))
        a = metrics.fcc(ModificationMap(values), 3)
        b = metrics.fcc(ModificationMap(values.T), 3)
        assert a == pytest.approx(b, abs=1e-15)

    def test_polarity_flip_invariance(self, gen):
        values = gen.integers(-1, 2, size=(9, 9))
        a = metrics.fcc(ModificationMap(values), 2)
        b = metrics.fcc(ModificationMap(-values), 2)
        assert a == pytest.approx(b, abs=1e-15)

    @given(
        hnp.arrays(np.int8, (7, 7), elements=st.integers(-1, 1)),
        st.integers(2, 5),
    )
    def test_nonincreasing_in_order_and_bounded(self, values, n):
        m = ModificationMap(values)
        a = metrics.fcc(m, n)
        b = metrics.fcc(m, n + 1)
        assert 0.0 <= b <= a + 1e-12
        assert a <= 1.0

    def test_order_below_two_rejected(self):
        with pytest.raises(ValueError):
            metrics.fcc(ModificationMap(np.zeros((5, 5))), 1)

    def test_order_beyond_dimensions_rejected(self):
        with pytest.raises(DimensionError):
            metrics.fcc(ModificationMap(np.zeros((3, 3))), 4)


class TestPe:
    def test_perfect_separation(self):
        assert metrics.p_e([0.1, 0.2, 0.3], [0.7, 0.8, 0.9]) == 0.0

    def test_identical_distributions(self):
        assert metrics.p_e([0.3, 0.7], [0.3, 0.7]) == 0.5

    def test_reference_value_one_sixth(self):
        # Best threshold misclassifies exactly one of the three covers:
        # (1/3 + 0) / 2 = 1/6.
        got = metrics.p_e([0.1, 0.2, 0.6], [0.5, 0.7, 0.9])
        assert got == pytest.approx(1.0 / 6.0, abs=1e-15)

    def test_inverted_detector_still_capped_at_half(self):
        # Stego scoring lower than cover: no threshold beats guessing,
        # and the sweep must not return anything above 0.5.
        assert metrics.p_e([0.8, 0.9], [0.1, 0.2]) == 0.5

    @given(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=20),
        st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=20),
    )
    def test_bounds(self, cover, stego):
        got = metrics.p_e(cover, stego)
        assert 0.0 <= got <= 0.5

    def test_monotone_relabeling_invariance(self, gen):
        cover = gen.uniform(0, 1, size=12)
        stego = gen.uniform(0, 1, size=12)
        a = metrics.p_e(cover, stego)
        squash = lambda x: x**3 + 2.0 * x  # noqa: E731 - strictly increasing
        b = metrics.p_e(squash(cover), squash(stego))
        assert a == pytest.approx(b, abs=1e-15)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            metrics.p_e([], [0.5])


class TestReport:
    def mods(self, gen, count=3):
        return [
            ModificationMap(gen.integers(-1, 2, size=(8, 8)))
            for _ in range(count)
        ]

    def test_summarize_method_means(self, gen):
        mods = self.mods(gen)
        from mctsteg.simulator import change_rate

        s = metrics.summarize_method("plain", mods, fcc_orders=(2, 3))
        assert s.method == "plain"
        assert s.images == 3
        assert s.mean_change_rate == pytest.approx(
            np.mean([change_rate(m) for m in mods])
        )
        assert set(s.mean_fcc) == {2, 3}
        assert s.mean_fcc[2] == pytest.approx(
            np.mean([metrics.fcc(m, 2) for m in mods])
        )
        assert s.p_e is None

    def test_empty_method_rejected(self):
        with pytest.raises(ValueError):
            metrics.summarize_method("plain", [])

    def test_json_schema_and_keys(self, gen):
        rows = [
            metrics.summarize_method("plain", self.mods(gen), detector_pe=0.4),
            metrics.summarize_method("tree", self.mods(gen)),
        ]
        payload = json.loads(metrics.Report(rows).to_json())
        assert payload["schema"] == "mctsteg-report-v1"
        assert [r["method"] for r in payload["rows"]] == ["plain", "tree"]
        assert payload["rows"][0]["p_e"] == 0.4
        assert payload["rows"][1]["p_e"] is None
        assert set(payload["rows"][0]["mean_fcc"]) == {"2", "3", "4"}

    def test_text_table_lists_all_methods(self, gen):
        rows = [
            metrics.summarize_method("plain", self.mods(gen)),
            metrics.summarize_method("tree", self.mods(gen), detector_pe=0.25),
        ]
        text = metrics.Report(rows).to_text()
        lines = text.splitlines()
        assert lines[0].split()[:2] == ["method", "images"]
        assert len(lines) == 3
        assert "plain" in lines[1] and "tree" in lines[2]
        assert "0.2500" in lines[2]

    def test_empty_report_renders_header(self):
        text = metrics.Report([]).to_text()
        assert text.splitlines()[0].startswith("method")
