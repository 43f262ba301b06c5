import numpy as np
import pytest

import blockaudit as ba
from blockaudit import splits as sp
from blockaudit.audit import GridResult, issue_verdict
from blockaudit.report import (
    ablation_csv_text,
    fmt_accuracy,
    grid_csv_text,
    ranking_csv_text,
    spectra_csv_text,
)


def empty_grid():
    return GridResult(
        cells={}, windows_ms=(), channel_counts=(), classifiers=("knn", "svm"),
        filter_names=(), regimes=(), seed=0,
    )


class TestGridCsv:
    def test_empty_grid_header_only(self):
        text = grid_csv_text(empty_grid())
        assert text == "filter,split,window_ms,channels,knn,svm\n"

    def test_empty_grid_verdict_inconclusive(self):
        verdict = issue_verdict(empty_grid())
        assert verdict.status is ba.VerdictStatus.INCONCLUSIVE

    def test_two_by_two_grid_has_four_rows(self, drift_session):
        spec = ba.GridSpec(
            classifiers=("knn",),
            windows_ms=(440.0, 100.0),
            channel_counts=(0, 4),
            splits=(ba.SplitSpec(sp.WITHIN_BLOCK, (0.8, 0.1, 0.1)),),
            filter_configs=(ba.FilterConfig(name="raw"),),
            seed=1,
        )
        result = ba.run_grid(drift_session, spec)
        lines = grid_csv_text(result).strip().splitlines()
        assert lines[0] == "filter,split,window_ms,channels,knn"
        assert len(lines) == 1 + 4

    def test_errored_cells_rendered_na(self, drift_session):
        spec = ba.GridSpec(
            classifiers=("knn",),
            windows_ms=(440.0, 1.0),  # 1 ms is empty at 256 Hz
            channel_counts=(0,),
            splits=(ba.SplitSpec(sp.WITHIN_BLOCK, (0.8, 0.1, 0.1)),),
            filter_configs=(ba.FilterConfig(name="raw"),),
            seed=1,
        )
        result = ba.run_grid(drift_session, spec)
        assert ",n/a" in grid_csv_text(result)

    def test_accuracy_formatting_stable(self):
        assert fmt_accuracy(0.95249) == "0.9525"


class TestOtherCsv:
    def test_spectra_csv(self):
        spectrum = ba.power_spectrum(np.ones((2, 256)), 64, 0.5,
                                     sample_rate=128.0)
        lines = spectra_csv_text(spectrum).strip().splitlines()
        assert lines[0] == "freq_hz,ch0,ch1"
        assert len(lines) == 1 + 33

    def test_ranking_csv(self):
        scores = np.array([0.5, 2.0, 1.0])
        order = np.array([1, 2, 0])
        lines = ranking_csv_text(scores, order).strip().splitlines()
        assert lines[0] == "channel,score"
        assert lines[1].startswith("1,")

    def test_ablation_csv(self, drift_session):
        spec = ba.GridSpec(
            classifiers=("knn",),
            windows_ms=(440.0,),
            channel_counts=(0,),
            splits=(ba.SplitSpec(sp.WITHIN_BLOCK, (0.8, 0.1, 0.1)),),
            filter_configs=(ba.FilterConfig(name="raw"),),
            seed=1,
        )
        ablation = ba.highpass_ablation(drift_session, [14.0], spec)
        lines = ablation_csv_text(ablation).strip().splitlines()
        assert lines[0].startswith("cutoff_hz,")
        assert len(lines) == 2
        assert lines[1].startswith("14,raw,within_block,440,16,knn,")


class TestZscoreStage:
    def test_before_filter_pipeline_runs(self, drift_session):
        # the unconventional segment -> z-score -> filter order, for
        # comparison runs; still detects the contamination
        fc = ba.FilterConfig(
            name="reversed",
            filters=(ba.FilterSpec.notch(49.0, 51.0, 256.0, 2),),
            zscore_scope="per_trial_channel",
            zscore_stage="before_filter",
        )
        spec = ba.GridSpec(
            classifiers=("knn",),
            windows_ms=(440.0,),
            channel_counts=(0,),
            splits=(ba.SplitSpec(sp.WITHIN_BLOCK, (0.8, 0.1, 0.1)),),
            filter_configs=(fc,),
            seed=2,
        )
        result = ba.run_grid(drift_session, spec)
        cell = next(iter(result.cells.values()))
        assert cell.ok

    def test_stage_validation(self):
        with pytest.raises(ValueError, match="zscore_stage"):
            ba.FilterConfig(name="x", zscore_stage="sideways")
