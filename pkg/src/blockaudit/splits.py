"""Split regimes and the block relabeling transform.

Three regimes cover the leakage spectrum: ``within_block`` reproduces the
flawed protocol (every test trial shares its block with training trials),
``block_disjoint`` assigns whole blocks to one partition (leakage-free), and
``leave_one_subject_out`` holds out entire subjects.  ``relabel_blocks``
rewrites labels to block identity, the probe that exposes what a classifier
is really keying on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TrialMatrix

WITHIN_BLOCK = "within_block"
BLOCK_DISJOINT = "block_disjoint"
LEAVE_ONE_SUBJECT_OUT = "leave_one_subject_out"


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/validation/test indices under a named regime."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    regime: str
    num_trials: int
    held_out_subject: str | None = None

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        parts = [self.train, self.validation, self.test]
        union = np.concatenate(parts)
        if union.size != np.unique(union).size:
            raise ValueError("split partitions overlap")
        if union.size and (union.min() < 0 or union.max() >= self.num_trials):
            raise ValueError("split indices out of range")
        if self.train.size == 0 or self.test.size == 0:
            raise ValueError("train and test must be non-empty")

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "held_out_subject": self.held_out_subject,
            "num_trials": self.num_trials,
            "train": self.train.tolist(),
            "validation": self.validation.tolist(),
            "test": self.test.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(
            train=np.asarray(d["train"], dtype=np.int64),
            validation=np.asarray(d["validation"], dtype=np.int64),
            test=np.asarray(d["test"], dtype=np.int64),
            regime=d["regime"],
            num_trials=int(d["num_trials"]),
            held_out_subject=d.get("held_out_subject"),
        )


def _check_fractions(fractions) -> np.ndarray:
    f = np.asarray(fractions, dtype=np.float64)
    if f.shape != (3,) or np.any(f <= 0) or abs(f.sum() - 1.0) > 1e-9:
        raise ValueError("fractions must be 3 positive numbers summing to 1")
    return f


def _apportion(n: int, fractions: np.ndarray, rng) -> np.ndarray:
    """Largest-remainder rounding of n * fractions; remainder ties are
    broken in an order drawn from rng."""
    quotas = n * fractions
    counts = np.floor(quotas).astype(np.int64)
    remainder = quotas - counts
    tie_break = rng.permutation(len(fractions))
    order = np.lexsort((tie_break, -remainder))
    for i in range(int(n - counts.sum())):
        counts[order[i % len(order)]] += 1
    # a partitioned group that sends trials to test must feed train too
    if counts[2] > 0 and counts[0] == 0:
        donor = 2 if counts[2] > 1 or counts[1] == 0 else 1
        counts[donor] -= 1
        counts[0] += 1
    return counts


def split_within_block(
    trials: TrialMatrix, fractions=(0.8, 0.1, 0.1), seed: int = 0
) -> SplitPlan:
    """Stratified random assignment inside every block.

    By construction every test trial's block contributes trials to the
    training set: the contaminated regime.  Each block needs at least 3
    trials.
    """
    f = _check_fractions(fractions)
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for block in np.unique(trials.block_ids):
        idx = np.flatnonzero(trials.block_ids == block)
        if idx.size < 3:
            raise ValueError(
                f"block {block} has {idx.size} trials; need >= 3 to stratify"
            )
        counts = _apportion(idx.size, f, rng)
        shuffled = rng.permutation(idx)
        bounds = np.cumsum(counts)[:2]
        for part, chunk in zip(parts, np.split(shuffled, bounds)):
            part.append(chunk)
    train, val, test = (np.concatenate(p) for p in parts)
    return SplitPlan(
        train=train, validation=val, test=test,
        regime=WITHIN_BLOCK, num_trials=trials.num_trials,
    )


def _is_block_design(trials: TrialMatrix) -> bool:
    for block in np.unique(trials.block_ids):
        if np.unique(trials.labels[trials.block_ids == block]).size > 1:
            return False
    return True


def split_block_disjoint(
    trials: TrialMatrix, fractions=(0.8, 0.1, 0.1), seed: int = 0
) -> SplitPlan:
    """Assign whole blocks to exactly one partition (no block leaks).

    On block-design data, blocks are stratified by class so every class
    appears in the training set, which requires at least 3 blocks per class.
    Rapid-event (mixed) blocks are apportioned globally and need at least 3
    blocks overall.
    """
    f = _check_fractions(fractions)
    rng = np.random.default_rng(seed)
    blocks = np.unique(trials.block_ids)

    if _is_block_design(trials):
        block_class = {
            int(b): int(trials.labels[trials.block_ids == b][0]) for b in blocks
        }
        groups = [
            np.array([b for b in blocks if block_class[int(b)] == c])
            for c in np.unique(list(block_class.values()))
        ]
        for g in groups:
            if g.size < 3:
                raise ValueError(
                    "block-disjoint stratification needs >= 3 blocks per "
                    f"class; a class has only {g.size}"
                )
    else:
        if blocks.size < 3:
            raise ValueError("block-disjoint split needs >= 3 blocks")
        groups = [blocks]

    parts: list[list[np.ndarray]] = [[], [], []]
    for g in groups:
        counts = _apportion(g.size, f, rng)
        shuffled = rng.permutation(g)
        bounds = np.cumsum(counts)[:2]
        for part, chunk in zip(parts, np.split(shuffled, bounds)):
            if chunk.size:
                part.append(np.flatnonzero(np.isin(trials.block_ids, chunk)))
    train, val, test = (
        np.concatenate(p) if p else np.array([], dtype=np.int64) for p in parts
    )
    return SplitPlan(
        train=train, validation=val, test=test,
        regime=BLOCK_DISJOINT, num_trials=trials.num_trials,
    )


def split_leave_one_subject_out(
    trials: TrialMatrix, held_out_subject: str
) -> SplitPlan:
    """Test on one subject, train on all others; no validation set."""
    subjects = np.asarray(trials.subject_ids).astype(str)
    if np.unique(subjects).size < 2:
        raise ValueError("leave-one-subject-out needs >= 2 subjects")
    mask = subjects == str(held_out_subject)
    if not mask.any():
        raise ValueError(f"unknown subject {held_out_subject!r}")
    return SplitPlan(
        train=np.flatnonzero(~mask),
        validation=np.array([], dtype=np.int64),
        test=np.flatnonzero(mask),
        regime=LEAVE_ONE_SUBJECT_OUT,
        num_trials=trials.num_trials,
        held_out_subject=str(held_out_subject),
    )


def loso_round_robin(trials: TrialMatrix) -> list[SplitPlan]:
    """One leave-one-subject-out plan per subject, in sorted subject order."""
    subjects = sorted(set(np.asarray(trials.subject_ids).astype(str)))
    return [split_leave_one_subject_out(trials, s) for s in subjects]


def relabel_blocks(trials: TrialMatrix) -> TrialMatrix:
    """Replace class labels with dense block indices.

    The trial data is untouched bit for bit; the original labels move to
    ``stimulus_labels``.  On block-design data this is only a renaming; on
    rapid-event data the new labels are uncorrelated with the stimulus.
    """
    _, dense = np.unique(trials.block_ids, return_inverse=True)
    return trials.replace(
        labels=dense.astype(np.int64),
        stimulus_labels=trials.labels.copy(),
    )
