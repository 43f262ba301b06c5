"""Block-design contamination, end to end at desk scale.

Generates a session whose only structure is slow per-block drift (no
stimulus-evoked signal at all), then shows that within-block splits report
spectacular accuracy while block-disjoint splits collapse to chance, and the
auditor calls the dataset CONTAMINATED.

Run: python demos/01_contamination_audit.py   (~1 minute)
"""
import blockaudit as ba

CLASSES, TRIALS, CHANNELS, RATE = 8, 20, 16, 256.0

schedule = ba.make_block_schedule(
    CLASSES, TRIALS, stimulus_ms=500, blank_ms=1000, seed=0,
    blocks_per_class=4,
)
session = ba.generate_session(
    schedule, channels=CHANNELS, sample_rate=RATE,
    drift=ba.DriftParams(dc_sigma=5.0, walk_sigma=0.05, noise_sigma=1.0),
    evoked=ba.EvokedParams(),  # disabled: there is nothing to decode
    subject_id="s01", seed=0,
)
print(f"session: {CLASSES} classes x {TRIALS} trials, {CHANNELS} channels, "
      f"{session.duration_s:.0f} s of drift + noise, zero class signal\n")

spec = ba.GridSpec(
    classifiers=("knn", "svm"),
    windows_ms=(440.0, 100.0),
    channel_counts=(0, 4),
    splits=(
        ba.SplitSpec("within_block", (0.8, 0.1, 0.1)),
        ba.SplitSpec("block_disjoint", (0.5, 0.25, 0.25)),
    ),
    filter_configs=(ba.FilterConfig(name="raw"),),
    seed=1,
    train_config=ba.TrainConfig(seed=0, epochs=50, learning_rate=3e-5),
    svm_l2=1e-3,
)
result = ba.run_grid(session, spec)

print(f"{'split':<16}{'window':>8}{'chans':>7}{'knn':>8}{'svm':>8}")
for regime in ("within_block", "block_disjoint"):
    for w in spec.windows_ms:
        for ch in result.channel_counts:
            row = [
                result.cells[("raw", regime, w, ch, k)].accuracy
                for k in ("knn", "svm")
            ]
            print(f"{regime:<16}{w:>7g}ms{ch:>7}{row[0]:>8.3f}{row[1]:>8.3f}")

verdict = ba.issue_verdict(result)
print(f"\nchance level: {1 / CLASSES:.3f}")
print(f"verdict: {verdict.status.value}")
for finding in verdict.evidence:
    print(f"  - {finding.name} = {finding.value}  ({finding.detail})")
