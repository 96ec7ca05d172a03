"""The whole protocol at desk scale: raw against projected arms.

One experiment builds class bases from the train partition, projects
every partition through them, trains the network several times per arm,
and reports mean and deviation per partition next to the deterministic
subspace baseline. Running it twice yields byte-identical reports.
"""

from podclass.dataset import (
    SplitPolicy,
    SyntheticSpec,
    generate_synthetic,
    split_dataset,
)
from podclass.experiment import (
    ExperimentConfig,
    TruncationRule,
    render_report,
    run_experiment,
)

spec = SyntheticSpec(
    class_count=3, frames_per_class=60, image_side=16, intrinsic_rank=3,
    noise_level=0.25, seed=6,
)
samples = generate_synthetic(spec)
split = split_dataset(samples, SplitPolicy.for_samples(samples), seed=6)
print("frame counts:", split.counts())

config = ExperimentConfig(
    rules=(TruncationRule(rank=3), TruncationRule()),
    runs=3, epochs=10, batch_size=32, learning_rate=1e-3, seed=0,
    channels=(4, 8, 8), hidden=16,
)
report = run_experiment(split, config)

print("\nnetwork accuracy, mean and sample deviation over runs:")
for row in report["summary"]:
    print("  " + row.replace("\t", "  "))

print("\nsubspace baseline accuracy (unprojected frames):")
for arm in report["protocol"]["arm_order"]:
    unseen = report["arms"][arm]["baseline"]["unseen"]["accuracy"]
    print(f"  {arm}: unseen {unseen:.3f}")

again = run_experiment(split, config)
print(f"\nsecond invocation byte-identical: "
      f"{render_report(again) == render_report(report)}")
