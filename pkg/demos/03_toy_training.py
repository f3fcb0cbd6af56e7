"""Train the toy predictor with and without the causal ranking
regularizer and compare average causal error (ACE).

Kept deliberately small so it runs in under a minute; the acceptance
suite runs the full-scale comparison (2,000 scenes, 3 seeds).
"""

from causal_crowds.metrics import evaluate_split
from causal_crowds.scenarios import Split, SplitSpec, generate_split
from causal_crowds.training import TrainMode, predict_toy, train_toy

train_records, _ = generate_split(SplitSpec(Split.ID, 150, rng_seed=21))
test_records, _ = generate_split(SplitSpec(Split.ID, 40, rng_seed=22))

for mode in (TrainMode.BASELINE, TrainMode.RANKING):
    model, log = train_toy(train_records, mode, epochs=10, seed=1)
    report = evaluate_split(
        test_records, predict_toy(model, test_records))
    last = log[-1]
    print(f"{mode.value:9s} task_loss={last['task_loss']:.4f} "
          f"causal_loss={last['causal_loss']:.4f} | held-out "
          f"ade={report.ade:.4f} ace={report.ace:.4f}")
