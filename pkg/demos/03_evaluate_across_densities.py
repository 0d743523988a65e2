"""Sweep traffic density 1..6 cars with a fixed policy and print the win
curve — the game's single difficulty knob.

Run: python3 demos/03_evaluate_across_densities.py   (~10 s)
"""

from quantumfrog import Action, EnvConfig
from quantumfrog.evaluation import ConstantPolicy, evaluate_densities
from quantumfrog.tabular import train_tabular
from quantumfrog.evaluation import TabularGreedyPolicy

print("always-UP baseline (blind rush):")
report = evaluate_densities(
    ConstantPolicy(Action.UP), EnvConfig(frogs=1, cars=1), episodes=200, base_seed=0
)
for row in report.rows:
    print(f"  {row.cars} cars: win={row.joint_win:5.1%}  steps={row.avg_steps:5.1f}")

print("\ntabular agent trained at 1 car, evaluated everywhere:")
table, _ = train_tabular(EnvConfig(frogs=1, cars=1), episodes=20_000, seed=1000)
report = evaluate_densities(
    TabularGreedyPolicy(table), EnvConfig(frogs=1, cars=1), episodes=200, base_seed=0
)
for row in report.rows:
    print(f"  {row.cars} cars: win={row.joint_win:5.1%}  steps={row.avg_steps:5.1f}")

print("\nTabular tables index raw observations, so every unseen car layout "
      "is a zero row — density generalisation is what the neural stages fix.")
