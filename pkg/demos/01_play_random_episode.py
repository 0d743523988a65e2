"""Roll one random episode and print the board every tick.

The world is frozen between joint actions: nothing moves until every active
frog has committed, then frogs move, then cars sweep their rows.

Run: python3 demos/01_play_random_episode.py [seed]
"""

import sys

import numpy as np

from quantumfrog import Action, EnvConfig, QuantumFrogEnv, render

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
rng = np.random.default_rng(seed)

env = QuantumFrogEnv(EnvConfig(frogs=2, cars=3, speeds=(1, 2)))
env.reset(seed)
print(f"tick 0\n{render(env.state)}\n")

total = [0.0, 0.0]
while not env.done:
    active = env.active_frogs()
    actions = [int(rng.integers(0, 5)) for _ in active]
    res = env.step(actions)
    for i, r in enumerate(res.rewards):
        total[i] += r
    names = {i: Action(a).name for i, a in zip(active, actions)}
    print(f"tick {env.state.tick}  actions={names}  rewards={res.rewards}")
    print(render(env.state))
    print()

print(f"outcome: {res.outcome.name}   returns: A={total[0]:+.0f} B={total[1]:+.0f}")
