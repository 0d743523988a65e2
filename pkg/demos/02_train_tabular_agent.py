"""Train a tabular Q-learner on the single-car setting and watch it
rediscover the rush strategy: straight up, every tick, seven moves.

Run: python3 demos/02_train_tabular_agent.py   (~5 s)
"""

from quantumfrog import EnvConfig, QuantumFrogEnv, render
from quantumfrog.evaluation import TabularGreedyPolicy, evaluate
from quantumfrog.tabular import train_tabular

config = EnvConfig(frogs=1, cars=1, speeds=(1,))
table, log = train_tabular(config, episodes=20_000, seed=1000)

print(f"visited {len(table)} distinct states")
for row in log[:: max(1, len(log) // 8)]:
    print(f"  ep {row.episode:>6}  eps={row.epsilon:.3f}  "
          f"win[last 500]={row.rolling_win_rate:.2f}")

result = evaluate(TabularGreedyPolicy(table), config, episodes=200, base_seed=0)
print(f"\ngreedy eval: win={result.joint_win:.1%}  avg steps={result.avg_steps:.1f}")

env = QuantumFrogEnv(config)
obs = env.reset(123)
policy = TabularGreedyPolicy(table)
print("\none greedy episode:")
while not env.done:
    obs = env.step([policy.act(obs)[0]]).observation
    print(render(env.state), end="\n\n")
