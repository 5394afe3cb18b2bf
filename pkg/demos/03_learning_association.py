# %% [markdown]
# # Learning who serves whom
#
# Four MECs, four users, four FoVs.  Every slot the controller picks a serving
# MEC per user and a rendering MEC per requested FoV.  The reward is the summed
# PSNR, so a user counts only when the frame arrives within 30 ms.  We train a
# centralized DQN for a short while and compare it with the nearest-MEC rule.
#
# The full comparison in the acceptance suite trains for 300 episodes.  This
# demo runs 60 so it finishes in under a minute.

# %%
from pathlib import Path
import tempfile

import numpy as np

from vrmec import harness
from vrmec.config import load_config, override

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "desk.yaml")
cfg = override(override(cfg, "agent.episodes", 60), "harness.eval_episodes", 1)
out = Path(tempfile.mkdtemp())

# %%
results = {}
for algorithm in ("nearest", "cdqn"):
    run = harness.run_experiment(override(cfg, "agent.algorithm", algorithm), out / algorithm)
    results[algorithm] = run
    rewards = [float(r[1]) for r in run.metrics]
    print(f"{algorithm}: first 10 episodes {np.mean(rewards[:10]):.1f}, "
          f"last 10 {np.mean(rewards[-10:]):.1f}, greedy evaluation "
          f"{float(run.eval_metrics[0][1]):.1f}")

# %% [markdown]
# Every run leaves a metrics CSV and checkpoints behind.  The same ranking the
# `vrmec report` command prints:

# %%
print(harness.format_report(harness.compare_report(
    [out / "nearest" / "eval_metrics.csv", out / "cdqn" / "eval_metrics.csv"], window=1)))
